use std::fs::File;

use ridgecast::bridge::{compare_variants, CalendarPreset, NowcastConfig, ReleaseCalendar, Variant};
use ridgecast::dataset::{load_panel, Panel, PanelSchema, Quarter};
use ridgecast::screen::ScreenConfig;
use ridgecast::Exec;

use super::{alpha_grid, csv_error, finish_csv, output_dir, require_file, resolve_seed, split_list, write_output};
use crate::args::NowcastArgs;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

/// Parses `5`, `1-13` or `5,9,13` (and mixtures) into sorted distinct weeks.
pub fn parse_weeks(s: &str) -> Result<Vec<u8>> {
    let bad = || CliError::Config(format!("bad week list '{s}'"));
    let mut weeks = Vec::new();
    for item in split_list(s) {
        match item.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u8, u8) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                weeks.extend(a..=b);
            }
            None => weeks.push(item.parse().map_err(|_| bad())?),
        }
    }
    weeks.sort_unstable();
    weeks.dedup();
    if weeks.is_empty() || weeks.iter().any(|w| !(1..=13).contains(w)) {
        return Err(CliError::Config(format!("weeks '{s}' must lie in 1..13")));
    }
    Ok(weeks)
}

fn calendar(spec: &str, panel: &Panel, m: &mut Manifest) -> Result<ReleaseCalendar> {
    let cal = if spec.eq_ignore_ascii_case("metadata") {
        ReleaseCalendar::from_metadata(panel)?
    } else if let Ok(preset) = spec.parse::<CalendarPreset>() {
        ReleaseCalendar::preset(preset, panel)?
    } else {
        let path = require_file(Some(spec.into()), "calendar")?;
        let file = File::open(&path).map_err(CliError::io(&path))?;
        ReleaseCalendar::read_csv(file)?.checked(panel)?
    };
    m.set("calendar", spec);
    // the resolved schedule, so preset revisions cannot change a rerun silently
    for (id, entries) in cal.entries() {
        let list: Vec<String> = entries.iter().map(|(sub, w)| format!("{sub}@{w}")).collect();
        m.set(format!("calendar.{id}"), list.join(" "));
    }
    Ok(cal)
}

pub fn run(args: NowcastArgs) -> Result<()> {
    let data = require_file(args.data.clone(), "data")?;
    let meta = require_file(args.meta.clone(), "meta")?;
    let dir = output_dir(args.out.clone())?;
    let mut m = Manifest::new("nowcast");
    m.set("seed", resolve_seed(args.seed));
    m.set("data", data.display());
    m.set("meta", meta.display());

    let oos_start: Quarter = args
        .oos_start
        .as_deref()
        .ok_or_else(|| CliError::Config("--oos-start is required (e.g. 2015Q1)".into()))?
        .parse()?;
    let oos_end: Option<Quarter> = args.oos_end.as_deref().map(str::parse).transpose()?;
    let variants = match &args.variant {
        Some(list) => split_list(list).iter().map(|v| v.parse()).collect::<ridgecast::Result<Vec<Variant>>>()?,
        None => Variant::STANDARD.to_vec(),
    };
    if variants.is_empty() {
        return Err(CliError::Config("--variant lists no variants".into()));
    }
    let weeks = parse_weeks(args.weeks.as_deref().unwrap_or("1-13"))?;

    let mut cfg = NowcastConfig::new(oos_start);
    cfg.screen = ScreenConfig::tau(args.tau.unwrap_or(0.1))?;
    cfg.grid = alpha_grid(args.alpha_min, args.alpha_max, args.alpha_count, &mut m)?;
    cfg.design.weekly_aggregation = args.aggregation.as_deref().unwrap_or("mean").parse()?;
    cfg.design.target_lag = args.target_lag;
    cfg.oos_end = oos_end;
    cfg.training_gap = args.training_gap.unwrap_or(cfg.training_gap);
    cfg.min_training = args.min_training.unwrap_or(cfg.min_training);
    cfg.weeks = weeks;
    cfg.exec = Exec::Parallel;

    let panel = load_panel(&data, &meta, &PanelSchema::default())?;
    let cal = calendar(args.calendar.as_deref().unwrap_or("ea"), &panel, &mut m)?;
    m.set("variants", variants.iter().map(|v| v.name()).collect::<Vec<_>>().join(","));
    m.set("weeks", cfg.weeks.iter().map(u8::to_string).collect::<Vec<_>>().join(","));
    m.set("oos_start", oos_start);
    m.set("oos_end", oos_end.map_or("last".to_string(), |q| q.to_string()));
    if let ScreenConfig::Tau(t) = cfg.screen {
        m.set("tau", t);
    }
    m.set("aggregation", format!("{:?}", cfg.design.weekly_aggregation).to_lowercase());
    m.set("target_lag", cfg.design.target_lag.map_or("none".to_string(), |l| l.to_string()));
    m.set("training_gap", cfg.training_gap);
    m.set("min_training", cfg.min_training);
    m.set("ridge.standardize", cfg.ridge.standardize);
    m.set("ridge.penalize_intercept", cfg.ridge.penalize_intercept);

    let table = compare_variants(&panel, &cal, &variants, &cfg)?;
    let first = table.runs[0].oos_quarters.first().copied();
    let last = table.runs[0].oos_quarters.last().copied();
    if let (Some(a), Some(b)) = (first, last) {
        println!("RMSFE over {a}..{b} ({} quarters); * marks the column minimum", table.runs[0].oos_quarters.len());
    }
    print!("{}", table.to_text());

    write_output(&dir, "rmsfe.csv", &mut m, |w| table.write_csv(w))?;
    write_output(&dir, "paths.csv", &mut m, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["variant", "quarter", "week", "nowcast", "actual", "error"])
            .map_err(csv_error)?;
        for run in &table.runs {
            run.write_paths(&mut out)?;
        }
        finish_csv(out)
    })?;
    m.write(&dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn week_lists() {
        assert_eq!(parse_weeks("5").unwrap(), vec![5]);
        assert_eq!(parse_weeks("1-3,9, 2").unwrap(), vec![1, 2, 3, 9]);
        assert!(parse_weeks("0").is_err());
        assert!(parse_weeks("5-14").is_err());
        assert!(parse_weeks("x").is_err());
    }
}
