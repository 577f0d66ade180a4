//! `screen` and `fit` on a wide CSV of named numeric columns.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ridgecast::ridge::{ridge_after_selection, RidgeOptions};
use ridgecast::screen::{screen_with, ScreenConfig, ScreenResult};
use ridgecast::Exec;

use super::{alpha_grid, csv_error, finish_csv, output_dir, require_file, resolve_seed, split_list, write_output};
use crate::args::RegressArgs;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

struct Problem {
    y: DVector<f64>,
    officials: DMatrix<f64>,
    official_names: Vec<String>,
    candidates: DMatrix<f64>,
    candidate_names: Vec<String>,
}

fn read_wide(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(CliError::io(path))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(|h| h.trim().to_string()).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| ridgecast::Error::Parse {
                row: i + 2,
                message: format!("column {} holds non-numeric '{field}'", headers[j]),
            })?;
            if !v.is_finite() {
                return Err(ridgecast::Error::Parse {
                    row: i + 2,
                    message: format!("column {} holds non-finite {v}", headers[j]),
                }
                .into());
            }
            columns[j].push(v);
        }
    }
    Ok((headers, columns))
}

fn load(args: &RegressArgs, m: &mut Manifest) -> Result<Problem> {
    let data = require_file(args.data.clone(), "data")?;
    let target = args
        .target
        .clone()
        .ok_or_else(|| CliError::Config("--target is required".into()))?;
    m.set("data", data.display());
    m.set("target", &target);
    let (headers, columns) = read_wide(&data)?;
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("column '{name}' not found in {}", data.display())))
    };
    let t = columns.first().map_or(0, Vec::len);
    let y = DVector::from_vec(columns[find(&target)?].clone());

    let mut official_names = split_list(args.officials.as_deref().unwrap_or(""));
    let official_idx = official_names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    let candidate_names: Vec<String> = match &args.candidates {
        Some(list) => split_list(list),
        None => headers
            .iter()
            .filter(|h| **h != target && !official_names.contains(h))
            .cloned()
            .collect(),
    };
    let candidate_idx = candidate_names.iter().map(|n| find(n)).collect::<Result<Vec<_>>>()?;
    if candidate_idx.contains(&find(&target)?) || official_idx.iter().any(|j| candidate_idx.contains(j)) {
        return Err(CliError::Config("target, officials and candidates must be disjoint".into()));
    }

    let intercept = !args.no_intercept.unwrap_or(false);
    let mut off_cols: Vec<DVector<f64>> = official_idx.iter().map(|&j| DVector::from_vec(columns[j].clone())).collect();
    if intercept {
        off_cols.insert(0, DVector::from_element(t, 1.0));
        official_names.insert(0, "(intercept)".into());
    }
    if off_cols.is_empty() {
        return Err(CliError::Config("no intercept and no officials: nothing to condition on".into()));
    }
    let cand_cols: Vec<DVector<f64>> = candidate_idx.iter().map(|&j| DVector::from_vec(columns[j].clone())).collect();
    m.set("intercept", intercept);
    m.set("officials", official_names.join(","));
    m.set("candidates", candidate_names.join(","));
    Ok(Problem {
        y,
        officials: DMatrix::from_columns(&off_cols),
        official_names,
        candidates: if cand_cols.is_empty() {
            DMatrix::zeros(t, 0)
        } else {
            DMatrix::from_columns(&cand_cols)
        },
        candidate_names,
    })
}

fn screen_config(args: &RegressArgs, m: &mut Manifest) -> Result<ScreenConfig> {
    let cfg = match (args.tau, args.lambda) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --tau or --lambda, not both".into())),
        (None, Some(l)) => ScreenConfig::lambda(l)?,
        (tau, None) => ScreenConfig::tau(tau.unwrap_or(0.1))?,
    };
    match cfg {
        ScreenConfig::Tau(t) => m.set("tau", t),
        ScreenConfig::Lambda(l) => m.set("lambda", l),
    }
    m.set("threshold", cfg.threshold());
    Ok(cfg)
}

fn write_screen(dir: &Path, p: &Problem, res: &ScreenResult, m: &mut Manifest) -> Result<()> {
    write_output(dir, "screen.csv", m, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["candidate", "t_stat", "selected"]).map_err(csv_error)?;
        for (j, name) in p.candidate_names.iter().enumerate() {
            let sel = res.selected.binary_search(&j).is_ok();
            out.write_record([name.clone(), format!("{}", res.tstats[j]), u8::from(sel).to_string()])
                .map_err(csv_error)?;
        }
        finish_csv(out)
    })
}

fn screen_text(p: &Problem, res: &ScreenResult) -> String {
    let w = p.candidate_names.iter().map(String::len).max().unwrap_or(9).max(9);
    let mut s = format!("threshold |t| > {:.4}; {} of {} selected\n", res.lambda, res.selected.len(), p.candidate_names.len());
    s.push_str(&format!("{:<w$} {:>10}  selected\n", "candidate", "t"));
    for (j, name) in p.candidate_names.iter().enumerate() {
        let mark = if res.selected.binary_search(&j).is_ok() { "*" } else { "" };
        s.push_str(&format!("{name:<w$} {:>10.4}  {mark}\n", res.tstats[j]));
    }
    for sk in &res.skipped {
        s.push_str(&format!("skipped {}: {}\n", p.candidate_names[sk.index], sk.reason));
    }
    s
}

pub fn screen(args: RegressArgs) -> Result<()> {
    let mut m = Manifest::new("screen");
    m.set("seed", resolve_seed(args.seed));
    let dir = output_dir(args.out.clone())?;
    let p = load(&args, &mut m)?;
    let cfg = screen_config(&args, &mut m)?;
    let res = screen_with(&p.y, &p.officials, &p.candidates, &cfg, Exec::Parallel)?;
    print!("{}", screen_text(&p, &res));
    write_screen(&dir, &p, &res, &mut m)?;
    m.write(&dir)
}

pub fn fit(args: RegressArgs) -> Result<()> {
    let mut m = Manifest::new("fit");
    m.set("seed", resolve_seed(args.seed));
    let dir = output_dir(args.out.clone())?;
    let p = load(&args, &mut m)?;
    let cfg = screen_config(&args, &mut m)?;
    let grid = alpha_grid(args.alpha_min, args.alpha_max, args.alpha_count, &mut m)?;
    let ridge = RidgeOptions {
        standardize: !args.raw.unwrap_or(false),
        penalize_intercept: !args.unpenalized_intercept.unwrap_or(false),
    };
    m.set("ridge.standardize", ridge.standardize);
    m.set("ridge.penalize_intercept", ridge.penalize_intercept);

    let sel = ridge_after_selection(&p.y, &p.officials, &p.candidates, &cfg, &grid, ridge)?;
    print!("{}", screen_text(&p, &sel.screen));
    println!("GCV alpha = {:.6e}, GCV = {:.6}", sel.fit.alpha, sel.fit.gcv_value);
    let names: Vec<&String> = p.official_names.iter().chain(&p.candidate_names).collect();
    let w = names.iter().map(|n| n.len()).max().unwrap_or(4).max(4);
    println!("{:<w$} {:>12}", "term", "coefficient");
    for (name, b) in names.iter().zip(sel.fit.coefficients.iter()) {
        if *b != 0.0 {
            println!("{name:<w$} {b:>12.6}");
        }
    }

    write_screen(&dir, &p, &sel.screen, &mut m)?;
    let n_off = p.official_names.len();
    write_output(&dir, "coefficients.csv", &mut m, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["term", "coefficient", "role"]).map_err(csv_error)?;
        for (k, (name, b)) in names.iter().zip(sel.fit.coefficients.iter()).enumerate() {
            let role = if k < n_off {
                "official"
            } else if sel.screen.selected.binary_search(&(k - n_off)).is_ok() {
                "selected"
            } else {
                "dropped"
            };
            w.write_record([name.to_string(), format!("{b}"), role.into()]).map_err(csv_error)?;
        }
        finish_csv(w)
    })?;
    write_output(&dir, "gcv_path.csv", &mut m, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["alpha", "gcv"]).map_err(csv_error)?;
        for (a, g) in &sel.fit.gcv_path {
            w.write_record([format!("{a}"), format!("{g}")]).map_err(csv_error)?;
        }
        finish_csv(w)
    })?;
    m.set("alpha", sel.fit.alpha);
    m.write(&dir)
}
