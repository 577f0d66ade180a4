use std::path::Path;

use ridgecast::mc::{
    paper_tables, run_mc, write_ratio_csv, DgpConfig, McOptions, McReport, Psi, RatioTable, BASELINE, FDR_GRID,
    TABLE_CONFIGS, TABLE_DELTAS, TABLE_PSIS,
};
use ridgecast::Exec;

use super::{alpha_grid, output_dir, resolve_seed, write_output};
use crate::args::SimulateArgs;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

pub fn run(args: SimulateArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let dir = output_dir(args.out.clone())?;
    let mut m = Manifest::new("simulate");
    m.set("seed", seed);

    let reps = args.reps.unwrap_or(500);
    let opts = McOptions {
        replications: reps,
        oos_fraction: args.oos_fraction.unwrap_or(0.5),
        grid: alpha_grid(args.alpha_min, args.alpha_max, args.alpha_count, &mut m)?,
        fix_beta: args.fix_beta.unwrap_or(false),
        exec: Exec::Parallel,
        ..McOptions::default()
    };
    m.set("replications", opts.replications);
    m.set("oos_fraction", opts.oos_fraction);
    m.set("fix_beta", opts.fix_beta);
    m.set("fdr_grid", join(&opts.fdr_grid));
    m.set("ridge.standardize", opts.ridge.standardize);
    m.set("ridge.penalize_intercept", opts.ridge.penalize_intercept);

    let preset = args.preset.as_deref().unwrap_or("paper-tables");
    m.set("preset", preset);
    match preset {
        "paper-tables" => paper(&args, seed, &opts, &dir, &mut m)?,
        "single" => single(&args, seed, &opts, &dir, &mut m)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown preset '{other}' (expected paper-tables or single)"
            )))
        }
    }
    m.write(&dir)
}

fn paper(args: &SimulateArgs, seed: u64, opts: &McOptions, dir: &Path, m: &mut Manifest) -> Result<()> {
    let ignored = [
        ("n", args.n.is_some()),
        ("t", args.t.is_some()),
        ("s", args.s.is_some()),
        ("delta", args.delta.is_some()),
        ("psi", args.psi.is_some()),
        ("beta-floor", args.beta_floor.is_some()),
    ];
    for (flag, set) in ignored {
        if set {
            log::warn!("--{flag} has no effect with the paper-tables preset");
        }
    }
    m.set("preset.version", 1);
    m.set("preset.baseline", label(BASELINE));
    m.set("preset.configs", TABLE_CONFIGS.iter().map(|c| label(*c)).collect::<Vec<_>>().join(","));
    m.set("preset.deltas", join(&TABLE_DELTAS));
    m.set("preset.psis", TABLE_PSIS.iter().map(Psi::to_string).collect::<Vec<_>>().join(","));
    m.set("preset.fdr_grid", join(&FDR_GRID));

    let tables = paper_tables(seed, opts)?;
    for (k, delta) in TABLE_DELTAS.iter().enumerate() {
        let block: Vec<&RatioTable> = tables.iter().filter(|t| t.delta_scale == *delta).collect();
        for t in &block {
            println!("{}", t.to_text());
        }
        let n = k + 1;
        write_output(dir, &format!("table{n}.csv"), m, |w| write_ratio_csv(&block, w, false))?;
        write_output(dir, &format!("table{n}_se.csv"), m, |w| write_ratio_csv(&block, w, true))?;
    }
    Ok(())
}

fn single(args: &SimulateArgs, seed: u64, opts: &McOptions, dir: &Path, m: &mut Manifest) -> Result<()> {
    let (n, t, s) = BASELINE;
    let psi: Psi = args.psi.as_deref().unwrap_or("identity").parse()?;
    let cfg = DgpConfig {
        beta_floor: args.beta_floor.unwrap_or(0.0),
        ..DgpConfig::new(
            args.n.unwrap_or(n),
            args.t.unwrap_or(t),
            args.s.unwrap_or(s),
            args.delta.unwrap_or(0.2),
            psi,
            seed,
        )?
    };
    cfg.validate()?;
    m.set("n", cfg.n);
    m.set("t", cfg.t);
    m.set("s", cfg.s);
    m.set("delta", cfg.delta_scale);
    m.set("psi", cfg.psi);
    m.set("beta_floor", cfg.beta_floor);

    let report = run_mc(&cfg, opts)?;
    println!("{}", report_text(&report));
    write_output(dir, "report.csv", m, |w| report.write_csv(w))
}

fn report_text(r: &McReport) -> String {
    let mut s = format!(
        "{} delta = {}, psi = {} ({} replications)\n{:>8} {:>12} {:>10} {:>12} {:>10} {:>9}\n",
        r.config.label(),
        r.config.delta_scale,
        r.config.psi,
        r.replications,
        "FDR",
        "in-sample",
        "se",
        "out-sample",
        "se",
        "selected"
    );
    for k in 0..r.fdr_grid.len() {
        s.push_str(&format!(
            "{:>7}% {:>12.4} {:>10.4} {:>12.4} {:>10.4} {:>9.1}\n",
            r.fdr_grid[k] * 100.0,
            r.in_sample_mse[k],
            r.in_sample_se[k],
            r.oos_mse[k],
            r.oos_se[k],
            r.mean_selected[k]
        ));
    }
    s
}

fn label((n, t, s): (usize, usize, usize)) -> String {
    format!("N{n}_T{t}_s{s}")
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}
