//! Empirical checks of the screening, GCV and error-scaling results.
//!
//! Closeness tolerances (scaled by `--tolerance`, default 1):
//! - sure screening: frequency at the largest T at least `1 - 0.05 k`;
//! - GCV: median relative regret `<= 0.01 k` and median relative
//!   |GCV - MSPE| `<= 0.10 k` at the largest T.
//!
//! Directional requirements are not scaled: screening frequency
//! nondecreasing in T, regret and gap medians shrinking in T, regret
//! nonnegative, and the error-scaling directions at 2 Monte Carlo SE.

use ridgecast::mc::{
    median, paper_tables, sure_screening_sweep, verify_error_scaling, verify_gcv_oos, Check, DgpConfig, McOptions,
    Psi,
};
use ridgecast::ridge::{AlphaGrid, RidgeOptions};
use ridgecast::screen::ScreenConfig;
use ridgecast::Exec;

use super::{csv_error, finish_csv, output_dir, resolve_seed, split_list, write_output};
use crate::args::VerifyArgs;
use crate::error::{CliError, Result};
use crate::manifest::Manifest;

pub const CHECKS: [&str; 3] = ["sure-screening", "gcv-oos", "error-scaling"];

fn check(name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

fn sure_screening(seed: u64, k: f64, m: &mut Manifest) -> Result<Vec<Check>> {
    let cfg = DgpConfig {
        beta_floor: 2.0,
        ..DgpConfig::new(100, 100, 5, 0.2, Psi::Identity, seed)?
    };
    let sizes = [100, 200, 400];
    m.set("sure-screening.design", "N=100 s=5 |beta|>=2 delta=0.2 psi=identity tau=0.1 reps=200 T=100,200,400");
    let freq = sure_screening_sweep(&cfg, &sizes, &ScreenConfig::Tau(0.1), 200, Exec::Parallel)?;
    let text = freq.iter().map(|(t, f)| format!("T={t}: {f:.3}")).collect::<Vec<_>>().join(", ");
    let floor = 1.0 - 0.05 * k;
    let last = freq[freq.len() - 1].1;
    Ok(vec![
        check(
            "sure screening nondecreasing in T",
            freq.windows(2).all(|w| w[1].1 >= w[0].1),
            text.clone(),
        ),
        check(
            "sure screening frequency at T=400",
            last >= floor,
            format!("{last:.3} vs required {floor:.3}"),
        ),
    ])
}

fn gcv_oos(seed: u64, k: f64, m: &mut Manifest) -> Result<Vec<Check>> {
    let cfg = DgpConfig::new(50, 100, 5, 0.2, Psi::Identity, seed)?;
    m.set("gcv-oos.design", "N=50 s=5 delta=0.2 psi=identity tau=0.1 reps=100 T=100,400");
    let rows = verify_gcv_oos(
        &cfg,
        &[100, 400],
        &AlphaGrid::default(),
        &ScreenConfig::Tau(0.1),
        RidgeOptions::default(),
        100,
        Exec::Parallel,
    )?;
    let (a, b) = (&rows[0], &rows[1]);
    let relative = |num: &[f64]| -> f64 {
        let r: Vec<f64> = (0..b.regrets.len())
            .map(|i| num[i] / (b.oracle_mspe[i] + b.regrets[i]))
            .collect();
        median(&r)
    };
    let rel_regret = relative(&b.regrets);
    let rel_gap = relative(&b.gcv_gaps);
    Ok(vec![
        check(
            "GCV regret shrinks from T=100 to T=400",
            b.median_regret() < a.median_regret(),
            format!("median regret {:.3e} -> {:.3e}", a.median_regret(), b.median_regret()),
        ),
        check(
            "GCV-MSPE gap shrinks from T=100 to T=400",
            b.median_gap() < a.median_gap(),
            format!("median gap {:.3e} -> {:.3e}", a.median_gap(), b.median_gap()),
        ),
        check(
            "GCV regret nonnegative",
            rows.iter().all(|r| r.min_regret() >= 0.0),
            format!("min regret {:.3e}, {:.3e}", a.min_regret(), b.min_regret()),
        ),
        check(
            "GCV relative regret at T=400",
            rel_regret <= 0.01 * k,
            format!("median {rel_regret:.3e} vs limit {:.3e}", 0.01 * k),
        ),
        check(
            "GCV relative gap at T=400",
            rel_gap <= 0.10 * k,
            format!("median {rel_gap:.3e} vs limit {:.3e}", 0.10 * k),
        ),
    ])
}

fn error_scaling(seed: u64, reps: usize, m: &mut Manifest) -> Result<Vec<Check>> {
    m.set("error-scaling.design", "paper-tables preset, 2 Monte Carlo standard errors");
    m.set("error-scaling.replications", reps);
    let opts = McOptions {
        replications: reps,
        exec: Exec::Parallel,
        ..McOptions::default()
    };
    let tables = paper_tables(seed, &opts)?;
    Ok(tables.iter().flat_map(|t| verify_error_scaling(t, 2.0)).collect())
}

pub fn run(args: VerifyArgs) -> Result<()> {
    let only = match &args.only {
        Some(list) => split_list(list),
        None => CHECKS.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = only.iter().find(|c| !CHECKS.contains(&c.as_str())) {
        return Err(CliError::Config(format!(
            "unknown check '{bad}' (expected one of {})",
            CHECKS.join(", ")
        )));
    }
    let k = args.tolerance.unwrap_or(1.0);
    if !(k >= 0.0 && k.is_finite()) {
        return Err(CliError::Config(format!("tolerance {k} must be a nonnegative number")));
    }
    let seed = resolve_seed(args.seed);
    let dir = output_dir(args.out.clone())?;
    let mut m = Manifest::new("verify");
    m.set("seed", seed);
    m.set("only", only.join(","));
    m.set("tolerance", k);

    let mut checks = Vec::new();
    for name in CHECKS.iter().filter(|c| only.iter().any(|o| o == *c)) {
        log::info!("running {name}");
        checks.extend(match *name {
            "sure-screening" => sure_screening(seed, k, &mut m)?,
            "gcv-oos" => gcv_oos(seed, k, &mut m)?,
            _ => error_scaling(seed, args.reps.unwrap_or(500), &mut m)?,
        });
    }
    for c in &checks {
        println!("{c}");
    }
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    for c in &failed {
        log::error!("{}: {}", c.name, c.detail);
    }
    write_output(&dir, "verify.csv", &mut m, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["check", "passed", "detail"]).map_err(csv_error)?;
        for c in &checks {
            out.write_record([c.name.as_str(), if c.passed { "1" } else { "0" }, c.detail.as_str()])
                .map_err(csv_error)?;
        }
        finish_csv(out)
    })?;
    m.set("checks", checks.len());
    m.set("failed", failed.len());
    m.write(&dir)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.len()))
    }
}
