use ridgecast::dataset::{write_panel, Quarter};
use ridgecast::synthetic::{synthetic_panel, SyntheticPanelConfig};

use super::{output_dir, resolve_seed, write_output};
use crate::args::SynthArgs;
use crate::error::Result;
use crate::manifest::Manifest;

pub fn run(args: SynthArgs) -> Result<()> {
    let seed = resolve_seed(args.seed);
    let dir = output_dir(args.out.clone())?;
    let d = SyntheticPanelConfig::default();
    let start: Quarter = match &args.start {
        Some(s) => s.parse()?,
        None => d.start,
    };
    let cfg = SyntheticPanelConfig {
        start,
        quarters: args.quarters.unwrap_or(d.quarters),
        n_alt: args.n_alt.unwrap_or(d.n_alt),
        n_signal: args.n_signal.unwrap_or(d.n_signal),
        seed,
        ..d
    };
    let sp = synthetic_panel(&cfg)?;

    let mut m = Manifest::new("synth-panel");
    m.set("seed", seed);
    m.set("start", cfg.start);
    m.set("quarters", cfg.quarters);
    m.set("n_alt", cfg.n_alt);
    m.set("n_signal", cfg.n_signal);
    m.set("alt_beta", cfg.alt_beta);
    m.set("weekly_noise", cfg.weekly_noise);
    m.set("survey_beta", cfg.survey_beta);
    m.set("ip_beta", cfg.ip_beta);
    m.set("intercept", cfg.intercept);
    m.set("noise_sd", cfg.noise_sd);

    let mut meta = Vec::new();
    write_output(&dir, "data.csv", &mut m, |w| write_panel(&sp.panel, w, &mut meta))?;
    write_output(&dir, "meta.csv", &mut m, |w| {
        std::io::Write::write_all(w, &meta).map_err(|e| ridgecast::Error::Io {
            path: "meta.csv".into(),
            source: e,
        })
    })?;
    println!(
        "wrote {} quarters ({}..{}) with {} predictors to {}",
        cfg.quarters,
        sp.panel.quarter_range.0,
        sp.panel.quarter_range.1,
        sp.panel.predictors.len(),
        dir.display()
    );
    m.write(&dir)
}
