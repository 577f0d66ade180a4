//! Synthetic weekly/monthly/quarterly panels with a known bridge equation.
//!
//! The target is generated from the full-quarter aggregates
//! `y_t = c + b_s * mean(survey) + b_ip * ip_1 + sum_g beta_g * mean_w(x_g) + sigma * e_t`,
//! where each weekly series is a quarter-level level plus weekly noise, so the
//! partial-quarter mean is informative from week 1 and sharpens as weeks arrive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{Frequency, Group, Panel, Quarter, Series, WEEKS_PER_QUARTER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanelConfig {
    pub start: Quarter,
    pub quarters: usize,
    /// Number of weekly alternative series; the first `n_signal` enter the target.
    pub n_alt: usize,
    pub n_signal: usize,
    pub alt_beta: f64,
    /// Standard deviation of the weekly noise around each quarter's level.
    pub weekly_noise: f64,
    pub survey_beta: f64,
    pub ip_beta: f64,
    pub intercept: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticPanelConfig {
    fn default() -> Self {
        SyntheticPanelConfig {
            start: Quarter(2005 * 4),
            quarters: 60,
            n_alt: 20,
            n_signal: 3,
            alt_beta: 1.0,
            weekly_noise: 1.0,
            survey_beta: 0.8,
            ip_beta: 0.6,
            intercept: 0.5,
            noise_sd: 0.3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub panel: Panel,
    /// Coefficients of the alternative series in the target equation.
    pub alt_beta: Vec<f64>,
}

pub fn synthetic_panel(cfg: &SyntheticPanelConfig) -> Result<SyntheticPanel> {
    if cfg.quarters == 0 || cfg.n_signal > cfg.n_alt {
        return Err(Error::Config(
            "synthetic panel needs at least one quarter and n_signal <= n_alt".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let nq = cfg.quarters;
    let w = WEEKS_PER_QUARTER as usize;

    let survey: Vec<f64> = (0..3 * nq).map(|_| normal()).collect();
    let ip: Vec<f64> = (0..3 * nq).map(|_| normal()).collect();
    let alt: Vec<Vec<f64>> = (0..cfg.n_alt)
        .map(|_| {
            (0..nq)
                .flat_map(|_| {
                    let level = normal();
                    (0..w).map(|_| level + cfg.weekly_noise * normal()).collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    let alt_beta: Vec<f64> = (0..cfg.n_alt)
        .map(|g| if g < cfg.n_signal { cfg.alt_beta } else { 0.0 })
        .collect();

    let target: Vec<f64> = (0..nq)
        .map(|t| {
            let s_bar = survey[3 * t..3 * t + 3].iter().sum::<f64>() / 3.0;
            let alt_part: f64 = alt
                .iter()
                .zip(&alt_beta)
                .map(|(x, b)| b * x[w * t..w * (t + 1)].iter().sum::<f64>() / w as f64)
                .sum();
            cfg.intercept
                + cfg.survey_beta * s_bar
                + cfg.ip_beta * ip[3 * t]
                + alt_part
                + cfg.noise_sd * normal()
        })
        .collect();

    let q0 = cfg.start.0;
    let indexed = |v: &[f64], k: i64| -> Vec<(i64, f64)> {
        v.iter().enumerate().map(|(i, x)| (q0 * k + i as i64, *x)).collect()
    };
    let mut predictors = vec![
        Series::new("survey", Group::Soft, Frequency::Monthly, Some(5), indexed(&survey, 3))?,
        Series::new("ip", Group::Hard, Frequency::Monthly, Some(11), indexed(&ip, 3))?,
    ];
    for (g, x) in alt.iter().enumerate() {
        predictors.push(Series::new(
            format!("g{:02}", g + 1),
            Group::Alt,
            Frequency::Weekly,
            Some(1),
            indexed(x, w as i64),
        )?);
    }
    let target = Series::new("gdp", Group::Target, Frequency::Quarterly, None, indexed(&target, 1))?;
    Ok(SyntheticPanel {
        panel: Panel::new(target, predictors)?,
        alt_beta,
    })
}
