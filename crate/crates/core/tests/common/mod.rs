//! Invariant checks shared by the property tests and the acceptance suite.
//! Each check takes a drawn case and returns a `TestCaseError` on violation.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ridgecast::bridge::{build_week_design, nowcast_recursive, DesignOptions, NowcastConfig, ReleaseCalendar, Variant};
use ridgecast::dataset::{read_panel, write_panel, Panel, PanelSchema, Quarter, Series};
use ridgecast::mc::{conditional_mspe, run_mc, simulate_dgp, DgpConfig, McOptions, Psi};
use ridgecast::ridge::{fit_gcv, ridge_solve, SpectralRidge};
use ridgecast::screen::{screen_with, ScreenConfig};
use ridgecast::synthetic::{synthetic_panel, SyntheticPanelConfig};
use ridgecast::Exec;

pub type Outcome = Result<(), TestCaseError>;

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Target with a few live candidates among the first columns.
fn screening_problem(seed: u64, t: usize, n1: usize, n: usize) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let off = gaussian(&mut rng, t, n1).insert_column(0, 1.0);
    let cand = gaussian(&mut rng, t, n);
    let y = DVector::from_fn(t, |i, _| {
        off.row(i).sum() + 0.4 * cand[(i, 0)] - 0.3 * cand[(i, n - 1)] + rng.sample::<f64, _>(StandardNormal)
    });
    (y, off, cand)
}

fn screening_case() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 20usize..80, 0usize..4, 2usize..15)
}

pub fn screening_monotone_case() -> impl Strategy<Value = ((u64, usize, usize, usize), f64, f64)> {
    (screening_case(), 1e-4f64..0.5, 1e-4f64..0.5)
}

pub fn screening_monotone_in_tau(((seed, t, n1, n), a, b): ((u64, usize, usize, usize), f64, f64)) -> Outcome {
    let (y, off, cand) = screening_problem(seed, t, n1, n);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let strict = screen_with(&y, &off, &cand, &ScreenConfig::Tau(lo), Exec::Sequential).unwrap();
    let loose = screen_with(&y, &off, &cand, &ScreenConfig::Tau(hi), Exec::Sequential).unwrap();
    prop_assert!(strict.selected.iter().all(|j| loose.selected.contains(j)));
    Ok(())
}

pub fn screening_scale_case() -> impl Strategy<Value = ((u64, usize, usize, usize), f64, Vec<f64>)> {
    (
        screening_case(),
        0.01f64..100.0,
        prop::collection::vec(prop_oneof![-100.0f64..-0.01, 0.01f64..100.0], 15),
    )
}

/// |t| is unchanged by positive rescaling of the target and any nonzero
/// rescaling of candidate or official columns.
pub fn screening_scale_invariant(((seed, t, n1, n), cy, scales): ((u64, usize, usize, usize), f64, Vec<f64>)) -> Outcome {
    let (y, off, cand) = screening_problem(seed, t, n1, n);
    let base = screen_with(&y, &off, &cand, &ScreenConfig::Tau(0.1), Exec::Sequential).unwrap();
    let mut cand2 = cand.clone();
    for (j, c) in scales.iter().take(n).enumerate() {
        cand2.column_mut(j).scale_mut(*c);
    }
    let mut off2 = off.clone();
    for j in 1..off.ncols() {
        off2.column_mut(j).scale_mut(scales[14 - j]);
    }
    let scaled = screen_with(&(&y * cy), &off2, &cand2, &ScreenConfig::Tau(0.1), Exec::Sequential).unwrap();
    for (a, b) in base.tstats.iter().zip(&scaled.tstats) {
        prop_assert!((a.abs() - b.abs()).abs() <= 1e-8 * (1.0 + a.abs()), "{a} vs {b}");
    }
    Ok(())
}

pub fn screening_permutation_case() -> impl Strategy<Value = ((u64, usize, usize, usize), u64)> {
    (screening_case(), any::<u64>())
}

pub fn screening_permutation_equivariant(((seed, t, n1, n), shuffle): ((u64, usize, usize, usize), u64)) -> Outcome {
    let (y, off, cand) = screening_problem(seed, t, n1, n);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
    let permuted = DMatrix::from_fn(t, n, |i, j| cand[(i, perm[j])]);
    let a = screen_with(&y, &off, &cand, &ScreenConfig::Tau(0.1), Exec::Sequential).unwrap();
    let b = screen_with(&y, &off, &permuted, &ScreenConfig::Tau(0.1), Exec::Parallel).unwrap();
    for (j, &pj) in perm.iter().enumerate() {
        prop_assert_eq!(b.tstats[j], a.tstats[pj]);
    }
    let mut mapped: Vec<usize> = b.selected.iter().map(|&j| perm[j]).collect();
    mapped.sort_unstable();
    prop_assert_eq!(mapped, a.selected);
    Ok(())
}

pub fn panel_case() -> impl Strategy<Value = (u64, usize, usize, i64)> {
    (any::<u64>(), 1usize..20, 0usize..6, 1990i64..2030)
}

pub fn panel_round_trip((seed, quarters, n_alt, year): (u64, usize, usize, i64)) -> Outcome {
    let sp = synthetic_panel(&SyntheticPanelConfig {
        start: Quarter(year * 4),
        quarters,
        n_alt,
        n_signal: n_alt.min(3),
        seed,
        ..SyntheticPanelConfig::default()
    })
    .unwrap();
    let (mut data, mut meta) = (Vec::new(), Vec::new());
    write_panel(&sp.panel, &mut data, &mut meta).unwrap();
    let back = read_panel(data.as_slice(), meta.as_slice(), &PanelSchema::default()).unwrap();
    prop_assert_eq!(back, sp.panel);
    Ok(())
}

pub fn ridge_case() -> impl Strategy<Value = (u64, usize, usize, f64)> {
    (any::<u64>(), 3usize..40, 1usize..40, -4.0f64..2.0)
}

/// The closed form solves the penalised normal equations
/// `X'(Xb - y)/T + alpha b = 0`, in both the primal and the dual branch.
pub fn ridge_first_order_conditions((seed, t, p, log_alpha): (u64, usize, usize, f64)) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, t, p);
    let y = DVector::from_fn(t, |_, _| rng.sample(StandardNormal));
    let alpha = 10f64.powf(log_alpha);
    let b = ridge_solve(&x, &y, alpha).unwrap();
    let tt = t as f64;
    let grad = x.tr_mul(&(&x * &b - &y)) / tt + &b * alpha;
    let scale = x.tr_mul(&y).norm() / tt + alpha * b.norm() + 1.0;
    prop_assert!(grad.norm() <= 1e-9 * scale, "gradient {} at scale {scale}", grad.norm());
    Ok(())
}

pub fn ridge_monotone_case() -> impl Strategy<Value = (u64, usize, usize, f64, f64)> {
    (any::<u64>(), 3usize..40, 1usize..40, -6.0f64..3.0, -6.0f64..3.0)
}

/// Effective degrees of freedom and coefficient norm shrink as the penalty grows.
pub fn ridge_shrinkage_monotone((seed, t, p, la, lb): (u64, usize, usize, f64, f64)) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, t, p);
    let y = DVector::from_fn(t, |_, _| rng.sample(StandardNormal));
    let (lo, hi) = (10f64.powf(la.min(lb)), 10f64.powf(la.max(lb)));
    let sr = SpectralRidge::new(&x, &y, &[]).unwrap();
    prop_assert!(sr.trace(hi) <= sr.trace(lo) + 1e-12);
    prop_assert!(sr.trace(lo) <= t.min(p) as f64 + 1e-9);
    prop_assert!(sr.coefficients(hi).norm() <= sr.coefficients(lo).norm() * (1.0 + 1e-10) + 1e-14);
    Ok(())
}

pub fn mc_case() -> impl Strategy<Value = (u64, u64)> {
    (any::<u64>(), 0u64..1_000_000)
}

/// Replication draws depend only on (configuration, replication), and the
/// Monte Carlo averages do not depend on the execution policy.
pub fn mc_deterministic((seed, rep): (u64, u64)) -> Outcome {
    let cfg = DgpConfig::new(12, 30, 4, 0.4, Psi::Decreasing(0.5), seed).unwrap();
    prop_assert_eq!(simulate_dgp(&cfg, 45, rep).unwrap(), simulate_dgp(&cfg, 45, rep).unwrap());
    let opts = |exec| McOptions {
        replications: 3,
        exec,
        ..McOptions::default()
    };
    let seq = run_mc(&cfg, &opts(Exec::Sequential)).unwrap();
    let par = run_mc(&cfg, &opts(Exec::Parallel)).unwrap();
    prop_assert_eq!(seq, par);
    Ok(())
}

pub fn mspe_case() -> impl Strategy<Value = (u64, usize, f64)> {
    (any::<u64>(), 1usize..12, 0.0f64..5.0)
}

pub fn conditional_mspe_floor((seed, p, sigma2): (u64, usize, f64)) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // rank-deficient covariances are allowed
    let a = gaussian(&mut rng, p, (p / 2).max(1));
    let sigma = &a * a.transpose();
    let bt = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
    let bh = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
    let m = conditional_mspe(&bh, &bt, sigma2, &sigma).unwrap();
    prop_assert!(m >= sigma2 - 1e-12 * (1.0 + sigma2), "{m} < {sigma2}");
    prop_assert!((conditional_mspe(&bt, &bt, sigma2, &sigma).unwrap() - sigma2).abs() <= 1e-12);
    Ok(())
}

fn bridge_panel(seed: u64) -> Panel {
    synthetic_panel(&SyntheticPanelConfig {
        quarters: 20,
        n_alt: 4,
        seed,
        ..SyntheticPanelConfig::default()
    })
    .unwrap()
    .panel
}

pub fn nested_case() -> impl Strategy<Value = (u64, u8, u8)> {
    (any::<u64>(), 1u8..=13, 1u8..=13)
}

/// Later week models see a superset of the information of earlier ones,
/// and a column already complete at the earlier week keeps its value.
pub fn bridge_information_nested((seed, a, b): (u64, u8, u8)) -> Outcome {
    let (w1, w2) = (a.min(b), a.max(b));
    let panel = bridge_panel(seed);
    let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
    for s in &panel.predictors {
        let early = cal.released(&s.id, w1);
        let late = cal.released(&s.id, w2);
        prop_assert!(late.starts_with(&early), "{}: {early:?} vs {late:?}", s.id);
    }
    let quarters: Vec<Quarter> = panel.quarters().collect();
    let d1 = build_week_design(&panel, &cal, w1, &quarters, DesignOptions::default()).unwrap();
    let d2 = build_week_design(&panel, &cal, w2, &quarters, DesignOptions::default()).unwrap();
    for (j, s) in panel.predictors.iter().enumerate() {
        prop_assert!(!d1.active_mask[j + 1] || d2.active_mask[j + 1]);
        if cal.released(&s.id, w1) == cal.released(&s.id, w2) {
            prop_assert_eq!(d1.x.column(j + 1), d2.x.column(j + 1));
        }
    }
    Ok(())
}

pub fn look_ahead_case() -> impl Strategy<Value = (u64, u8, i64, usize)> {
    (any::<u64>(), 1u8..=13, 14i64..20, 0usize..5)
}

fn poison(s: &Series, keep: impl Fn(Quarter, usize) -> bool) -> Series {
    let k = s.frequency.per_quarter() as i64;
    let values = s
        .values()
        .iter()
        .map(|&(p, v)| {
            let q = s.quarter_of(p);
            let sub = (p - q.0 * k + 1) as usize;
            (p, if keep(q, sub) { v } else { 1e6 })
        })
        .collect();
    Series::new(s.id.clone(), s.group, s.frequency, s.release_week, values).unwrap()
}

/// The nowcast of quarter `q` at week `w` is unchanged when every value that
/// would not be known at that point is overwritten: targets from `q - 1` on,
/// all later quarters, and quarter-`q` releases after week `w`.
pub fn bridge_no_look_ahead((seed, w, k, variant): (u64, u8, i64, usize)) -> Outcome {
    let panel = bridge_panel(seed);
    let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
    let q = panel.quarter_range.0.offset(k);
    let mut cfg = NowcastConfig::new(q);
    cfg.oos_end = Some(q);
    cfg.weeks = vec![w];
    let variant = Variant::ALL[variant];
    let clean = nowcast_recursive(&panel, &cal, variant, &cfg).unwrap();

    let target = poison(&panel.target, |tq, _| tq < q.offset(-1));
    let predictors = panel
        .predictors
        .iter()
        .map(|s| {
            let known = cal.released(&s.id, w);
            poison(s, |pq, sub| pq < q || (pq == q && known.contains(&sub)))
        })
        .collect();
    let dirty = Panel::new(target, predictors).unwrap();
    let poisoned = nowcast_recursive(&dirty, &cal, variant, &cfg).unwrap();
    prop_assert_eq!(clean.nowcasts[(0, 0)], poisoned.nowcasts[(0, 0)]);
    Ok(())
}

/// Largest allowed rise of the pooled RMSFE from one week to the next.
pub const PROFILE_SLACK: f64 = 1.1;

/// Per-week RMSFE of ridge after selection, pooled over eight synthetic
/// panels (60 training and 8 evaluation quarters each): a single panel is too
/// noisy to rank adjacent weeks.
pub fn pooled_rmsfe_profile() -> Vec<f64> {
    let mut sq = [0.0; 13];
    let mut count = 0usize;
    for seed in 1..=8u64 {
        let cfg = SyntheticPanelConfig {
            quarters: 69,
            seed,
            ..SyntheticPanelConfig::default()
        };
        let start = cfg.start;
        let panel = synthetic_panel(&cfg).unwrap().panel;
        let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
        let run = nowcast_recursive(&panel, &cal, Variant::RidgeAfterSelection, &NowcastConfig::new(start.offset(61)))
            .unwrap();
        for i in 0..run.oos_quarters.len() {
            for (k, s) in sq.iter_mut().enumerate() {
                *s += (run.nowcasts[(i, k)] - run.actuals[i]).powi(2);
            }
        }
        count += run.oos_quarters.len();
    }
    sq.iter().map(|s| (s / count as f64).sqrt()).collect()
}

/// Absolute gap between the harness nowcast of one quarter at week 13 and a
/// bridge regression assembled by hand from the raw series.
pub fn single_split_gap() -> f64 {
    let cfg = SyntheticPanelConfig {
        quarters: 30,
        n_alt: 4,
        ..SyntheticPanelConfig::default()
    };
    let panel = synthetic_panel(&cfg).unwrap().panel;
    let cal = ReleaseCalendar::from_metadata(&panel).unwrap();
    let q = cfg.start.offset(25);
    let mut ncfg = NowcastConfig::new(q);
    ncfg.oos_end = Some(q);
    ncfg.weeks = vec![13];
    let run = nowcast_recursive(&panel, &cal, Variant::OfficialsOnly, &ncfg).unwrap();
    assert_eq!(run.oos_quarters, vec![q]);

    // week 13: all three survey months (weeks 5, 9, 13), first IP month (week 11);
    // training ends two quarters before the nowcast quarter
    let survey = panel.predictor("survey").unwrap();
    let ip = panel.predictor("ip").unwrap();
    let row = |q: Quarter| {
        let s = (1..=3).map(|m| survey.get(q, m).unwrap()).sum::<f64>() / 3.0;
        [1.0, s, ip.get(q, 1).unwrap()]
    };
    let train: Vec<Quarter> = (0..=23).map(|k| cfg.start.offset(k)).collect();
    let x = DMatrix::from_fn(train.len(), 3, |i, j| row(train[i])[j]);
    let y = DVector::from_iterator(train.len(), train.iter().map(|q| panel.target_value(*q).unwrap()));
    let fit = fit_gcv(&x, &y, &ncfg.grid, ncfg.ridge).unwrap();
    let expected: f64 = row(q).iter().zip(fit.coefficients.iter()).map(|(a, b)| a * b).sum();
    (run.nowcasts[(0, 0)] - expected).abs()
}
