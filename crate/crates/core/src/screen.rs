//! Targeted preselection: each candidate is regressed on the official
//! predictors plus itself, and kept when its OLS t-statistic clears a
//! Gaussian-quantile threshold.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::par::Exec;

/// Largest admissible condition number of the equilibrated Gram matrix of
/// `[officials | candidate]`.
pub const MAX_CONDITION: f64 = 1e12;

/// Threshold rule for the absolute t-statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScreenConfig {
    /// Tolerated false-positive rate; the threshold is the `(1 - tau)` normal quantile.
    Tau(f64),
    /// Explicit threshold.
    Lambda(f64),
}

impl ScreenConfig {
    pub fn tau(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(ScreenConfig::Tau(tau))
    }

    pub fn lambda(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        Ok(ScreenConfig::Lambda(lambda))
    }

    /// The threshold applied to `|t|`.
    pub fn threshold(&self) -> f64 {
        match *self {
            ScreenConfig::Tau(tau) => normal_quantile(1.0 - tau),
            ScreenConfig::Lambda(l) => l,
        }
    }
}

/// Standard normal quantile function.
pub fn normal_quantile(p: f64) -> f64 {
    // mean 0, sd 1 is always a valid parameterisation
    Normal::standard().inverse_cdf(p)
}

/// A candidate that could not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCandidate {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    /// One statistic per candidate; `NaN` for skipped candidates.
    pub tstats: Vec<f64>,
    pub lambda: f64,
    /// Ascending indices with `|t| > lambda`.
    pub selected: Vec<usize>,
    pub skipped: Vec<SkippedCandidate>,
}

impl ScreenResult {
    /// Reapplies a different threshold to the same statistics.
    pub fn rethreshold(&self, lambda: f64) -> ScreenResult {
        ScreenResult {
            tstats: self.tstats.clone(),
            lambda,
            selected: select(&self.tstats, lambda),
            skipped: self.skipped.clone(),
        }
    }
}

fn select(tstats: &[f64], lambda: f64) -> Vec<usize> {
    tstats
        .iter()
        .enumerate()
        .filter(|(_, t)| t.abs() > lambda)
        .map(|(j, _)| j)
        .collect()
}

/// Sufficient statistics of the official block, shared by every candidate.
struct OfficialBlock<'a> {
    officials: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    gram: DMatrix<f64>,
    cross_y: DVector<f64>,
}

impl<'a> OfficialBlock<'a> {
    fn new(y: &'a DVector<f64>, officials: &'a DMatrix<f64>) -> Result<Self> {
        let t = y.len();
        if officials.nrows() != t {
            return Err(Error::DimensionMismatch {
                context: "officials rows",
                expected: t,
                actual: officials.nrows(),
            });
        }
        let params = officials.ncols() + 1;
        if t <= params {
            return Err(Error::InsufficientSample {
                observations: t,
                parameters: params,
            });
        }
        Ok(OfficialBlock {
            officials,
            y,
            gram: officials.tr_mul(officials),
            cross_y: officials.tr_mul(y),
        })
    }

    fn tstat(&self, candidate: &[f64]) -> Result<f64> {
        let t = self.y.len();
        if candidate.len() != t {
            return Err(Error::DimensionMismatch {
                context: "candidate length",
                expected: t,
                actual: candidate.len(),
            });
        }
        let n1 = self.officials.ncols();
        let p = n1 + 1;
        let x = DVector::from_column_slice(candidate);

        let mut gram = DMatrix::zeros(p, p);
        gram.view_mut((0, 0), (n1, n1)).copy_from(&self.gram);
        let ox = self.officials.tr_mul(&x);
        for i in 0..n1 {
            gram[(i, n1)] = ox[i];
            gram[(n1, i)] = ox[i];
        }
        gram[(n1, n1)] = x.dot(&x);
        let mut rhs = DVector::zeros(p);
        rhs.rows_mut(0, n1).copy_from(&self.cross_y);
        rhs[n1] = x.dot(self.y);

        // Equilibrate so the guard and the solve are invariant to column scale.
        let diag = gram.diagonal();
        if diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::SingularDesign("zero column in design".into()));
        }
        let scale = diag.map(|d| 1.0 / d.sqrt());
        let scaled = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] * scale[i] * scale[j]);
        let eig = SymmetricEigen::new(scaled.clone()).eigenvalues;
        let (lo, hi) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if !(lo > 0.0) || hi / lo > MAX_CONDITION {
            return Err(Error::SingularDesign(format!(
                "condition number {:.3e} exceeds {MAX_CONDITION:e}",
                hi / lo
            )));
        }
        let chol = scaled
            .cholesky()
            .ok_or_else(|| Error::SingularDesign("gram matrix not positive definite".into()))?;
        let scaled_rhs = rhs.component_mul(&scale);
        let coef_scaled = chol.solve(&scaled_rhs);
        let coef = coef_scaled.component_mul(&scale);

        let fitted = self.officials * coef.rows(0, n1) + &x * coef[n1];
        let rss = (self.y - fitted).norm_squared();
        let tss = self.y.norm_squared();
        if rss <= 1e-24 * tss.max(f64::MIN_POSITIVE) {
            // exact fit: infinite evidence only if the candidate is part of it
            let contribution = coef[n1].abs() * x.norm();
            return Ok(if contribution > 1e-12 * tss.sqrt() { f64::INFINITY } else { 0.0 });
        }
        let sigma2 = rss / (t - p) as f64;
        // (G^{-1})_{pp} = scale_p^2 * (S^{-1})_{pp}
        let mut unit = DVector::zeros(p);
        unit[n1] = 1.0;
        let inv_pp = chol.solve(&unit)[n1] * scale[n1] * scale[n1];
        Ok(coef[n1] / (sigma2 * inv_pp).sqrt())
    }
}

/// OLS t-statistic of `candidate` in the regression of `y` on
/// `[officials | candidate]`, with homoskedastic errors and `T - N1 - 1`
/// degrees of freedom. Perfect fits return `+inf` when the candidate carries
/// weight in them and `0` when the officials alone already fit exactly.
pub fn tstat_single(
    y: &DVector<f64>,
    officials: &DMatrix<f64>,
    candidate: &DVector<f64>,
) -> Result<f64> {
    OfficialBlock::new(y, officials)?.tstat(candidate.as_slice())
}

/// Screens every column of `candidates` with its own regression.
pub fn screen(
    y: &DVector<f64>,
    officials: &DMatrix<f64>,
    candidates: &DMatrix<f64>,
    cfg: &ScreenConfig,
) -> Result<ScreenResult> {
    screen_with(y, officials, candidates, cfg, Exec::default())
}

pub fn screen_with(
    y: &DVector<f64>,
    officials: &DMatrix<f64>,
    candidates: &DMatrix<f64>,
    cfg: &ScreenConfig,
    exec: Exec,
) -> Result<ScreenResult> {
    if candidates.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "candidate rows",
            expected: y.len(),
            actual: candidates.nrows(),
        });
    }
    let block = OfficialBlock::new(y, officials)?;
    let outcomes = exec.map(candidates.ncols(), |j| {
        block.tstat(candidates.column(j).as_slice())
    });

    let mut tstats = Vec::with_capacity(outcomes.len());
    let mut skipped = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(t) => tstats.push(t),
            Err(Error::SingularDesign(reason)) => {
                log::warn!("screening skipped candidate {index}: {reason}");
                skipped.push(SkippedCandidate { index, reason });
                tstats.push(f64::NAN);
            }
            Err(e) => {
                return Err(Error::Validation(format!("candidate {index}: {e}")));
            }
        }
    }
    let lambda = cfg.threshold();
    Ok(ScreenResult {
        selected: select(&tstats, lambda),
        tstats,
        lambda,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn intercept(t: usize) -> DMatrix<f64> {
        DMatrix::from_element(t, 1, 1.0)
    }

    fn noise(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
        DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
    }

    /// Textbook OLS by normal equations with a hand-rolled Gauss-Jordan inverse.
    fn ols_tstat_oracle(y: &[f64], cols: &[Vec<f64>]) -> f64 {
        let p = cols.len();
        let t = y.len();
        let mut a = vec![vec![0.0; 2 * p]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = (0..t).map(|r| cols[i][r] * cols[j][r]).sum();
            }
            a[i][p + i] = 1.0;
        }
        for c in 0..p {
            let piv = (c..p)
                .max_by(|&x, &z| a[x][c].abs().partial_cmp(&a[z][c].abs()).unwrap())
                .unwrap();
            a.swap(c, piv);
            let d = a[c][c];
            for v in a[c].iter_mut() {
                *v /= d;
            }
            for r in 0..p {
                if r != c {
                    let f = a[r][c];
                    let row_c = a[c].clone();
                    for (v, w) in a[r].iter_mut().zip(row_c) {
                        *v -= f * w;
                    }
                }
            }
        }
        let xty: Vec<f64> = (0..p).map(|i| (0..t).map(|r| cols[i][r] * y[r]).sum()).collect();
        let beta: Vec<f64> = (0..p)
            .map(|i| (0..p).map(|j| a[i][p + j] * xty[j]).sum())
            .collect();
        let rss: f64 = (0..t)
            .map(|r| {
                let fit: f64 = (0..p).map(|i| cols[i][r] * beta[i]).sum();
                (y[r] - fit).powi(2)
            })
            .sum();
        let s2 = rss / (t - p) as f64;
        beta[p - 1] / (s2 * a[p - 1][2 * p - 1]).sqrt()
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let t = 50;
        let x = noise(&mut rng, t);
        let y = noise(&mut rng, t) + &x * 0.3;
        let got = tstat_single(&y, &intercept(t), &x).unwrap();
        let want = ols_tstat_oracle(y.as_slice(), &[vec![1.0; t], x.as_slice().to_vec()]);
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn matches_oracle_with_several_officials() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = 80;
        let o1 = noise(&mut rng, t);
        let o2 = noise(&mut rng, t);
        let x = noise(&mut rng, t) + &o1 * 0.5;
        let y = &o1 * 2.0 - &o2 + &x * 0.2 + noise(&mut rng, t);
        let officials = DMatrix::from_columns(&[DVector::from_element(t, 1.0), o1.clone(), o2.clone()]);
        let got = tstat_single(&y, &officials, &x).unwrap();
        let want = ols_tstat_oracle(
            y.as_slice(),
            &[vec![1.0; t], o1.as_slice().to_vec(), o2.as_slice().to_vec(), x.as_slice().to_vec()],
        );
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn perfect_fit_is_infinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = noise(&mut rng, 30);
        let y = &x * 5.0;
        let t = tstat_single(&y, &intercept(30), &x).unwrap();
        assert_eq!(t, f64::INFINITY);
        let res = screen(&y, &intercept(30), &DMatrix::from_columns(&[x]), &ScreenConfig::Lambda(1e9)).unwrap();
        assert_eq!(res.selected, vec![0]);
    }

    #[test]
    fn officials_fit_alone_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = DVector::from_element(30, 0.7);
        let cand = DMatrix::from_columns(&[noise(&mut rng, 30), noise(&mut rng, 30)]);
        let res = screen(&y, &intercept(30), &cand, &ScreenConfig::Tau(0.1)).unwrap();
        assert!(res.selected.is_empty());
        assert!(res.tstats.iter().all(|t| *t == 0.0));
    }

    #[test]
    fn null_rejection_rate_is_nominal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        let t = 200;
        let draws = 1000;
        let rejections = (0..draws)
            .filter(|_| {
                let y = noise(&mut rng, t);
                let x = noise(&mut rng, t);
                tstat_single(&y, &intercept(t), &x).unwrap().abs() > 1.96
            })
            .count();
        let rate = rejections as f64 / draws as f64;
        assert!((rate - 0.05).abs() <= 0.02, "rejection rate {rate}");
    }

    #[test]
    fn insufficient_sample() {
        let y = DVector::from_element(2, 1.0);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            tstat_single(&y, &intercept(2), &x),
            Err(Error::InsufficientSample { .. })
        ));
    }

    #[test]
    fn collinear_candidate_is_singular_and_skipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = 40;
        let y = noise(&mut rng, t);
        let good = noise(&mut rng, t);
        let constant = DVector::from_element(t, 3.0);
        assert!(matches!(
            tstat_single(&y, &intercept(t), &constant),
            Err(Error::SingularDesign(_))
        ));
        let cands = DMatrix::from_columns(&[good, constant]);
        let res = screen(&y, &intercept(t), &cands, &ScreenConfig::Tau(0.5)).unwrap();
        assert_eq!(res.skipped.len(), 1);
        assert_eq!(res.skipped[0].index, 1);
        assert!(res.tstats[1].is_nan());
        assert!(!res.selected.contains(&1));
    }

    #[test]
    fn tau_half_gives_zero_threshold() {
        let cfg = ScreenConfig::tau(0.5).unwrap();
        assert!(cfg.threshold().abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = 30;
        let y = noise(&mut rng, t);
        let cands = DMatrix::from_fn(t, 7, |_, _| rng.sample(StandardNormal));
        let res = screen(&y, &intercept(t), &cands, &cfg).unwrap();
        assert_eq!(res.selected, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn tau_five_percent_matches_bisection_quantile() {
        // independent quantile: bisection on the CDF
        let cdf = |x: f64| Normal::standard().cdf(x);
        let (mut lo, mut hi) = (0.0, 5.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.95 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let got = ScreenConfig::tau(0.05).unwrap().threshold();
        assert!((got - 0.5 * (lo + hi)).abs() < 1e-9);
        assert!((got - 1.6449).abs() < 1e-4);
    }

    #[test]
    fn invalid_configs() {
        assert!(ScreenConfig::tau(0.0).is_err());
        assert!(ScreenConfig::tau(1.0).is_err());
        assert!(ScreenConfig::lambda(-1.0).is_err());
    }

    #[test]
    fn strict_inequality_excludes_ties() {
        let r = ScreenResult {
            tstats: vec![1.0, -2.0, 3.0],
            lambda: 0.0,
            selected: vec![],
            skipped: vec![],
        }
        .rethreshold(2.0);
        assert_eq!(r.selected, vec![2]);
    }
}
