//! Ridge estimation with a generalized cross-validation choice of the
//! penalty, and the select-then-ridge pipeline built on [`crate::screen`].
//!
//! The objective is `(1/T)||y - X b||^2 + alpha ||b||^2`, so the closed form
//! is `b = (X'X/T + alpha I)^{-1} X'y/T`. GCV is
//! `RSS / (T (1 - tr(H)/T)^2)` with `H = X (X'X/T + alpha I)^{-1} X'/T`.
//!
//! [`SpectralRidge`] diagonalises the smaller of `X'X/T` and `XX'/T` once and
//! then evaluates coefficients, RSS and `tr(H)` for any alpha cheaply, which
//! is what makes a 100-point grid affordable inside the Monte Carlo loops.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::screen::{screen, ScreenConfig, ScreenResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Log,
    Linear,
}

/// Strictly increasing positive penalty values searched by GCV.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaGrid {
    points: Vec<f64>,
}

impl AlphaGrid {
    pub fn new(lo: f64, hi: f64, count: usize, spacing: Spacing) -> Result<Self> {
        if !(lo > 0.0) || !(hi > lo) || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "alpha grid needs 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if count < 2 {
            return Err(Error::Domain(format!("alpha grid needs count >= 2, got {count}")));
        }
        let last = (count - 1) as f64;
        let points = (0..count)
            .map(|i| {
                let f = i as f64 / last;
                if i == 0 {
                    return lo;
                }
                if i == count - 1 {
                    return hi;
                }
                match spacing {
                    Spacing::Log => (lo.ln() + f * (hi.ln() - lo.ln())).exp(),
                    Spacing::Linear => lo + f * (hi - lo),
                }
            })
            .collect();
        Self::from_points(points)
    }

    pub fn log(lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(lo, hi, count, Spacing::Log)
    }

    /// Arbitrary grid, possibly a single point.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Domain("alpha grid is empty".into()));
        }
        if points.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::Domain("alpha grid points must be positive and finite".into()));
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("alpha grid must be strictly increasing".into()));
        }
        Ok(AlphaGrid { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for AlphaGrid {
    /// 100 log-spaced points on `[1e-6, 1e2]`.
    fn default() -> Self {
        AlphaGrid::log(1e-6, 1e2, 100).expect("static grid is valid")
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must be positive and finite, got {alpha}")))
    }
}

fn check_rows(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "design rows",
            expected: y.len(),
            actual: x.nrows(),
        });
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Domain("empty design".into()));
    }
    Ok(())
}

fn spd_solve(mut a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(&b)),
        None => {
            // symmetric but numerically indefinite; LU still works for alpha > 0
            a.fill_lower_triangle_with_upper_triangle();
            a.lu()
                .solve(&b)
                .ok_or_else(|| Error::SingularDesign("ridge system is singular".into()))
        }
    }
}

/// Closed-form ridge coefficients, penalising every column (intercept included).
pub fn ridge_solve(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<DVector<f64>> {
    check_alpha(alpha)?;
    check_rows(x, y)?;
    let t = x.nrows() as f64;
    if x.ncols() <= x.nrows() {
        let mut a = x.tr_mul(x) / t;
        for i in 0..a.nrows() {
            a[(i, i)] += alpha;
        }
        spd_solve(a, x.tr_mul(y) / t)
    } else {
        // push-through identity: (X'X/T + aI)^{-1} X' = X' (XX'/T + aI)^{-1}
        let mut k = x * x.transpose() / t;
        for i in 0..k.nrows() {
            k[(i, i)] += alpha;
        }
        let w = spd_solve(k, y / t)?;
        Ok(x.tr_mul(&w))
    }
}

/// GCV criterion of the fully penalised ridge fit.
pub fn gcv(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    SpectralRidge::new(x, y, &[])?.gcv(alpha)
}

enum Spectrum {
    /// `X'X/T = V diag(lambda) V'`, `c = V'X'y/T`.
    Primal {
        v: DMatrix<f64>,
        c: DVector<f64>,
        rss_perp: f64,
    },
    /// `XX'/T = U diag(lambda) U'`, `g = U'y`, `m = X'U`.
    Dual { m: DMatrix<f64>, g: DVector<f64> },
}

/// Ridge problem diagonalised once for evaluation along a penalty path.
///
/// Columns listed as unpenalized are profiled out by projection before the
/// penalised block is diagonalised.
pub struct SpectralRidge {
    t: usize,
    p: usize,
    unpenalized: Vec<usize>,
    penalized: Vec<usize>,
    /// `(P'P)^{-1}P'y` and `(P'P)^{-1}P'Q` for recovering the profiled block.
    profile: Option<(DVector<f64>, DMatrix<f64>)>,
    eigenvalues: DVector<f64>,
    spectrum: Spectrum,
}

impl SpectralRidge {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, unpenalized: &[usize]) -> Result<Self> {
        check_rows(x, y)?;
        let t = x.nrows();
        let p = x.ncols();
        let mut unpen: Vec<usize> = unpenalized.to_vec();
        unpen.sort_unstable();
        unpen.dedup();
        if unpen.iter().any(|&j| j >= p) {
            return Err(Error::Domain("unpenalized column index out of range".into()));
        }
        let penalized: Vec<usize> = (0..p).filter(|j| unpen.binary_search(j).is_err()).collect();
        let q_raw = x.select_columns(&penalized);

        let (q, yt, profile) = if unpen.is_empty() {
            (q_raw, y.clone(), None)
        } else {
            let pm = x.select_columns(&unpen);
            let chol = pm.tr_mul(&pm).cholesky().ok_or_else(|| {
                Error::SingularDesign("unpenalized columns are collinear".into())
            })?;
            let a0 = chol.solve(&pm.tr_mul(y));
            let a = chol.solve(&pm.tr_mul(&q_raw));
            let q = &q_raw - &pm * &a;
            let yt = y - &pm * &a0;
            (q, yt, Some((a0, a)))
        };

        let tf = t as f64;
        let qn = q.ncols();
        let (eigenvalues, spectrum) = if qn == 0 {
            let spectrum = Spectrum::Primal {
                v: DMatrix::zeros(0, 0),
                c: DVector::zeros(0),
                rss_perp: yt.norm_squared(),
            };
            (DVector::zeros(0), spectrum)
        } else if qn <= t {
            let eig = SymmetricEigen::new(q.tr_mul(&q) / tf);
            let lam = eig.eigenvalues.map(|l| l.max(0.0));
            let v = eig.eigenvectors;
            let c = v.tr_mul(&(q.tr_mul(&yt) / tf));
            let lmax = lam.iter().cloned().fold(0.0, f64::max);
            let tol = lmax * qn.max(1) as f64 * f64::EPSILON * 10.0;
            let pinv_c = DVector::from_fn(qn, |i, _| if lam[i] > tol { c[i] / lam[i] } else { 0.0 });
            let resid = &yt - &q * (&v * pinv_c);
            let spectrum = Spectrum::Primal {
                v,
                c,
                rss_perp: resid.norm_squared(),
            };
            (lam, spectrum)
        } else {
            let eig = SymmetricEigen::new(&q * q.transpose() / tf);
            let lam = eig.eigenvalues.map(|l| l.max(0.0));
            let u = eig.eigenvectors;
            let g = u.tr_mul(&yt);
            let m = q.tr_mul(&u);
            (lam, Spectrum::Dual { m, g })
        };

        Ok(SpectralRidge {
            t,
            p,
            unpenalized: unpen,
            penalized,
            profile,
            eigenvalues,
            spectrum,
        })
    }

    pub fn nobs(&self) -> usize {
        self.t
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    /// Eigenvalues of the penalised block's Gram matrix (scaled by `1/T`).
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Coefficients for all `p` columns.
    pub fn coefficients(&self, alpha: f64) -> DVector<f64> {
        let tf = self.t as f64;
        let b = match &self.spectrum {
            Spectrum::Primal { v, c, .. } => {
                let scaled = DVector::from_fn(c.len(), |i, _| c[i] / (self.eigenvalues[i] + alpha));
                v * scaled
            }
            Spectrum::Dual { m, g } => {
                let scaled =
                    DVector::from_fn(g.len(), |i, _| g[i] / (self.eigenvalues[i] + alpha) / tf);
                m * scaled
            }
        };
        let mut out = DVector::zeros(self.p);
        for (k, &j) in self.penalized.iter().enumerate() {
            out[j] = b[k];
        }
        if let Some((a0, a)) = &self.profile {
            let prof = a0 - a * &b;
            for (k, &j) in self.unpenalized.iter().enumerate() {
                out[j] = prof[k];
            }
        }
        out
    }

    pub fn rss(&self, alpha: f64) -> f64 {
        let tf = self.t as f64;
        let lam = &self.eigenvalues;
        match &self.spectrum {
            Spectrum::Primal { c, rss_perp, .. } => {
                let lmax = lam.iter().cloned().fold(0.0, f64::max);
                let tol = lmax * lam.len().max(1) as f64 * f64::EPSILON * 10.0;
                let mut rss = *rss_perp;
                for i in 0..c.len() {
                    let (l, ci) = (lam[i], c[i]);
                    if l > tol {
                        let shrink = alpha / (l + alpha);
                        rss += tf * ci * ci / l * shrink * shrink;
                    } else {
                        rss -= tf * ci * ci * (l + 2.0 * alpha) / ((l + alpha) * (l + alpha));
                    }
                }
                rss.max(0.0)
            }
            Spectrum::Dual { g, .. } => g
                .iter()
                .zip(lam.iter())
                .map(|(gi, l)| {
                    let shrink = alpha / (l + alpha);
                    shrink * shrink * gi * gi
                })
                .sum(),
        }
    }

    /// `tr(H_alpha)`, the effective number of parameters.
    pub fn trace(&self, alpha: f64) -> f64 {
        self.unpenalized.len() as f64
            + self.eigenvalues.iter().map(|l| l / (l + alpha)).sum::<f64>()
    }

    pub fn gcv(&self, alpha: f64) -> Result<f64> {
        let tf = self.t as f64;
        let denom = 1.0 - self.trace(alpha) / tf;
        if !(denom > 1e-12) {
            return Err(Error::NumericalBreakdown {
                alpha,
                message: format!("tr(H)/T = {:.6} leaves no residual degrees of freedom", 1.0 - denom),
            });
        }
        Ok(self.rss(alpha) / (tf * denom * denom))
    }
}

/// Per-column affine map between the original and the standardized design.
#[derive(Debug, Clone)]
struct Standardizer {
    intercept: Option<usize>,
    center: DVector<f64>,
    scale: DVector<f64>,
}

impl Standardizer {
    fn fit(x: &DMatrix<f64>, enabled: bool) -> Self {
        let p = x.ncols();
        let t = x.nrows() as f64;
        let intercept = (0..p).find(|&j| x.column(j).iter().all(|&v| v == 1.0));
        let mut center = DVector::zeros(p);
        let mut scale = DVector::from_element(p, 1.0);
        if enabled {
            for j in 0..p {
                if Some(j) == intercept {
                    continue;
                }
                let col = x.column(j);
                let m = if intercept.is_some() { col.sum() / t } else { 0.0 };
                let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / t).sqrt();
                center[j] = m;
                // zero-variance columns carry no information once centred
                scale[j] = if s > 0.0 { s } else { f64::INFINITY };
            }
        }
        Standardizer {
            intercept,
            center,
            scale,
        }
    }

    fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.center[j]) / self.scale[j]
        })
    }

    fn to_original(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut beta = DVector::from_fn(b.len(), |j, _| b[j] / self.scale[j]);
        if let Some(i) = self.intercept {
            let shift: f64 = (0..b.len())
                .filter(|&j| j != i)
                .map(|j| beta[j] * self.center[j])
                .sum();
            beta[i] -= shift;
        }
        beta
    }
}

/// Preprocessing choices for the pipeline fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RidgeOptions {
    /// Centre and scale non-intercept columns on the training window.
    pub standardize: bool,
    /// Include the intercept in the ridge penalty.
    pub penalize_intercept: bool,
}

impl Default for RidgeOptions {
    fn default() -> Self {
        RidgeOptions {
            standardize: true,
            penalize_intercept: true,
        }
    }
}

impl RidgeOptions {
    /// Ridge on the design exactly as given.
    pub fn raw() -> Self {
        RidgeOptions {
            standardize: false,
            penalize_intercept: true,
        }
    }
}

/// Ridge problem with preprocessing, ready for evaluation along a grid.
pub struct PreparedRidge {
    standardizer: Standardizer,
    spectral: SpectralRidge,
    options: RidgeOptions,
}

impl PreparedRidge {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>, options: RidgeOptions) -> Result<Self> {
        check_rows(x, y)?;
        let standardizer = Standardizer::fit(x, options.standardize);
        let design = if options.standardize {
            standardizer.transform(x)
        } else {
            x.clone()
        };
        let unpenalized: Vec<usize> = match standardizer.intercept {
            Some(i) if !options.penalize_intercept => vec![i],
            _ => vec![],
        };
        let spectral = SpectralRidge::new(&design, y, &unpenalized)?;
        Ok(PreparedRidge {
            standardizer,
            spectral,
            options,
        })
    }

    pub fn gcv(&self, alpha: f64) -> Result<f64> {
        self.spectral.gcv(alpha)
    }

    /// Coefficients on the original scale of the design.
    pub fn coefficients(&self, alpha: f64) -> DVector<f64> {
        self.standardizer.to_original(&self.spectral.coefficients(alpha))
    }

    pub fn spectral(&self) -> &SpectralRidge {
        &self.spectral
    }

    /// GCV along `grid`, returning the arg-min with ties going to the larger alpha.
    ///
    /// Grid points that exhaust the residual degrees of freedom are recorded as
    /// `+inf`; the path fails only when every point does.
    pub fn gcv_path(&self, grid: &AlphaGrid) -> Result<(Vec<(f64, f64)>, usize)> {
        let mut path: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
        let mut best = 0;
        let mut first_err = None;
        for (k, &alpha) in grid.points().iter().enumerate() {
            let value = match self.gcv(alpha) {
                Ok(v) => v,
                Err(e @ Error::NumericalBreakdown { .. }) => {
                    log::debug!("{e}");
                    first_err.get_or_insert(e);
                    f64::INFINITY
                }
                Err(e) => return Err(e),
            };
            if k == 0 || value <= path[best].1 {
                best = k;
            }
            path.push((alpha, value));
        }
        match first_err {
            Some(e) if path[best].1.is_infinite() => Err(e),
            _ => Ok((path, best)),
        }
    }

    pub fn fit(&self, grid: &AlphaGrid) -> Result<RidgeFit> {
        let (gcv_path, best) = self.gcv_path(grid)?;
        let (alpha, gcv_value) = gcv_path[best];
        Ok(RidgeFit {
            coefficients: self.coefficients(alpha),
            alpha,
            gcv_value,
            gcv_path,
            selected: (0..self.spectral.ncols()).collect(),
            standardized: self.options.standardize,
            penalize_intercept: self.options.penalize_intercept,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    /// Coefficients on the original scale; zero outside `selected`.
    pub coefficients: DVector<f64>,
    pub alpha: f64,
    pub gcv_value: f64,
    pub gcv_path: Vec<(f64, f64)>,
    /// Column indices allowed to be nonzero, ascending.
    pub selected: Vec<usize>,
    pub standardized: bool,
    pub penalize_intercept: bool,
}

impl RidgeFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        x * &self.coefficients
    }
}

/// GCV grid search on the raw design with every coefficient penalised.
pub fn gcv_minimize(x: &DMatrix<f64>, y: &DVector<f64>, grid: &AlphaGrid) -> Result<RidgeFit> {
    PreparedRidge::new(x, y, RidgeOptions::raw())?.fit(grid)
}

/// GCV grid search with the given preprocessing.
pub fn fit_gcv(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &AlphaGrid,
    options: RidgeOptions,
) -> Result<RidgeFit> {
    PreparedRidge::new(x, y, options)?.fit(grid)
}

/// `[officials | candidates[:, selected]]`.
pub fn reduced_design(
    officials: &DMatrix<f64>,
    candidates: &DMatrix<f64>,
    selected: &[usize],
) -> DMatrix<f64> {
    let n1 = officials.ncols();
    let mut x = DMatrix::zeros(officials.nrows(), n1 + selected.len());
    x.columns_mut(0, n1).copy_from(officials);
    for (k, &j) in selected.iter().enumerate() {
        x.set_column(n1 + k, &candidates.column(j));
    }
    x
}

/// Scatters reduced coefficients into a zero vector of length `n`.
pub fn embed(reduced: &DVector<f64>, positions: &[usize], n: usize) -> DVector<f64> {
    let mut full = DVector::zeros(n);
    for (k, &j) in positions.iter().enumerate() {
        full[j] = reduced[k];
    }
    full
}

fn selection_positions(n1: usize, selected: &[usize]) -> Vec<usize> {
    (0..n1).chain(selected.iter().map(|j| n1 + j)).collect()
}

/// Ridge with GCV on the officials plus a given subset of the candidates.
/// Coefficients are indexed as `[officials | candidates]`.
pub fn fit_selected(
    y: &DVector<f64>,
    officials: &DMatrix<f64>,
    candidates: &DMatrix<f64>,
    selected: &[usize],
    grid: &AlphaGrid,
    options: RidgeOptions,
) -> Result<RidgeFit> {
    if candidates.nrows() != officials.nrows() {
        return Err(Error::DimensionMismatch {
            context: "candidate rows",
            expected: officials.nrows(),
            actual: candidates.nrows(),
        });
    }
    let x = reduced_design(officials, candidates, selected);
    let reduced = fit_gcv(&x, y, grid, options)?;
    let positions = selection_positions(officials.ncols(), selected);
    let n = officials.ncols() + candidates.ncols();
    Ok(RidgeFit {
        coefficients: embed(&reduced.coefficients, &positions, n),
        selected: positions,
        ..reduced
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionFit {
    pub screen: ScreenResult,
    pub fit: RidgeFit,
}

/// Screens the candidates conditional on the officials, then fits ridge with
/// GCV on the officials plus the retained candidates.
pub fn ridge_after_selection(
    y: &DVector<f64>,
    officials: &DMatrix<f64>,
    candidates: &DMatrix<f64>,
    screen_cfg: &ScreenConfig,
    grid: &AlphaGrid,
    options: RidgeOptions,
) -> Result<SelectionFit> {
    let screened = screen(y, officials, candidates, screen_cfg)?;
    if screened.selected.is_empty() {
        log::info!("screening retained no candidates; fitting officials only");
    }
    let fit = fit_selected(y, officials, candidates, &screened.selected, grid, options)?;
    Ok(SelectionFit {
        screen: screened,
        fit,
    })
}

/// Extreme eigenvalues of the Gram matrix `X'X/T` of a selected design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenDiagnostics {
    /// Smallest eigenvalue (the squared restricted eigenvalue at zero extra columns).
    pub kappa_sq: f64,
    /// Largest eigenvalue.
    pub phi: f64,
    /// `sqrt(phi) / kappa`.
    pub mu: f64,
}

pub fn eigen_diagnostics(x: &DMatrix<f64>) -> EigenDiagnostics {
    let t = x.nrows().max(1) as f64;
    let eig = SymmetricEigen::new(x.tr_mul(x) / t).eigenvalues;
    let kappa_sq = eig.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
    let phi = eig.iter().cloned().fold(0.0, f64::max);
    let mu = if kappa_sq > 0.0 {
        (phi / kappa_sq).sqrt()
    } else {
        f64::INFINITY
    };
    EigenDiagnostics { kappa_sq, phi, mu }
}
