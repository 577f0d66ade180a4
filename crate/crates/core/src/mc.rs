//! Monte Carlo engine for the simulation study.
//!
//! DGP, for `t = 1..T`:
//!
//! ```text
//! y_t   = gamma' z_t + beta' x_t + v_t,     z_t ~ N2(0, [[1, .3], [.3, 1]])
//! x_j,t = delta * (z_1,t + z_2,t) + u_j,t,  u_t ~ N(0, Psi),  v_t ~ N(0, 1)
//! ```
//!
//! with `gamma = (1, 2)'` and `beta_j ~ N(0, 1)` for `j <= s`, zero otherwise.
//! Each replication draws from its own ChaCha stream keyed by
//! `(seed, config, replication)`, so reports are bit-identical whatever the
//! execution policy.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::ridge::{embed, fit_selected, reduced_design, AlphaGrid, PreparedRidge, RidgeOptions};
use crate::screen::{normal_quantile, screen_with, ScreenConfig, ScreenResult};

pub const GAMMA: [f64; 2] = [1.0, 2.0];
pub const Z_CORR: f64 = 0.3;
/// Tolerated false-positive rates; thresholds are the `1 - fdr` normal quantiles.
pub const FDR_GRID: [f64; 6] = [0.20, 0.10, 0.05, 0.025, 0.01, 0.005];
/// `(N, T, s)` of the normalizing configuration.
pub const BASELINE: (usize, usize, usize) = (150, 100, 105);
/// `(N, T, s)` of the compared configurations, in table column order.
pub const TABLE_CONFIGS: [(usize, usize, usize); 3] = [(200, 150, 105), (200, 150, 110), (200, 100, 110)];
pub const TABLE_DELTAS: [f64; 2] = [0.2, 0.8];
pub const TABLE_PSIS: [Psi; 2] = [Psi::Identity, Psi::Decreasing(0.5)];

type Block = [[(f64, f64); 3]; 6];

/// Published (MSER, MSFER) values indexed `[delta][psi][fdr][config]`.
pub const PUBLISHED: [[Block; 2]; 2] = [
    [
        [
            [(0.9526, 0.8104), (1.0206, 0.8478), (0.7831, 1.1369)],
            [(0.9620, 0.8412), (1.0061, 0.8863), (0.9226, 1.0240)],
            [(0.9414, 0.8364), (0.9797, 0.8794), (0.9667, 1.0041)],
            [(0.9343, 0.8611), (0.9770, 0.9030), (0.9825, 1.0019)],
            [(0.9130, 0.8753), (0.9538, 0.9220), (1.0001, 1.0188)],
            [(0.9089, 0.8781), (0.9485, 0.9324), (1.0013, 1.0146)],
        ],
        [
            [(0.9643, 0.7904), (1.0066, 0.8154), (0.9051, 1.1521)],
            [(0.9657, 0.8325), (1.0053, 0.8724), (0.9492, 1.0860)],
            [(0.9236, 0.8387), (0.9654, 0.8812), (0.9805, 1.0222)],
            [(0.9178, 0.8503), (0.9642, 0.8905), (0.9996, 1.0216)],
            [(0.9011, 0.8593), (0.9477, 0.9025), (1.0262, 1.0287)],
            [(0.8865, 0.8607), (0.9403, 0.9097), (1.0301, 1.0427)],
        ],
    ],
    [
        [
            [(0.9481, 0.8047), (1.0185, 0.8433), (0.7856, 1.11799)],
            [(0.9476, 0.8438), (0.9955, 0.8885), (0.9184, 1.01455)],
            [(0.9275, 0.8280), (0.9718, 0.8747), (0.9767, 0.99942)],
            [(0.9338, 0.8477), (0.9768, 0.8932), (1.0001, 1.00466)],
            [(0.9136, 0.8666), (0.9547, 0.9149), (0.9993, 1.02664)],
            [(0.9097, 0.8694), (0.9487, 0.9248), (0.9995, 1.01358)],
        ],
        [
            [(0.9488, 0.7826), (0.9952, 0.8103), (0.8957, 1.14796)],
            [(0.9511, 0.8283), (0.9941, 0.8686), (0.9463, 1.07847)],
            [(0.9081, 0.8314), (0.9555, 0.8779), (0.9928, 1.02038)],
            [(0.9018, 0.8368), (0.9499, 0.8777), (1.0081, 1.01674)],
            [(0.8987, 0.8490), (0.9452, 0.8942), (1.0303, 1.03002)],
            [(0.8866, 0.8518), (0.9373, 0.9010), (1.0321, 1.04643)],
        ],
    ],
];

/// Published block for a `(delta, psi)` pair, if it is one of the tabulated ones.
pub fn published_block(delta_scale: f64, psi: Psi) -> Option<&'static Block> {
    let d = TABLE_DELTAS.iter().position(|&d| d == delta_scale)?;
    let p = TABLE_PSIS.iter().position(|&p| p == psi)?;
    Some(&PUBLISHED[d][p])
}

/// Covariance of the idiosyncratic part `u_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psi {
    Identity,
    /// `Psi_jk = rho^|j-k|`.
    Decreasing(f64),
}

impl Psi {
    pub fn entry(self, j: usize, k: usize) -> f64 {
        match self {
            Psi::Identity => f64::from(u8::from(j == k)),
            Psi::Decreasing(rho) => rho.powi(j.abs_diff(k) as i32),
        }
    }

    fn code(self) -> u64 {
        match self {
            Psi::Identity => 0,
            Psi::Decreasing(rho) => rho.to_bits(),
        }
    }
}

impl fmt::Display for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psi::Identity => f.write_str("identity"),
            Psi::Decreasing(rho) => write!(f, "decreasing:{rho}"),
        }
    }
}

impl FromStr for Psi {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "identity" || s == "i" => Ok(Psi::Identity),
            None if s == "decreasing" => Ok(Psi::Decreasing(0.5)),
            Some(("decreasing", r)) => {
                let rho: f64 = r
                    .parse()
                    .map_err(|_| Error::Config(format!("bad correlation '{r}'")))?;
                if !(rho.abs() < 1.0) {
                    return Err(Error::Config(format!("correlation {rho} must lie in (-1, 1)")));
                }
                Ok(Psi::Decreasing(rho))
            }
            _ => Err(Error::Config(format!("unknown covariance '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpConfig {
    pub n: usize,
    pub t: usize,
    pub s: usize,
    pub delta_scale: f64,
    pub psi: Psi,
    /// Active coefficients are pushed away from zero to at least this magnitude.
    pub beta_floor: f64,
    pub seed: u64,
}

impl DgpConfig {
    pub fn new(n: usize, t: usize, s: usize, delta_scale: f64, psi: Psi, seed: u64) -> Result<Self> {
        let cfg = DgpConfig {
            n,
            t,
            s,
            delta_scale,
            psi,
            beta_floor: 0.0,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s > self.n {
            return Err(Error::Config(format!("s = {} exceeds N = {}", self.s, self.n)));
        }
        if self.n == 0 || self.t == 0 {
            return Err(Error::Config("N and T must be positive".into()));
        }
        if !self.delta_scale.is_finite() || !(self.beta_floor >= 0.0) {
            return Err(Error::Config("delta and beta floor must be finite, floor nonnegative".into()));
        }
        if let Psi::Decreasing(rho) = self.psi {
            if !(rho.abs() < 1.0) {
                return Err(Error::Config(format!("correlation {rho} must lie in (-1, 1)")));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("N{}_T{}_s{}", self.n, self.t, self.s)
    }

    fn rng_seed(&self) -> [u8; 32] {
        let mut seed = [0u8; 32];
        let words = [
            self.seed,
            ((self.n as u64) << 32) | self.t as u64,
            ((self.s as u64) << 32) ^ self.beta_floor.to_bits(),
            self.delta_scale.to_bits() ^ self.psi.code().rotate_left(17),
        ];
        for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        seed
    }

    /// Independent stream for one replication.
    pub fn replication_rng(&self, replication: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.rng_seed());
        rng.set_stream(replication);
        rng
    }

    pub fn draw_beta<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.n, |j, _| {
            if j < self.s {
                let b: f64 = rng.sample(StandardNormal);
                if b.abs() < self.beta_floor {
                    self.beta_floor.copysign(b)
                } else {
                    b
                }
            } else {
                0.0
            }
        })
    }

    /// Second-moment matrix of the full regressor vector `(1, z_1, z_2, x_1..x_N)`.
    pub fn population_moment(&self) -> DMatrix<f64> {
        let n = self.n;
        let d = self.delta_scale;
        // Var(z1 + z2) = 2 + 2 * 0.3, Cov(z1 + z2, z_k) = 1.3
        let zsum_var = 2.0 + 2.0 * Z_CORR;
        let zsum_cov = 1.0 + Z_CORR;
        DMatrix::from_fn(n + 3, n + 3, |a, b| match (a, b) {
            (0, 0) => 1.0,
            (0, _) | (_, 0) => 0.0,
            (1, 1) | (2, 2) => 1.0,
            (1, 2) | (2, 1) => Z_CORR,
            (1 | 2, _) | (_, 1 | 2) => d * zsum_cov,
            _ => d * d * zsum_var + self.psi.entry(a - 3, b - 3),
        })
    }

    /// `(0, gamma, beta)` aligned with [`population_moment`](Self::population_moment).
    pub fn full_coefficients(beta: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(beta.len() + 3);
        full[1] = GAMMA[0];
        full[2] = GAMMA[1];
        full.rows_mut(3, beta.len()).copy_from(beta);
        full
    }
}

/// One simulated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub y: DVector<f64>,
    pub z: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub beta: DVector<f64>,
    pub gamma: [f64; 2],
}

impl SimulatedData {
    /// Officials `(1, z_1, z_2)` over `rows`.
    pub fn officials(&self, rows: std::ops::Range<usize>) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), 3, |i, j| {
            if j == 0 {
                1.0
            } else {
                self.z[(rows.start + i, j - 1)]
            }
        })
    }

    pub fn candidates(&self, rows: std::ops::Range<usize>) -> DMatrix<f64> {
        self.x.rows(rows.start, rows.len()).into_owned()
    }

    pub fn target(&self, rows: std::ops::Range<usize>) -> DVector<f64> {
        self.y.rows(rows.start, rows.len()).into_owned()
    }
}

/// Draws `t_total` observations with a given coefficient vector.
pub fn simulate_with_beta<R: Rng>(
    cfg: &DgpConfig,
    t_total: usize,
    beta: DVector<f64>,
    rng: &mut R,
) -> Result<SimulatedData> {
    cfg.validate()?;
    if beta.len() != cfg.n {
        return Err(Error::DimensionMismatch {
            context: "beta",
            expected: cfg.n,
            actual: beta.len(),
        });
    }
    let n = cfg.n;
    let zc = (1.0 - Z_CORR * Z_CORR).sqrt();
    let (rho, innov) = match cfg.psi {
        Psi::Identity => (0.0, 1.0),
        Psi::Decreasing(r) => (r, (1.0 - r * r).sqrt()),
    };
    let mut z = DMatrix::zeros(t_total, 2);
    let mut x = DMatrix::zeros(t_total, n);
    let mut y = DVector::zeros(t_total);
    let mut u = vec![0.0; n];
    for t in 0..t_total {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let (z1, z2) = (e1, Z_CORR * e1 + zc * e2);
        z[(t, 0)] = z1;
        z[(t, 1)] = z2;
        // AR(1) across j reproduces Psi_jk = rho^|j-k| with unit variances
        for j in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            u[j] = if j == 0 { e } else { rho * u[j - 1] + innov * e };
        }
        let common = cfg.delta_scale * (z1 + z2);
        let mut yt = GAMMA[0] * z1 + GAMMA[1] * z2;
        for j in 0..n {
            let xj = common + u[j];
            x[(t, j)] = xj;
            yt += beta[j] * xj;
        }
        let v: f64 = rng.sample(StandardNormal);
        y[t] = yt + v;
    }
    Ok(SimulatedData {
        y,
        z,
        x,
        beta,
        gamma: GAMMA,
    })
}

/// Draws `t_total` observations for `replication`, with a fresh `beta`.
pub fn simulate_dgp(cfg: &DgpConfig, t_total: usize, replication: u64) -> Result<SimulatedData> {
    let mut rng = cfg.replication_rng(replication);
    let beta = cfg.draw_beta(&mut rng);
    simulate_with_beta(cfg, t_total, beta, &mut rng)
}

/// Exact conditional MSPE `sigma2 + d' Sigma d` with `d = beta_hat - beta_true`.
pub fn conditional_mspe(
    beta_hat: &DVector<f64>,
    beta_true: &DVector<f64>,
    sigma2: f64,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    let p = beta_true.len();
    if beta_hat.len() != p {
        return Err(Error::DimensionMismatch {
            context: "estimated coefficients",
            expected: p,
            actual: beta_hat.len(),
        });
    }
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            context: "regressor covariance",
            expected: p,
            actual: sigma.nrows().max(sigma.ncols()),
        });
    }
    let d = beta_hat - beta_true;
    Ok(sigma2 + (sigma * &d).dot(&d))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Mean and standard error of the mean; the error is NaN for a single value.
fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut s = Compensated::default();
    let mut n = 0usize;
    for v in values.clone() {
        s.add(v);
        n += 1;
    }
    let mean = s.value() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let mut ss = Compensated::default();
    for v in values {
        ss.add((v - mean) * (v - mean));
    }
    (mean, (ss.value() / (n - 1) as f64 / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub replications: usize,
    /// Held-out observations as a fraction of `T`.
    pub oos_fraction: f64,
    pub fdr_grid: Vec<f64>,
    pub grid: AlphaGrid,
    pub ridge: RidgeOptions,
    /// Draw `beta` once per configuration instead of once per replication.
    pub fix_beta: bool,
    pub exec: Exec,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            replications: 500,
            oos_fraction: 0.5,
            fdr_grid: FDR_GRID.to_vec(),
            grid: AlphaGrid::default(),
            ridge: RidgeOptions::default(),
            fix_beta: false,
            exec: Exec::default(),
        }
    }
}

impl McOptions {
    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if !(self.oos_fraction > 0.0 && self.oos_fraction.is_finite()) {
            return Err(Error::Config(format!("oos fraction {} must be positive", self.oos_fraction)));
        }
        if self.fdr_grid.is_empty() || self.fdr_grid.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(Error::Config("FDR levels must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Replicate {
    in_mse: Vec<f64>,
    oos_mse: Vec<f64>,
    selected: Vec<usize>,
}

fn mse(y: &DVector<f64>, officials: &DMatrix<f64>, candidates: &DMatrix<f64>, coef: &DVector<f64>) -> f64 {
    let k = officials.ncols();
    let fitted = officials * coef.rows(0, k) + candidates * coef.rows(k, candidates.ncols());
    (y - fitted).norm_squared() / y.len() as f64
}

fn replicate(cfg: &DgpConfig, opts: &McOptions, t_oos: usize, rep: u64, beta: Option<&DVector<f64>>) -> Result<Replicate> {
    let t = cfg.t;
    let mut rng = cfg.replication_rng(rep);
    let beta = match beta {
        Some(b) => b.clone(),
        None => cfg.draw_beta(&mut rng),
    };
    let data = simulate_with_beta(cfg, t + t_oos, beta, &mut rng)?;
    let (train, test) = (0..t, t..t + t_oos);
    let (y, off, cand) = (data.target(train.clone()), data.officials(train.clone()), data.candidates(train));
    let (y_oos, off_oos, cand_oos) = (data.target(test.clone()), data.officials(test.clone()), data.candidates(test));

    // t-statistics once, thresholds per FDR level
    let base: ScreenResult = screen_with(&y, &off, &cand, &ScreenConfig::Lambda(0.0), Exec::Sequential)?;
    let mut out = Replicate {
        in_mse: Vec::with_capacity(opts.fdr_grid.len()),
        oos_mse: Vec::with_capacity(opts.fdr_grid.len()),
        selected: Vec::with_capacity(opts.fdr_grid.len()),
    };
    let mut last: Option<(Vec<usize>, f64, f64)> = None;
    for &fdr in &opts.fdr_grid {
        let sel = base.rethreshold(normal_quantile(1.0 - fdr)).selected;
        let (ins, oos) = match &last {
            Some((prev, ins, oos)) if *prev == sel => (*ins, *oos),
            _ => {
                let fit = fit_selected(&y, &off, &cand, &sel, &opts.grid, opts.ridge)?;
                (
                    mse(&y, &off, &cand, &fit.coefficients),
                    mse(&y_oos, &off_oos, &cand_oos, &fit.coefficients),
                )
            }
        };
        out.in_mse.push(ins);
        out.oos_mse.push(oos);
        out.selected.push(sel.len());
        last = Some((sel, ins, oos));
    }
    Ok(out)
}

/// Averaged in-sample and out-of-sample MSE per FDR level for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct McReport {
    pub config: DgpConfig,
    pub replications: usize,
    pub oos_fraction: f64,
    pub fdr_grid: Vec<f64>,
    pub in_sample_mse: Vec<f64>,
    pub oos_mse: Vec<f64>,
    /// Monte Carlo standard errors; NaN with a single replication.
    pub in_sample_se: Vec<f64>,
    pub oos_se: Vec<f64>,
    pub mean_selected: Vec<f64>,
}

impl McReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io {
            path: "<csv>".into(),
            source: std::io::Error::other(e),
        };
        w.write_record(["fdr", "in_sample_mse", "in_sample_se", "oos_mse", "oos_se", "mean_selected"])
            .map_err(io)?;
        for k in 0..self.fdr_grid.len() {
            w.write_record([
                format!("{}", self.fdr_grid[k]),
                format!("{}", self.in_sample_mse[k]),
                format!("{}", self.in_sample_se[k]),
                format!("{}", self.oos_mse[k]),
                format!("{}", self.oos_se[k]),
                format!("{}", self.mean_selected[k]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })
    }
}

pub fn run_mc(cfg: &DgpConfig, opts: &McOptions) -> Result<McReport> {
    warn_single_replication(opts);
    run_mc_quiet(cfg, opts)
}

fn warn_single_replication(opts: &McOptions) {
    if opts.replications == 1 {
        log::warn!("a single replication leaves Monte Carlo standard errors undefined; they are reported as NaN");
    }
}

fn run_mc_quiet(cfg: &DgpConfig, opts: &McOptions) -> Result<McReport> {
    cfg.validate()?;
    opts.validate()?;
    let t_oos = ((opts.oos_fraction * cfg.t as f64).round() as usize).max(1);
    let fixed = opts.fix_beta.then(|| cfg.draw_beta(&mut cfg.replication_rng(u64::MAX)));
    let reps = opts.exec.map(opts.replications, |r| {
        replicate(cfg, opts, t_oos, r as u64, fixed.as_ref()).map_err(|e| Error::Replication {
            replication: r,
            source: Box::new(e),
        })
    });
    let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
    let k = opts.fdr_grid.len();
    let mut report = McReport {
        config: *cfg,
        replications: opts.replications,
        oos_fraction: opts.oos_fraction,
        fdr_grid: opts.fdr_grid.clone(),
        in_sample_mse: vec![0.0; k],
        oos_mse: vec![0.0; k],
        in_sample_se: vec![0.0; k],
        oos_se: vec![0.0; k],
        mean_selected: vec![0.0; k],
    };
    for i in 0..k {
        (report.in_sample_mse[i], report.in_sample_se[i]) = mean_se(reps.iter().map(|r| r.in_mse[i]));
        (report.oos_mse[i], report.oos_se[i]) = mean_se(reps.iter().map(|r| r.oos_mse[i]));
        report.mean_selected[i] = mean_se(reps.iter().map(|r| r.selected[i] as f64)).0;
    }
    Ok(report)
}

/// A ratio of averaged MSEs and its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCell {
    pub mser: f64,
    pub mser_se: f64,
    pub msfer: f64,
    pub msfer_se: f64,
}

fn ratio_se(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    (a / b) * ((se_a / a).powi(2) + (se_b / b).powi(2)).sqrt()
}

/// `report / baseline` per FDR level. Two independent runs are assumed; a
/// configuration compared with itself gets exact ratios of one and zero error.
pub fn ratio_cells(report: &McReport, baseline: &McReport) -> Result<Vec<RatioCell>> {
    if report.fdr_grid != baseline.fdr_grid {
        return Err(Error::Config("reports were run on different FDR grids".into()));
    }
    let same = report == baseline;
    Ok((0..report.fdr_grid.len())
        .map(|k| {
            let (a, b) = (report.in_sample_mse[k], baseline.in_sample_mse[k]);
            let (fa, fb) = (report.oos_mse[k], baseline.oos_mse[k]);
            RatioCell {
                mser: a / b,
                mser_se: if same { 0.0 } else { ratio_se(a, report.in_sample_se[k], b, baseline.in_sample_se[k]) },
                msfer: fa / fb,
                msfer_se: if same { 0.0 } else { ratio_se(fa, report.oos_se[k], fb, baseline.oos_se[k]) },
            }
        })
        .collect())
}

/// Ratios of several configurations against a common baseline, for one
/// `(delta, Psi)` regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTable {
    pub delta_scale: f64,
    pub psi: Psi,
    pub baseline: McReport,
    pub reports: Vec<McReport>,
    /// `[fdr][config]`.
    pub cells: Vec<Vec<RatioCell>>,
}

impl RatioTable {
    pub fn fdr_grid(&self) -> &[f64] {
        &self.baseline.fdr_grid
    }

    pub fn config_index(&self, n: usize, t: usize, s: usize) -> Option<usize> {
        self.reports
            .iter()
            .position(|r| (r.config.n, r.config.t, r.config.s) == (n, t, s))
    }

    /// Published values aligned with `cells`, when the table is a tabulated one.
    pub fn published(&self) -> Option<Vec<Vec<(f64, f64)>>> {
        let block = published_block(self.delta_scale, self.psi)?;
        if self.fdr_grid() != FDR_GRID {
            return None;
        }
        self.reports
            .iter()
            .map(|r| TABLE_CONFIGS.iter().position(|&c| c == (r.config.n, r.config.t, r.config.s)))
            .collect::<Option<Vec<_>>>()
            .map(|cols| block.iter().map(|row| cols.iter().map(|&c| row[c]).collect()).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "delta = {}, psi = {}, ratios vs {} ({} replications)\n{:>7}",
            self.delta_scale,
            self.psi,
            self.baseline.config.label(),
            self.baseline.replications,
            "FDR"
        );
        for r in &self.reports {
            s.push_str(&format!(" {:>21}", r.config.label()));
        }
        s.push_str(&format!("\n{:>7}", ""));
        for _ in &self.reports {
            s.push_str(&format!(" {:>10} {:>10}", "MSER", "MSFER"));
        }
        s.push('\n');
        for (k, row) in self.cells.iter().enumerate() {
            s.push_str(&format!("{:>6}%", self.fdr_grid()[k] * 100.0));
            for c in row {
                s.push_str(&format!(" {:>10.4} {:>10.4}", c.mser, c.msfer));
            }
            s.push('\n');
        }
        s
    }
}

/// Runs the baseline and every configuration of a table.
pub fn ratio_table(
    delta_scale: f64,
    psi: Psi,
    baseline: (usize, usize, usize),
    configs: &[(usize, usize, usize)],
    seed: u64,
    opts: &McOptions,
) -> Result<RatioTable> {
    warn_single_replication(opts);
    ratio_table_quiet(delta_scale, psi, baseline, configs, seed, opts)
}

fn ratio_table_quiet(
    delta_scale: f64,
    psi: Psi,
    baseline: (usize, usize, usize),
    configs: &[(usize, usize, usize)],
    seed: u64,
    opts: &McOptions,
) -> Result<RatioTable> {
    let make = |(n, t, s): (usize, usize, usize)| DgpConfig::new(n, t, s, delta_scale, psi, seed);
    let base = run_mc_quiet(&make(baseline)?, opts)?;
    let reports = configs
        .iter()
        .map(|&c| if c == baseline { Ok(base.clone()) } else { run_mc_quiet(&make(c)?, opts) })
        .collect::<Result<Vec<_>>>()?;
    let per_config = reports
        .iter()
        .map(|r| ratio_cells(r, &base))
        .collect::<Result<Vec<_>>>()?;
    let cells = (0..opts.fdr_grid.len())
        .map(|k| per_config.iter().map(|c| c[k]).collect())
        .collect();
    Ok(RatioTable {
        delta_scale,
        psi,
        baseline: base,
        reports,
        cells,
    })
}

/// The four tabulated regimes, ordered `delta` outer and `Psi` inner.
pub fn paper_tables(seed: u64, opts: &McOptions) -> Result<Vec<RatioTable>> {
    warn_single_replication(opts);
    let mut tables = Vec::with_capacity(4);
    for &delta in &TABLE_DELTAS {
        for &psi in &TABLE_PSIS {
            log::info!("running regime delta = {delta}, psi = {psi}");
            tables.push(ratio_table_quiet(delta, psi, BASELINE, &TABLE_CONFIGS, seed, opts)?);
        }
    }
    Ok(tables)
}

/// Writes tables sharing one `delta` in the published layout: one block per
/// `Psi`, rows are FDR levels, column pairs are configurations.
pub fn write_ratio_csv<W: Write>(tables: &[&RatioTable], out: W, with_se: bool) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    };
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = tables.first() else {
        return Ok(());
    };
    let mut header = vec!["delta".to_string(), "psi".to_string(), "fdr".to_string()];
    for r in &first.reports {
        let l = r.config.label();
        header.push(format!("{l}_MSER"));
        header.push(format!("{l}_MSFER"));
    }
    w.write_record(&header).map_err(io)?;
    for t in tables {
        for (k, row) in t.cells.iter().enumerate() {
            let mut rec = vec![format!("{}", t.delta_scale), t.psi.to_string(), format!("{}", t.fdr_grid()[k])];
            for c in row {
                let (a, b) = if with_se { (c.mser_se, c.msfer_se) } else { (c.mser, c.msfer) };
                rec.push(format!("{a}"));
                rec.push(format!("{b}"));
            }
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })
}

/// Outcome of one directional or tolerance check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// Directional findings of the N/T/s sweep, asserted with `z` Monte Carlo
/// standard errors:
///
/// 1. T up (with N up, s fixed): MSER and MSFER below one in every FDR row.
/// 2. s up at that (N, T): the MSFER reduction shrinks in most rows.
/// 3. N and s up at the baseline T: in-sample error falls, out-of-sample error
///    rises. At the loosest threshold both hold at `z` errors; by point
///    estimate MSER < 1 in at least half the rows and MSFER > 1 in most.
///
/// Checks whose configurations are absent from the table are omitted.
pub fn verify_error_scaling(table: &RatioTable, z: f64) -> Vec<Check> {
    let base = &table.baseline.config;
    let tag = format!("delta={} psi={}", table.delta_scale, table.psi);
    let rows = table.cells.len();
    let col = |j: usize| table.cells.iter().map(move |row| row[j]);
    let mut checks = Vec::new();

    let t_up = table
        .reports
        .iter()
        .position(|r| r.config.t > base.t && r.config.n >= base.n && r.config.s == base.s);
    if let Some(j) = t_up {
        let worst_in = col(j).map(|c| c.mser + z * c.mser_se).fold(f64::NEG_INFINITY, f64::max);
        let worst_out = col(j).map(|c| c.msfer + z * c.msfer_se).fold(f64::NEG_INFINITY, f64::max);
        checks.push(Check {
            name: format!("T increase lowers both errors ({tag})"),
            passed: worst_in < 1.0 && worst_out < 1.0,
            detail: format!("max MSER+{z}se = {worst_in:.4}, max MSFER+{z}se = {worst_out:.4}"),
        });
        let c = &table.reports[j].config;
        if let Some(k) = table
            .reports
            .iter()
            .position(|r| r.config.n == c.n && r.config.t == c.t && r.config.s > c.s)
        {
            let smaller = (0..rows)
                .filter(|&i| table.cells[i][k].msfer > table.cells[i][j].msfer)
                .count();
            checks.push(Check {
                name: format!("s increase shrinks the MSFE reduction ({tag})"),
                passed: 2 * smaller > rows,
                detail: format!("MSFER larger with more active predictors in {smaller}/{rows} rows"),
            });
        }
    }

    if let Some(j) = table
        .reports
        .iter()
        .position(|r| r.config.t == base.t && r.config.n > base.n && r.config.s > base.s)
    {
        let first = table.cells[0][j];
        let mser_below = col(j).filter(|c| c.mser < 1.0).count();
        let msfer_above = col(j).filter(|c| c.msfer > 1.0).count();
        let passed = first.mser + z * first.mser_se < 1.0
            && first.msfer - z * first.msfer_se > 1.0
            && 2 * mser_below >= rows
            && 2 * msfer_above > rows;
        checks.push(Check {
            name: format!("N,s increase at fixed T: MSE falls, MSFE rises ({tag})"),
            passed,
            detail: format!(
                "loosest row MSER {:.4}±{:.4}, MSFER {:.4}±{:.4}; MSER<1 in {mser_below}/{rows}, MSFER>1 in {msfer_above}/{rows}",
                first.mser, first.mser_se, first.msfer, first.msfer_se
            ),
        });
    }
    checks
}

/// Largest standardized deviation from the published values:
/// `|ours - published| / max(abs_tol, k * se)` over every cell. Values at or
/// below one are within tolerance.
pub fn published_deviation(table: &RatioTable, abs_tol: f64, k: f64) -> Option<(f64, String)> {
    let published = table.published()?;
    let mut worst = (0.0, String::new());
    for (i, row) in table.cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let (pm, pf) = published[i][j];
            for (name, ours, se, paper) in [("MSER", c.mser, c.mser_se, pm), ("MSFER", c.msfer, c.msfer_se, pf)] {
                let tol = abs_tol.max(k * se);
                let dev = (ours - paper).abs() / tol;
                if dev > worst.0 || worst.1.is_empty() {
                    worst = (
                        dev,
                        format!(
                            "{} FDR {}% {name}: {ours:.4} vs {paper:.4} (tol {tol:.4})",
                            table.reports[j].config.label(),
                            table.fdr_grid()[i] * 100.0
                        ),
                    );
                }
            }
        }
    }
    Some(worst)
}

/// Per-replication GCV diagnostics at one sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct GcvOosRow {
    pub t: usize,
    /// `rho^2(alpha_gcv) - rho^2(alpha_star)`.
    pub regrets: Vec<f64>,
    /// `|GCV(alpha_gcv) - rho^2(alpha_gcv)|`.
    pub gcv_gaps: Vec<f64>,
    /// `rho^2(alpha_star)`.
    pub oracle_mspe: Vec<f64>,
}

impl GcvOosRow {
    pub fn median_regret(&self) -> f64 {
        median(&self.regrets)
    }

    pub fn median_gap(&self) -> f64 {
        median(&self.gcv_gaps)
    }

    pub fn min_regret(&self) -> f64 {
        self.regrets.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// Arg-min with ties going to the later (larger-alpha) index.
fn argmin_last(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v <= values[best] {
            best = k;
        }
    }
    best
}

/// Compares the GCV choice of alpha with the conditional-MSPE oracle choice
/// on the same grid, after screening at `screen_cfg`, for each sample size.
pub fn verify_gcv_oos(
    cfg: &DgpConfig,
    sample_sizes: &[usize],
    grid: &AlphaGrid,
    screen_cfg: &ScreenConfig,
    ridge: RidgeOptions,
    replications: usize,
    exec: Exec,
) -> Result<Vec<GcvOosRow>> {
    if replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    sample_sizes
        .iter()
        .map(|&t| {
            let c = DgpConfig { t, ..*cfg };
            c.validate()?;
            let sigma = c.population_moment();
            let reps = exec.map(replications, |r| {
                gcv_replicate(&c, &sigma, grid, screen_cfg, ridge, r as u64).map_err(|e| Error::Replication {
                    replication: r,
                    source: Box::new(e),
                })
            });
            let reps = reps.into_iter().collect::<Result<Vec<_>>>()?;
            Ok(GcvOosRow {
                t,
                regrets: reps.iter().map(|r| r.0).collect(),
                gcv_gaps: reps.iter().map(|r| r.1).collect(),
                oracle_mspe: reps.iter().map(|r| r.2).collect(),
            })
        })
        .collect()
}

fn gcv_replicate(
    cfg: &DgpConfig,
    sigma: &DMatrix<f64>,
    grid: &AlphaGrid,
    screen_cfg: &ScreenConfig,
    ridge: RidgeOptions,
    rep: u64,
) -> Result<(f64, f64, f64)> {
    let data = simulate_dgp(cfg, cfg.t, rep)?;
    let rows = 0..cfg.t;
    let (y, off, cand) = (data.target(rows.clone()), data.officials(rows.clone()), data.candidates(rows));
    let screened = screen_with(&y, &off, &cand, screen_cfg, Exec::Sequential)?;
    let design = reduced_design(&off, &cand, &screened.selected);
    let positions: Vec<usize> = (0..off.ncols())
        .chain(screened.selected.iter().map(|j| off.ncols() + j))
        .collect();
    let prepared = PreparedRidge::new(&design, &y, ridge)?;
    let (path, best) = prepared.gcv_path(grid)?;
    let truth = DgpConfig::full_coefficients(&data.beta);
    let rho = grid
        .points()
        .iter()
        .map(|&a| {
            let b = embed(&prepared.coefficients(a), &positions, truth.len());
            conditional_mspe(&b, &truth, 1.0, sigma)
        })
        .collect::<Result<Vec<_>>>()?;
    let star = argmin_last(&rho);
    Ok((rho[best] - rho[star], (path[best].1 - rho[best]).abs(), rho[star]))
}

/// Frequency with which screening retains every active predictor, per sample size.
pub fn sure_screening_sweep(
    cfg: &DgpConfig,
    sample_sizes: &[usize],
    screen_cfg: &ScreenConfig,
    replications: usize,
    exec: Exec,
) -> Result<Vec<(usize, f64)>> {
    if replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    sample_sizes
        .iter()
        .map(|&t| {
            let c = DgpConfig { t, ..*cfg };
            c.validate()?;
            let hits = exec.map(replications, |r| -> Result<bool> {
                let data = simulate_dgp(&c, t, r as u64)?;
                let rows = 0..t;
                let res = screen_with(
                    &data.target(rows.clone()),
                    &data.officials(rows.clone()),
                    &data.candidates(rows),
                    screen_cfg,
                    Exec::Sequential,
                )?;
                Ok((0..c.s).all(|j| res.selected.binary_search(&j).is_ok()))
            });
            let hits = hits.into_iter().collect::<Result<Vec<_>>>()?;
            Ok((t, hits.iter().filter(|h| **h).count() as f64 / replications as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(n: usize, t: usize, s: usize, delta: f64, psi: Psi) -> DgpConfig {
        DgpConfig::new(n, t, s, delta, psi, 7).unwrap()
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn z_only_variance_decomposition() {
        // Var(y) = gamma' Sigma_z gamma + 1 = 7.2, R^2 = 6.2 / 7.2
        let c = cfg(3, 5000, 0, 0.0, Psi::Identity);
        let d = simulate_dgp(&c, 5000, 0).unwrap();
        let fitted: Vec<f64> = (0..5000).map(|t| d.z[(t, 0)] + 2.0 * d.z[(t, 1)]).collect();
        let y: Vec<f64> = d.y.iter().copied().collect();
        let r2 = corr(&y, &fitted).powi(2);
        assert!((r2 - 6.2 / 7.2).abs() < 0.03, "{r2}");
    }

    #[test]
    fn idiosyncratic_correlations() {
        let t = 4000;
        let bound = 3.0 / (t as f64).sqrt();
        let col = |d: &SimulatedData, j: usize| -> Vec<f64> { d.x.column(j).iter().copied().collect() };
        let ind = simulate_dgp(&cfg(4, t, 0, 0.0, Psi::Identity), t, 1).unwrap();
        assert!(corr(&col(&ind, 0), &col(&ind, 1)).abs() < bound);
        let dec = simulate_dgp(&cfg(4, t, 0, 0.0, Psi::Decreasing(0.5)), t, 1).unwrap();
        assert!((corr(&col(&dec, 1), &col(&dec, 2)) - 0.5).abs() < bound);
        assert!((corr(&col(&dec, 0), &col(&dec, 2)) - 0.25).abs() < bound);
    }

    #[test]
    fn population_moment_matches_sample() {
        let c = cfg(3, 20000, 1, 0.8, Psi::Decreasing(0.5));
        let d = simulate_dgp(&c, 20000, 2).unwrap();
        let full = DMatrix::from_fn(20000, 6, |i, j| match j {
            0 => 1.0,
            1 | 2 => d.z[(i, j - 1)],
            _ => d.x[(i, j - 3)],
        });
        let sample = full.transpose() * &full / 20000.0;
        let pop = c.population_moment();
        assert!((sample - pop).amax() < 0.1);
    }

    #[test]
    fn conditional_mspe_examples() {
        let sigma = DMatrix::identity(3, 3);
        let b = DVector::from_row_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(conditional_mspe(&b, &b, 1.0, &sigma).unwrap(), 1.0);
        let mut shifted = b.clone();
        shifted[0] += 1.0;
        assert_relative_eq!(conditional_mspe(&shifted, &b, 1.0, &sigma).unwrap(), 2.0);
        let short = DVector::from_row_slice(&[1.0]);
        assert!(matches!(
            conditional_mspe(&short, &b, 1.0, &sigma),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn seeds_are_replication_specific_and_stable() {
        let c = cfg(5, 20, 2, 0.2, Psi::Identity);
        assert_eq!(simulate_dgp(&c, 20, 3).unwrap(), simulate_dgp(&c, 20, 3).unwrap());
        assert_ne!(simulate_dgp(&c, 20, 3).unwrap().y, simulate_dgp(&c, 20, 4).unwrap().y);
        let other = DgpConfig { seed: 8, ..c };
        assert_ne!(simulate_dgp(&c, 20, 3).unwrap().y, simulate_dgp(&other, 20, 3).unwrap().y);
    }

    #[test]
    fn beta_floor_and_sparsity() {
        let c = DgpConfig {
            beta_floor: 2.0,
            ..cfg(10, 10, 5, 0.2, Psi::Identity)
        };
        let b = c.draw_beta(&mut c.replication_rng(0));
        assert!(b.iter().take(5).all(|v| v.abs() >= 2.0));
        assert!(b.iter().skip(5).all(|v| *v == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(DgpConfig::new(5, 10, 6, 0.2, Psi::Identity, 1).is_err());
        assert!("decreasing:1.5".parse::<Psi>().is_err());
        assert_eq!("decreasing".parse::<Psi>().unwrap(), Psi::Decreasing(0.5));
        assert_eq!("identity".parse::<Psi>().unwrap(), Psi::Identity);
        let opts = McOptions {
            replications: 0,
            ..McOptions::default()
        };
        assert!(run_mc(&cfg(5, 20, 2, 0.2, Psi::Identity), &opts).is_err());
    }

    #[test]
    fn small_run_is_deterministic_and_self_ratio_is_one() {
        let c = cfg(20, 30, 5, 0.2, Psi::Identity);
        let opts = McOptions {
            replications: 6,
            exec: Exec::Sequential,
            ..McOptions::default()
        };
        let a = run_mc(&c, &opts).unwrap();
        let b = run_mc(&c, &McOptions { exec: Exec::Parallel, ..opts.clone() }).unwrap();
        assert_eq!(a, b);
        let cells = ratio_cells(&a, &a).unwrap();
        assert!(cells.iter().all(|c| c.mser == 1.0 && c.msfer == 1.0 && c.mser_se == 0.0));
        // looser thresholds select at least as many predictors
        assert!(a.mean_selected.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn single_replication_has_undefined_errors() {
        let opts = McOptions {
            replications: 1,
            ..McOptions::default()
        };
        let r = run_mc(&cfg(10, 30, 3, 0.2, Psi::Identity), &opts).unwrap();
        assert!(r.in_sample_se.iter().all(|s| s.is_nan()));
        assert!(r.in_sample_mse.iter().all(|m| m.is_finite()));
    }

    #[test]
    fn singleton_grid_has_zero_regret() {
        let c = cfg(10, 40, 3, 0.2, Psi::Identity);
        let grid = AlphaGrid::from_points(vec![0.1]).unwrap();
        let rows = verify_gcv_oos(&c, &[40], &grid, &ScreenConfig::Tau(0.1), RidgeOptions::default(), 5, Exec::Sequential)
            .unwrap();
        assert!(rows[0].regrets.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let mut s = Compensated::default();
        for v in [1e16, 1.0, -1e16, 1.0] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
        assert_eq!(median(&[3.0, 1.0, 2.0, 4.0]), 2.5);
    }

    #[test]
    fn published_lookup() {
        let b = published_block(0.2, Psi::Identity).unwrap();
        assert_eq!(b[0][0], (0.9526, 0.8104));
        assert_eq!(published_block(0.8, Psi::Identity).unwrap()[0][2], (0.7856, 1.11799));
        assert!(published_block(0.5, Psi::Identity).is_none());
    }
}
