//! Weekly bridge equations over a ragged-edge panel.
//!
//! For each week `w` of the quarter a separate model `M(w)` regresses the
//! quarterly target on within-quarter aggregates of whatever was released by
//! week `w`; columns not yet released are masked out. Models are evaluated
//! with an expanding window that ends `training_gap` quarters before the
//! nowcast quarter.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{Frequency, Group, Panel, Quarter, Series, WEEKS_PER_QUARTER};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::ridge::{fit_gcv, ridge_after_selection, AlphaGrid, RidgeOptions};
use crate::screen::ScreenConfig;

/// Built-in release patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalendarPreset {
    /// Surveys in weeks 5, 9, 13; first-month industrial production in week 11.
    EuroArea,
    /// Surveys as in the euro area; industrial production four weeks earlier.
    UnitedStates,
    /// Surveys as in the euro area; first-month industrial production in week 10.
    Germany,
}

impl CalendarPreset {
    pub fn name(self) -> &'static str {
        match self {
            CalendarPreset::EuroArea => "ea",
            CalendarPreset::UnitedStates => "us",
            CalendarPreset::Germany => "de",
        }
    }

    fn soft_weeks(self) -> &'static [u8] {
        &[5, 9, 13]
    }

    fn hard_weeks(self) -> &'static [u8] {
        match self {
            CalendarPreset::EuroArea => &[11],
            CalendarPreset::UnitedStates => &[7, 11],
            CalendarPreset::Germany => &[10],
        }
    }
}

impl FromStr for CalendarPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ea" | "euro-area" => Ok(CalendarPreset::EuroArea),
            "us" => Ok(CalendarPreset::UnitedStates),
            "de" | "germany" => Ok(CalendarPreset::Germany),
            other => Err(Error::Config(format!("unknown calendar preset '{other}'"))),
        }
    }
}

/// Week of the quarter at which each within-quarter observation becomes
/// available, per series.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ReleaseCalendar {
    entries: BTreeMap<String, Vec<(usize, u8)>>,
}

impl ReleaseCalendar {
    /// Validates and builds a calendar from `(series, sub-period, week)` entries.
    pub fn from_entries(entries: BTreeMap<String, Vec<(usize, u8)>>) -> Result<Self> {
        for (id, list) in &entries {
            if list.iter().any(|&(sub, w)| sub == 0 || !(1..=WEEKS_PER_QUARTER).contains(&w)) {
                return Err(Error::Validation(format!(
                    "calendar for {id}: sub-periods start at 1 and weeks lie in 1..13"
                )));
            }
            if list.windows(2).any(|p| p[1].0 <= p[0].0 || p[1].1 < p[0].1) {
                return Err(Error::Validation(format!(
                    "calendar for {id}: availability weeks must be nondecreasing"
                )));
            }
        }
        Ok(ReleaseCalendar { entries })
    }

    pub fn preset(preset: CalendarPreset, panel: &Panel) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for s in &panel.predictors {
            let list: Vec<(usize, u8)> = match (s.frequency, s.group) {
                (Frequency::Weekly, _) => weekly_entries(1),
                (Frequency::Monthly, Group::Hard) => enumerate_weeks(preset.hard_weeks()),
                (Frequency::Monthly, _) => enumerate_weeks(preset.soft_weeks()),
                (Frequency::Quarterly, _) => match s.release_week {
                    Some(w) => vec![(1, w)],
                    None => vec![],
                },
            };
            entries.insert(s.id.clone(), list);
        }
        Self::from_entries(entries).map(|c| c.checked(panel))?
    }

    /// Derives availability from each series' `release_week`: monthly
    /// observations follow every four weeks, weekly ones are shifted by the
    /// release lag.
    pub fn from_metadata(panel: &Panel) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for s in &panel.predictors {
            let first = s.release_week.ok_or_else(|| {
                Error::Config(format!("series {} has no release_week in its metadata", s.id))
            })?;
            let list = match s.frequency {
                Frequency::Weekly => weekly_entries(first),
                Frequency::Monthly => (0..3u8)
                    .map(|m| (m as usize + 1, first + 4 * m))
                    .filter(|&(_, w)| w <= WEEKS_PER_QUARTER)
                    .collect(),
                Frequency::Quarterly => vec![(1, first)],
            };
            entries.insert(s.id.clone(), list);
        }
        Self::from_entries(entries).map(|c| c.checked(panel))?
    }

    /// Reads `series_id, obs_index, week` rows.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut entries: BTreeMap<String, Vec<(usize, u8)>> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            let get = |k: usize| rec.get(k).unwrap_or("").to_string();
            let sub: usize = get(1).parse().map_err(|_| Error::Parse {
                row,
                message: format!("bad obs_index '{}'", get(1)),
            })?;
            let week: u8 = get(2).parse().map_err(|_| Error::Parse {
                row,
                message: format!("bad week '{}'", get(2)),
            })?;
            entries.entry(get(0)).or_default().push((sub, week));
        }
        for list in entries.values_mut() {
            list.sort_unstable();
        }
        Self::from_entries(entries)
    }

    /// Ensures every predictor has an entry and no entry exceeds its frequency.
    pub fn checked(self, panel: &Panel) -> Result<Self> {
        for s in &panel.predictors {
            let list = self.entries.get(&s.id).ok_or_else(|| {
                Error::Config(format!("calendar has no entry for series {}", s.id))
            })?;
            if list.iter().any(|&(sub, _)| sub > s.frequency.per_quarter()) {
                return Err(Error::Validation(format!(
                    "calendar for {}: more entries than {} sub-periods",
                    s.id,
                    s.frequency.per_quarter()
                )));
            }
        }
        Ok(self)
    }

    /// Sub-periods of `series` released by the end of week `w`.
    pub fn released(&self, series: &str, w: u8) -> Vec<usize> {
        self.entries
            .get(series)
            .map(|l| l.iter().filter(|(_, wk)| *wk <= w).map(|(s, _)| *s).collect())
            .unwrap_or_default()
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<(usize, u8)>> {
        &self.entries
    }
}

fn weekly_entries(first: u8) -> Vec<(usize, u8)> {
    (1..=WEEKS_PER_QUARTER)
        .map(|v| (v as usize, v + first - 1))
        .filter(|&(_, w)| w <= WEEKS_PER_QUARTER)
        .collect()
}

fn enumerate_weeks(weeks: &[u8]) -> Vec<(usize, u8)> {
    weeks.iter().enumerate().map(|(i, &w)| (i + 1, w)).collect()
}

/// How released weekly observations are collapsed to one regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Mean of everything released so far in the quarter.
    #[default]
    Mean,
    /// Most recent released observation only.
    Last,
}

impl FromStr for Aggregation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mean" => Ok(Aggregation::Mean),
            "last" => Ok(Aggregation::Last),
            other => Err(Error::Config(format!("unknown aggregation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Intercept,
    Series { id: String, group: Group },
    TargetLag { lag: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub kind: ColumnKind,
    pub aggregation: Aggregation,
}

impl ColumnSpec {
    pub fn name(&self) -> String {
        match &self.kind {
            ColumnKind::Intercept => "(intercept)".into(),
            ColumnKind::Series { id, .. } => id.clone(),
            ColumnKind::TargetLag { lag } => format!("target_lag{lag}"),
        }
    }

    pub fn is_official(&self) -> bool {
        match &self.kind {
            ColumnKind::Series { group, .. } => group.is_official(),
            ColumnKind::TargetLag { .. } => true,
            ColumnKind::Intercept => false,
        }
    }

    pub fn is_alt(&self) -> bool {
        matches!(&self.kind, ColumnKind::Series { group: Group::Alt, .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DesignOptions {
    pub weekly_aggregation: Aggregation,
    /// Adds the target lagged by this many quarters as an official regressor.
    pub target_lag: Option<usize>,
}

/// Design matrix of model `M(w)` over a list of quarters.
#[derive(Debug, Clone, PartialEq)]
pub struct WeekDesign {
    pub week: u8,
    pub columns: Vec<ColumnSpec>,
    pub quarters: Vec<Quarter>,
    /// Rows follow `quarters`; masked columns are zero.
    pub x: DMatrix<f64>,
    pub active_mask: Vec<bool>,
}

impl WeekDesign {
    pub fn active_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&j| self.active_mask[j]).collect()
    }

    fn indices_where(&self, pred: impl Fn(&ColumnSpec) -> bool) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&j| self.active_mask[j] && pred(&self.columns[j]))
            .collect()
    }
}

fn aggregate(
    s: &Series,
    q: Quarter,
    subs: &[usize],
    agg: Aggregation,
    week: u8,
) -> Result<f64> {
    let pick: &[usize] = match (s.frequency, agg) {
        (Frequency::Weekly, Aggregation::Last) => &subs[subs.len() - 1..],
        _ => subs,
    };
    let mut sum = 0.0;
    for &sub in pick {
        sum += s.get(q, sub).ok_or_else(|| Error::DataGap {
            series: s.id.clone(),
            quarter: q.to_string(),
            index: sub,
            week,
        })?;
    }
    Ok(sum / pick.len() as f64)
}

/// Builds the regressors of `M(w)` for the given quarters.
pub fn build_week_design(
    panel: &Panel,
    calendar: &ReleaseCalendar,
    w: u8,
    quarters: &[Quarter],
    options: DesignOptions,
) -> Result<WeekDesign> {
    if !(1..=WEEKS_PER_QUARTER).contains(&w) {
        return Err(Error::Domain(format!("week must lie in 1..13, got {w}")));
    }
    if let Some(q) = quarters
        .iter()
        .find(|q| **q < panel.quarter_range.0 || **q > panel.quarter_range.1)
    {
        return Err(Error::Domain(format!(
            "quarter {q} outside panel range {}..{}",
            panel.quarter_range.0, panel.quarter_range.1
        )));
    }
    let mut columns = vec![ColumnSpec {
        kind: ColumnKind::Intercept,
        aggregation: Aggregation::Mean,
    }];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; quarters.len()]];
    let mut active_mask = vec![true];

    for s in &panel.predictors {
        let subs = calendar.released(&s.id, w);
        let aggregation = if s.frequency == Frequency::Weekly {
            options.weekly_aggregation
        } else {
            Aggregation::Mean
        };
        let values = if subs.is_empty() {
            vec![0.0; quarters.len()]
        } else {
            quarters
                .iter()
                .map(|&q| aggregate(s, q, &subs, aggregation, w))
                .collect::<Result<Vec<_>>>()?
        };
        columns.push(ColumnSpec {
            kind: ColumnKind::Series {
                id: s.id.clone(),
                group: s.group,
            },
            aggregation,
        });
        active_mask.push(!subs.is_empty());
        cols.push(values);
    }

    if let Some(lag) = options.target_lag {
        let values = quarters
            .iter()
            .map(|&q| {
                let lagged = q.offset(-(lag as i64));
                panel.target_value(lagged).ok_or_else(|| Error::DataGap {
                    series: panel.target.id.clone(),
                    quarter: lagged.to_string(),
                    index: 1,
                    week: w,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(ColumnSpec {
            kind: ColumnKind::TargetLag { lag },
            aggregation: Aggregation::Mean,
        });
        active_mask.push(true);
        cols.push(values);
    }

    let x = DMatrix::from_fn(quarters.len(), cols.len(), |i, j| cols[j][i]);
    Ok(WeekDesign {
        week: w,
        columns,
        quarters: quarters.to_vec(),
        x,
        active_mask,
    })
}

/// Model variants compared in the evaluation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Officials and every alternative series, no screening.
    FullNoScreen,
    /// Officials plus screened alternative series.
    RidgeAfterSelection,
    /// Screened alternative series only.
    AltOnlyScreened,
    /// Every alternative series, no officials.
    AltOnlyNoScreen,
    /// Official series only.
    OfficialsOnly,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::FullNoScreen,
        Variant::RidgeAfterSelection,
        Variant::AltOnlyScreened,
        Variant::AltOnlyNoScreen,
        Variant::OfficialsOnly,
    ];

    /// The four rows of the standard comparison table.
    pub const STANDARD: [Variant; 4] = [
        Variant::FullNoScreen,
        Variant::RidgeAfterSelection,
        Variant::AltOnlyScreened,
        Variant::OfficialsOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FullNoScreen => "full_no_screen",
            Variant::RidgeAfterSelection => "ridge_after_selection",
            Variant::AltOnlyScreened => "alt_only_screened",
            Variant::AltOnlyNoScreen => "alt_only_no_screen",
            Variant::OfficialsOnly => "officials_only",
        }
    }

    fn uses_officials(self) -> bool {
        matches!(
            self,
            Variant::FullNoScreen | Variant::RidgeAfterSelection | Variant::OfficialsOnly
        )
    }

    fn uses_alt(self) -> bool {
        !matches!(self, Variant::OfficialsOnly)
    }

    fn screens(self) -> bool {
        matches!(self, Variant::RidgeAfterSelection | Variant::AltOnlyScreened)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == key)
            .or(match key.as_str() {
                "a" => Some(Variant::FullNoScreen),
                "b" => Some(Variant::RidgeAfterSelection),
                "c" => Some(Variant::AltOnlyScreened),
                "d" => Some(Variant::OfficialsOnly),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NowcastConfig {
    pub screen: ScreenConfig,
    pub grid: AlphaGrid,
    pub ridge: RidgeOptions,
    pub design: DesignOptions,
    pub oos_start: Quarter,
    /// Last nowcast quarter; defaults to the last quarter with a target value.
    pub oos_end: Option<Quarter>,
    /// Quarters between the end of the training window and the nowcast quarter.
    pub training_gap: usize,
    pub min_training: usize,
    pub weeks: Vec<u8>,
    pub exec: Exec,
}

impl NowcastConfig {
    pub fn new(oos_start: Quarter) -> Self {
        NowcastConfig {
            screen: ScreenConfig::Tau(0.1),
            grid: AlphaGrid::default(),
            ridge: RidgeOptions::default(),
            design: DesignOptions::default(),
            oos_start,
            oos_end: None,
            training_gap: 2,
            min_training: 12,
            weeks: (1..=WEEKS_PER_QUARTER).collect(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NowcastRun {
    pub variant: Variant,
    pub weeks: Vec<u8>,
    pub oos_quarters: Vec<Quarter>,
    pub actuals: Vec<f64>,
    /// `oos_quarters x weeks`.
    pub nowcasts: DMatrix<f64>,
    pub per_week_rmsfe: Vec<f64>,
}

impl NowcastRun {
    /// Writes `variant, quarter, week, nowcast, actual, error` rows.
    pub fn write_paths<W: Write>(&self, out: &mut csv::Writer<W>) -> Result<()> {
        for (i, q) in self.oos_quarters.iter().enumerate() {
            for (k, w) in self.weeks.iter().enumerate() {
                let n = self.nowcasts[(i, k)];
                out.write_record([
                    self.variant.name().to_string(),
                    q.to_string(),
                    w.to_string(),
                    format!("{n}"),
                    format!("{}", self.actuals[i]),
                    format!("{}", n - self.actuals[i]),
                ])
                .map_err(io_err)?;
            }
        }
        Ok(())
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

fn check_variant(panel: &Panel, variant: Variant) -> Result<()> {
    if variant.uses_alt() && !panel.has_group(Group::Alt) {
        return Err(Error::Config(format!(
            "variant {variant} needs alternative series but the panel has none"
        )));
    }
    if variant == Variant::OfficialsOnly
        && !panel.has_group(Group::Soft)
        && !panel.has_group(Group::Hard)
    {
        return Err(Error::Config(
            "variant officials_only needs official series but the panel has none".into(),
        ));
    }
    Ok(())
}

/// One nowcast of `M(w)` estimated on `train` rows, evaluated at `target_row`.
fn nowcast_one(
    design: &WeekDesign,
    y: &DVector<f64>,
    train: &[usize],
    target_row: usize,
    variant: Variant,
    cfg: &NowcastConfig,
) -> Result<f64> {
    let officials: Vec<usize> = std::iter::once(0)
        .chain(if variant.uses_officials() {
            design.indices_where(ColumnSpec::is_official)
        } else {
            vec![]
        })
        .collect();
    let alt = if variant.uses_alt() {
        design.indices_where(ColumnSpec::is_alt)
    } else {
        vec![]
    };
    let rows = |cols: &[usize]| DMatrix::from_fn(train.len(), cols.len(), |i, j| design.x[(train[i], cols[j])]);
    let y_train = DVector::from_fn(train.len(), |i, _| y[train[i]]);
    let x_off = rows(&officials);

    let (columns, coef): (Vec<usize>, DVector<f64>) = if variant.screens() {
        let x_alt = rows(&alt);
        let sel = ridge_after_selection(&y_train, &x_off, &x_alt, &cfg.screen, &cfg.grid, cfg.ridge)?;
        let cols = officials.iter().chain(alt.iter()).copied().collect();
        (cols, sel.fit.coefficients)
    } else {
        let cols: Vec<usize> = officials.iter().chain(alt.iter()).copied().collect();
        let fit = fit_gcv(&rows(&cols), &y_train, &cfg.grid, cfg.ridge)?;
        (cols, fit.coefficients)
    };
    Ok(columns
        .iter()
        .zip(coef.iter())
        .map(|(&j, b)| design.x[(target_row, j)] * b)
        .sum())
}

/// Recursive (expanding-window) pseudo-real-time evaluation of one variant.
pub fn nowcast_recursive(
    panel: &Panel,
    calendar: &ReleaseCalendar,
    variant: Variant,
    cfg: &NowcastConfig,
) -> Result<NowcastRun> {
    check_variant(panel, variant)?;
    if cfg.weeks.is_empty() || cfg.weeks.iter().any(|w| !(1..=WEEKS_PER_QUARTER).contains(w)) {
        return Err(Error::Config("weeks must be a nonempty subset of 1..13".into()));
    }
    let (first, last) = panel.quarter_range;
    let with_target: Vec<Quarter> = panel
        .quarters()
        .filter(|q| panel.target_value(*q).is_some())
        .collect();
    let oos_end = cfg
        .oos_end
        .or_else(|| with_target.last().copied())
        .ok_or_else(|| Error::Config("target has no values in the panel range".into()))?;
    if cfg.oos_start < first || oos_end > last || cfg.oos_start > oos_end {
        return Err(Error::Config(format!(
            "out-of-sample window {}..{oos_end} not inside panel range {first}..{last}",
            cfg.oos_start
        )));
    }
    let gap = cfg.training_gap as i64;
    let oos: Vec<Quarter> = with_target
        .iter()
        .copied()
        .filter(|q| *q >= cfg.oos_start && *q <= oos_end)
        .collect();
    if oos.is_empty() {
        return Err(Error::Config("no out-of-sample quarter has a target value".into()));
    }
    let initial = with_target
        .iter()
        .filter(|q| **q <= cfg.oos_start.offset(-gap))
        .count();
    if initial < cfg.min_training {
        return Err(Error::Config(format!(
            "{initial} training quarters before {}; at least {} required",
            cfg.oos_start, cfg.min_training
        )));
    }

    // rows: every quarter with a target up to the last oos quarter
    let quarters: Vec<Quarter> = with_target.iter().copied().filter(|q| *q <= oos_end).collect();
    let y = DVector::from_iterator(
        quarters.len(),
        quarters.iter().map(|q| panel.target_value(*q).unwrap_or(f64::NAN)),
    );
    let designs = cfg
        .weeks
        .iter()
        .map(|&w| build_week_design(panel, calendar, w, &quarters, cfg.design))
        .collect::<Result<Vec<_>>>()?;

    let row_of = |q: Quarter| quarters.binary_search(&q).expect("oos quarter has a row");
    let nw = cfg.weeks.len();
    let outcomes = cfg.exec.map(oos.len() * nw, |task| {
        let (i, k) = (task / nw, task % nw);
        let q = oos[i];
        let train: Vec<usize> = (0..quarters.len())
            .filter(|&r| quarters[r] <= q.offset(-gap))
            .collect();
        nowcast_one(&designs[k], &y, &train, row_of(q), variant, cfg)
    });
    let mut nowcasts = DMatrix::zeros(oos.len(), nw);
    for (task, r) in outcomes.into_iter().enumerate() {
        nowcasts[(task / nw, task % nw)] = r?;
    }
    let actuals: Vec<f64> = oos.iter().map(|q| panel.target_value(*q).unwrap_or(f64::NAN)).collect();
    let per_week_rmsfe = (0..nw)
        .map(|k| {
            let mse = (0..oos.len())
                .map(|i| (nowcasts[(i, k)] - actuals[i]).powi(2))
                .sum::<f64>()
                / oos.len() as f64;
            mse.sqrt()
        })
        .collect();
    Ok(NowcastRun {
        variant,
        weeks: cfg.weeks.clone(),
        oos_quarters: oos,
        actuals,
        nowcasts,
        per_week_rmsfe,
    })
}

/// RMSFE table with one row per variant and one column per week model.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsfeTable {
    pub weeks: Vec<u8>,
    pub runs: Vec<NowcastRun>,
}

impl RmsfeTable {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.runs[row].per_week_rmsfe[col]
    }

    /// Row index of the lowest RMSFE in each column (first row on ties).
    pub fn column_minima(&self) -> Vec<usize> {
        (0..self.weeks.len())
            .map(|c| {
                (0..self.runs.len())
                    .min_by(|&a, &b| self.value(a, c).total_cmp(&self.value(b, c)))
                    .unwrap_or(0)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let minima = self.column_minima();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["variant".to_string()];
        header.extend(self.weeks.iter().map(|k| format!("M{k}")));
        header.extend(self.weeks.iter().map(|k| format!("M{k}_min")));
        w.write_record(&header).map_err(io_err)?;
        for (r, run) in self.runs.iter().enumerate() {
            let mut rec = vec![run.variant.name().to_string()];
            rec.extend(run.per_week_rmsfe.iter().map(|v| format!("{v}")));
            rec.extend(minima.iter().map(|&m| u8::from(m == r).to_string()));
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<csv>".into(), source: e })
    }

    /// Aligned text; the lowest value in each column carries a `*`.
    pub fn to_text(&self) -> String {
        let minima = self.column_minima();
        let label_w = self
            .runs
            .iter()
            .map(|r| r.variant.name().len())
            .max()
            .unwrap_or(7)
            .max(7);
        let mut s = format!("{:<label_w$}", "variant");
        for k in &self.weeks {
            s.push_str(&format!(" {:>9}", format!("M{k}")));
        }
        s.push('\n');
        for (r, run) in self.runs.iter().enumerate() {
            s.push_str(&format!("{:<label_w$}", run.variant.name()));
            for (c, v) in run.per_week_rmsfe.iter().enumerate() {
                let mark = if minima[c] == r { "*" } else { " " };
                s.push_str(&format!(" {v:>8.4}{mark}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn compare_variants(
    panel: &Panel,
    calendar: &ReleaseCalendar,
    variants: &[Variant],
    cfg: &NowcastConfig,
) -> Result<RmsfeTable> {
    if variants.is_empty() {
        return Err(Error::Config("no variants requested".into()));
    }
    let runs = variants
        .iter()
        .map(|&v| nowcast_recursive(panel, calendar, v, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(RmsfeTable {
        weeks: cfg.weeks.clone(),
        runs,
    })
}
