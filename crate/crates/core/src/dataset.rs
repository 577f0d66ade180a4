//! Mixed-frequency panels: a quarterly target plus monthly and weekly
//! predictors, stored on a 13-weeks-per-quarter grid.
//!
//! Interchange is a long CSV (`date, series_id, value`) plus a metadata CSV
//! (`series_id, group, frequency, release_week`).

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// Weeks in every quarter.
pub const WEEKS_PER_QUARTER: u8 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Target,
    Soft,
    Hard,
    Alt,
}

impl Group {
    pub fn is_official(self) -> bool {
        matches!(self, Group::Soft | Group::Hard)
    }
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "target" => Ok(Group::Target),
            "soft" => Ok(Group::Soft),
            "hard" => Ok(Group::Hard),
            "alt" | "alternative" => Ok(Group::Alt),
            other => Err(Error::Schema(format!("unknown group '{other}'"))),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Target => "target",
            Group::Soft => "soft",
            Group::Hard => "hard",
            Group::Alt => "alt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frequency {
    Quarterly,
    Monthly,
    Weekly,
}

impl Frequency {
    /// Sub-periods per quarter.
    pub fn per_quarter(self) -> usize {
        match self {
            Frequency::Quarterly => 1,
            Frequency::Monthly => 3,
            Frequency::Weekly => WEEKS_PER_QUARTER as usize,
        }
    }
}

impl FromStr for Frequency {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quarterly" | "q" => Ok(Frequency::Quarterly),
            "monthly" | "m" => Ok(Frequency::Monthly),
            "weekly" | "w" => Ok(Frequency::Weekly),
            other => Err(Error::Schema(format!("unknown frequency '{other}'"))),
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Frequency::Quarterly => "quarterly",
            Frequency::Monthly => "monthly",
            Frequency::Weekly => "weekly",
        })
    }
}

/// Calendar quarter, ordered by `year * 4 + (q - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter(pub i64);

impl Quarter {
    pub fn new(year: i32, q: u8) -> Result<Self> {
        if !(1..=4).contains(&q) {
            return Err(Error::Domain(format!("quarter must be 1..4, got {q}")));
        }
        Ok(Quarter(year as i64 * 4 + (q as i64 - 1)))
    }

    pub fn year(self) -> i32 {
        self.0.div_euclid(4) as i32
    }

    pub fn q(self) -> u8 {
        (self.0.rem_euclid(4) + 1) as u8
    }

    pub fn from_date(d: NaiveDate) -> Self {
        Quarter(d.year() as i64 * 4 + (d.month0() / 3) as i64)
    }

    pub fn start_date(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year(), (self.q() as u32 - 1) * 3 + 1, 1)
            .expect("first day of a quarter exists")
    }

    pub fn offset(self, k: i64) -> Quarter {
        Quarter(self.0 + k)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year(), self.q())
    }
}

impl FromStr for Quarter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let (y, q) = upper
            .split_once('Q')
            .ok_or_else(|| Error::Config(format!("quarter '{s}' is not of the form 2014Q1")))?;
        let year: i32 = y
            .trim_end_matches('-')
            .parse()
            .map_err(|_| Error::Config(format!("bad year in quarter '{s}'")))?;
        let q: u8 = q
            .parse()
            .map_err(|_| Error::Config(format!("bad quarter number in '{s}'")))?;
        Quarter::new(year, q).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Week of the quarter (1..=13) for a calendar date: thirteen 7-day blocks
/// from the first day of the quarter, with any trailing days folded into week 13.
pub fn week_of_quarter(d: NaiveDate) -> u8 {
    let start = Quarter::from_date(d).start_date();
    let day = (d - start).num_days();
    ((day / 7).min(12) + 1) as u8
}

/// Global period index of a date at the given frequency.
pub fn period_of(d: NaiveDate, freq: Frequency) -> i64 {
    let q = Quarter::from_date(d);
    let sub = match freq {
        Frequency::Quarterly => 0,
        Frequency::Monthly => (d.month0() % 3) as i64,
        Frequency::Weekly => week_of_quarter(d) as i64 - 1,
    };
    q.0 * freq.per_quarter() as i64 + sub
}

/// Representative date of a period (first day of the month, quarter or week block).
pub fn period_date(period: i64, freq: Frequency) -> NaiveDate {
    let k = freq.per_quarter() as i64;
    let q = Quarter(period.div_euclid(k));
    let sub = period.rem_euclid(k);
    let start = q.start_date();
    match freq {
        Frequency::Quarterly => start,
        Frequency::Monthly => NaiveDate::from_ymd_opt(start.year(), start.month() + sub as u32, 1)
            .expect("month within quarter exists"),
        Frequency::Weekly => start + chrono::Duration::days(7 * sub),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub id: String,
    pub group: Group,
    pub frequency: Frequency,
    /// Week of the quarter in which the first within-quarter observation is
    /// released, when known from metadata.
    pub release_week: Option<u8>,
    /// `(period, value)` with strictly increasing periods.
    values: Vec<(i64, f64)>,
}

impl Series {
    pub fn new(
        id: impl Into<String>,
        group: Group,
        frequency: Frequency,
        release_week: Option<u8>,
        values: Vec<(i64, f64)>,
    ) -> Result<Self> {
        let id = id.into();
        if let Some(w) = release_week {
            if !(1..=WEEKS_PER_QUARTER).contains(&w) {
                return Err(Error::Validation(format!(
                    "series {id}: release week {w} outside 1..13"
                )));
            }
        }
        if let Some(pos) = values.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(Error::Validation(format!(
                "series {id}: periods not strictly increasing at position {}",
                pos + 1
            )));
        }
        if let Some((p, _)) = values.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "series {id}: non-finite value at {}",
                period_date(*p, frequency)
            )));
        }
        Ok(Series {
            id,
            group,
            frequency,
            release_week,
            values,
        })
    }

    pub fn values(&self) -> &[(i64, f64)] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn quarter_of(&self, period: i64) -> Quarter {
        Quarter(period.div_euclid(self.frequency.per_quarter() as i64))
    }

    /// Observation `sub` (1-based) of quarter `q`.
    pub fn get(&self, q: Quarter, sub: usize) -> Option<f64> {
        let period = q.0 * self.frequency.per_quarter() as i64 + sub as i64 - 1;
        self.values
            .binary_search_by_key(&period, |(p, _)| *p)
            .ok()
            .map(|i| self.values[i].1)
    }

    /// Sub-period indices (1-based) present in quarter `q`.
    fn subs_in(&self, q: Quarter) -> Vec<usize> {
        let k = self.frequency.per_quarter() as i64;
        let lo = self.values.partition_point(|(p, _)| *p < q.0 * k);
        let hi = self.values.partition_point(|(p, _)| *p < (q.0 + 1) * k);
        self.values[lo..hi]
            .iter()
            .map(|(p, _)| (p - q.0 * k + 1) as usize)
            .collect()
    }

    fn first_full_quarter(&self) -> Option<Quarter> {
        let &(p, _) = self.values.first()?;
        let q = self.quarter_of(p);
        let k = self.frequency.per_quarter() as i64;
        Some(if p == q.0 * k { q } else { q.offset(1) })
    }

    fn last_quarter(&self) -> Option<Quarter> {
        self.values.last().map(|(p, _)| self.quarter_of(*p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub target: Series,
    pub predictors: Vec<Series>,
    /// Inclusive range of quarters covered by every predictor.
    pub quarter_range: (Quarter, Quarter),
}

impl Panel {
    /// Validates coverage: every predictor is complete in each quarter of the
    /// range except the last, where a leading prefix (ragged edge) is allowed.
    pub fn new(target: Series, predictors: Vec<Series>) -> Result<Self> {
        if target.frequency != Frequency::Quarterly {
            return Err(Error::Schema(format!(
                "target {} must be quarterly, is {}",
                target.id, target.frequency
            )));
        }
        let mut ids: Vec<&str> = predictors.iter().map(|s| s.id.as_str()).collect();
        ids.push(&target.id);
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Validation(format!("duplicate series id {}", w[0])));
        }
        let quarter_range = if predictors.is_empty() {
            match (target.values.first(), target.values.last()) {
                (Some(a), Some(b)) => (Quarter(a.0), Quarter(b.0)),
                _ => return Err(Error::Validation("empty panel".into())),
            }
        } else {
            let mut first = Quarter(i64::MIN);
            let mut last = Quarter(i64::MIN);
            for s in &predictors {
                let (Some(f), Some(l)) = (s.first_full_quarter(), s.last_quarter()) else {
                    return Err(Error::Validation(format!("series {} is empty", s.id)));
                };
                first = first.max(f);
                last = last.max(l);
            }
            if first > last {
                return Err(Error::Validation("predictors share no complete quarter".into()));
            }
            (first, last)
        };
        for s in &predictors {
            let k = s.frequency.per_quarter();
            let mut q = quarter_range.0;
            while q <= quarter_range.1 {
                let subs = s.subs_in(q);
                let is_prefix = subs.iter().enumerate().all(|(i, &sub)| sub == i + 1);
                if !is_prefix || (q < quarter_range.1 && subs.len() != k) {
                    return Err(Error::Validation(format!(
                        "series {} has {} of {} observations in {q}",
                        s.id,
                        subs.len(),
                        k
                    )));
                }
                q = q.offset(1);
            }
        }
        Ok(Panel {
            target,
            predictors,
            quarter_range,
        })
    }

    pub fn quarters(&self) -> impl Iterator<Item = Quarter> {
        (self.quarter_range.0 .0..=self.quarter_range.1 .0).map(Quarter)
    }

    pub fn target_value(&self, q: Quarter) -> Option<f64> {
        self.target.get(q, 1)
    }

    pub fn predictor(&self, id: &str) -> Option<&Series> {
        self.predictors.iter().find(|s| s.id == id)
    }

    pub fn has_group(&self, group: Group) -> bool {
        self.predictors.iter().any(|s| s.group == group)
    }

    /// Applies `t` to every predictor of `group` and revalidates.
    pub fn transform_group(&self, group: Group, t: Transform) -> Result<Panel> {
        let predictors = self
            .predictors
            .iter()
            .map(|s| {
                if s.group == group {
                    apply_transform(s, t)
                } else {
                    Ok(s.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Panel::new(self.target.clone(), predictors)
    }
}

/// Deseasonalising transforms for a single series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    None,
    /// 52-period growth rate followed by a 13-period difference.
    Yoy52Diff13,
    /// One-period growth rate.
    GrowthRate,
    /// `growth_lag`-period growth rate followed by a `diff_lag`-period difference.
    LagGrowthDiff { growth_lag: usize, diff_lag: usize },
}

impl Transform {
    fn lags(self) -> Option<(usize, usize)> {
        match self {
            Transform::None => None,
            Transform::Yoy52Diff13 => Some((52, 13)),
            Transform::GrowthRate => Some((1, 0)),
            Transform::LagGrowthDiff {
                growth_lag,
                diff_lag,
            } => Some((growth_lag, diff_lag)),
        }
    }

    /// Leading observations consumed.
    pub fn warmup(self) -> usize {
        self.lags().map_or(0, |(g, d)| g + d)
    }
}

impl FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "none" => return Ok(Transform::None),
            "yoy52_diff13" => return Ok(Transform::Yoy52Diff13),
            "growth_rate" => return Ok(Transform::GrowthRate),
            _ => {}
        }
        // growth:K1,diff:K2 shorthand "lag:52:13"
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() == 3 && parts[0] == "lag" {
            let parse = |x: &str| {
                x.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad lag '{x}' in transform '{s}'")))
            };
            let growth_lag = parse(parts[1])?;
            if growth_lag == 0 {
                return Err(Error::Config("growth lag must be positive".into()));
            }
            return Ok(Transform::LagGrowthDiff {
                growth_lag,
                diff_lag: parse(parts[2])?,
            });
        }
        Err(Error::Config(format!("unknown transform '{s}'")))
    }
}

/// Applies a transform position-wise; the series must have consecutive periods.
pub fn apply_transform(s: &Series, t: Transform) -> Result<Series> {
    let Some((growth_lag, diff_lag)) = t.lags() else {
        return Ok(s.clone());
    };
    let need = growth_lag + diff_lag + 1;
    if s.values.len() < need {
        return Err(Error::InsufficientHistory {
            series: s.id.clone(),
            required: need,
            actual: s.values.len(),
        });
    }
    if let Some(w) = s.values.windows(2).find(|w| w[1].0 != w[0].0 + 1) {
        return Err(Error::Validation(format!(
            "series {}: gap after {} prevents lagged transform",
            s.id,
            period_date(w[0].0, s.frequency)
        )));
    }
    let v: Vec<f64> = s.values.iter().map(|(_, x)| *x).collect();
    let mut growth = Vec::with_capacity(v.len() - growth_lag);
    for i in growth_lag..v.len() {
        let base = v[i - growth_lag];
        if base == 0.0 {
            return Err(Error::Domain(format!(
                "series {}: zero base value in growth rate at {}",
                s.id,
                period_date(s.values[i - growth_lag].0, s.frequency)
            )));
        }
        growth.push(v[i] / base - 1.0);
    }
    let out: Vec<(i64, f64)> = (diff_lag..growth.len())
        .map(|i| {
            let value = if diff_lag == 0 {
                growth[i]
            } else {
                growth[i] - growth[i - diff_lag]
            };
            (s.values[i + growth_lag].0, value)
        })
        .collect();
    Series::new(s.id.clone(), s.group, s.frequency, s.release_week, out)
}

/// Column names of the long-format data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelSchema {
    pub date_column: String,
    pub series_column: String,
    pub value_column: String,
}

impl Default for PanelSchema {
    fn default() -> Self {
        PanelSchema {
            date_column: "date".into(),
            series_column: "series_id".into(),
            value_column: "value".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct SeriesMeta {
    id: String,
    group: Group,
    frequency: Frequency,
    release_week: Option<u8>,
}

fn column(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Schema(format!("{file} has no column '{name}'")))
}

fn read_meta<R: Read>(meta: R) -> Result<Vec<SeriesMeta>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(meta);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 1, message: e.to_string() })?
        .clone();
    let id_c = column(&headers, "series_id", "metadata")?;
    let group_c = column(&headers, "group", "metadata")?;
    let freq_c = column(&headers, "frequency", "metadata")?;
    let rw_c = headers.iter().position(|h| h.trim() == "release_week");
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let release_week = match rw_c.map(field) {
            None | Some("") => None,
            Some(w) => Some(w.parse::<u8>().map_err(|_| Error::Parse {
                row,
                message: format!("bad release_week '{w}'"),
            })?),
        };
        out.push(SeriesMeta {
            id: field(id_c).to_string(),
            group: field(group_c).parse().map_err(|e: Error| Error::Parse {
                row,
                message: e.to_string(),
            })?,
            frequency: field(freq_c).parse().map_err(|e: Error| Error::Parse {
                row,
                message: e.to_string(),
            })?,
            release_week,
        });
    }
    Ok(out)
}

/// Reads a panel from a long-format data stream and a metadata stream.
pub fn read_panel<R1: Read, R2: Read>(data: R1, meta: R2, schema: &PanelSchema) -> Result<Panel> {
    let metas = read_meta(meta)?;
    // per series: (period, date, value, merged count)
    let mut raw: Vec<Vec<(i64, NaiveDate, f64, usize)>> = vec![Vec::new(); metas.len()];

    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 1, message: e.to_string() })?
        .clone();
    let date_c = column(&headers, &schema.date_column, "data")?;
    let id_c = column(&headers, &schema.series_column, "data")?;
    let val_c = column(&headers, &schema.value_column, "data")?;

    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(date_c), "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            message: format!("bad date '{}': {e}", field(date_c)),
        })?;
        let id = field(id_c);
        let idx = metas
            .iter()
            .position(|m| m.id == id)
            .ok_or_else(|| Error::Schema(format!("row {row}: series '{id}' missing from metadata")))?;
        let value: f64 = field(val_c).parse().map_err(|_| Error::Parse {
            row,
            message: format!("bad value '{}'", field(val_c)),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row,
                message: "missing or non-finite value".into(),
            });
        }
        raw[idx].push((period_of(date, metas[idx].frequency), date, value, 1));
    }

    let mut target = None;
    let mut predictors = Vec::new();
    for (meta, mut obs) in metas.into_iter().zip(raw) {
        if obs.is_empty() {
            return Err(Error::Schema(format!("series '{}' has no observations", meta.id)));
        }
        obs.sort_by_key(|o| (o.0, o.1));
        let mut merged: Vec<(i64, NaiveDate, f64, usize)> = Vec::with_capacity(obs.len());
        for o in obs {
            match merged.last_mut() {
                Some(last) if last.0 == o.0 => {
                    if last.1 == o.1 {
                        return Err(Error::Validation(format!(
                            "series {}: duplicate period {}",
                            meta.id, o.1
                        )));
                    }
                    let week13 = meta.frequency == Frequency::Weekly
                        && o.0.rem_euclid(WEEKS_PER_QUARTER as i64) == WEEKS_PER_QUARTER as i64 - 1;
                    if !week13 {
                        return Err(Error::Schema(format!(
                            "series {}: dates {} and {} fall in the same {} period",
                            meta.id, last.1, o.1, meta.frequency
                        )));
                    }
                    // trailing partial week folds into week 13
                    last.2 = (last.2 * last.3 as f64 + o.2) / (last.3 + 1) as f64;
                    last.3 += 1;
                }
                _ => merged.push(o),
            }
        }
        let values = merged.into_iter().map(|(p, _, v, _)| (p, v)).collect();
        let s = Series::new(meta.id, meta.group, meta.frequency, meta.release_week, values)?;
        if s.group == Group::Target {
            if target.replace(s).is_some() {
                return Err(Error::Schema("more than one target series".into()));
            }
        } else {
            predictors.push(s);
        }
    }
    let target = target.ok_or_else(|| Error::Schema("no series with group 'target'".into()))?;
    Panel::new(target, predictors)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_panel(data: &Path, meta: &Path, schema: &PanelSchema) -> Result<Panel> {
    read_panel(open(data)?, open(meta)?, schema)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

/// Writes the panel in the long format and its metadata.
pub fn write_panel<W1: Write, W2: Write>(panel: &Panel, data: W1, meta: W2) -> Result<()> {
    let all: Vec<&Series> = std::iter::once(&panel.target).chain(&panel.predictors).collect();

    let mut m = csv::Writer::from_writer(meta);
    m.write_record(["series_id", "group", "frequency", "release_week"])
        .map_err(csv_err)?;
    for s in &all {
        let rw = s.release_week.map(|w| w.to_string()).unwrap_or_default();
        m.write_record([s.id.clone(), s.group.to_string(), s.frequency.to_string(), rw])
            .map_err(csv_err)?;
    }
    m.flush().map_err(|e| Error::Io { path: "<metadata>".into(), source: e })?;

    let mut d = csv::Writer::from_writer(data);
    d.write_record(["date", "series_id", "value"]).map_err(csv_err)?;
    for s in &all {
        for (p, v) in &s.values {
            d.write_record([
                period_date(*p, s.frequency).format("%Y-%m-%d").to_string(),
                s.id.clone(),
                format!("{v}"),
            ])
            .map_err(csv_err)?;
        }
    }
    d.flush().map_err(|e| Error::Io { path: "<data>".into(), source: e })?;
    Ok(())
}

pub fn save_panel(panel: &Panel, data: &Path, meta: &Path) -> Result<()> {
    let create = |p: &Path| {
        std::fs::File::create(p).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })
    };
    write_panel(panel, create(data)?, create(meta)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weekly(id: &str, q0: Quarter, quarters: usize, f: impl Fn(usize) -> f64) -> Series {
        let start = q0.0 * 13;
        let values = (0..quarters * 13).map(|i| (start + i as i64, f(i))).collect();
        Series::new(id, Group::Alt, Frequency::Weekly, None, values).unwrap()
    }

    #[test]
    fn week_assignment_merges_trailing_days() {
        let d = |y, m, dd| NaiveDate::from_ymd_opt(y, m, dd).unwrap();
        assert_eq!(week_of_quarter(d(2020, 1, 1)), 1);
        assert_eq!(week_of_quarter(d(2020, 1, 7)), 1);
        assert_eq!(week_of_quarter(d(2020, 1, 8)), 2);
        assert_eq!(week_of_quarter(d(2020, 3, 25)), 13);
        assert_eq!(week_of_quarter(d(2020, 3, 31)), 13);
        assert_eq!(week_of_quarter(d(2020, 4, 1)), 1);
    }

    #[test]
    fn quarter_parse_and_display() {
        let q: Quarter = "2014Q1".parse().unwrap();
        assert_eq!(q.to_string(), "2014Q1");
        assert_eq!(q.offset(-2).to_string(), "2013Q3");
        assert!("2014Q5".parse::<Quarter>().is_err());
        assert_eq!(Quarter::from_date(NaiveDate::from_ymd_opt(2014, 8, 3).unwrap()).to_string(), "2014Q3");
    }

    #[test]
    fn period_dates_round_trip() {
        for freq in [Frequency::Quarterly, Frequency::Monthly, Frequency::Weekly] {
            for p in 8000..8100 {
                assert_eq!(period_of(period_date(p, freq), freq), p);
            }
        }
    }

    #[test]
    fn identity_transform() {
        let s = weekly("g", Quarter(8000), 2, |i| i as f64 + 1.0);
        assert_eq!(apply_transform(&s, Transform::None).unwrap(), s);
    }

    #[test]
    fn constant_growth_is_zero() {
        let s = weekly("g", Quarter(8000), 6, |_| 4.2);
        let g = apply_transform(&s, Transform::GrowthRate).unwrap();
        assert_eq!(g.len(), s.len() - 1);
        assert!(g.values().iter().all(|(_, v)| *v == 0.0));
        let y = apply_transform(&s, Transform::Yoy52Diff13).unwrap();
        assert!(y.values().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn yoy_then_diff_on_linear_series() {
        // v_t = t (1-based); growth_t = t/(t-52) - 1 = 52/(t-52)
        // out_t = 52/(t-52) - 52/(t-65)
        let s = weekly("g", Quarter(8000), 8, |i| (i + 1) as f64);
        let out = apply_transform(&s, Transform::Yoy52Diff13).unwrap();
        assert_eq!(out.len(), s.len() - 65);
        assert_eq!(out.values()[0].0, s.values()[65].0);
        for (k, (_, v)) in out.values().iter().enumerate() {
            let t = (k + 66) as f64;
            let want = 52.0 / (t - 52.0) - 52.0 / (t - 65.0);
            assert!((v - want).abs() < 1e-14, "t={t}: {v} vs {want}");
        }
        assert!((out.values()[0].1 - (52.0 / 14.0 - 52.0)).abs() < 1e-12);
    }

    #[test]
    fn transform_needs_history() {
        let s = weekly("g", Quarter(8000), 5, |i| i as f64 + 1.0);
        assert!(matches!(
            apply_transform(&s, Transform::Yoy52Diff13),
            Err(Error::InsufficientHistory { required: 66, actual: 65, .. })
        ));
    }

    #[test]
    fn transform_keeps_frequency_and_parses() {
        let s = weekly("g", Quarter(8000), 6, |i| i as f64 + 1.0);
        let t: Transform = "lag:4:2".parse().unwrap();
        let out = apply_transform(&s, t).unwrap();
        assert_eq!(out.frequency, Frequency::Weekly);
        assert_eq!(out.len(), s.len() - 6);
        assert!("bogus".parse::<Transform>().is_err());
    }

    #[test]
    fn panel_rejects_short_quarter() {
        let target = Series::new(
            "gdp",
            Group::Target,
            Frequency::Quarterly,
            None,
            (0..4).map(|i| (8000 + i, 1.0)).collect(),
        )
        .unwrap();
        let mut values: Vec<(i64, f64)> = (0..4 * 13).map(|i| (8000 * 13 + i as i64, 1.0)).collect();
        values.remove(13 + 5);
        let g = Series::new("g", Group::Alt, Frequency::Weekly, None, values).unwrap();
        let err = Panel::new(target, vec![g]).unwrap_err();
        assert!(err.to_string().contains("2000Q2"), "{err}");
    }

    #[test]
    fn series_invariants() {
        assert!(Series::new("x", Group::Soft, Frequency::Monthly, None, vec![(2, 1.0), (2, 1.0)]).is_err());
        assert!(Series::new("x", Group::Soft, Frequency::Monthly, Some(14), vec![]).is_err());
        assert!(Series::new("x", Group::Soft, Frequency::Monthly, None, vec![(1, f64::NAN)]).is_err());
    }
}
