pub mod nowcast;
pub mod regress;
pub mod simulate;
pub mod synth;
pub mod verify;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ridgecast::ridge::AlphaGrid;

use crate::error::{CliError, Result};
use crate::manifest::Manifest;

/// Uses the given seed or draws one from the OS; either way it ends up in the manifest.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random();
        log::info!("no seed given; drew {s}");
        s
    })
}

pub fn output_dir(out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| PathBuf::from("ridgecast-out"));
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    Ok(dir)
}

pub fn require_file(path: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    let path = path.ok_or_else(|| CliError::Config(format!("--{flag} is required")))?;
    if !path.is_file() {
        return Err(CliError::Config(format!("--{flag}: {} is not a readable file", path.display())));
    }
    Ok(path)
}

/// Log-spaced grid; unset bounds fall back to the library default.
pub fn alpha_grid(lo: Option<f64>, hi: Option<f64>, count: Option<usize>, m: &mut Manifest) -> Result<AlphaGrid> {
    let default = AlphaGrid::default();
    let p = default.points();
    let grid = match (lo, hi, count) {
        (None, None, None) => default.clone(),
        _ => AlphaGrid::log(lo.unwrap_or(p[0]), hi.unwrap_or(p[p.len() - 1]), count.unwrap_or(p.len()))?,
    };
    let q = grid.points();
    m.set("alpha_min", q[0]);
    m.set("alpha_max", q[q.len() - 1]);
    m.set("alpha_count", q.len());
    m.set("alpha_spacing", "log");
    Ok(grid)
}

/// Creates `dir/name`, hands a buffered writer to `f`, and records the file in the manifest.
pub fn write_output<F>(dir: &Path, name: &str, m: &mut Manifest, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> ridgecast::Result<()>,
{
    let path = dir.join(name);
    let file = File::create(&path).map_err(CliError::io(&path))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(CliError::io(&path))?;
    m.set(format!("output.{name}"), path.display());
    Ok(())
}

pub fn csv_error(e: csv::Error) -> ridgecast::Error {
    ridgecast::Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

/// Splits a comma-separated list, dropping empty items.
pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

pub fn finish_csv<W: Write>(mut w: csv::Writer<W>) -> ridgecast::Result<()> {
    w.flush().map_err(|e| ridgecast::Error::Io { path: "<csv>".into(), source: e })
}
