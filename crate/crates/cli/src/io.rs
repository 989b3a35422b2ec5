//! Plain-text artifacts: phase fields (CSV and PGM), datasets, iteration
//! histories and JSON manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pfrecon_core::datagen::{CauchyDataset, ElectrodePair, NoiseSpec, SideSamples};
use pfrecon_core::grid::{Grid, Side};
use pfrecon_core::reconstruction::{IterationRecord, PhaseField};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {message}")]
    Malformed { path: String, message: String },
    #[error("{path}: {message}")]
    Invariant { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io { path: path.display().to_string(), source }
}

fn malformed(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Malformed { path: path.display().to_string(), message: message.into() }
}

/// Writes via a temporary sibling and a rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, contents).map_err(|e| io_err(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| io_err(path, e))
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// `v = 1 − ṽ` as rows of `nx + 1` values, bottom row first.
pub fn phase_csv(grid: &Grid, phase: &PhaseField) -> String {
    let v = phase.v();
    let mut out = String::new();
    for j in 0..=grid.ny() {
        let row: Vec<String> = (0..=grid.nx()).map(|i| format!("{}", v[grid.node_index(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a phase CSV into rows (bottom first) of `v` values.
pub fn parse_phase_csv(path: &Path, text: &str) -> Result<Vec<Vec<f64>>, IoError> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| malformed(path, format!("line {}: {e}", k + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(malformed(path, "no rows"));
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(malformed(path, "rows have different lengths"));
    }
    Ok(rows)
}

pub fn read_phase_csv(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    parse_phase_csv(path, &read(path)?)
}

/// Rebuilds a phase on `grid` from a CSV of `v`.
pub fn read_phase(path: &Path, grid: &Grid, mask: Vec<bool>) -> Result<PhaseField, IoError> {
    let rows = read_phase_csv(path)?;
    if rows.len() != grid.ny() + 1 || rows[0].len() != grid.nx() + 1 {
        return Err(malformed(path, format!("expected {} x {} values", grid.ny() + 1, grid.nx() + 1)));
    }
    let mut tv = vec![0.0; grid.node_count()];
    for (j, row) in rows.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            tv[grid.node_index(i, j)] = 1.0 - v;
        }
    }
    PhaseField::new(grid, tv, mask)
        .map_err(|e| IoError::Invariant { path: path.display().to_string(), message: e.to_string() })
}

/// Plain PGM of `v` rows given bottom first; the image's top row is the top
/// of the domain.
pub fn pgm(rows_bottom_first: &[Vec<f64>]) -> String {
    let h = rows_bottom_first.len();
    let w = rows_bottom_first.first().map_or(0, Vec::len);
    let mut out = format!("P2\n{w} {h}\n255\n");
    for row in rows_bottom_first.iter().rev() {
        let px: Vec<String> = row.iter().map(|v| format!("{}", (255.0 * v.clamp(0.0, 1.0)).round() as u8)).collect();
        out.push_str(&px.join(" "));
        out.push('\n');
    }
    out
}

pub fn phase_rows(grid: &Grid, phase: &PhaseField) -> Vec<Vec<f64>> {
    let v = phase.v();
    (0..=grid.ny()).map(|j| (0..=grid.nx()).map(|i| v[grid.node_index(i, j)]).collect()).collect()
}

/// Writes `<stem>.csv` and `<stem>.pgm`.
pub fn write_phase_field(grid: &Grid, phase: &PhaseField, dir: &Path, stem: &str) -> Result<(), IoError> {
    write_atomic(&dir.join(format!("{stem}.csv")), &phase_csv(grid, phase))?;
    write_atomic(&dir.join(format!("{stem}.pgm")), &pgm(&phase_rows(grid, phase)))
}

/// Tolerance of the zero-mean checks on read.
pub const DATASET_TOLERANCE: f64 = 1e-9;

pub fn dataset_csv(ds: &CauchyDataset) -> String {
    let pair = ds.pair();
    let n = ds.noise();
    let mut out = String::new();
    let _ = writeln!(out, "pair,{},{}", pair.positive, pair.negative);
    let _ = writeln!(out, "noise,{},{},{}", n.level_f, n.level_g, n.seed);
    out.push_str("side,s,f,g\n");
    for s in ds.samples() {
        for k in 0..s.coords.len() {
            let _ = writeln!(out, "{},{},{},{}", s.side, s.coords[k], s.flux[k], s.trace[k]);
        }
    }
    out
}

pub fn write_dataset(ds: &CauchyDataset, path: &Path) -> Result<(), IoError> {
    write_atomic(path, &dataset_csv(ds))
}

pub fn parse_dataset(path: &Path, text: &str) -> Result<CauchyDataset, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut header = |name: &str| -> Result<Vec<String>, IoError> {
        let (_, line) = lines.next().ok_or_else(|| malformed(path, format!("missing `{name}` line")))?;
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields[0] != name {
            return Err(malformed(path, format!("expected `{name}` line, found `{line}`")));
        }
        Ok(fields)
    };
    let pair = header("pair")?;
    let noise = header("noise")?;
    let cols = header("side")?;
    if pair.len() != 3 || noise.len() != 4 || cols != ["side", "s", "f", "g"] {
        return Err(malformed(path, "bad header"));
    }
    let side = |s: &str| s.parse::<Side>().map_err(|_| malformed(path, format!("unknown side '{s}'")));
    let num = |s: &str, line: usize| {
        s.parse::<f64>().map_err(|e| malformed(path, format!("line {}: {e}", line + 1)))
    };
    let pair = ElectrodePair::new(side(&pair[1])?, side(&pair[2])?).map_err(|e| malformed(path, e.to_string()))?;
    let seed = noise[3].parse::<u64>().map_err(|e| malformed(path, format!("noise seed: {e}")))?;
    let noise = NoiseSpec::new(num(&noise[1], 1)?, num(&noise[2], 1)?, seed)
        .map_err(|e| malformed(path, e.to_string()))?;

    let mut samples: Vec<SideSamples> = Vec::new();
    for (k, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(malformed(path, format!("line {}: expected 4 fields", k + 1)));
        }
        let s = side(f[0])?;
        if samples.last().map_or(true, |l| l.side != s) {
            samples.push(SideSamples { side: s, coords: vec![], flux: vec![], trace: vec![] });
        }
        let cur = samples.last_mut().expect("pushed");
        cur.coords.push(num(f[1], k)?);
        cur.flux.push(num(f[2], k)?);
        cur.trace.push(num(f[3], k)?);
    }
    let ds = CauchyDataset::new(pair, samples, noise).map_err(|e| malformed(path, e.to_string()))?;
    ds.check_invariants(DATASET_TOLERANCE)
        .map_err(|e| IoError::Invariant { path: path.display().to_string(), message: e.to_string() })?;
    Ok(ds)
}

pub fn read_dataset(path: &Path) -> Result<CauchyDataset, IoError> {
    parse_dataset(path, &read(path)?)
}

pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out =
        String::from("iteration,stage,eps,total,fidelity,dirichlet,well,gradient_term,step,dual_norm,reductions\n");
    for r in history {
        let c = &r.cost;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.stage,
            r.eps,
            c.total(),
            c.fidelity,
            c.dirichlet,
            c.well,
            c.gradient_term,
            r.step,
            r.dual_norm,
            r.reductions
        );
    }
    out
}
