//! File formats: CSV tables, coordinate matrices, eigen reports, attractor
//! samples (JSON metadata plus little-endian f64 binary), GH estimates and
//! distance-matrix import.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavegh_core::discretization::{EigenReport, StateVector};
use wavegh_core::dynamics::{AttractorSample, Provenance};
use wavegh_core::gh::{FiniteMetricSpace, GHEstimate, MapCandidate, Reparametrization};
use wavegh_core::linalg::BandedSym;

use crate::HarnessError;

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Append-only CSV table. Every [`CsvWriter::rows`] call is flushed and synced
/// so completed row groups survive an interrupted run.
pub struct CsvWriter {
    file: File,
    path: PathBuf,
}

pub enum Cell {
    F(f64),
    I(u64),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as u64)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::I(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::S(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self, HarnessError> {
        let mut file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        writeln!(file, "{}", header.join(","))?;
        file.sync_data()?;
        Ok(Self { file, path: path.to_path_buf() })
    }

    pub fn rows(&mut self, rows: Vec<Vec<Cell>>) -> Result<(), HarnessError> {
        let mut buf = String::new();
        for row in rows {
            let cells: Vec<String> = row
                .into_iter()
                .map(|c| match c {
                    Cell::F(x) => num(x),
                    Cell::I(i) => i.to_string(),
                    Cell::S(s) => s,
                })
                .collect();
            buf.push_str(&cells.join(","));
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes())?;
        self.file.flush()?;
        self.file.sync_data()?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Writes text and syncs it to disk.
pub fn write_synced(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut f = File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.sync_all()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_synced(path, &text)
}

/// Coordinate format: a `rows cols nnz` header, then one `row col value` line
/// per stored entry (zero-based, both triangles).
pub fn write_coordinate(path: &Path, m: &BandedSym) -> Result<(), HarnessError> {
    let trip = m.triplets();
    let mut out = format!("{} {} {}\n", m.dim(), m.dim(), trip.len());
    for (i, j, v) in trip {
        out.push_str(&format!("{i} {j} {}\n", num(v)));
    }
    write_synced(path, &out)
}

/// `(i, j, value)` entries of a sparse matrix.
pub type Triplets = Vec<(usize, usize, f64)>;

pub fn read_coordinate(path: &Path) -> Result<(usize, Triplets), HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let bad = |msg: &str| HarnessError::Format(format!("{}: {msg}", path.display()));
    let header: Vec<usize> = lines
        .next()
        .ok_or_else(|| bad("empty file"))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad header")))
        .collect::<Result<_, _>>()?;
    if header.len() != 3 || header[0] != header[1] {
        return Err(bad("header must be `n n nnz`"));
    }
    let mut out = Vec::with_capacity(header[2]);
    for line in lines {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() != 3 {
            return Err(bad("entry lines need three fields"));
        }
        let i: usize = t[0].parse().map_err(|_| bad("bad row index"))?;
        let j: usize = t[1].parse().map_err(|_| bad("bad column index"))?;
        let v: f64 = t[2].parse().map_err(|_| bad("bad value"))?;
        if i >= header[0] || j >= header[0] {
            return Err(bad("index out of range"));
        }
        out.push((i, j, v));
    }
    if out.len() != header[2] {
        return Err(bad("entry count does not match header"));
    }
    Ok((header[0], out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenJson {
    pub lambda1: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl From<EigenReport> for EigenJson {
    fn from(r: EigenReport) -> Self {
        Self { lambda1: r.lambda1, residual: r.residual, iterations: r.iterations }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceJson {
    pub ic: usize,
    pub snap: usize,
    pub t: f64,
}

/// Metadata stored next to the binary payload of an attractor sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub n_points: usize,
    /// Length of one state vector `(u, v)`.
    pub state_len: usize,
    pub flow_m: usize,
    pub eps_inv: f64,
    pub plateau_times: Vec<f64>,
    pub provenance: Vec<ProvenanceJson>,
    pub binary: String,
    /// Block order in the binary, each row-major little-endian f64.
    pub layout: Vec<String>,
}

fn state_flat(s: &StateVector, out: &mut Vec<f64>) {
    out.extend_from_slice(&s.u);
    out.extend_from_slice(&s.v);
}

/// Writes `<stem>.json` and `<stem>.bin` into `dir`.
pub fn write_sample(dir: &Path, stem: &str, sample: &AttractorSample) -> Result<(), HarnessError> {
    let n = sample.len();
    let state_len = sample.points.first().map_or(0, |p| p.u.len() + p.v.len());
    let mut flat = Vec::with_capacity(n * state_len * (sample.flow_m + 2) + n * n);
    for p in &sample.points {
        state_flat(p, &mut flat);
    }
    flat.extend_from_slice(&sample.dist);
    for flow in &sample.flows {
        for s in flow {
            state_flat(s, &mut flat);
        }
    }
    let mut bytes = Vec::with_capacity(flat.len() * 8);
    for x in flat {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    let bin_name = format!("{stem}.bin");
    let mut f = File::create(dir.join(&bin_name))?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    let meta = SampleMeta {
        seed: sample.seed,
        n_points: n,
        state_len,
        flow_m: sample.flow_m,
        eps_inv: sample.eps_inv,
        plateau_times: sample.plateau_times.clone(),
        provenance: sample.provenance.iter().map(|p| ProvenanceJson { ic: p.ic, snap: p.snap, t: p.t }).collect(),
        binary: bin_name,
        layout: vec![
            format!("points[{n}][{state_len}]"),
            format!("dist[{n}][{n}]"),
            format!("flows[{n}][{}][{state_len}]", sample.flow_m + 1),
        ],
    };
    write_json(&dir.join(format!("{stem}.json")), &meta)
}

fn read_f64s(path: &Path) -> Result<Vec<f64>, HarnessError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(HarnessError::Format(format!("{}: length is not a multiple of 8", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect())
}

/// Reads a sample written by [`write_sample`] from its JSON metadata path.
pub fn read_sample(meta_path: &Path) -> Result<AttractorSample, HarnessError> {
    let meta: SampleMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
    let dir = meta_path.parent().unwrap_or(Path::new("."));
    let flat = read_f64s(&dir.join(&meta.binary))?;
    let (n, sl, m) = (meta.n_points, meta.state_len, meta.flow_m);
    if sl % 2 != 0 || flat.len() != n * sl + n * n + n * (m + 1) * sl || meta.provenance.len() != n {
        return Err(HarnessError::Format(format!("{}: payload does not match metadata", meta_path.display())));
    }
    let half = sl / 2;
    let state = |off: usize| StateVector { u: flat[off..off + half].to_vec(), v: flat[off + half..off + sl].to_vec() };
    let points: Vec<StateVector> = (0..n).map(|i| state(i * sl)).collect();
    let dist = flat[n * sl..n * sl + n * n].to_vec();
    let base = n * sl + n * n;
    let flows = (0..n).map(|i| (0..=m).map(|k| state(base + (i * (m + 1) + k) * sl)).collect()).collect();
    Ok(AttractorSample {
        seed: meta.seed,
        points,
        dist,
        provenance: meta.provenance.iter().map(|p| Provenance { ic: p.ic, snap: p.snap, t: p.t }).collect(),
        flows,
        flow_m: m,
        plateau_times: meta.plateau_times,
        eps_inv: meta.eps_inv,
    })
}

/// Reads a metric space from a square CSV distance matrix (an optional
/// non-numeric header row is skipped) or from sample metadata (`.json`).
pub fn read_metric(path: &Path) -> Result<FiniteMetricSpace, HarnessError> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(read_sample(path)?.metric_space()?);
    }
    let reader = BufReader::new(File::open(path)?);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(HarnessError::Format(format!("{} line {}: non-numeric entry", path.display(), i + 1)))
            }
        }
    }
    Ok(FiniteMetricSpace::from_rows(&rows)?)
}

pub fn write_metric(path: &Path, x: &FiniteMetricSpace) -> Result<(), HarnessError> {
    let mut out = String::new();
    for i in 0..x.len() {
        let row: Vec<String> = x.row(i).iter().map(|&v| num(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_synced(path, &out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepJson {
    pub rho: f64,
    pub s_i: Vec<f64>,
    pub s_j: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhJson {
    pub lower: f64,
    pub upper: f64,
    pub witness_i: Vec<usize>,
    pub witness_j: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub eps_dynamical: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rep_params: Option<RepJson>,
    pub seed: u64,
    pub budget: usize,
}

impl From<&GHEstimate> for GhJson {
    fn from(e: &GHEstimate) -> Self {
        let rep_params = match (&e.rep_i, &e.rep_j) {
            (Some(a), Some(b)) => Some(RepJson { rho: a.rho, s_i: a.s.clone(), s_j: b.s.clone() }),
            _ => None,
        };
        Self {
            lower: e.lower,
            upper: e.upper,
            witness_i: e.witness_i.map.clone(),
            witness_j: e.witness_j.map.clone(),
            eps_dynamical: e.eps_dynamical,
            rep_params,
            seed: e.seed,
            budget: e.budget,
        }
    }
}

impl GhJson {
    /// Rebuilds an estimate against the two spaces it was computed for.
    pub fn to_estimate(&self, nx: usize, ny: usize) -> Result<GHEstimate, HarnessError> {
        if self.witness_i.len() != nx || self.witness_j.len() != ny {
            return Err(HarnessError::Format("witness lengths do not match the spaces".into()));
        }
        Ok(GHEstimate {
            lower: self.lower,
            upper: self.upper,
            witness_i: MapCandidate::new(ny, self.witness_i.clone())?,
            witness_j: MapCandidate::new(nx, self.witness_j.clone())?,
            restarts: self.budget,
            iterations: 0,
            seed: self.seed,
            budget: self.budget,
            eps_dynamical: self.eps_dynamical,
            rep_i: self.rep_params.as_ref().map(|r| Reparametrization { rho: r.rho, s: r.s_i.clone() }),
            rep_j: self.rep_params.as_ref().map(|r| Reparametrization { rho: r.rho, s: r.s_j.clone() }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn metric_csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,b\n0,2\n2,0\n").unwrap();
        let x = read_metric(&p).unwrap();
        assert_eq!(x.d(0, 1), 2.0);
        std::fs::write(&p, "0,2\n1,0\n").unwrap();
        assert!(read_metric(&p).is_err());
    }
}
