//! CSV and JSON artifacts, with loaders for everything that is written.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly. Matrix entries in CSV headers are
//! named `phi_<row>_<col>` with 1-based indices in row-major order.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::disc::DiscTrajectory;
use crate::control::heisenberg::SnapshotPoint;
use crate::eigenskeleton::{Eigenskeleton, PairingReport};
use crate::invariants::InvariantRecord;
use crate::propagation::{Stm, Trajectory};
use crate::surfaces::DensityMap;
use crate::{Error, Result};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

fn write_record<W: Write>(w: &mut csv::Writer<W>, fields: impl IntoIterator<Item = String>) -> Result<()> {
    w.write_record(fields.into_iter().collect::<Vec<_>>()).map_err(io_err)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(io_err)?.flush().map_err(io_err)
}

fn parse_field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64> {
    let s = rec
        .get(i)
        .ok_or_else(|| Error::Parse(format!("line {line}: missing column {}", i + 1)))?;
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}, column {}: '{s}' is not a number", i + 1)))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes())
}

fn headers(r: &mut csv::Reader<&[u8]>) -> Result<Vec<String>> {
    Ok(r.headers().map_err(io_err)?.iter().map(str::to_string).collect())
}

pub fn stm_column_names(dim: usize) -> Vec<String> {
    (1..=dim)
        .flat_map(|r| (1..=dim).map(move |c| format!("phi_{r}_{c}")))
        .collect()
}

fn trajectory_header(n_pairs: usize) -> Vec<String> {
    let dim = 2 * n_pairs;
    let mut h = vec!["t".to_string()];
    h.extend((1..=dim).map(|i| format!("x_{i}")));
    h.extend(stm_column_names(dim));
    h.push("sympl_residual".into());
    h.push("energy_drift".into());
    h
}

/// One row per sample: `t, x_1…x_2n, phi_1_1…phi_2n_2n, sympl_residual,
/// energy_drift`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_record(&mut w, trajectory_header(traj.n_pairs))?;
    for s in &traj.samples {
        let mut row = vec![fmt_f64(s.t)];
        row.extend(s.state.iter().map(|&v| fmt_f64(v)));
        row.extend(s.stm.transpose().iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(s.sympl_residual));
        row.push(fmt_f64(s.energy_drift));
        write_record(&mut w, row)?;
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub state: Vec<f64>,
    pub stm: DMatrix<f64>,
    pub sympl_residual: f64,
    pub energy_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryTable {
    pub n_pairs: usize,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryTable {
    /// The STM of row `i` as a map from the first row's time.
    pub fn stm(&self, i: usize) -> Stm {
        Stm {
            matrix: self.rows[i].stm.clone(),
            t0: self.rows[0].t,
            t1: self.rows[i].t,
        }
    }
}

impl From<&Trajectory> for TrajectoryTable {
    fn from(traj: &Trajectory) -> Self {
        Self {
            n_pairs: traj.n_pairs,
            rows: traj
                .samples
                .iter()
                .map(|s| TrajectoryRow {
                    t: s.t,
                    state: s.state.clone(),
                    stm: s.stm.clone(),
                    sympl_residual: s.sympl_residual,
                    energy_drift: s.energy_drift,
                })
                .collect(),
        }
    }
}

pub fn read_trajectory_csv(text: &str) -> Result<TrajectoryTable> {
    let mut r = reader(text);
    let h = headers(&mut r)?;
    // 1 + 2n + 4n² + 2 columns.
    let width = h.len();
    let n_pairs = (1..=64)
        .find(|&n| 3 + 2 * n + 4 * n * n == width)
        .ok_or_else(|| Error::Parse(format!("trajectory header has {width} columns")))?;
    if h != trajectory_header(n_pairs) {
        return Err(Error::Parse("unexpected trajectory header".into()));
    }
    let dim = 2 * n_pairs;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(io_err)?;
        if rec.len() != width {
            return Err(Error::Parse(format!("line {line}: expected {width} fields, got {}", rec.len())));
        }
        let vals = (0..width).map(|c| parse_field(&rec, c, line)).collect::<Result<Vec<_>>>()?;
        rows.push(TrajectoryRow {
            t: vals[0],
            state: vals[1..1 + dim].to_vec(),
            stm: DMatrix::from_row_slice(dim, dim, &vals[1 + dim..1 + dim + dim * dim]),
            sympl_residual: vals[width - 2],
            energy_drift: vals[width - 1],
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse("trajectory has no rows".into()));
    }
    Ok(TrajectoryTable { n_pairs, rows })
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(io_err)?;
    out.write_all(b"\n").map_err(io_err)
}

/// STM exchange format: `{"t0": …, "t1": …, "matrix": [[row], …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StmFile {
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub t1: f64,
    pub matrix: Vec<Vec<f64>>,
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || n % 2 != 0 {
        return Err(Error::Dimension(format!("STM must have an even, nonzero number of rows, got {n}")));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::Dimension(format!("STM row {} has {} entries, expected {n}", i + 1, r.len())));
    }
    let m = DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied());
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("STM entries".into()));
    }
    Ok(m)
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn parse_stm_json(text: &str) -> Result<Stm> {
    let f: StmFile = serde_json::from_str(text).map_err(io_err)?;
    Ok(Stm {
        matrix: matrix_from_rows(&f.matrix)?,
        t0: f.t0,
        t1: f.t1,
    })
}

pub fn write_stm_json<W: Write>(stm: &Stm, out: W) -> Result<()> {
    write_json(
        &StmFile {
            t0: stm.t0,
            t1: stm.t1,
            matrix: matrix_to_rows(&stm.matrix),
        },
        out,
    )
}

/// Long-format invariant table: `t, quantity, key, value`.
///
/// Quantities are `column_sum` and `row_sum` (key = 1-based pair),
/// `nu_split`, `nu_complement`, `beta` and `collapse_residual` (key = split
/// label), `min_plane_expansion` and `sympl_residual` (empty key).
pub fn write_invariants_csv<W: Write>(records: &[InvariantRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_record(&mut w, ["t", "quantity", "key", "value"].map(String::from))?;
    for rec in records {
        let t = fmt_f64(rec.t);
        let mut row = |q: &str, k: String, v: f64| write_record(&mut w, [t.clone(), q.to_string(), k, fmt_f64(v)]);
        for (j, v) in rec.column_sums.iter().enumerate() {
            row("column_sum", (j + 1).to_string(), *v)?;
        }
        for (i, v) in rec.row_sums.iter().enumerate() {
            row("row_sum", (i + 1).to_string(), *v)?;
        }
        for (label, [a, b]) in &rec.nu_by_split {
            row("nu_split", label.clone(), *a)?;
            row("nu_complement", label.clone(), *b)?;
        }
        for (label, v) in &rec.beta_by_split {
            row("beta", label.clone(), *v)?;
        }
        for (label, v) in &rec.collapse_residual_by_split {
            row("collapse_residual", label.clone(), *v)?;
        }
        row("min_plane_expansion", String::new(), rec.min_plane_expansion)?;
        row("sympl_residual", String::new(), rec.sympl_residual)?;
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub t: f64,
    pub quantity: String,
    pub key: String,
    pub value: f64,
}

pub fn read_invariants_csv(text: &str) -> Result<Vec<InvariantRow>> {
    let mut r = reader(text);
    if headers(&mut r)? != ["t", "quantity", "key", "value"] {
        return Err(Error::Parse("unexpected invariant header".into()));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(io_err)?;
            Ok(InvariantRow {
                t: parse_field(&rec, 0, i + 2)?,
                quantity: rec.get(1).unwrap_or_default().to_string(),
                key: rec.get(2).unwrap_or_default().to_string(),
                value: parse_field(&rec, 3, i + 2)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonExport {
    pub t0: f64,
    pub t1: f64,
    pub lambdas: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub xi: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub residuals: PairingReport,
}

impl SkeletonExport {
    pub fn new(sk: &Eigenskeleton, report: PairingReport, t0: f64, t1: f64) -> Self {
        let vecs = |vs: &[DVector<f64>]| vs.iter().map(|v| v.as_slice().to_vec()).collect();
        Self {
            t0,
            t1,
            lambdas: sk.lambda.clone(),
            spectrum: sk.spectrum.clone(),
            xi: vecs(&sk.xi),
            eta: vecs(&sk.eta),
            residuals: report,
        }
    }
}

pub fn parse_skeleton_json(text: &str) -> Result<SkeletonExport> {
    serde_json::from_str(text).map_err(io_err)
}

/// `P_i, Q_i, sigma, prob, caustic_flag`; caustic rows carry `sigma = inf`.
pub fn write_density_csv<W: Write>(map: &DensityMap, out: W) -> Result<()> {
    let i = map.target_pair + 1;
    let mut w = csv::Writer::from_writer(out);
    write_record(
        &mut w,
        [format!("P_{i}"), format!("Q_{i}"), "sigma".into(), "prob".into(), "caustic_flag".into()],
    )?;
    for c in &map.cells {
        write_record(
            &mut w,
            [
                fmt_f64(c.image[0]),
                fmt_f64(c.image[1]),
                fmt_f64(c.sigma.unwrap_or(f64::INFINITY)),
                fmt_f64(c.prob),
                u8::from(c.is_caustic()).to_string(),
            ],
        )?;
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub p: f64,
    pub q: f64,
    pub sigma: Option<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub target_pair: usize,
    pub rows: Vec<DensityRow>,
}

pub fn read_density_csv(text: &str) -> Result<DensityTable> {
    let mut r = reader(text);
    let h = headers(&mut r)?;
    let bad = || Error::Parse("unexpected density header".into());
    if h.len() != 5 || h[2..] != ["sigma", "prob", "caustic_flag"] {
        return Err(bad());
    }
    let i: usize = h[0].strip_prefix("P_").and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    if i == 0 || h[1] != format!("Q_{i}") {
        return Err(bad());
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(io_err)?;
        let caustic = match rec.get(4).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            other => return Err(Error::Parse(format!("line {line}: bad caustic flag {other:?}"))),
        };
        let sigma = parse_field(&rec, 2, line)?;
        if !caustic && !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Parse(format!("line {line}: density must be finite and nonnegative")));
        }
        rows.push(DensityRow {
            p: parse_field(&rec, 0, line)?,
            q: parse_field(&rec, 1, line)?,
            sigma: (!caustic).then_some(sigma),
            prob: parse_field(&rec, 3, line)?,
        });
    }
    Ok(DensityTable {
        target_pair: i - 1,
        rows,
    })
}

/// `t, X, Y, x, y, z, g` for each snapshot point.
pub fn write_snapshots_csv<W: Write>(points: &[SnapshotPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_record(&mut w, ["t", "X", "Y", "x", "y", "z", "g"].map(String::from))?;
    for p in points {
        write_record(&mut w, [p.t, p.x0, p.y0, p.x, p.y, p.z, p.g].map(fmt_f64))?;
    }
    finish(w)
}

pub fn read_snapshots_csv(text: &str) -> Result<Vec<SnapshotPoint>> {
    let mut r = reader(text);
    if headers(&mut r)? != ["t", "X", "Y", "x", "y", "z", "g"] {
        return Err(Error::Parse("unexpected snapshot header".into()));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(io_err)?;
            let v = (0..7).map(|c| parse_field(&rec, c, i + 2)).collect::<Result<Vec<_>>>()?;
            Ok(SnapshotPoint {
                t: v[0],
                x0: v[1],
                y0: v[2],
                x: v[3],
                y: v[4],
                z: v[5],
                g: v[6],
            })
        })
        .collect()
}

const DISC_HEADER: [&str; 13] = [
    "t", "x", "y", "phi", "theta", "psi", "A", "B", "C", "D", "E", "F", "AD_minus_BC",
];

pub fn write_disc_csv<W: Write>(traj: &DiscTrajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    write_record(&mut w, DISC_HEADER.map(String::from))?;
    for s in &traj.samples {
        let k = s.integrals;
        let mut row = vec![s.t];
        row.extend(s.state.to_array());
        row.extend([k.a, k.b, k.c, k.d, k.e, k.f, s.projection_area()]);
        write_record(&mut w, row.into_iter().map(fmt_f64))?;
    }
    finish(w)
}

/// Rows of the disc CSV as plain numbers, in header order.
pub fn read_disc_csv(text: &str) -> Result<Vec<[f64; 13]>> {
    let mut r = reader(text);
    if headers(&mut r)? != DISC_HEADER {
        return Err(Error::Parse("unexpected disc header".into()));
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(io_err)?;
            let mut out = [0.0; 13];
            for (c, slot) in out.iter_mut().enumerate() {
                *slot = parse_field(&rec, c, i + 2)?;
            }
            Ok(out)
        })
        .collect()
}
