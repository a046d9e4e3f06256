//! Column-role CSV files.
//!
//! ```text
//! # dt=0.025 t0=50
//! t,state:V,obs:V,obs:q,input:u
//! 50,-64.1,-64.1,0.98,0
//! ```
//!
//! Leading `#` lines carry `key=value` metadata; `dt` is mandatory. Column roles are
//! `t`, `state:*`, `obs:*`, `input:*` and `x:*` (raw snapshot entries).

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use faer::Mat;

use crate::error::{Error, Result};
use crate::koopman::{compute_pod, PodBasis};
use crate::series::TimeSeriesData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    /// Accept `NaN` and infinite cells instead of failing.
    pub allow_non_finite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Time,
    State,
    Obs,
    Input,
    Raw,
}

impl Role {
    fn prefix(self) -> &'static str {
        match self {
            Role::Time => "t",
            Role::State => "state",
            Role::Obs => "obs",
            Role::Input => "input",
            Role::Raw => "x",
        }
    }
}

fn parse_role(name: &str, line: usize) -> Result<(Role, String)> {
    if name == "t" {
        return Ok((Role::Time, String::new()));
    }
    let (prefix, rest) = name.split_once(':').ok_or_else(|| Error::Parse {
        line,
        msg: format!("column '{name}' has no role prefix"),
    })?;
    let role = match prefix {
        "state" => Role::State,
        "obs" => Role::Obs,
        "input" => Role::Input,
        "x" => Role::Raw,
        _ => {
            return Err(Error::Parse {
                line,
                msg: format!("unknown column role '{prefix}'"),
            })
        }
    };
    Ok((role, rest.to_string()))
}

/// A parsed file: metadata plus one channel-by-time matrix per role.
struct Table {
    dt: f64,
    t0: f64,
    names: Vec<(Role, String)>,
    /// Column-major over time: `values[c][k]`.
    values: Vec<Vec<f64>>,
}

impl Table {
    fn rows(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    fn block(&self, role: Role) -> (Mat<f64>, Vec<String>) {
        let cols: Vec<usize> = (0..self.names.len()).filter(|&c| self.names[c].0 == role).collect();
        let q = self.rows();
        let m = Mat::from_fn(cols.len(), q, |i, k| self.values[cols[i]][k]);
        (m, cols.iter().map(|&c| self.names[c].1.clone()).collect())
    }

    fn has(&self, role: Role) -> bool {
        self.names.iter().any(|(r, _)| *r == role)
    }
}

fn read_table<R: Read>(reader: R, opts: CsvOptions) -> Result<Table> {
    let mut buf = BufReader::new(reader);
    let mut dt = None;
    let mut t0 = 0.0;
    let mut meta_lines = 0;
    let mut line = String::new();
    let header_line = loop {
        line.clear();
        if buf.read_line(&mut line)? == 0 {
            return Err(Error::Parse {
                line: meta_lines + 1,
                msg: "missing column header".into(),
            });
        }
        meta_lines += 1;
        let trimmed = line.trim();
        let Some(meta) = trimmed.strip_prefix('#') else {
            break trimmed.to_string();
        };
        for token in meta.split_whitespace() {
            let Some((k, v)) = token.split_once('=') else { continue };
            let val: f64 = v.parse().map_err(|_| Error::Parse {
                line: meta_lines,
                msg: format!("metadata '{k}' is not a number: '{v}'"),
            })?;
            match k {
                "dt" => dt = Some(val),
                "t0" => t0 = val,
                _ => {}
            }
        }
    };
    let header_no = meta_lines;
    let dt = dt.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "header does not declare dt (expected '# dt=<value>')".into(),
    })?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("dt must be positive, got {dt}"),
        });
    }
    let names = header_line
        .split(',')
        .map(|s| parse_role(s.trim(), header_no))
        .collect::<Result<Vec<_>>>()?;
    if names.iter().filter(|(r, _)| *r == Role::Time).count() > 1 {
        return Err(Error::Parse {
            line: header_no,
            msg: "duplicate time column".into(),
        });
    }
    let mut values = vec![Vec::new(); names.len()];
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(buf);
    for (row, rec) in rdr.records().enumerate() {
        let line_no = header_no + row + 1;
        let rec = rec.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if rec.len() != names.len() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("row {} has {} cells, header has {}", row + 1, rec.len(), names.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("row {}, column {}: '{cell}' is not a number", row + 1, c + 1),
            })?;
            if !v.is_finite() && !opts.allow_non_finite {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("row {}, column {}: non-finite value '{cell}'", row + 1, c + 1),
                });
            }
            values[c].push(v);
        }
    }
    Ok(Table { dt, t0, names, values })
}

/// Shortest decimal text that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn write_table<W: Write>(out: W, dt: f64, t0: f64, blocks: &[(Role, &[String], &Mat<f64>)], q: usize) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "# dt={} t0={}", fmt_f64(dt), fmt_f64(t0))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for (role, names, _) in blocks {
        header.extend(names.iter().map(|n| format!("{}:{n}", role.prefix())));
    }
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..q {
        row.clear();
        row.push(fmt_f64(t0 + k as f64 * dt));
        for (_, _, m) in blocks {
            row.extend((0..m.nrows()).map(|i| fmt_f64(m[(i, k)])));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn default_names(prefix: &str, n: usize, given: &[String]) -> Vec<String> {
    if given.len() == n {
        given.to_vec()
    } else {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }
}

/// Writes a series with its states (if any), observables and inputs.
pub fn write_series_csv<W: Write>(out: W, data: &TimeSeriesData) -> Result<()> {
    let obs = default_names("g", data.n_observables(), &data.observable_names);
    let inp = default_names("u", data.n_inputs(), &data.input_names);
    let mut blocks = Vec::new();
    let st_names;
    if let Some(s) = &data.states {
        st_names = default_names("s", s.nrows(), &data.state_names);
        blocks.push((Role::State, st_names.as_slice(), s));
    }
    blocks.push((Role::Obs, obs.as_slice(), &data.observables));
    blocks.push((Role::Input, inp.as_slice(), &data.inputs));
    write_table(out, data.dt, data.t0, &blocks, data.len())
}

pub fn read_series_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<TimeSeriesData> {
    let t = read_table(reader, opts)?;
    if !t.has(Role::Obs) {
        return Err(Error::Data("series file has no obs:* columns".into()));
    }
    let (g, g_names) = t.block(Role::Obs);
    let (u, u_names) = t.block(Role::Input);
    let mut data = TimeSeriesData::new(t.dt, g, u)?;
    data.t0 = t.t0;
    data.observable_names = g_names;
    data.input_names = u_names;
    if t.has(Role::State) {
        let (s, s_names) = t.block(Role::State);
        data.states = Some(s);
        data.state_names = s_names;
    }
    Ok(data)
}

pub fn save_series(path: &Path, data: &TimeSeriesData) -> Result<()> {
    write_series_csv(File::create(path)?, data)
}

pub fn load_series(path: &Path) -> Result<TimeSeriesData> {
    read_series_csv(File::open(path)?, CsvOptions::default())
}

/// Raw high-dimensional snapshots (for example flattened image intensities).
#[derive(Debug, Clone)]
pub struct SnapshotDataset {
    pub dt: f64,
    pub t0: f64,
    /// `n × q`, one snapshot per column.
    pub snapshots: Mat<f64>,
    /// `m × q`.
    pub inputs: Mat<f64>,
    pub names: Vec<String>,
    pub input_names: Vec<String>,
}

impl SnapshotDataset {
    pub fn len(&self) -> usize {
        self.snapshots.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.snapshots.nrows()
    }
}

/// Reads a snapshot file. Snapshot entries come from `x:*` columns, or from `obs:*` when
/// there are none.
pub fn ingest_csv<R: Read>(reader: R, opts: CsvOptions) -> Result<SnapshotDataset> {
    let t = read_table(reader, opts)?;
    let role = if t.has(Role::Raw) { Role::Raw } else { Role::Obs };
    if !t.has(role) {
        return Err(Error::Data("snapshot file has no x:* or obs:* columns".into()));
    }
    if t.rows() == 0 {
        return Err(Error::Data("snapshot file has no rows".into()));
    }
    let (snapshots, names) = t.block(role);
    let (inputs, input_names) = t.block(Role::Input);
    Ok(SnapshotDataset {
        dt: t.dt,
        t0: t.t0,
        snapshots,
        inputs,
        names,
        input_names,
    })
}

pub fn ingest_csv_file(path: &Path, opts: CsvOptions) -> Result<SnapshotDataset> {
    ingest_csv(File::open(path)?, opts)
}

pub fn write_snapshot_csv<W: Write>(out: W, data: &SnapshotDataset) -> Result<()> {
    write_table(
        out,
        data.dt,
        data.t0,
        &[
            (Role::Raw, &data.names, &data.snapshots),
            (Role::Input, &data.input_names, &data.inputs),
        ],
        data.len(),
    )
}

/// Snapshots reduced to their leading POD coefficients.
#[derive(Debug, Clone)]
pub struct PodProjection {
    /// Observables `κ_jᵏ`, inputs carried over.
    pub series: TimeSeriesData,
    pub basis: PodBasis,
    /// Temporal mean removed before the decomposition.
    pub mean: Vec<f64>,
}

impl PodProjection {
    pub fn energy_fraction(&self) -> f64 {
        self.basis.energy_fraction
    }

    /// `mean + Φ·κ` for every sample.
    pub fn reconstruct(&self) -> Mat<f64> {
        let mut x = &self.basis.phi * &self.series.observables;
        for k in 0..x.ncols() {
            for i in 0..x.nrows() {
                x[(i, k)] += self.mean[i];
            }
        }
        x
    }
}

/// Projects mean-centred snapshots onto the top `n_modes` eigenvectors of their covariance.
pub fn project_pod_observables(data: &SnapshotDataset, n_modes: usize) -> Result<PodProjection> {
    let (n, q) = (data.dim(), data.len());
    if q == 0 {
        return Err(Error::Data("no snapshots".into()));
    }
    let mean: Vec<f64> = (0..n)
        .map(|i| (0..q).map(|k| data.snapshots[(i, k)]).sum::<f64>() / q as f64)
        .collect();
    let centred = Mat::from_fn(n, q, |i, k| data.snapshots[(i, k)] - mean[i]);
    let basis = compute_pod(centred.as_ref(), n_modes, 1e-10)?;
    let coeffs = basis.phi.transpose() * &centred;
    let mut series = TimeSeriesData::new(data.dt, coeffs, data.inputs.clone())?;
    series.t0 = data.t0;
    series.observable_names = (1..=n_modes).map(|j| format!("pod{j}")).collect();
    series.input_names = data.input_names.clone();
    Ok(PodProjection { series, basis, mean })
}
