//! Binary model container.
//!
//! Layout: 8-byte magic `KUQMODEL`, `u32` LE format version, `u64` LE header length, a UTF-8
//! JSON header, then every matrix listed in the header as row-major little-endian `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::koopman::{EmbeddingConfig, FitMode, KoopmanModel, LiftSpec, PodBasis};

pub const MODEL_MAGIC: &[u8; 8] = b"KUQMODEL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MatrixEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    mode: FitMode,
    dt: f64,
    n_obs: usize,
    n_inputs: usize,
    embedding: EmbeddingConfig,
    lift: LiftSpec,
    residual_variance: f64,
    pinv_tol: f64,
    pod_eigenvalues: Option<Vec<f64>>,
    pod_energy_fraction: Option<f64>,
    matrices: Vec<MatrixEntry>,
}

fn put_matrix<W: Write>(w: &mut W, m: &Mat<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn get_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<Mat<f64>> {
    let mut bytes = vec![0u8; rows * cols * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Data("model file is truncated".into()))?;
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Mat::from_fn(rows, cols, |i, j| vals[i * cols + j]))
}

pub fn write_model<W: Write>(mut w: W, model: &KoopmanModel) -> Result<()> {
    let scale = Mat::from_fn(1, model.scale.len(), |_, j| model.scale[j]);
    let mut mats = vec![("scale", &scale), ("operator", &model.operator)];
    if let Some(p) = &model.pod {
        mats.push(("phi", &p.phi));
    }
    let header = Header {
        mode: model.mode,
        dt: model.dt,
        n_obs: model.n_obs,
        n_inputs: model.n_inputs,
        embedding: model.embedding,
        lift: model.lift_spec().clone(),
        residual_variance: model.residual_variance,
        pinv_tol: model.pinv_tol,
        pod_eigenvalues: model.pod.as_ref().map(|p| p.eigenvalues.clone()),
        pod_energy_fraction: model.pod.as_ref().map(|p| p.energy_fraction),
        matrices: mats
            .iter()
            .map(|(n, m)| MatrixEntry {
                name: n.to_string(),
                rows: m.nrows(),
                cols: m.ncols(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, m) in &mats {
        put_matrix(&mut w, m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<KoopmanModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Data("not a model file".into()))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Data("not a model file (bad magic)".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != MODEL_VERSION {
        return Err(Error::Data(format!("unsupported model format version {version}")));
    }
    let mut l = [0u8; 8];
    r.read_exact(&mut l)?;
    let len = u64::from_le_bytes(l) as usize;
    if len > 1 << 30 {
        return Err(Error::Data("model header is implausibly large".into()));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| Error::Data("model file is truncated".into()))?;
    let h: Header = serde_json::from_slice(&json)?;
    let mut scale = None;
    let mut operator = None;
    let mut phi = None;
    for e in &h.matrices {
        let m = get_matrix(&mut r, e.rows, e.cols)?;
        match e.name.as_str() {
            "scale" => scale = Some(m),
            "operator" => operator = Some(m),
            "phi" => phi = Some(m),
            other => return Err(Error::Data(format!("unknown matrix '{other}' in model file"))),
        }
    }
    let scale = scale.ok_or_else(|| Error::Data("model file lacks the scale vector".into()))?;
    let operator = operator.ok_or_else(|| Error::Data("model file lacks the operator".into()))?;
    let pod = match (phi, h.pod_eigenvalues, h.pod_energy_fraction) {
        (Some(phi), Some(eigenvalues), Some(energy_fraction)) => Some(PodBasis {
            phi,
            eigenvalues,
            energy_fraction,
        }),
        (None, None, None) => None,
        _ => return Err(Error::Data("model file has an incomplete POD basis".into())),
    };
    KoopmanModel::from_parts(
        h.mode,
        h.dt,
        h.n_obs,
        h.n_inputs,
        h.embedding,
        h.lift,
        scale.row(0).iter().copied().collect(),
        operator,
        pod,
        h.residual_variance,
        h.pinv_tol,
    )
}

pub fn save_model(path: &Path, model: &KoopmanModel) -> Result<()> {
    write_model(BufWriter::new(File::create(path)?), model)
}

pub fn load_model(path: &Path) -> Result<KoopmanModel> {
    read_model(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::koopman::{fit_model, rbf_random, FitOptions};
    use crate::series::TimeSeriesData;

    fn data() -> TimeSeriesData {
        let q = 120;
        let g = Mat::from_fn(2, q, |i, k| ((k as f64) * 0.21 + i as f64).sin() + 0.3 * ((k as f64) * 0.05).cos());
        let u = Mat::from_fn(1, q, |_, k| (k as f64 * 0.13).sin());
        TimeSeriesData::new(0.1, g, u).unwrap()
    }

    fn round_trip(model: &KoopmanModel) -> KoopmanModel {
        let mut buf = Vec::new();
        write_model(&mut buf, model).unwrap();
        assert_eq!(&buf[..8], MODEL_MAGIC);
        read_model(buf.as_slice()).unwrap()
    }

    #[test]
    fn pod_rbf_model_round_trips_bit_exactly() {
        let centers = rbf_random(3, &[(-2.0, 2.0), (-2.0, 2.0)], 4).unwrap();
        let spec = LiftSpec::rbf(centers, 2);
        let m = fit_model(&data(), &EmbeddingConfig::new(2).unwrap(), &spec, &FitOptions::pod(6)).unwrap();
        let back = round_trip(&m);
        assert_eq!(back.operator, m.operator);
        assert_eq!(back.scale, m.scale);
        assert_eq!(back.pod.as_ref().unwrap().phi, m.pod.as_ref().unwrap().phi);
        assert_eq!(back.lift_spec(), m.lift_spec());
        assert_eq!(back.sensing(), m.sensing());
    }

    #[test]
    fn linear_model_round_trips() {
        let m = fit_model(
            &data(),
            &EmbeddingConfig::new(1).unwrap(),
            &LiftSpec::polynomial(2, true),
            &FitOptions::new(FitMode::LinearFull),
        )
        .unwrap();
        let back = round_trip(&m);
        assert_eq!(back.mode, FitMode::LinearFull);
        assert_eq!(back.operator, m.operator);
        assert!(back.pod.is_none());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(matches!(read_model(&b"NOTAMODELATALL"[..]), Err(Error::Data(_))));
        let m = fit_model(
            &data(),
            &EmbeddingConfig::new(1).unwrap(),
            &LiftSpec::none(),
            &FitOptions::new(FitMode::NonlinearFull),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(read_model(buf.as_slice()), Err(Error::Data(_))));
    }
}
