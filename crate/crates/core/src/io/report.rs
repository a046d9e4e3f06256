//! Tidy CSV and JSON result files.

use std::io::Write;

use super::table::fmt_f64;
use crate::error::{Error, Result};
use crate::predictor::Rollout;
use crate::series::TimeSeriesData;
use crate::sim::FtleSeries;
use crate::uq::{UncertaintyReport, WindowPoint};
use crate::vamp::IterationRecord;

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::Writer::from_writer(out)
}

fn done<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn row<W: Write, I: IntoIterator<Item = String>>(w: &mut csv::Writer<W>, cells: I) -> Result<()> {
    w.write_record(cells.into_iter().collect::<Vec<_>>())
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `t0,time,posterior_variance,normalized_variance,max_error,flag_<threshold>…`
pub fn write_variance_csv<W: Write>(out: W, report: &UncertaintyReport) -> Result<()> {
    let mut w = writer(out);
    let mut header: Vec<String> = ["t0", "time", "posterior_variance", "normalized_variance", "max_error"]
        .map(String::from)
        .to_vec();
    header.extend(report.thresholds.iter().map(|t| format!("flag_{}", fmt_f64(*t))));
    row(&mut w, header)?;
    for b in &report.per_batch {
        let mut cells = vec![
            b.t0.to_string(),
            fmt_f64(b.time),
            fmt_f64(b.posterior_variance),
            fmt_f64(b.normalized_variance),
            opt(b.max_error),
        ];
        cells.extend(b.flags.iter().map(|&f| u8::from(f).to_string()));
        row(&mut w, cells)?;
    }
    done(w)
}

/// `batch_size,threshold,window_pct`
pub fn write_window_csv<W: Write>(out: W, points: &[WindowPoint]) -> Result<()> {
    let mut w = writer(out);
    row(&mut w, ["batch_size", "threshold", "window_pct"].map(String::from))?;
    for p in points {
        row(&mut w, [p.batch_size.to_string(), fmt_f64(p.threshold), fmt_f64(p.window_pct)])?;
    }
    done(w)
}

/// `t,region,pred:<name>…,true:<name>…,error`.
///
/// With a reference series the truth rows before the hand-off come first (`region = truth`,
/// prediction columns equal to the truth); the hand-off sample and everything after it are
/// tagged `prediction`. Truth cells are blank past the end of the reference.
pub fn write_prediction_csv<W: Write>(out: W, rollout: &Rollout, names: &[String], truth: Option<&TimeSeriesData>) -> Result<()> {
    let p = rollout.predictions.nrows();
    let names: Vec<String> = if names.len() == p {
        names.to_vec()
    } else {
        (0..p).map(|i| format!("g{i}")).collect()
    };
    let mut w = writer(out);
    let mut header = vec!["t".to_string(), "region".to_string()];
    header.extend(names.iter().map(|n| format!("pred:{n}")));
    header.extend(names.iter().map(|n| format!("true:{n}")));
    header.push("error".into());
    row(&mut w, header)?;
    let k0 = rollout.start_index;
    if let Some(t) = truth {
        for k in 0..k0.min(t.len()) {
            let mut cells = vec![fmt_f64(t.time(k)), "truth".to_string()];
            let vals: Vec<String> = (0..p).map(|i| fmt_f64(t.observables[(i, k)])).collect();
            cells.extend(vals.iter().cloned());
            cells.extend(vals);
            cells.push(fmt_f64(0.0));
            row(&mut w, cells)?;
        }
    }
    for j in 0..=rollout.n_steps() {
        let mut cells = vec![fmt_f64(rollout.t_start + j as f64 * rollout.dt), "prediction".to_string()];
        cells.extend((0..p).map(|i| fmt_f64(rollout.predictions[(i, j)])));
        match truth.filter(|t| k0 + j < t.len()) {
            Some(t) => {
                let mut se = 0.0;
                for i in 0..p {
                    let v = t.observables[(i, k0 + j)];
                    se += (rollout.predictions[(i, j)] - v).powi(2);
                    cells.push(fmt_f64(v));
                }
                cells.push(fmt_f64(se.sqrt()));
            }
            None => cells.extend(std::iter::repeat_n(String::new(), p + 1)),
        }
        row(&mut w, cells)?;
    }
    done(w)
}

/// `t,lambda`
pub fn write_ftle_csv<W: Write>(out: W, ftle: &FtleSeries) -> Result<()> {
    let mut w = writer(out);
    row(&mut w, ["t", "lambda"].map(String::from))?;
    for (t, l) in ftle.times.iter().zip(&ftle.lambda) {
        row(&mut w, [fmt_f64(*t), fmt_f64(*l)])?;
    }
    done(w)
}

/// Per-iteration solver diagnostics, one block per solved column.
pub fn write_trace_csv<W: Write>(out: W, traces: &[(usize, Vec<IterationRecord>)]) -> Result<()> {
    let mut w = writer(out);
    row(
        &mut w,
        [
            "column",
            "iteration",
            "gamma_post_plus",
            "gamma_post_minus",
            "gamma_ext_plus",
            "gamma_ext_minus",
            "alpha",
            "change",
            "clipped",
        ]
        .map(String::from),
    )?;
    for (col, trace) in traces {
        for r in trace {
            row(
                &mut w,
                [
                    col.to_string(),
                    r.iteration.to_string(),
                    fmt_f64(r.gamma_post_plus),
                    fmt_f64(r.gamma_post_minus),
                    fmt_f64(r.gamma_ext_plus),
                    fmt_f64(r.gamma_ext_minus),
                    fmt_f64(r.alpha),
                    fmt_f64(r.change),
                    u8::from(r.clipped).to_string(),
                ],
            )?;
        }
    }
    done(w)
}

pub fn write_report_json<W: Write>(out: W, report: &UncertaintyReport) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    serde_json::to_writer_pretty(&mut out, report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_csv_layout() {
        let pts = vec![
            WindowPoint {
                batch_size: 5,
                threshold: 0.1,
                window_pct: 100.0,
            },
            WindowPoint {
                batch_size: 10,
                threshold: 0.1,
                window_pct: 37.5,
            },
        ];
        let mut buf = Vec::new();
        write_window_csv(&mut buf, &pts).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "batch_size,threshold,window_pct\n5,0.1,100.0\n10,0.1,37.5\n"
        );
    }
}
