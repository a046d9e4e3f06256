//! File formats: series and snapshot CSV, the model container, pipeline configs and result files.

mod config;
mod model_file;
mod report;
mod table;

pub use config::{
    ExternalConfig, FtleConfig, InputSignal, PipelineConfig, RbfSampling, SimulationConfig, SweepConfig, SystemKind,
};
pub use model_file::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use report::{
    write_ftle_csv, write_prediction_csv, write_report_json, write_trace_csv, write_variance_csv, write_window_csv,
};
pub use table::{
    fmt_f64, ingest_csv, ingest_csv_file, load_series, project_pod_observables, read_series_csv, save_series,
    write_series_csv, write_snapshot_csv, CsvOptions, PodProjection, SnapshotDataset,
};
