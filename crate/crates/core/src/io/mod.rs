//! Configuration, data ingestion, run orchestration and output files.

mod config;
mod data;
mod output;
mod run;

pub use config::{
    parse_config, parse_config_str, Command, CvConfig, DataConfig, LocationColumns, ModelConfig, RunConfig,
    SupportConfig,
};
pub use data::{load_dataset, load_support, parse_dataset, LoadedData};
pub use output::{
    pool_chains, read_samples, write_cv, write_predictions, write_report, write_samples, write_simulation,
    write_summary,
};
pub use run::{build_spec, run, run_cv, run_fit, run_simulate};
