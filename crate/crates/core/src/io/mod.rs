//! File formats: long-format CSV ingestion, the binary tensor format, and
//! report and factor emission.

mod binary;
mod csv;
mod report;

pub use self::binary::{decode_tensor, encode_tensor, read_tensor, write_tensor, MAGIC};
pub use self::csv::{
    parse_long_csv, read_gene_list, read_long_csv, read_matrix_csv, write_matrix_csv, AxisLabels,
    CsvOptions, Impute, LabeledMatrix,
};
pub use self::report::{
    fmt_f64, write_json, write_model_outputs, write_scores_csv, write_sim_report, ModelSummary,
    MODEL_SCHEMA_VERSION,
};
