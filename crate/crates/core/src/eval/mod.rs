//! Summary and sentiment metrics.

pub mod accuracy;
pub mod report;
pub mod rouge;

pub use accuracy::{accuracy_2class, accuracy_5class};
pub use report::{aggregate, evaluate_model, MetricLine, MetricReport};
pub use rouge::{lcs_len, rouge_l, rouge_n, RougeScore};
