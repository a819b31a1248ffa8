//! Imbalance-aware metrics and the brute-force Bayes oracle.

mod metrics;
mod oracle;

pub use metrics::{
    bacc, ber, confusion, default_group_boundaries, gm, group_accuracies, ConfusionMatrix,
    MetricsRecord,
};
pub use oracle::{bayes_oracle, OracleClassifier, OracleTarget};
