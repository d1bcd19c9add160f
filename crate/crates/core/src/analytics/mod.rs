//! Structural metrics, association statistics and success-rate tables.

mod metrics;
mod report;
mod stats;

use thiserror::Error;

pub use metrics::{compute_metrics, nsloc, StructuralMetrics};
pub use report::{
    aggregate_success, association_report, render_columns, AssociationReport, FeatureAssociation,
    SuccessRow, SuccessTable, FEATURES,
};
pub use stats::{
    chi_squared, cramers_v, quantile_bins, AssociationResult, BinWarning, Binning, ContingencyTable,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Col,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("{axis:?} {index} of the contingency table sums to zero")]
    ZeroMarginal { axis: Axis, index: usize },
    #[error("contingency table is {rows}x{cols}; need at least 2x2")]
    TooSmall { rows: usize, cols: usize },
    #[error("contingency table rows differ in length")]
    Ragged,
    #[error("no values to bin")]
    EmptyInput,
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("values must be finite")]
    NonFinite,
}
