//! Subset scanning over neural network activations.
//!
//! An input's activations are compared node by node against a background of
//! activations from clean inputs, giving one empirical p-value range per
//! node. The subset of nodes with the most evidence of being anomalous is
//! then found exactly with a Berk-Jones nonparametric scan statistic, by
//! scoring only the prefixes of each alpha's priority ordering.
//!
//! ```
//! use subscan_core::{scan, NetworkLayout, PValueRange, RangeVector, ScanConfig};
//!
//! let ranges: RangeVector = [(0.0, 0.2), (0.4, 0.6), (0.0, 0.2)]
//!     .into_iter()
//!     .map(|(lo, hi)| PValueRange::new(lo, hi).unwrap())
//!     .collect();
//! let layout = NetworkLayout::single("all", 3).unwrap();
//! let result = scan(&ranges, &ScanConfig::default(), &layout).unwrap();
//! assert_eq!(result.subset, vec![0, 2]);
//! ```

pub mod analysis;
pub mod error;
pub mod oracle;
pub mod pvalue;
pub mod scan;
pub mod score;
pub mod store;

pub use analysis::{
    auc, evaluate_detection, null_auc_sd, representation, synthesize, DetectionReport,
    RepresentationReport, ScoredGroups, SynthData, SynthSpec,
};
pub use error::{Error, Result};
pub use oracle::{exhaustive_scan, OracleResult};
pub use pvalue::{
    beat_tie_counts, pvalue_range, PValueRange, RangeSource, RangeVector, SortedBackground,
};
pub use scan::{
    candidate_alphas, per_layer_counts, scan, scan_per_layer, score_all_nodes, AlphaPolicy,
    ScanConfig, ScanResult,
};
pub use score::{berk_jones, kl_bernoulli, priority, BerkJones, ScanStatistic, SubsetStats};
pub use store::{
    load_acts, load_layout, save_acts, ActivationMatrix, BackgroundActivations, EvaluationBatch,
    NetworkLayout,
};
