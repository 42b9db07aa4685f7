//! Group means, deviation scores, observed baselines, age sweeps and
//! AUROC.
//!
//! For a label and test groups `1..G` with mean probabilities `p_i`, the
//! deviation of group `i` is `p_i - (Σ_{j≠i} p_j) / (G - 1)`. Deviations of
//! one label sum to zero over the groups. Summation order is fixed (groups
//! by name, samples by id), so results are reproducible bit for bit.

mod age;
mod auroc;
mod baseline;
mod file;
mod means;

pub use age::{age_curves, age_sweep, AgeBucket, AgeCurve};
pub use auroc::auroc;
pub use baseline::{baseline_distribution, baseline_distribution_with, BaselineDistribution, NO_MENTION};
pub use file::{AnalysisFile, ANALYSIS_FILE, BASELINE_FILE};
pub use means::{aggregate, deviation, DeviationMatrix, GroupMeans};
