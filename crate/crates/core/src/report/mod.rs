//! Tables and figures: CSV matrices, deviation heatmaps, per-group
//! tables and age-sweep line plots. SVG output is deterministic for a given
//! input.

mod age_plot;
mod matrix;
mod heatmap;
mod svg;
mod table;

pub use matrix::{baseline_counts_csv, deviation_csv, means_csv, write_text};
pub use age_plot::emit_age_plot_svg;
pub use heatmap::{cell_color, emit_heatmap_svg, HeatmapSpec, DEFAULT_TOP_K};
pub use table::{emit_group_table, TableFormat};
