//! Diagnostic figures (SVG) and the balance report.

pub mod kde;
pub mod plots;
pub mod report;
pub mod svg;

pub use kde::{kde, KdeCurve, KdeError};
pub use plots::{render_plots, PlotKind};
pub use report::{render_report, ReportInputs, Verbosity};
