//! Text-as-data toolkit for climate-policy documents: theme classification,
//! evaluation, country-year indicators, correspondence analysis and
//! two-way fixed-effects panel regression.

pub mod ca;
pub mod indicators;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod panel;
pub mod report;
pub mod synth;
pub mod textclf;
pub mod theme;

pub use theme::{CountryCode, Theme, ThemeSet};
