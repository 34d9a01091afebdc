//! Corpus construction and evaluation toolkit for vision-language training data.
//!
//! The crate covers the whole data path:
//!
//! * [`pdf_figures`] pairs embedded PDF images with the nearest caption block below them.
//! * [`wiki_harvest`] queries a MediaWiki search API and pulls captioned images from articles.
//! * [`refine`] rewrites raw captions through a chat-completions endpoint.
//! * [`corpus`] stores, splits, exports and renders image-text records.
//! * [`stats`] builds token-count and image-resolution histograms.
//! * [`instruct_eval`] builds mechanics instruction records and scores model answers.
//! * [`model_arith`] holds the layer-merge plan arithmetic and top-k gating math.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel` feature disabled every
//! path runs sequentially.

pub mod corpus;
pub mod exec;
pub mod http;
pub mod instruct_eval;
pub mod model_arith;
pub mod pdf_figures;
pub mod refine;
pub mod stats;
pub mod util;
pub mod wiki_harvest;

pub use exec::Exec;

/// Version string recorded in manifests.
pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
