//! Cell social-network analysis for tissue image classification.
//!
//! Nuclei centroids become nodes of a radius-bounded kNN graph, seven
//! social-network measures are computed per node, each measure is summarised
//! as a histogram-statistics vector, and an RBF-kernel SVM grades images under
//! three patch-to-image aggregation scenarios.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `std` for `std::error::Error`
//! integration and `parallel` for rayon-backed shortest-path traversals.
#![cfg_attr(not(feature = "std"), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod aggregation;
pub mod builder;
pub mod error;
pub mod features;
pub mod folds;
pub mod graph;
pub mod kdtree;
pub mod measures;
pub mod ml;
pub mod model;
mod num;

pub use builder::{build_graph, knn_within_radius, BuildConfig, Symmetrization};
pub use error::{Error, Result};
pub use features::{featurize, feature_layout, EdgeMode, FeatureConfig, FeatureKind, LayoutEntry};
pub use graph::CellGraph;
pub use measures::{compute_all_measures, Measure, MeasureConfig, MeasureTable};
pub use model::{DatasetManifest, FeatureVector, Grade, Level, PointSet};
