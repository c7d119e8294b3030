//! Nearest line projection (NLP) subspace learning.
//!
//! A linear map `W` is learned so that each projected training sample lies
//! close to the lines spanned by pairs of its nearest input-space
//! neighbors. PCA and Locality Preserving Projections are provided as
//! baselines, together with nearest-neighbor / nearest-line classifiers and
//! a repeated random-split evaluation harness.

pub mod baselines;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod fsutil;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod neighbors;
pub mod nlp;
pub mod synthetic;

pub use baselines::{BaselineConfig, BaselineMethod, HeatSigma};
pub use dataio::{center, random_split, Dataset, SplitSpec};
pub use error::{Error, Result};
pub use eval::{run_experiment, Classifier, EvalReport, PairScope};
pub use model::{MethodConfig, ProjectionMatrix, TrainedModel};
pub use neighbors::{build_neighbor_lines, NeighborLineIndex};
pub use nlp::{train, EigenOrder, InitKind, ScatterOperator, TrainConfig};
