//! Gradient-boosted model trees and bagged ensembles of them.
//!
//! A [`BoostTree`](boosttree::BoostTree) is a single decision tree whose every
//! node carries a regression model (ridge, ELM, or linear ε-SVR). A sample is
//! routed to a leaf and the outputs of all node models along the root-to-leaf
//! path are summed. Nodes are split greedily by a second-order gain and node
//! models are fitted to the residual (regression) or to Newton working
//! responses (classification) of the path ensemble above them.
//!
//! A [`Forest`](forest::Forest) bags many such trees, each trained on a
//! bootstrap replica with hyperparameters drawn at random from a
//! [`ParameterPool`](boosttree::ParameterPool). The same machinery can bag
//! plain CART trees for comparison.
//!
//! ```
//! use boostforest::data::{Dataset, Matrix, Task};
//! use boostforest::forest::{train_forest, BaseKind, ForestConfig};
//!
//! let x: Vec<f64> = (0..60).map(|i| i as f64 / 60.0).collect();
//! let y: Vec<f64> = x.iter().map(|v| (6.0 * v).sin()).collect();
//! let ds = Dataset::new(Matrix::new(60, 1, x).unwrap(), y, Task::Regression).unwrap();
//!
//! let config = ForestConfig { n_estimators: 5, ..ForestConfig::new(BaseKind::BoostTreeRidge) };
//! let forest = train_forest(&ds, &config, 7).unwrap();
//! let pred = forest.predict_dataset(&ds).unwrap();
//! assert_eq!(pred.len(), 60);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boosttree;
pub mod cart;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod linalg;
pub mod losses;
pub mod model_file;
pub mod node_models;

pub use error::{Error, Result};
