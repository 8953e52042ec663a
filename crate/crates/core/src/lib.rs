//! Global stroke features and age-group detection for child touch/stylus
//! interaction logs.
//!
//! The crate turns raw interaction sessions into a fixed 148-entry global
//! feature vector, selects feature subsets (Fisher ratio filter, floating
//! forward search and a genetic algorithm), balances classes with SMOTE and
//! evaluates seven classifiers under a subject-disjoint protocol.
//!
//! Stage map:
//!
//! * [`trace`]: sessions, subject metadata, parsing, validation, strokes
//! * [`region`]: the tree-margin predicate
//! * [`features`]: the 148-entry feature layout and its extractors
//! * [`dataset`]: feature matrices, splits, folds, standardization, SMOTE
//! * [`selection`]: FDR, SFFS and GA feature selectors
//! * [`classifiers`]: NB, LR, KNN, RF, AdaBoost-SAMME, SVM (SMO) and MLP
//! * [`pipeline`]: end-to-end runs and report bundles
//! * [`synth`]: deterministic synthetic cohorts

pub mod classifiers;
pub mod dataset;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod region;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
