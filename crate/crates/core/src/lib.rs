//! Tabular binary classification with swarm-based feature selection.
//!
//! The crate covers the full path from a raw CSV to cross-validated metrics:
//!
//! - [`dataset`]: CSV ingestion, inclusion/exclusion rules, imputation, encoding
//!   and synthetic datasets with planted signal.
//! - [`pso`]: binary particle swarm optimization wrapping a logistic-regression
//!   fitness.
//! - [`pca`]: variance-retaining principal component projection.
//! - [`classic`]: logistic regression, CART decision trees and random forests.
//! - [`autodiff`] and [`attention`]: a reverse-mode tensor tape and the two
//!   attention classifiers built on it.
//! - [`evaluation`]: metrics, ROC AUC and stratified k-fold cross-validation.
//! - [`experiment`]: configuration, the eight method combinations, report and
//!   model artifact output.

pub mod attention;
pub mod autodiff;
pub mod classic;
pub mod dataset;
pub mod evaluation;
pub mod experiment;
pub mod pca;
pub mod pso;
