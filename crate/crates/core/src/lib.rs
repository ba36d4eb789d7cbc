//! Quantitative equational reasoning for combinatory logic and the simply
//! typed λ-calculus.
//!
//! The crate is layered bottom-up:
//!
//! - [`metric_core`]: exact extended rationals, finite metric spaces,
//!   hom-distances and exponentiability checks.
//! - [`term_syntax`]: sorts, signatures, terms, parsing and substitution.
//! - [`rewrite_engine`]: βη-normalization, weak CL reduction and bracket
//!   abstraction.
//! - [`term_metrics`]: projections and the distances between normal forms.
//! - [`quant_deduction`]: quantitative equations, theories and a derivation
//!   checker.
//! - [`finite_models`]: finite quantitative algebras, interpretation and
//!   satisfaction.
//! - [`corpus`]: shipped derivations, mutants and algebras.

pub mod corpus;
pub mod finite_models;
pub mod metric_core;
pub mod quant_deduction;
pub mod rewrite_engine;
pub mod term_metrics;
pub mod term_syntax;

pub use metric_core::{ExtReal, FiniteMetricSpace, SpaceClass};

pub use term_syntax::{Signature, Sort, Term};
