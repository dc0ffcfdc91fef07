//! Token-flow semantics for activity diagrams.
//!
//! The crate is organised bottom-up:
//!
//! - [`syntax`]: abstract syntax, the `.ad` text format, validation, DOT.
//! - [`system`]: global system states (data, control and event stores),
//!   frames, traces and bounded trace generation.
//! - [`semantics`]: the variation-point interface ([`semantics::VariationBinding`])
//!   and the variant-independent step predicates and trace satisfaction check.
//! - [`token_game`]: a configuration-level executable semantics used as an
//!   independent oracle, with reachability analysis.
//! - [`atomic`]: diagrams as single method bodies built from atomic actions.
//! - [`methods`]: actions as methods on role objects, with a simulated
//!   object system.
//!
//! Exploration-heavy entry points take an [`Exec`] strategy; with the
//! `parallel` feature (on by default) [`Exec::Parallel`] fans work out over
//! rayon, otherwise it behaves exactly like [`Exec::Sequential`].

pub mod atomic;
pub mod corpus;
pub mod methods;
mod par;
pub mod semantics;
pub mod syntax;
pub mod system;
pub mod token_game;
pub mod tracefile;

pub use par::Exec;
