//! Simulation and exhaustive verification of terminating grid exploration by
//! myopic luminous robots.
//!
//! The pieces, bottom up: [`grid`] (nodes, colors, configurations,
//! symmetries), [`observation`] (local views), [`dsl`] (the rule language),
//! [`engine`] (schedulers and traces), [`checker`] (state-space search) and
//! [`catalog`] (the bundled algorithms).

pub mod catalog;
pub mod checker;
pub mod cli;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod grid;
pub mod observation;

pub use catalog::{split_color, CatalogEntry};
pub use checker::{check, check_range, CheckReport, Verdict};
pub use dsl::{parse_algorithm, render_algorithm, AlgorithmSpec, Rule};
pub use engine::{Engine, ExecState, Outcome, SchedulerPolicy, SynchronyModel, Trace};
pub use error::{DslError, Error, Result};
pub use grid::{Color, ColorBag, Configuration, Grid, NodeId, Symmetry};
pub use observation::{Orientation, View};
