//! Balanced-growth-path solver for a multi-country trade-and-growth model.
//!
//! The economy: each country hosts a measure of monopolistic variety
//! producers (expanded by R&D out of profits) whose goods are traded as
//! intermediates, and a competitive final sector that combines labor with a
//! CES bundle of those intermediates and sells across borders under
//! Fréchet-distributed productivities and iceberg trade costs. On a balanced
//! growth path all countries' variety measures grow at one common rate, tied
//! down by free entry: the profit return per unit of variety value is
//! equalized across countries.
//!
//! Crate layout:
//!
//! - [`model`]: parameters, validation, and the solved-equilibrium types.
//! - [`gravity`]: price indices, bilateral trade shares, and the
//!   expenditure/revenue/profit flow accounting at given wages and measures.
//! - [`solver`]: the nested fixed-point solver (prices, then wages, then
//!   variety measures) producing a [`model::Equilibrium`].
//! - [`analysis`]: growth-rate decompositions, closed-form benchmark
//!   economies (autarky, frictionless), and welfare accounting for trade-cost
//!   counterfactuals.
//! - [`calibration`]: trade-cost inversion from observed flow tables and
//!   fitting of technology/R&D parameters to targets.
//! - [`cli`]: the command-line front end (`solve`, `counterfactual`,
//!   `calibrate`, `sweep`).
//!
//! Reporting conventions: world labor income is the numeraire (`Σ w_s L_s =
//! 1`) and the world variety measure is one (`Σ M_s = 1`). Growth rates,
//! shares, and per-country variety values are invariant to both choices.

pub mod analysis;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod gravity;
pub mod model;
pub mod numerics;
pub mod solver;

pub use analysis::{GrowthDecomposition, StaticSplit, WelfareReport};
pub use calibration::{CalibrationFit, CalibrationTargets, FitConfig};
pub use error::{Error, Result};
pub use model::{Equilibrium, ModelParams, ValidatedParams};
pub use solver::{solve_bgp, Solution, SolverConfig};
