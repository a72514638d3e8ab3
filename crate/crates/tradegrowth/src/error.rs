//! Error type shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while validating parameters, solving for a
/// balanced growth path, or running the analysis and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or vector entry that must be strictly positive (and finite)
    /// is not.
    #[error("parameter `{name}` must be strictly positive and finite, got {value}")]
    NonPositiveParam { name: String, value: f64 },

    /// Two containers that must agree in length do not.
    #[error("dimension mismatch for `{what}`: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    /// The trade-cost matrix is not symmetric.
    #[error("trade costs must be symmetric: tau[{row}][{col}] = {forward} but tau[{col}][{row}] = {reverse}")]
    AsymmetricTau {
        row: usize,
        col: usize,
        forward: f64,
        reverse: f64,
    },

    /// A diagonal trade cost differs from one.
    #[error("domestic trade must be frictionless: tau[{index}][{index}] = {value}, expected 1")]
    DiagonalTauNotOne { index: usize, value: f64 },

    /// An off-diagonal trade cost is below one (shipping cannot create goods).
    #[error("trade cost tau[{row}][{col}] = {value} is below 1")]
    TradeCostBelowUnity { row: usize, col: usize, value: f64 },

    /// The Frechet price-distribution constant gamma = Gamma((theta+1-sigma)/theta)^(1/(1-sigma))
    /// is undefined: the Gamma argument is non-positive, or sigma = 1 makes
    /// the outer exponent blow up.
    #[error("price-index constant diverges for theta = {theta}, sigma = {sigma}: requires theta + 1 - sigma > 0 and sigma != 1")]
    GammaDiverges { theta: f64, sigma: f64 },

    /// A frictionless-world quantity was requested for parameters whose
    /// trade-cost matrix is not identically one.
    #[error("operation requires tau identically 1, but tau[{row}][{col}] = {value}")]
    TauNotUniform { row: usize, col: usize, value: f64 },

    /// Welfare comparisons need the same countries and the same non-shock
    /// parameters on both sides.
    #[error("equilibria are not comparable: {what}")]
    CountryMismatch { what: String },

    /// An analysis routine was handed an equilibrium whose stored
    /// market-clearing residuals exceed the guard tolerance, so its
    /// accounting identities cannot be trusted.
    #[error("equilibrium residuals too large: sup-norm {residual:e} exceeds {tol:e}")]
    ResidualsTooLarge { residual: f64, tol: f64 },

    /// A flow table has a zero (or non-finite) diagonal entry, so expenditure
    /// ratios are undefined.
    #[error("flow table has no domestic expenditure for country {index}: diagonal must be strictly positive")]
    ZeroDiagonalFlow { index: usize },

    /// A flow table has a negative entry.
    #[error("flow table entry [{row}][{col}] = {value} is negative")]
    NegativeFlow { row: usize, col: usize, value: f64 },

    /// A fixed-point loop ran out of iterations.
    #[error("{loop_name} fixed point did not reach tolerance {tol:e} after {iters} iterations (last delta {delta:e})")]
    MaxIterExceeded {
        loop_name: &'static str,
        iters: usize,
        tol: f64,
        delta: f64,
    },

    /// A fixed-point iterate produced a non-finite or absurdly large value.
    #[error("{loop_name} fixed point diverged at iteration {iter}: {detail}")]
    DivergenceDetected {
        loop_name: &'static str,
        iter: usize,
        detail: String,
    },

    /// The full solve ended without meeting the outer tolerance; the trace is
    /// attached so callers can report partial progress.
    #[error("solver did not converge: outer delta {last_delta:e} after {iters} iterations (tolerance {tol:e})")]
    NotConverged {
        iters: usize,
        tol: f64,
        last_delta: f64,
        trace: Box<crate::solver::SolveTrace>,
    },

    /// The calibration search could not improve the objective.
    #[error("calibration search failed: {reason}")]
    SearchFailed { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
