//! Core model types: primitive parameters, validation, and the equilibrium
//! objects produced by the solver.
//!
//! The economy has N countries. Each country s is endowed with labor `L_s`,
//! a technology scale `T_s` governing the Frechet distribution of final-good
//! productivities, and a stock `M_s` of intermediate varieties that grows
//! through R&D. Final producers combine labor (share `1 - alpha`) with a CES
//! composite of intermediate varieties (share `alpha`); varieties are shipped
//! at iceberg costs `tau[s][d] >= 1` and priced with the constant markup
//! `1/alpha` over the source country's final-good price.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Primitive parameters of an N-country economy.
///
/// The trade-cost matrix is indexed `tau[source][destination]`; it must be
/// symmetric with a unit diagonal and no entry below one. `T`, `L`, and the
/// rows of `tau` must all have the same length.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelParams {
    /// Trade elasticity (Frechet shape). Larger values mean less
    /// heterogeneity in productivity draws and more elastic trade flows.
    pub theta: f64,
    /// Elasticity of substitution across final-good varieties. Only enters
    /// the price level through the constant `gamma`; requires
    /// `theta + 1 - sigma > 0` and `sigma != 1`.
    pub sigma: f64,
    /// Intermediate-input share in final production, strictly inside (0, 1).
    pub alpha: f64,
    /// Household discount rate.
    pub rho: f64,
    /// R&D productivity: varieties created per unit of final good invested.
    pub psi: f64,
    /// Frechet scale of each country's technology distribution.
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    /// Labor endowments.
    #[serde(rename = "L")]
    pub l: Vec<f64>,
    /// Iceberg trade costs, `tau[source][destination]`.
    pub tau: Vec<Vec<f64>>,
    /// Country labels for reporting. May be left empty, in which case
    /// validation fills in `C0, C1, ...`.
    #[serde(default)]
    pub labels: Vec<String>,
}

/// Parameters that passed [`validate_params`], plus the derived constants
/// used everywhere downstream.
///
/// Dereferences to [`ModelParams`], so `vp.theta`, `vp.tau`, ... work
/// directly.
#[derive(Debug, Clone)]
pub struct ValidatedParams {
    params: ModelParams,
    /// Number of countries.
    pub n: usize,
    /// Markup elasticity `eta = 1/(1 - alpha)`; the CES exponent on
    /// variety prices is `1 - eta = -alpha/(1 - alpha)`.
    pub eta: f64,
    /// Frechet price-index constant
    /// `gamma = Gamma((theta + 1 - sigma)/theta)^(1/(1-sigma))`.
    pub gamma: f64,
}

impl std::ops::Deref for ValidatedParams {
    type Target = ModelParams;
    fn deref(&self) -> &ModelParams {
        &self.params
    }
}

impl ValidatedParams {
    /// The underlying primitive parameters.
    #[must_use]
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Whether every off-diagonal trade cost equals one (frictionless
    /// world). Uses exact comparison: frictionlessness is a modelling
    /// choice, not a numerical accident.
    #[must_use]
    pub fn is_frictionless(&self) -> bool {
        self.params
            .tau
            .iter()
            .all(|row| row.iter().all(|&t| t == 1.0))
    }

    /// A copy with the trade-cost matrix replaced (and re-validated).
    /// Used by counterfactuals and sweeps.
    pub fn with_tau(&self, tau: Vec<Vec<f64>>) -> Result<ValidatedParams> {
        let mut p = self.params.clone();
        p.tau = tau;
        validate_params(p)
    }
}

/// Relative tolerance used when checking that `tau` is symmetric. Entries
/// are user input that may have gone through decimal round-trips, so exact
/// equality would be too strict; anything looser than 1e-9 would let real
/// asymmetries through.
pub const TAU_SYMMETRY_RTOL: f64 = 1e-9;

fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::NonPositiveParam {
            name: name.to_string(),
            value,
        });
    }
    Ok(())
}

/// Validate primitives and attach derived constants.
///
/// Checks, in order: strict positivity and finiteness of every scalar and
/// vector entry; `alpha` strictly inside (0, 1); existence of the price
/// constant `gamma` (`theta + 1 - sigma > 0`, `sigma != 1`); equal lengths
/// of `T`, `L`, `labels` and a square `tau`; unit diagonal, symmetry, and
/// no entry below one in `tau`.
///
/// Validation is idempotent: re-validating the parameters of a
/// [`ValidatedParams`] yields the same result (labels are only filled in
/// when empty).
pub fn validate_params(mut params: ModelParams) -> Result<ValidatedParams> {
    check_positive("theta", params.theta)?;
    check_positive("sigma", params.sigma)?;
    check_positive("alpha", params.alpha)?;
    check_positive("rho", params.rho)?;
    check_positive("psi", params.psi)?;
    if params.alpha >= 1.0 {
        return Err(Error::NonPositiveParam {
            name: "1 - alpha".to_string(),
            value: 1.0 - params.alpha,
        });
    }

    let gamma = gamma_constant(params.theta, params.sigma)?;
    if params.sigma < 1.0 {
        log::warn!(
            "sigma = {} is below 1: final-good varieties are gross complements; \
             the price constant gamma = {gamma} is still well defined",
            params.sigma
        );
    }

    let n = params.t.len();
    if n == 0 {
        return Err(Error::DimensionMismatch {
            what: "T".to_string(),
            expected: 1,
            got: 0,
        });
    }
    if params.l.len() != n {
        return Err(Error::DimensionMismatch {
            what: "L".to_string(),
            expected: n,
            got: params.l.len(),
        });
    }
    if params.tau.len() != n {
        return Err(Error::DimensionMismatch {
            what: "tau (rows)".to_string(),
            expected: n,
            got: params.tau.len(),
        });
    }
    for (i, row) in params.tau.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch {
                what: format!("tau[{i}]"),
                expected: n,
                got: row.len(),
            });
        }
    }
    if params.labels.is_empty() {
        params.labels = (0..n).map(|i| format!("C{i}")).collect();
    } else if params.labels.len() != n {
        return Err(Error::DimensionMismatch {
            what: "labels".to_string(),
            expected: n,
            got: params.labels.len(),
        });
    }

    for (i, &t) in params.t.iter().enumerate() {
        check_positive(&format!("T[{i}]"), t)?;
    }
    for (i, &l) in params.l.iter().enumerate() {
        check_positive(&format!("L[{i}]"), l)?;
    }

    for i in 0..n {
        let d = params.tau[i][i];
        if d != 1.0 {
            return Err(Error::DiagonalTauNotOne { index: i, value: d });
        }
        for j in 0..n {
            let f = params.tau[i][j];
            if !f.is_finite() || f < 1.0 {
                return Err(Error::TradeCostBelowUnity {
                    row: i,
                    col: j,
                    value: f,
                });
            }
        }
        for j in (i + 1)..n {
            let fwd = params.tau[i][j];
            let rev = params.tau[j][i];
            if (fwd - rev).abs() > TAU_SYMMETRY_RTOL * fwd.abs().max(rev.abs()) {
                return Err(Error::AsymmetricTau {
                    row: i,
                    col: j,
                    forward: fwd,
                    reverse: rev,
                });
            }
        }
    }

    let eta = 1.0 / (1.0 - params.alpha);
    Ok(ValidatedParams {
        params,
        n,
        eta,
        gamma,
    })
}

/// The Frechet price-index constant
/// `gamma = Gamma((theta + 1 - sigma)/theta)^(1/(1-sigma))`.
///
/// Computed as `exp(ln Gamma(x) / (1 - sigma))` so the only rounding is in
/// `ln Gamma` itself. Fails when the Gamma argument is non-positive
/// (`theta + 1 - sigma <= 0`) or when `sigma = 1` (exponent undefined).
pub fn gamma_constant(theta: f64, sigma: f64) -> Result<f64> {
    let x = (theta + 1.0 - sigma) / theta;
    if !(theta.is_finite() && sigma.is_finite()) || x <= 0.0 || sigma == 1.0 {
        return Err(Error::GammaDiverges { theta, sigma });
    }
    Ok((ln_gamma(x) / (1.0 - sigma)).exp())
}

/// Bilateral trade shares at a point in time.
///
/// Both matrices are indexed `[source][destination]` and each destination
/// column sums to one: `lambda_f[s][d]` is the share of destination d's
/// final-good expenditure sourced from s, `lambda_m[s][d]` the analogous
/// share of d's intermediate-variety expenditure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShareMatrices {
    pub lambda_f: Vec<Vec<f64>>,
    pub lambda_m: Vec<Vec<f64>>,
}

impl ShareMatrices {
    /// Largest deviation of any destination column sum from one, across both
    /// matrices. A structural sanity check: shares are produced normalized,
    /// so anything above ~1e-12 indicates a bug upstream.
    #[must_use]
    pub fn max_column_sum_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for m in [&self.lambda_f, &self.lambda_m] {
            let n = m.len();
            for d in 0..n {
                let col: f64 = m.iter().map(|row| row[d]).sum();
                worst = worst.max((col - 1.0).abs());
            }
        }
        worst
    }
}

/// Per-country consistency diagnostics of a solved equilibrium.
///
/// `goods_market[s]` is labor income minus the labor share of final-sector
/// revenue, `w_s L_s - (1-alpha) (Lambda^F E)_s`; `trade_balance[s]` is net
/// exports computed from gross bilateral flows. The two are negatives of
/// each other in exact arithmetic, but are accumulated through independent
/// float paths so they serve as mutual cross-checks. Both vanish at an
/// equilibrium.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub goods_market: Vec<f64>,
    pub trade_balance: Vec<f64>,
}

impl ResidualReport {
    /// Largest absolute residual across both diagnostics.
    #[must_use]
    pub fn sup_norm(&self) -> f64 {
        crate::numerics::sup_norm(&self.goods_market)
            .max(crate::numerics::sup_norm(&self.trade_balance))
    }
}

/// A balanced-growth-path equilibrium.
///
/// Conventions: wages are normalized so world labor income is one
/// (`sum_s w_s L_s = 1`) and variety measures so the world measure is one
/// (`sum_s m[s] = 1`). The measure *level* is a state variable that drops
/// out of every reported object (prices scale as 1/level), so fixing the
/// world measure is a pure reporting convention.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Equilibrium {
    /// Wages, `sum_s w_s L_s = 1`.
    pub w: Vec<f64>,
    /// Final-good price indices.
    pub p: Vec<f64>,
    /// Composite intermediate-input price indices.
    pub pm: Vec<f64>,
    /// Variety measures, `sum_s m_s = 1`.
    pub m: Vec<f64>,
    /// Final-good expenditure per country (consumption + R&D + variety
    /// producers' inputs), the `E` of the flow system
    /// `E = wL + alpha Lambda^M Lambda^F E`.
    pub expenditure: Vec<f64>,
    /// Final-sector revenue per country, `R = Lambda^F E`.
    pub revenue: Vec<f64>,
    /// Aggregate variety profits per country,
    /// `Pi = (alpha/eta) Lambda^M R`.
    pub profits: Vec<f64>,
    /// Common profit return per unit of variety value,
    /// `R = sum_s Pi_s / sum_s m_s p_s`.
    pub r: f64,
    /// Common BGP growth rate of varieties, `g = psi * r - rho`.
    pub g: f64,
    /// Bilateral final and intermediate trade shares.
    pub shares: ShareMatrices,
    /// Market-clearing diagnostics (see [`ResidualReport`]).
    pub residuals: ResidualReport,
}

impl Equilibrium {
    /// Number of countries.
    #[must_use]
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Variety measures as shares of the world measure. Because the stored
    /// measures are already normalized to sum to one, this simply
    /// re-normalizes defensively.
    #[must_use]
    pub fn measure_shares(&self) -> Vec<f64> {
        let total: f64 = self.m.iter().sum();
        self.m.iter().map(|&m| m / total).collect()
    }

    /// Per-country variety value `m_s p_s` (invariant to the measure-level
    /// convention).
    #[must_use]
    pub fn variety_values(&self) -> Vec<f64> {
        self.m.iter().zip(&self.p).map(|(&m, &p)| m * p).collect()
    }
}

/// A matrix of bilateral final-good expenditure flows,
/// `value[source][destination]`, together with country labels.
///
/// Flows must be non-negative with a strictly positive diagonal (domestic
/// expenditure ratios are the backbone of trade-cost inference).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowTable {
    pub labels: Vec<String>,
    pub value: Vec<Vec<f64>>,
}

impl FlowTable {
    /// Validate and wrap a flow matrix.
    pub fn new(labels: Vec<String>, value: Vec<Vec<f64>>) -> Result<FlowTable> {
        let n = value.len();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                what: "flow labels".to_string(),
                expected: n,
                got: labels.len(),
            });
        }
        for (i, row) in value.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what: format!("flow row {i}"),
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NegativeFlow {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        for (i, row) in value.iter().enumerate() {
            if row[i] <= 0.0 || !row[i].is_finite() {
                return Err(Error::ZeroDiagonalFlow { index: i });
            }
        }
        Ok(FlowTable { labels, value })
    }

    /// Bilateral final-good flows implied by an equilibrium:
    /// `E^F[s][d] = lambda_f[s][d] * E_d`.
    pub fn from_equilibrium(eq: &Equilibrium, labels: &[String]) -> Result<FlowTable> {
        let n = eq.n();
        let value: Vec<Vec<f64>> = (0..n)
            .map(|s| {
                (0..n)
                    .map(|d| eq.shares.lambda_f[s][d] * eq.expenditure[d])
                    .collect()
            })
            .collect();
        FlowTable::new(labels.to_vec(), value)
    }

    /// Number of countries.
    #[must_use]
    pub fn n(&self) -> usize {
        self.value.len()
    }
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
mod tests {
    use super::*;

    /// A valid 2-country parameter set used as a mutation base.
    fn base_params() -> ModelParams {
        ModelParams {
            theta: 2.12,
            sigma: 0.76,
            alpha: 0.36,
            rho: 0.03,
            psi: 2.46,
            t: vec![1.0, 1.0],
            l: vec![1.0, 1.03],
            tau: vec![vec![1.0, 1.5], vec![1.5, 1.0]],
            labels: vec![],
        }
    }

    #[test]
    fn validation_accepts_base_params_and_fills_labels() {
        let vp = validate_params(base_params()).expect("base params are valid");
        assert_eq!(vp.n, 2);
        assert_eq!(vp.labels, vec!["C0".to_string(), "C1".to_string()]);
        assert!((vp.eta - 1.0 / (1.0 - 0.36)).abs() < 1e-15);
    }

    #[test]
    fn validation_is_idempotent() {
        let vp = validate_params(base_params()).expect("valid");
        let again = validate_params(vp.params().clone()).expect("still valid");
        assert_eq!(vp.params(), again.params());
        assert_eq!(vp.eta.to_bits(), again.eta.to_bits());
        assert_eq!(vp.gamma.to_bits(), again.gamma.to_bits());
    }

    #[test]
    fn eta_exceeds_one_for_alpha_in_unit_interval() {
        // eta = 1/(1-alpha) > 1 and 1 - eta = -alpha/(1-alpha), exactly.
        for k in 1..1000 {
            let alpha = k as f64 / 1000.0;
            let mut p = base_params();
            p.alpha = alpha;
            let vp = validate_params(p).expect("alpha in (0,1) is valid");
            assert!(
                vp.eta > 1.0,
                "eta must exceed 1, got {} at alpha={alpha}",
                vp.eta
            );
            let lhs = 1.0 - vp.eta;
            let rhs = -alpha / (1.0 - alpha);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0),
                "1-eta = {lhs} but -alpha/(1-alpha) = {rhs} at alpha={alpha}"
            );
        }
    }

    #[test]
    fn example_alpha_gives_printed_eta() {
        let mut p = base_params();
        p.alpha = 0.36;
        let vp = validate_params(p).expect("valid");
        assert!((vp.eta - 1.5625).abs() < 1e-12, "eta = {}", vp.eta);
    }

    #[test]
    fn asymmetric_tau_is_rejected_with_indices() {
        let mut p = base_params();
        p.tau[0][1] = 1.8;
        match validate_params(p) {
            Err(Error::AsymmetricTau { row: 0, col: 1, .. }) => {}
            other => panic!("expected AsymmetricTau, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_tau_must_be_one() {
        let mut p = base_params();
        p.tau[1][1] = 1.01;
        match validate_params(p) {
            Err(Error::DiagonalTauNotOne { index: 1, .. }) => {}
            other => panic!("expected DiagonalTauNotOne, got {other:?}"),
        }
    }

    #[test]
    fn trade_costs_below_one_are_rejected() {
        let mut p = base_params();
        p.tau[0][1] = 0.9;
        p.tau[1][0] = 0.9;
        match validate_params(p) {
            Err(Error::TradeCostBelowUnity { row: 0, col: 1, .. }) => {}
            other => panic!("expected TradeCostBelowUnity, got {other:?}"),
        }
    }

    #[test]
    #[allow(clippy::type_complexity)]
    fn nonpositive_scalars_are_rejected() {
        let cases: [(&str, fn(&mut ModelParams)); 6] = [
            ("theta", |p| p.theta = 0.0),
            ("rho", |p| p.rho = -0.01),
            ("psi", |p| p.psi = f64::NAN),
            ("alpha", |p| p.alpha = 1.0),
            ("T[0]", |p| p.t[0] = 0.0),
            ("L[1]", |p| p.l[1] = -2.0),
        ];
        for (name, set) in cases {
            let mut p = base_params();
            set(&mut p);
            assert!(
                matches!(validate_params(p), Err(Error::NonPositiveParam { .. })),
                "{name} should be rejected"
            );
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let mut p = base_params();
        p.l = vec![1.0];
        assert!(matches!(
            validate_params(p),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut p = base_params();
        p.tau = vec![vec![1.0, 1.5, 2.0], vec![1.5, 1.0, 2.0]];
        assert!(matches!(
            validate_params(p),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut p = base_params();
        p.labels = vec!["A".to_string()];
        assert!(matches!(
            validate_params(p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn gamma_requires_positive_argument_and_sigma_not_one() {
        // theta + 1 - sigma <= 0: argument of Gamma is non-positive.
        assert!(matches!(
            gamma_constant(2.0, 3.5),
            Err(Error::GammaDiverges { .. })
        ));
        assert!(matches!(
            gamma_constant(2.0, 1.0),
            Err(Error::GammaDiverges { .. })
        ));
        assert!(gamma_constant(2.0, 2.5).is_ok());
    }

    #[test]
    fn gamma_constant_matches_analytic_values() {
        // sigma = 2 makes the exponent -1 and the argument (theta - 1)/theta.
        // theta = 2: gamma = Gamma(1/2)^(-1) = 1/sqrt(pi).
        let g = gamma_constant(2.0, 2.0).expect("valid");
        let expected = 1.0 / std::f64::consts::PI.sqrt();
        assert!(
            (g - expected).abs() < 1e-14 * expected,
            "gamma = {g}, expected {expected}"
        );
        // sigma = 0.5, theta = 0.5: argument (0.5+1-0.5)/0.5 = 2,
        // gamma = Gamma(2)^(1/0.5) = 1^2 = 1.
        let g = gamma_constant(0.5, 0.5).expect("valid");
        assert!((g - 1.0).abs() < 1e-14, "gamma = {g}");
    }

    #[test]
    fn flow_table_rejects_bad_entries() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let bad_diag = vec![vec![0.0, 1.0], vec![1.0, 2.0]];
        assert!(matches!(
            FlowTable::new(labels.clone(), bad_diag),
            Err(Error::ZeroDiagonalFlow { index: 0 })
        ));
        let negative = vec![vec![1.0, -0.5], vec![1.0, 2.0]];
        assert!(matches!(
            FlowTable::new(labels.clone(), negative),
            Err(Error::NegativeFlow { row: 0, col: 1, .. })
        ));
        let ragged = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(matches!(
            FlowTable::new(labels, ragged),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
