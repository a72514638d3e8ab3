//! Growth accounting and welfare comparison across balanced growth paths.
//!
//! Everything here is a pure function of solved equilibria (plus the
//! parameters that produced them): per-country growth-rate accounting,
//! closed-form benchmark growth rates for the two limit economies (autarky
//! and a frictionless world) and for symmetric worlds at arbitrary trade
//! costs, and the decomposition of the welfare change between two balanced
//! growth paths into transitional, static, and dynamic components.
//!
//! # Growth accounting conventions
//!
//! On a balanced growth path the growth rate is tied to the return on
//! variety creation: `g = psi * r - rho`, where `r` is the profit return
//! per unit of variety value. Evaluated per country, `r_s =
//! Pi_s / (P_s M_s)`, and the solver equalizes these across countries. The
//! income-based benchmark rate `psi * rho * (w_s L_s + Pi_s) / (P_s M_s)`
//! (growth if a fixed fraction `rho` of all income were invested) is also
//! reported, split into its labor-income and global-profit parts; the
//! labor-income part is evaluated through an exact share identity
//!
//! ```text
//! w_s / P_s = gamma^(-1/(1-alpha)) * alpha^(eta-1)
//!             * (T_s / lf_ss)^(1/(theta(1-alpha))) * (M_s / lm_ss),
//! ```
//!
//! so that its technology-and-selection factor and its variety-access
//! factor are visible separately.
//!
//! Countries holding a zero variety measure earn the world return on their
//! savings; their consumption grows at the common rate, while their
//! per-unit-measure objects (income per unit of variety value) are reported
//! as IEEE infinities, which is the true limit.

use crate::error::{Error, Result};
use crate::model::{Equilibrium, ValidatedParams};

/// Residual guard: analysis routines refuse equilibria whose stored
/// market-clearing residuals exceed this sup-norm.
pub const RESIDUAL_GUARD: f64 = 1e-6;

/// Tolerance below which a total welfare change is treated as zero and the
/// dynamic share reported as undefined instead of a ratio of noise.
pub const WELFARE_TOTAL_EPS: f64 = 1e-9;

// ============================================================================
// Growth-rate accounting
// ============================================================================

/// Growth accounting for one country at a solved equilibrium.
///
/// `labor_income + global_profit = investment_income_rate` holds to float
/// precision; the two sides go through independent arithmetic (share
/// identity vs. direct flow sums), so their agreement is a consistency
/// check of the equilibrium itself.
#[derive(Debug, Clone)]
pub struct CountryGrowth {
    /// Growth rate supported by this country's variety-creation return,
    /// `psi * Pi_s / (P_s M_s) - rho`. Equal across countries at a
    /// converged equilibrium. A country with `M_s = 0` earns the world
    /// return instead, so its entry carries the common world rate.
    pub total: f64,
    /// Labor-income part of the benchmark rate,
    /// `psi * rho * w_s L_s / (P_s M_s)`, evaluated through the share
    /// identity as `psi * rho * ek_factor * variety_access_factor`.
    pub labor_income: f64,
    /// Profit part of the benchmark rate, `psi * rho * Pi_s / (P_s M_s)`,
    /// where `Pi_s` sums monopoly profits on sales to every destination.
    pub global_profit: f64,
    /// The benchmark rate itself: `psi * rho * (w_s L_s + Pi_s) / (P_s M_s)`,
    /// the growth rate the economy would sustain if the fixed fraction
    /// `rho` of all income were invested in variety creation.
    pub investment_income_rate: f64,
    /// Technology-and-selection factor `(T_s / lf_ss)^(1/(theta(1-alpha)))`:
    /// the real-wage contribution of comparative advantage, read off the
    /// domestic final-good share.
    pub ek_factor: f64,
    /// Variety-access factor
    /// `gamma^(-1/(1-alpha)) * alpha^(eta-1) * L_s / lm_ss`: the real-wage
    /// contribution of the effective variety range, read off the domestic
    /// intermediate share.
    pub variety_access_factor: f64,
    /// The share-only core `L_s / lm_ss` of the variety-access factor
    /// (no markup or price-distribution constants).
    pub domestic_share_factor: f64,
}

/// Per-country growth accounting at a solved equilibrium.
#[derive(Debug, Clone)]
pub struct GrowthDecomposition {
    pub countries: Vec<CountryGrowth>,
}

impl GrowthDecomposition {
    /// Spread `max_s g_s - min_s g_s` of the per-country rates (zero-measure
    /// countries excluded: they carry the world rate by convention).
    #[must_use]
    pub fn dispersion(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.countries {
            lo = lo.min(c.total);
            hi = hi.max(c.total);
        }
        hi - lo
    }

    /// Relative dispersion `stdev_s(g_s) / |mean_s g_s|` of the per-country
    /// rates.
    #[must_use]
    pub fn relative_dispersion(&self) -> f64 {
        let n = self.countries.len() as f64;
        let mean = self.countries.iter().map(|c| c.total).sum::<f64>() / n;
        let var = self
            .countries
            .iter()
            .map(|c| (c.total - mean).powi(2))
            .sum::<f64>()
            / n;
        var.sqrt() / mean.abs()
    }
}

fn check_dimensions(vp: &ValidatedParams, eq: &Equilibrium) -> Result<()> {
    if eq.n() != vp.n {
        return Err(Error::DimensionMismatch {
            what: "equilibrium countries".to_string(),
            expected: vp.n,
            got: eq.n(),
        });
    }
    Ok(())
}

fn check_residuals(eq: &Equilibrium) -> Result<()> {
    let sup = eq.residuals.sup_norm();
    if sup.is_nan() || sup > RESIDUAL_GUARD {
        return Err(Error::ResidualsTooLarge {
            residual: sup,
            tol: RESIDUAL_GUARD,
        });
    }
    Ok(())
}

/// Per-country growth accounting at a converged equilibrium.
///
/// Errors if the equilibrium's stored market-clearing residuals exceed
/// [`RESIDUAL_GUARD`] (the accounting identities below are only meaningful
/// at market clearing).
pub fn growth_rate(vp: &ValidatedParams, eq: &Equilibrium) -> Result<GrowthDecomposition> {
    check_dimensions(vp, eq)?;
    check_residuals(eq)?;
    let inv_theta_one_minus_alpha = 1.0 / (vp.theta * (1.0 - vp.alpha));
    let wage_constant = vp.gamma.powf(-1.0 / (1.0 - vp.alpha)) * vp.alpha.powf(vp.eta - 1.0);
    let countries = (0..vp.n)
        .map(|s| {
            let variety_value = eq.m[s] * eq.p[s];
            let total = if eq.m[s] > 0.0 {
                vp.psi * eq.profits[s] / variety_value - vp.rho
            } else {
                eq.g
            };
            let ek_factor = (vp.t[s] / eq.shares.lambda_f[s][s]).powf(inv_theta_one_minus_alpha);
            let domestic_share_factor = vp.l[s] / eq.shares.lambda_m[s][s];
            let variety_access_factor = wage_constant * domestic_share_factor;
            let labor_income = vp.psi * vp.rho * ek_factor * variety_access_factor;
            let global_profit = vp.psi * vp.rho * eq.profits[s] / variety_value;
            let investment_income_rate =
                vp.psi * vp.rho * (eq.w[s] * vp.l[s] + eq.profits[s]) / variety_value;
            log::debug!(
                "country {s}: labor-income rate {labor_income:e} under the exact wage constant; \
                 alternative constant conventions give {:e} (alpha^(1-eta), no gamma) and {:e} \
                 (share core only)",
                vp.psi * vp.rho * ek_factor * vp.alpha.powf(1.0 - vp.eta) * domestic_share_factor,
                vp.psi * vp.rho * ek_factor * domestic_share_factor,
            );
            CountryGrowth {
                total,
                labor_income,
                global_profit,
                investment_income_rate,
                ek_factor,
                variety_access_factor,
                domestic_share_factor,
            }
        })
        .collect();
    Ok(GrowthDecomposition { countries })
}

/// Growth rate implied by treating each country as a closed economy:
/// `(alpha psi / eta) * Y_s / M_s - rho` with `Y_s = E_s / P_s` gross final
/// output. Meaningful when cross-border shares are negligible; logs a
/// warning otherwise.
#[must_use]
pub fn autarky_growth_rate(vp: &ValidatedParams, eq: &Equilibrium) -> Vec<f64> {
    let worst_cross = (0..eq.n())
        .flat_map(|s| (0..eq.n()).filter(move |&d| d != s).map(move |d| (s, d)))
        .map(|(s, d)| {
            eq.shares.lambda_f[s][d]
                .abs()
                .max(eq.shares.lambda_m[s][d].abs())
        })
        .fold(0.0_f64, f64::max);
    if worst_cross >= 1e-6 {
        log::warn!(
            "autarky growth formula applied to an open economy: largest cross-border share {worst_cross:e}"
        );
    }
    let scale = vp.alpha * vp.psi / vp.eta;
    (0..eq.n())
        .map(|s| scale * (eq.expenditure[s] / eq.p[s]) / eq.m[s] - vp.rho)
        .collect()
}

/// Closed-economy growth rates from primitives alone:
/// `psi * alpha^eta * gamma^(-1/(1-alpha)) * T_s^(1/(theta(1-alpha))) * L_s - rho`.
///
/// This is [`autarky_growth_rate`] with the equilibrium objects substituted
/// out analytically, so it needs no solve; it serves as an independent
/// benchmark for near-autarky solutions.
#[must_use]
pub fn autarky_growth_closed_form(vp: &ValidatedParams) -> Vec<f64> {
    let constant = vp.psi * vp.alpha.powf(vp.eta) * vp.gamma.powf(-1.0 / (1.0 - vp.alpha));
    let exponent = 1.0 / (vp.theta * (1.0 - vp.alpha));
    (0..vp.n)
        .map(|s| constant * vp.t[s].powf(exponent) * vp.l[s] - vp.rho)
        .collect()
}

/// World growth rate of a frictionless economy (`tau` identically one):
/// `(alpha psi / eta) * (sum_d Y_d) / (sum_d M_d) - rho`, the closed-economy
/// formula applied to the integrated world.
///
/// Errors with [`Error::TauNotUniform`] when any trade cost differs from
/// one.
pub fn frictionless_growth_rate(vp: &ValidatedParams, eq: &Equilibrium) -> Result<f64> {
    check_dimensions(vp, eq)?;
    for (s, row) in vp.tau.iter().enumerate() {
        for (d, &t) in row.iter().enumerate() {
            if t != 1.0 {
                return Err(Error::TauNotUniform {
                    row: s,
                    col: d,
                    value: t,
                });
            }
        }
    }
    let world_output: f64 = (0..eq.n()).map(|d| eq.expenditure[d] / eq.p[d]).sum();
    let world_measure: f64 = eq.m.iter().sum();
    Ok(vp.alpha * vp.psi / vp.eta * world_output / world_measure - vp.rho)
}

/// Closed-form growth rate of a world of `vp.n` identical countries at the
/// uniform trade cost `tau`:
///
/// ```text
/// g(tau) = psi * alpha^eta * gamma^(-1/(1-alpha))
///          * [T (1 + (N-1) tau^(-theta))]^(1/(theta(1-alpha)))
///          * (1 + (N-1) tau^(1-eta)) * L  -  rho
/// ```
///
/// At `tau = 1` this is the frictionless world rate, as `tau -> inf` it
/// falls to one member's closed-economy rate, and it decreases strictly in
/// `tau` throughout. Uses `T = vp.t[0]`, `L = vp.l[0]`; logs a warning when
/// the parameter vectors are not actually uniform.
#[must_use]
pub fn symmetric_growth_curve(vp: &ValidatedParams, tau: f64) -> f64 {
    let uniform = vp.t.iter().all(|&t| t == vp.t[0]) && vp.l.iter().all(|&l| l == vp.l[0]);
    if !uniform {
        log::warn!("symmetric growth curve evaluated with non-uniform T or L; using country 0's");
    }
    let n1 = (vp.n - 1) as f64;
    let goods_access = 1.0 + n1 * tau.powf(-vp.theta);
    let variety_access = 1.0 + n1 * tau.powf(1.0 - vp.eta);
    vp.psi
        * vp.alpha.powf(vp.eta)
        * vp.gamma.powf(-1.0 / (1.0 - vp.alpha))
        * (vp.t[0] * goods_access).powf(1.0 / (vp.theta * (1.0 - vp.alpha)))
        * variety_access
        * vp.l[0]
        - vp.rho
}

/// Real consumption per country on the balanced growth path:
/// `C_s = rho * M_s / psi + w_s L_s / P_s` (the permanent-income rule of a
/// log-utility household: consume `rho` times total wealth, where real
/// asset wealth is `M_s / psi` and human wealth capitalizes to labor income
/// over the effective discount rate `rho`).
#[must_use]
pub fn consumption_level(vp: &ValidatedParams, eq: &Equilibrium) -> Vec<f64> {
    (0..eq.n())
        .map(|s| vp.rho * eq.m[s] / vp.psi + eq.w[s] * vp.l[s] / eq.p[s])
        .collect()
}

// ============================================================================
// Welfare comparison between two balanced growth paths
// ============================================================================

/// Decomposition of the per-country welfare change between two balanced
/// growth paths compared at the same instant (in units of discounted log
/// consumption, i.e. lifetime utility of the log-utility household).
#[derive(Debug, Clone)]
pub struct WelfareReport {
    /// One-time jump in the variety portfolio, `ln(M_new / M_base)` per
    /// country (measures compared as shares of the world measure).
    pub transitional: Vec<f64>,
    /// Capitalized real-income level change, `(1/rho) ln(w_hat / P_hat)`.
    pub static_component: Vec<f64>,
    /// Capitalized growth-rate change, `(g_new - g_base) / rho^2`; common
    /// to every country.
    pub dynamic_component: f64,
    /// Per-country total: transitional + static + dynamic.
    pub total: Vec<f64>,
    /// `dynamic / total` per country, or `None` where `|total|` is below
    /// [`WELFARE_TOTAL_EPS`] (no meaningful share of nothing).
    pub dynamic_share: Vec<Option<f64>>,
}

/// The static component split into its two sufficient-statistic parts.
#[derive(Debug, Clone, Copy)]
pub struct StaticSplit {
    /// Comparative-advantage part, read off the domestic final-good share:
    /// `(1/(rho theta (1-alpha))) ln(T_hat / lf_hat_ss)`.
    pub ek: f64,
    /// Variety-access part, read off the domestic intermediate share:
    /// `(1/rho) ln(M_hat / lm_hat_ss)`.
    pub romer: f64,
}

/// Both equilibria must describe the same countries and share every
/// parameter other than trade costs and technology levels; the comparison
/// formulas capitalize flows with the common `rho` and cancel constants
/// that depend on `theta`, `sigma`, `alpha`, `psi`, and `L`.
fn check_comparable(base: &ValidatedParams, new: &ValidatedParams) -> Result<()> {
    if base.n != new.n {
        return Err(Error::CountryMismatch {
            what: format!("country counts differ ({} vs {})", base.n, new.n),
        });
    }
    if base.labels != new.labels {
        return Err(Error::CountryMismatch {
            what: "country labels differ".to_string(),
        });
    }
    for (name, a, b) in [
        ("theta", base.theta, new.theta),
        ("sigma", base.sigma, new.sigma),
        ("alpha", base.alpha, new.alpha),
        ("rho", base.rho, new.rho),
        ("psi", base.psi, new.psi),
    ] {
        if a != b {
            return Err(Error::CountryMismatch {
                what: format!("structural parameter `{name}` differs ({a} vs {b})"),
            });
        }
    }
    if base.l != new.l {
        return Err(Error::CountryMismatch {
            what: "labor endowments differ".to_string(),
        });
    }
    Ok(())
}

/// Welfare change per country between two balanced growth paths, decomposed
/// into the transitional variety jump, the capitalized static real-income
/// change, and the capitalized growth-rate change.
///
/// The paths are compared as if switched at a single instant; no transition
/// dynamics are imputed. Trade costs and technology levels may differ
/// between the two parameter sets; anything else differing is a
/// [`Error::CountryMismatch`]. Requires interior equilibria on both sides
/// (a zero measure makes its country's variety jump an honest `-inf`).
pub fn welfare_decomposition(
    vp_base: &ValidatedParams,
    eq_base: &Equilibrium,
    vp_new: &ValidatedParams,
    eq_new: &Equilibrium,
) -> Result<WelfareReport> {
    check_comparable(vp_base, vp_new)?;
    check_dimensions(vp_base, eq_base)?;
    check_dimensions(vp_new, eq_new)?;
    check_residuals(eq_base)?;
    check_residuals(eq_new)?;
    let n = vp_base.n;
    let m_base = eq_base.measure_shares();
    let m_new = eq_new.measure_shares();
    let rho = vp_base.rho;
    let transitional: Vec<f64> = (0..n).map(|s| (m_new[s] / m_base[s]).ln()).collect();
    let static_component: Vec<f64> = (0..n)
        .map(|s| {
            let real_wage_hat = (eq_new.w[s] / eq_new.p[s]) / (eq_base.w[s] / eq_base.p[s]);
            real_wage_hat.ln() / rho
        })
        .collect();
    let dynamic_component = (eq_new.g - eq_base.g) / (rho * rho);
    let total: Vec<f64> = (0..n)
        .map(|s| transitional[s] + static_component[s] + dynamic_component)
        .collect();
    let dynamic_share = total
        .iter()
        .map(|&t| {
            if t.abs() < WELFARE_TOTAL_EPS {
                None
            } else {
                Some(dynamic_component / t)
            }
        })
        .collect();
    Ok(WelfareReport {
        transitional,
        static_component,
        dynamic_component,
        total,
        dynamic_share,
    })
}

/// Split of the static welfare component into comparative-advantage and
/// variety-access parts, read off the domestic shares:
///
/// ```text
/// (1/rho) ln(w_hat/P_hat) = (1/(rho theta (1-alpha))) ln(T_hat / lf_hat_ss)
///                         + (1/rho) ln(M_hat / lm_hat_ss)
/// ```
///
/// The identity is exact share algebra, so the parts sum to the static
/// component of [`welfare_decomposition`] up to float noise. The
/// variety-access part equals `(1/rho)` times the log of the base-share
/// weighted mean of relative delivered-price changes across sources — the
/// sufficient-statistic form — because delivered variety prices are
/// proportional to origin final-good prices.
pub fn static_welfare_split(
    vp_base: &ValidatedParams,
    eq_base: &Equilibrium,
    vp_new: &ValidatedParams,
    eq_new: &Equilibrium,
) -> Result<Vec<StaticSplit>> {
    check_comparable(vp_base, vp_new)?;
    check_dimensions(vp_base, eq_base)?;
    check_dimensions(vp_new, eq_new)?;
    check_residuals(eq_base)?;
    check_residuals(eq_new)?;
    let rho = vp_base.rho;
    let goods_exponent = 1.0 / (rho * vp_base.theta * (1.0 - vp_base.alpha));
    let m_base = eq_base.measure_shares();
    let m_new = eq_new.measure_shares();
    Ok((0..vp_base.n)
        .map(|s| {
            let t_hat = vp_new.t[s] / vp_base.t[s];
            let lf_hat = eq_new.shares.lambda_f[s][s] / eq_base.shares.lambda_f[s][s];
            let lm_hat = eq_new.shares.lambda_m[s][s] / eq_base.shares.lambda_m[s][s];
            let m_hat = m_new[s] / m_base[s];
            StaticSplit {
                ek: goods_exponent * (t_hat / lf_hat).ln(),
                romer: (m_hat / lm_hat).ln() / rho,
            }
        })
        .collect())
}

// ============================================================================
// Tests
// ============================================================================
