//! The static trade block: bilateral prices, price indices, trade shares,
//! expenditure flows, and the market-clearing diagnostics.
//!
//! Everything that involves powers of potentially huge trade costs is
//! evaluated in log space, so near-autarky economies (e.g. `tau = 1e6`)
//! produce tiny but well-behaved cross-border shares instead of 0/0.
//!
//! Index conventions: all bilateral matrices are `[source][destination]`,
//! and destination columns of share matrices sum to one.

use crate::error::{Error, Result};
use crate::model::ValidatedParams;
use crate::numerics::{log_sum_exp, solve_linear};

/// Price indices of an economy at given wages and variety measures: `p` is
/// the final-good price level, `pm` the CES composite price of intermediate
/// varieties, per country.
#[derive(Debug, Clone)]
pub struct PriceSystem {
    pub p: Vec<f64>,
    pub pm: Vec<f64>,
}

/// Bilateral variety prices `p_m[k][d] = tau[k][d] * p[k] / alpha`: a
/// monopolist in k produces from the local final good (marginal cost `p[k]`),
/// ships at the iceberg cost, and charges the constant markup `1/alpha`.
#[must_use]
pub fn monopolist_prices(vp: &ValidatedParams, p: &[f64]) -> Vec<Vec<f64>> {
    let n = vp.n;
    (0..n)
        .map(|k| (0..n).map(|d| vp.tau[k][d] * p[k] / vp.alpha).collect())
        .collect()
}

/// CES composite price of intermediates in each destination,
/// `pm[d] = (sum_k m_k (tau[k][d] p[k] / alpha)^(1-eta))^(1/(1-eta))`,
/// evaluated in log space. `1 - eta = -alpha/(1-alpha) < 0`, so cheaper or
/// more numerous varieties lower the composite price.
#[must_use]
pub fn composite_intermediate_prices(vp: &ValidatedParams, m: &[f64], p: &[f64]) -> Vec<f64> {
    let n = vp.n;
    let one_minus_eta = 1.0 - vp.eta;
    let ln_alpha = vp.alpha.ln();
    (0..n)
        .map(|d| {
            let terms: Vec<f64> = (0..n)
                .map(|k| m[k].ln() + one_minus_eta * (vp.tau[k][d].ln() + p[k].ln() - ln_alpha))
                .collect();
            (log_sum_exp(&terms) / one_minus_eta).exp()
        })
        .collect()
}

/// Log of the final-good gravity kernel,
/// `x[s][d] = ln T_s - theta * (alpha ln pm_s + (1-alpha) ln w_s + ln tau[s][d])`.
/// Shares and the price index are both softmax-style reductions of this.
fn final_kernel(vp: &ValidatedParams, w: &[f64], pm: &[f64]) -> Vec<Vec<f64>> {
    let n = vp.n;
    (0..n)
        .map(|s| {
            let cost = vp.alpha * pm[s].ln() + (1.0 - vp.alpha) * w[s].ln();
            (0..n)
                .map(|d| vp.t[s].ln() - vp.theta * (cost + vp.tau[s][d].ln()))
                .collect()
        })
        .collect()
}

/// Final-good price index per destination,
/// `p[d] = gamma * (sum_s T_s (pm_s^alpha w_s^(1-alpha) tau[s][d])^(-theta))^(-1/theta)`.
#[must_use]
pub fn final_price_index(vp: &ValidatedParams, w: &[f64], pm: &[f64]) -> Vec<f64> {
    let n = vp.n;
    let kernel = final_kernel(vp, w, pm);
    (0..n)
        .map(|d| {
            let col: Vec<f64> = (0..n).map(|s| kernel[s][d]).collect();
            (vp.gamma.ln() - log_sum_exp(&col) / vp.theta).exp()
        })
        .collect()
}

/// Normalize a log-kernel matrix into column-stochastic shares:
/// `out[s][d] = exp(x[s][d]) / sum_k exp(x[k][d])`, computed against the
/// column maximum so extreme cost asymmetries cannot overflow.
fn softmax_columns(kernel: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = kernel.len();
    let mut out = vec![vec![0.0; n]; n];
    for d in 0..n {
        let max = (0..n)
            .map(|s| kernel[s][d])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut col_sum = 0.0;
        for s in 0..n {
            let e = (kernel[s][d] - max).exp();
            out[s][d] = e;
            col_sum += e;
        }
        for row in out.iter_mut() {
            row[d] /= col_sum;
        }
    }
    out
}

/// Bilateral final-good trade shares `lambda_f[s][d]`: the probability that
/// destination d sources a final variety from s, given wages and composite
/// intermediate prices.
#[must_use]
pub fn trade_shares_final(vp: &ValidatedParams, w: &[f64], pm: &[f64]) -> Vec<Vec<f64>> {
    softmax_columns(&final_kernel(vp, w, pm))
}

/// Log of the per-variety intermediate kernel,
/// `q[s][d] = (1-eta) * (ln tau[s][d] + ln p_s)`: the relative price term a
/// single variety from s contributes in destination d. (The common `1/alpha`
/// markup cancels in every normalized use of this kernel.)
fn intermediate_kernel(vp: &ValidatedParams, p: &[f64]) -> Vec<Vec<f64>> {
    let n = vp.n;
    let one_minus_eta = 1.0 - vp.eta;
    (0..n)
        .map(|s| {
            (0..n)
                .map(|d| one_minus_eta * (vp.tau[s][d].ln() + p[s].ln()))
                .collect()
        })
        .collect()
}

/// Bilateral intermediate-variety expenditure shares `lambda_m[s][d]`:
/// destination d's spending share on varieties from s,
/// `m_s (tau[s][d] p_s)^(1-eta)` normalized within the destination column.
/// Countries with `m_s = 0` get an exact zero share.
#[must_use]
pub fn trade_shares_intermediate(vp: &ValidatedParams, m: &[f64], p: &[f64]) -> Vec<Vec<f64>> {
    let mut kernel = intermediate_kernel(vp, p);
    for (s, row) in kernel.iter_mut().enumerate() {
        let ln_m = m[s].ln(); // -inf at m_s = 0 -> exact zero share
        for x in row.iter_mut() {
            *x += ln_m;
        }
    }
    softmax_columns(&kernel)
}

/// Profit per unit of variety measure in each source country,
///
/// ```text
/// pi_s = (alpha/eta) * sum_d q[s][d] / (sum_k m_k q[k][d]) * r_d,
/// ```
///
/// where `q[s][d] = (tau[s][d] p_s)^(1-eta)` and `r` is final-sector revenue.
/// For `m_s > 0` this is exactly `profits(..)[s] / m_s`; unlike that ratio it
/// stays well defined at `m_s = 0`, where it is the profit an entrant variety
/// would earn. That makes it the object that decides whether a zero-measure
/// country is an equilibrium corner (entrant profit too low to attract entry)
/// or not.
#[must_use]
pub fn profit_per_measure(vp: &ValidatedParams, m: &[f64], p: &[f64], revenue: &[f64]) -> Vec<f64> {
    let n = vp.n;
    let kernel = intermediate_kernel(vp, p);
    let scale = vp.alpha / vp.eta;
    // Per-destination log denominator: ln sum_k m_k q[k][d].
    let ln_denoms: Vec<f64> = (0..n)
        .map(|d| {
            let col: Vec<f64> = (0..n).map(|k| m[k].ln() + kernel[k][d]).collect();
            log_sum_exp(&col)
        })
        .collect();
    (0..n)
        .map(|s| {
            let sales: f64 = (0..n)
                .map(|d| (kernel[s][d] - ln_denoms[d]).exp() * revenue[d])
                .sum();
            scale * sales
        })
        .collect()
}

/// Row-major matrix-vector product for `[source][destination]` matrices:
/// `(mat v)_s = sum_d mat[s][d] v[d]`.
fn matvec(mat: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    mat.iter()
        .map(|row| row.iter().zip(v).map(|(&a, &b)| a * b).sum())
        .collect()
}

/// Final-good expenditure per country.
///
/// Expenditure on the local final composite comes from household consumption
/// and R&D (together equal to labor income plus profits) and from variety
/// producers buying their input; tracing those payments through the two
/// share matrices closes to the linear system
///
/// ```text
/// E = w L + alpha * Lambda^M (Lambda^F E),
/// ```
///
/// which has a unique positive solution because both matrices are
/// column-stochastic and `alpha < 1`. Solved by dense elimination.
pub fn expenditures(
    vp: &ValidatedParams,
    w: &[f64],
    lambda_f: &[Vec<f64>],
    lambda_m: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let n = vp.n;
    // C = Lambda^M * Lambda^F (row = source of the final payment chain).
    let mut a = vec![vec![0.0; n]; n];
    for s in 0..n {
        for d in 0..n {
            let mut c = 0.0;
            for k in 0..n {
                c += lambda_m[s][k] * lambda_f[k][d];
            }
            a[s][d] = if s == d {
                1.0 - vp.alpha * c
            } else {
                -vp.alpha * c
            };
        }
    }
    let mut b: Vec<f64> = (0..n).map(|s| w[s] * vp.l[s]).collect();
    solve_linear(&mut a, &mut b).ok_or_else(|| Error::DivergenceDetected {
        loop_name: "expenditure system",
        iter: 0,
        detail: "singular flow matrix; shares are degenerate".to_string(),
    })
}

/// Final-sector revenue per source country, `r_s = sum_d lambda_f[s][d] e_d`.
#[must_use]
pub fn final_revenue(lambda_f: &[Vec<f64>], e: &[f64]) -> Vec<f64> {
    matvec(lambda_f, e)
}

/// Aggregate variety profits per country. Final producers in each
/// destination spend the share `alpha` of their revenue on intermediates;
/// a variety owner captures `1/eta` of its sales, so
/// `pi_s = (alpha/eta) * sum_d lambda_m[s][d] r_d`.
#[must_use]
pub fn profits(vp: &ValidatedParams, lambda_m: &[Vec<f64>], revenue: &[f64]) -> Vec<f64> {
    let scale = vp.alpha / vp.eta; // = alpha * (1 - alpha)
    matvec(lambda_m, revenue)
        .into_iter()
        .map(|x| scale * x)
        .collect()
}

/// Goods-market residual per country: labor income minus the wage bill the
/// final sector can support, `w_s L_s - (1-alpha) (Lambda^F E)_s`. Zero at
/// an equilibrium; positive for a country whose wage is above its
/// market-clearing level.
#[must_use]
pub fn goods_market_residual(
    vp: &ValidatedParams,
    w: &[f64],
    lambda_f: &[Vec<f64>],
    e: &[f64],
) -> Vec<f64> {
    let revenue = final_revenue(lambda_f, e);
    (0..vp.n)
        .map(|s| w[s] * vp.l[s] - (1.0 - vp.alpha) * revenue[s])
        .collect()
}

/// Trade-balance residual per country: net exports accumulated from gross
/// bilateral flows,
///
/// ```text
/// nx_s =   sum_{d != s} [ lambda_f[s][d] e_d + alpha lambda_m[s][d] r_d ]
///        - sum_{k != s} [ lambda_f[k][s] e_s + alpha lambda_m[k][s] r_s ]
/// ```
///
/// (final-good exports plus intermediate exports, minus the mirrored
/// imports; `r = Lambda^F e` is final-sector revenue and `alpha r_d` is
/// destination d's intermediate bill). Analytically `nx_s` equals the
/// negative of [`goods_market_residual`]; it is accumulated through a
/// different float path as a cross-check.
#[must_use]
pub fn trade_balance_residual(
    vp: &ValidatedParams,
    lambda_f: &[Vec<f64>],
    lambda_m: &[Vec<f64>],
    e: &[f64],
) -> Vec<f64> {
    let n = vp.n;
    let revenue = final_revenue(lambda_f, e);
    (0..n)
        .map(|s| {
            let mut exports = 0.0;
            let mut imports = 0.0;
            for d in 0..n {
                if d == s {
                    continue;
                }
                exports += lambda_f[s][d] * e[d] + vp.alpha * lambda_m[s][d] * revenue[d];
                imports += lambda_f[d][s] * e[s] + vp.alpha * lambda_m[d][s] * revenue[s];
            }
            exports - imports
        })
        .collect()
}

// ============================================================================
// Tests
// ============================================================================

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // (s, d) index loops mirror the matrix notation
mod tests {
    use super::*;
    use crate::model::{validate_params, ModelParams};

    fn two_country(tau: f64) -> ValidatedParams {
        validate_params(ModelParams {
            theta: 2.12,
            sigma: 0.76,
            alpha: 0.36,
            rho: 0.03,
            psi: 2.46,
            t: vec![1.0, 1.4],
            l: vec![1.0, 0.8],
            tau: vec![vec![1.0, tau], vec![tau, 1.0]],
            labels: vec![],
        })
        .expect("valid test params")
    }

    #[test]
    fn monopolist_prices_apply_markup_and_iceberg_cost() {
        let vp = two_country(1.5);
        let p = vec![2.0, 3.0];
        let pm = monopolist_prices(&vp, &p);
        assert!((pm[0][0] - 2.0 / 0.36).abs() < 1e-14);
        assert!((pm[0][1] - 1.5 * 2.0 / 0.36).abs() < 1e-14);
        assert!((pm[1][0] - 1.5 * 3.0 / 0.36).abs() < 1e-14);
    }

    #[test]
    fn composite_price_matches_direct_evaluation() {
        let vp = two_country(1.5);
        let m = vec![0.6, 0.4];
        let p = vec![2.0, 3.0];
        let pm = composite_intermediate_prices(&vp, &m, &p);
        let e = 1.0 - vp.eta;
        for d in 0..2 {
            let direct = (m[0] * (vp.tau[0][d] * p[0] / vp.alpha).powf(e)
                + m[1] * (vp.tau[1][d] * p[1] / vp.alpha).powf(e))
            .powf(1.0 / e);
            assert!(
                (pm[d] - direct).abs() < 1e-12 * direct,
                "pm[{d}] = {} vs direct {direct}",
                pm[d]
            );
        }
    }

    #[test]
    fn final_price_index_matches_direct_evaluation() {
        let vp = two_country(1.5);
        let w = vec![0.5, 0.625];
        let pm = vec![4.0, 5.0];
        let p = final_price_index(&vp, &w, &pm);
        for d in 0..2 {
            let phi: f64 = (0..2)
                .map(|s| {
                    vp.t[s]
                        * (pm[s].powf(vp.alpha) * w[s].powf(1.0 - vp.alpha) * vp.tau[s][d])
                            .powf(-vp.theta)
                })
                .sum();
            let direct = vp.gamma * phi.powf(-1.0 / vp.theta);
            assert!(
                (p[d] - direct).abs() < 1e-12 * direct,
                "p[{d}] = {} vs direct {direct}",
                p[d]
            );
        }
    }

    #[test]
    fn share_columns_sum_to_one_even_near_autarky() {
        for tau in [1.0, 1.5, 42.0, 1.0e6] {
            let vp = two_country(tau);
            let w = vec![0.5, 0.625];
            let m = vec![0.3, 0.7];
            let p = vec![1.1, 0.9];
            let pm = composite_intermediate_prices(&vp, &m, &p);
            let lf = trade_shares_final(&vp, &w, &pm);
            let lm = trade_shares_intermediate(&vp, &m, &p);
            for mat in [&lf, &lm] {
                for d in 0..2 {
                    let col: f64 = (0..2).map(|s| mat[s][d]).sum();
                    assert!(
                        (col - 1.0).abs() < 1e-12,
                        "column {d} sums to {col} at tau = {tau}"
                    );
                    for s in 0..2 {
                        assert!(mat[s][d] >= 0.0 && mat[s][d] <= 1.0);
                    }
                }
            }
            if tau == 1.0e6 {
                assert!(
                    lf[0][1] < 1e-10,
                    "cross share should be tiny, got {}",
                    lf[0][1]
                );
                assert!(lf[1][1] > 1.0 - 1e-10);
            }
        }
    }

    #[test]
    fn shares_are_invariant_to_common_wage_scale() {
        let vp = two_country(1.7);
        let m = vec![0.5, 0.5];
        let p = vec![1.0, 1.2];
        let pm = composite_intermediate_prices(&vp, &m, &p);
        let w = vec![0.4, 0.75];
        let w_scaled: Vec<f64> = w.iter().map(|x| 17.0 * x).collect();
        let a = trade_shares_final(&vp, &w, &pm);
        let b = trade_shares_final(&vp, &w_scaled, &pm);
        for s in 0..2 {
            for d in 0..2 {
                assert!((a[s][d] - b[s][d]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn expenditure_system_solution_satisfies_flow_equation() {
        let vp = two_country(1.4);
        let w = vec![0.55, 0.5625];
        let m = vec![0.45, 0.55];
        let p = vec![1.0, 1.05];
        let pm = composite_intermediate_prices(&vp, &m, &p);
        let lf = trade_shares_final(&vp, &w, &pm);
        let lm = trade_shares_intermediate(&vp, &m, &p);
        let e = expenditures(&vp, &w, &lf, &lm).expect("solvable");
        let r = final_revenue(&lf, &e);
        for s in 0..2 {
            let rhs = w[s] * vp.l[s] + vp.alpha * (0..2).map(|k| lm[s][k] * r[k]).sum::<f64>();
            assert!(
                (e[s] - rhs).abs() < 1e-12 * e[s],
                "flow equation violated at {s}: {} vs {rhs}",
                e[s]
            );
            assert!(e[s] > 0.0);
        }
        // World totals: sum E = sum wL / (1 - alpha).
        let total_e: f64 = e.iter().sum();
        let total_wl: f64 = (0..2).map(|s| w[s] * vp.l[s]).sum();
        assert!((total_e - total_wl / (1.0 - vp.alpha)).abs() < 1e-12 * total_e);
    }

    #[test]
    fn per_measure_profit_times_measure_equals_aggregate_profit() {
        let vp = two_country(1.6);
        let w = vec![0.6, 0.5];
        let m = vec![0.35, 0.65];
        let p = vec![1.1, 0.95];
        let pm = composite_intermediate_prices(&vp, &m, &p);
        let lf = trade_shares_final(&vp, &w, &pm);
        let lm = trade_shares_intermediate(&vp, &m, &p);
        let e = expenditures(&vp, &w, &lf, &lm).expect("solvable");
        let r = final_revenue(&lf, &e);
        let total = profits(&vp, &lm, &r);
        let per_unit = profit_per_measure(&vp, &m, &p, &r);
        for s in 0..2 {
            assert!(
                (m[s] * per_unit[s] - total[s]).abs() < 1e-13 * total[s],
                "country {s}: m*pi = {} vs Pi = {}",
                m[s] * per_unit[s],
                total[s]
            );
        }
    }

    #[test]
    fn per_measure_profit_is_finite_at_a_zero_measure() {
        // With m_1 = 0 the aggregate profit of country 1 is zero, but the
        // profit an entrant variety would earn must still be a positive
        // finite number (it decides whether the corner is an equilibrium).
        let vp = two_country(1.3);
        let m = vec![0.0, 1.0];
        let p = vec![1.05, 0.98];
        let w = vec![0.55, 0.56];
        let pm = composite_intermediate_prices(&vp, &m, &p);
        assert!(pm.iter().all(|x| x.is_finite() && *x > 0.0));
        let lf = trade_shares_final(&vp, &w, &pm);
        let lm = trade_shares_intermediate(&vp, &m, &p);
        assert_eq!(lm[0][0], 0.0, "zero-measure country must have zero share");
        assert_eq!(lm[0][1], 0.0);
        let e = expenditures(&vp, &w, &lf, &lm).expect("solvable");
        let r = final_revenue(&lf, &e);
        let total = profits(&vp, &lm, &r);
        assert_eq!(total[0], 0.0);
        let per_unit = profit_per_measure(&vp, &m, &p, &r);
        assert!(
            per_unit[0].is_finite() && per_unit[0] > 0.0,
            "entrant profit should be positive and finite, got {}",
            per_unit[0]
        );
        assert!(per_unit[1].is_finite() && per_unit[1] > 0.0);
    }

    #[test]
    fn residual_paths_agree_off_equilibrium() {
        // goods_market_residual and trade_balance_residual are exact
        // negatives analytically, at or away from equilibrium.
        let vp = two_country(2.0);
        let w = vec![0.8, 0.25];
        let m = vec![0.2, 0.8];
        let p = vec![1.3, 0.8];
        let pm = composite_intermediate_prices(&vp, &m, &p);
        let lf = trade_shares_final(&vp, &w, &pm);
        let lm = trade_shares_intermediate(&vp, &m, &p);
        let e = expenditures(&vp, &w, &lf, &lm).expect("solvable");
        let goods = goods_market_residual(&vp, &w, &lf, &e);
        let trade = trade_balance_residual(&vp, &lf, &lm, &e);
        for s in 0..2 {
            assert!(
                (goods[s] + trade[s]).abs() < 1e-12,
                "residual mismatch at {s}: goods {} trade {}",
                goods[s],
                trade[s]
            );
        }
    }
}
