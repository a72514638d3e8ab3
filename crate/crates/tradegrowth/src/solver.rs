//! Nested fixed-point solver for the balanced growth path.
//!
//! Three loops, innermost first:
//!
//! 1. **Prices** (given wages and measures): iterate
//!    `P -> final_price_index(w, composite_intermediate_prices(m, P))`.
//!    A contraction with rate ~`alpha` (the only feedback from P into P runs
//!    through the intermediate-cost share).
//! 2. **Wages** (given measures): iterate
//!    `w_s L_s -> (1-alpha) (Lambda^F E)_s`, with expenditure E solved from
//!    the linear flow system at the current prices and shares; renormalized
//!    so world labor income stays 1. The fixed point is exactly goods-market
//!    clearing.
//! 3. **Measures**: iterate `m_s -> Pi_s / p_s`, renormalized to a unit
//!    world measure. The fixed point equalizes the profit return per unit
//!    of variety value `Pi_s / (m_s p_s)` — and hence the growth rate —
//!    across countries, which is what defines a balanced growth path.
//!
//! In a frictionless world the outer map is the identity (any measure
//! distribution supports a BGP), so the solver keeps the initial
//! distribution; this mirrors the model's hysteresis: history pins down
//! where varieties sit when trade costs do not.
//!
//! # Corner growth paths
//!
//! Asymmetric economies with low trade costs can fail to have an interior
//! BGP: the profit return per variety of a disadvantaged country stays below
//! the world return at *every* interior measure distribution, and the outer
//! map drives its measure to zero multiplicatively (a core-periphery
//! outcome). The solver detects the persistent collapse, snaps the measure
//! to an exact zero, and keeps iterating on the surviving countries — but
//! only after verifying, by evaluation, that the corner is self-consistent:
//! the profit an *entrant* variety would earn in the zeroed country must not
//! exceed the active countries' return (otherwise entry would resume, and
//! the candidate corner is rejected). The same no-entry condition is
//! re-checked when the final equilibrium is assembled.

use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gravity::{
    composite_intermediate_prices, expenditures, final_price_index, final_revenue,
    goods_market_residual, profit_per_measure, profits, trade_balance_residual, trade_shares_final,
    trade_shares_intermediate, PriceSystem,
};
use crate::model::{Equilibrium, ResidualReport, ShareMatrices, ValidatedParams};
use crate::numerics::sup_rel_diff;

/// Tolerances, iteration budgets, damping factors, and the optional seed for
/// randomized starting points.
///
/// Damping mixes the update target with the current iterate,
/// `x <- damping * target + (1 - damping) * x`; `1.0` means undamped.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SolverConfig {
    /// Relative sup-norm tolerance of the price loop.
    pub tol_inner: f64,
    /// Relative sup-norm tolerance of the wage loop.
    pub tol_mid: f64,
    /// Relative sup-norm tolerance of the measure loop.
    pub tol_outer: f64,
    pub max_iter_inner: usize,
    pub max_iter_mid: usize,
    pub max_iter_outer: usize,
    pub damping_inner: f64,
    pub damping_mid: f64,
    pub damping_outer: f64,
    /// Attempt a Steffensen extrapolation of the measure iterate every this
    /// many outer iterations (0 disables). The damped outer iteration can
    /// contract very slowly when trade costs are close to frictionless (the
    /// measure map approaches the identity); extrapolating the geometric
    /// tail cuts iteration counts by orders of magnitude. A jump is accepted
    /// only when an actual evaluation shows it reduces the update residual,
    /// so the fixed point — and determinism — are unaffected.
    pub accel_every: usize,
    /// `None`: deterministic start (`w ∝ 1/L`, `m ∝ L`, `P ≡ 1`).
    /// `Some(seed)`: each starting value is additionally scaled by an
    /// independent uniform draw from [0.5, 1.5), then renormalized.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_inner: 1e-12,
            tol_mid: 1e-11,
            tol_outer: 1e-10,
            max_iter_inner: 10_000,
            max_iter_mid: 10_000,
            max_iter_outer: 10_000,
            damping_inner: 1.0,
            damping_mid: 1.0,
            damping_outer: 0.5,
            accel_every: 20,
            seed: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol_inner", self.tol_inner),
            ("tol_mid", self.tol_mid),
            ("tol_outer", self.tol_outer),
            ("damping_inner", self.damping_inner),
            ("damping_mid", self.damping_mid),
            ("damping_outer", self.damping_outer),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositiveParam {
                    name: name.to_string(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// The iterate of the outer loop: wages, variety measures, and final-good
/// prices. Public so callers can warm-start solves (sweeps, counterfactuals)
/// or manipulate iterates in tests. Measures may contain exact zeros
/// (corner countries that own no varieties); wages and prices must stay
/// strictly positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BgpState {
    pub w: Vec<f64>,
    pub m: Vec<f64>,
    pub p: Vec<f64>,
}

/// Convergence record of a solve. `outer_deltas[k]` is the relative sup-norm
/// distance between the k-th measure iterate and its update target, before
/// damping; the solve converged when the last delta fell under `tol_outer`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveTrace {
    pub outer_deltas: Vec<f64>,
    pub outer_iters: usize,
    pub mid_iters_total: usize,
    pub inner_iters_total: usize,
    pub converged: bool,
    /// True when the tail of `outer_deltas` (last 10) is not non-increasing
    /// within 10% slack — the loop is cycling rather than contracting,
    /// usually a sign that more damping is needed.
    pub oscillation: bool,
    /// Times the wage loop detected divergence and restarted itself with
    /// halved damping (expected for near-frictionless trade costs, where the
    /// undamped wage update overshoots).
    pub mid_rescues: usize,
    /// Accepted Steffensen extrapolations of the measure iterate.
    pub accel_jumps: usize,
    /// Countries whose variety measure was snapped to an exact zero after
    /// their collapse was detected and the no-entry condition verified.
    pub corner_snaps: usize,
    /// Accepted secant jumps along a measure-drift direction (used when a
    /// country's measure drifts slowly toward a small interior value).
    pub drift_jumps: usize,
    /// Times a zeroed country had to be revived because the converged corner
    /// failed the no-entry check (its entrant return exceeded the market
    /// return, so the exit was not an equilibrium after all).
    pub revivals: usize,
    pub wall_time_secs: f64,
}

impl SolveTrace {
    fn flag_oscillation(deltas: &[f64]) -> bool {
        let tail = &deltas[deltas.len().saturating_sub(10)..];
        tail.windows(2).any(|w| w[1] > 1.1 * w[0])
    }
}

/// A solved balanced growth path together with its convergence trace.
#[derive(Debug, Clone)]
pub struct Solution {
    pub equilibrium: Equilibrium,
    pub trace: SolveTrace,
}

/// Starting iterate: high-labor countries start with low wages (`w ∝ 1/L`,
/// so every country begins with equal labor income), measures proportional
/// to labor, and unit prices. With a seed, each entry is scaled by an
/// independent draw from U[0.5, 1.5) before renormalization.
#[must_use]
pub fn initial_state(vp: &ValidatedParams, cfg: &SolverConfig) -> BgpState {
    let n = vp.n;
    let mut w: Vec<f64> = vp.l.iter().map(|&l| 1.0 / (n as f64 * l)).collect();
    let mut m: Vec<f64> = vp.l.clone();
    let mut p = vec![1.0; n];
    if let Some(seed) = cfg.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::from(0.5..1.5);
        for x in w.iter_mut().chain(m.iter_mut()).chain(p.iter_mut()) {
            *x *= dist.sample(&mut rng);
        }
    }
    normalize_wages(vp, &mut w);
    normalize_measures(&mut m);
    BgpState { w, m, p }
}

/// Rescale wages so world labor income is one.
fn normalize_wages(vp: &ValidatedParams, w: &mut [f64]) {
    let total: f64 = w.iter().zip(&vp.l).map(|(&w, &l)| w * l).sum();
    for x in w.iter_mut() {
        *x /= total;
    }
}

/// Rescale measures so the world variety measure is one.
fn normalize_measures(m: &mut [f64]) {
    let total: f64 = m.iter().sum();
    for x in m.iter_mut() {
        *x /= total;
    }
}

fn check_finite(loop_name: &'static str, iter: usize, xs: &[f64]) -> Result<()> {
    if let Some((i, &bad)) = xs
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x <= 0.0)
    {
        return Err(Error::DivergenceDetected {
            loop_name,
            iter,
            detail: format!("iterate entry {i} became {bad}"),
        });
    }
    Ok(())
}

/// Like [`check_finite`] but for measure vectors, where exact zeros are
/// legitimate (corner countries); only non-finite or negative entries, or an
/// all-zero vector, are divergence.
fn check_measures(loop_name: &'static str, iter: usize, xs: &[f64]) -> Result<()> {
    if let Some((i, &bad)) = xs
        .iter()
        .enumerate()
        .find(|(_, x)| !x.is_finite() || **x < 0.0)
    {
        return Err(Error::DivergenceDetected {
            loop_name,
            iter,
            detail: format!("iterate entry {i} became {bad}"),
        });
    }
    if xs.iter().all(|&x| x == 0.0) {
        return Err(Error::DivergenceDetected {
            loop_name,
            iter,
            detail: "all variety measures collapsed to zero".to_string(),
        });
    }
    Ok(())
}

/// Inner loop: price fixed point at given wages and measures.
///
/// Iterates the composition of the composite-intermediate-price and
/// final-price-index maps from the starting guess `p0`, with geometric
/// (log-space) damping. Returns the solved `PriceSystem` and the number of
/// iterations used.
pub fn inner_price_fixed_point(
    vp: &ValidatedParams,
    w: &[f64],
    m: &[f64],
    p0: &[f64],
    cfg: &SolverConfig,
) -> Result<(PriceSystem, usize)> {
    let mut p = p0.to_vec();
    let mut delta = f64::INFINITY;
    for iter in 0..cfg.max_iter_inner {
        let pm = composite_intermediate_prices(vp, m, &p);
        let p_next = final_price_index(vp, w, &pm);
        check_finite("inner price", iter, &p_next)?;
        delta = sup_rel_diff(&p_next, &p);
        if cfg.damping_inner == 1.0 {
            p = p_next;
        } else {
            for (cur, next) in p.iter_mut().zip(&p_next) {
                *cur = (cfg.damping_inner * next.ln() + (1.0 - cfg.damping_inner) * cur.ln()).exp();
            }
        }
        if delta < cfg.tol_inner {
            let pm = composite_intermediate_prices(vp, m, &p);
            return Ok((PriceSystem { p, pm }, iter + 1));
        }
    }
    Err(Error::MaxIterExceeded {
        loop_name: "inner price",
        iters: cfg.max_iter_inner,
        tol: cfg.tol_inner,
        delta,
    })
}

/// Everything the wage loop pins down at a given measure distribution:
/// market-clearing wages, the price system, both share matrices, and
/// expenditure.
#[derive(Debug, Clone)]
pub struct MidPoint {
    pub w: Vec<f64>,
    pub prices: PriceSystem,
    pub lambda_f: Vec<Vec<f64>>,
    pub lambda_m: Vec<Vec<f64>>,
    pub e: Vec<f64>,
    pub iters: usize,
    pub inner_iters: usize,
    pub rescues: usize,
    /// Damping factor in effect when the loop converged (lower than the
    /// configured `damping_mid` if rescues occurred); callers running many
    /// wage solves can feed it back to skip rediscovering the reduction.
    pub damping_used: f64,
}

/// Mid loop: wage fixed point at a given measure distribution.
///
/// Each pass re-solves prices (warm-started from the previous pass), builds
/// the share matrices, solves the expenditure flow system, and moves wages
/// toward the labor income the final sector can pay:
/// `w_s L_s <- (1-alpha) (Lambda^F E)_s`. World labor income is held at one,
/// which the update preserves up to rounding (the flow system scales
/// expenditure by `1/(1-alpha)`).
///
/// The undamped update overshoots when demand is highly wage-elastic (trade
/// costs close to one and a large Fréchet dispersion parameter): revenue then
/// reacts more than one-for-one to a wage change. When the loop detects this
/// — a residual exploding past its best value, or shares underflowing — it
/// halves its damping and restarts from the best iterate seen, so the
/// configured `damping_mid` acts as a starting value rather than a hard
/// commitment.
pub fn mid_wage_fixed_point(
    vp: &ValidatedParams,
    m: &[f64],
    w0: &[f64],
    p0: &[f64],
    cfg: &SolverConfig,
) -> Result<MidPoint> {
    const MAX_RESCUES: usize = 12;
    let mut w = w0.to_vec();
    normalize_wages(vp, &mut w);
    let mut p_warm = p0.to_vec();
    let mut damping = cfg.damping_mid;
    let mut inner_iters = 0;
    let mut rescues = 0;
    let mut delta = f64::INFINITY;
    let mut best_delta = f64::INFINITY;
    let mut best_w = w.clone();
    let mut iter = 0;
    while iter < cfg.max_iter_mid {
        iter += 1;
        let (prices, used) = inner_price_fixed_point(vp, &w, m, &p_warm, cfg)?;
        inner_iters += used;
        p_warm = prices.p.clone();
        let lambda_f = trade_shares_final(vp, &w, &prices.pm);
        let lambda_m = trade_shares_intermediate(vp, m, &prices.p);
        let e = expenditures(vp, &w, &lambda_f, &lambda_m)?;
        let revenue = final_revenue(&lambda_f, &e);
        let mut w_target: Vec<f64> = revenue
            .iter()
            .zip(&vp.l)
            .map(|(&r, &l)| (1.0 - vp.alpha) * r / l)
            .collect();
        let target_ok = w_target.iter().all(|x| x.is_finite() && *x > 0.0);
        let diverging = !target_ok || {
            normalize_wages(vp, &mut w_target);
            delta = sup_rel_diff(&w_target, &w);
            delta > 100.0 * best_delta.max(cfg.tol_mid)
        };
        if diverging {
            rescues += 1;
            if rescues > MAX_RESCUES {
                return Err(Error::DivergenceDetected {
                    loop_name: "mid wage",
                    iter,
                    detail: format!(
                        "wage update still diverging after {MAX_RESCUES} damping reductions \
                         (damping reached {damping:.2e})"
                    ),
                });
            }
            damping *= 0.5;
            w = best_w.clone();
            log::debug!("mid wage loop rescue #{rescues}: damping lowered to {damping:.3}");
            continue;
        }
        if delta < best_delta {
            best_delta = delta;
            best_w = w.clone();
        }
        for (cur, next) in w.iter_mut().zip(&w_target) {
            *cur = damping * next + (1.0 - damping) * *cur;
        }
        normalize_wages(vp, &mut w);
        if delta < cfg.tol_mid {
            let (prices, used) = inner_price_fixed_point(vp, &w, m, &p_warm, cfg)?;
            inner_iters += used;
            let lambda_f = trade_shares_final(vp, &w, &prices.pm);
            let lambda_m = trade_shares_intermediate(vp, m, &prices.p);
            let e = expenditures(vp, &w, &lambda_f, &lambda_m)?;
            return Ok(MidPoint {
                w,
                prices,
                lambda_f,
                lambda_m,
                e,
                iters: iter,
                inner_iters,
                rescues,
                damping_used: damping,
            });
        }
    }
    Err(Error::MaxIterExceeded {
        loop_name: "mid wage",
        iters: cfg.max_iter_mid,
        tol: cfg.tol_mid,
        delta,
    })
}

/// Result of one outer iteration.
#[derive(Debug, Clone)]
pub struct OuterStep {
    /// The damped, renormalized next iterate.
    pub next: BgpState,
    /// Pre-damping relative sup-norm distance between the measure iterate
    /// and its update target.
    pub delta: f64,
    /// The solved wage point (at the *old* measures).
    pub mid: MidPoint,
    /// The normalized update target `m_s pi_s / p_s`.
    pub target: Vec<f64>,
    /// Profit return per unit of variety value, `pi_s / p_s`, where `pi_s`
    /// is profit per unit measure — defined for zero-measure countries too,
    /// where it is the return an entrant variety would earn. Equal across
    /// countries (for active ones) exactly at a BGP.
    pub returns: Vec<f64>,
}

/// One outer iteration: solve the wage loop at the current measures, then
/// move measures toward profit-per-final-good-price,
/// `m_s <- Pi_s / p_s` (renormalized to a unit world measure). Zero-measure
/// entries are fixed points of the update and stay exactly zero.
pub fn outer_step(vp: &ValidatedParams, state: &BgpState, cfg: &SolverConfig) -> Result<OuterStep> {
    let mid = mid_wage_fixed_point(vp, &state.m, &state.w, &state.p, cfg)?;
    let revenue = final_revenue(&mid.lambda_f, &mid.e);
    let per_unit = profit_per_measure(vp, &state.m, &mid.prices.p, &revenue);
    let returns: Vec<f64> = per_unit
        .iter()
        .zip(&mid.prices.p)
        .map(|(&pi, &p)| pi / p)
        .collect();
    let mut target: Vec<f64> = state
        .m
        .iter()
        .zip(&returns)
        .map(|(&m, &ret)| m * ret)
        .collect();
    check_measures("outer measure", 0, &target)?;
    normalize_measures(&mut target);
    let delta = sup_rel_diff(&target, &state.m);
    let mut m_next: Vec<f64> = state
        .m
        .iter()
        .zip(&target)
        .map(|(&cur, &next)| cfg.damping_outer * next + (1.0 - cfg.damping_outer) * cur)
        .collect();
    normalize_measures(&mut m_next);
    let next = BgpState {
        w: mid.w.clone(),
        m: m_next,
        p: mid.prices.p.clone(),
    };
    Ok(OuterStep {
        next,
        delta,
        mid,
        target,
        returns,
    })
}

/// Propose a Steffensen extrapolation of the measure iterate from the tail
/// of the delta history: if the last few update residuals decay at a stable
/// geometric rate `r`, the remaining distance to the fixed point is
/// `(r/(1-r))`× the last step, applied in log space to preserve positivity.
/// `scale` shrinks the jump (used to retry after a rejected full jump).
/// Returns `None` when the tail is not cleanly geometric.
///
/// Rates extremely close to one are genuine here, not noise: as trade costs
/// approach frictionless the measure map approaches the identity and the
/// plain iteration needs ~10^5-10^6 passes, so the extrapolation must be
/// allowed to cover that distance. The caller's evaluation guard rejects
/// any jump that does not actually reduce the residual.
fn steffensen_proposal(
    deltas: &[f64],
    m_prev: &[f64],
    m_cur: &[f64],
    scale: f64,
) -> Option<Vec<f64>> {
    let k = deltas.len();
    if k < 4 {
        return None;
    }
    let r1 = deltas[k - 1] / deltas[k - 2];
    let r2 = deltas[k - 2] / deltas[k - 3];
    let r3 = deltas[k - 3] / deltas[k - 4];
    let r = deltas[k - 1] / deltas[k - 4];
    if !r.is_finite() || r <= 0.0 {
        return None;
    }
    let r = r.cbrt();
    if !(0.05..=0.999_999).contains(&r) {
        return None;
    }
    for ri in [r1, r2, r3] {
        if !ri.is_finite() || (ri - r).abs() > 0.1 * r {
            return None;
        }
    }
    let mut factor = scale * (r / (1.0 - r)).min(1e6);
    // Cap the largest per-entry move (in log space). Far from the fixed
    // point the residual decay can look flat, which makes the geometric
    // factor huge; an uncapped jump can then teleport an entry across the
    // fixed point into a region the plain iteration needs ~1e5 passes to
    // escape — while still looking like an improvement to the one-step
    // evaluation guard. Three e-folds is far beyond any genuine geometric
    // tail and far below such teleports.
    let widest = m_cur
        .iter()
        .zip(m_prev)
        .filter(|&(&cur, &prev)| cur > 0.0 && prev > 0.0)
        .map(|(&cur, &prev)| (cur.ln() - prev.ln()).abs())
        .fold(0.0_f64, f64::max);
    if factor * widest > MAX_JUMP_LN {
        factor = MAX_JUMP_LN / widest;
    }
    let mut m_star = Vec::with_capacity(m_cur.len());
    for (&cur, &prev) in m_cur.iter().zip(m_prev) {
        if cur == 0.0 && prev == 0.0 {
            // Settled corner country: stays exactly at zero.
            m_star.push(0.0);
            continue;
        }
        let x = (cur.ln() + factor * (cur.ln() - prev.ln())).exp();
        if !x.is_finite() || x <= 0.0 {
            return None;
        }
        m_star.push(x);
    }
    normalize_measures(&mut m_star);
    Some(m_star)
}

/// A country is counted as drifting when its update target moves its
/// measure by more than this relative amount in one outer pass.
const DRIFT_EPS: f64 = 1e-8;
/// Consecutive same-direction drifting passes before a corner snap or a
/// drift secant is attempted.
const DRIFT_WINDOW: usize = 30;
/// Largest log-space move any single jump (Steffensen or drift) may apply
/// to one measure entry.
const MAX_JUMP_LN: f64 = 3.0;
/// Measure share a country is restarted at when a converged corner fails
/// the no-entry check and the country has to be revived.
const REVIVAL_MEASURE: f64 = 1e-4;

/// Run the outer loop from an explicit starting state. See [`solve_bgp`].
pub fn solve_from(vp: &ValidatedParams, state: BgpState, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let started = Instant::now();
    // Remember the wage loop's effective damping across outer iterations so
    // a reduction discovered once (see mid_wage_fixed_point) is not
    // rediscovered from scratch every outer pass.
    let mut cfg = cfg.clone();
    let cfg = &mut cfg;
    let mut state = state;
    let mut trace = SolveTrace {
        outer_deltas: Vec::new(),
        outer_iters: 0,
        mid_iters_total: 0,
        inner_iters_total: 0,
        converged: false,
        oscillation: false,
        mid_rescues: 0,
        accel_jumps: 0,
        corner_snaps: 0,
        drift_jumps: 0,
        revivals: 0,
        wall_time_secs: 0.0,
    };
    // Per-country drift tracking: a long run of same-direction measure
    // updates is the signature of a collapse toward a corner (shrinking) or
    // of a slow crawl toward a small interior measure (either direction).
    // `drift_base` records the (ln m_s, ln target_s/m_s) pair at the start
    // of each run; the drift secant uses it as its second support point.
    let mut drift_len = vec![0_usize; vp.n];
    let mut drift_sign = vec![0_i8; vp.n];
    let mut drift_base: Vec<Option<(f64, f64)>> = vec![None; vp.n];
    let mut revivals = 0_usize;
    // The outer iteration runs to convergence; the equilibrium assembly then
    // either passes (break with the result) or reports that a zeroed country
    // would attract entry after all — in which case the country is revived
    // with a small measure and the iteration resumes (bounded by the shared
    // iteration budget, plus a revival cap for pathological flip-flopping).
    let equilibrium = loop {
        while trace.outer_iters < cfg.max_iter_outer {
            let step = outer_step(vp, &state, cfg)?;
            trace.outer_deltas.push(step.delta);
            trace.outer_iters += 1;
            trace.mid_iters_total += step.mid.iters;
            trace.inner_iters_total += step.mid.inner_iters;
            trace.mid_rescues += step.mid.rescues;
            cfg.damping_mid = step.mid.damping_used;
            if step.delta < cfg.tol_outer {
                state = step.next;
                trace.converged = true;
                break;
            }
            for s in 0..vp.n {
                let m_s = state.m[s];
                if m_s <= 0.0 {
                    drift_len[s] = 0;
                    drift_sign[s] = 0;
                    drift_base[s] = None;
                    continue;
                }
                let v = (step.target[s] / m_s).ln();
                let sign = if v < -DRIFT_EPS {
                    -1
                } else if v > DRIFT_EPS {
                    1
                } else {
                    0
                };
                if sign != 0 && sign == drift_sign[s] {
                    drift_len[s] += 1;
                } else {
                    drift_sign[s] = sign;
                    drift_len[s] = usize::from(sign != 0);
                    drift_base[s] = (sign != 0).then(|| (m_s.ln(), v));
                }
            }
            // The smallest persistently-drifting country, if any, gets a jump
            // attempt: a corner snap for a collapsing measure, a drift secant
            // for a slow crawl toward a small interior measure. Either way a
            // rejection just re-arms the detector, so a wrong candidate costs
            // one evaluation per window.
            let candidate = (0..vp.n)
                .filter(|&s| state.m[s] > 0.0 && drift_len[s] >= DRIFT_WINDOW)
                .min_by(|&a, &b| state.m[a].total_cmp(&state.m[b]));
            if let Some(s) = candidate {
                let base = drift_base[s];
                let x_cur = state.m[s].ln();
                let v_cur = (step.target[s] / state.m[s]).ln();
                let sign = drift_sign[s];
                drift_len.iter_mut().for_each(|l| *l = 0);
                drift_sign.iter_mut().for_each(|g| *g = 0);
                drift_base.iter_mut().for_each(|b| *b = None);
                // A collapsing measure may be heading for an exact corner:
                // trial-evaluate it at zero. Accepted only when the no-entry
                // condition holds there (the entrant return does not exceed the
                // best active return) and the update residual improves.
                let mut interior_below = false;
                if sign < 0 {
                    let mut m_corner = step.next.m.clone();
                    m_corner[s] = 0.0;
                    normalize_measures(&mut m_corner);
                    let corner_state = BgpState {
                        w: step.next.w.clone(),
                        m: m_corner,
                        p: step.next.p.clone(),
                    };
                    match outer_step(vp, &corner_state, cfg) {
                        Ok(cstep) => {
                            trace.mid_iters_total += cstep.mid.iters;
                            trace.inner_iters_total += cstep.mid.inner_iters;
                            trace.mid_rescues += cstep.mid.rescues;
                            let active_max = cstep
                                .returns
                                .iter()
                                .enumerate()
                                .filter(|&(k, _)| corner_state.m[k] > 0.0)
                                .map(|(_, &ret)| ret)
                                .fold(f64::NEG_INFINITY, f64::max);
                            let no_entry =
                                cstep.returns[s] <= active_max * (1.0 + 100.0 * cfg.tol_outer);
                            // Entry resuming at the corner means an interior
                            // fixed point for m_s lies between zero and the
                            // current iterate.
                            interior_below = !no_entry;
                            if no_entry && cstep.delta < step.delta {
                                log::info!(
                                "country {s} exits the variety market at outer iter {}: entrant return {:.6e} <= active return {:.6e}",
                                trace.outer_iters,
                                cstep.returns[s],
                                active_max
                            );
                                trace.outer_deltas.push(cstep.delta);
                                trace.outer_iters += 1;
                                trace.corner_snaps += 1;
                                state = cstep.next;
                                if cstep.delta < cfg.tol_outer {
                                    trace.converged = true;
                                    break;
                                }
                                continue;
                            }
                            log::debug!(
                            "rejected corner candidate {s}: entrant return {:.6e} vs active {:.6e}, residual {:.3e} vs {:.3e}",
                            cstep.returns[s],
                            active_max,
                            cstep.delta,
                            step.delta
                        );
                        }
                        Err(err) => {
                            log::debug!("rejected corner candidate {s}: evaluation failed: {err}");
                        }
                    }
                }
                // Slow crawl toward a small interior measure (from either side):
                // the measure map is nearly neutral along this direction, so the
                // plain iteration only drifts there logarithmically. Root-find
                // the drift instead: secant in v(x) = ln(target_s / m_s) as a
                // function of x = ln m_s, with the start of the drift run as the
                // second support point; when the secant is unusable or reaches
                // beyond the jump cap, fast-forward by the cap along the drift
                // direction instead. Evaluation-guarded like every jump: accept
                // an actual residual improvement, or — for a capped ballistic
                // fast-forward that cannot improve the one-step residual yet —
                // accept not getting materially worse while the drift direction
                // at the landing point confirms the fixed point was not crossed.
                if (sign > 0 || interior_below) && v_cur != 0.0 {
                    let slope = base.map(|(x_base, v_base)| (v_cur - v_base) / (x_cur - x_base));
                    let x_star = match slope {
                        Some(sl) if sl.is_finite() && sl < 0.0 => {
                            (x_cur - v_cur / sl).clamp(x_cur - MAX_JUMP_LN, x_cur + MAX_JUMP_LN)
                        }
                        _ => x_cur + v_cur.signum() * MAX_JUMP_LN,
                    };
                    let mut m_jump = step.next.m.clone();
                    m_jump[s] = x_star.exp();
                    normalize_measures(&mut m_jump);
                    let m_jump_s = m_jump[s];
                    let jumped = BgpState {
                        w: step.next.w.clone(),
                        m: m_jump,
                        p: step.next.p.clone(),
                    };
                    match outer_step(vp, &jumped, cfg) {
                        Ok(dstep) => {
                            trace.mid_iters_total += dstep.mid.iters;
                            trace.inner_iters_total += dstep.mid.inner_iters;
                            trace.mid_rescues += dstep.mid.rescues;
                            let v_landed = (dstep.target[s] / m_jump_s).ln();
                            let improved = dstep.delta < 0.95 * step.delta;
                            let fast_forward = v_landed.signum() == v_cur.signum()
                                && dstep.delta <= 1.05 * step.delta;
                            if improved || fast_forward {
                                log::debug!(
                                "drift jump on country {s}: ln m {x_cur:.4} -> {x_star:.4}, residual {:.3e} -> {:.3e}",
                                step.delta,
                                dstep.delta
                            );
                                trace.outer_deltas.push(dstep.delta);
                                trace.outer_iters += 1;
                                trace.drift_jumps += 1;
                                state = dstep.next;
                                if dstep.delta < cfg.tol_outer {
                                    trace.converged = true;
                                    break;
                                }
                                continue;
                            }
                            log::debug!(
                                "rejected drift jump on {s}: residual {:.3e} vs {:.3e}",
                                dstep.delta,
                                step.delta
                            );
                        }
                        Err(_) => {
                            log::debug!("rejected drift jump on {s} (evaluation failed)");
                        }
                    }
                }
            }
            let try_accel =
                cfg.accel_every > 0 && trace.outer_iters.is_multiple_of(cfg.accel_every);
            if try_accel {
                let mut accepted = false;
                // Full jump first; on rejection retry a quarter-length jump
                // (nonlinearity can make the full geometric extrapolation
                // overshoot while a shorter one still pays for itself).
                for scale in [1.0, 0.25] {
                    let Some(m_star) =
                        steffensen_proposal(&trace.outer_deltas, &state.m, &step.next.m, scale)
                    else {
                        break;
                    };
                    let jumped = BgpState {
                        w: step.next.w.clone(),
                        m: m_star,
                        p: step.next.p.clone(),
                    };
                    // Accept only if an actual evaluation at the extrapolated
                    // point beats the residual of the plain damped step.
                    match outer_step(vp, &jumped, cfg) {
                        Ok(jstep) => {
                            trace.mid_iters_total += jstep.mid.iters;
                            trace.inner_iters_total += jstep.mid.inner_iters;
                            trace.mid_rescues += jstep.mid.rescues;
                            if jstep.delta < 0.95 * step.delta {
                                log::debug!(
                                "accepted measure extrapolation (scale {scale}) at outer iter {}: residual {:.6e} -> {:.6e}, m {:?} -> {:?}",
                                trace.outer_iters,
                                step.delta,
                                jstep.delta,
                                step.next.m,
                                jstep.next.m
                            );
                                trace.outer_deltas.push(jstep.delta);
                                trace.outer_iters += 1;
                                trace.accel_jumps += 1;
                                drift_len.iter_mut().for_each(|l| *l = 0);
                                drift_sign.iter_mut().for_each(|g| *g = 0);
                                drift_base.iter_mut().for_each(|b| *b = None);
                                state = jstep.next;
                                accepted = true;
                                break;
                            }
                            log::debug!(
                            "rejected measure extrapolation (scale {scale}) at outer iter {}: residual {:.3e} vs {:.3e}",
                            trace.outer_iters,
                            jstep.delta,
                            step.delta
                        );
                        }
                        Err(_) => {
                            log::debug!("rejected measure extrapolation (evaluation failed)");
                        }
                    }
                }
                if accepted {
                    if trace.outer_deltas.last().copied().unwrap_or(f64::INFINITY) < cfg.tol_outer {
                        trace.converged = true;
                        break;
                    }
                    continue;
                }
            }
            state = step.next;
        }
        if !trace.converged {
            trace.oscillation = SolveTrace::flag_oscillation(&trace.outer_deltas);
            if trace.oscillation {
                log::warn!(
                    "outer loop oscillates near its fixed point (last deltas {:?}); consider lowering damping_outer",
                    &trace.outer_deltas[trace.outer_deltas.len().saturating_sub(5)..]
                );
            }
            let last_delta = trace.outer_deltas.last().copied().unwrap_or(f64::INFINITY);
            trace.wall_time_secs = started.elapsed().as_secs_f64();
            return Err(Error::NotConverged {
                iters: trace.outer_iters,
                tol: cfg.tol_outer,
                last_delta,
                trace: Box::new(trace),
            });
        }
        match assemble_equilibrium(vp, &state, cfg)? {
            Assembled::Done(eq) => break *eq,
            Assembled::EntryResumes {
                country,
                entrant,
                market,
            } => {
                revivals += 1;
                if revivals > vp.n {
                    trace.wall_time_secs = started.elapsed().as_secs_f64();
                    return Err(Error::DivergenceDetected {
                        loop_name: "corner revival",
                        iter: trace.outer_iters,
                        detail: format!(
                            "corner countries kept flip-flopping between exit and re-entry \
                             ({revivals} revivals for {} countries)",
                            vp.n
                        ),
                    });
                }
                log::info!(
                    "country {country} re-enters the variety market (entrant return {entrant:.6e} > market return {market:.6e}); reviving its measure and resuming"
                );
                trace.converged = false;
                trace.revivals = revivals;
                state.m[country] = REVIVAL_MEASURE;
                normalize_measures(&mut state.m);
                drift_len.iter_mut().for_each(|l| *l = 0);
                drift_sign.iter_mut().for_each(|g| *g = 0);
                drift_base.iter_mut().for_each(|b| *b = None);
            }
        }
    };
    trace.oscillation = SolveTrace::flag_oscillation(&trace.outer_deltas);
    if trace.oscillation {
        log::warn!(
            "outer loop oscillates near its fixed point (last deltas {:?}); consider lowering damping_outer",
            &trace.outer_deltas[trace.outer_deltas.len().saturating_sub(5)..]
        );
    }
    trace.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(Solution { equilibrium, trace })
}

/// Solve for the balanced growth path of a validated economy.
///
/// Deterministic for a given config: the same parameters, tolerances, and
/// seed always produce bit-identical output.
pub fn solve_bgp(vp: &ValidatedParams, cfg: &SolverConfig) -> Result<Solution> {
    solve_from(vp, initial_state(vp, cfg), cfg)
}

/// Outcome of assembling the equilibrium at a converged state: either the
/// finished object, or the finding that a zeroed country would attract
/// entry (so the corner the iteration settled into is not an equilibrium
/// and the country must be revived).
enum Assembled {
    Done(Box<Equilibrium>),
    EntryResumes {
        country: usize,
        entrant: f64,
        market: f64,
    },
}

/// Evaluate the full equilibrium object at a converged state: re-solve
/// wages and prices at the final measures, then attach revenue, profits,
/// the profit return, the growth rate, and the clearing diagnostics.
///
/// For corner states (countries with an exactly-zero measure) this also
/// checks the no-entry condition: the return an entrant variety would earn
/// there must not exceed the market return, otherwise the corner is not an
/// equilibrium and [`Assembled::EntryResumes`] is returned instead.
fn assemble_equilibrium(
    vp: &ValidatedParams,
    state: &BgpState,
    cfg: &SolverConfig,
) -> Result<Assembled> {
    let mid = mid_wage_fixed_point(vp, &state.m, &state.w, &state.p, cfg)?;
    let revenue = final_revenue(&mid.lambda_f, &mid.e);
    let pi = profits(vp, &mid.lambda_m, &revenue);
    let variety_value: f64 = state
        .m
        .iter()
        .zip(&mid.prices.p)
        .map(|(&m, &p)| m * p)
        .sum();
    let r = pi.iter().sum::<f64>() / variety_value;
    let g = vp.psi * r - vp.rho;
    if state.m.contains(&0.0) {
        let per_unit = profit_per_measure(vp, &state.m, &mid.prices.p, &revenue);
        for (s, &pi_s) in per_unit.iter().enumerate() {
            if state.m[s] > 0.0 {
                continue;
            }
            let entrant = pi_s / mid.prices.p[s];
            if entrant > r * (1.0 + 100.0 * cfg.tol_outer) {
                return Ok(Assembled::EntryResumes {
                    country: s,
                    entrant,
                    market: r,
                });
            }
        }
    }
    let goods = goods_market_residual(vp, &mid.w, &mid.lambda_f, &mid.e);
    let trade = trade_balance_residual(vp, &mid.lambda_f, &mid.lambda_m, &mid.e);
    Ok(Assembled::Done(Box::new(Equilibrium {
        w: mid.w,
        pm: mid.prices.pm,
        p: mid.prices.p,
        m: state.m.clone(),
        expenditure: mid.e,
        revenue,
        profits: pi,
        r,
        g,
        shares: ShareMatrices {
            lambda_f: mid.lambda_f,
            lambda_m: mid.lambda_m,
        },
        residuals: ResidualReport {
            goods_market: goods,
            trade_balance: trade,
        },
    })))
}

// ============================================================================
// Tests
// ============================================================================
