//! Small numerical helpers used throughout the solver.
//!
//! Everything here works on plain slices; the model dimensions are tiny
//! (a handful of countries), so dense O(N^2)/O(N^3) routines are the right
//! trade-off.

/// log(sum_i exp(x_i)) evaluated without overflow by factoring out the
/// largest term. Returns -inf for an empty slice.
#[must_use]
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Compensated (Kahan) summation. Used where a long accumulation feeds a
/// tolerance check tighter than plain summation error.
#[must_use]
pub fn kahan_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &x in xs {
        let y = x - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Largest absolute entry of a slice.
#[must_use]
pub fn sup_norm(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

/// Largest relative difference max_i |a_i - b_i| / |b_i|.
/// Entries with b_i = 0 fall back to the absolute difference.
#[must_use]
pub fn sup_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = (x - y).abs();
            if y != 0.0 {
                d / y.abs()
            } else {
                d
            }
        })
        .fold(0.0_f64, f64::max)
}

/// Solve the dense linear system `a x = b` in place by Gaussian elimination
/// with partial pivoting. `a` is row-major N x N; `b` has length N.
/// Returns `None` when a pivot underflows to zero (singular system).
#[allow(clippy::needless_range_loop)] // elimination reads a[col] while writing a[row]
pub fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        // Partial pivot: bring the largest remaining entry of this column up.
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < f64::MIN_POSITIVE {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Minimize a one-dimensional unimodal function on [lo, hi] by golden-section
/// search. Returns (argmin, min). `tol` is the absolute bracket width at
/// which the search stops.
pub fn golden_section_min<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..max_iter {
        if (hi - lo).abs() < tol {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    if fm <= f1 && fm <= f2 {
        (xm, fm)
    } else if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_matches_direct_evaluation_in_safe_range() {
        let xs = [0.3_f64, -1.2, 2.0, 0.0];
        let direct: f64 = xs.iter().map(|&x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - direct).abs() < 1e-14);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        let xs = [-1.0e4, -1.0e4 + 1.0];
        let expected = -1.0e4 + (1.0 + 1.0_f64.exp()).ln();
        assert!((log_sum_exp(&xs) - expected).abs() < 1e-10);
        let xs = [1.0e4, 1.0e4 - 1.0];
        let expected = 1.0e4 + (1.0 + (-1.0_f64).exp()).ln();
        assert!((log_sum_exp(&xs) - expected).abs() < 1e-10);
    }

    #[test]
    fn kahan_sum_beats_naive_summation() {
        // 1 + 2^-60 repeated: naive summation loses the tail entirely.
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat_n(2.0_f64.powi(-60), 1 << 16));
        let compensated = kahan_sum(&xs);
        let expected = 1.0 + 2.0_f64.powi(-60) * (1 << 16) as f64;
        assert!((compensated - expected).abs() < 1e-18);
    }

    #[test]
    fn solve_linear_recovers_known_solution() {
        let mut a = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        let x_true = [1.0, -2.0, 0.5];
        let mut b: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i][j] * x_true[j]).sum())
            .collect();
        let x = solve_linear(&mut a, &mut b).expect("system is well conditioned");
        for (got, want) in x.iter().zip(x_true.iter()) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
    }

    #[test]
    fn solve_linear_reports_singular_systems() {
        let mut a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let mut b = vec![1.0, 2.0];
        assert!(solve_linear(&mut a, &mut b).is_none());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section_min(|x| (x - 1.7).powi(2) + 3.0, -10.0, 10.0, 1e-10, 200);
        // Near a quadratic minimum the objective is flat to machine precision
        // within ~sqrt(eps)*scale of the argmin, so the abscissa cannot be
        // localized tighter than ~3e-8 here no matter the bracket tolerance.
        assert!((x - 1.7).abs() < 1e-7, "argmin {x}");
        assert!((fx - 3.0).abs() < 1e-12);
    }
}
