//! Independent verification oracles.
//!
//! Everything here exists to cross-check the production code paths from a
//! different algorithmic route and is only exercised by the test suites.
//! None of these functions are called by the online algorithms themselves:
//! they are slow, exhaustive, or both, on purpose.

use crate::domains::Halfspace;
use crate::linalg::SymMatrix;
use crate::vecmath::{dist, dot, norm};

/// Solves the k×k system M x = rhs by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot collapses.
fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rhs.len();
    for col in 0..k {
        let (pivot_row, pivot) = (col..k)
            .map(|r| (r, m[r][col].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        if pivot < 1e-12 {
            return None;
        }
        m.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for r in (col + 1)..k {
            let f = m[r][col] / m[col][col];
            for c in col..k {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let mut s = rhs[row];
        for c in (row + 1)..k {
            s -= m[row][c] * x[c];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Exact projection onto a polyhedron {x : ⟨a_j, x⟩ ≤ b_j} by enumerating
/// every subset of active constraints, solving the equality-constrained
/// least-squares problem for each, and returning the feasible candidate
/// closest to `y`. Exponential in the number of rows; test scale only.
pub fn project_polyhedron_active_set(y: &[f64], rows: &[Halfspace]) -> Option<Vec<f64>> {
    let m = rows.len();
    let d = y.len();
    assert!(m <= 20, "active-set enumeration is exponential in the row count");
    let mut best: Option<(f64, Vec<f64>)> = None;
    let feasible = |x: &[f64]| rows.iter().all(|r| r.violation(x) <= 1e-9);
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|j| mask & (1 << j) != 0).collect();
        if active.len() > d {
            continue;
        }
        let candidate = if active.is_empty() {
            y.to_vec()
        } else {
            // min ‖x − y‖² s.t. A x = b  ⇒  x = y − A'(AA')⁻¹(Ay − b)
            let k = active.len();
            let gram: Vec<Vec<f64>> = active
                .iter()
                .map(|&i| {
                    active
                        .iter()
                        .map(|&j| dot(&rows[i].normal, &rows[j].normal))
                        .collect()
                })
                .collect();
            let resid: Vec<f64> = active
                .iter()
                .map(|&i| dot(&rows[i].normal, y) - rows[i].offset)
                .collect();
            let Some(mult) = solve_dense(gram, resid) else { continue };
            let mut x = y.to_vec();
            for t in 0..k {
                for c in 0..d {
                    x[c] -= mult[t] * rows[active[t]].normal[c];
                }
            }
            x
        };
        if !feasible(&candidate) {
            continue;
        }
        let dsq = dist(&candidate, y);
        if best.as_ref().map_or(true, |(b, _)| dsq < *b) {
            best = Some((dsq, candidate));
        }
    }
    best.map(|(_, x)| x)
}

/// Ball projection through a Lagrange-multiplier bisection instead of the
/// closed-form radial rescale.
pub fn project_ball_bisection(y: &[f64], radius: f64) -> Vec<f64> {
    let n = norm(y);
    if n <= radius {
        return y.to_vec();
    }
    // ‖y/(1+μ)‖ = radius is monotone decreasing in μ ≥ 0.
    let (mut lo, mut hi) = (0.0, n / radius);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if n / (1.0 + mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    y.iter().map(|v| v / (1.0 + mu)).collect()
}

/// Box projection by trying every KKT support pattern per coordinate.
pub fn project_box_enumeration(y: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(lower.iter().zip(upper))
        .map(|(yi, (l, u))| {
            let candidates = [*yi, *l, *u];
            candidates
                .into_iter()
                .filter(|c| *c >= *l - 1e-12 && *c <= *u + 1e-12)
                .min_by(|a, b| {
                    (a - yi).abs().partial_cmp(&(b - yi).abs()).unwrap()
                })
                .unwrap()
        })
        .collect()
}

/// Projection onto {x ≥ 0, Σx ≤ s} by enumerating support sets.
pub fn project_solid_simplex_enumeration(y: &[f64], scale: f64) -> Vec<f64> {
    let d = y.len();
    assert!(d <= 12);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| {
        if x.iter().any(|&v| v < -1e-12) {
            return;
        }
        if x.iter().sum::<f64>() > scale + 1e-12 {
            return;
        }
        let dsq = dist(&x, y);
        if best.as_ref().map_or(true, |(b, _)| dsq < *b) {
            best = Some((dsq, x));
        }
    };
    for mask in 0u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        // Case 1: budget inactive — free coordinates keep their value.
        let mut x1 = vec![0.0; d];
        for &i in &support {
            x1[i] = y[i];
        }
        consider(x1);
        // Case 2: budget active — uniform shift on the support.
        if !support.is_empty() {
            let theta =
                (support.iter().map(|&i| y[i]).sum::<f64>() - scale) / support.len() as f64;
            let mut x2 = vec![0.0; d];
            for &i in &support {
                x2[i] = y[i] - theta;
            }
            consider(x2);
        }
    }
    best.map(|(_, x)| x).unwrap_or_else(|| vec![0.0; d])
}

/// Generalized ball projection argmin_{‖y‖ ≤ radius} (y − target)' Σ (y − target)
/// solved by pure bisection on the KKT multiplier, with each candidate
/// obtained from a dense Gaussian solve of (Σ + μI) y = Σ·target. This path
/// shares no code with the eigendecomposition-based production routine.
pub fn sigma_ball_projection_bisection(
    sigma: &SymMatrix,
    target: &[f64],
    radius: f64,
) -> Vec<f64> {
    if norm(target) <= radius {
        return target.to_vec();
    }
    let d = target.len();
    let st = sigma.matvec(target);
    let solve_for = |mu: f64| -> Option<Vec<f64>> {
        let m: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| sigma.get(i, j) + if i == j { mu } else { 0.0 })
                    .collect()
            })
            .collect();
        solve_dense(m, st.clone())
    };
    let mut hi = 1.0;
    while solve_for(hi).map_or(true, |x| norm(&x) > radius) {
        hi *= 2.0;
        if hi > 1e18 {
            break;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match solve_for(mid) {
            Some(x) if norm(&x) > radius => lo = mid,
            _ => hi = mid,
        }
    }
    solve_for(hi).unwrap_or_else(|| target.to_vec())
}

/// Central finite difference of a scalar function along every coordinate.
pub fn finite_difference_gradient(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    h: f64,
) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += h;
            minus[i] -= h;
            (f(&plus) - f(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Least-squares slope of y against x.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}
