//! Bounded scalar minimization in the style of Brent's method.
//!
//! Combines golden-section steps with parabolic interpolation inside a fixed
//! bracket, but starts from a caller-supplied point instead of the first
//! golden-section point so the search respects a domain-informed initial
//! threshold. Because the fitting objectives are piecewise constant, a final
//! refinement probes the midpoints of the two bracket halves and the bracket
//! edges and keeps any strict improvement.

/// Fraction of the step taken by a golden-section move.
const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrentResult {
    /// Argument of the best value found.
    pub x: f64,
    /// Objective value at `x`.
    pub fx: f64,
    /// Number of objective evaluations spent.
    pub evals: usize,
}

/// Minimizes `f` over `[lo, hi]` starting from `init`.
///
/// `xatol` is the absolute convergence tolerance on the argument. The result
/// always lies inside `[lo, hi]`; `init` is clamped into the interval first.
pub fn brent_min<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    init: f64,
    xatol: f64,
    max_iter: usize,
) -> BrentResult {
    assert!(lo < hi, "empty search interval [{lo}, {hi}]");
    assert!(xatol > 0.0, "tolerance must be positive");
    let sqrt_eps = f64::EPSILON.sqrt();
    let mut a = lo;
    let mut b = hi;
    let mut x = init.clamp(lo, hi);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let mut evals = 1;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;

    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = sqrt_eps * x.abs() + xatol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut use_golden = true;
        if e.abs() > tol1 {
            // Parabola through (v, fv), (w, fw), (x, fx).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if m >= x { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= m { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + if d >= 0.0 { tol1 } else { -tol1 } };
        let fu = f(u);
        evals += 1;
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv) = (w, fw);
            (w, fw) = (x, fx);
            (x, fx) = (u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv) = (w, fw);
                (w, fw) = (u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }

    // Plateau escape: probe the halves of the final bracket and its edges.
    for candidate in [0.5 * (a + x), 0.5 * (x + b), a, b] {
        let fc = f(candidate);
        evals += 1;
        if fc < fx {
            x = candidate;
            fx = fc;
        }
    }
    BrentResult { x, fx, evals }
}
