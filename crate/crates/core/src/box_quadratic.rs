//! Writing a wide interval quadratic in terms of a narrower one.
//!
//! For `a <= c < d <= b` we find `alpha, beta >= 0` and `gamma` with
//!
//! ```text
//! (b - x)(x - a) = alpha (d - x)(x - c) + beta (x + gamma)^2
//! ```
//!
//! which shows the box polynomial of a sub-box generates the one of the
//! enclosing box inside the quadratic module.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionCase {
    /// `c - a != b - d`.
    Asymmetric,
    /// `c - a == b - d > 0`.
    Symmetric,
    /// `c == a` and `d == b`.
    Identical,
    /// `c == a`, `d < b`.
    SharedLower,
    /// `c > a`, `d == b`.
    SharedUpper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxQuadraticDecomposition {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub case: DecompositionCase,
}

impl BoxQuadraticDecomposition {
    /// Per-coefficient `(lhs, rhs, scale)` of the identity, where `scale`
    /// sums the magnitudes of every term that enters the coefficient.
    fn coefficients(&self, a: f64, b: f64, c: f64, d: f64) -> [(f64, f64, f64); 3] {
        // (b - x)(x - a) = -x^2 + (a + b) x - ab
        let (al, be, g) = (self.alpha, self.beta, self.gamma);
        [
            (-a * b, -al * c * d + be * g * g, (a * b).abs() + (al * c * d).abs() + be.abs() * g * g),
            (a + b, al * (c + d) + 2.0 * be * g, a.abs() + b.abs() + (al * (c + d)).abs() + (2.0 * be * g).abs()),
            (-1.0, -al + be, 1.0 + al.abs() + be.abs()),
        ]
    }

    /// Largest coefficient difference between both sides of the identity.
    pub fn residual(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        self.coefficients(a, b, c, d)
            .iter()
            .map(|(l, r, _)| (l - r).abs())
            .fold(0.0, f64::max)
    }

    /// Coefficient differences divided by the size of the terms involved.
    ///
    /// When `d - c` is tiny, `alpha` and `beta` grow like `1 / (d - c)` and
    /// the absolute residual of any `f64` answer is of order `alpha * eps`;
    /// this measure stays at rounding level.
    pub fn relative_residual(&self, a: f64, b: f64, c: f64, d: f64) -> f64 {
        self.coefficients(a, b, c, d)
            .iter()
            .map(|(l, r, s)| (l - r).abs() / s.max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Returns `(alpha, beta, gamma)` for `a <= c < d <= b`.
pub fn decompose_box_quadratic(a: f64, b: f64, c: f64, d: f64) -> Result<BoxQuadraticDecomposition> {
    if ![a, b, c, d].iter().all(|v| v.is_finite()) || !(a <= c && c < d && d <= b) {
        return invalid(format!("need a <= c < d <= b, got a={a}, b={b}, c={c}, d={d}"));
    }
    // shift a to 0
    let p2 = c - a;
    let q2 = d - c;
    let r2 = b - d;
    let (alpha, beta, gamma_s, case) = if p2 == 0.0 && r2 == 0.0 {
        (1.0, 0.0, 0.0, DecompositionCase::Identical)
    } else if p2 == 0.0 {
        // x(b - x) = (b/d) x(d - x) + (b/d - 1) x^2
        let alpha = (b - a) / (d - a);
        (alpha, alpha - 1.0, 0.0, DecompositionCase::SharedLower)
    } else if r2 == 0.0 {
        // mirror z = b - x turns this into the shared-lower case
        let alpha = (b - a) / (b - c);
        return Ok(BoxQuadraticDecomposition {
            alpha,
            beta: alpha - 1.0,
            gamma: -b,
            case: DecompositionCase::SharedUpper,
        });
    } else {
        let a2 = p2 * (p2 + q2);
        if r2 == p2 {
            let beta = 4.0 * p2 * (p2 + q2) / (q2 * q2);
            (beta + 1.0, beta, -(2.0 * p2 + q2) / 2.0, DecompositionCase::Symmetric)
        } else {
            // (a2 - sqrt(a2 * b2)) / (r2 - p2), rationalized to avoid
            // cancellation when r2 is close to p2
            let b2 = r2 * (q2 + r2);
            let (sa, sb) = (a2.sqrt(), b2.sqrt());
            let s = p2 + q2 + r2;
            let gamma = -sa * s / (sa + sb);
            // beta = a2 / (gamma^2 - a2) with gamma^2 - a2 = a2 (s - sa - sb)(s + sa + sb) / (sa + sb)^2
            // and s - sa - sb written without cancellation, using
            // (p2 + q2/2)^2 - a2 = (r2 + q2/2)^2 - b2 = q2^2 / 4
            let h = q2 * q2 / 4.0;
            let deficit = h / (p2 + q2 / 2.0 + sa) + h / (r2 + q2 / 2.0 + sb);
            let beta = (sa + sb) * (sa + sb) / (deficit * (s + sa + sb));
            (beta + 1.0, beta, gamma, DecompositionCase::Asymmetric)
        }
    };
    Ok(BoxQuadraticDecomposition {
        alpha,
        beta,
        gamma: gamma_s - a,
        case,
    })
}
