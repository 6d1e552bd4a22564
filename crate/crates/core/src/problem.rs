//! Problem representation: objective, constraints and bounding boxes.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::poly::Polynomial;

/// Axis-aligned box `{x : a <= x <= b}` with `a_i < b_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRectangle {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl HyperRectangle {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return invalid(format!(
                "box corners of lengths {} and {}",
                a.len(),
                b.len()
            ));
        }
        for (i, (lo, hi)) in a.iter().zip(&b).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return invalid(format!("box edge {} is [{lo}, {hi}]", i + 1));
            }
        }
        Ok(HyperRectangle { a, b })
    }

    /// The cube `[lo, hi]^n`.
    pub fn uniform(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn lower(&self) -> &[f64] {
        &self.a
    }

    pub fn upper(&self) -> &[f64] {
        &self.b
    }

    pub fn nvars(&self) -> usize {
        self.a.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        self.a.iter().zip(&self.b).map(|(a, b)| b - a)
    }

    pub fn longest_edge(&self) -> f64 {
        self.edges().fold(0.0, f64::max)
    }

    /// Index of the longest edge; ties go to the smallest index.
    pub fn longest_axis(&self) -> usize {
        let mut best = 0;
        let mut len = f64::NEG_INFINITY;
        for (i, e) in self.edges().enumerate() {
            if e > len {
                best = i;
                len = e;
            }
        }
        best
    }

    pub fn volume(&self) -> f64 {
        self.edges().product()
    }

    pub fn log_volume(&self) -> f64 {
        self.edges().map(f64::ln).sum()
    }

    pub fn center(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| 0.5 * (b - a)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.a.len()
            && x.iter()
                .zip(self.a.iter().zip(&self.b))
                .all(|(xi, (a, b))| *a <= *xi && *xi <= *b)
    }

    pub fn contains_box(&self, other: &HyperRectangle) -> bool {
        other.nvars() == self.nvars()
            && (0..self.nvars()).all(|i| self.a[i] <= other.a[i] && other.b[i] <= self.b[i])
    }

    pub(crate) fn from_parts_unchecked(a: Vec<f64>, b: Vec<f64>) -> Self {
        HyperRectangle { a, b }
    }
}

impl std::fmt::Display for HyperRectangle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let edges: Vec<String> = self
            .a
            .iter()
            .zip(&self.b)
            .map(|(a, b)| format!("[{a}, {b}]"))
            .collect();
        f.write_str(&edges.join(" x "))
    }
}

/// `minimize f(x)` subject to `g_i(x) >= 0` and `h_j(x) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpoProblem {
    pub var_names: Vec<String>,
    pub objective: Polynomial,
    pub inequalities: Vec<Polynomial>,
    pub equalities: Vec<Polynomial>,
    pub declared_box: Option<HyperRectangle>,
}

impl GpoProblem {
    pub fn new(
        var_names: Vec<String>,
        objective: Polynomial,
        inequalities: Vec<Polynomial>,
        equalities: Vec<Polynomial>,
        declared_box: Option<HyperRectangle>,
    ) -> Result<Self> {
        let n = var_names.len();
        if n == 0 {
            return invalid("problem has no variables");
        }
        let all = std::iter::once(&objective)
            .chain(&inequalities)
            .chain(&equalities);
        if all.clone().any(|p| p.nvars() != n) {
            return invalid("all polynomials must share the declared variable count");
        }
        if let Some(bx) = &declared_box {
            if bx.nvars() != n {
                return invalid("declared box dimension does not match the variable count");
            }
        }
        Ok(GpoProblem {
            var_names,
            objective,
            inequalities,
            equalities,
            declared_box,
        })
    }

    /// Problem with default variable names `x1..xn`.
    pub fn with_default_names(
        objective: Polynomial,
        inequalities: Vec<Polynomial>,
        equalities: Vec<Polynomial>,
        declared_box: Option<HyperRectangle>,
    ) -> Result<Self> {
        let names = (1..=objective.nvars()).map(|i| format!("x{i}")).collect();
        Self::new(names, objective, inequalities, equalities, declared_box)
    }

    pub fn nvars(&self) -> usize {
        self.var_names.len()
    }

    /// Renders the problem in the text format accepted by [`crate::parse_problem`].
    pub fn to_text(&self) -> String {
        let names = &self.var_names;
        let mut s = String::new();
        let _ = writeln!(s, "vars {}", names.join(" "));
        let _ = writeln!(s, "minimize {}", self.objective.fmt_with(names));
        for g in &self.inequalities {
            let _ = writeln!(s, "st {} >= 0", g.fmt_with(names));
        }
        for h in &self.equalities {
            let _ = writeln!(s, "st {} == 0", h.fmt_with(names));
        }
        if let Some(bx) = &self.declared_box {
            for (i, name) in names.iter().enumerate() {
                let _ = writeln!(s, "box {name} {} {}", bx.lower()[i], bx.upper()[i]);
            }
        }
        s
    }
}

/// Inequality-only form: `[g_1..g_s, h_1, -h_1, .., h_t, -h_t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedProblem {
    pub nvars: usize,
    pub objective: Polynomial,
    pub inequalities: Vec<Polynomial>,
    /// Number of leading inequalities that were original `g_i`.
    pub num_original_inequalities: usize,
    /// Original equalities, kept for violation reporting.
    pub equalities: Vec<Polynomial>,
}

impl NormalizedProblem {
    /// Whether inequality `i` came from an equality constraint.
    pub fn is_equality_derived(&self, i: usize) -> bool {
        i >= self.num_original_inequalities
    }

    pub fn original_inequalities(&self) -> &[Polynomial] {
        &self.inequalities[..self.num_original_inequalities]
    }
}

pub fn normalize(p: &GpoProblem) -> NormalizedProblem {
    let mut inequalities = p.inequalities.clone();
    for h in &p.equalities {
        inequalities.push(h.clone());
        inequalities.push(h.neg());
    }
    NormalizedProblem {
        nvars: p.nvars(),
        objective: p.objective.clone(),
        inequalities,
        num_original_inequalities: p.inequalities.len(),
        equalities: p.equalities.clone(),
    }
}

/// The declared box if there is one, otherwise `[-r, r]^n`.
pub fn initial_box(p: &GpoProblem, r: f64) -> Result<HyperRectangle> {
    if let Some(bx) = &p.declared_box {
        return Ok(bx.clone());
    }
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!(
            "outer radius must be positive when no box is declared (got {r})"
        ));
    }
    HyperRectangle::uniform(p.nvars(), -r, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use proptest::prelude::*;

    fn x(n: usize, i: usize) -> Polynomial {
        Polynomial::var(n, i)
    }

    #[test]
    fn normalize_orders_equalities_after_inequalities() {
        let n = 2;
        let g = vec![x(n, 0), x(n, 1), Polynomial::constant(n, 1.0)];
        let h = vec![x(n, 0).mul(&x(n, 1)).unwrap(), x(n, 1).scale(2.0)];
        let p = GpoProblem::with_default_names(x(n, 0), g.clone(), h.clone(), None).unwrap();
        let np = normalize(&p);
        assert_eq!(np.inequalities.len(), 7);
        assert_eq!(&np.inequalities[..3], g.as_slice());
        assert_eq!(np.inequalities[3], h[0]);
        assert_eq!(np.inequalities[4], h[0].neg());
        assert_eq!(np.inequalities[5], h[1]);
        assert_eq!(np.inequalities[6], h[1].neg());
        assert_eq!(np.equalities, h);
        assert!(np.is_equality_derived(3) && !np.is_equality_derived(2));
    }

    #[test]
    fn normalize_without_equalities_is_identity() {
        let g = vec![x(1, 0)];
        let p = GpoProblem::with_default_names(x(1, 0), g.clone(), vec![], None).unwrap();
        assert_eq!(normalize(&p).inequalities, g);
    }

    #[test]
    fn single_equality_becomes_pair() {
        let p = GpoProblem::with_default_names(x(1, 0), vec![], vec![x(1, 0)], None).unwrap();
        assert_eq!(normalize(&p).inequalities, vec![x(1, 0), x(1, 0).neg()]);
    }

    #[test]
    fn initial_box_rules() {
        let p = GpoProblem::with_default_names(Polynomial::zero(6), vec![], vec![], None).unwrap();
        let bx = initial_box(&p, 10.0).unwrap();
        assert_eq!(bx.lower(), &[-10.0; 6]);
        assert_eq!(bx.upper(), &[10.0; 6]);
        assert!(initial_box(&p, 0.0).is_err());

        let declared = HyperRectangle::uniform(1, -1.0, 1.0).unwrap();
        let p = GpoProblem::with_default_names(x(1, 0), vec![], vec![], Some(declared.clone()))
            .unwrap();
        assert_eq!(initial_box(&p, 5.0).unwrap(), declared);
        assert_eq!(initial_box(&p, 0.0).unwrap(), declared);
    }

    #[test]
    fn box_validation() {
        assert!(HyperRectangle::new(vec![0.0], vec![0.0]).is_err());
        assert!(HyperRectangle::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let bx = HyperRectangle::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(bx.volume(), 2.0);
        assert_eq!(bx.longest_axis(), 0);
        assert!((bx.log_volume() - 2f64.ln()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn normalized_feasibility_matches_original(
            pt in proptest::collection::vec(-2.0f64..2.0, 2),
            snap in any::<bool>(),
        ) {
            // g = 1 - x1^2 - x2^2, h = x1 - x2
            let n = 2;
            let g = Polynomial::constant(n, 1.0)
                .sub(&x(n, 0).pow(2)).unwrap()
                .sub(&x(n, 1).pow(2)).unwrap();
            let h = x(n, 0).sub(&x(n, 1)).unwrap();
            let p = GpoProblem::with_default_names(x(n, 0), vec![g.clone()], vec![h.clone()], None).unwrap();
            let np = normalize(&p);
            let pt = if snap { vec![pt[0], pt[0]] } else { pt };
            let orig = g.eval(&pt).unwrap() >= 0.0 && h.eval(&pt).unwrap() == 0.0;
            let norm = np.inequalities.iter().all(|q| q.eval(&pt).unwrap() >= 0.0);
            prop_assert_eq!(orig, norm);
        }
    }
}
