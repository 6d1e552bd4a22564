//! Brute-force grid minimization and feasibility checks of candidate points.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::problem::{GpoProblem, HyperRectangle, NormalizedProblem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// A point is feasible when every `g_i >= -tau_feas`.
    pub tau_feas: f64,
    /// ... and every `|h_j| <= tau_eq`.
    pub tau_eq: f64,
    /// Maximum number of grid points.
    pub budget: u128,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            tau_feas: 1e-9,
            tau_eq: 1e-3,
            budget: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    /// Best feasible grid point and its objective value; `None` when no grid
    /// point is feasible.
    pub best: Option<(Vec<f64>, f64)>,
    pub points_per_axis: usize,
    pub total_points: u128,
    pub feasible_points: u64,
}

/// Coordinate `i` of an `n_pts`-point uniform grid on `[a, b]`, endpoints exact.
pub fn grid_coordinate(a: f64, b: f64, i: usize, n_pts: usize) -> f64 {
    if i + 1 == n_pts {
        return b;
    }
    a + (b - a) * i as f64 / (n_pts - 1) as f64
}

/// Minimizes `f` over the feasible points of a uniform grid on `bx`.
///
/// Ties are broken by the smallest grid index in lexicographic order (first
/// variable most significant), so the result does not depend on scheduling.
pub fn grid_minimize(
    p: &NormalizedProblem,
    bx: &HyperRectangle,
    points_per_axis: usize,
    opts: &GridOptions,
) -> Result<GridResult> {
    let n = p.nvars;
    if bx.nvars() != n {
        return Err(Error::InvalidInput(format!(
            "box has {} dimensions, problem has {n} variables",
            bx.nvars()
        )));
    }
    if points_per_axis < 2 {
        return Err(Error::InvalidInput("grid needs at least two points per axis".into()));
    }
    let total = (points_per_axis as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    if total > opts.budget {
        return Err(Error::GridBudget {
            required: total,
            budget: opts.budget,
        });
    }
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..points_per_axis)
                .map(|i| grid_coordinate(bx.lower()[j], bx.upper()[j], i, points_per_axis))
                .collect()
        })
        .collect();
    let ineq = p.original_inequalities();
    let eqs = &p.equalities;
    let total_u64 = total as u64;

    let point_at = |mut flat: u64, x: &mut [f64]| {
        for j in (0..n).rev() {
            let i = (flat % points_per_axis as u64) as usize;
            flat /= points_per_axis as u64;
            x[j] = coords[j][i];
        }
    };
    // (value, flat index, feasible count)
    let (best, count) = (0..total_u64)
        .into_par_iter()
        .fold(
            || (None::<(f64, u64)>, 0u64, vec![0.0; n]),
            |(best, count, mut x), flat| {
                point_at(flat, &mut x);
                let feasible = ineq.iter().all(|g| g.eval_unchecked(&x) >= -opts.tau_feas)
                    && eqs.iter().all(|h| h.eval_unchecked(&x).abs() <= opts.tau_eq);
                if !feasible {
                    return (best, count, x);
                }
                let v = p.objective.eval_unchecked(&x);
                (pick(best, Some((v, flat))), count + 1, x)
            },
        )
        .map(|(b, c, _)| (b, c))
        .reduce(|| (None, 0), |(b1, c1), (b2, c2)| (pick(b1, b2), c1 + c2));

    let best = best.map(|(v, flat)| {
        let mut x = vec![0.0; n];
        point_at(flat, &mut x);
        (x, v)
    });
    Ok(GridResult {
        best,
        points_per_axis,
        total_points: total,
        feasible_points: count,
    })
}

fn pick(a: Option<(f64, u64)>, b: Option<(f64, u64)>) -> Option<(f64, u64)> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => {
            let x_first = match x.0.total_cmp(&y.0) {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => x.1 <= y.1,
            };
            Some(if x_first { x } else { y })
        }
    }
}

/// Constraint values of a candidate point.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub objective: f64,
    /// `g_i(x)`; satisfied when `>= -delta`.
    pub inequalities: Vec<f64>,
    /// `|h_j(x)|`; satisfied when `<= delta`.
    pub equalities: Vec<f64>,
    /// `w_j(x)` for the declared box, if any.
    pub box_values: Vec<f64>,
    pub delta: f64,
    pub feasible: bool,
}

impl CheckReport {
    pub fn max_violation(&self) -> f64 {
        let g = self.inequalities.iter().chain(&self.box_values).map(|v| (-v).max(0.0));
        let h = self.equalities.iter().copied();
        g.chain(h).fold(0.0, f64::max)
    }
}

pub fn check_point(p: &GpoProblem, x: &[f64], delta: f64) -> Result<CheckReport> {
    let n = p.nvars();
    if x.len() != n {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, problem has {n} variables",
            x.len()
        )));
    }
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be nonnegative, got {delta}")));
    }
    let eval = |q: &Polynomial| q.eval_unchecked(x);
    let inequalities: Vec<f64> = p.inequalities.iter().map(eval).collect();
    let equalities: Vec<f64> = p.equalities.iter().map(|h| eval(h).abs()).collect();
    let box_values: Vec<f64> = match &p.declared_box {
        Some(bx) => (0..n).map(|j| (bx.upper()[j] - x[j]) * (x[j] - bx.lower()[j])).collect(),
        None => Vec::new(),
    };
    let feasible = inequalities.iter().chain(&box_values).all(|&v| v >= -delta)
        && equalities.iter().all(|&v| v <= delta);
    Ok(CheckReport {
        objective: eval(&p.objective),
        inequalities,
        equalities,
        box_values,
        delta,
        feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_problem;
    use crate::problem::normalize;

    #[test]
    fn one_dimensional_quadratic() {
        let p = normalize(&parse_problem("vars x\nminimize (x - 0.3)^2").unwrap());
        let bx = HyperRectangle::new(vec![0.0], vec![1.0]).unwrap();
        let r = grid_minimize(&p, &bx, 11, &GridOptions::default()).unwrap();
        let (x, v) = r.best.unwrap();
        assert!((x[0] - 0.3).abs() < 1e-12);
        assert!(v < 1e-20);
        assert_eq!(r.feasible_points, 11);
    }

    #[test]
    fn endpoints_are_exact() {
        assert_eq!(grid_coordinate(-0.1, 0.7, 4, 5), 0.7);
        assert_eq!(grid_coordinate(-0.1, 0.7, 0, 5), -0.1);
    }

    #[test]
    fn infeasible_grid_is_reported_empty() {
        let p = normalize(&parse_problem("vars x\nminimize x\nst 1 - x^2 >= 0").unwrap());
        let bx = HyperRectangle::new(vec![2.0], vec![3.0]).unwrap();
        let r = grid_minimize(&p, &bx, 101, &GridOptions::default()).unwrap();
        assert!(r.best.is_none());
        assert_eq!(r.feasible_points, 0);
    }

    #[test]
    fn budget_is_enforced() {
        let p = normalize(&parse_problem("vars a b c d e f\nminimize a").unwrap());
        let bx = HyperRectangle::uniform(6, 0.0, 1.0).unwrap();
        let err = grid_minimize(&p, &bx, 101, &GridOptions::default()).unwrap_err();
        assert!(matches!(err, Error::GridBudget { required, .. } if required == 101u128.pow(6)));
    }

    #[test]
    fn ties_pick_lexicographically_first_point() {
        let p = normalize(&parse_problem("vars x y\nminimize x^2").unwrap());
        let bx = HyperRectangle::uniform(2, -1.0, 1.0).unwrap();
        let (x, _) = grid_minimize(&p, &bx, 5, &GridOptions::default()).unwrap().best.unwrap();
        assert_eq!(x, vec![0.0, -1.0]);
    }

    #[test]
    fn equality_tolerance_filters_points() {
        let p = normalize(&parse_problem("vars x y\nminimize x + y\nst x - y == 0").unwrap());
        let bx = HyperRectangle::uniform(2, -1.0, 1.0).unwrap();
        let r = grid_minimize(&p, &bx, 21, &GridOptions::default()).unwrap();
        assert_eq!(r.feasible_points, 21);
        assert_eq!(r.best.unwrap().0, vec![-1.0, -1.0]);
    }

    #[test]
    fn check_point_report() {
        let p = parse_problem("vars x y\nminimize x*y\nst x >= 0\nst x + y == 1\nbox -1 1").unwrap();
        let r = check_point(&p, &[0.5, 0.5], 1e-9).unwrap();
        assert!(r.feasible);
        assert_eq!(r.objective, 0.25);
        assert_eq!(r.box_values, vec![0.75, 0.75]);
        let r = check_point(&p, &[-0.1, 1.1], 1e-9).unwrap();
        assert!(!r.feasible);
        assert!((r.max_violation() - 0.21).abs() < 1e-12);
        assert!(check_point(&p, &[0.0], 1e-9).is_err());
    }
}
