//! Branch and bound over hyper-rectangles driven by SOS lower bounds.

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::problem::{HyperRectangle, NormalizedProblem};
use crate::relax::{glb_bk, GlbStatus};
use crate::sdp::SdpOptions;

/// A live branch. `lambda` is `+inf` for boxes certified infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    pub bx: HyperRectangle,
    pub lambda: f64,
    pub parent: Option<usize>,
    pub depth: usize,
}

#[derive(Debug, Clone)]
pub struct BnbConfig {
    /// Relaxation order.
    pub k: usize,
    /// Trim tolerance, `eta > 0`.
    pub eta: f64,
    /// Number of loop iterations `l >= 1`.
    pub loops: usize,
    pub initial_box: HyperRectangle,
    pub sdp: SdpOptions,
}

impl BnbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidInput(format!("eta must be positive, got {}", self.eta)));
        }
        if self.loops == 0 {
            return Err(Error::InvalidInput("loop count must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidInput(format!("k must be at least 2, got {}", self.k)));
        }
        Ok(())
    }
}

/// Smallest `l` with `l > n log2(L sqrt(n) / eta)`, `L` the longest edge.
pub fn recommended_loops(bx: &HyperRectangle, eta: f64) -> usize {
    let n = bx.nvars() as f64;
    let t = n * (bx.longest_edge() * n.sqrt() / eta).log2();
    if t < 0.0 {
        1
    } else {
        t.floor() as usize + 1
    }
}

/// Splits at the midpoint of the longest edge (smallest index on ties).
pub fn bisect(bx: &HyperRectangle) -> (HyperRectangle, HyperRectangle) {
    let r = bx.longest_axis();
    let mid = 0.5 * (bx.lower()[r] + bx.upper()[r]);
    let mut lo_b = bx.upper().to_vec();
    lo_b[r] = mid;
    let mut hi_a = bx.lower().to_vec();
    hi_a[r] = mid;
    (
        HyperRectangle::from_parts_unchecked(bx.lower().to_vec(), lo_b),
        HyperRectangle::from_parts_unchecked(hi_a, bx.upper().to_vec()),
    )
}

/// Picks the branch to split at iteration `m`: among branches with
/// `lambda <= min lambda + m eta / (1 + l)`, the one of smallest volume,
/// then smallest id. Returns the position in `branches`.
pub fn select_branch(branches: &[Branch], m: usize, eta: f64, l: usize, k: usize) -> Result<usize> {
    let jstar = branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.lambda < f64::INFINITY)
        .min_by(|(_, x), (_, y)| x.lambda.total_cmp(&y.lambda).then(x.id.cmp(&y.id)))
        .map(|(i, _)| i)
        .ok_or(Error::GloballyInfeasible { k })?;
    let threshold = branches[jstar].lambda + m as f64 * eta / (1.0 + l as f64);
    let pos = branches
        .iter()
        .enumerate()
        .filter(|(_, b)| b.lambda < f64::INFINITY && b.lambda <= threshold)
        .min_by(|(_, x), (_, y)| {
            x.bx.log_volume()
                .total_cmp(&y.bx.log_volume())
                .then(x.id.cmp(&y.id))
        })
        .map(|(i, _)| i)
        .expect("j* is eligible");
    Ok(pos)
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundOutcome {
    Bound(f64),
    Infeasible,
    Failure(String),
}

/// Lower-bound evaluator for the branch-and-bound drivers.
pub trait BoxBounder: Sync {
    fn bound(&self, bx: &HyperRectangle) -> Result<BoundOutcome>;
}

/// Exact or approximate oracles given as closures; `+inf` means infeasible.
impl<F> BoxBounder for F
where
    F: Fn(&HyperRectangle) -> f64 + Sync,
{
    fn bound(&self, bx: &HyperRectangle) -> Result<BoundOutcome> {
        let v = self(bx);
        Ok(if v == f64::INFINITY {
            BoundOutcome::Infeasible
        } else {
            BoundOutcome::Bound(v)
        })
    }
}

/// The order-`k` SOS bound.
pub struct SosBounder<'a> {
    pub problem: &'a NormalizedProblem,
    pub k: usize,
    pub opts: SdpOptions,
}

impl BoxBounder for SosBounder<'_> {
    fn bound(&self, bx: &HyperRectangle) -> Result<BoundOutcome> {
        let r = glb_bk(self.problem, bx, self.k, &self.opts)?;
        Ok(match r.status {
            GlbStatus::Bound(v) => BoundOutcome::Bound(v),
            GlbStatus::BoxInfeasible => BoundOutcome::Infeasible,
            GlbStatus::SolverFailure(s) => BoundOutcome::Failure(s.to_string()),
        })
    }
}

/// One iteration of the modified algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub m: usize,
    pub branch_id: usize,
    pub lambda_m: f64,
    pub lambda_star: f64,
    pub longest_edge: f64,
    pub volume: f64,
    pub center: Vec<f64>,
    pub f_center: f64,
    /// `sum |g_i(x_m)|` over violated original inequalities.
    pub ineq_violation: f64,
    /// `sum |h_j(x_m)|`.
    pub eq_violation: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    /// Centroid of the box selected in the last iteration.
    pub x: Vec<f64>,
    pub last_box: HyperRectangle,
    /// `min_j lambda(j)` after the final update.
    pub lambda_star: f64,
    pub trace: Vec<TraceRow>,
    pub branches: Vec<Branch>,
    pub solver_failures: usize,
}

fn child_lambda(out: BoundOutcome, parent: f64, bx: &HyperRectangle, failures: &mut usize) -> f64 {
    match out {
        // a sub-box can only raise the bound
        BoundOutcome::Bound(v) => v.max(parent),
        BoundOutcome::Infeasible => f64::INFINITY,
        BoundOutcome::Failure(s) => {
            log::warn!("lower bound failed on {bx} ({s}); pruning the box");
            *failures += 1;
            f64::INFINITY
        }
    }
}

/// Violation sums of the original constraints at `x`.
pub fn violation_sums(p: &NormalizedProblem, x: &[f64]) -> (f64, f64) {
    let g: f64 = p
        .original_inequalities()
        .iter()
        .map(|g| g.eval_unchecked(x))
        .filter(|&v| v < 0.0)
        .fold(0.0, |acc, v| acc - v);
    let h = p.equalities.iter().fold(0.0, |acc, h| acc + h.eval_unchecked(x).abs());
    (g, h)
}

/// Runs the modified algorithm with the order-`k` SOS bound.
pub fn run_modified_bnb(p: &NormalizedProblem, cfg: &BnbConfig) -> Result<BnbResult> {
    let bounder = SosBounder {
        problem: p,
        k: cfg.k,
        opts: cfg.sdp,
    };
    run_modified_bnb_with(p, cfg, &bounder)
}

/// Runs exactly `cfg.loops` iterations with an arbitrary bound evaluator.
pub fn run_modified_bnb_with(
    p: &NormalizedProblem,
    cfg: &BnbConfig,
    bounder: &dyn BoxBounder,
) -> Result<BnbResult> {
    cfg.validate()?;
    if cfg.initial_box.nvars() != p.nvars {
        return Err(Error::InvalidInput(format!(
            "box has {} dimensions, problem has {} variables",
            cfg.initial_box.nvars(),
            p.nvars
        )));
    }
    let root_lambda = match bounder.bound(&cfg.initial_box)? {
        BoundOutcome::Bound(v) => v,
        BoundOutcome::Infeasible => return Err(Error::GloballyInfeasible { k: cfg.k }),
        BoundOutcome::Failure(status) => {
            return Err(Error::Solver {
                box_desc: cfg.initial_box.to_string(),
                status,
            })
        }
    };
    let mut branches = vec![Branch {
        id: 0,
        bx: cfg.initial_box.clone(),
        lambda: root_lambda,
        parent: None,
        depth: 0,
    }];
    let mut next_id = 1;
    let mut failures = 0;
    let mut trace = Vec::with_capacity(cfg.loops);
    let mut last_box = cfg.initial_box.clone();

    for m in 0..cfg.loops {
        let pos = select_branch(&branches, m, cfg.eta, cfg.loops, cfg.k)?;
        let sel = branches[pos].clone();
        let lambda_star = branches.iter().map(|b| b.lambda).fold(f64::INFINITY, f64::min);
        let center = sel.bx.center();
        let f_center = p.objective.eval_unchecked(&center);
        let (ineq_violation, eq_violation) = violation_sums(p, &center);
        trace.push(TraceRow {
            m,
            branch_id: sel.id,
            lambda_m: sel.lambda,
            lambda_star,
            longest_edge: sel.bx.longest_edge(),
            volume: sel.bx.volume(),
            center,
            f_center,
            ineq_violation,
            eq_violation,
            gap: (f_center - lambda_star).abs(),
        });
        log::debug!(
            "m={m} branch={} lambda={} lambda*={lambda_star} edge={}",
            sel.id,
            sel.lambda,
            sel.bx.longest_edge()
        );

        let (lo, hi) = bisect(&sel.bx);
        let (r_lo, r_hi) = rayon::join(|| bounder.bound(&lo), || bounder.bound(&hi));
        let l_lo = child_lambda(r_lo?, sel.lambda, &lo, &mut failures);
        let l_hi = child_lambda(r_hi?, sel.lambda, &hi, &mut failures);
        let make = |id, bx, lambda| Branch {
            id,
            bx,
            lambda,
            parent: Some(sel.id),
            depth: sel.depth + 1,
        };
        branches[pos] = make(next_id, lo, l_lo);
        branches.push(make(next_id + 1, hi, l_hi));
        next_id += 2;
        last_box = sel.bx;
    }

    let lambda_star = branches.iter().map(|b| b.lambda).fold(f64::INFINITY, f64::min);
    Ok(BnbResult {
        x: last_box.center(),
        last_box,
        lambda_star,
        trace,
        branches,
        solver_failures: failures,
    })
}

/// The ideal algorithm: bisect the active box and keep the half with the
/// smaller lower bound (the lower half on ties).
pub fn run_ideal_bnb(
    p: &NormalizedProblem,
    initial: &HyperRectangle,
    iterations: usize,
    glb: &dyn BoxBounder,
) -> Result<HyperRectangle> {
    if initial.nvars() != p.nvars {
        return Err(Error::InvalidInput(format!(
            "box has {} dimensions, problem has {} variables",
            initial.nvars(),
            p.nvars
        )));
    }
    let value = |bx: &HyperRectangle| -> Result<f64> {
        Ok(match glb.bound(bx)? {
            BoundOutcome::Bound(v) => v,
            BoundOutcome::Infeasible => f64::INFINITY,
            BoundOutcome::Failure(s) => {
                log::warn!("lower bound failed on {bx} ({s})");
                f64::INFINITY
            }
        })
    };
    let mut active = initial.clone();
    for _ in 0..iterations {
        let (lo, hi) = bisect(&active);
        let (v_lo, v_hi) = (value(&lo)?, value(&hi)?);
        active = if v_lo <= v_hi { lo } else { hi };
    }
    Ok(active)
}

/// Upper bound of `max |q|` over the box from `|coefficients|` and `max |x_j|`.
fn coefficient_bound(q: &Polynomial, radius: &[f64]) -> f64 {
    q.terms()
        .map(|(m, c)| {
            let r: f64 = m
                .exponents()
                .iter()
                .zip(radius)
                .map(|(&e, &r)| r.powi(e as i32))
                .product();
            c.abs() * r
        })
        .sum()
}

/// `delta = L eps` with `L` bounding the gradient norm of `f` and every `g_i` on the box.
pub fn lipschitz_tolerance(p: &NormalizedProblem, bx: &HyperRectangle, eps: f64) -> f64 {
    let radius: Vec<f64> = bx
        .lower()
        .iter()
        .zip(bx.upper())
        .map(|(a, b)| a.abs().max(b.abs()))
        .collect();
    let lip = std::iter::once(&p.objective)
        .chain(&p.inequalities)
        .map(|q| {
            (0..p.nvars)
                .map(|i| coefficient_bound(&q.derivative(i), &radius).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    lip * eps
}
