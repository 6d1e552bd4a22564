//! SOS and moment lower-bound relaxations of `min f` over `S ∩ box`.
//!
//! The box `[a, b]` contributes generators `w_j = (b_j - x_j)(x_j - a_j)`.
//! Before assembly every polynomial is rewritten in `u in [-1, 1]^n` through
//! `x = center + half * u`; this affine change of variables maps the
//! degree-bounded module onto itself, so the bound is unchanged but the SDP
//! stays well conditioned on tiny boxes. Generators are additionally scaled
//! to unit max-coefficient, and the objective is shifted and scaled; the
//! reported bounds are mapped back.
//!
//! An equality `h = 0` arrives as the pair `h >= 0`, `-h >= 0`. Its two SOS
//! multipliers only ever enter as `(sigma_+ - sigma_-) h`, and differences of
//! SOS polynomials of degree `2d` are exactly the polynomials of degree `2d`,
//! so the pair is assembled as one free multiplier. The module is the same;
//! the SDP loses an unbounded direction.

use crate::error::{Error, Result};
use crate::poly::{Monomial, MonomialBasis, Polynomial};
use crate::problem::{HyperRectangle, NormalizedProblem};
use nalgebra::DMatrix;

use crate::sdp::{solve_sdp, LinearFunctional, SdpOptions, SdpProblem, SdpSolution, SdpStatus};

/// `w_j(x) = (b_j - x_j)(x_j - a_j)` for every axis.
pub fn box_polynomials(bx: &HyperRectangle) -> Vec<Polynomial> {
    let n = bx.nvars();
    (0..n)
        .map(|j| {
            let x = Polynomial::var(n, j);
            let upper = Polynomial::constant(n, bx.upper()[j]).sub(&x).expect("same nvars");
            let lower = x.sub(&Polynomial::constant(n, bx.lower()[j])).expect("same nvars");
            upper.mul(&lower).expect("same nvars")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub label: String,
    pub poly: Polynomial,
    /// Multiplier is an arbitrary polynomial instead of an SOS.
    pub equality: bool,
}

impl Generator {
    pub fn inequality(label: impl Into<String>, poly: Polynomial) -> Self {
        Generator {
            label: label.into(),
            poly,
            equality: false,
        }
    }
}

/// Generators of the degree-`k` module with their multiplier degrees.
///
/// `generators[0]` is the constant `1`. Multiplier `i` has degree
/// `2 * half_degrees[i]` with `half_degrees[i] = (k - deg g_i) / 2`.
#[derive(Debug, Clone)]
pub struct ModuleSpec {
    pub k: usize,
    pub generators: Vec<Generator>,
    pub half_degrees: Vec<usize>,
}

impl ModuleSpec {
    /// `generators` excludes the implicit leading `1`.
    pub fn new(nvars: usize, generators: Vec<Generator>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!(
                "relaxation order k = {k}; k must be at least 2"
            )));
        }
        let mut gens = vec![Generator::inequality("1", Polynomial::constant(nvars, 1.0))];
        let mut degs = vec![k / 2];
        for g in generators {
            let dg = g.poly.degree();
            if dg > k {
                return Err(Error::Degree {
                    what: g.label,
                    degree: dg,
                    k,
                });
            }
            degs.push((k - dg) / 2);
            gens.push(g);
        }
        Ok(ModuleSpec {
            k,
            generators: gens,
            half_degrees: degs,
        })
    }

    /// Monomials of multiplier `i`: `Z_{d_i}` for SOS multipliers (Gram
    /// basis), all of degree `<= 2 d_i` for free ones.
    fn multiplier_bases(&self, n: usize) -> Result<Vec<MonomialBasis>> {
        self.generators
            .iter()
            .zip(&self.half_degrees)
            .map(|(g, &d)| MonomialBasis::new(n, if g.equality { 2 * d } else { d }))
            .collect()
    }
}

/// Problem data rewritten on `[-1, 1]^n`.
#[derive(Debug, Clone)]
struct Scaled {
    nvars: usize,
    center: Vec<f64>,
    half: Vec<f64>,
    objective: Polynomial,
    f_shift: f64,
    f_scale: f64,
    module: ModuleSpec,
}

impl Scaled {
    fn new(p: &NormalizedProblem, bx: &HyperRectangle, k: usize) -> Result<Self> {
        let n = p.nvars;
        if bx.nvars() != n {
            return Err(Error::InvalidInput(format!(
                "box has {} dimensions, problem has {n} variables",
                bx.nvars()
            )));
        }
        let df = p.objective.degree();
        if df > k {
            return Err(Error::Degree {
                what: "objective".into(),
                degree: df,
                k,
            });
        }
        let center = bx.center();
        let half = bx.half_widths();
        let fu = p.objective.affine_substitute(&center, &half);
        let f_shift = fu.constant_term();
        let mut f0 = fu.clone();
        f0.add_term(Monomial::one(n), -f_shift);
        let f_scale = if f0.is_zero() { 1.0 } else { f0.max_abs_coeff() };
        let objective = f0.scale(1.0 / f_scale);

        let mut gens = Vec::new();
        for (i, g) in p.inequalities.iter().enumerate() {
            let equality = p.is_equality_derived(i);
            let label = if equality {
                let e = i - p.num_original_inequalities;
                if e % 2 == 1 {
                    // the negated copy is covered by the free multiplier
                    continue;
                }
                format!("equality {}", e / 2 + 1)
            } else {
                format!("inequality {}", i + 1)
            };
            if g.degree() > k {
                return Err(Error::Degree {
                    what: label,
                    degree: g.degree(),
                    k,
                });
            }
            let gu = g.affine_substitute(&center, &half);
            if gu.is_zero() {
                continue;
            }
            let s = gu.max_abs_coeff();
            gens.push(Generator {
                label,
                poly: gu.scale(1.0 / s),
                equality,
            });
        }
        for j in 0..n {
            // (b - x)(x - a) = half^2 (1 - u^2)
            let mut w = Polynomial::constant(n, 1.0);
            w.add_term(Monomial::new(unit_square(n, j)), -1.0);
            gens.push(Generator::inequality(format!("box {}", j + 1), w));
        }
        let module = ModuleSpec::new(n, gens, k)?;
        Ok(Scaled {
            nvars: n,
            center,
            half,
            objective,
            f_shift,
            f_scale,
            module,
        })
    }

    fn unscale(&self, v: f64) -> f64 {
        self.f_shift + self.f_scale * v
    }
}

fn unit_square(n: usize, j: usize) -> Vec<u32> {
    let mut e = vec![0; n];
    e[j] = 2;
    e
}

/// Where multiplier `i` lives in the SDP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    /// PSD block index.
    Block(usize),
    /// Offset of the first coefficient among the free variables.
    Free(usize),
}

/// The SOS program `max lambda s.t. f - lambda in M_ab^(k)` as an SDP.
///
/// Free variable 0 is `lambda`, followed by the coefficients of the
/// equality multipliers; each SOS multiplier is a Gram block in `Z_{d_i}`.
/// There is one equality per monomial of degree `<= k`.
#[derive(Debug, Clone)]
pub struct SosRelaxation {
    pub sdp: SdpProblem,
    pub module: ModuleSpec,
    bases: Vec<MonomialBasis>,
    slots: Vec<Slot>,
    basis: MonomialBasis,
    scaled: Scaled,
}

pub fn build_sos_glb(p: &NormalizedProblem, bx: &HyperRectangle, k: usize) -> Result<SosRelaxation> {
    let scaled = Scaled::new(p, bx, k)?;
    let n = scaled.nvars;
    let basis = MonomialBasis::new(n, k)?;
    let module = scaled.module.clone();
    let bases = module.multiplier_bases(n)?;
    let mut dims = Vec::new();
    let mut slots = Vec::new();
    let mut nfree = 1;
    for (g, zb) in module.generators.iter().zip(&bases) {
        if g.equality {
            slots.push(Slot::Free(nfree));
            nfree += zb.len();
        } else {
            slots.push(Slot::Block(dims.len()));
            dims.push(zb.len());
        }
    }

    let mut rows: Vec<LinearFunctional> = vec![LinearFunctional::new(); basis.len()];
    rows[0].add_free(0, 1.0);
    for ((g, zb), slot) in module.generators.iter().zip(&bases).zip(&slots) {
        match *slot {
            Slot::Block(b) => {
                for r in 0..zb.len() {
                    for c in r..zb.len() {
                        let prod = zb.get(r).mul(zb.get(c));
                        for (gm, gc) in g.poly.terms() {
                            let idx = basis.index_of(&prod.mul(gm)).expect("degree bounded by k");
                            rows[idx].add_entry(b, r, c, gc);
                        }
                    }
                }
            }
            Slot::Free(off) => {
                for (t, beta) in zb.monomials().iter().enumerate() {
                    for (gm, gc) in g.poly.terms() {
                        let idx = basis.index_of(&beta.mul(gm)).expect("degree bounded by k");
                        rows[idx].add_free(off + t, gc);
                    }
                }
            }
        }
    }
    let mut sdp = SdpProblem::new(dims, nfree);
    sdp.objective.add_free(0, -1.0);
    for (idx, row) in rows.into_iter().enumerate() {
        sdp.add_constraint(row, scaled.objective.coeff(basis.get(idx)));
    }
    Ok(SosRelaxation {
        sdp,
        module,
        bases,
        slots,
        basis,
        scaled,
    })
}

impl SosRelaxation {
    /// `lambda` in original units from an optimal solve.
    pub fn bound(&self, sol: &SdpSolution) -> f64 {
        self.scaled.unscale(sol.free[0])
    }

    /// Moment bound `d_k*` from the dual of an optimal solve.
    pub fn moment_bound(&self, sol: &SdpSolution) -> f64 {
        self.scaled.unscale(-(sol.dual_objective - self.sdp.objective_offset))
    }

    /// Truncated moment vector in the scaled coordinates `u`, indexed like
    /// `MonomialBasis::new(n, k)`; entry 0 is 1.
    pub fn scaled_moments(&self, sol: &SdpSolution) -> Vec<f64> {
        sol.dual.iter().map(|v| -v).collect()
    }

    /// Truncated moment vector in the original coordinates.
    pub fn moments(&self, sol: &SdpSolution) -> Vec<f64> {
        let ymom = self.scaled_moments(sol);
        let n = self.scaled.nvars;
        self.basis
            .monomials()
            .iter()
            .map(|alpha| {
                let mono = Polynomial::from_terms(n, [(alpha.exponents().to_vec(), 1.0)])
                    .expect("length n");
                let pu = mono.affine_substitute(&self.scaled.center, &self.scaled.half);
                pu.terms()
                    .map(|(m, c)| c * ymom[self.basis.index_of(m).expect("deg <= k")])
                    .sum()
            })
            .collect()
    }

    /// Multipliers in the scaled coordinates, one per generator: SOS
    /// polynomials `Z' Q Z` and free polynomials for equalities.
    pub fn multipliers(&self, sol: &SdpSolution) -> Vec<Polynomial> {
        self.multipliers_of(&sol.free, &sol.blocks)
    }

    fn multipliers_of(&self, free: &[f64], blocks: &[DMatrix<f64>]) -> Vec<Polynomial> {
        let n = self.scaled.nvars;
        self.bases
            .iter()
            .zip(&self.slots)
            .map(|(zb, slot)| {
                let mut sigma = Polynomial::zero(n);
                match *slot {
                    Slot::Block(b) => {
                        let q = &blocks[b];
                        for r in 0..zb.len() {
                            for c in 0..zb.len() {
                                sigma.add_term(zb.get(r).mul(zb.get(c)), q[(r, c)]);
                            }
                        }
                    }
                    Slot::Free(off) => {
                        for (t, beta) in zb.monomials().iter().enumerate() {
                            sigma.add_term(beta.clone(), free[off + t]);
                        }
                    }
                }
                sigma
            })
            .collect()
    }

    /// `sum_i sigma_i g_i` for the given multiplier values.
    fn combination(&self, free: &[f64], blocks: &[DMatrix<f64>]) -> Polynomial {
        let n = self.scaled.nvars;
        let mut acc = Polynomial::zero(n);
        for (sigma, g) in self.multipliers_of(free, blocks).iter().zip(&self.module.generators) {
            acc = acc.add(&sigma.mul(&g.poly).expect("same nvars")).expect("same nvars");
        }
        acc
    }

    /// Worst-case amount by which indefinite Gram blocks can make
    /// `sum_i sigma_i g_i` negative on `[-1, 1]^n`: `Z'QZ >= lambda_min |Z|^2`
    /// and `|Z|^2 <= dim`, `|g| <= |g|_1` there.
    fn psd_slack(&self, blocks: &[DMatrix<f64>]) -> f64 {
        self.slots
            .iter()
            .zip(&self.module.generators)
            .filter_map(|(slot, g)| match *slot {
                Slot::Block(b) => Some((b, g)),
                Slot::Free(_) => None,
            })
            .map(|(b, g)| {
                let q = &blocks[b];
                let lmin = q.clone().symmetric_eigenvalues().min();
                let g1: f64 = g.poly.terms().map(|(_, c)| c.abs()).sum();
                (-lmin).max(0.0) * q.nrows() as f64 * g1
            })
            .sum()
    }

    /// Residual polynomial `f - lambda - sum_i sigma_i g_i` in scaled coordinates.
    pub fn residual(&self, sol: &SdpSolution) -> Polynomial {
        let n = self.scaled.nvars;
        let mut acc = self.scaled.objective.clone();
        acc.add_term(Monomial::one(n), -sol.free[0]);
        acc.sub(&self.combination(&sol.free, &sol.blocks)).expect("same nvars")
    }

    /// Largest coefficient of the residual polynomial.
    pub fn certificate_residual(&self, sol: &SdpSolution) -> f64 {
        self.residual(sol).max_abs_coeff()
    }

    /// A lower bound valid despite solver inaccuracy: on the scaled box
    /// `f - lambda = sum sigma_i g_i + r >= -psd_slack - |r|_1` on `S`.
    pub fn safe_bound(&self, sol: &SdpSolution) -> f64 {
        let r1: f64 = self.residual(sol).terms().map(|(_, c)| c.abs()).sum();
        self.scaled.unscale(sol.free[0] - r1 - self.psd_slack(&sol.blocks))
    }

    /// Checks that a primal ray `(t, sigma)` with `t + sum sigma_i g_i ~ 0`
    /// proves `S ∩ box` empty. With `t = 1` and `r = 1 + sum sigma_i g_i`,
    /// `sum sigma_i g_i <= |r|_1 - 1 < 0` on the box, which is impossible at
    /// a point of `S`.
    pub fn ray_certifies_infeasible(&self, free: &[f64], blocks: &[DMatrix<f64>]) -> bool {
        let t = free[0];
        if !(t > 0.0) || !t.is_finite() {
            return false;
        }
        let free: Vec<f64> = free.iter().map(|v| v / t).collect();
        let blocks: Vec<DMatrix<f64>> = blocks.iter().map(|b| b / t).collect();
        let mut r = self.combination(&free, &blocks);
        r.add_term(Monomial::one(self.scaled.nvars), 1.0);
        let r1: f64 = r.terms().map(|(_, c)| c.abs()).sum();
        let slack = self.psd_slack(&blocks);
        log::debug!("ray check: |r|_1 = {r1:.3e}, psd slack = {slack:.3e}");
        r1 + slack <= RAY_MARGIN
    }
}

/// Largest `|r|_1 + psd slack` accepted from an approximate ray.
const RAY_MARGIN: f64 = 0.5;

/// The moment program: minimize `L_y(f)` over truncated moment vectors with
/// `y_0 = 1`, `M_{k/2}(y)` PSD, one PSD localizing matrix per inequality
/// generator and `L_y(h z^beta) = 0` for equality generators.
///
/// Free variables are the moments `y_alpha`, `alpha != 0`; block `i` is a
/// slack equal to the localizing matrix of the `i`-th inequality generator.
#[derive(Debug, Clone)]
pub struct MomentRelaxation {
    pub sdp: SdpProblem,
    pub module: ModuleSpec,
    /// Monomial (index into the degree-k basis) of each free variable.
    pub moment_index: Vec<usize>,
    basis: MonomialBasis,
    scaled: Scaled,
}

pub fn build_moment_glb(
    p: &NormalizedProblem,
    bx: &HyperRectangle,
    k: usize,
) -> Result<MomentRelaxation> {
    let scaled = Scaled::new(p, bx, k)?;
    let n = scaled.nvars;
    let basis = MonomialBasis::new(n, k)?;
    let module = scaled.module.clone();
    let bases = module.multiplier_bases(n)?;

    // products Z_r Z_c (PSD) or z^beta (free) paired with the generator
    let products = |g: &Generator, zb: &MonomialBasis| -> Vec<(usize, usize, Monomial)> {
        let mut v = Vec::new();
        if g.equality {
            for (t, beta) in zb.monomials().iter().enumerate() {
                v.push((t, t, beta.clone()));
            }
        } else {
            for r in 0..zb.len() {
                for c in r..zb.len() {
                    v.push((r, c, zb.get(r).mul(zb.get(c))));
                }
            }
        }
        v
    };

    // free variable per nonconstant monomial that is actually referenced
    let mut used = vec![false; basis.len()];
    for (g, zb) in module.generators.iter().zip(&bases) {
        for (_, _, prod) in products(g, zb) {
            for (gm, _) in g.poly.terms() {
                used[basis.index_of(&prod.mul(gm)).expect("deg <= k")] = true;
            }
        }
    }
    for (m, _) in scaled.objective.terms() {
        used[basis.index_of(m).expect("deg <= k")] = true;
    }
    used[0] = false;
    let moment_index: Vec<usize> = (0..basis.len()).filter(|&i| used[i]).collect();
    let mut var_of = vec![usize::MAX; basis.len()];
    for (v, &i) in moment_index.iter().enumerate() {
        var_of[i] = v;
    }

    let dims: Vec<usize> = module
        .generators
        .iter()
        .zip(&bases)
        .filter(|(g, _)| !g.equality)
        .map(|(_, zb)| zb.len())
        .collect();
    let mut sdp = SdpProblem::new(dims, moment_index.len());
    for (m, c) in scaled.objective.terms() {
        let idx = basis.index_of(m).expect("deg <= k");
        if idx == 0 {
            sdp.objective_offset += c;
        } else {
            sdp.objective.add_free(var_of[idx], c);
        }
    }
    let mut block = 0;
    for (g, zb) in module.generators.iter().zip(&bases) {
        for (r, c, prod) in products(g, zb) {
            // X[r, c] - sum_gamma g_gamma y_{prod + gamma} = g_0 [prod = 1]
            // (no X for equality generators)
            let mut f = LinearFunctional::new();
            if !g.equality {
                f.add_entry(block, r, c, if r == c { 1.0 } else { 0.5 });
            }
            let mut rhs = 0.0;
            for (gm, gc) in g.poly.terms() {
                let idx = basis.index_of(&prod.mul(gm)).expect("deg <= k");
                if idx == 0 {
                    rhs += gc;
                } else {
                    f.add_free(var_of[idx], -gc);
                }
            }
            sdp.add_constraint(f, rhs);
        }
        if !g.equality {
            block += 1;
        }
    }
    Ok(MomentRelaxation {
        sdp,
        module,
        moment_index,
        basis,
        scaled,
    })
}

impl MomentRelaxation {
    pub fn bound(&self, sol: &SdpSolution) -> f64 {
        self.scaled.unscale(sol.primal_objective)
    }

    /// Moment vector in scaled coordinates, indexed by the degree-k basis.
    pub fn scaled_moments(&self, sol: &SdpSolution) -> Vec<f64> {
        let mut y = vec![0.0; self.basis.len()];
        y[0] = 1.0;
        for (v, &i) in self.moment_index.iter().enumerate() {
            y[i] = sol.free[v];
        }
        y
    }
}

/// Solves the moment relaxation; `+inf` when it is infeasible and `-inf` when unbounded.
pub fn solve_moment_glb(
    p: &NormalizedProblem,
    bx: &HyperRectangle,
    k: usize,
    opts: &SdpOptions,
) -> Result<(f64, SdpSolution)> {
    let relax = build_moment_glb(p, bx, k)?;
    let sol = solve_sdp(&relax.sdp, opts);
    let v = match sol.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => relax.bound(&sol),
        SdpStatus::PrimalInfeasible => f64::INFINITY,
        SdpStatus::DualInfeasibleOrUnbounded => f64::NEG_INFINITY,
        s => {
            return Err(Error::Solver {
                box_desc: bx.to_string(),
                status: s.to_string(),
            })
        }
    };
    Ok((v, sol))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GlbStatus {
    /// Certified lower bound; `-inf` when no order-k certificate exists.
    Bound(f64),
    /// The SOS program is unbounded: `S ∩ box` is empty.
    BoxInfeasible,
    SolverFailure(SdpStatus),
}

#[derive(Debug, Clone)]
pub struct GlbResult {
    pub status: GlbStatus,
    pub bx: HyperRectangle,
    pub k: usize,
    /// Moment bound from the dual solve, when optimal.
    pub moment_bound: Option<f64>,
    /// Truncated moment vector (original coordinates, degree-k graded-lex order).
    pub moments: Option<Vec<f64>>,
    pub sdp_status: SdpStatus,
    /// The bound comes from an iterate short of the requested accuracy; it
    /// is still a valid lower bound but may be loose.
    pub reduced_accuracy: bool,
    pub iterations: usize,
    pub gap: f64,
}

impl GlbResult {
    /// Bound as an extended real: `+inf` for infeasible boxes.
    pub fn lambda(&self) -> Option<f64> {
        match self.status {
            GlbStatus::Bound(v) => Some(v),
            GlbStatus::BoxInfeasible => Some(f64::INFINITY),
            GlbStatus::SolverFailure(_) => None,
        }
    }
}

/// Subroutine `B_k`: the order-`k` SOS lower bound of `f` over `S ∩ box`.
pub fn glb_bk(
    p: &NormalizedProblem,
    bx: &HyperRectangle,
    k: usize,
    opts: &SdpOptions,
) -> Result<GlbResult> {
    let relax = build_sos_glb(p, bx, k)?;
    let sol = solve_sdp(&relax.sdp, opts);
    let mut out = GlbResult {
        status: GlbStatus::SolverFailure(sol.status),
        bx: bx.clone(),
        k,
        moment_bound: None,
        moments: None,
        sdp_status: sol.status,
        reduced_accuracy: false,
        iterations: sol.iterations,
        gap: sol.gap,
    };
    match sol.status {
        SdpStatus::Optimal | SdpStatus::NearOptimal => {
            out.status = GlbStatus::Bound(relax.safe_bound(&sol));
            out.reduced_accuracy = sol.status == SdpStatus::NearOptimal;
            out.moment_bound = Some(relax.moment_bound(&sol));
            out.moments = Some(relax.moments(&sol));
        }
        SdpStatus::DualInfeasibleOrUnbounded => out.status = GlbStatus::BoxInfeasible,
        SdpStatus::PrimalInfeasible => out.status = GlbStatus::Bound(f64::NEG_INFINITY),
        s => match &sol.primal_ray {
            Some((free, blocks)) if relax.ray_certifies_infeasible(free, blocks) => {
                out.status = GlbStatus::BoxInfeasible;
            }
            _ => {
                let v = relax.safe_bound(&sol);
                if v.is_finite() {
                    log::info!("B_{k} on {bx}: {s}; using the corrected bound of the best iterate");
                    out.status = GlbStatus::Bound(v);
                    out.reduced_accuracy = true;
                } else {
                    log::warn!("B_{k} on {bx}: solver returned {s} after {} iterations", sol.iterations);
                }
            }
        },
    }
    Ok(out)
}
