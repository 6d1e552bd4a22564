//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! Iterates `(x, y, s, tau, kappa)` of
//!
//! ```text
//! A x - b tau = 0,   c tau - A'y - s = 0,   b'y - c'x - kappa = 0
//! ```
//!
//! with Nesterov-Todd scaling on every PSD block and a Mehrotra
//! predictor-corrector step. Converged iterates are divided by `tau`;
//! when `tau -> 0` the iterate is an infeasibility certificate instead.

use nalgebra::{DMatrix, DVector};

use super::{SdpOptions, SdpProblem, SdpSolution, SdpStatus};

const STEP_FRACTION: f64 = 0.99;
const REFINE_STEPS: usize = 3;
/// Iterations without improving the best iterate before giving up on it.
const STALL_ITERS: usize = 5;
/// `kappa / tau` beyond which the embedding is treated as diverging.
const DIVERGENCE: f64 = 1e14;

/// Coefficient entry `(row, col, value)` with `row <= col`.
type Entry = (usize, usize, f64);

struct Data {
    m: usize,
    nf: usize,
    dims: Vec<usize>,
    b: DVector<f64>,
    cf: DVector<f64>,
    cmat: Vec<DMatrix<f64>>,
    af: DMatrix<f64>,
    /// Per block: constraints touching it with their entries.
    block_cons: Vec<Vec<(usize, Vec<Entry>)>>,
    norm_b: f64,
    norm_c: f64,
}

impl Data {
    fn apply_a(&self, xf: &DVector<f64>, xs: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = &self.af * xf;
        for (j, cons) in self.block_cons.iter().enumerate() {
            for (i, ents) in cons {
                out[*i] += inner_entries(ents, &xs[j]);
            }
        }
        out
    }

    /// `(A_f' y, [sum_i y_i A_ij]_j)`.
    fn apply_at(&self, y: &DVector<f64>) -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let free = self.af.transpose() * y;
        let mats = self
            .block_cons
            .iter()
            .zip(&self.dims)
            .map(|(cons, &d)| {
                let mut s = DMatrix::zeros(d, d);
                for (i, ents) in cons {
                    let yi = y[*i];
                    if yi != 0.0 {
                        for &(r, c, v) in ents {
                            s[(r, c)] += yi * v;
                            if r != c {
                                s[(c, r)] += yi * v;
                            }
                        }
                    }
                }
                s
            })
            .collect();
        (free, mats)
    }

    fn cx(&self, xf: &DVector<f64>, xs: &[DMatrix<f64>]) -> f64 {
        self.cf.dot(xf) + self.cmat.iter().zip(xs).map(|(c, x)| c.dot(x)).sum::<f64>()
    }
}

fn inner_entries(ents: &[Entry], x: &DMatrix<f64>) -> f64 {
    ents.iter()
        .map(|&(r, c, v)| {
            if r == c {
                v * x[(r, c)]
            } else {
                2.0 * v * x[(r, c)]
            }
        })
        .sum()
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// NT scaling of one block: `W = G G'`, `G^{-1} X G^{-T} = G' S G = diag(lam)`.
struct Scaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    lam: DVector<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let d = x.nrows();
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let prod = ls.transpose() * &lx;
    let svd = prod.svd(false, true);
    let v = svd.v_t?.transpose();
    let lam = svd.singular_values;
    if lam.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return None;
    }
    let mut vd = v.clone();
    for k in 0..d {
        let f = lam[k].sqrt().recip();
        vd.column_mut(k).scale_mut(f);
    }
    let g = &lx * &vd;
    // G^{-1} = D^{1/2} V' Lx^{-1}
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(d, d))?;
    let mut ginv = v.transpose() * lx_inv;
    for k in 0..d {
        let f = lam[k].sqrt();
        ginv.row_mut(k).scale_mut(f);
    }
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(Scaling { g, ginv, w, lam })
}

/// Largest `alpha` with `D + alpha * dz` PSD, where `D = diag(lam)`.
fn max_step_scaled(lam: &DVector<f64>, dz: &DMatrix<f64>) -> f64 {
    let d = lam.len();
    let mut t = dz.clone();
    for i in 0..d {
        for j in 0..d {
            t[(i, j)] /= (lam[i] * lam[j]).sqrt();
        }
    }
    symmetrize(&mut t);
    let min_eig = t.symmetric_eigenvalues().min();
    if min_eig < 0.0 {
        -1.0 / min_eig
    } else {
        f64::INFINITY
    }
}

fn max_step_scalar(v: f64, dv: f64) -> f64 {
    if dv < 0.0 {
        -v / dv
    } else {
        f64::INFINITY
    }
}

/// Factorization of `[[M, A_f], [A_f', 0]]`.
struct Kkt {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    minv_af: DMatrix<f64>,
    reduced: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    af: DMatrix<f64>,
}

impl Kkt {
    fn factor(mut m: DMatrix<f64>, af: &DMatrix<f64>) -> Option<Kkt> {
        symmetrize(&mut m);
        let scale = m.diagonal().iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
        let mut chol = m.clone().cholesky();
        let mut reg = 1e-14;
        while chol.is_none() && reg < 1e-6 {
            let mut mr = m.clone();
            for i in 0..mr.nrows() {
                mr[(i, i)] += reg * scale;
            }
            chol = mr.cholesky();
            reg *= 100.0;
        }
        let chol = chol?;
        let nf = af.ncols();
        let (minv_af, reduced) = if nf > 0 {
            let minv_af = chol.solve(af);
            let mut r = af.transpose() * &minv_af;
            symmetrize(&mut r);
            let rs = r.diagonal().iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1e-300);
            let mut rc = r.clone().cholesky();
            let mut reg = 1e-14;
            while rc.is_none() && reg < 1e-6 {
                let mut rr = r.clone();
                for i in 0..nf {
                    rr[(i, i)] += reg * rs;
                }
                rc = rr.cholesky();
                reg *= 100.0;
            }
            (minv_af, Some(rc?))
        } else {
            (DMatrix::zeros(m.nrows(), 0), None)
        };
        Some(Kkt {
            chol,
            minv_af,
            reduced,
            af: af.clone(),
        })
    }

    fn solve(&self, u: &DVector<f64>, v: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let w = self.chol.solve(u);
        match &self.reduced {
            Some(r) => {
                let xf = r.solve(&(self.af.transpose() * &w - v));
                let y = w - &self.minv_af * &xf;
                (y, xf)
            }
            None => (w, DVector::zeros(0)),
        }
    }
}

/// `(A W (A'y) W + A_f xf, A_f' y)`, applied without forming `M`.
fn apply_kkt(
    data: &Data,
    scal: &[Scaling],
    y: &DVector<f64>,
    xf: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let (at_free, at_mats) = data.apply_at(y);
    let wm: Vec<DMatrix<f64>> = at_mats
        .iter()
        .zip(scal)
        .map(|(a, sc)| {
            let mut t = &sc.w * a * &sc.w;
            symmetrize(&mut t);
            t
        })
        .collect();
    let u = data.apply_a(xf, &wm);
    (u, at_free)
}

/// KKT solve followed by iterative refinement against the exact operator.
fn solve_refined(
    data: &Data,
    scal: &[Scaling],
    kkt: &Kkt,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let (mut y, mut xf) = kkt.solve(u, v);
    let scale = 1.0 + u.amax().max(v.amax());
    let mut best = f64::INFINITY;
    for _ in 0..REFINE_STEPS {
        let (au, av) = apply_kkt(data, scal, &y, &xf);
        let ru = u - au;
        let rv = v - av;
        let err = ru.amax().max(rv.amax()) / scale;
        if !(err < 0.5 * best) || err < 1e-15 {
            break;
        }
        best = err;
        let (dy, dxf) = kkt.solve(&ru, &rv);
        y += dy;
        xf += dxf;
    }
    (y, xf)
}

#[derive(Clone)]
struct Iterate {
    xf: DVector<f64>,
    xs: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    ss: Vec<DMatrix<f64>>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    xf: DVector<f64>,
    xs: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    ss: Vec<DMatrix<f64>>,
    tau: f64,
    kappa: f64,
}

/// Quantities fixed within one iteration.
struct IterCtx<'a> {
    data: &'a Data,
    scal: Vec<Scaling>,
    kkt: Kkt,
    z2y: DVector<f64>,
    z2f: DVector<f64>,
    chat: DVector<f64>,
    c_wcw: f64,
    rp: DVector<f64>,
    rdf: DVector<f64>,
    rg: f64,
    rdc: Vec<DMatrix<f64>>,
    a_wrw: DVector<f64>,
    c_wrw: f64,
    tau: f64,
    kappa: f64,
}

impl IterCtx<'_> {
    /// Solves the Newton system for residual weight `eta` and complementarity
    /// targets `targets` (scaled space) and `target_tau`.
    fn direction(
        &self,
        eta: f64,
        targets: &[DMatrix<f64>],
        target_tau: f64,
    ) -> Direction {
        let data = self.data;
        // R_j = G Z G', lam o Z = T
        let rs: Vec<DMatrix<f64>> = self
            .scal
            .iter()
            .zip(targets)
            .map(|(sc, t)| {
                let d = sc.lam.len();
                let z = DMatrix::from_fn(d, d, |p, q| 2.0 * t[(p, q)] / (sc.lam[p] + sc.lam[q]));
                let mut r = &sc.g * z * sc.g.transpose();
                symmetrize(&mut r);
                r
            })
            .collect();
        let zero_free = DVector::zeros(data.nf);
        let a_r = data.apply_a(&zero_free, &rs);
        let c_r: f64 = data.cmat.iter().zip(&rs).map(|(c, r)| c.dot(r)).sum();

        let rhs1 = -&self.rp * eta - a_r + &self.a_wrw * eta;
        let rhs2 = &self.rdf * eta;
        let (z1y, z1f) = solve_refined(data, &self.scal, &self.kkt, &rhs1, &rhs2);

        let chat_minus_b = &self.chat - &data.b;
        let num = -eta * self.rg - target_tau / self.tau - c_r + eta * self.c_wrw
            - chat_minus_b.dot(&z1y)
            - data.cf.dot(&z1f);
        let den = -self.kappa / self.tau - self.c_wcw
            + chat_minus_b.dot(&self.z2y)
            + data.cf.dot(&self.z2f);
        let dtau = num / den;
        let dy = z1y + &self.z2y * dtau;
        let dxf = z1f + &self.z2f * dtau;
        let (_, at_dy) = data.apply_at(&dy);
        let mut dss = Vec::with_capacity(rs.len());
        let mut dxs = Vec::with_capacity(rs.len());
        for j in 0..rs.len() {
            let mut ds = &data.cmat[j] * dtau - &at_dy[j] + &self.rdc[j] * eta;
            symmetrize(&mut ds);
            let mut dx = &rs[j] - &self.scal[j].w * &ds * &self.scal[j].w;
            symmetrize(&mut dx);
            dss.push(ds);
            dxs.push(dx);
        }
        let dkappa = (target_tau - self.kappa * dtau) / self.tau;
        Direction {
            xf: dxf,
            xs: dxs,
            y: dy,
            ss: dss,
            tau: dtau,
            kappa: dkappa,
        }
    }

    fn max_step(&self, it: &Iterate, dir: &Direction) -> f64 {
        let mut alpha = max_step_scalar(it.tau, dir.tau).min(max_step_scalar(it.kappa, dir.kappa));
        for (j, sc) in self.scal.iter().enumerate() {
            let dxt = &sc.ginv * &dir.xs[j] * sc.ginv.transpose();
            let dst = sc.g.transpose() * &dir.ss[j] * &sc.g;
            alpha = alpha
                .min(max_step_scaled(&sc.lam, &dxt))
                .min(max_step_scaled(&sc.lam, &dst));
        }
        alpha
    }
}

fn schur(data: &Data, scal: &[Scaling]) -> (DMatrix<f64>, DVector<f64>, f64) {
    let m = data.m;
    let mut mat = DMatrix::zeros(m, m);
    let mut chat = DVector::zeros(m);
    let mut c_wcw = 0.0;
    for (j, cons) in data.block_cons.iter().enumerate() {
        let w = &scal[j].w;
        let d = data.dims[j];
        let mut wcw = w * &data.cmat[j] * w;
        symmetrize(&mut wcw);
        c_wcw += data.cmat[j].dot(&wcw);
        for (idx, (i, ents)) in cons.iter().enumerate() {
            chat[*i] += inner_entries(ents, &wcw);
            // G = W A_i W via outer products of W's columns
            let mut g = DMatrix::zeros(d, d);
            for &(r, c, v) in ents {
                let wr = w.column(r);
                let wc = w.column(c);
                if r == c {
                    g.ger(v, &wr, &wr, 1.0);
                } else {
                    g.ger(v, &wr, &wc, 1.0);
                    g.ger(v, &wc, &wr, 1.0);
                }
            }
            for (k, ents_k) in &cons[idx..] {
                let v = inner_entries(ents_k, &g);
                mat[(*i, *k)] += v;
                if *i != *k {
                    mat[(*k, *i)] += v;
                }
            }
        }
    }
    (mat, chat, c_wcw)
}

fn jordan(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = a * b;
    let pt = p.transpose();
    p += pt;
    p * 0.5
}

/// Solves `problem` with a homogeneous primal-dual interior-point method.
pub fn solve_sdp(problem: &SdpProblem, opts: &SdpOptions) -> SdpSolution {
    let nb = problem.block_dims.len();
    let empty = |status: SdpStatus| SdpSolution {
        status,
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        free: vec![0.0; problem.free_vars],
        blocks: problem.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        dual: vec![0.0; problem.num_constraints()],
        dual_slacks: problem.block_dims.iter().map(|&d| DMatrix::zeros(d, d)).collect(),
        gap: f64::NAN,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        certificate_residual: None,
        iterations: 0,
        primal_ray: None,
    };
    if let Err(e) = problem.validate() {
        log::error!("malformed SDP: {e}");
        return empty(SdpStatus::NumericalFailure);
    }

    // Presolve: empty rows and free columns.
    let mut col_used = vec![false; problem.free_vars];
    for c in &problem.constraints {
        for &(v, _) in &c.lhs.free {
            col_used[v] = true;
        }
    }
    let obj_free: Vec<f64> = {
        let mut v = vec![0.0; problem.free_vars];
        for &(k, c) in &problem.objective.free {
            v[k] += c;
        }
        v
    };
    for (v, used) in col_used.iter().enumerate() {
        if !used && obj_free[v] != 0.0 {
            let mut sol = empty(SdpStatus::DualInfeasibleOrUnbounded);
            sol.free[v] = -obj_free[v].signum();
            sol.certificate_residual = Some(0.0);
            return sol;
        }
    }
    for (i, c) in problem.constraints.iter().enumerate() {
        if c.lhs.is_empty() && c.rhs != 0.0 {
            let mut sol = empty(SdpStatus::PrimalInfeasible);
            sol.dual[i] = c.rhs.signum();
            sol.certificate_residual = Some(0.0);
            return sol;
        }
    }
    let rows: Vec<usize> = (0..problem.num_constraints())
        .filter(|&i| !problem.constraints[i].lhs.is_empty())
        .collect();
    let free_map: Vec<usize> = (0..problem.free_vars).filter(|&v| col_used[v]).collect();
    let mut free_index = vec![usize::MAX; problem.free_vars];
    for (k, &v) in free_map.iter().enumerate() {
        free_index[v] = k;
    }
    let m = rows.len();
    let nf = free_map.len();
    let dims = problem.block_dims.clone();

    let mut b = DVector::zeros(m);
    let mut af = DMatrix::zeros(m, nf);
    let mut block_cons: Vec<Vec<(usize, Vec<Entry>)>> = vec![Vec::new(); nb];
    for (k, &i) in rows.iter().enumerate() {
        let c = &problem.constraints[i];
        b[k] = c.rhs;
        for &(v, val) in &c.lhs.free {
            af[(k, free_index[v])] += val;
        }
        let mut per_block: Vec<Vec<Entry>> = vec![Vec::new(); nb];
        for e in &c.lhs.entries {
            per_block[e.block].push((e.row, e.col, e.value));
        }
        for (j, ents) in per_block.into_iter().enumerate() {
            if !ents.is_empty() {
                block_cons[j].push((k, ents));
            }
        }
    }
    let cf = DVector::from_iterator(nf, free_map.iter().map(|&v| obj_free[v]));
    let mut cmat: Vec<DMatrix<f64>> = dims.iter().map(|&d| DMatrix::zeros(d, d)).collect();
    for e in &problem.objective.entries {
        cmat[e.block][(e.row, e.col)] += e.value;
        if e.row != e.col {
            cmat[e.block][(e.col, e.row)] += e.value;
        }
    }
    let norm_b = b.norm();
    let norm_c = (cf.norm_squared() + cmat.iter().map(|c| c.norm_squared()).sum::<f64>()).sqrt();
    let data = Data {
        m,
        nf,
        dims: dims.clone(),
        b,
        cf,
        cmat,
        af,
        block_cons,
        norm_b,
        norm_c,
    };
    let nu: f64 = dims.iter().sum::<usize>() as f64;

    let mut it = Iterate {
        xf: DVector::zeros(nf),
        xs: dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        y: DVector::zeros(m),
        ss: dims.iter().map(|&d| DMatrix::identity(d, d)).collect(),
        tau: 1.0,
        kappa: 1.0,
    };

    let finish = |it: &Iterate, status: SdpStatus, iters: usize, pres: f64, dres: f64, cert: Option<f64>| {
        let scale = if matches!(status, SdpStatus::PrimalInfeasible | SdpStatus::DualInfeasibleOrUnbounded) {
            1.0
        } else {
            1.0 / it.tau
        };
        let mut free = vec![0.0; problem.free_vars];
        for (k, &v) in free_map.iter().enumerate() {
            free[v] = it.xf[k] * scale;
        }
        let mut dual = vec![0.0; problem.num_constraints()];
        for (k, &i) in rows.iter().enumerate() {
            dual[i] = it.y[k] * scale;
        }
        let blocks: Vec<DMatrix<f64>> = it.xs.iter().map(|x| x * scale).collect();
        let slacks: Vec<DMatrix<f64>> = it.ss.iter().map(|s| s * scale).collect();
        let pobj = data.cx(&it.xf, &it.xs) / it.tau + problem.objective_offset;
        let dobj = data.b.dot(&it.y) / it.tau + problem.objective_offset;
        // iterates stay interior, so this only trips on a broken factorization
        let mut status = status;
        if matches!(status, SdpStatus::Optimal | SdpStatus::NearOptimal)
            && blocks
                .iter()
                .chain(&slacks)
                .any(|b| b.clone().symmetric_eigenvalues().min() < -opts.psd_tol)
        {
            log::debug!("returned blocks are not PSD to {:e}", opts.psd_tol);
            status = SdpStatus::NumericalFailure;
        }
        SdpSolution {
            status,
            primal_objective: pobj,
            dual_objective: dobj,
            free,
            blocks,
            dual,
            dual_slacks: slacks,
            gap: (pobj - dobj).abs(),
            primal_residual: pres,
            dual_residual: dres,
            certificate_residual: cert,
            iterations: iters,
            primal_ray: None,
        }
    };

    let mut small_steps = 0;
    let mut last = (f64::NAN, f64::NAN);
    // best iterate by worst tolerance ratio, for stalls near the optimum
    let mut best: Option<(f64, Iterate, usize, f64, f64)> = None;
    let mut since_best = 0;
    let fail = |best: &Option<(f64, Iterate, usize, f64, f64)>, status: SdpStatus, iter: usize, pres: f64, dres: f64, cur: &Iterate| {
        match best {
            Some((score, b, _, bp, bd)) if *score <= opts.near_factor => {
                log::debug!("returning best iterate (tolerance ratio {score:.2e}) after {status}");
                finish(b, SdpStatus::NearOptimal, iter, *bp, *bd, None)
            }
            _ => {
                // report the best iterate, with the current one as a ray candidate
                let mut sol = match best {
                    Some((_, b, _, bp, bd)) => finish(b, status, iter, *bp, *bd, None),
                    None => finish(cur, status, iter, pres, dres, None),
                };
                let cx = data.cx(&cur.xf, &cur.xs);
                if cur.tau < cur.kappa && cx < 0.0 {
                    let mut free = vec![0.0; problem.free_vars];
                    for (k, &v) in free_map.iter().enumerate() {
                        free[v] = cur.xf[k] / -cx;
                    }
                    let blocks = cur.xs.iter().map(|x| x / -cx).collect();
                    sol.primal_ray = Some((free, blocks));
                }
                sol
            }
        }
    };
    for iter in 0..=opts.max_iter {
        // residuals
        let ax = data.apply_a(&it.xf, &it.xs);
        let rp = &ax - &data.b * it.tau;
        let (at_free, at_mats) = data.apply_at(&it.y);
        let rdf = &data.cf * it.tau - &at_free;
        let rdc: Vec<DMatrix<f64>> = (0..nb)
            .map(|j| &data.cmat[j] * it.tau - &at_mats[j] - &it.ss[j])
            .collect();
        let cx = data.cx(&it.xf, &it.xs);
        let by = data.b.dot(&it.y);
        let rg = it.kappa + cx - by;

        let pres = rp.norm() / it.tau / (1.0 + data.norm_b);
        let dres = (rdf.norm_squared() + rdc.iter().map(|r| r.norm_squared()).sum::<f64>()).sqrt()
            / it.tau
            / (1.0 + data.norm_c);
        let pobj = cx / it.tau + problem.objective_offset;
        let dobj = by / it.tau + problem.objective_offset;
        last = (pres, dres);
        log::trace!(
            "iter {iter}: pobj {pobj:.10e} dobj {dobj:.10e} pres {pres:.2e} dres {dres:.2e} tau {:.2e} kappa {:.2e}",
            it.tau,
            it.kappa
        );
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        if pres <= opts.feas_tol && dres <= opts.feas_tol && rel_gap <= opts.gap_tol {
            return finish(&it, SdpStatus::Optimal, iter, pres, dres, None);
        }
        let score = (pres / opts.feas_tol).max(dres / opts.feas_tol).max(rel_gap / opts.gap_tol);
        if it.tau >= it.kappa && best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, it.clone(), iter, pres, dres));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= STALL_ITERS && best.as_ref().is_some_and(|b| b.0 <= opts.near_factor) {
            return fail(&best, SdpStatus::NumericalFailure, iter, pres, dres, &it);
        }
        // certificates
        if it.tau < it.kappa {
            if by > 0.0 {
                let res = (at_free.norm_squared()
                    + (0..nb)
                        .map(|j| (&at_mats[j] + &it.ss[j]).norm_squared())
                        .sum::<f64>())
                .sqrt()
                    / by;
                if res <= opts.infeas_tol {
                    let mut sol = finish(&it, SdpStatus::PrimalInfeasible, iter, pres, dres, Some(res));
                    let nrm = by;
                    sol.dual.iter_mut().for_each(|v| *v /= nrm);
                    sol.dual_slacks.iter_mut().for_each(|s| *s /= nrm);
                    return sol;
                }
            }
            if cx < 0.0 {
                let res = ax.norm() / (-cx);
                if res <= opts.infeas_tol {
                    let mut sol = finish(
                        &it,
                        SdpStatus::DualInfeasibleOrUnbounded,
                        iter,
                        pres,
                        dres,
                        Some(res),
                    );
                    let nrm = -cx;
                    sol.free.iter_mut().for_each(|v| *v /= nrm);
                    sol.blocks.iter_mut().for_each(|x| *x /= nrm);
                    return sol;
                }
            }
        }
        if iter == opts.max_iter {
            break;
        }
        if it.kappa > DIVERGENCE * it.tau {
            log::debug!("iterates diverge without a certificate at iteration {iter}");
            return fail(&best, SdpStatus::NumericalFailure, iter, pres, dres, &it);
        }

        // scaling and Schur complement
        let mut scal = Vec::with_capacity(nb);
        for j in 0..nb {
            match nt_scaling(&it.xs[j], &it.ss[j]) {
                Some(s) => scal.push(s),
                None => {
                    log::debug!("NT scaling failed in block {j} at iteration {iter}");
                    return fail(&best, SdpStatus::NumericalFailure, iter, pres, dres, &it);
                }
            }
        }
        let (mmat, chat, c_wcw) = schur(&data, &scal);
        let Some(kkt) = Kkt::factor(mmat, &data.af) else {
            log::debug!("Schur complement factorization failed at iteration {iter}");
            return fail(&best, SdpStatus::NumericalFailure, iter, pres, dres, &it);
        };
        let (z2y, z2f) = solve_refined(&data, &scal, &kkt, &(&chat + &data.b), &data.cf);
        let wrw: Vec<DMatrix<f64>> = (0..nb)
            .map(|j| {
                let mut t = &scal[j].w * &rdc[j] * &scal[j].w;
                symmetrize(&mut t);
                t
            })
            .collect();
        let a_wrw = data.apply_a(&DVector::zeros(nf), &wrw);
        let c_wrw: f64 = data.cmat.iter().zip(&wrw).map(|(c, t)| c.dot(t)).sum();
        let ctx = IterCtx {
            data: &data,
            scal,
            kkt,
            z2y,
            z2f,
            chat,
            c_wcw,
            rp,
            rdf,
            rg,
            rdc,
            a_wrw,
            c_wrw,
            tau: it.tau,
            kappa: it.kappa,
        };

        let mu = (it.xs.iter().zip(&it.ss).map(|(x, s)| x.dot(s)).sum::<f64>() + it.tau * it.kappa)
            / (nu + 1.0);

        // predictor
        let aff_targets: Vec<DMatrix<f64>> = ctx
            .scal
            .iter()
            .map(|sc| DMatrix::from_diagonal(&sc.lam.map(|l| -l * l)))
            .collect();
        let aff = ctx.direction(1.0, &aff_targets, -it.tau * it.kappa);
        let alpha_aff = ctx.max_step(&it, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector
        let targets: Vec<DMatrix<f64>> = ctx
            .scal
            .iter()
            .enumerate()
            .map(|(j, sc)| {
                let dxt = &sc.ginv * &aff.xs[j] * sc.ginv.transpose();
                let dst = sc.g.transpose() * &aff.ss[j] * &sc.g;
                let d = sc.lam.len();
                let mut t = DMatrix::from_diagonal(&sc.lam.map(|l| -l * l)) - jordan(&dxt, &dst);
                for k in 0..d {
                    t[(k, k)] += sigma * mu;
                }
                t
            })
            .collect();
        let target_tau = sigma * mu - it.tau * it.kappa - aff.tau * aff.kappa;
        let dir = ctx.direction(1.0 - sigma, &targets, target_tau);
        let alpha = (STEP_FRACTION * ctx.max_step(&it, &dir)).min(1.0);
        if !alpha.is_finite() || alpha < 1e-10 {
            small_steps += 1;
            if small_steps >= 3 || !alpha.is_finite() {
                log::debug!("step length collapsed at iteration {iter}");
                return fail(&best, SdpStatus::NumericalFailure, iter, pres, dres, &it);
            }
        } else {
            small_steps = 0;
        }

        it.xf += &dir.xf * alpha;
        it.y += &dir.y * alpha;
        for j in 0..nb {
            it.xs[j] += &dir.xs[j] * alpha;
            it.ss[j] += &dir.ss[j] * alpha;
            symmetrize(&mut it.xs[j]);
            symmetrize(&mut it.ss[j]);
        }
        it.tau += dir.tau * alpha;
        it.kappa += dir.kappa * alpha;
        if !(it.tau > 0.0 && it.kappa > 0.0) {
            return fail(&best, SdpStatus::NumericalFailure, iter, pres, dres, &it);
        }
    }
    fail(&best, SdpStatus::IterationLimit, opts.max_iter, last.0, last.1, &it)
}
