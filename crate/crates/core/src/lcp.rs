//! Grid discretisation of the linear constrained problem
//!
//! ```text
//! (P)   sup ⟨F,u⟩      s.t. ρ(e(u)) ≤ 1 point-wise
//! (P*)  inf ∫ρ⁰(τ)     s.t. −div τ = F
//! ```
//!
//! solved with a primal–dual hybrid gradient iteration. Every returned value is
//! certified: the displacement is rescaled to exact feasibility and the force
//! flux is corrected to exact discrete equilibrium before the bounds are taken.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{FmdError, Result};
use crate::grid::{assemble_load_vector, assemble_strain_operator, Grid, LoadSpec, StrainOperator, POINTS_PER_CELL};
use crate::oracle::{iso_bounds, rho, rho_polar};
use crate::setting::DesignSetting;
use crate::tensor::{eig_sym, trace_dev_split, SymTensor2};

const SUM_CHUNK: usize = 1024;
const POWER_ITERS: usize = 50;
const STEP_PRODUCT: f64 = 0.99;
const CG_REL_TOL: f64 = 1e-13;

/// Euclidean projection onto `{ρ ≤ 1}`.
pub fn project_rho_ball(setting: &DesignSetting, xi: &SymTensor2) -> SymTensor2 {
    match *setting {
        DesignSetting::Amd => {
            let n = xi.norm();
            if n > 1.0 {
                xi.scale(1.0 / n)
            } else {
                *xi
            }
        }
        DesignSetting::FibMd => eig_sym(xi).map(|l| l.clamp(-1.0, 1.0)),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
            eig_sym(xi).map(|l| l.clamp(-1.0 / kappa_minus, 1.0 / kappa_plus))
        }
        DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
            let d = xi.dim() as f64;
            let (bt, bd) = iso_bounds(setting, xi.dim());
            let (tr, dev) = trace_dev_split(xi);
            let tr = tr.clamp(-bt, bt);
            let dn = dev.norm();
            let dev = if dn > bd { dev.scale(bd / dn) } else { dev };
            SymTensor2::identity(xi.dim()).scale(tr / d) + dev
        }
        DesignSetting::ScalarAmd | DesignSetting::ScalarIso => {
            panic!("project_rho_ball: scalar setting used with a tensor argument")
        }
    }
}

fn soft(x: f64, lo: f64, hi: f64) -> f64 {
    if x > hi {
        x - hi
    } else if x < -lo {
        x + lo
    } else {
        0.0
    }
}

/// Proximal map of `t·ρ⁰`: `argmin ½|x−τ|² + t·ρ⁰(x)`.
pub fn shrink_rho_polar(setting: &DesignSetting, tau: &SymTensor2, t: f64) -> SymTensor2 {
    match *setting {
        DesignSetting::Amd => {
            let n = tau.norm();
            if n > t {
                tau.scale(1.0 - t / n)
            } else {
                SymTensor2::zeros(tau.dim())
            }
        }
        DesignSetting::FibMd => eig_sym(tau).map(|l| soft(l, t, t)),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
            eig_sym(tau).map(|l| soft(l, t / kappa_minus, t / kappa_plus))
        }
        DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
            // ρ⁰ = (bt/√d)|trace coordinate| + bd|dev| with the trace coordinate tr/√d
            let d = tau.dim() as f64;
            let (bt, bd) = iso_bounds(setting, tau.dim());
            let (tr, dev) = trace_dev_split(tau);
            let tc = soft(tr / d.sqrt(), t * bt / d.sqrt(), t * bt / d.sqrt());
            let dn = dev.norm();
            let dev = if dn > t * bd { dev.scale(1.0 - t * bd / dn) } else { SymTensor2::zeros(tau.dim()) };
            SymTensor2::identity(tau.dim()).scale(tc / d.sqrt()) + dev
        }
        DesignSetting::ScalarAmd | DesignSetting::ScalarIso => {
            panic!("shrink_rho_polar: scalar setting used with a tensor argument")
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Target relative gap `(Z_dual − Z_primal)/Z_dual`.
    pub gap_tol: f64,
    /// Iterations between cheap gap evaluations.
    pub check_every: usize,
    /// Seed of the power iteration start vector.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_iter: 200_000, gap_tol: 1e-4, check_every: 50, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteLCPSolution {
    pub grid: Grid,
    pub setting: DesignSetting,
    /// Nodal load vector the solution was computed for.
    pub load: Vec<[f64; 2]>,
    /// Nodal displacement with `max ρ(Bu) = 1` (or zero).
    pub u: Vec<[f64; 2]>,
    /// Force flux at the quadrature points, four per cell, in exact discrete equilibrium.
    pub tau: Vec<SymTensor2>,
    pub z_primal: f64,
    pub z_dual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖F − Bᵀτ‖/‖F‖` after the equilibrium correction.
    pub equilibrium_residual: f64,
}

impl DiscreteLCPSolution {
    /// Midpoint of the certified bracket.
    pub fn z(&self) -> f64 {
        0.5 * (self.z_primal + self.z_dual)
    }

    pub fn relative_gap(&self) -> f64 {
        if self.z_dual > 0.0 {
            self.gap / self.z_dual
        } else {
            0.0
        }
    }

    /// Quadrature-point fluxes of a cell.
    pub fn point_tau(&self, c: usize) -> &[SymTensor2] {
        &self.tau[POINTS_PER_CELL * c..POINTS_PER_CELL * (c + 1)]
    }

    /// Mean flux of a cell.
    pub fn cell_tau(&self, c: usize) -> SymTensor2 {
        let t = self.point_tau(c);
        (t[0] + t[1] + t[2] + t[3]).scale(0.25)
    }

    /// Largest `ρ` of the discrete strain of `u`.
    pub fn max_strain_gauge(&self) -> f64 {
        let op = assemble_strain_operator(&self.grid);
        op.apply(&self.u).par_iter().map(|e| rho(&self.setting, e)).reduce(|| 0.0, f64::max)
    }
}

/// Certified `Z_dual − Z_primal`. The stored fields are re-certified first, so a
/// flux that has drifted off equilibrium is corrected before evaluation.
pub fn duality_gap(sol: &DiscreteLCPSolution) -> f64 {
    let cert = Certifier::new(&sol.grid, &sol.setting, &sol.load);
    let c = cert.certify(&sol.u, &sol.tau, None);
    c.z_dual - c.z_primal
}

/// Re-certifies a solution in place (rescaled `u`, corrected `τ`, fresh bounds).
pub fn recertify(sol: &mut DiscreteLCPSolution) {
    let cert = Certifier::new(&sol.grid, &sol.setting, &sol.load);
    let c = cert.certify(&sol.u, &sol.tau, None);
    sol.z_primal = c.z_primal;
    sol.z_dual = c.z_dual;
    sol.gap = c.z_dual - c.z_primal;
    sol.equilibrium_residual = c.residual;
    sol.u = c.u;
    sol.tau = c.tau;
}

fn chunked_sum(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let parts: Vec<f64> = (0..len.div_ceil(SUM_CHUNK))
        .into_par_iter()
        .map(|k| (k * SUM_CHUNK..((k + 1) * SUM_CHUNK).min(len)).map(&f).sum())
        .collect();
    parts.iter().sum()
}

fn dot_nodes(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    chunked_sum(a.len(), |i| a[i][0] * b[i][0] + a[i][1] * b[i][1])
}

struct Certified {
    z_primal: f64,
    z_dual: f64,
    residual: f64,
    u: Vec<[f64; 2]>,
    tau: Vec<SymTensor2>,
}

/// Feasibility corrections producing certified bounds.
struct Certifier<'a> {
    op: StrainOperator,
    setting: &'a DesignSetting,
    load: &'a [[f64; 2]],
    load_norm: f64,
    weight: f64,
    /// Orthonormal basis of nodal rigid motions.
    rigid: Vec<Vec<[f64; 2]>>,
    diag: Vec<[f64; 2]>,
}

impl<'a> Certifier<'a> {
    fn new(grid: &Grid, setting: &'a DesignSetting, load: &'a [[f64; 2]]) -> Self {
        let op = assemble_strain_operator(grid);
        let n = grid.node_count();
        let centre = [grid.origin[0] + 0.5 * grid.width(), grid.origin[1] + 0.5 * grid.height()];
        let mut rigid: Vec<Vec<[f64; 2]>> = vec![
            vec![[1.0, 0.0]; n],
            vec![[0.0, 1.0]; n],
            (0..n)
                .map(|i| {
                    let x = grid.node_position(i);
                    [-(x[1] - centre[1]), x[0] - centre[0]]
                })
                .collect(),
        ];
        for k in 0..rigid.len() {
            for j in 0..k {
                let c = dot_nodes(&rigid[k], &rigid[j]);
                let (head, tail) = rigid.split_at_mut(k);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    a[0] -= c * b[0];
                    a[1] -= c * b[1];
                }
            }
            let nrm = dot_nodes(&rigid[k], &rigid[k]).sqrt();
            rigid[k].iter_mut().for_each(|a| {
                a[0] /= nrm;
                a[1] /= nrm;
            });
        }
        // Diagonal of BᵀWB from unit nodal displacements.
        let mut diag = vec![[0.0; 2]; n];
        let w = grid.point_weight();
        let mut unit = vec![[0.0; 2]; n];
        for c in 0..grid.cell_count() {
            let nodes = grid.cell_nodes(c);
            for &node in &nodes {
                for a in 0..2 {
                    unit[node][a] = 1.0;
                    let s = op.cell_strains(&unit, c);
                    diag[node][a] += w * s.iter().map(|e| e.dot(e)).sum::<f64>();
                    unit[node][a] = 0.0;
                }
            }
        }
        let load_norm = dot_nodes(load, load).sqrt();
        Self { op, setting, load, load_norm, weight: w, rigid, diag }
    }

    fn remove_rigid(&self, r: &mut [[f64; 2]]) {
        for b in &self.rigid {
            let c = dot_nodes(r, b);
            r.par_iter_mut().zip(b.par_iter()).for_each(|(a, e)| {
                a[0] -= c * e[0];
                a[1] -= c * e[1];
            });
        }
    }

    /// Jacobi-preconditioned conjugate gradients for `BᵀWB y = r`.
    fn solve_normal(&self, rhs: &[[f64; 2]], y0: Option<&[[f64; 2]]>) -> Vec<[f64; 2]> {
        let n = rhs.len();
        let mut y = y0.map(|v| v.to_vec()).unwrap_or_else(|| vec![[0.0; 2]; n]);
        let apply = |v: &[[f64; 2]]| self.op.adjoint(&self.op.apply(v));
        let ky = apply(&y);
        let mut r: Vec<[f64; 2]> = rhs.iter().zip(&ky).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
        let target = CG_REL_TOL * self.load_norm.max(f64::MIN_POSITIVE);
        let precond = |r: &[[f64; 2]]| -> Vec<[f64; 2]> {
            r.iter()
                .zip(&self.diag)
                .map(|(a, d)| [if d[0] > 0.0 { a[0] / d[0] } else { 0.0 }, if d[1] > 0.0 { a[1] / d[1] } else { 0.0 }])
                .collect()
        };
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot_nodes(&r, &z);
        for _ in 0..(4 * n).max(100) {
            if dot_nodes(&r, &r).sqrt() <= target {
                break;
            }
            let kp = apply(&p);
            let pkp = dot_nodes(&p, &kp);
            if pkp <= 0.0 {
                break;
            }
            let alpha = rz / pkp;
            for i in 0..n {
                y[i][0] += alpha * p[i][0];
                y[i][1] += alpha * p[i][1];
                r[i][0] -= alpha * kp[i][0];
                r[i][1] -= alpha * kp[i][1];
            }
            z = precond(&r);
            let rz_new = dot_nodes(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i][0] = z[i][0] + beta * p[i][0];
                p[i][1] = z[i][1] + beta * p[i][1];
            }
        }
        y
    }

    fn primal(&self, u: &[[f64; 2]]) -> (f64, Vec<[f64; 2]>) {
        let m = self.op.apply(u).par_iter().map(|e| rho(self.setting, e)).reduce(|| 0.0, f64::max);
        if m <= 0.0 {
            return (0.0, vec![[0.0; 2]; u.len()]);
        }
        let scaled: Vec<[f64; 2]> = u.iter().map(|a| [a[0] / m, a[1] / m]).collect();
        (dot_nodes(self.load, &scaled).max(0.0), scaled)
    }

    fn dual_value(&self, tau: &[SymTensor2]) -> f64 {
        self.weight * chunked_sum(tau.len(), |g| rho_polar(self.setting, &tau[g]))
    }

    fn residual(&self, tau: &[SymTensor2]) -> Vec<[f64; 2]> {
        let bt = self.op.adjoint(tau);
        self.load.iter().zip(&bt).map(|(f, b)| [f[0] - b[0], f[1] - b[1]]).collect()
    }

    fn certify(&self, u: &[[f64; 2]], tau: &[SymTensor2], y0: Option<&[[f64; 2]]>) -> Certified {
        let (z_primal, u) = self.primal(u);
        let mut r = self.residual(tau);
        self.remove_rigid(&mut r);
        let y = self.solve_normal(&r, y0);
        let delta = self.op.apply(&y);
        let tau: Vec<SymTensor2> = tau.iter().zip(&delta).map(|(a, b)| *a + *b).collect();
        let res = self.residual(&tau);
        let residual = if self.load_norm > 0.0 { dot_nodes(&res, &res).sqrt() / self.load_norm } else { 0.0 };
        let z_dual = self.dual_value(&tau);
        Certified { z_primal, z_dual, residual, u, tau }
    }
}

fn norm_estimate(op: &StrainOperator, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5]).collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERS {
        let nv = dot_nodes(&v, &v).sqrt();
        v.iter_mut().for_each(|a| {
            a[0] /= nv;
            a[1] /= nv;
        });
        let kv = op.adjoint(&op.apply(&v));
        lambda = dot_nodes(&kv, &kv).sqrt();
        v = kv;
    }
    lambda.sqrt()
}

/// Prolongs a solution on a coarser (or equal) grid covering the same
/// rectangle onto `grid`: bilinear interpolation of `u`, nearest-corner
/// sampling of `τ`.
fn prolong(grid: &Grid, prev: &DiscreteLCPSolution) -> (Vec<[f64; 2]>, Vec<SymTensor2>) {
    let pg = &prev.grid;
    let clamp = |x: [f64; 2]| {
        [
            x[0].clamp(pg.origin[0], pg.origin[0] + pg.width()),
            x[1].clamp(pg.origin[1], pg.origin[1] + pg.height()),
        ]
    };
    let u = (0..grid.node_count())
        .map(|n| pg.interpolate(&prev.u, clamp(grid.node_position(n))).unwrap_or([0.0; 2]))
        .collect();
    let mut tau = Vec::with_capacity(grid.point_count());
    for c in 0..grid.cell_count() {
        let parent = pg.locate(clamp(grid.cell_center(c))).map(|l| l.0).unwrap_or(0);
        let pc = pg.cell_center(parent);
        for k in 0..POINTS_PER_CELL {
            let x = grid.point_position(c, k);
            let corner = usize::from(x[0] > pc[0]) + 2 * usize::from(x[1] > pc[1]);
            tau.push(prev.tau[POINTS_PER_CELL * parent + corner]);
        }
    }
    (u, tau)
}

pub fn solve_lcp(grid: &Grid, loads: &LoadSpec, setting: &DesignSetting, opts: &SolveOptions) -> Result<DiscreteLCPSolution> {
    solve_lcp_from(grid, loads, setting, opts, None)
}

/// As [`solve_lcp`], optionally warm-started from a solution on a coarser grid
/// of the same rectangle.
pub fn solve_lcp_from(
    grid: &Grid,
    loads: &LoadSpec,
    setting: &DesignSetting,
    opts: &SolveOptions,
    start: Option<&DiscreteLCPSolution>,
) -> Result<DiscreteLCPSolution> {
    setting.require_tensor()?;
    if !(opts.gap_tol > 0.0) {
        return Err(FmdError::InvalidSetting(format!("gap_tol must be positive, got {}", opts.gap_tol)));
    }
    let load = assemble_load_vector(grid, loads)?;
    let n = grid.node_count();
    let np = grid.point_count();
    let cert = Certifier::new(grid, setting, &load);
    let zero = SymTensor2::zeros(2);
    if cert.load_norm == 0.0 {
        return Ok(DiscreteLCPSolution {
            grid: *grid,
            setting: *setting,
            load: load.clone(),
            u: vec![[0.0; 2]; n],
            tau: vec![zero; np],
            z_primal: 0.0,
            z_dual: 0.0,
            gap: 0.0,
            iterations: 0,
            converged: true,
            equilibrium_residual: 0.0,
        });
    }
    let op = cert.op;
    let w = grid.point_weight();

    let (mut u, mut tau) = match start {
        Some(prev) => prolong(grid, prev),
        None => (vec![[0.0; 2]; n], vec![zero; np]),
    };

    let l = norm_estimate(&op, n, opts.seed);
    let diam = grid.width().hypot(grid.height());
    let force: f64 = load.iter().map(|f| f[0].hypot(f[1])).sum();
    let ratio = diam * diam / force.max(f64::MIN_POSITIVE);
    let mut t = STEP_PRODUCT.sqrt() * ratio / l;
    let mut s = STEP_PRODUCT.sqrt() / (ratio * l);
    let mut alpha = 0.5;

    let (mut best_zp, mut best_u) = cert.primal(&u);
    let mut best: Option<Certified> = None;

    let mut bu = op.apply(&u);
    let mut btau = op.adjoint(&tau);
    let mut u_new = vec![[0.0; 2]; n];
    let mut bu_new = vec![zero; np];
    let mut tau_new = vec![zero; np];
    let mut btau_new = vec![[0.0; 2]; n];

    let mut cert_wait = 0usize;
    let mut cert_backoff = opts.check_every.max(1);
    let mut iterations = 0;
    let mut converged = false;

    let check_every = opts.check_every.max(1);
    for it in 1..=opts.max_iter {
        iterations = it;
        u_new.par_iter_mut().enumerate().for_each(|(i, x)| {
            x[0] = u[i][0] - t * (btau[i][0] - load[i][0]);
            x[1] = u[i][1] - t * (btau[i][1] - load[i][1]);
        });
        op.apply_into(&u_new, &mut bu_new);
        tau_new.par_iter_mut().enumerate().for_each(|(g, x)| {
            let arg = tau[g] + (2.0 * bu_new[g] - bu[g]).scale(s);
            *x = shrink_rho_polar(setting, &arg, s);
        });
        op.adjoint_into(&tau_new, &mut btau_new);

        // Residual balancing of the two step sizes.
        if alpha > 1e-3 {
            let p = chunked_sum(n, |i| {
                let a = (u[i][0] - u_new[i][0]) / t - (btau[i][0] - btau_new[i][0]);
                let b = (u[i][1] - u_new[i][1]) / t - (btau[i][1] - btau_new[i][1]);
                a * a + b * b
            })
            .sqrt();
            let d = (w * chunked_sum(np, |g| {
                let e = (tau[g] - tau_new[g]).scale(1.0 / s) - (bu[g] - bu_new[g]);
                e.dot(&e)
            }))
            .sqrt();
            if p > 1.5 * d {
                t /= 1.0 - alpha;
                s *= 1.0 - alpha;
                alpha *= 0.95;
            } else if d > 1.5 * p {
                t *= 1.0 - alpha;
                s /= 1.0 - alpha;
                alpha *= 0.95;
            }
        }

        std::mem::swap(&mut u, &mut u_new);
        std::mem::swap(&mut bu, &mut bu_new);
        std::mem::swap(&mut tau, &mut tau_new);
        std::mem::swap(&mut btau, &mut btau_new);

        if it % check_every != 0 && it != opts.max_iter {
            continue;
        }
        let m = bu.par_iter().map(|e| rho(setting, e)).reduce(|| 0.0, f64::max);
        if m > 0.0 {
            let zp = dot_nodes(&load, &u) / m;
            if zp > best_zp {
                best_zp = zp;
                best_u = u.iter().map(|a| [a[0] / m, a[1] / m]).collect();
            }
        }
        let zd_raw = cert.dual_value(&tau);
        let cheap_gap = (zd_raw - best_zp) / zd_raw.abs().max(f64::MIN_POSITIVE);
        if it < cert_wait || (cheap_gap > opts.gap_tol && it != opts.max_iter) {
            continue;
        }
        let c = cert.certify(&best_u, &tau, None);
        if best.as_ref().map_or(true, |b| c.z_dual < b.z_dual) {
            best = Some(c);
        }
        let b = best.as_ref().unwrap();
        if b.z_dual - best_zp <= opts.gap_tol * b.z_dual {
            converged = true;
            break;
        }
        cert_wait = it + cert_backoff;
        cert_backoff = (2 * cert_backoff).min(50 * check_every);
    }

    let best = match best {
        Some(b) => b,
        None => cert.certify(&best_u, &tau, None),
    };
    let (z_primal, u_final) = cert.primal(&best_u);
    let z_dual = best.z_dual;
    Ok(DiscreteLCPSolution {
        grid: *grid,
        setting: *setting,
        load: load.clone(),
        u: u_final,
        tau: best.tau,
        z_primal,
        z_dual,
        gap: z_dual - z_primal,
        iterations,
        converged: converged || z_dual - z_primal <= opts.gap_tol * z_dual,
        equilibrium_residual: best.residual,
    })
}
