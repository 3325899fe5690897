//! Verification of optimality conditions for closed-form candidate solutions
//! `(u, μ, σ, H)` whose measure is a sum of uniform rectangles and segments:
//!
//! 1. equilibrium `−div(σμ) = F` in weak form,
//! 2. `ρ(e(u)) ≤ 1` on the domain,
//! 3. `⟨e_μ(u), σ⟩ = 1` and `H` optimal for `σ` on every part of `μ`, with
//!    the tangential strain `e_μ` on segments.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{FmdError, Result};
use crate::grid::{assemble_load_vector_unchecked, segment_quadrature, Grid, LoadSpec};
use crate::oracle::{cost, in_cone, is_hooke_optimal_for_stress, rho, rho_polar, strain_energy};
use crate::setting::DesignSetting;
use crate::tensor::{hooke_apply, HookeTensor, SymTensor2, SQRT2};

/// Cells along the longer side of the verification grid.
pub const VERIFICATION_CELLS: usize = 64;
/// Samples per side of the membership grid.
pub const MEMBERSHIP_SAMPLES: usize = 101;
const PART_SAMPLES: usize = 17;

type VectorMap = dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync;
type GradientMap = dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync;

/// Displacement with its gradient `∂uᵢ/∂xⱼ`.
#[derive(Clone)]
pub struct DisplacementField {
    value: Arc<VectorMap>,
    gradient: Arc<GradientMap>,
}

impl fmt::Debug for DisplacementField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DisplacementField")
    }
}

impl DisplacementField {
    pub fn new(
        value: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        gradient: impl Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), gradient: Arc::new(gradient) }
    }

    /// `u(x) = A·x + b`.
    pub fn affine(a: [[f64; 2]; 2], b: [f64; 2]) -> Self {
        Self::new(
            move |x| [a[0][0] * x[0] + a[0][1] * x[1] + b[0], a[1][0] * x[0] + a[1][1] * x[1] + b[1]],
            move |_| a,
        )
    }

    pub fn zero() -> Self {
        Self::affine([[0.0; 2]; 2], [0.0; 2])
    }

    pub fn value(&self, x: [f64; 2]) -> [f64; 2] {
        (self.value)(x)
    }

    pub fn strain(&self, x: [f64; 2]) -> SymTensor2 {
        let g = (self.gradient)(x);
        SymTensor2::plane(g[0][0], g[1][1], 0.5 * (g[0][1] + g[1][0]))
    }
}

/// Uniform density on an axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaPart {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub density: f64,
}

/// Uniform line density on a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinePart {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub density: f64,
}

impl LinePart {
    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    pub fn tangent(&self) -> [f64; 2] {
        let l = self.length();
        [(self.end[0] - self.start[0]) / l, (self.end[1] - self.start[1]) / l]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasurePart {
    Area(AreaPart),
    Line(LinePart),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructuredMeasure {
    pub parts: Vec<MeasurePart>,
}

impl StructuredMeasure {
    pub fn validate(&self) -> Result<()> {
        for p in &self.parts {
            match p {
                MeasurePart::Area(a) => {
                    if !(a.density >= 0.0) || !(a.hi[0] > a.lo[0] && a.hi[1] > a.lo[1]) {
                        return Err(FmdError::InvalidMeasure(format!("bad area part {a:?}")));
                    }
                }
                MeasurePart::Line(l) => {
                    if !(l.density >= 0.0) || !(l.length() > 0.0) {
                        return Err(FmdError::InvalidMeasure(format!("bad line part {l:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| match p {
                MeasurePart::Area(a) => a.density * (a.hi[0] - a.lo[0]) * (a.hi[1] - a.lo[1]),
                MeasurePart::Line(l) => l.density * l.length(),
            })
            .sum()
    }

    fn extend_box(&self, lo: &mut [f64; 2], hi: &mut [f64; 2]) {
        for p in &self.parts {
            let pts = match p {
                MeasurePart::Area(a) => [a.lo, a.hi],
                MeasurePart::Line(l) => [l.start, l.end],
            };
            for x in pts {
                for k in 0..2 {
                    lo[k] = lo[k].min(x[k]);
                    hi[k] = hi[k].max(x[k]);
                }
            }
        }
    }
}

/// One part of the measure with its stress and Hooke tensor.
#[derive(Clone, Debug)]
pub struct QuadruplePart {
    pub support: MeasurePart,
    pub sigma: SymTensor2,
    pub hooke: HookeTensor,
}

#[derive(Clone, Debug)]
pub struct AnalyticQuadruple {
    pub u: DisplacementField,
    pub parts: Vec<QuadruplePart>,
}

impl AnalyticQuadruple {
    pub fn measure(&self) -> StructuredMeasure {
        StructuredMeasure { parts: self.parts.iter().map(|p| p.support).collect() }
    }

    /// Same quadruple with every stress multiplied by `t`.
    pub fn with_stress_scaled(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.parts.iter_mut().for_each(|p| p.sigma = p.sigma.scale(t));
        out
    }

    /// Normalisation `ρ⁰(σ) = 1`, `c(H) = 1` on every part, and tangential
    /// stresses on segments.
    pub fn validate(&self, setting: &DesignSetting) -> Result<()> {
        setting.require_tensor()?;
        self.measure().validate()?;
        for (i, p) in self.parts.iter().enumerate() {
            let r = rho_polar(setting, &p.sigma);
            if (r - 1.0).abs() > 1e-10 {
                return Err(FmdError::InvalidMeasure(format!("part {i}: polar gauge of stress is {r}, expected 1")));
            }
            let c = cost(&p.hooke);
            if (c - 1.0).abs() > 1e-10 {
                return Err(FmdError::InvalidMeasure(format!("part {i}: Hooke tensor cost is {c}, expected 1")));
            }
            if let MeasurePart::Line(l) = p.support {
                if !is_tangential(&p.sigma, l.tangent(), 1e-10) {
                    return Err(FmdError::InvalidMeasure(format!("part {i}: stress is not tangential to the segment")));
                }
            }
        }
        Ok(())
    }
}

fn tangent_tensor(t: [f64; 2]) -> SymTensor2 {
    SymTensor2::outer(&t)
}

/// `P σ P` with `P = t⊗t`.
fn tangential_part(sigma: &SymTensor2, t: [f64; 2]) -> SymTensor2 {
    let tt = tangent_tensor(t);
    tt.scale(tt.dot(sigma))
}

fn is_tangential(sigma: &SymTensor2, t: [f64; 2], tol: f64) -> bool {
    (*sigma - tangential_part(sigma, t)).norm() <= tol * sigma.norm().max(1.0)
}

/// Tangential strain `Pᵀ e(u) P` of `u` at `x` on a part.
pub fn tangent_strain(u: &DisplacementField, part: &MeasurePart, x: [f64; 2]) -> SymTensor2 {
    let e = u.strain(x);
    match part {
        MeasurePart::Area(_) => e,
        MeasurePart::Line(l) => tangential_part(&e, l.tangent()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionResult {
    pub passed: bool,
    /// Worst violation found (meaning depends on the condition).
    pub worst: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimalityReport {
    pub equilibrium: ConditionResult,
    pub membership: ConditionResult,
    pub extremality: ConditionResult,
}

impl OptimalityReport {
    pub fn passed(&self) -> bool {
        self.equilibrium.passed && self.membership.passed && self.extremality.passed
    }
}

/// Bounding box of the measure and the loads.
pub fn verification_box(q: &AnalyticQuadruple, loads: &LoadSpec) -> Option<([f64; 2], [f64; 2])> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    q.measure().extend_box(&mut lo, &mut hi);
    if let Some((a, b)) = loads.bounding_box() {
        for k in 0..2 {
            lo[k] = lo[k].min(a[k]);
            hi[k] = hi[k].max(b[k]);
        }
    }
    (lo[0].is_finite()).then_some((lo, hi))
}

/// Square-cell grid over a box, `cells` along its longer side.
pub fn verification_grid(lo: [f64; 2], hi: [f64; 2], cells: usize) -> Result<Grid> {
    let (w, h) = (hi[0] - lo[0], hi[1] - lo[1]);
    let size = w.max(h);
    if !(size > 0.0) {
        return Err(FmdError::InvalidGrid("verification box is degenerate".into()));
    }
    let step = size / cells as f64;
    let nx = ((w / step) - 1e-9).ceil().max(1.0) as usize;
    let ny = ((h / step) - 1e-9).ceil().max(1.0) as usize;
    Grid::new(lo, step, nx, ny)
}

/// Gradient of the four bilinear shape functions at local coordinates.
fn shape_gradients(h: f64, s: f64, t: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - t) / h, -(1.0 - s) / h],
        [(1.0 - t) / h, -s / h],
        [-t / h, (1.0 - s) / h],
        [t / h, s / h],
    ]
}

fn add_flux(acc: &mut [[f64; 2]], grid: &Grid, cell: usize, s: f64, t: f64, tau: &SymTensor2, weight: f64) {
    let m = tau.to_matrix();
    for (node, g) in grid.cell_nodes(cell).iter().zip(shape_gradients(grid.h, s, t)) {
        acc[*node][0] += weight * (m[0][0] * g[0] + m[0][1] * g[1]);
        acc[*node][1] += weight * (m[1][0] * g[0] + m[1][1] * g[1]);
    }
}

/// Nodal residual `∫⟨e(φ), σ⟩dμ − ⟨F, φ⟩` over the Q1 test functions of `grid`.
pub fn equilibrium_residual(q: &AnalyticQuadruple, loads: &LoadSpec, grid: &Grid) -> Result<Vec<[f64; 2]>> {
    let f = assemble_load_vector_unchecked(grid, loads)?;
    let mut r = vec![[0.0; 2]; grid.node_count()];
    let g = 0.5 / 3f64.sqrt();
    for part in &q.parts {
        match part.support {
            MeasurePart::Area(a) => {
                for c in 0..grid.cell_count() {
                    let nodes = grid.cell_nodes(c);
                    let x0 = grid.node_position(nodes[0]);
                    let lo = [a.lo[0].max(x0[0]), a.lo[1].max(x0[1])];
                    let hi = [a.hi[0].min(x0[0] + grid.h), a.hi[1].min(x0[1] + grid.h)];
                    if hi[0] <= lo[0] || hi[1] <= lo[1] {
                        continue;
                    }
                    let area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
                    for gx in [0.5 - g, 0.5 + g] {
                        for gy in [0.5 - g, 0.5 + g] {
                            let x = [lo[0] + gx * (hi[0] - lo[0]), lo[1] + gy * (hi[1] - lo[1])];
                            let (s, t) = ((x[0] - x0[0]) / grid.h, (x[1] - x0[1]) / grid.h);
                            add_flux(&mut r, grid, c, s, t, &part.sigma, 0.25 * area * a.density);
                        }
                    }
                }
            }
            MeasurePart::Line(l) => {
                let sigma = tangential_part(&part.sigma, l.tangent());
                for (c, s, t, w) in segment_quadrature(grid, l.start, l.end)? {
                    add_flux(&mut r, grid, c, s, t, &sigma, w * l.density);
                }
            }
        }
    }
    for (ri, fi) in r.iter_mut().zip(&f) {
        ri[0] -= fi[0];
        ri[1] -= fi[1];
    }
    Ok(r)
}

/// Weak equilibrium: largest nodal residual at most `tol·max|F|`.
pub fn check_equilibrium(q: &AnalyticQuadruple, loads: &LoadSpec, tol: f64) -> ConditionResult {
    check_equilibrium_on(q, loads, tol, VERIFICATION_CELLS)
}

pub fn check_equilibrium_on(q: &AnalyticQuadruple, loads: &LoadSpec, tol: f64, cells: usize) -> ConditionResult {
    let fail = ConditionResult { passed: false, worst: f64::INFINITY };
    let Some((lo, hi)) = verification_box(q, loads) else {
        return ConditionResult { passed: true, worst: 0.0 };
    };
    let Ok(grid) = verification_grid(lo, hi, cells) else { return fail };
    let (Ok(f), Ok(r)) = (assemble_load_vector_unchecked(&grid, loads), equilibrium_residual(q, loads, &grid)) else {
        return fail;
    };
    let scale = f.iter().map(|a| a[0].hypot(a[1])).fold(0.0, f64::max);
    let worst = r.iter().map(|a| a[0].hypot(a[1])).fold(0.0, f64::max);
    let rel = if scale > 0.0 { worst / scale } else { worst };
    ConditionResult { passed: rel <= tol, worst: rel }
}

/// `ρ(e(u)) ≤ 1 + tol` on a sample grid of the box spanned by the measure.
pub fn check_membership(q: &AnalyticQuadruple, setting: &DesignSetting, tol: f64) -> ConditionResult {
    check_membership_in(q, setting, tol, verification_box(q, &LoadSpec::default()))
}

pub fn check_membership_in(
    q: &AnalyticQuadruple,
    setting: &DesignSetting,
    tol: f64,
    bbox: Option<([f64; 2], [f64; 2])>,
) -> ConditionResult {
    if setting.require_tensor().is_err() {
        return ConditionResult { passed: false, worst: f64::INFINITY };
    }
    let Some((lo, hi)) = bbox else {
        return ConditionResult { passed: true, worst: 0.0 };
    };
    let n = MEMBERSHIP_SAMPLES;
    let worst = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let x = [
                lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64,
            ];
            rho(setting, &q.u.strain(x))
        })
        .reduce(|| 0.0, f64::max);
    ConditionResult { passed: worst <= 1.0 + tol, worst }
}

fn part_samples(part: &MeasurePart) -> Vec<[f64; 2]> {
    let n = PART_SAMPLES;
    let frac = |i: usize| (i as f64 + 0.5) / n as f64;
    match part {
        MeasurePart::Area(a) => (0..n * n)
            .map(|k| [a.lo[0] + (a.hi[0] - a.lo[0]) * frac(k % n), a.lo[1] + (a.hi[1] - a.lo[1]) * frac(k / n)])
            .collect(),
        MeasurePart::Line(l) => (0..n)
            .map(|i| {
                let s = frac(i);
                [l.start[0] + s * (l.end[0] - l.start[0]), l.start[1] + s * (l.end[1] - l.start[1])]
            })
            .collect(),
    }
}

/// Orthonormal basis of the complement of `t⊗t` in plane symmetric tensors.
fn normal_basis(t: [f64; 2]) -> [SymTensor2; 2] {
    let n = [-t[1], t[0]];
    let sym = SymTensor2::plane(
        SQRT2 * t[0] * n[0],
        SQRT2 * t[1] * n[1],
        (t[0] * n[1] + t[1] * n[0]) / SQRT2,
    );
    [SymTensor2::outer(&n), sym]
}

/// `inf_ζ ½⟨H(ξ+ζ), ξ+ζ⟩` over `ζ ⟂ t⊗t` by a Schur complement.
fn quadratic_tangential_energy(h: &HookeTensor, t: [f64; 2], xi: &SymTensor2) -> f64 {
    let b = normal_basis(t);
    let hx = hooke_apply(h, xi);
    let hb = [hooke_apply(h, &b[0]), hooke_apply(h, &b[1])];
    let m = [[hb[0].dot(&b[0]), hb[0].dot(&b[1])], [hb[1].dot(&b[0]), hb[1].dot(&b[1])]];
    let v = [hx.dot(&b[0]), hx.dot(&b[1])];
    // pseudo-inverse of the 2×2 block through its eigen-decomposition
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let r = (0.5 * (m[0][0] - m[1][1])).hypot(m[0][1]);
    let (s, c) = if r == 0.0 { (0.0, 1.0) } else { (0.5 * (2.0 * m[0][1]).atan2(m[0][0] - m[1][1])).sin_cos() };
    let vecs = [[c, s], [-s, c]];
    let cutoff = 1e-12 * (mean.abs() + r).max(f64::MIN_POSITIVE);
    let mut reduction = 0.0;
    for (lam, e) in [mean + r, mean - r].into_iter().zip(vecs) {
        if lam > cutoff {
            let proj = v[0] * e[0] + v[1] * e[1];
            reduction += proj * proj / lam;
        }
    }
    0.5 * (hx.dot(xi) - reduction).max(0.0)
}

/// Compass search for the minimum of a convex function of two variables.
fn compass_min(f: impl Fn(f64, f64) -> f64, scale: f64) -> f64 {
    let (mut x, mut y) = (0.0, 0.0);
    let mut best = f(x, y);
    let mut step = scale.max(1e-3);
    while step > 1e-11 * scale.max(1.0) {
        let mut moved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let v = f(x + step * dx, y + step * dy);
            if v < best {
                best = v;
                x += step * dx;
                y += step * dy;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// Tangential strain potential `j_μ(H, ξ) = inf_{ζ ⟂ t⊗t} j(H, ξ + ζ)` on a segment
/// with unit tangent `t`.
pub fn tangential_energy(setting: &DesignSetting, h: &HookeTensor, t: [f64; 2], xi: &SymTensor2) -> Result<f64> {
    setting.require_tensor()?;
    match setting {
        DesignSetting::Amd | DesignSetting::FibMd | DesignSetting::Imd => {
            strain_energy(setting, h, xi)?;
            Ok(quadratic_tangential_energy(h, t, xi))
        }
        _ => {
            let b = normal_basis(t);
            strain_energy(setting, h, xi)?;
            Ok(compass_min(
                |a, c| strain_energy(setting, h, &(*xi + b[0].scale(a) + b[1].scale(c))).unwrap_or(f64::INFINITY),
                xi.norm(),
            ))
        }
    }
}

/// Extremality `⟨e_μ(u), σ⟩ = 1` and Hooke optimality on every part. On
/// segments the constitutive law is checked through `p·j_μ(H, e_μ(u)) = ⟨e_μ(u), σ⟩`.
pub fn check_extremality_and_hooke(q: &AnalyticQuadruple, setting: &DesignSetting, tol: f64) -> ConditionResult {
    if setting.require_tensor().is_err() {
        return ConditionResult { passed: false, worst: f64::INFINITY };
    }
    let p = setting.exponent();
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for part in &q.parts {
        if !is_hooke_optimal_for_stress(setting, &part.hooke, &part.sigma, tol) || !in_cone(setting, &part.hooke) {
            passed = false;
            worst = f64::INFINITY;
            continue;
        }
        if let MeasurePart::Line(l) = part.support {
            if !is_tangential(&part.sigma, l.tangent(), tol) {
                passed = false;
                worst = f64::INFINITY;
                continue;
            }
        }
        for x in part_samples(&part.support) {
            let e = tangent_strain(&q.u, &part.support, x);
            let pairing = e.dot(&part.sigma);
            let mut dev = (pairing - 1.0).abs();
            if let MeasurePart::Line(l) = part.support {
                match tangential_energy(setting, &part.hooke, l.tangent(), &e) {
                    Ok(j) => dev = dev.max((p * j - pairing).abs()),
                    Err(_) => dev = f64::INFINITY,
                }
            }
            worst = worst.max(dev);
            if !(dev <= tol) {
                passed = false;
            }
        }
    }
    ConditionResult { passed, worst }
}

/// All three conditions. Membership is sampled on the box spanned by the
/// measure and the loads.
pub fn check_optimality(q: &AnalyticQuadruple, loads: &LoadSpec, setting: &DesignSetting, tol: f64) -> OptimalityReport {
    OptimalityReport {
        equilibrium: check_equilibrium(q, loads, tol),
        membership: check_membership_in(q, setting, tol, verification_box(q, loads)),
        extremality: check_extremality_and_hooke(q, setting, tol),
    }
}
