//! Point-wise design oracles: energies, gauges and optimal Hooke tensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FmdError, Result};
use crate::setting::DesignSetting;
use crate::tensor::{
    dyadic, eig_sym, hooke_apply, iso_hooke, jacobi_eigen, mandel_len, psd_split, trace_dev_split,
    young_poisson, HookeTensor, SymTensor2, SQRT2,
};

/// Eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Relative size of the out-of-range component tolerated by `stress_energy`.
pub const RANGE_TOL: f64 = 1e-9;
const CONE_TOL: f64 = 1e-9;
const CONE_MAX_ITER: usize = 500;
const CONE_GRAD_TOL: f64 = 1e-12;
const ADMM_MAX_ITER: usize = 50_000;
const BRUTE_FORCE_SEED: u64 = 0x5eed_f00d;

/// Cost of a Hooke tensor: its trace.
pub fn cost(h: &HookeTensor) -> f64 {
    h.trace()
}

fn same_dim(h: &HookeTensor, t: &SymTensor2) -> Result<()> {
    if h.dim() != t.dim() {
        return Err(FmdError::DimensionMismatch { expected: h.dim(), got: t.dim() });
    }
    Ok(())
}

/// Membership of the convex hull of uniaxial tensors in d = 2.
///
/// Such tensors are quartic moments of a measure on directions: the shear
/// entry must equal twice the normal coupling and the moment Hankel matrix
/// must be positive semi-definite.
fn fibrous_hull_2d(h: &HookeTensor) -> bool {
    let scale = h.frobenius();
    if scale == 0.0 {
        return true;
    }
    if (h.get(2, 2) - 2.0 * h.get(0, 1)).abs() > CONE_TOL * scale {
        return false;
    }
    let m = [h.get(0, 0), h.get(0, 2) / SQRT2, h.get(0, 1), h.get(1, 2) / SQRT2, h.get(1, 1)];
    let mut hankel = [[0.0; 6]; 6];
    for (i, row) in hankel.iter_mut().enumerate().take(3) {
        for (j, x) in row.iter_mut().enumerate().take(3) {
            *x = m[i + j];
        }
    }
    let (vals, _) = jacobi_eigen(3, &hankel);
    vals[2] >= -CONE_TOL * scale
}

/// Whether `h` belongs to the Hooke-tensor cone of `setting`.
///
/// For fibrous settings in d = 3 only positive semi-definiteness is tested.
pub fn in_cone(setting: &DesignSetting, h: &HookeTensor) -> bool {
    match setting {
        DesignSetting::Amd => h.is_psd(CONE_TOL),
        DesignSetting::FibMd | DesignSetting::FibMdPm { .. } => {
            h.is_psd(CONE_TOL) && (h.dim() != 2 || fibrous_hull_2d(h))
        }
        DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => match h.iso_moduli(CONE_TOL) {
            Some((k, g)) => {
                let tol = CONE_TOL * h.frobenius();
                k >= -tol && g >= -tol
            }
            None => false,
        },
        DesignSetting::ScalarAmd | DesignSetting::ScalarIso => false,
    }
}

fn check_cone(setting: &DesignSetting, h: &HookeTensor) -> Result<()> {
    if in_cone(setting, h) {
        Ok(())
    } else {
        Err(FmdError::ConeViolation(setting.name().into()))
    }
}

fn iso_kg(h: &HookeTensor) -> (f64, f64) {
    let (k, g) = h.iso_moduli(CONE_TOL).expect("cone checked");
    (k.max(0.0), g.max(0.0))
}

fn power_law_energy(h: &HookeTensor, xi: &SymTensor2, p: f64) -> f64 {
    let (k, g) = iso_kg(h);
    let (tr, dev) = trace_dev_split(xi);
    (k * tr.abs().powf(p) + 2.0 * g * dev.norm().powf(p)) / p
}

/// `sup_a {a·s − c|a|^p/p}` for `c ≥ 0`.
fn power_conjugate(s: f64, c: f64, p: f64) -> f64 {
    let q = p / (p - 1.0);
    if s == 0.0 {
        0.0
    } else if c <= 0.0 {
        f64::INFINITY
    } else {
        s.abs().powf(q) * c.powf(1.0 - q) / q
    }
}

fn power_law_conjugate(h: &HookeTensor, sigma: &SymTensor2, p: f64) -> f64 {
    let (k, g) = iso_kg(h);
    let d = sigma.dim() as f64;
    let (tr, dev) = trace_dev_split(sigma);
    // ⟨ξ,σ⟩ = tr ξ · tr σ / d + ⟨dev ξ, dev σ⟩
    let scale = h.frobenius().max(f64::MIN_POSITIVE);
    let k = if k <= RANK_TOL * scale { 0.0 } else { k };
    let g = if g <= RANK_TOL * scale { 0.0 } else { g };
    let dev_norm = if dev.norm() <= RANGE_TOL * sigma.norm() { 0.0 } else { dev.norm() };
    let tr = if tr.abs() <= RANGE_TOL * sigma.norm() { 0.0 } else { tr };
    power_conjugate(tr / d, k, p) + power_conjugate(dev_norm, 2.0 * g, p)
}

/// `½⟨H⁺σ,σ⟩`, or `+∞` when `σ` leaves the range of `H`.
fn quadratic_conjugate(h: &HookeTensor, sigma: &SymTensor2) -> f64 {
    let (vals, vecs) = h.eigen();
    let top = vals[0];
    let norm = sigma.norm();
    if top <= 0.0 {
        return if norm == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let mut out_sq = 0.0;
    let mut energy = 0.0;
    for (lam, v) in vals.iter().zip(&vecs) {
        let c = v.dot(sigma);
        if *lam > RANK_TOL * top {
            energy += 0.5 * c * c / lam;
        } else {
            out_sq += c * c;
        }
    }
    if out_sq.sqrt() > RANGE_TOL * norm {
        f64::INFINITY
    } else {
        energy
    }
}

/// Strain potential `j(H, ξ)`.
pub fn strain_energy(setting: &DesignSetting, h: &HookeTensor, xi: &SymTensor2) -> Result<f64> {
    setting.require_tensor()?;
    same_dim(h, xi)?;
    check_cone(setting, h)?;
    Ok(match *setting {
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => j_pm(kappa_plus, kappa_minus, h, xi)?,
        DesignSetting::PowerLawImd { p } => power_law_energy(h, xi, p),
        _ => 0.5 * hooke_apply(h, xi).dot(xi),
    })
}

/// Stress potential `j*(H, σ)`; `f64::INFINITY` stands for `+∞`.
pub fn stress_energy(setting: &DesignSetting, h: &HookeTensor, sigma: &SymTensor2) -> Result<f64> {
    setting.require_tensor()?;
    same_dim(h, sigma)?;
    check_cone(setting, h)?;
    Ok(match *setting {
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
            pm_conjugate(kappa_plus, kappa_minus, h, sigma)?
        }
        DesignSetting::PowerLawImd { p } => power_law_conjugate(h, sigma, p),
        _ => quadratic_conjugate(h, sigma),
    })
}

pub(crate) fn iso_bounds(setting: &DesignSetting, dim: usize) -> (f64, f64) {
    let p = setting.exponent();
    let d = dim as f64;
    let nm1 = mandel_len(dim) as f64 - 1.0;
    (d.powf(1.0 / p), nm1.powf(1.0 / p))
}

/// Gauge `ρ` with `ρ^p/p` the largest strain energy over unit-cost Hooke tensors.
///
/// # Panics
/// For scalar settings.
pub fn rho(setting: &DesignSetting, xi: &SymTensor2) -> f64 {
    match *setting {
        DesignSetting::Amd => xi.norm(),
        DesignSetting::FibMd => eig_sym(xi).values().iter().fold(0.0_f64, |m, l| m.max(l.abs())),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => eig_sym(xi)
            .values()
            .iter()
            .fold(0.0_f64, |m, l| m.max(kappa_plus * l).max(-kappa_minus * l)),
        DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
            let (tr, dev) = trace_dev_split(xi);
            let (bt, bd) = iso_bounds(setting, xi.dim());
            (tr.abs() / bt).max(dev.norm() / bd)
        }
        DesignSetting::ScalarAmd | DesignSetting::ScalarIso => {
            panic!("rho: scalar setting used with a tensor argument")
        }
    }
}

/// Polar gauge `ρ⁰`.
///
/// # Panics
/// For scalar settings.
pub fn rho_polar(setting: &DesignSetting, sigma: &SymTensor2) -> f64 {
    match *setting {
        DesignSetting::Amd => sigma.norm(),
        DesignSetting::FibMd => eig_sym(sigma).values().iter().map(|l| l.abs()).sum(),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => eig_sym(sigma)
            .values()
            .iter()
            .map(|l| (l / kappa_plus).max(-l / kappa_minus))
            .sum(),
        DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
            let (tr, dev) = trace_dev_split(sigma);
            let d = sigma.dim() as f64;
            let (bt, bd) = iso_bounds(setting, sigma.dim());
            // |tr σ|·d^{1/p}/d + (N−1)^{1/p}|dev σ|
            tr.abs() * bt / d + bd * dev.norm()
        }
        DesignSetting::ScalarAmd | DesignSetting::ScalarIso => {
            panic!("rho_polar: scalar setting used with a tensor argument")
        }
    }
}

fn fiber_sum(sigma: &SymTensor2, weight: impl Fn(f64) -> f64) -> HookeTensor {
    let e = eig_sym(sigma);
    let total: f64 = e.values().iter().map(|l| weight(*l)).sum();
    let mut h = HookeTensor::zeros(sigma.dim());
    for i in 0..sigma.dim() {
        let w = weight(e.values[i]) / total;
        if w > 0.0 {
            h = h + dyadic(&SymTensor2::outer(e.vector(i))).scale(w);
        }
    }
    h
}

/// Canonical minimizer of `j*(·, σ)` over unit-cost Hooke tensors.
pub fn optimal_hooke_for_stress(setting: &DesignSetting, sigma: &SymTensor2) -> Result<HookeTensor> {
    setting.require_tensor()?;
    if sigma.norm() == 0.0 {
        return Err(FmdError::DegenerateStress);
    }
    match *setting {
        DesignSetting::Amd => Ok(dyadic(&sigma.scale(1.0 / sigma.norm()))),
        DesignSetting::FibMd => Ok(fiber_sum(sigma, f64::abs)),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
            Ok(fiber_sum(sigma, |l| (l / kappa_plus).max(-l / kappa_minus)))
        }
        DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
            let dim = sigma.dim();
            let d = dim as f64;
            let nm1 = mandel_len(dim) as f64 - 1.0;
            let (tr, dev) = trace_dev_split(sigma);
            let (bt, bd) = iso_bounds(setting, dim);
            let a = tr.abs() * bt / d;
            let b = bd * dev.norm();
            let r = a + b;
            iso_hooke(a / (d * r), b / (2.0 * nm1 * r), dim)
        }
        _ => unreachable!(),
    }
}

/// Canonical maximizer of `j(·, ξ)` over unit-cost Hooke tensors.
pub fn optimal_hooke_for_strain(setting: &DesignSetting, xi: &SymTensor2) -> Result<HookeTensor> {
    setting.require_tensor()?;
    if xi.norm() == 0.0 {
        return Err(FmdError::DegenerateStrain);
    }
    let fiber = |score: &dyn Fn(f64) -> f64| {
        let e = eig_sym(xi);
        let mut best = 0;
        for i in 1..xi.dim() {
            if score(e.values[i]) > score(e.values[best]) {
                best = i;
            }
        }
        dyadic(&SymTensor2::outer(e.vector(best)))
    };
    match *setting {
        DesignSetting::Amd => Ok(dyadic(&xi.scale(1.0 / xi.norm()))),
        DesignSetting::FibMd => Ok(fiber(&|l: f64| l.abs())),
        DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
            Ok(fiber(&|l: f64| (kappa_plus * l).max(-kappa_minus * l)))
        }
        DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
            let dim = xi.dim();
            let nm1 = mandel_len(dim) as f64 - 1.0;
            let (tr, dev) = trace_dev_split(xi);
            let (bt, bd) = iso_bounds(setting, dim);
            if tr.abs() / bt >= dev.norm() / bd {
                iso_hooke(1.0 / dim as f64, 0.0, dim)
            } else {
                iso_hooke(0.0, 1.0 / (2.0 * nm1), dim)
            }
        }
        _ => unreachable!(),
    }
}

/// Membership of `h` in the set of optimal Hooke tensors for `σ`.
pub fn is_hooke_optimal_for_stress(
    setting: &DesignSetting,
    h: &HookeTensor,
    sigma: &SymTensor2,
    tol: f64,
) -> bool {
    if setting.require_tensor().is_err() || h.dim() != sigma.dim() || !in_cone(setting, h) {
        return false;
    }
    if cost(h) > 1.0 + tol {
        return false;
    }
    let q = setting.conjugate_exponent();
    let target = rho_polar(setting, sigma).powf(q) / q;
    match stress_energy(setting, h, sigma) {
        Ok(v) => v <= target * (1.0 + tol),
        Err(_) => false,
    }
}

/// `⟨ξ,σ⟩ ≥ (1 − tol)·ρ(ξ)·ρ⁰(σ)`.
pub fn extremality_check(setting: &DesignSetting, xi: &SymTensor2, sigma: &SymTensor2, tol: f64) -> bool {
    if setting.require_tensor().is_err() || xi.dim() != sigma.dim() {
        return false;
    }
    xi.dot(sigma) >= (1.0 - tol) * rho(setting, xi) * rho_polar(setting, sigma)
}

fn require_plane(xi: &SymTensor2) -> Result<()> {
    if xi.dim() != 2 {
        return Err(FmdError::UnsupportedDimension(xi.dim()));
    }
    Ok(())
}

/// Closed form of `inf_{ζ ⪯ 0} j(iso(K,G), ξ + ζ)` in d = 2.
///
/// Zero for positive semi-definite `ξ`; the full energy when the stress
/// `Hξ` is negative semi-definite; `½E·λ_min²` (uniaxial compression) otherwise.
pub fn j_minus_iso(k: f64, g: f64, xi: &SymTensor2) -> Result<f64> {
    require_plane(xi)?;
    if k < 0.0 || g < 0.0 {
        return Err(FmdError::NegativeModuli { k, g });
    }
    let e = eig_sym(xi);
    let (l1, l2) = (e.values[0], e.values[1]);
    if l2 >= 0.0 || k + g == 0.0 {
        return Ok(0.0);
    }
    if (k + g) * l1 <= (g - k) * l2 {
        return Ok(0.5 * (k * (l1 + l2).powi(2) + g * (l1 - l2).powi(2)));
    }
    let (young, _) = young_poisson(k, g)?;
    Ok(0.5 * young * l2 * l2)
}

/// `inf_{ζ ⪰ 0} j(iso(K,G), ξ + ζ)` in d = 2.
pub fn j_plus_iso(k: f64, g: f64, xi: &SymTensor2) -> Result<f64> {
    j_minus_iso(k, g, &-*xi)
}

/// Accelerated projected gradient for `inf_{ζ ∈ S±} ½⟨H(ξ+ζ), ξ+ζ⟩`.
pub fn j_cone_numeric(h: &HookeTensor, xi: &SymTensor2, positive_shift: bool) -> Result<f64> {
    require_plane(xi)?;
    same_dim(h, xi)?;
    let energy = |z: &SymTensor2| {
        let s = *xi + *z;
        0.5 * hooke_apply(h, &s).dot(&s)
    };
    let project = |z: SymTensor2| {
        let (pos, neg) = psd_split(&z);
        if positive_shift { pos } else { neg }
    };
    let (vals, _) = h.eigen();
    let lip = vals[0];
    if lip <= 0.0 {
        return Ok(0.0);
    }
    let mut zeta = SymTensor2::zeros(2);
    let mut y = zeta;
    let mut t = 1.0_f64;
    let mut f = energy(&zeta);
    for _ in 0..CONE_MAX_ITER {
        let grad = hooke_apply(h, &(*xi + y));
        let next = project(y - grad.scale(1.0 / lip));
        let f_next = energy(&next);
        if f_next > f {
            // momentum overshoot: restart from the last accepted point
            y = zeta;
            t = 1.0;
            continue;
        }
        let step = (next - y).norm() * lip;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next + (next - zeta).scale((t - 1.0) / t_next);
        zeta = next;
        f = f_next;
        t = t_next;
        if step <= CONE_GRAD_TOL {
            break;
        }
    }
    Ok(f)
}

/// Rank-one shortcut: for `H = A⊗A`, `⟨A, ζ⟩` sweeps a half-line or the whole line.
fn j_cone_rank_one(h: &HookeTensor, xi: &SymTensor2, positive_shift: bool) -> Option<f64> {
    let (vals, vecs) = h.eigen();
    if vals[0] <= 0.0 || vals[1] > RANK_TOL * vals[0] || vals.last().copied().unwrap_or(0.0) < -RANK_TOL * vals[0] {
        return None;
    }
    let a = vecs[0].scale(vals[0].sqrt());
    let ea = eig_sym(&a);
    let tol = 1e-12 * a.norm();
    let psd = ea.values().iter().all(|l| *l >= -tol);
    let nsd = ea.values().iter().all(|l| *l <= tol);
    let x = a.dot(xi);
    // shifts can only raise x when (shift PSD) == (A PSD)
    let raises = if psd { positive_shift } else if nsd { !positive_shift } else { return Some(0.0) };
    let kept = if raises { x.max(0.0) } else { x.min(0.0) };
    Some(0.5 * kept * kept)
}

fn j_cone(h: &HookeTensor, xi: &SymTensor2, positive_shift: bool) -> Result<f64> {
    require_plane(xi)?;
    same_dim(h, xi)?;
    if let Some((k, g)) = h.iso_moduli(1e-12) {
        let (k, g) = (k.max(0.0), g.max(0.0));
        return if positive_shift { j_plus_iso(k, g, xi) } else { j_minus_iso(k, g, xi) };
    }
    if let Some(v) = j_cone_rank_one(h, xi, positive_shift) {
        return Ok(v);
    }
    j_cone_numeric(h, xi, positive_shift)
}

/// Energy of a material unable to carry compression: `inf_{ζ ⪰ 0} j(H, ξ+ζ)`.
pub fn j_plus(h: &HookeTensor, xi: &SymTensor2) -> Result<f64> {
    j_cone(h, xi, true)
}

/// Energy of a material unable to carry tension: `inf_{ζ ⪯ 0} j(H, ξ+ζ)`.
pub fn j_minus(h: &HookeTensor, xi: &SymTensor2) -> Result<f64> {
    j_cone(h, xi, false)
}

/// `κ₊²·j₊ + κ₋²·j₋`.
pub fn j_pm(kappa_plus: f64, kappa_minus: f64, h: &HookeTensor, xi: &SymTensor2) -> Result<f64> {
    Ok(kappa_plus.powi(2) * j_plus(h, xi)? + kappa_minus.powi(2) * j_minus(h, xi)?)
}

/// Conjugate of `j±(H, ·)`: infimal convolution of `j*/κ₊²` on PSD stresses
/// and `j*/κ₋²` on NSD stresses.
fn pm_conjugate(kp: f64, km: f64, h: &HookeTensor, sigma: &SymTensor2) -> Result<f64> {
    require_plane(sigma)?;
    if let Some(v) = pm_conjugate_coaxial(kp, km, h, sigma) {
        return Ok(v);
    }
    Ok(pm_conjugate_admm(kp, km, h, sigma))
}

/// Exact value when `H` acts only on the normal components in the eigenframe of `σ`.
fn pm_conjugate_coaxial(kp: f64, km: f64, h: &HookeTensor, sigma: &SymTensor2) -> Option<f64> {
    let e = eig_sym(sigma);
    let basis = [
        SymTensor2::outer(e.vector(0)),
        SymTensor2::outer(e.vector(1)),
        (SymTensor2::outer(&[e.vectors[0][0] + e.vectors[1][0], e.vectors[0][1] + e.vectors[1][1]])
            - SymTensor2::outer(e.vector(0))
            - SymTensor2::outer(e.vector(1)))
        .scale(1.0 / SQRT2),
    ];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        let hb = hooke_apply(h, &basis[i]);
        for j in 0..3 {
            m[i][j] = hb.dot(&basis[j]);
        }
    }
    let tol = 1e-12 * h.frobenius();
    if m[0][1].abs() > tol || m[0][2].abs() > tol || m[1][2].abs() > tol || m[2][2].abs() > tol {
        return None;
    }
    let mut total = 0.0;
    for i in 0..2 {
        let s = e.values[i];
        if s == 0.0 || s.abs() <= RANGE_TOL * sigma.norm() {
            continue;
        }
        let stiff = m[i][i];
        if stiff <= RANK_TOL * h.frobenius() {
            return Some(f64::INFINITY);
        }
        let kappa = if s > 0.0 { kp } else { km };
        total += s * s / (2.0 * stiff * kappa * kappa);
    }
    Some(total)
}

/// ADMM on `σ = σ₊ + σ₋` with `σ₊` restricted to the range of `H`.
fn pm_conjugate_admm(kp: f64, km: f64, h: &HookeTensor, sigma: &SymTensor2) -> f64 {
    let (vals, vecs) = h.eigen();
    let norm = sigma.norm();
    if vals[0] <= 0.0 {
        return if norm == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > RANK_TOL * vals[0]).collect();
    let c: Vec<f64> = idx.iter().map(|&i| vecs[i].dot(sigma)).collect();
    let in_range = idx.iter().zip(&c).fold(SymTensor2::zeros(2), |acc, (&i, ci)| acc + vecs[i].scale(*ci));
    if (*sigma - in_range).norm() > RANGE_TOL * norm {
        return f64::INFINITY;
    }
    if norm == 0.0 {
        return 0.0;
    }
    let (ip, im) = (1.0 / (kp * kp), 1.0 / (km * km));
    let q: Vec<f64> = idx.iter().map(|&i| (ip + im) / vals[i]).collect();
    let b: Vec<f64> = idx.iter().zip(&c).map(|(&i, ci)| ci * im / vals[i]).collect();
    let rho = q.iter().sum::<f64>() / q.len() as f64;
    let lift = |y: &[f64]| idx.iter().zip(y).fold(SymTensor2::zeros(2), |acc, (&i, yi)| acc + vecs[i].scale(*yi));
    let mut y: Vec<f64> = b.iter().zip(&q).map(|(bi, qi)| bi / qi).collect();
    let a0 = lift(&y);
    let mut z1 = psd_split(&a0).0;
    let mut z2 = psd_split(&(*sigma - a0)).1;
    let mut w1 = SymTensor2::zeros(2);
    let mut w2 = SymTensor2::zeros(2);
    for _ in 0..ADMM_MAX_ITER {
        let p1 = z1 - w1;
        let p2 = z2 - w2;
        for (k, &i) in idx.iter().enumerate() {
            let rhs = b[k] + rho * vecs[i].dot(&p1) + rho * c[k] - rho * vecs[i].dot(&p2);
            y[k] = rhs / (q[k] + 2.0 * rho);
        }
        let a = lift(&y);
        let z1n = psd_split(&(a + w1)).0;
        let z2n = psd_split(&(*sigma - a + w2)).1;
        let r1 = a - z1n;
        let r2 = *sigma - a - z2n;
        let dual = rho * ((z1n - z1).norm() + (z2n - z2).norm());
        w1 += r1;
        w2 += r2;
        z1 = z1n;
        z2 = z2n;
        if r1.norm() + r2.norm() <= 1e-14 * norm && dual <= 1e-14 * norm * rho {
            break;
        }
    }
    idx.iter()
        .enumerate()
        .map(|(k, &i)| 0.5 * (ip * y[k] * y[k] + im * (c[k] - y[k]).powi(2)) / vals[i])
        .sum()
}

fn van_der_corput(mut n: u64) -> f64 {
    let mut x = 0.0;
    let mut base = 0.5;
    while n > 0 {
        if n & 1 == 1 {
            x += base;
        }
        n >>= 1;
        base *= 0.5;
    }
    x
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Largest strain energy over `n` sampled unit-cost Hooke tensors.
///
/// A lower bound for `ρ(ξ)^p/p`. Samples form a fixed sequence, so a run
/// with larger `n` extends the sample set of a smaller one.
pub fn brute_force_rho(setting: &DesignSetting, xi: &SymTensor2, n: usize) -> Result<f64> {
    setting.require_tensor()?;
    let dim = xi.dim();
    let nm = mandel_len(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(BRUTE_FORCE_SEED);
    let mut best = 0.0_f64;
    let mut last: Option<HookeTensor> = None;
    for i in 0..n {
        let h = match setting {
            DesignSetting::Amd => {
                let a = SymTensor2::from_mandel(dim, &random_direction(&mut rng, nm))?;
                let fresh = dyadic(&a);
                match last {
                    Some(prev) if i % 4 == 3 => {
                        let t: f64 = rng.gen();
                        prev.scale(t) + fresh.scale(1.0 - t)
                    }
                    _ => fresh,
                }
            }
            DesignSetting::FibMd | DesignSetting::FibMdPm { .. } => {
                dyadic(&SymTensor2::outer(&random_direction(&mut rng, dim)))
            }
            DesignSetting::Imd | DesignSetting::PowerLawImd { .. } => {
                let share = match i {
                    0 => 0.0,
                    1 => 1.0,
                    _ => van_der_corput(i as u64 - 1),
                };
                let d = dim as f64;
                iso_hooke(share / d, (1.0 - share) / (2.0 * (nm as f64 - 1.0)), dim)?
            }
            _ => unreachable!(),
        };
        last = Some(h);
        best = best.max(strain_energy(setting, &h, xi)?);
    }
    Ok(best)
}
