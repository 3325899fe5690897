//! Symmetric second-order tensors and Hooke tensors in orthonormal Mandel coordinates.
//!
//! Coordinates are `(11, 22, √2·12)` for d = 2 and
//! `(11, 22, 33, √2·23, √2·13, √2·12)` for d = 3, so the Euclidean dot product
//! of coordinate vectors is the Frobenius pairing of the tensors.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{FmdError, Result};

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

const SYM_TOL: f64 = 1e-12;
const JACOBI_SWEEPS: usize = 30;

/// Number of Mandel coordinates in dimension `d`.
pub fn mandel_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(FmdError::UnsupportedDimension(dim))
    }
}

/// Mandel index and scale of matrix entry (i, j).
fn mandel_slot(dim: usize, i: usize, j: usize) -> (usize, f64) {
    if i == j {
        return (i, 1.0);
    }
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    let k = match (dim, a, b) {
        (2, 0, 1) => 2,
        (3, 1, 2) => 3,
        (3, 0, 2) => 4,
        (3, 0, 1) => 5,
        _ => unreachable!("index out of range"),
    };
    (k, SQRT2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor2 {
    dim: usize,
    m: [f64; 6],
}

impl SymTensor2 {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "unsupported dimension {dim}");
        Self { dim, m: [0.0; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.m[i] = 1.0;
        }
        t
    }

    pub fn from_mandel(dim: usize, coords: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let n = mandel_len(dim);
        if coords.len() != n {
            return Err(FmdError::DimensionMismatch { expected: n, got: coords.len() });
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(FmdError::InvalidTensor("non-finite coordinate".into()));
        }
        let mut m = [0.0; 6];
        m[..n].copy_from_slice(coords);
        Ok(Self { dim, m })
    }

    /// Embeds a symmetric `d×d` matrix given by rows.
    pub fn mandel_embed(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        check_dim(dim)?;
        if rows.iter().any(|r| r.len() != dim) {
            return Err(FmdError::InvalidTensor("matrix is not square".into()));
        }
        let scale = rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(FmdError::InvalidTensor("non-finite entry".into()));
                }
                if (a - b).abs() > SYM_TOL * scale.max(1e-300) {
                    return Err(FmdError::InvalidTensor(format!(
                        "entries ({i},{j}) and ({j},{i}) differ: {a} vs {b}"
                    )));
                }
                let (k, s) = mandel_slot(dim, i, j);
                t.m[k] = s * 0.5 * (a + b);
            }
        }
        Ok(t)
    }

    pub fn from_matrix2(a: [[f64; 2]; 2]) -> Result<Self> {
        Self::mandel_embed(&[&a[0], &a[1]])
    }

    pub fn from_matrix3(a: [[f64; 3]; 3]) -> Result<Self> {
        Self::mandel_embed(&[&a[0], &a[1], &a[2]])
    }

    /// `diag(a, b)` in d = 2.
    pub fn diag2(a: f64, b: f64) -> Self {
        Self { dim: 2, m: [a, b, 0.0, 0.0, 0.0, 0.0] }
    }

    /// Plane tensor from components `(s11, s22, s12)`.
    pub fn plane(s11: f64, s22: f64, s12: f64) -> Self {
        Self { dim: 2, m: [s11, s22, SQRT2 * s12, 0.0, 0.0, 0.0] }
    }

    /// `v ⊗ v` for a vector of length 2 or 3.
    pub fn outer(v: &[f64]) -> Self {
        let dim = v.len();
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let (k, s) = mandel_slot(dim, i, j);
                t.m[k] = s * v[i] * v[j];
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        mandel_len(self.dim)
    }

    pub fn mandel(&self) -> &[f64] {
        &self.m[..self.n()]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (k, s) = mandel_slot(self.dim, i, j);
        self.m[k] / s
    }

    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate().take(self.dim) {
            for (j, x) in row.iter_mut().enumerate().take(self.dim) {
                *x = self.get(i, j);
            }
        }
        a
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.mandel().iter().zip(other.mandel()).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        self.m[..self.dim].iter().sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut t = *self;
        t.m.iter_mut().for_each(|x| *x *= s);
        t
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|x| *x == 0.0)
    }

    /// `Q ξ Qᵀ` for a plane rotation by `angle` (d = 2 only).
    pub fn rotated2(&self, angle: f64) -> Self {
        assert_eq!(self.dim, 2);
        let (s, c) = angle.sin_cos();
        let (a, b, d) = (self.get(0, 0), self.get(0, 1), self.get(1, 1));
        let r11 = c * c * a - 2.0 * c * s * b + s * s * d;
        let r22 = s * s * a + 2.0 * c * s * b + c * c * d;
        let r12 = c * s * (a - d) + (c * c - s * s) * b;
        Self::plane(r11, r22, r12)
    }
}

impl Add for SymTensor2 {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.m.iter_mut().zip(rhs.m) {
            *a += b;
        }
        self
    }
}

impl AddAssign for SymTensor2 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for SymTensor2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for SymTensor2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul<SymTensor2> for f64 {
    type Output = SymTensor2;
    fn mul(self, rhs: SymTensor2) -> SymTensor2 {
        rhs.scale(self)
    }
}

/// Descending eigenvalues with orthonormal eigenvectors; `vectors[i]` belongs to `values[i]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenPair2 {
    pub dim: usize,
    pub values: [f64; 3],
    pub vectors: [[f64; 3]; 3],
}

impl EigenPair2 {
    pub fn values(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i][..self.dim]
    }

    /// `Σ f(λᵢ) vᵢ⊗vᵢ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymTensor2 {
        let mut t = SymTensor2::zeros(self.dim);
        for i in 0..self.dim {
            t += SymTensor2::outer(self.vector(i)).scale(f(self.values[i]));
        }
        t
    }

    pub fn reconstruct(&self) -> SymTensor2 {
        self.map(|x| x)
    }
}

fn fix_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

pub fn eig_sym(xi: &SymTensor2) -> EigenPair2 {
    let dim = xi.dim;
    let mut out = EigenPair2 { dim, values: [0.0; 3], vectors: [[0.0; 3]; 3] };
    if dim == 2 {
        let (a, b, c) = (xi.get(0, 0), xi.get(0, 1), xi.get(1, 1));
        let mean = 0.5 * (a + c);
        let r = (0.5 * (a - c)).hypot(b);
        out.values[0] = mean + r;
        out.values[1] = mean - r;
        let (s, co) = if r == 0.0 { (0.0, 1.0) } else { (0.5 * (2.0 * b).atan2(a - c)).sin_cos() };
        out.vectors[0] = [co, s, 0.0];
        out.vectors[1] = [-s, co, 0.0];
    } else {
        let mut a = [[0.0; 6]; 6];
        let m = xi.to_matrix();
        for i in 0..3 {
            a[i][..3].copy_from_slice(&m[i]);
        }
        let (vals, vecs) = jacobi_eigen(3, &a);
        for i in 0..3 {
            out.values[i] = vals[i];
            out.vectors[i].copy_from_slice(&vecs[i][..3]);
        }
    }
    for i in 0..dim {
        fix_sign(&mut out.vectors[i][..dim]);
    }
    out
}

/// Cyclic Jacobi eigensolver for a symmetric `n×n` block (n ≤ 6).
/// Returns descending eigenvalues and eigenvectors as rows, sign-normalized.
pub fn jacobi_eigen(n: usize, input: &[[f64; 6]; 6]) -> ([f64; 6], [[f64; 6]; 6]) {
    let mut a = *input;
    let mut v = [[0.0; 6]; 6];
    for (i, row) in v.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    let scale: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| input[i][j] * input[i][j]).sum::<f64>().sqrt();
    for _ in 0..JACOBI_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-17 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut().take(n) {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut vals = [0.0; 6];
    let mut vecs = [[0.0; 6]; 6];
    for (slot, &k) in order.iter().enumerate() {
        vals[slot] = a[k][k];
        for (i, row) in v.iter().enumerate().take(n) {
            vecs[slot][i] = row[k];
        }
        fix_sign(&mut vecs[slot][..n]);
    }
    (vals, vecs)
}

/// Returns `(tr ξ, dev ξ)` with `ξ = (tr/d)·I + dev`.
pub fn trace_dev_split(xi: &SymTensor2) -> (f64, SymTensor2) {
    let tr = xi.trace();
    let dev = *xi - SymTensor2::identity(xi.dim).scale(tr / xi.dim as f64);
    (tr, dev)
}

/// Positive and negative semidefinite parts.
pub fn psd_split(xi: &SymTensor2) -> (SymTensor2, SymTensor2) {
    let e = eig_sym(xi);
    (e.map(|x| x.max(0.0)), e.map(|x| x.min(0.0)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HookeTensor {
    dim: usize,
    m: [[f64; 6]; 6],
}

impl HookeTensor {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "unsupported dimension {dim}");
        Self { dim, m: [[0.0; 6]; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut h = Self::zeros(dim);
        for i in 0..mandel_len(dim) {
            h.m[i][i] = 1.0;
        }
        h
    }

    /// Builds from Mandel matrix rows; rejects asymmetric input.
    pub fn from_mandel_matrix(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        check_dim(dim)?;
        let n = mandel_len(dim);
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(FmdError::DimensionMismatch { expected: n, got: rows.len() });
        }
        let scale = rows.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let mut h = Self::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                if !rows[i][j].is_finite() {
                    return Err(FmdError::InvalidTensor("non-finite entry".into()));
                }
                if (rows[i][j] - rows[j][i]).abs() > SYM_TOL * scale {
                    return Err(FmdError::InvalidTensor("Hooke matrix is not symmetric".into()));
                }
                h.m[i][j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        mandel_len(self.dim)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..n).map(|i| self.m[i][..n].to_vec()).collect()
    }

    pub fn raw(&self) -> &[[f64; 6]; 6] {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.m[i][i]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut h = *self;
        h.m.iter_mut().flatten().for_each(|x| *x *= s);
        h
    }

    pub fn frobenius(&self) -> f64 {
        self.m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Eigenvalues (descending) and eigenvectors of the Mandel matrix.
    pub fn eigen(&self) -> (Vec<f64>, Vec<SymTensor2>) {
        let n = self.n();
        let (vals, vecs) = jacobi_eigen(n, &self.m);
        let vs = (0..n)
            .map(|i| SymTensor2 { dim: self.dim, m: vecs[i] })
            .collect();
        (vals[..n].to_vec(), vs)
    }

    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let (vals, _) = self.eigen();
        let top = vals[0].max(0.0);
        vals.last().copied().unwrap_or(0.0) >= -rel_tol * top.max(f64::MIN_POSITIVE)
            || self.frobenius() == 0.0
    }

    /// `(K, G)` when the tensor is isotropic within `rel_tol`, else `None`.
    pub fn iso_moduli(&self, rel_tol: f64) -> Option<(f64, f64)> {
        let d = self.dim as f64;
        let unit_i = SymTensor2::identity(self.dim).scale(1.0 / d.sqrt());
        let dk = hooke_apply(self, &unit_i).dot(&unit_i);
        let two_g = (self.trace() - dk) / (self.n() as f64 - 1.0);
        let (k, g) = (dk / d, 0.5 * two_g);
        let iso = iso_matrix(self.dim, k, g);
        let diff = Self { dim: self.dim, m: sub_mat(&self.m, &iso) }.frobenius();
        if diff <= rel_tol * self.frobenius().max(f64::MIN_POSITIVE) || self.frobenius() == 0.0 {
            Some((k, g))
        } else {
            None
        }
    }
}

fn sub_mat(a: &[[f64; 6]; 6], b: &[[f64; 6]; 6]) -> [[f64; 6]; 6] {
    let mut c = *a;
    for i in 0..6 {
        for j in 0..6 {
            c[i][j] -= b[i][j];
        }
    }
    c
}

impl Add for HookeTensor {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..6 {
            for j in 0..6 {
                self.m[i][j] += rhs.m[i][j];
            }
        }
        self
    }
}

impl Mul<HookeTensor> for f64 {
    type Output = HookeTensor;
    fn mul(self, rhs: HookeTensor) -> HookeTensor {
        rhs.scale(self)
    }
}

pub fn hooke_apply(h: &HookeTensor, xi: &SymTensor2) -> SymTensor2 {
    assert_eq!(h.dim, xi.dim, "dimension mismatch");
    let n = h.n();
    let mut out = SymTensor2::zeros(xi.dim);
    for i in 0..n {
        out.m[i] = (0..n).map(|j| h.m[i][j] * xi.m[j]).sum();
    }
    out
}

/// Checked variant of [`hooke_apply`].
pub fn try_hooke_apply(h: &HookeTensor, xi: &SymTensor2) -> Result<SymTensor2> {
    if h.dim != xi.dim {
        return Err(FmdError::DimensionMismatch { expected: h.dim, got: xi.dim });
    }
    Ok(hooke_apply(h, xi))
}

/// Rank-one Hooke tensor `A ⊗ A`, i.e. `ξ ↦ ⟨A, ξ⟩ A`.
pub fn dyadic(a: &SymTensor2) -> HookeTensor {
    let mut h = HookeTensor::zeros(a.dim);
    let n = a.n();
    for i in 0..n {
        for j in 0..n {
            h.m[i][j] = a.m[i] * a.m[j];
        }
    }
    h
}

fn iso_matrix(dim: usize, k: f64, g: f64) -> [[f64; 6]; 6] {
    let d = dim as f64;
    let n = mandel_len(dim);
    let mut m = [[0.0; 6]; 6];
    for i in 0..n {
        for j in 0..n {
            let p = if i < dim && j < dim { 1.0 / d } else { 0.0 };
            let id = if i == j { 1.0 } else { 0.0 };
            m[i][j] = d * k * p + 2.0 * g * (id - p);
        }
    }
    m
}

/// Isotropic Hooke tensor `dK·(I⊗I)/d + 2G·(Id − (I⊗I)/d)`.
pub fn iso_hooke(k: f64, g: f64, dim: usize) -> Result<HookeTensor> {
    check_dim(dim)?;
    if k < 0.0 || g < 0.0 || !k.is_finite() || !g.is_finite() {
        return Err(FmdError::NegativeModuli { k, g });
    }
    Ok(HookeTensor { dim, m: iso_matrix(dim, k, g) })
}

/// Young modulus and Poisson ratio of the plane isotropic law.
pub fn young_poisson(k: f64, g: f64) -> Result<(f64, f64)> {
    let s = k + g;
    if s == 0.0 || !s.is_finite() {
        return Err(FmdError::DegenerateModuli);
    }
    Ok((4.0 * k * g / s, (k - g) / s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embeds_off_diagonal_with_sqrt2() {
        let t = SymTensor2::from_matrix2([[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(t.mandel(), &[0.0, 0.0, SQRT2]);
        assert!((t.dot(&t) - 2.0).abs() < 1e-15);
        assert!(SymTensor2::from_matrix2([[0.0, 1.0], [0.5, 0.0]]).is_err());
    }

    #[test]
    fn eig_of_swap_matrix() {
        let t = SymTensor2::from_matrix2([[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let e = eig_sym(&t);
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] + 1.0).abs() < 1e-15);
        let h = 1.0 / SQRT2;
        assert!((e.vector(0)[0] - h).abs() < 1e-15 && (e.vector(0)[1] - h).abs() < 1e-15);
        assert!((e.vector(1)[0] - h).abs() < 1e-15 && (e.vector(1)[1] + h).abs() < 1e-15);
    }

    #[test]
    fn jacobi_3d_diagonal_order() {
        let t = SymTensor2::from_matrix3([[1.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 2.0]]).unwrap();
        let e = eig_sym(&t);
        assert_eq!(e.values(), &[3.0, 2.0, 1.0]);
        assert_eq!(e.vector(0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn iso_identity_case() {
        let h = iso_hooke(0.5, 0.5, 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((h.get(i, j) - want).abs() < 1e-15);
            }
        }
        let (k, g) = h.iso_moduli(1e-12).unwrap();
        assert!((k - 0.5).abs() < 1e-15 && (g - 0.5).abs() < 1e-15);
        assert!(iso_hooke(-1.0, 0.0, 2).is_err());
    }

    #[test]
    fn young_poisson_degenerate() {
        assert_eq!(young_poisson(1.0, 0.0).unwrap(), (0.0, 1.0));
        assert!(young_poisson(0.0, 0.0).is_err());
    }
}
