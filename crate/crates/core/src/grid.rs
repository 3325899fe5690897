//! Regular grids, load descriptions and the discrete strain operator.
//!
//! Displacements are bilinear on each cell. The strain of a bilinear field is
//! affine in each component, so its gauge is largest at a cell corner: the
//! operator samples the strain at the four corners of every cell (one-sided
//! edge differences), which makes a point-wise bound on these samples a bound
//! everywhere in the cell.

use rayon::prelude::*;

use crate::error::{FmdError, Result};
use crate::tensor::{SymTensor2, SQRT2};

/// Quadrature points per cell.
pub const POINTS_PER_CELL: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(origin: [f64; 2], h: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(FmdError::InvalidGrid(format!("cell size must be positive, got {h}")));
        }
        if nx == 0 || ny == 0 {
            return Err(FmdError::InvalidGrid("cell counts must be positive".into()));
        }
        if !origin.iter().all(|x| x.is_finite()) {
            return Err(FmdError::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { origin, h, nx, ny })
    }

    /// Grid of `nx × ny` square cells covering a `width`-wide rectangle.
    pub fn covering(origin: [f64; 2], width: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::new(origin, width / nx as f64, nx, ny)
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn point_count(&self) -> usize {
        POINTS_PER_CELL * self.cell_count()
    }

    pub fn width(&self) -> f64 {
        self.h * self.nx as f64
    }

    pub fn height(&self) -> f64 {
        self.h * self.ny as f64
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_position(&self, n: usize) -> [f64; 2] {
        let (i, j) = (n % (self.nx + 1), n / (self.nx + 1));
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    /// Node indices `(n00, n10, n01, n11)` of a cell.
    pub fn cell_nodes(&self, c: usize) -> [usize; 4] {
        let (i, j) = (c % self.nx, c / self.nx);
        let n00 = self.node(i, j);
        [n00, n00 + 1, n00 + self.nx + 1, n00 + self.nx + 2]
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = (c % self.nx, c / self.nx);
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Location of quadrature point `k` (a corner) of cell `c`.
    pub fn point_position(&self, c: usize, k: usize) -> [f64; 2] {
        let (i, j) = (c % self.nx, c / self.nx);
        [
            self.origin[0] + (i + (k & 1)) as f64 * self.h,
            self.origin[1] + (j + (k >> 1)) as f64 * self.h,
        ]
    }

    /// Area weight of a quadrature point.
    pub fn point_weight(&self) -> f64 {
        0.25 * self.h * self.h
    }

    /// Twice finer grid over the same rectangle.
    pub fn refined(&self) -> Self {
        Self { origin: self.origin, h: 0.5 * self.h, nx: 2 * self.nx, ny: 2 * self.ny }
    }

    /// Cell and local coordinates in `[0,1]²` of a point, if inside the grid.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, f64, f64)> {
        let slack = 1e-12 * (self.width() + self.height());
        let fx = (x[0] - self.origin[0]) / self.h;
        let fy = (x[1] - self.origin[1]) / self.h;
        if fx < -slack / self.h
            || fy < -slack / self.h
            || fx > self.nx as f64 + slack / self.h
            || fy > self.ny as f64 + slack / self.h
        {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        let s = (fx - i as f64).clamp(0.0, 1.0);
        let t = (fy - j as f64).clamp(0.0, 1.0);
        Some((j * self.nx + i, s, t))
    }

    /// Bilinear shape-function values at local coordinates, ordered as [`Grid::cell_nodes`].
    pub fn shape(s: f64, t: f64) -> [f64; 4] {
        [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t]
    }

    /// Bilinear interpolation of a nodal field.
    pub fn interpolate(&self, u: &[[f64; 2]], x: [f64; 2]) -> Option<[f64; 2]> {
        let (c, s, t) = self.locate(x)?;
        let nodes = self.cell_nodes(c);
        let w = Self::shape(s, t);
        let mut out = [0.0; 2];
        for (n, wi) in nodes.iter().zip(w) {
            out[0] += wi * u[*n][0];
            out[1] += wi * u[*n][1];
        }
        Some(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointLoad {
    pub position: [f64; 2],
    pub force: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentLoad {
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Force per unit length.
    pub density: [f64; 2],
}

impl SegmentLoad {
    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadSpec {
    pub point_loads: Vec<PointLoad>,
    pub segment_loads: Vec<SegmentLoad>,
}

fn cross(x: [f64; 2], f: [f64; 2]) -> f64 {
    x[0] * f[1] - x[1] * f[0]
}

impl LoadSpec {
    pub fn is_empty(&self) -> bool {
        self.point_loads.is_empty() && self.segment_loads.is_empty()
    }

    /// Resultant force and moment about the origin.
    pub fn resultant(&self) -> ([f64; 2], f64) {
        let mut r = [0.0; 2];
        let mut m = 0.0;
        for p in &self.point_loads {
            r[0] += p.force[0];
            r[1] += p.force[1];
            m += cross(p.position, p.force);
        }
        for s in &self.segment_loads {
            let len = s.length();
            let f = [s.density[0] * len, s.density[1] * len];
            let mid = [0.5 * (s.start[0] + s.end[0]), 0.5 * (s.start[1] + s.end[1])];
            r[0] += f[0];
            r[1] += f[1];
            m += cross(mid, f);
        }
        (r, m)
    }

    /// Total force magnitude and a moment scale used for relative balance tests.
    fn scales(&self) -> (f64, f64) {
        let mut fs = 0.0;
        let mut ms = 0.0;
        let mut add = |x: [f64; 2], f: [f64; 2]| {
            let mag = f[0].hypot(f[1]);
            fs += mag;
            ms += mag * x[0].hypot(x[1]);
        };
        for p in &self.point_loads {
            add(p.position, p.force);
        }
        for s in &self.segment_loads {
            let len = s.length();
            let reach = s.start[0].hypot(s.start[1]).max(s.end[0].hypot(s.end[1]));
            add([reach, 0.0], [s.density[0] * len, s.density[1] * len]);
        }
        (fs, ms.max(fs))
    }

    /// Zero resultant and zero moment within `1e-9` relative.
    pub fn check_balanced(&self) -> Result<()> {
        let (r, m) = self.resultant();
        let (fs, ms) = self.scales();
        if r[0].hypot(r[1]) > 1e-9 * fs || m.abs() > 1e-9 * ms {
            return Err(FmdError::UnbalancedLoad { rx: r[0], ry: r[1], moment: m });
        }
        Ok(())
    }

    /// Every load rotated by a quarter turn about the origin.
    pub fn rotated90(&self) -> Self {
        let rot = |x: [f64; 2]| [-x[1], x[0]];
        Self {
            point_loads: self
                .point_loads
                .iter()
                .map(|p| PointLoad { position: rot(p.position), force: rot(p.force) })
                .collect(),
            segment_loads: self
                .segment_loads
                .iter()
                .map(|s| SegmentLoad { start: rot(s.start), end: rot(s.end), density: rot(s.density) })
                .collect(),
        }
    }

    /// Axis-aligned box containing every load point.
    pub fn bounding_box(&self) -> Option<([f64; 2], [f64; 2])> {
        let pts = self
            .point_loads
            .iter()
            .map(|p| p.position)
            .chain(self.segment_loads.iter().flat_map(|s| [s.start, s.end]));
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut any = false;
        for x in pts {
            any = true;
            for a in 0..2 {
                lo[a] = lo[a].min(x[a]);
                hi[a] = hi[a].max(x[a]);
            }
        }
        any.then_some((lo, hi))
    }
}

/// Parameters in `[0, 1]` where the segment `a → b` crosses grid lines.
fn segment_breaks(grid: &Grid, a: [f64; 2], b: [f64; 2]) -> Vec<f64> {
    let mut ts = vec![0.0, 1.0];
    for axis in 0..2 {
        let (p, q) = (a[axis], b[axis]);
        if p == q {
            continue;
        }
        let lines = if axis == 0 { grid.nx } else { grid.ny };
        for k in 0..=lines {
            let x = grid.origin[axis] + k as f64 * grid.h;
            let t = (x - p) / (q - p);
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    ts
}

/// Gauss points and weights of the pieces of a segment cut by the grid lines.
/// Each entry is `(cell, s, t, weight)` with weights summing to the length.
pub fn segment_quadrature(grid: &Grid, a: [f64; 2], b: [f64; 2]) -> Result<Vec<(usize, f64, f64, f64)>> {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let g = 0.5 / 3f64.sqrt();
    let at = |t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    let ts = segment_breaks(grid, a, b);
    let mut out = Vec::with_capacity(2 * ts.len());
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = at(0.5 * (t0 + t1));
        let (cell, _, _) = grid.locate(mid).ok_or(FmdError::PointOutsideGrid { x: mid[0], y: mid[1] })?;
        let (ci, cj) = (cell % grid.nx, cell / grid.nx);
        for tau in [0.5 - g, 0.5 + g] {
            let x = at(t0 + tau * (t1 - t0));
            let s = ((x[0] - grid.origin[0]) / grid.h - ci as f64).clamp(0.0, 1.0);
            let t = ((x[1] - grid.origin[1]) / grid.h - cj as f64).clamp(0.0, 1.0);
            out.push((cell, s, t, 0.5 * (t1 - t0) * len));
        }
    }
    Ok(out)
}

/// Nodal force vector: point loads by bilinear interpolation weights,
/// segment loads by two-point Gauss quadrature on every cell piece.
pub fn assemble_load_vector(grid: &Grid, loads: &LoadSpec) -> Result<Vec<[f64; 2]>> {
    loads.check_balanced()?;
    assemble_load_vector_unchecked(grid, loads)
}

/// [`assemble_load_vector`] without the balance test.
pub fn assemble_load_vector_unchecked(grid: &Grid, loads: &LoadSpec) -> Result<Vec<[f64; 2]>> {
    let mut f = vec![[0.0; 2]; grid.node_count()];
    for p in &loads.point_loads {
        let (c, s, t) = grid
            .locate(p.position)
            .ok_or(FmdError::PointOutsideGrid { x: p.position[0], y: p.position[1] })?;
        for (n, w) in grid.cell_nodes(c).iter().zip(Grid::shape(s, t)) {
            f[*n][0] += w * p.force[0];
            f[*n][1] += w * p.force[1];
        }
    }
    for seg in &loads.segment_loads {
        for x in [seg.start, seg.end] {
            grid.locate(x).ok_or(FmdError::PointOutsideGrid { x: x[0], y: x[1] })?;
        }
        for (c, s, t, w) in segment_quadrature(grid, seg.start, seg.end)? {
            for (n, nw) in grid.cell_nodes(c).iter().zip(Grid::shape(s, t)) {
                f[*n][0] += w * nw * seg.density[0];
                f[*n][1] += w * nw * seg.density[1];
            }
        }
    }
    Ok(f)
}

/// Maps nodal displacements to strain samples at the four corners of each cell.
#[derive(Clone, Copy, Debug)]
pub struct StrainOperator {
    grid: Grid,
}

/// Edge-difference pairs `(dx: plus, minus; dy: plus, minus)` in local node numbering.
const CORNER_STENCIL: [[usize; 4]; 4] = [[1, 0, 2, 0], [1, 0, 3, 1], [3, 2, 2, 0], [3, 2, 3, 1]];

pub fn assemble_strain_operator(grid: &Grid) -> StrainOperator {
    StrainOperator { grid: *grid }
}

impl StrainOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Corner strains of one cell.
    pub fn cell_strains(&self, u: &[[f64; 2]], c: usize) -> [SymTensor2; 4] {
        let nodes = self.grid.cell_nodes(c);
        let inv_h = 1.0 / self.grid.h;
        let mut out = [SymTensor2::zeros(2); 4];
        for (k, st) in CORNER_STENCIL.iter().enumerate() {
            let (xp, xm, yp, ym) = (u[nodes[st[0]]], u[nodes[st[1]]], u[nodes[st[2]]], u[nodes[st[3]]]);
            let dx = [(xp[0] - xm[0]) * inv_h, (xp[1] - xm[1]) * inv_h];
            let dy = [(yp[0] - ym[0]) * inv_h, (yp[1] - ym[1]) * inv_h];
            out[k] = SymTensor2::plane(dx[0], dy[1], 0.5 * (dx[1] + dy[0]));
        }
        out
    }

    /// Strain at the cell centre (mean of the corner samples).
    pub fn cell_center_strain(&self, u: &[[f64; 2]], c: usize) -> SymTensor2 {
        let s = self.cell_strains(u, c);
        (s[0] + s[1] + s[2] + s[3]).scale(0.25)
    }

    pub fn apply(&self, u: &[[f64; 2]]) -> Vec<SymTensor2> {
        let mut out = vec![SymTensor2::zeros(2); self.grid.point_count()];
        self.apply_into(u, &mut out);
        out
    }

    pub fn apply_into(&self, u: &[[f64; 2]], out: &mut [SymTensor2]) {
        out.par_chunks_mut(POINTS_PER_CELL).enumerate().for_each(|(c, chunk)| {
            chunk.copy_from_slice(&self.cell_strains(u, c));
        });
    }

    /// `Σ_g w·B_gᵀ τ_g` with the quadrature weight `w = h²/4`.
    pub fn adjoint(&self, tau: &[SymTensor2]) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.grid.node_count()];
        self.adjoint_into(tau, &mut out);
        out
    }

    pub fn adjoint_into(&self, tau: &[SymTensor2], out: &mut [[f64; 2]]) {
        let g = &self.grid;
        let scale = g.point_weight() / g.h;
        let local: Vec<[[f64; 2]; 4]> = (0..g.cell_count())
            .into_par_iter()
            .map(|c| {
                let mut f = [[0.0; 2]; 4];
                for (k, st) in CORNER_STENCIL.iter().enumerate() {
                    let m = tau[POINTS_PER_CELL * c + k].mandel();
                    let gx = [m[0] * scale, m[2] / SQRT2 * scale];
                    let gy = [m[2] / SQRT2 * scale, m[1] * scale];
                    for a in 0..2 {
                        f[st[0]][a] += gx[a];
                        f[st[1]][a] -= gx[a];
                        f[st[2]][a] += gy[a];
                        f[st[3]][a] -= gy[a];
                    }
                }
                f
            })
            .collect();
        let nx = g.nx;
        out.par_iter_mut().enumerate().for_each(|(n, acc)| {
            let (i, j) = (n % (nx + 1), n / (nx + 1));
            let mut sum = [0.0; 2];
            // (cell offset, local node index of this node in that cell)
            let neighbours = [(i > 0 && j > 0, 1, 1, 3), (i < nx && j > 0, 0, 1, 2), (i > 0 && j < g.ny, 1, 0, 1), (i < nx && j < g.ny, 0, 0, 0)];
            for (ok, di, dj, slot) in neighbours {
                if ok {
                    let c = (j - dj) * nx + (i - di);
                    sum[0] += local[c][slot][0];
                    sum[1] += local[c][slot][1];
                }
            }
            *acc = sum;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_clamps_far_edge() {
        let g = Grid::new([0.0, 0.0], 0.5, 2, 2).unwrap();
        let (c, s, t) = g.locate([1.0, 1.0]).unwrap();
        assert_eq!((c, s, t), (3, 1.0, 1.0));
        assert!(g.locate([1.1, 0.0]).is_none());
    }

    #[test]
    fn segment_quadrature_weights_sum_to_length() {
        let g = Grid::new([0.0, 0.0], 0.25, 4, 4).unwrap();
        let q = segment_quadrature(&g, [0.1, 0.05], [0.9, 0.8]).unwrap();
        let total: f64 = q.iter().map(|e| e.3).sum();
        assert!((total - (0.8f64).hypot(0.75)).abs() < 1e-14);
    }
}
