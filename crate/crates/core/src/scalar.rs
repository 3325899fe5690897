//! Scalar (conductivity) design through optimal transport between the
//! positive and negative parts of a source term given as atoms.

use crate::error::{FmdError, Result};
use crate::setting::DesignSetting;

/// Integer resolution of masses in the flow solver.
pub const MASS_QUANTUM: f64 = 1e12;
const EQUAL_MASS_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub atoms: Vec<([f64; 2], f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<([f64; 2], f64)>) -> Result<Self> {
        for (i, (x, w)) in atoms.iter().enumerate() {
            if !(*w > 0.0) || !w.is_finite() || !x.iter().all(|c| c.is_finite()) {
                return Err(FmdError::InvalidMeasure(format!("atom {i} must have finite position and positive weight")));
            }
        }
        Ok(Self { atoms })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// `nx × ny` equal atoms at the cell centres of a rectangle, of total mass `mass`.
pub fn atomize_rectangle(lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize, mass: f64) -> Result<DiscreteMeasure> {
    if nx == 0 || ny == 0 || !(hi[0] > lo[0] && hi[1] > lo[1]) {
        return Err(FmdError::InvalidMeasure("rectangle atomization needs a proper box and positive counts".into()));
    }
    let w = mass / (nx * ny) as f64;
    let atoms = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            let x = [
                lo[0] + (i as f64 + 0.5) * (hi[0] - lo[0]) / nx as f64,
                lo[1] + (j as f64 + 0.5) * (hi[1] - lo[1]) / ny as f64,
            ];
            (x, w)
        })
        .collect();
    DiscreteMeasure::new(atoms)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<[f64; 2]>,
}

impl ConvexPolygon {
    /// Vertices in either orientation; collinear consecutive vertices are allowed.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(FmdError::NonConvexDomain);
        }
        let mut sign = 0.0;
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            let cr = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            if cr.abs() <= 1e-14 {
                continue;
            }
            if sign == 0.0 {
                sign = cr.signum();
            } else if cr.signum() != sign {
                return Err(FmdError::NonConvexDomain);
            }
        }
        if sign == 0.0 {
            return Err(FmdError::NonConvexDomain);
        }
        let mut vertices = vertices;
        if sign < 0.0 {
            vertices.reverse();
        }
        // A star-shaped but self-intersecting vertex list turns more than once.
        let mut turn = 0.0;
        for i in 0..n {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            let e1 = (b[1] - a[1]).atan2(b[0] - a[0]);
            let e2 = (c[1] - b[1]).atan2(c[0] - b[0]);
            let mut d = e2 - e1;
            while d <= -std::f64::consts::PI {
                d += 2.0 * std::f64::consts::PI;
            }
            while d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            turn += d;
        }
        if (turn - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
            return Err(FmdError::NonConvexDomain);
        }
        Ok(Self { vertices })
    }

    pub fn rectangle(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Self::new(vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let n = self.vertices.len();
        let scale = self.vertices.iter().fold(1.0_f64, |m, v| m.max(v[0].abs()).max(v[1].abs()));
        (0..n).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let cr = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
            cr >= -1e-12 * scale * scale
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    /// `(source index, target index, mass)`.
    pub entries: Vec<(usize, usize, f64)>,
    /// 1-Lipschitz potential at the source atoms.
    pub source_potential: Vec<f64>,
    /// Same potential at the target atoms.
    pub target_potential: Vec<f64>,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Integer masses summing to exactly `MASS_QUANTUM` (largest remainder rounding).
fn quantize(m: &DiscreteMeasure, total: f64) -> Vec<i64> {
    let target = MASS_QUANTUM as i64;
    let scaled: Vec<f64> = m.atoms.iter().map(|a| a.1 / total * MASS_QUANTUM).collect();
    let mut q: Vec<i64> = scaled.iter().map(|s| s.floor() as i64).collect();
    let mut missing = target - q.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - scaled[a].floor();
        let fb = scaled[b] - scaled[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut k = 0;
    while missing > 0 {
        q[order[k % order.len()]] += 1;
        missing -= 1;
        k += 1;
    }
    q
}

/// Exact optimal plan for the cost `|x − y|` by successive shortest paths on
/// the complete bipartite graph, with quantized masses.
pub fn solve_otp(plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Result<(TransportPlan, f64)> {
    let (mp, mm) = (plus.total_mass(), minus.total_mass());
    if (mp - mm).abs() > EQUAL_MASS_TOL * mp.max(mm).max(f64::MIN_POSITIVE) || (plus.is_empty() != minus.is_empty()) {
        return Err(FmdError::MassMismatch { plus: mp, minus: mm });
    }
    if plus.is_empty() {
        return Ok((TransportPlan { entries: vec![], source_potential: vec![], target_potential: vec![] }, 0.0));
    }
    let total = 0.5 * (mp + mm);
    let (m, n) = (plus.len(), minus.len());
    let cost: Vec<Vec<f64>> = plus.atoms.iter().map(|a| minus.atoms.iter().map(|b| dist(a.0, b.0)).collect()).collect();
    let mut supply = quantize(plus, total);
    let mut demand = quantize(minus, total);
    let mut flow = vec![vec![0i64; n]; m];

    // Node v < m is a source, v ≥ m the target v − m.
    let mut pot = vec![0.0; m + n];
    for j in 0..n {
        pot[m + j] = (0..m).map(|i| cost[i][j]).fold(f64::INFINITY, f64::min);
    }
    let mut remaining: i64 = supply.iter().sum();
    while remaining > 0 {
        let mut d = vec![f64::INFINITY; m + n];
        let mut prev = vec![usize::MAX; m + n];
        let mut done = vec![false; m + n];
        for i in 0..m {
            if supply[i] > 0 {
                d[i] = 0.0;
            }
        }
        let mut reached = usize::MAX;
        loop {
            let mut v = usize::MAX;
            for k in 0..m + n {
                if !done[k] && d[k].is_finite() && (v == usize::MAX || d[k] < d[v]) {
                    v = k;
                }
            }
            if v == usize::MAX {
                break;
            }
            done[v] = true;
            if v >= m && demand[v - m] > 0 {
                reached = v;
                break;
            }
            if v < m {
                for j in 0..n {
                    let w = m + j;
                    let rc = (cost[v][j] + pot[v] - pot[w]).max(0.0);
                    if !done[w] && d[v] + rc < d[w] {
                        d[w] = d[v] + rc;
                        prev[w] = v;
                    }
                }
            } else {
                let j = v - m;
                for i in 0..m {
                    if flow[i][j] > 0 {
                        let rc = (-cost[i][j] + pot[v] - pot[i]).max(0.0);
                        if !done[i] && d[v] + rc < d[i] {
                            d[i] = d[v] + rc;
                            prev[i] = v;
                        }
                    }
                }
            }
        }
        if reached == usize::MAX {
            return Err(FmdError::DegenerateProblem("transport network has no augmenting path".into()));
        }
        let dt = d[reached];
        for k in 0..m + n {
            pot[k] += d[k].min(dt);
        }
        // Bottleneck along the path.
        let mut amount = demand[reached - m];
        let mut v = reached;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= m {
                amount = amount.min(flow[v][u - m]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        let mut v = reached;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < m {
                flow[u][v - m] += amount;
            } else {
                flow[v][u - m] -= amount;
            }
            v = u;
        }
        supply[v] -= amount;
        demand[reached - m] -= amount;
        remaining -= amount;
    }

    let unit = total / MASS_QUANTUM;
    let mut entries = Vec::new();
    let mut z = 0.0;
    for i in 0..m {
        for j in 0..n {
            if flow[i][j] > 0 {
                let mass = flow[i][j] as f64 * unit;
                z += mass * cost[i][j];
                entries.push((i, j, mass));
            }
        }
    }
    let (source_potential, target_potential) = kantorovich_potential(plus, minus, &cost, &flow);
    Ok((TransportPlan { entries, source_potential, target_potential }, z))
}

/// As [`solve_otp`] after checking that every atom lies in the convex domain.
pub fn solve_otp_in(domain: &ConvexPolygon, plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Result<(TransportPlan, f64)> {
    for (index, a) in plus.atoms.iter().chain(&minus.atoms).enumerate() {
        if !domain.contains(a.0) {
            return Err(FmdError::AtomOutsideDomain { index });
        }
    }
    solve_otp(plus, minus)
}

/// Bellman–Ford distances on the residual graph give `u(x_i) − u(y_j) ≤ |x_i − y_j|`
/// with equality on the support of the plan; the McShane extension then makes `u`
/// 1-Lipschitz everywhere.
fn kantorovich_potential(
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    cost: &[Vec<f64>],
    flow: &[Vec<i64>],
) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (plus.len(), minus.len());
    let mut d = vec![0.0; m + n];
    for _ in 0..m + n {
        let mut changed = false;
        for i in 0..m {
            for j in 0..n {
                if d[i] + cost[i][j] < d[m + j] - 1e-15 {
                    d[m + j] = d[i] + cost[i][j];
                    changed = true;
                }
                if flow[i][j] > 0 && d[m + j] - cost[i][j] < d[i] - 1e-15 {
                    d[i] = d[m + j] - cost[i][j];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let target: Vec<f64> = d[m..].iter().map(|x| -x).collect();
    let extend = |x: [f64; 2]| {
        minus.atoms.iter().zip(&target).map(|(b, u)| u + dist(x, b.0)).fold(f64::INFINITY, f64::min)
    };
    let source = plus.atoms.iter().map(|a| extend(a.0)).collect();
    let target = minus.atoms.iter().map(|a| extend(a.0)).collect();
    (source, target)
}

/// `Σ u(x_i) f₊ − Σ u(y_j) f₋` for the stored potential.
pub fn kantorovich_value(plan: &TransportPlan, plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> f64 {
    plus.atoms.iter().zip(&plan.source_potential).map(|(a, u)| a.1 * u).sum::<f64>()
        - minus.atoms.iter().zip(&plan.target_potential).map(|(a, u)| a.1 * u).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FluxSegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Vector density per unit length.
    pub density: [f64; 2],
}

/// One segment per plan entry, running from the source atom to the target
/// atom, carrying `mass·(x − y)/|x − y|` per unit length.
pub fn flux_from_plan(plan: &TransportPlan, plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Vec<FluxSegment> {
    plan.entries
        .iter()
        .filter_map(|&(i, j, mass)| {
            let (x, y) = (plus.atoms[i].0, minus.atoms[j].0);
            let len = dist(x, y);
            (len > 0.0).then(|| FluxSegment {
                start: x,
                end: y,
                density: [mass * (x[0] - y[0]) / len, mass * (x[1] - y[1]) / len],
            })
        })
        .collect()
}

/// Largest weak residual of `−div θ = f₊ − f₋` against `1, x, y, x², xy, y²`,
/// relative to the same functionals applied to `|f|`.
pub fn flux_residual(flux: &[FluxSegment], plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> f64 {
    type Poly = fn([f64; 2]) -> (f64, [f64; 2]);
    let tests: [Poly; 6] = [
        |_| (1.0, [0.0, 0.0]),
        |x| (x[0], [1.0, 0.0]),
        |x| (x[1], [0.0, 1.0]),
        |x| (x[0] * x[0], [2.0 * x[0], 0.0]),
        |x| (x[0] * x[1], [x[1], x[0]]),
        |x| (x[1] * x[1], [0.0, 2.0 * x[1]]),
    ];
    let g = 0.5 / 3f64.sqrt();
    let mut worst: f64 = 0.0;
    for phi in tests {
        let mut lhs = 0.0;
        for s in flux {
            let len = dist(s.start, s.end);
            for t in [0.5 - g, 0.5 + g] {
                let x = [s.start[0] + t * (s.end[0] - s.start[0]), s.start[1] + t * (s.end[1] - s.start[1])];
                let grad = phi(x).1;
                lhs += 0.5 * len * (grad[0] * s.density[0] + grad[1] * s.density[1]);
            }
        }
        let rhs: f64 = plus.atoms.iter().map(|a| a.1 * phi(a.0).0).sum::<f64>()
            - minus.atoms.iter().map(|a| a.1 * phi(a.0).0).sum::<f64>();
        let scale: f64 = plus.atoms.iter().chain(&minus.atoms).map(|a| a.1 * phi(a.0).0.abs()).sum::<f64>();
        worst = worst.max((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConductivitySegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Unit direction `(x − y)/|x − y|`.
    pub direction: [f64; 2],
    /// Rank-one conductivity per unit length, entries `(a11, a22, a12)`.
    pub tensor: [f64; 3],
    /// Transported mass.
    pub mass: f64,
}

impl ConductivitySegment {
    pub fn length(&self) -> f64 {
        dist(self.start, self.end)
    }

    /// Trace of the tensor density.
    pub fn density(&self) -> f64 {
        self.tensor[0] + self.tensor[1]
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [a, b, c] = self.tensor;
        let mean = 0.5 * (a + b);
        let r = (0.5 * (a - b)).hypot(c);
        [mean + r, mean - r]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConductivityDesign {
    pub segments: Vec<ConductivitySegment>,
    pub z: f64,
    pub c0: f64,
    pub plan: TransportPlan,
}

pub fn conductivity_from_plan(
    plan: &TransportPlan,
    plus: &DiscreteMeasure,
    minus: &DiscreteMeasure,
    c0: f64,
) -> Result<ConductivityDesign> {
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(FmdError::InvalidSetting(format!("available cost must be positive, got {c0}")));
    }
    let z: f64 = plan.entries.iter().map(|&(i, j, mass)| mass * dist(plus.atoms[i].0, minus.atoms[j].0)).sum();
    if !(z > 0.0) {
        return Err(FmdError::DegenerateTransport);
    }
    let segments = plan
        .entries
        .iter()
        .filter_map(|&(i, j, mass)| {
            let (x, y) = (plus.atoms[i].0, minus.atoms[j].0);
            let len = dist(x, y);
            (len > 0.0).then(|| {
                let e = [(x[0] - y[0]) / len, (x[1] - y[1]) / len];
                let k = c0 / z * mass;
                ConductivitySegment {
                    start: x,
                    end: y,
                    direction: e,
                    tensor: [k * e[0] * e[0], k * e[1] * e[1], k * e[0] * e[1]],
                    mass,
                }
            })
        })
        .collect();
    Ok(ConductivityDesign { segments, z, c0, plan: plan.clone() })
}

impl ConductivityDesign {
    /// `Σ length·tr(tensor density)`.
    pub fn total_cost(&self) -> f64 {
        self.segments.iter().map(|s| s.length() * s.density()).sum()
    }
}

/// Minimal compliance `Z²/(2C₀)`, checked against the lower bound obtained by
/// testing the compliance with the scaled Kantorovich potential.
pub fn scalar_compliance_certificate(design: &ConductivityDesign, plus: &DiscreteMeasure, minus: &DiscreteMeasure) -> Result<f64> {
    let expected = design.z * design.z / (2.0 * design.c0);
    if design.z == 0.0 {
        return Ok(0.0);
    }
    let zk = kantorovich_value(&design.plan, plus, minus);
    let mut energy = 0.0;
    for &(i, j, mass) in &design.plan.entries {
        let len = dist(plus.atoms[i].0, minus.atoms[j].0);
        if len > 0.0 {
            let du = design.plan.source_potential[i] - design.plan.target_potential[j];
            energy += design.c0 / design.z * mass * du * du / len;
        }
    }
    let t = design.z / design.c0;
    let lower = t * zk - 0.5 * t * t * energy;
    if (lower - expected).abs() > 1e-6 * expected {
        return Err(FmdError::CertificateFailure { expected, actual: lower });
    }
    Ok(expected)
}

fn require_scalar(setting: &DesignSetting) -> Result<()> {
    if !setting.is_scalar() {
        return Err(FmdError::UnsupportedSetting(setting.name().into()));
    }
    Ok(())
}

pub fn scalar_rho(setting: &DesignSetting, v: &[f64]) -> Result<f64> {
    require_scalar(setting)?;
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(match setting {
        DesignSetting::ScalarIso => n / (v.len() as f64).sqrt(),
        _ => n,
    })
}

pub fn scalar_rho_polar(setting: &DesignSetting, q: &[f64]) -> Result<f64> {
    require_scalar(setting)?;
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(match setting {
        DesignSetting::ScalarIso => n * (q.len() as f64).sqrt(),
        _ => n,
    })
}
