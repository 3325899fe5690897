//! Optimal designs recovered from certified grid solutions.
//!
//! With `Z` the optimal value and `C₀` the available cost, a flux `τ` splits into
//! mass `μ̌ = (C₀/Z)·ρ⁰(τ)` and stress `σ̌ = (Z/C₀)·τ/ρ⁰(τ)`, so that `σ̌μ̌ = τ`
//! and `ρ⁰(σ̌) = Z/C₀` wherever material is present.

use rayon::prelude::*;

use crate::error::{FmdError, Result};
use crate::grid::{Grid, POINTS_PER_CELL};
use crate::lcp::DiscreteLCPSolution;
use crate::oracle::{cost, optimal_hooke_for_stress, rho_polar, stress_energy};
use crate::setting::DesignSetting;
use crate::tensor::{HookeTensor, SymTensor2};

/// Points lighter than this fraction of the heaviest one carry no material.
pub const MASS_FLOOR_REL: f64 = 1e-8;
/// Largest relative duality gap accepted by [`reconstruct`].
pub const MAX_INPUT_GAP: f64 = 1e-3;
/// Relative tolerance of [`verify_compliance`].
pub const COMPLIANCE_TOL: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct FMDDesign {
    pub grid: Grid,
    pub setting: DesignSetting,
    /// Mass carried by each quadrature point (four per cell).
    pub mass: Vec<f64>,
    /// Stress per unit mass at each quadrature point; zero where no material.
    pub stress: Vec<SymTensor2>,
    /// Unit-cost Hooke tensor at each quadrature point carrying material.
    pub hooke: Vec<Option<HookeTensor>>,
    /// Scaled nodal displacement.
    pub u: Vec<[f64; 2]>,
    pub z: f64,
    pub c0: f64,
    pub cmin: f64,
    pub p: f64,
    pub mass_floor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformStressReport {
    pub max_dev: f64,
    pub cells_checked: usize,
}

/// Minimal compliance `Z^{p'}/(p'·C₀^{p'−1})`.
pub fn minimal_compliance(z: f64, c0: f64, p: f64) -> f64 {
    let q = p / (p - 1.0);
    z.powf(q) / (q * c0.powf(q - 1.0))
}

pub fn reconstruct(sol: &DiscreteLCPSolution, setting: &DesignSetting, c0: f64) -> Result<FMDDesign> {
    setting.require_tensor()?;
    if !(c0 > 0.0) || !c0.is_finite() {
        return Err(FmdError::InvalidSetting(format!("available cost must be positive, got {c0}")));
    }
    let z = sol.z_dual;
    if !(z > 0.0) {
        return Err(FmdError::DegenerateProblem(format!("optimal value Z = {z} is not positive")));
    }
    if sol.relative_gap() > MAX_INPUT_GAP {
        return Err(FmdError::UncertifiedInput { gap: sol.relative_gap(), limit: MAX_INPUT_GAP });
    }
    let w = sol.grid.point_weight();
    let polar: Vec<f64> = sol.tau.par_iter().map(|t| rho_polar(setting, t)).collect();
    let raw: Vec<f64> = polar.iter().map(|r| c0 / z * w * r).collect();
    let floor = MASS_FLOOR_REL * raw.iter().cloned().fold(0.0, f64::max);
    let p = setting.exponent();
    let q = setting.conjugate_exponent();
    let zero = SymTensor2::zeros(2);
    let per_point: Vec<(f64, SymTensor2, Option<HookeTensor>)> = (0..sol.tau.len())
        .into_par_iter()
        .map(|g| {
            if raw[g] <= floor || polar[g] <= 0.0 {
                return Ok((0.0, zero, None));
            }
            let sigma = sol.tau[g].scale(z / (c0 * polar[g]));
            let h = optimal_hooke_for_stress(setting, &sigma)?;
            Ok((raw[g], sigma, Some(h)))
        })
        .collect::<Result<_>>()?;
    let scale_u = (z / c0).powf(q / p);
    let mut mass = Vec::with_capacity(per_point.len());
    let mut stress = Vec::with_capacity(per_point.len());
    let mut hooke = Vec::with_capacity(per_point.len());
    for (m, s, h) in per_point {
        mass.push(m);
        stress.push(s);
        hooke.push(h);
    }
    Ok(FMDDesign {
        grid: sol.grid,
        setting: *setting,
        mass,
        stress,
        hooke,
        u: sol.u.iter().map(|a| [a[0] * scale_u, a[1] * scale_u]).collect(),
        z,
        c0,
        cmin: minimal_compliance(z, c0, p),
        p,
        mass_floor: floor,
    })
}

impl FMDDesign {
    pub fn cell_mass(&self, c: usize) -> f64 {
        self.mass[POINTS_PER_CELL * c..POINTS_PER_CELL * (c + 1)].iter().sum()
    }

    /// Mass-weighted mean stress of a cell.
    pub fn cell_stress(&self, c: usize) -> SymTensor2 {
        let m = self.cell_mass(c);
        let mut s = SymTensor2::zeros(2);
        if m <= 0.0 {
            return s;
        }
        for g in POINTS_PER_CELL * c..POINTS_PER_CELL * (c + 1) {
            s += self.stress[g].scale(self.mass[g] / m);
        }
        s
    }

    /// Mass per unit area of a cell.
    pub fn cell_density(&self, c: usize) -> f64 {
        self.cell_mass(c) / (self.grid.h * self.grid.h)
    }

    /// Unit-cost Hooke tensor of the cell aggregate, if the cell carries material.
    pub fn cell_hooke(&self, c: usize) -> Option<HookeTensor> {
        let m = self.cell_mass(c);
        if m <= 0.0 {
            return None;
        }
        optimal_hooke_for_stress(&self.setting, &self.cell_stress(c)).ok()
    }

    /// Same design with every mass multiplied by `t`.
    pub fn scaled_mass(&self, t: f64) -> Self {
        let mut out = self.clone();
        out.mass.iter_mut().for_each(|m| *m *= t);
        out.c0 *= t;
        out.mass_floor *= t;
        out
    }
}

/// `Σ j*(Ȟ, σ̌)·μ̌`, checked against the minimal compliance.
pub fn verify_compliance(design: &FMDDesign, setting: &DesignSetting) -> Result<f64> {
    let parts: Vec<f64> = design
        .hooke
        .par_iter()
        .enumerate()
        .map(|(g, h)| match h {
            Some(h) => stress_energy(setting, h, &design.stress[g]).map(|e| e * design.mass[g]),
            None => Ok(0.0),
        })
        .collect::<Result<_>>()?;
    let value: f64 = parts.iter().sum();
    if (value - design.cmin).abs() > COMPLIANCE_TOL * design.cmin.abs() {
        return Err(FmdError::CertificateFailure { expected: design.cmin, actual: value });
    }
    Ok(value)
}

/// `Σ c(Ȟ)·μ̌`.
pub fn total_cost(design: &FMDDesign) -> f64 {
    design
        .hooke
        .iter()
        .zip(&design.mass)
        .filter_map(|(h, m)| h.as_ref().map(|h| cost(h) * m))
        .sum()
}

/// Largest `|ρ⁰(σ̌_c)·C₀/Z − 1|` over cells carrying material, with `σ̌_c` the
/// mass-weighted cell stress.
pub fn uniform_stress_report(design: &FMDDesign) -> UniformStressReport {
    let cells = design.grid.cell_count();
    let masses: Vec<f64> = (0..cells).map(|c| design.cell_mass(c)).collect();
    let floor = MASS_FLOOR_REL * masses.iter().cloned().fold(0.0, f64::max);
    let mut report = UniformStressReport { max_dev: 0.0, cells_checked: 0 };
    if design.z <= 0.0 {
        return report;
    }
    for c in 0..cells {
        if masses[c] <= floor || masses[c] <= 0.0 {
            continue;
        }
        let level = rho_polar(&design.setting, &design.cell_stress(c)) * design.c0 / design.z;
        report.max_dev = report.max_dev.max((level - 1.0).abs());
        report.cells_checked += 1;
    }
    report
}
