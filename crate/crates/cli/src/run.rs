//! Command dispatch.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use fmd_core::checker::{check_equilibrium_on, check_extremality_and_hooke, check_membership_in, verification_box, OptimalityReport, VERIFICATION_CELLS};
use fmd_core::lcp::solve_lcp;
use fmd_core::oracle::{cost, optimal_hooke_for_stress, rho_polar, stress_energy};
use fmd_core::reconstruct::{reconstruct, total_cost, uniform_stress_report, verify_compliance};
use fmd_core::scalar::{
    conductivity_from_plan, flux_from_plan, flux_residual, kantorovich_value, scalar_compliance_certificate, solve_otp,
    solve_otp_in,
};
use fmd_core::tensor::young_poisson;
use fmd_core::{FmdError, SymTensor2};

use crate::config::{GridConfig, Mode, ProblemConfig, SolverConfig};
use crate::export;

/// Process exit status of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    CertificateFailure,
    NonConvergence,
}

impl Status {
    pub fn code(&self) -> i32 {
        match self {
            Status::Success => 0,
            Status::CertificateFailure => 2,
            Status::NonConvergence => 3,
        }
    }
}

/// Command-line overrides of configuration values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub gap_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub grid: Option<(usize, usize)>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ProblemConfig) {
        if let Some((nx, ny)) = self.grid {
            cfg.grid = Some(GridConfig { nx, ny });
        }
        if self.gap_tol.is_some() || self.max_iter.is_some() || self.seed.is_some() {
            let mut s = cfg.solver.unwrap_or(SolverConfig::default());
            s.gap_tol = self.gap_tol.or(s.gap_tol);
            s.max_iter = self.max_iter.or(s.max_iter);
            s.seed = self.seed.or(s.seed);
            cfg.solver = Some(s);
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: Status,
    /// Contents of `summary.json` (deterministic; no timings).
    pub summary: Value,
    pub out_dir: PathBuf,
    pub wall_time: f64,
}

#[derive(Debug)]
pub enum RunError {
    Fmd(FmdError),
    Io(std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Fmd(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<FmdError> for RunError {
    fn from(e: FmdError) -> Self {
        RunError::Fmd(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn out_dir(cfg: &ProblemConfig, ov: &Overrides) -> PathBuf {
    ov.out
        .clone()
        .or_else(|| cfg.output.as_ref().and_then(|o| o.dir.clone()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fmd_out"))
}

/// Runs a validated configuration, writing artifacts to the output directory.
pub fn run(cfg: &ProblemConfig, ov: &Overrides) -> Result<RunOutcome, RunError> {
    let mut cfg = cfg.clone();
    ov.apply(&mut cfg);
    cfg.validate()?;
    let dir = out_dir(&cfg, ov);
    let start = Instant::now();
    let (status, summary) = match cfg.mode {
        Mode::Solve | Mode::Reconstruct => run_grid(&cfg, &dir)?,
        Mode::Check => run_check(&cfg, &dir)?,
        Mode::Oracle => {
            let s = cfg.stress.expect("validated");
            let summary = oracle_report(&cfg, SymTensor2::plane(s[0], s[1], s[2]))?;
            export::write(&dir, "summary.json", &export::json_text(&summary))?;
            (Status::Success, summary)
        }
        Mode::Scalar => run_scalar(&cfg, &dir)?,
    };
    Ok(RunOutcome { status, summary, out_dir: dir, wall_time: start.elapsed().as_secs_f64() })
}

fn run_grid(cfg: &ProblemConfig, dir: &Path) -> Result<(Status, Value), RunError> {
    let setting = cfg.design_setting()?;
    let grid = cfg.grid()?;
    let loads = cfg.load_spec();
    let opts = cfg.solve_options();
    let sol = solve_lcp(&grid, &loads, &setting, &opts)?;
    let mut status = if sol.converged { Status::Success } else { Status::NonConvergence };
    let mut summary = json!({
        "mode": cfg.mode.name(),
        "setting": setting.name(),
        "Z": sol.z(),
        "Z_primal": sol.z_primal,
        "Z_dual": sol.z_dual,
        "gap": sol.gap,
        "relative_gap": sol.relative_gap(),
        "iterations": sol.iterations,
        "converged": sol.converged,
        "equilibrium_residual": sol.equilibrium_residual,
        "grid": { "nx": grid.nx, "ny": grid.ny, "h": grid.h },
    });
    export::write(dir, "displacement.csv", &export::displacement_csv(&sol, &sol.u))?;
    export::write(dir, "flux.csv", &export::flux_csv(&sol))?;
    let mut design = None;
    if cfg.mode == Mode::Reconstruct {
        let c0 = cfg.c0.expect("validated");
        match reconstruct(&sol, &setting, c0) {
            Ok(d) => {
                let cost = total_cost(&d);
                let uniform = uniform_stress_report(&d);
                let compliance = verify_compliance(&d, &setting);
                let m = summary.as_object_mut().unwrap();
                m.insert("C0".into(), json!(c0));
                m.insert("Cmin".into(), json!(d.cmin));
                m.insert("total_cost".into(), json!(cost));
                m.insert("uniform_stress_max_dev".into(), json!(uniform.max_dev));
                m.insert("uniform_stress_cells".into(), json!(uniform.cells_checked));
                match compliance {
                    Ok(v) => {
                        m.insert("compliance".into(), json!(v));
                    }
                    Err(FmdError::CertificateFailure { actual, .. }) => {
                        m.insert("compliance".into(), json!(actual));
                        status = Status::CertificateFailure;
                    }
                    Err(e) => return Err(e.into()),
                }
                if (cost - c0).abs() > 1e-6 * c0 {
                    status = Status::CertificateFailure;
                }
                export::write(dir, "design.csv", &export::design_csv(&d))?;
                export::write(dir, "displacement_scaled.csv", &export::displacement_csv(&sol, &d.u))?;
                design = Some(d);
            }
            Err(FmdError::UncertifiedInput { .. }) => status = Status::NonConvergence,
            Err(e) => return Err(e.into()),
        }
    }
    if cfg.output.as_ref().is_some_and(|o| o.vtk) {
        export::write(dir, "fields.vtk", &export::vtk_cells(&sol, design.as_ref()))?;
    }
    export::write(dir, "summary.json", &export::json_text(&summary))?;
    Ok((status, summary))
}

fn run_check(cfg: &ProblemConfig, dir: &Path) -> Result<(Status, Value), RunError> {
    let setting = cfg.design_setting()?;
    let qc = cfg.quadruple.as_ref().expect("validated");
    let q = qc.to_quadruple()?;
    let loads = cfg.load_spec();
    let tol = qc.tol.unwrap_or(1e-8);
    let cells = qc.cells.unwrap_or(VERIFICATION_CELLS);
    let report = OptimalityReport {
        equilibrium: check_equilibrium_on(&q, &loads, tol, cells),
        membership: check_membership_in(&q, &setting, tol, verification_box(&q, &loads)),
        extremality: check_extremality_and_hooke(&q, &setting, tol),
    };
    let summary = export::report_json(&report);
    export::write(dir, "report.json", &export::json_text(&summary))?;
    let status = if report.passed() { Status::Success } else { Status::CertificateFailure };
    Ok((status, summary))
}

fn run_scalar(cfg: &ProblemConfig, dir: &Path) -> Result<(Status, Value), RunError> {
    let m = cfg.measures.as_ref().expect("validated");
    let plus = m.plus.to_measure()?;
    let minus = m.minus.to_measure()?;
    let c0 = cfg.c0.expect("validated");
    let (plan, z) = match cfg.scalar_domain()? {
        Some(domain) => solve_otp_in(&domain, &plus, &minus)?,
        None => solve_otp(&plus, &minus)?,
    };
    let flux = flux_from_plan(&plan, &plus, &minus);
    let mut status = Status::Success;
    let mut summary = json!({
        "mode": "scalar",
        "Z": z,
        "C0": c0,
        "Cmin": z * z / (2.0 * c0),
        "kantorovich_value": kantorovich_value(&plan, &plus, &minus),
        "flux_residual": flux_residual(&flux, &plus, &minus),
        "plan_entries": plan.entries.len(),
    });
    if z > 0.0 {
        let design = conductivity_from_plan(&plan, &plus, &minus, c0)?;
        let m = summary.as_object_mut().unwrap();
        m.insert("total_cost".into(), json!(design.total_cost()));
        match scalar_compliance_certificate(&design, &plus, &minus) {
            Ok(v) => {
                m.insert("compliance".into(), json!(v));
            }
            Err(FmdError::CertificateFailure { actual, .. }) => {
                m.insert("compliance".into(), json!(actual));
                status = Status::CertificateFailure;
            }
            Err(e) => return Err(e.into()),
        }
        export::write(dir, "segments.csv", &export::segments_csv(&design))?;
    } else {
        export::write(dir, "segments.csv", "x1,y1,x2,y2,mass,density,a11,a22,a12\n")?;
    }
    export::write(dir, "summary.json", &export::json_text(&summary))?;
    Ok((status, summary))
}

/// Point-wise oracle values for a plane stress.
pub fn oracle_report(cfg: &ProblemConfig, sigma: SymTensor2) -> Result<Value, FmdError> {
    let setting = cfg.design_setting()?;
    setting.validate()?;
    if setting.is_scalar() {
        return Err(FmdError::UnsupportedSetting(setting.name().into()));
    }
    let h = optimal_hooke_for_stress(&setting, &sigma)?;
    let rows: Vec<Vec<f64>> = h.rows();
    let mut out = json!({
        "setting": setting.name(),
        "stress": [sigma.get(0, 0), sigma.get(1, 1), sigma.get(0, 1)],
        "rho_polar": rho_polar(&setting, &sigma),
        "hooke_mandel": rows,
        "hooke_cost": cost(&h),
        "stress_energy": stress_energy(&setting, &h, &sigma)?,
    });
    if let Some((k, g)) = h.iso_moduli(1e-12) {
        let m = out.as_object_mut().unwrap();
        m.insert("K".into(), json!(k));
        m.insert("G".into(), json!(g));
        if let Ok((e, nu)) = young_poisson(k, g) {
            m.insert("E".into(), json!(e));
            m.insert("nu".into(), json!(nu));
        }
    }
    Ok(out)
}
