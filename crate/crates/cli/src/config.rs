//! Run configuration (TOML).

use serde::{Deserialize, Serialize};

use fmd_core::checker::{AnalyticQuadruple, AreaPart, DisplacementField, LinePart, MeasurePart, QuadruplePart};
use fmd_core::grid::{Grid, LoadSpec, PointLoad, SegmentLoad};
use fmd_core::lcp::SolveOptions;
use fmd_core::scalar::{atomize_rectangle, ConvexPolygon, DiscreteMeasure};
use fmd_core::tensor::{iso_hooke, HookeTensor};
use fmd_core::{DesignSetting, FmdError, SymTensor2};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Solve,
    Reconstruct,
    Check,
    Oracle,
    Scalar,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Solve => "solve",
            Mode::Reconstruct => "reconstruct",
            Mode::Check => "check",
            Mode::Oracle => "oracle",
            Mode::Scalar => "scalar",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl SettingConfig {
    pub fn to_setting(&self) -> Result<DesignSetting, FmdError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| FmdError::InvalidSetting(format!("setting `{}` requires `{key}`", self.kind)))
        };
        let s = match self.kind.as_str() {
            "amd" => DesignSetting::Amd,
            "fibmd" => DesignSetting::FibMd,
            "fibmd_pm" => DesignSetting::FibMdPm {
                kappa_plus: need(self.kappa_plus, "kappa_plus")?,
                kappa_minus: need(self.kappa_minus, "kappa_minus")?,
            },
            "imd" => DesignSetting::Imd,
            "power_law_imd" => DesignSetting::PowerLawImd { p: need(self.p, "p")? },
            "scalar_amd" => DesignSetting::ScalarAmd,
            "scalar_iso" => DesignSetting::ScalarIso,
            other => return Err(FmdError::InvalidSetting(format!("unknown setting kind `{other}`"))),
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLoadConfig {
    pub position: [f64; 2],
    pub force: [f64; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentLoadConfig {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub density: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadsConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub point: Vec<PointLoadConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segment: Vec<SegmentLoadConfig>,
}

impl LoadsConfig {
    pub fn to_spec(&self) -> LoadSpec {
        LoadSpec {
            point_loads: self.point.iter().map(|p| PointLoad { position: p.position, force: p.force }).collect(),
            segment_loads: self
                .segment
                .iter()
                .map(|s| SegmentLoad { start: s.start, end: s.end, density: s.density })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_every: Option<usize>,
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            gap_tol: self.gap_tol.unwrap_or(d.gap_tol),
            check_every: self.check_every.unwrap_or(d.check_every),
            seed: self.seed.unwrap_or(d.seed),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub vtk: bool,
}

/// Affine displacement `u(x) = A·x + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineConfig {
    pub a: [[f64; 2]; 2],
    #[serde(default)]
    pub b: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HookeConfig {
    /// Isotropic moduli `[K, G]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso: Option<[f64; 2]>,
    /// Mandel matrix rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl HookeConfig {
    pub fn to_hooke(&self) -> Result<HookeTensor, FmdError> {
        match (&self.iso, &self.matrix) {
            (Some([k, g]), None) => iso_hooke(*k, *g, 2),
            (None, Some(rows)) => HookeTensor::from_mandel_matrix(2, rows),
            _ => Err(FmdError::InvalidSetting("hooke needs exactly one of `iso` or `matrix`".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartConfig {
    /// `area` or `line`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<[f64; 2]>,
    pub density: f64,
    /// `[σ11, σ22, σ12]`.
    pub sigma: [f64; 3],
    pub hooke: HookeConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrupleConfig {
    pub u: AffineConfig,
    pub parts: Vec<PartConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Cells along the longer side of the verification grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
}

impl QuadrupleConfig {
    pub fn to_quadruple(&self) -> Result<AnalyticQuadruple, FmdError> {
        let mut parts = Vec::with_capacity(self.parts.len());
        for (i, p) in self.parts.iter().enumerate() {
            let missing = |k: &str| FmdError::InvalidSetting(format!("part {i} of kind `{}` needs `{k}`", p.kind));
            let support = match p.kind.as_str() {
                "area" => MeasurePart::Area(AreaPart {
                    lo: p.lo.ok_or_else(|| missing("lo"))?,
                    hi: p.hi.ok_or_else(|| missing("hi"))?,
                    density: p.density,
                }),
                "line" => MeasurePart::Line(LinePart {
                    start: p.start.ok_or_else(|| missing("start"))?,
                    end: p.end.ok_or_else(|| missing("end"))?,
                    density: p.density,
                }),
                other => return Err(FmdError::InvalidSetting(format!("unknown part kind `{other}`"))),
            };
            parts.push(QuadruplePart {
                support,
                sigma: SymTensor2::plane(p.sigma[0], p.sigma[1], p.sigma[2]),
                hooke: p.hooke.to_hooke()?,
            });
        }
        Ok(AnalyticQuadruple { u: DisplacementField::affine(self.u.a, self.u.b), parts })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub position: [f64; 2],
    pub weight: f64,
}

/// Uniform atomization of a rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleAtomsConfig {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub mass: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rectangles: Vec<RectangleAtomsConfig>,
}

impl MeasureConfig {
    pub fn to_measure(&self) -> Result<DiscreteMeasure, FmdError> {
        let mut atoms: Vec<([f64; 2], f64)> = self.atoms.iter().map(|a| (a.position, a.weight)).collect();
        for r in &self.rectangles {
            atoms.extend(atomize_rectangle(r.lo, r.hi, r.nx, r.ny, r.mass)?.atoms);
        }
        DiscreteMeasure::new(atoms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuresConfig {
    pub plus: MeasureConfig,
    pub minus: MeasureConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub mode: Mode,
    pub setting: SettingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loads: Option<LoadsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadruple: Option<QuadrupleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measures: Option<MeasuresConfig>,
    /// Stress `[σ11, σ22, σ12]` for oracle mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stress: Option<[f64; 3]>,
}

#[derive(Debug)]
pub enum ConfigError {
    Syntax { line: usize, message: String },
    Invalid(FmdError),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Syntax { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<FmdError> for ConfigError {
    fn from(e: FmdError) -> Self {
        ConfigError::Invalid(e)
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration; syntax and schema errors report
/// the line of the first offending entry.
pub fn parse_config(text: &str) -> Result<ProblemConfig, ConfigError> {
    let cfg: ProblemConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().trim().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn print_config(cfg: &ProblemConfig) -> String {
    toml::to_string(cfg).expect("configuration serializes to TOML")
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<(), FmdError> {
        let setting = self.setting.to_setting()?;
        if let Some(c0) = self.c0 {
            if !(c0 > 0.0) || !c0.is_finite() {
                return Err(FmdError::InvalidSetting(format!("c0 must be positive, got {c0}")));
            }
        }
        match self.mode {
            Mode::Solve | Mode::Reconstruct => {
                if setting.is_scalar() {
                    return Err(FmdError::UnsupportedSetting(setting.name().into()));
                }
                self.grid()?;
                let loads = self.load_spec();
                loads.check_balanced()?;
                if self.mode == Mode::Reconstruct && self.c0.is_none() {
                    return Err(FmdError::InvalidSetting("reconstruct mode requires `c0`".into()));
                }
            }
            Mode::Check => {
                let q = self.quadruple.as_ref().ok_or_else(|| FmdError::InvalidSetting("check mode requires [quadruple]".into()))?;
                q.to_quadruple()?;
            }
            Mode::Oracle => {
                if self.stress.is_none() {
                    return Err(FmdError::InvalidSetting("oracle mode requires `stress`".into()));
                }
            }
            Mode::Scalar => {
                if !setting.is_scalar() {
                    return Err(FmdError::UnsupportedSetting(setting.name().into()));
                }
                let m = self.measures.as_ref().ok_or_else(|| FmdError::InvalidSetting("scalar mode requires [measures]".into()))?;
                m.plus.to_measure()?;
                m.minus.to_measure()?;
                if self.c0.is_none() {
                    return Err(FmdError::InvalidSetting("scalar mode requires `c0`".into()));
                }
                self.scalar_domain()?;
            }
        }
        Ok(())
    }

    pub fn design_setting(&self) -> Result<DesignSetting, FmdError> {
        self.setting.to_setting()
    }

    pub fn load_spec(&self) -> LoadSpec {
        self.loads.as_ref().map(|l| l.to_spec()).unwrap_or_default()
    }

    /// Rectangle domain `(origin, width, height)`.
    pub fn rectangle(&self) -> Result<([f64; 2], f64, f64), FmdError> {
        let d = self.domain.as_ref().ok_or_else(|| FmdError::InvalidGrid("missing [domain]".into()))?;
        match (d.origin, d.width, d.height) {
            (Some(o), Some(w), Some(h)) if w > 0.0 && h > 0.0 => Ok((o, w, h)),
            _ => Err(FmdError::InvalidGrid("[domain] needs origin, positive width and height".into())),
        }
    }

    pub fn grid(&self) -> Result<Grid, FmdError> {
        let (origin, width, height) = self.rectangle()?;
        let g = self.grid.ok_or_else(|| FmdError::InvalidGrid("missing [grid]".into()))?;
        if g.nx == 0 || g.ny == 0 {
            return Err(FmdError::InvalidGrid("cell counts must be positive".into()));
        }
        let h = width / g.nx as f64;
        if ((height / g.ny as f64) - h).abs() > 1e-9 * h {
            return Err(FmdError::InvalidGrid(format!(
                "cells must be square: width/nx = {h}, height/ny = {}",
                height / g.ny as f64
            )));
        }
        Grid::new(origin, h, g.nx, g.ny)
    }

    /// Convex domain for scalar mode: the polygon, or the rectangle, if given.
    pub fn scalar_domain(&self) -> Result<Option<ConvexPolygon>, FmdError> {
        let Some(d) = &self.domain else { return Ok(None) };
        if let Some(poly) = &d.polygon {
            return ConvexPolygon::new(poly.clone()).map(Some);
        }
        let (o, w, h) = self.rectangle()?;
        ConvexPolygon::rectangle(o, [o[0] + w, o[1] + h]).map(Some)
    }

    pub fn solve_options(&self) -> SolveOptions {
        self.solver.unwrap_or_default().options()
    }
}
