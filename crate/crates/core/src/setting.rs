use crate::error::{FmdError, Result};

/// Anisotropy class together with its potential and cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DesignSetting {
    /// Free anisotropy: any positive semi-definite Hooke tensor.
    Amd,
    /// Convex hull of uniaxial (fibrous) Hooke tensors.
    FibMd,
    /// Fibrous material with different tension and compression responses.
    FibMdPm { kappa_plus: f64, kappa_minus: f64 },
    /// Isotropic Hooke tensors.
    Imd,
    /// Isotropic Hooke tensors with the power-law potential of exponent `p`.
    PowerLawImd { p: f64 },
    ScalarAmd,
    ScalarIso,
}

impl DesignSetting {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DesignSetting::FibMdPm { kappa_plus, kappa_minus } => {
                if !(kappa_plus > 0.0 && kappa_minus > 0.0)
                    || !kappa_plus.is_finite()
                    || !kappa_minus.is_finite()
                {
                    return Err(FmdError::InvalidSetting(format!(
                        "kappa_plus and kappa_minus must be positive, got {kappa_plus}, {kappa_minus}"
                    )));
                }
            }
            DesignSetting::PowerLawImd { p } => {
                if !(p > 1.0) || !p.is_finite() {
                    return Err(FmdError::InvalidSetting(format!("exponent p must exceed 1, got {p}")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Homogeneity exponent of the strain potential.
    pub fn exponent(&self) -> f64 {
        match *self {
            DesignSetting::PowerLawImd { p } => p,
            _ => 2.0,
        }
    }

    /// Conjugate exponent `p' = p/(p−1)`.
    pub fn conjugate_exponent(&self) -> f64 {
        let p = self.exponent();
        p / (p - 1.0)
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, DesignSetting::ScalarAmd | DesignSetting::ScalarIso)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DesignSetting::Amd => "amd",
            DesignSetting::FibMd => "fibmd",
            DesignSetting::FibMdPm { .. } => "fibmd_pm",
            DesignSetting::Imd => "imd",
            DesignSetting::PowerLawImd { .. } => "power_law_imd",
            DesignSetting::ScalarAmd => "scalar_amd",
            DesignSetting::ScalarIso => "scalar_iso",
        }
    }

    pub(crate) fn require_tensor(&self) -> Result<()> {
        self.validate()?;
        if self.is_scalar() {
            return Err(FmdError::UnsupportedSetting(self.name().into()));
        }
        Ok(())
    }
}
