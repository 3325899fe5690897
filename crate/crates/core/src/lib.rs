//! Free material design: optimal distribution of elastic material and of its
//! point-wise anisotropy for a given load, computed through the equivalent
//! linear constrained problem and reconstructed with certificates.

pub mod checker;
pub mod error;
pub mod grid;
pub mod lcp;
pub mod oracle;
pub mod reconstruct;
pub mod scalar;
pub mod setting;
pub mod tensor;

pub use error::{FmdError, Result};
pub use setting::DesignSetting;
pub use tensor::{HookeTensor, SymTensor2};
