//! Quasi group codes (QGC) and unionized quasi group codes (UQGC) over the
//! cyclic group Z_{p^r}.
//!
//! The crate covers exact group arithmetic, information measures over
//! Z_{p^r}-valued variables, robust typical sets, codebook construction, the
//! closed-form achievable rates for distributed source coding and computation
//! over a multiple-access channel, and Monte-Carlo runs of the corresponding
//! encoders and decoders at small block length.

pub mod codebook;
pub mod error;
pub mod group;
pub mod prob;
pub mod rate_regions;
pub mod simulate;
pub mod typicality;

pub use codebook::{QgcCodebook, QgcSpec, UqgcCodebook};
pub use error::{Error, Result};
pub use group::{GroupElement, GroupMatrix, GroupSpec, GroupVector};
pub use prob::{JointPmf, LayeredVariable, Pmf};
pub use typicality::{TypicalSet, TypicalityParams};
