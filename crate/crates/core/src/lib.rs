//! Raman quantum memory for light carrying orbital angular momentum.
//!
//! The crate covers the transverse mode geometry ([`modes`]), the triple-mode
//! overlaps that set the coupling of each OAM channel ([`overlap`]), the
//! closed-form write/read kernels ([`kernels`]), a direct integrator of the
//! field-coherence equations used as an independent check ([`dynamics`]), and
//! whole-cycle analysis ([`memory_cycle`]). Output formats live in [`io`].
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*F64`
//! aliases below name the double-precision instantiations.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod io;
pub mod kernels;
pub mod memory_cycle;
pub mod modes;
pub mod overlap;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use kernels::{GridSpec, MemoryParams};
pub use memory_cycle::{CycleReport, Engine};
pub use modes::{AreaConvention, ModeIndex};
pub use overlap::{ChiNormalization, Drive};
pub use scalar::{Cplx, Real};

pub type BeamGeometryF64 = modes::BeamGeometry<f64>;
pub type CellGeometryF64 = modes::CellGeometry<f64>;
pub type OverlapRecordF64 = overlap::OverlapRecord<f64>;
pub type MemoryParamsF64 = kernels::MemoryParams<f64>;
pub type KernelGridF64 = kernels::KernelGrid<f64>;
pub type PulseProfileF64 = dynamics::PulseProfile<f64>;
pub type FieldStateF64 = dynamics::FieldState<f64>;
pub type SingularSpectrumF64 = memory_cycle::SingularSpectrum<f64>;
pub type CycleReportF64 = memory_cycle::CycleReport<f64>;
pub type CycleSetupF64 = memory_cycle::CycleSetup<f64>;
