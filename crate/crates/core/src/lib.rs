//! Spectrum/resolvent classification of one-dimensional discrete Schrödinger operators
//! `(H_v u)_n = u_{n+1} + u_{n−1} + v(n) u_n` through uniform hyperbolicity of the
//! transfer-matrix cocycle.
//!
//! Everything numerical is generic over [`Real`] (`f32`/`f64`); the aliases below fix `f64`
//! (and `f32` for the core linear-algebra types).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cocycle;
pub mod green;
pub mod lattice;
pub mod models;
pub mod operator;
pub mod scalar;
pub mod scanner;
pub mod sl2;
pub mod uhdetect;

pub use cocycle::{
    product, product_sequence, solution_from_vector, transfer, CocycleError, CocycleProduct, Descriptor,
    FnPotential, PotentialSource, SequencePotential, SharedSource,
};
pub use green::{apply, build_kernel, operator_norm_bound, verify_inverse, GreenError, GreenKernel};
pub use lattice::{Interval, Sequence};
pub use models::{hull_samples, make_source, shift, Family, HullSpec, ModelError, Phase};
pub use operator::{
    approx_eigenvector_from_bounded_solution, eigenvalues, min_support_length, weyl_defect, FiniteSection,
    OperatorError, WeylWitness,
};
pub use scalar::Real;
pub use scanner::{
    classify_energy, inclusion_check, scan, section_consistency, EnergyPoint, Label, ScanError, Settings,
    SpectrumReport,
};
pub use sl2::{Mat2, ProjPoint, Sl2Error, Svd2};
pub use uhdetect::{
    bounded_witness_search, certify, estimate_sections, growth_test, BoundedWitness, FailureReason, FailureReport,
    UHCertificate, UhError,
};

pub type Mat2F64 = Mat2<f64>;
pub type Mat2F32 = Mat2<f32>;
pub type ProjPointF64 = ProjPoint<f64>;
pub type ProjPointF32 = ProjPoint<f32>;
pub type CocycleProductF64 = CocycleProduct<f64>;
pub type CocycleProductF32 = CocycleProduct<f32>;
pub type SourceF64 = SharedSource<f64>;
pub type SourceF32 = SharedSource<f32>;
pub type SequenceF64 = Sequence<f64>;
pub type UHCertificateF64 = UHCertificate<f64>;
pub type BoundedWitnessF64 = BoundedWitness<f64>;
pub type WeylWitnessF64 = WeylWitness<f64>;
pub type FiniteSectionF64 = FiniteSection<f64>;
pub type GreenKernelF64 = GreenKernel<f64>;
pub type SpectrumReportF64 = SpectrumReport<f64>;
pub type SpectrumReportF32 = SpectrumReport<f32>;
