//! Truncated Fock-space model of the two-dimensional charged free boson and
//! its chiral vertex operators, with numerical checks of the perturbed
//! de Sitter and Virasoro generators built from them.
//!
//! Everything is generic over a [`Scalar`]; the aliases at the bottom of this
//! file fix the three supported arithmetic modes.

pub mod algebra;
pub mod desitter;
pub mod diagnostics;
pub mod fock;
pub mod heisenberg;
pub mod io;
pub mod scalar;
pub mod twodim;
pub mod vertex;
pub mod virasoro;

pub use desitter::{
    explore_d_half, verify_commutativity, verify_lorentz, verify_virasoro_c0, CheckConfig, DesitterError, Evaluator,
    Family, GeneratorExpr, PerturbedGenerator, RelationReport, ReportRow, Verdict, WeakCommutator,
};
pub use diagnostics::{loglog_slope, tail_budget, DiagnosticsError, TailBudget};
pub use fock::{
    basis_up_to, enumerate_basis, gram, partitions_of, AnyState, FockError, FockSpace, Partition, SectorKey,
    SectorState, SparseState, TensorKey, TensorState, Truncation,
};
pub use heisenberg::{apply_current, apply_current_tensor, Side};
pub use scalar::{ArithmeticContext, ArithmeticMode, Param, Scalar, ScalarError};
pub use twodim::{flip, partial_sum_norm_series, sign_automorphism, TailReport, TimeZeroField, TimeZeroMode};
pub use vertex::{vacuum_mode_norm_sq, ChargeShift, ESign, VertexError, VertexField};
pub use virasoro::{LorentzGenerator, Sugawara, SugawaraFault};

/// Exact rationals.
pub type Rational = num_rational::BigRational;
/// Exact Gaussian rationals `p + iq`.
pub type GaussRational = num_complex::Complex<Rational>;
/// Double-precision complex floats.
pub type Complex64 = num_complex::Complex64;

pub type ExactSpace = FockSpace<Rational>;
pub type GaussianSpace = FockSpace<GaussRational>;
pub type FloatSpace = FockSpace<Complex64>;
pub type ExactVertexField = VertexField<Rational>;
pub type GaussianVertexField = VertexField<GaussRational>;
pub type FloatVertexField = VertexField<Complex64>;
