//! Restarted, left-preconditioned GMRES over sparse CSR matrices, generic
//! over floating-point precision.
//!
//! The library pairs a high-precision outer refinement loop with restart
//! cycles that may run in reduced precision, ILU(0) preconditioning,
//! pluggable Gram-Schmidt orthogonalization, several restart-initiation
//! policies (including an orthogonality-loss monitor), and CSV convergence
//! tracing for experiment reproduction.

pub mod error;
pub mod gmres;
pub mod ilu0;
pub mod matrix_market;
pub mod restart;
pub mod scalar;
pub mod sparse;
pub mod trace;

pub use error::{Error, Result};
pub use gmres::{
    gmres_solve, GmresConfig, GmresOutcome, OrthScheme, PrecisionAssignment, PrecondKind,
    SolveStats, SolveStatus,
};
pub use restart::{NormKind, RestartPolicy, SMatrixMonitor};
pub use scalar::{Scalar, Width};
pub use sparse::{backward_error, estimate_bytes, gen_convdiff2d, CsrMatrix, MemoryMode};
pub use trace::{read_csv, write_csv, ConvergenceTrace, TraceEvent, TraceRecord};
