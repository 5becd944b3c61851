//! Linear algebra used by the assembly, solve and stability stages.

pub mod eigen;
pub mod kkt;
pub mod ldlt;
pub mod skyline;
pub mod sparse;

pub use eigen::{count_near_zero, generalized_eigenvalues, symmetric_eigenvalues, KernelBasis};
pub use kkt::{KktSolver, Method, SymmetricSolver, DENSE_LIMIT, PIVOT_TOL};
pub use ldlt::{DenseLdlt, PivotStats};
pub use sparse::{CsrMatrix, TripletBuilder};
