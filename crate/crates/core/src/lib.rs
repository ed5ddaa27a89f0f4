pub mod assembly;
pub mod coarse;
pub mod decomp;
pub mod error;
pub mod grid;
pub mod pipeline;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type DiscreteSystemF64 = assembly::DiscreteSystem<f64>;
pub type SparseMatrixF64 = sparse::SparseMatrix<f64>;
pub type FactorizationF64 = sparse::Factorization<f64>;
pub type EigenPencilF64 = coarse::EigenPencil<f64>;
pub type SubdomainSpectrumF64 = coarse::SubdomainSpectrum<f64>;
pub type CoarseSpaceF64 = coarse::CoarseSpace<f64>;
pub type PreconditionerF64 = solver::Preconditioner<f64>;
