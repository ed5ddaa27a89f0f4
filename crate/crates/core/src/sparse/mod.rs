//! Sparse linear algebra: CSR storage, products, extraction, and direct solves.

mod csr;
pub mod dense;
mod lu;
mod mm;
mod ops;

pub use csr::{SparseMatrix, TripletBuilder};
pub use lu::{amd_ordering, factorize, factorize_with_order, Factorization, PIVOT_THRESHOLD, SINGULAR_TOLERANCE};
pub use mm::{read_matrix_market, write_matrix_market, write_vector_market, MatrixKind};
pub use ops::{block2x2, scale_rows_cols, submatrix, triple_product};
