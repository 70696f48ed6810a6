//! Graph-spectral toolkit built around the Bakry–Émery Laplacian
//! `L_μ = D_μ − A_μ`: discrete calculus on graphs, a dense symmetric
//! eigensolver, Chebyshev filtering, a small reverse-mode differentiation
//! tape, μ-ChebNet models and synthetic long-range benchmark tasks.

pub mod autodiff;
pub mod be;
pub mod chebyshev;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod matrix;
pub mod models;
pub mod operator;
pub mod spectral;
pub mod tasks;
pub mod verify;

pub use be::{BeOperator, Normalization, Potential};
pub use error::{Error, Result};
pub use graph::Graph;
pub use matrix::Matrix;
pub use operator::Operator;
