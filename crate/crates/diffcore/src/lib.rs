//! Dense row-major matrices, a reverse-mode gradient tape over them, and
//! the Adam optimizer.
//!
//! The tape ([`Graph`]) records every operation as a node holding its
//! value. Calling [`Graph::backward`] on a 1×1 node walks the nodes in
//! reverse insertion order and accumulates gradients for every node that
//! depends on a parameter. Everything is generic over [`Real`] so the same
//! code runs in `f64` (default) or `f32`.
//!
//! ```
//! use diffcore::{Graph, Matrix};
//!
//! let mut g = Graph::<f64>::new();
//! let w = g.param(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
//! let sq = g.square(w).unwrap();
//! let loss = g.sum(sq).unwrap();
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(w).unwrap().data(), &[2.0, 4.0, 6.0, 8.0]);
//! ```

mod adam;
mod error;
mod graph;
mod matrix;
mod real;

pub use adam::{Adam, AdamConfig};
pub use error::DiffError;
pub use graph::{Gradients, Graph, Var};
pub use matrix::Matrix;
pub use real::Real;

/// Default guard used when dividing by a vector norm.
pub const NORM_EPS: f64 = 1e-12;
