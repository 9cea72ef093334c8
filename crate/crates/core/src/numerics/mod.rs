//! Linear algebra, regression solvers, spline bases and random streams.

pub mod logistic;
pub mod matrix;
pub mod rng;
pub mod spline;
pub mod wls;

pub use logistic::{expit, logistic_fit, LogisticFit};
pub use matrix::{DesignMatrix, HouseholderQr, Matrix};
pub use rng::{Law, RngStream, SeedMaterial};
pub use spline::{natural_spline_basis, NaturalSpline};
pub use wls::{wls_fit, LinearFit};
