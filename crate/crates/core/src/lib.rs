pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod formula;
pub mod harness;
pub mod imputation;
pub mod numerics;
pub mod pooling;
