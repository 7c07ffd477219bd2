pub mod expr;
pub mod exterior;
pub mod check;
pub mod quadrature;
pub mod sampling;
pub mod frenet;
pub mod poisson;
pub mod dynamics;
pub mod halphen;
pub mod cli;
