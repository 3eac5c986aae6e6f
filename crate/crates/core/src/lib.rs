pub mod asymptotics;
pub mod cli;
pub mod descent;
pub mod expr;
pub mod geometry;
pub mod kkt;
pub mod pareto;
pub mod subdiff_point;
