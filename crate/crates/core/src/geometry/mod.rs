pub mod diffeo;
pub mod fields;
pub mod grid;
pub mod region;

pub use diffeo::{pullback, Diffeomorphism};
pub use fields::{metric_norm, Bump, Mat2, MetricField, PotentialField};
pub use grid::{build_grid, DomainSpec, Grid, GridFunction};
pub use region::Region;
