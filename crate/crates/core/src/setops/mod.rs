//! Set representations: zonotopes, halfspace polytopes, intervals and interval matrices.

mod interval;
mod polytope;
mod zonotope;

pub use interval::{Interval, IntervalMatrix};
pub use polytope::{BoxBounds, Polytope};
#[allow(unused_imports)]
pub(crate) use zonotope::hcat;
pub use zonotope::{Zonotope, SET_TOL};
