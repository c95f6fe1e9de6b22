pub mod error;
pub mod modelcheck;
pub mod occupancy;
pub mod optim;
pub mod problem;
pub mod reach;
pub mod setops;
pub mod sim;
pub mod stl;
pub mod verify;

pub use error::{Error, Result};
