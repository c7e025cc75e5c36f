pub mod error;
pub mod expr;
pub mod gain_margin;
pub mod margins;
pub mod mid;
pub mod model;
pub mod poly;
pub mod qp;
pub mod sim;
pub mod sturm;
pub mod tradeoff;

pub use error::{Error, Result};
