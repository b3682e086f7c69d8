#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::manual_is_multiple_of)]

pub mod ensemble;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod library;
pub mod pddo;
pub mod pipeline;
pub mod plot;
pub mod regression;
pub mod report;
pub mod sim;

pub use error::{Error, Result};
