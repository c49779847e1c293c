//! A multidimensional learned index over Z-order keys whose root model also
//! answers cardinality estimation queries.

pub mod armodel;
pub mod cardest;
mod codec;
pub mod data;
pub mod error;
pub mod index;
pub mod zorder;

pub use error::{Error, Result};
pub use zorder::{BitSpec, Interval, QueryBox, ZKey, ZRegion};
