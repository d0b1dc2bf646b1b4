pub mod codec;
pub mod continuous_query;
pub mod error;
pub mod gtree;
pub mod harness;
mod partition;
pub mod road_graph;
pub mod snapshot_query;
pub mod vig_index;
pub mod visual;

pub use error::{Error, Result};
