pub mod bench_io;
pub mod cli;
pub mod error;
pub mod gramians;
pub mod linalg;
pub mod optimality;
pub mod reduction;
pub mod system;

pub use error::{Error, Result};
