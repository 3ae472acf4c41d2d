#![no_std]
extern crate alloc;

pub mod error;
pub mod hard;
pub mod learners;
pub mod ldp;
pub mod model;
pub mod norms;
pub mod sdp;
pub mod zoo;

pub use error::{Error, Result};
