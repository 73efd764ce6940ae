pub mod bht;
pub mod bounds;
pub mod error;
pub mod expurgation;
pub mod macsim;
pub mod quantizer;
pub mod regions;
pub mod report;
pub mod wringing;

pub use error::{Error, Result};
