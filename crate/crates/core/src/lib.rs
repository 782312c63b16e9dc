//! Colimits of finite presheaf diagrams and Van Kampen checking.

pub mod colimit;
pub mod diagram;
pub mod dot;
pub mod error;
pub mod fixtures;
pub mod gen;
pub mod io;
pub mod paths;
pub mod presheaf;
pub mod selftest;
pub mod semantics;
pub mod shape;
mod unionfind;
pub mod vk;

pub use error::{Error, Result, ValidationIssue, ValidationReport};
