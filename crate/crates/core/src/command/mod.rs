//! Textual command language: parsing and dispatch against a [`Session`].
//!
//! [`Session`]: crate::controller::Session

mod dispatch;
mod parse;

pub use dispatch::{dispatch, execute, CommandError, ErrorBody, ParamType, Response, COMMANDS};
pub use parse::{parse, Command, ParseError, Value};
