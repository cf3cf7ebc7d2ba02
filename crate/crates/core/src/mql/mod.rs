//! The read-only SQL subset: lexer, parser, name resolution, canonical
//! rendering and typed parameter binding.

pub mod ast;
mod bind;
pub mod lexer;
mod parser;
mod render;
mod resolve;

pub use ast::*;
pub use bind::{bind_params, infer_types, BindError, BoundQuery, NoScreen, ParamScreen, ParamValue};
pub use lexer::{tokenize, Keyword, LexError, Token, TokenKind};
pub use render::{render, shape};

use crate::relstore::TableSchema;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("syntax error at offset {offset}: expected {}, found `{found}`", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("{0}")]
    Resolve(String),
}

impl ParseError {
    /// Byte offset of the problem, when it has one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Lex(e) => Some(e.offset()),
            ParseError::Syntax { offset, .. } => Some(*offset),
            ParseError::Resolve(_) => None,
        }
    }
}

/// Parses and resolves `text` against `schemas`.
pub fn parse(text: &str, schemas: &[TableSchema]) -> Result<QueryAst, ParseError> {
    resolve::resolve(parser::parse_syntax(text)?, schemas)
}
