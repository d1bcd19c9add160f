//! Token-level Solidity source engine.
//!
//! All transforms lex the input, locate their sites on the token stream and
//! splice replacement text at byte spans. Bytes outside the edited spans are
//! copied through untouched.

mod defense;
mod eip55;
mod fixes;
mod keccak;
mod lexer;
mod preprocess;
mod scan;

use thiserror::Error;

pub use defense::{apply_rare_construct, inject_decoy, obfuscate_pattern, TemplateSource};
pub use eip55::{is_checksummed, to_eip55};
pub use fixes::{insert_payable_casts, normalize_addresses};
pub use keccak::{keccak256, Digest256};
pub use lexer::{is_identifier, is_keyword, lex, Token, TokenKind, TokenStream};
pub use preprocess::{migrate_pragma, strip_comments, wrap_unchecked};
pub use scan::{contracts, functions, CallableKind, ContractSite, FunctionSite};

/// Template id of the inline-assembly replacement for `E.transfer(V);`.
pub const ASM_TRANSFER_TEMPLATE: &str = "asm_transfer";
/// Template id of the inline-assembly replacement for `E.send(V);`.
pub const ASM_SEND_TEMPLATE: &str = "asm_send";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolTxError {
    #[error("unterminated block comment at bytes {}..{}", span.0, span.1)]
    UnterminatedComment { span: (usize, usize) },
    #[error("unterminated string literal at bytes {}..{}", span.0, span.1)]
    UnterminatedString { span: (usize, usize) },
    #[error("not a 20-byte hex address: {0:?}")]
    NotAnAddress(String),
    #[error("invalid target version {0:?}, expected major.minor.patch")]
    InvalidVersion(String),
    #[error("function `{0}` not found")]
    FunctionNotFound(String),
    #[error("function `{0}` is defined more than once")]
    AmbiguousFunction(String),
    #[error("body of function `{0}` is not brace-balanced")]
    UnbalancedBody(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("contract `{0}` not found")]
    ContractNotFound(String),
    #[error("function `{0}` has no transfer/send statement")]
    NoTransferSite(String),
    #[error("renaming to `{0}` collides with an existing identifier")]
    CollisionDetected(String),
    #[error("`{0}` is a reserved keyword")]
    KeywordRename(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("identifier `{0}` does not occur in the source")]
    IdentifierNotFound(String),
}

/// Applies non-overlapping `(range, replacement)` edits to `source`.
pub(crate) fn splice(source: &str, mut edits: Vec<(std::ops::Range<usize>, String)>) -> String {
    edits.sort_by_key(|(r, _)| (r.start, r.end));
    let extra: usize = edits.iter().map(|(_, s)| s.len()).sum();
    let mut out = String::with_capacity(source.len() + extra);
    let mut cursor = 0;
    for (range, text) in edits {
        debug_assert!(range.start >= cursor, "overlapping edits");
        out.push_str(&source[cursor..range.start]);
        out.push_str(&text);
        cursor = range.end;
    }
    out.push_str(&source[cursor..]);
    out
}
