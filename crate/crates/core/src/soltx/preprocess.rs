//! Contract preprocessing: comment stripping, pragma migration and
//! `unchecked` wrapping of arithmetic functions.

use super::lexer::{lex, TokenKind, TokenStream};
use super::scan::{functions, CallableKind};
use super::{splice, SolTxError};

/// Removes comments and collapses runs of blank lines to a single one.
///
/// Block comments become one space so neighbouring tokens cannot glue.
pub fn strip_comments(source: &str) -> Result<String, SolTxError> {
    let ts = lex(source)?;
    let mut out = String::with_capacity(source.len());
    for t in ts.iter() {
        match t.kind {
            TokenKind::LineComment => {}
            TokenKind::BlockComment => out.push(' '),
            _ => out.push_str(t.text),
        }
    }
    Ok(collapse_blank_runs(&out))
}

fn collapse_blank_runs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut prev_blank = false;
    for line in text.split_inclusive('\n') {
        let blank = line.trim().is_empty() && line.ends_with('\n');
        if blank && prev_blank {
            continue;
        }
        prev_blank = blank;
        out.push_str(line);
    }
    out
}

fn validate_version(v: &str) -> Result<(), SolTxError> {
    let parts: Vec<_> = v.split('.').collect();
    let ok = parts.len() == 3
        && parts
            .iter()
            .all(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()));
    if ok {
        Ok(())
    } else {
        Err(SolTxError::InvalidVersion(v.to_string()))
    }
}

/// Rewrites every `pragma solidity ...;` to pin `target_version`, inserting
/// one after the SPDX line (or at the top) when the file has none.
pub fn migrate_pragma(source: &str, target_version: &str) -> Result<String, SolTxError> {
    validate_version(target_version)?;
    let ts = lex(source)?;
    let replacement = format!("pragma solidity {target_version};");

    let mut edits = Vec::new();
    for (i, t) in ts.iter().enumerate() {
        if !t.is_keyword("pragma") {
            continue;
        }
        let is_solidity = ts
            .next_code(i + 1)
            .is_some_and(|n| ts.tokens[n].is(TokenKind::Identifier, "solidity"));
        if !is_solidity {
            continue;
        }
        let Some(semi) = (i + 1..ts.len()).find(|&j| ts.tokens[j].is_punct(";")) else {
            continue;
        };
        edits.push((t.span.0..ts.tokens[semi].span.1, replacement.clone()));
    }

    if edits.is_empty() {
        return Ok(insert_pragma(source, &ts, &replacement));
    }
    Ok(splice(source, edits))
}

fn insert_pragma(source: &str, ts: &TokenStream<'_>, pragma: &str) -> String {
    let license = ts
        .iter()
        .find(|t| t.kind == TokenKind::LineComment && t.text.contains("SPDX-License-Identifier"));
    match license {
        Some(lic) => {
            let at = lic.span.1;
            if source[at..].starts_with('\n') {
                splice(source, vec![(at + 1..at + 1, format!("{pragma}\n"))])
            } else if source[at..].starts_with("\r\n") {
                splice(source, vec![(at + 2..at + 2, format!("{pragma}\r\n"))])
            } else {
                splice(source, vec![(at..at, format!("\n{pragma}\n"))])
            }
        }
        None => format!("{pragma}\n{source}"),
    }
}

/// Wraps the bodies of the named top-level functions in `unchecked { ... }`.
///
/// Bodies that already open with an `unchecked` block are left alone.
pub fn wrap_unchecked<S: AsRef<str>>(
    source: &str,
    function_names: &[S],
) -> Result<String, SolTxError> {
    let ts = lex(source)?;
    let sites = functions(&ts);
    let mut edits = Vec::new();
    let mut seen = Vec::new();

    for name in function_names {
        let name = name.as_ref();
        if seen.contains(&name) {
            continue;
        }
        seen.push(name);

        let (open, close) = unique_top_level_body(&ts, &sites, name)?;
        let first = ts.next_code(open + 1);
        let already = first.is_some_and(|f| {
            ts.tokens[f].is_keyword("unchecked")
                && ts
                    .next_code(f + 1)
                    .is_some_and(|n| ts.tokens[n].is_punct("{"))
        });
        if already {
            continue;
        }
        let open_tok = &ts.tokens[open];
        let close_tok = &ts.tokens[close];
        edits.push((open_tok.range(), "{ unchecked {".to_string()));
        edits.push((close_tok.range(), "} }".to_string()));
    }
    Ok(splice(source, edits))
}

/// Body of the single function `name` declared directly inside a contract.
pub(crate) fn unique_top_level_body(
    ts: &TokenStream<'_>,
    sites: &[super::FunctionSite],
    name: &str,
) -> Result<(usize, usize), SolTxError> {
    let matches: Vec<_> = sites
        .iter()
        .filter(|f| f.kind == CallableKind::Function && f.depth == 1 && f.name == name)
        .filter(|f| {
            // Declarations without a body cannot be rewritten.
            f.body.is_some() || ts.tokens.get(f.header.1).is_some_and(|t| t.is_punct("{"))
        })
        .collect();
    match matches.as_slice() {
        [] => Err(SolTxError::FunctionNotFound(name.to_string())),
        [one] => one
            .body
            .ok_or_else(|| SolTxError::UnbalancedBody(name.to_string())),
        _ => Err(SolTxError::AmbiguousFunction(name.to_string())),
    }
}
