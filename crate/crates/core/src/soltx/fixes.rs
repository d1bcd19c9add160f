//! Repairs for recurring defects in generated scripts: non-checksummed
//! address literals and missing `payable(...)` casts on value transfers.

use super::eip55::to_eip55;
use super::lexer::{lex, TokenKind, TokenStream};
use super::{splice, SolTxError};

/// Rewrites every address literal in code to its EIP-55 form.
///
/// Returns the new source and the number of literals that changed.
pub fn normalize_addresses(source: &str) -> Result<(String, usize), SolTxError> {
    let ts = lex(source)?;
    let mut edits = Vec::new();
    for t in ts.iter().filter(|t| t.kind == TokenKind::HexAddressLiteral) {
        let checksummed = to_eip55(t.text)?;
        if checksummed != t.text {
            edits.push((t.range(), checksummed));
        }
    }
    let count = edits.len();
    Ok((splice(source, edits), count))
}

/// Wraps the receiver of `.transfer(`, `.send(` and `.call{value:` in
/// `payable(...)` unless it already is one.
///
/// The receiver is the chain of identifiers, member accesses, index and call
/// groups directly left of the dot. Without type information this also
/// catches ERC-20 style `token.transfer(to, amount)`; a resulting compile
/// error goes back through the repair loop.
pub fn insert_payable_casts(source: &str) -> Result<(String, usize), SolTxError> {
    let ts = lex(source)?;
    let mut edits = Vec::new();
    for (dot, t) in ts.iter().enumerate() {
        if !t.is_punct(".") || !is_value_transfer(&ts, dot) {
            continue;
        }
        let Some((first, last)) = receiver_chain(&ts, dot) else {
            continue;
        };
        if already_payable(&ts, first, last) || ts.tokens[first].is_keyword("super") {
            continue;
        }
        let start = ts.tokens[first].span.0;
        let end = ts.tokens[last].span.1;
        edits.push((start..start, "payable(".to_string()));
        edits.push((end..end, ")".to_string()));
    }
    let count = edits.len() / 2;
    Ok((splice(source, edits), count))
}

fn is_value_transfer(ts: &TokenStream<'_>, dot: usize) -> bool {
    let Some(member) = ts.next_code(dot + 1) else {
        return false;
    };
    let m = &ts.tokens[member];
    if m.kind != TokenKind::Identifier {
        return false;
    }
    let after = ts.next_code(member + 1);
    match m.text {
        "transfer" | "send" => after.is_some_and(|a| ts.tokens[a].is_punct("(")),
        "call" => {
            let Some(brace) = after.filter(|&a| ts.tokens[a].is_punct("{")) else {
                return false;
            };
            let key = ts.next_code(brace + 1);
            let colon = key.and_then(|k| ts.next_code(k + 1));
            key.is_some_and(|k| ts.tokens[k].is(TokenKind::Identifier, "value"))
                && colon.is_some_and(|c| ts.tokens[c].is_punct(":"))
        }
        _ => false,
    }
}

fn is_cast_head(ts: &TokenStream<'_>, i: usize) -> bool {
    let t = &ts.tokens[i];
    match t.kind {
        TokenKind::Identifier => true,
        TokenKind::Keyword => matches!(t.text, "address" | "payable" | "this" | "super"),
        _ => false,
    }
}

/// First and last token index of the receiver expression left of `dot`.
pub(crate) fn receiver_chain(ts: &TokenStream<'_>, dot: usize) -> Option<(usize, usize)> {
    let last = ts.prev_code(dot)?;
    let mut cur = last;
    let mut first = None;
    loop {
        let tok = &ts.tokens[cur];
        if tok.is_punct(")") || tok.is_punct("]") {
            let open = ts.matching_open(cur)?;
            first = Some(open);
            match ts.prev_code(open) {
                Some(p) if ts.tokens[p].is_punct(")") || ts.tokens[p].is_punct("]") => cur = p,
                Some(p) if is_cast_head(ts, p) => cur = p,
                _ => break,
            }
            continue;
        }
        let plain_atom = tok.kind == TokenKind::Identifier
            || tok.is_keyword("this")
            || tok.is_keyword("super")
            || (first.is_some() && is_cast_head(ts, cur));
        if !plain_atom {
            break;
        }
        first = Some(cur);
        match ts.prev_code(cur) {
            Some(p) if ts.tokens[p].is_punct(".") => match ts.prev_code(p) {
                Some(pp) => cur = pp,
                None => break,
            },
            _ => break,
        }
    }
    first.map(|f| (f, last))
}

fn already_payable(ts: &TokenStream<'_>, first: usize, last: usize) -> bool {
    let head = &ts.tokens[first];
    if !head.is_keyword("payable") {
        return false;
    }
    if first == last {
        return true;
    }
    let Some(open) = ts.next_code(first + 1) else {
        return false;
    };
    ts.tokens[open].is_punct("(") && ts.matching_close(open) == Some(last)
}
