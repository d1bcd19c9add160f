//! Structural landmarks on a token stream: contract and function sites.

use super::lexer::{TokenKind, TokenStream};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractSite {
    /// `contract`, `library` or `interface`.
    pub kind: String,
    pub name: String,
    pub name_idx: usize,
    pub parents: Vec<String>,
    pub body_open: usize,
    pub body_close: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallableKind {
    Function,
    Constructor,
    Modifier,
    Fallback,
    Receive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSite {
    pub kind: CallableKind,
    pub name: String,
    /// Index of the introducing keyword.
    pub start_idx: usize,
    /// Tokens between the introducing keyword and the body (or `;`).
    pub header: (usize, usize),
    /// `{` and `}` of the body, if the callable has one.
    pub body: Option<(usize, usize)>,
    /// Brace depth of the introducing keyword; 1 means directly inside a contract.
    pub depth: usize,
}

pub fn contracts(ts: &TokenStream<'_>) -> Vec<ContractSite> {
    let mut out = Vec::new();
    for (i, t) in ts.iter().enumerate() {
        if !(t.is_keyword("contract") || t.is_keyword("library") || t.is_keyword("interface")) {
            continue;
        }
        let Some(name_idx) = ts.next_code(i + 1) else {
            continue;
        };
        if ts.tokens[name_idx].kind != TokenKind::Identifier {
            continue;
        }
        let mut parents = Vec::new();
        let mut paren = 0usize;
        let mut body_open = None;
        let mut j = name_idx + 1;
        while j < ts.len() {
            let tok = &ts.tokens[j];
            if tok.is_punct("(") {
                paren += 1;
            } else if tok.is_punct(")") {
                paren = paren.saturating_sub(1);
            } else if paren == 0 && tok.is_punct("{") {
                body_open = Some(j);
                break;
            } else if paren == 0 && tok.is_punct(";") {
                break;
            } else if paren == 0 && tok.kind == TokenKind::Identifier {
                let qualified = ts
                    .next_code(j + 1)
                    .is_some_and(|n| ts.tokens[n].is_punct("."));
                if !qualified {
                    parents.push(tok.text.to_string());
                }
            }
            j += 1;
        }
        let Some(body_open) = body_open else { continue };
        let Some(body_close) = ts.matching_close(body_open) else {
            continue;
        };
        out.push(ContractSite {
            kind: t.text.to_string(),
            name: ts.tokens[name_idx].text.to_string(),
            name_idx,
            parents,
            body_open,
            body_close,
        });
    }
    out
}

pub fn functions(ts: &TokenStream<'_>) -> Vec<FunctionSite> {
    let depths = ts.brace_depths();
    let mut out = Vec::new();
    for (i, t) in ts.iter().enumerate() {
        if t.kind != TokenKind::Keyword {
            continue;
        }
        let next = ts.next_code(i + 1);
        let next_tok = next.map(|n| &ts.tokens[n]);
        let (kind, name, header_start) = match t.text {
            "function" => match next_tok {
                Some(n) if n.kind == TokenKind::Identifier => {
                    (CallableKind::Function, n.text.to_string(), next.unwrap() + 1)
                }
                // Pre-0.6 unnamed fallback; function types are filtered below.
                Some(n) if n.is_punct("(") && depths[i] == 1 => {
                    (CallableKind::Fallback, "fallback".to_string(), i + 1)
                }
                _ => continue,
            },
            "modifier" => match next_tok {
                Some(n) if n.kind == TokenKind::Identifier => {
                    (CallableKind::Modifier, n.text.to_string(), next.unwrap() + 1)
                }
                _ => continue,
            },
            "constructor" | "fallback" | "receive" => {
                let opens_params = next_tok.is_some_and(|n| n.is_punct("("));
                let at_member_start = match ts.prev_code(i) {
                    None => true,
                    Some(p) => matches!(ts.tokens[p].text, "{" | "}" | ";"),
                };
                if !opens_params || !at_member_start {
                    continue;
                }
                let kind = match t.text {
                    "constructor" => CallableKind::Constructor,
                    "fallback" => CallableKind::Fallback,
                    _ => CallableKind::Receive,
                };
                (kind, t.text.to_string(), i + 1)
            }
            _ => continue,
        };

        let mut paren = 0usize;
        let mut end = None;
        let mut body = None;
        for j in header_start..ts.len() {
            let tok = &ts.tokens[j];
            if tok.is_punct("(") {
                paren += 1;
            } else if tok.is_punct(")") {
                if paren == 0 {
                    // A function type inside a parameter list.
                    end = Some(j);
                    break;
                }
                paren -= 1;
            } else if paren == 0 && tok.is_punct("{") {
                end = Some(j);
                body = ts.matching_close(j).map(|close| (j, close));
                break;
            } else if paren == 0 && (tok.is_punct(";") || tok.is_punct("}") || tok.is_punct(",")) {
                end = Some(j);
                break;
            }
        }
        if kind == CallableKind::Fallback && t.text == "function" && body.is_none() {
            continue;
        }
        out.push(FunctionSite {
            kind,
            name,
            start_idx: i,
            header: (header_start, end.unwrap_or(ts.len())),
            body,
            depth: depths[i],
        });
    }
    out
}
