//! Hardening transforms: decoy injection, rare-construct substitution and
//! identifier obfuscation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::fixes::receiver_chain;
use super::lexer::{is_identifier, is_keyword, lex, TokenKind, TokenStream};
use super::preprocess::unique_top_level_body;
use super::scan::{contracts, functions};
use super::{splice, SolTxError, ASM_SEND_TEMPLATE, ASM_TRANSFER_TEMPLATE};
use crate::template::render;

/// Lookup of Solidity snippet templates by id.
pub trait TemplateSource {
    fn template(&self, id: &str) -> Option<String>;
}

impl TemplateSource for HashMap<String, String> {
    fn template(&self, id: &str) -> Option<String> {
        self.get(id).cloned()
    }
}

impl TemplateSource for BTreeMap<String, String> {
    fn template(&self, id: &str) -> Option<String> {
        self.get(id).cloned()
    }
}

/// Inserts the decoy template `decoy_id` before the closing brace of
/// contract `anchor`.
///
/// Names declared by the template get a `_v<N>` suffix (N >= 2) when any of
/// them already occurs in the source.
pub fn inject_decoy(
    source: &str,
    decoy_id: &str,
    anchor: &str,
    templates: &dyn TemplateSource,
) -> Result<String, SolTxError> {
    let template = templates
        .template(decoy_id)
        .ok_or_else(|| SolTxError::UnknownTemplate(decoy_id.to_string()))?;
    let ts = lex(source)?;
    let contract = contracts(&ts)
        .into_iter()
        .find(|c| c.kind == "contract" && c.name == anchor)
        .ok_or_else(|| SolTxError::ContractNotFound(anchor.to_string()))?;

    let existing: BTreeSet<&str> = ts
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text)
        .collect();
    let tts = lex(&template)?;
    let declared = declared_names(&tts);

    let fragment = if declared.iter().any(|d| existing.contains(d.as_str())) {
        let n = (2..)
            .find(|n| {
                declared
                    .iter()
                    .all(|d| !existing.contains(format!("{d}_v{n}").as_str()))
            })
            .expect("unbounded search");
        let edits = tts
            .iter()
            .filter(|t| t.kind == TokenKind::Identifier && declared.contains(t.text))
            .map(|t| (t.range(), format!("{}_v{n}", t.text)))
            .collect();
        splice(&template, edits)
    } else {
        template.clone()
    };

    let indented: String = fragment
        .trim()
        .lines()
        .map(|l| {
            if l.trim().is_empty() {
                "\n".to_string()
            } else {
                format!("    {l}\n")
            }
        })
        .collect();
    let at = ts.tokens[contract.body_close].span.0;
    Ok(splice(source, vec![(at..at, format!("\n{indented}"))]))
}

/// Names a template declares at its top level.
fn declared_names(ts: &TokenStream<'_>) -> BTreeSet<String> {
    let depths = ts.brace_depths();
    let mut names = BTreeSet::new();
    let mut paren = 0usize;
    for (i, t) in ts.iter().enumerate() {
        if t.is_punct("(") {
            paren += 1;
        } else if t.is_punct(")") {
            paren = paren.saturating_sub(1);
        }
        if depths[i] != 0 {
            continue;
        }
        if t.kind == TokenKind::Keyword
            && matches!(
                t.text,
                "function" | "modifier" | "event" | "error" | "struct" | "enum"
            )
        {
            if let Some(n) = ts.next_code(i + 1) {
                if ts.tokens[n].kind == TokenKind::Identifier {
                    names.insert(ts.tokens[n].text.to_string());
                }
            }
        } else if t.kind == TokenKind::Identifier && paren == 0 {
            // State variable: `<type> [modifiers] name (= ...)? ;`
            let ends_decl = ts
                .next_code(i + 1)
                .is_some_and(|n| ts.tokens[n].is_punct(";") || ts.tokens[n].is_punct("="));
            let has_type = ts.prev_code(i).is_some_and(|p| {
                let prev = &ts.tokens[p];
                prev.kind == TokenKind::Keyword
                    || prev.kind == TokenKind::Identifier
                    || prev.is_punct(")")
                    || prev.is_punct("]")
            });
            if ends_decl && has_type {
                names.insert(t.text.to_string());
            }
        }
    }
    names
}

/// Replaces each `E.transfer(V);` / `E.send(V);` statement in `function_name`
/// with the inline-assembly call template.
///
/// The templates forward all remaining gas instead of the 2300 stipend.
pub fn apply_rare_construct(
    source: &str,
    function_name: &str,
    templates: &dyn TemplateSource,
) -> Result<String, SolTxError> {
    let ts = lex(source)?;
    let sites = functions(&ts);
    let (open, close) = unique_top_level_body(&ts, &sites, function_name)?;

    let mut edits = Vec::new();
    for dot in open + 1..close {
        if !ts.tokens[dot].is_punct(".") {
            continue;
        }
        let Some(site) = transfer_statement(&ts, dot, open) else {
            continue;
        };
        let id = match site.member {
            "transfer" => ASM_TRANSFER_TEMPLATE,
            _ => ASM_SEND_TEMPLATE,
        };
        let template = templates
            .template(id)
            .ok_or_else(|| SolTxError::UnknownTemplate(id.to_string()))?;
        let suffix = edits.len().to_string();
        let replacement = render(
            template.trim(),
            &[
                ("recipient", &source[site.receiver.clone()]),
                ("amount", source[site.amount.clone()].trim()),
                ("id", &suffix),
            ],
        );
        edits.push((site.statement, replacement));
    }
    if edits.is_empty() {
        return Err(SolTxError::NoTransferSite(function_name.to_string()));
    }
    Ok(splice(source, edits))
}

struct TransferStatement<'a> {
    member: &'a str,
    statement: std::ops::Range<usize>,
    receiver: std::ops::Range<usize>,
    amount: std::ops::Range<usize>,
}

fn transfer_statement<'a>(
    ts: &TokenStream<'a>,
    dot: usize,
    body_open: usize,
) -> Option<TransferStatement<'a>> {
    let member = ts.next_code(dot + 1)?;
    let member_tok = &ts.tokens[member];
    if !(member_tok.is(TokenKind::Identifier, "transfer")
        || member_tok.is(TokenKind::Identifier, "send"))
    {
        return None;
    }
    let lparen = ts.next_code(member + 1).filter(|&p| ts.tokens[p].is_punct("("))?;
    let rparen = ts.matching_close(lparen)?;
    let semi = ts.next_code(rparen + 1).filter(|&s| ts.tokens[s].is_punct(";"))?;

    // Exactly one argument.
    let mut depth = 0usize;
    for t in &ts.tokens[lparen + 1..rparen] {
        match t.text {
            "(" | "[" | "{" if t.kind == TokenKind::Punct => depth += 1,
            ")" | "]" | "}" if t.kind == TokenKind::Punct => depth = depth.saturating_sub(1),
            "," if t.kind == TokenKind::Punct && depth == 0 => return None,
            _ => {}
        }
    }
    ts.next_code(lparen + 1).filter(|&a| a < rparen)?;

    let (first, last) = receiver_chain(ts, dot)?;
    if first <= body_open {
        return None;
    }
    let prev = ts.prev_code(first)?;
    let prev_tok = &ts.tokens[prev];
    let at_statement_start = matches!(prev_tok.text, "{" | "}" | ";")
        && prev_tok.kind == TokenKind::Punct
        || prev_tok.is_keyword("else")
        || (prev_tok.is_punct(")")
            && ts
                .matching_open(prev)
                .and_then(|o| ts.prev_code(o))
                .is_some_and(|k| {
                    let k = &ts.tokens[k];
                    k.is_keyword("if") || k.is_keyword("while") || k.is_keyword("for")
                }));
    if !at_statement_start {
        return None;
    }
    Some(TransferStatement {
        member: member_tok.text,
        statement: ts.tokens[first].span.0..ts.tokens[semi].span.1,
        receiver: ts.tokens[first].span.0..ts.tokens[last].span.1,
        amount: ts.tokens[lparen].span.1..ts.tokens[rparen].span.0,
    })
}

/// Consistently renames identifiers outside comments and strings.
pub fn obfuscate_pattern(
    source: &str,
    rename_map: &BTreeMap<String, String>,
) -> Result<String, SolTxError> {
    let ts = lex(source)?;
    let existing: BTreeSet<&str> = ts
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text)
        .collect();

    let mut targets = BTreeSet::new();
    for (from, to) in rename_map {
        if is_keyword(from) {
            return Err(SolTxError::KeywordRename(from.clone()));
        }
        if is_keyword(to) {
            return Err(SolTxError::KeywordRename(to.clone()));
        }
        if !is_identifier(to) {
            return Err(SolTxError::InvalidIdentifier(to.clone()));
        }
        if !existing.contains(from.as_str()) {
            return Err(SolTxError::IdentifierNotFound(from.clone()));
        }
        if from != to && existing.contains(to.as_str()) || !targets.insert(to.as_str()) {
            return Err(SolTxError::CollisionDetected(to.clone()));
        }
    }

    let edits = ts
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .filter_map(|t| rename_map.get(t.text).map(|to| (t.range(), to.clone())))
        .collect();
    Ok(splice(source, edits))
}
