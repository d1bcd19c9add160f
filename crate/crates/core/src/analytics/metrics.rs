use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::soltx::{self, SolTxError, TokenKind, TokenStream};

/// Source-level features of one contract file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralMetrics {
    pub nsloc: usize,
    pub complexity_score: usize,
    pub external_calls: usize,
    pub inheritance_depth: usize,
    pub has_inline_assembly: bool,
    pub has_payable_func: bool,
}

const BRANCH_KEYWORDS: [&str; 5] = ["if", "for", "while", "do", "catch"];
const BRANCH_PUNCTS: [&str; 3] = ["?", "&&", "||"];
const CALL_MEMBERS: [&str; 5] = ["call", "delegatecall", "staticcall", "send", "transfer"];

/// Non-blank lines once comments are removed.
pub fn nsloc(source: &str) -> Result<usize, SolTxError> {
    Ok(soltx::strip_comments(source)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .count())
}

/// Sum over callables with a body of
/// `1 + branching tokens + deepest brace nesting inside the body`.
fn complexity(ts: &TokenStream<'_>) -> usize {
    soltx::functions(ts)
        .iter()
        .filter_map(|f| f.body)
        .map(|(open, close)| {
            let mut branches = 0;
            let mut depth = 0usize;
            let mut max_depth = 0usize;
            for t in &ts.tokens[open + 1..close] {
                match t.kind {
                    TokenKind::Keyword if BRANCH_KEYWORDS.contains(&t.text) => branches += 1,
                    TokenKind::Punct if BRANCH_PUNCTS.contains(&t.text) => branches += 1,
                    TokenKind::Punct if t.text == "{" => {
                        depth += 1;
                        max_depth = max_depth.max(depth);
                    }
                    TokenKind::Punct if t.text == "}" => depth = depth.saturating_sub(1),
                    _ => {}
                }
            }
            1 + branches + max_depth
        })
        .sum()
}

/// Member accesses `.call`, `.delegatecall`, `.staticcall`, `.send`, `.transfer`.
fn external_calls(ts: &TokenStream<'_>) -> usize {
    ts.tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_punct("."))
        .filter(|(i, _)| {
            ts.next_code(i + 1)
                .is_some_and(|j| CALL_MEMBERS.contains(&ts.tokens[j].text))
        })
        .count()
}

/// Longest inheritance chain among contracts declared in the file; at least 1.
fn inheritance_depth(ts: &TokenStream<'_>) -> usize {
    let sites = soltx::contracts(ts);
    let parents: HashMap<&str, &[String]> = sites
        .iter()
        .map(|c| (c.name.as_str(), c.parents.as_slice()))
        .collect();
    fn depth<'a>(
        name: &'a str,
        parents: &HashMap<&'a str, &'a [String]>,
        memo: &mut HashMap<&'a str, usize>,
        visiting: &mut Vec<&'a str>,
    ) -> usize {
        if let Some(&d) = memo.get(name) {
            return d;
        }
        if visiting.contains(&name) {
            return 0;
        }
        visiting.push(name);
        let d = 1 + parents[name]
            .iter()
            .filter(|p| parents.contains_key(p.as_str()))
            .map(|p| depth(p.as_str(), parents, memo, visiting))
            .max()
            .unwrap_or(0);
        visiting.pop();
        memo.insert(name, d);
        d
    }
    let mut memo = HashMap::new();
    sites
        .iter()
        .map(|c| depth(&c.name, &parents, &mut memo, &mut Vec::new()))
        .max()
        .unwrap_or(1)
        .max(1)
}

fn has_payable_func(ts: &TokenStream<'_>) -> bool {
    soltx::functions(ts).iter().any(|f| {
        let mut parens = 0i32;
        ts.tokens[f.header.0..f.header.1].iter().any(|t| {
            if t.is_punct("(") {
                parens += 1;
            } else if t.is_punct(")") {
                parens -= 1;
            }
            parens == 0 && t.kind == TokenKind::Keyword && t.text == "payable"
        })
    })
}

pub fn compute_metrics(source: &str) -> Result<StructuralMetrics, SolTxError> {
    let ts = soltx::lex(source)?;
    Ok(StructuralMetrics {
        nsloc: nsloc(source)?,
        complexity_score: complexity(&ts),
        external_calls: external_calls(&ts),
        inheritance_depth: inheritance_depth(&ts),
        has_inline_assembly: ts.iter().any(|t| t.kind == TokenKind::Keyword && t.text == "assembly"),
        has_payable_func: has_payable_func(&ts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_call_site() {
        let src = "contract A { function f(address to, uint v) public { (bool ok, ) = to.call{value: v}(\"\"); require(ok); } }";
        assert_eq!(compute_metrics(src).unwrap().external_calls, 1);
    }

    #[test]
    fn calls_in_strings_and_comments_do_not_count() {
        let src = "contract A { string s = \"a.call()\"; // b.send(1)\n function f() public {} }";
        assert_eq!(compute_metrics(src).unwrap().external_calls, 0);
    }

    #[test]
    fn inheritance_chain() {
        assert_eq!(compute_metrics("contract A {}\ncontract B is A {}").unwrap().inheritance_depth, 2);
        assert_eq!(compute_metrics("contract A {}").unwrap().inheritance_depth, 1);
        assert_eq!(
            compute_metrics("contract A {}\ncontract B is A {}\ncontract C is B, Ownable {}")
                .unwrap()
                .inheritance_depth,
            3
        );
        assert_eq!(compute_metrics("contract B is External {}").unwrap().inheritance_depth, 1);
    }

    #[test]
    fn complexity_composite() {
        // f: 1 + if + && + depth 1 = 4; g: 1
        let src = "contract A {\n function f(uint x) public { if (x > 1 && x < 9) { x = 0; } }\n function g() public {}\n}";
        assert_eq!(compute_metrics(src).unwrap().complexity_score, 5);
    }

    #[test]
    fn flags() {
        let m = compute_metrics(
            "contract A { function f() public payable { assembly { let x := 1 } } function g(address payable a) public {} }",
        )
        .unwrap();
        assert!(m.has_inline_assembly);
        assert!(m.has_payable_func);
        let m = compute_metrics("contract A { function g(address payable a) public {} }").unwrap();
        assert!(!m.has_payable_func);
        assert!(!m.has_inline_assembly);
    }

    #[test]
    fn nsloc_ignores_comments_and_blanks() {
        let src = "// header\npragma solidity 0.8.26;\n\n/* block\n comment */\ncontract A {\n    uint x; // trailing\n}\n";
        assert_eq!(nsloc(src).unwrap(), 4);
    }
}
