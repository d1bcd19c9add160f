use super::{GenError, ScriptKind, ScriptPair};
use crate::soltx;

struct Block<'a> {
    lang: &'a str,
    body: String,
}

fn fence_of(line: &str) -> Option<(char, usize, &str)> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let ch = rest.chars().next().filter(|c| matches!(c, '`' | '~'))?;
    let n = rest.len() - rest.trim_start_matches(ch).len();
    (n >= 3).then(|| (ch, n, rest[n..].trim()))
}

/// Fenced code blocks in order. An unclosed final block runs to the end.
fn blocks(raw: &str) -> Vec<Block<'_>> {
    let mut out = Vec::new();
    let mut open: Option<(char, usize, &str, Vec<&str>)> = None;
    for line in raw.split('\n') {
        let bare = line.strip_suffix('\r').unwrap_or(line);
        match &mut open {
            None => {
                if let Some((ch, n, info)) = fence_of(bare) {
                    let lang = info.split_whitespace().next().unwrap_or("");
                    open = Some((ch, n, lang, Vec::new()));
                }
            }
            Some((ch, n, lang, lines)) => match fence_of(bare) {
                Some((c, m, info)) if c == *ch && m >= *n && info.is_empty() => {
                    out.push(Block {
                        lang,
                        body: lines.join("\n"),
                    });
                    open = None;
                }
                _ => lines.push(line),
            },
        }
    }
    if let Some((_, _, lang, lines)) = open {
        out.push(Block {
            lang,
            body: lines.join("\n"),
        });
    }
    out
}

fn is_solidity_block(lang: &str) -> bool {
    lang.is_empty() || lang.eq_ignore_ascii_case("solidity") || lang.eq_ignore_ascii_case("sol")
}

/// Splits off a leading `// FILE: <name>` line.
fn file_header(body: &str) -> (Option<&str>, &str) {
    let (first, rest) = body.split_once('\n').unwrap_or((body, ""));
    let name = first
        .trim()
        .strip_prefix("//")
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix("FILE:"))
        .map(str::trim);
    match name {
        Some(n) if !n.is_empty() => (Some(n), rest),
        _ => (None, body),
    }
}

/// Pulls the exploit and test scripts out of a model response.
///
/// Blocks headed `// FILE: <name>` are routed by name (`*.t.sol` is the
/// test); unlabeled blocks fill the remaining slots in order, exploit first.
pub fn extract_scripts(raw: &str) -> Result<ScriptPair, GenError> {
    let all = blocks(raw);
    if all.is_empty() {
        return Err(GenError::NoCodeBlocks);
    }
    let mut exploit: Option<String> = None;
    let mut test: Option<String> = None;
    let mut unlabeled = Vec::new();
    for b in all.iter().filter(|b| is_solidity_block(b.lang)) {
        match file_header(&b.body) {
            (Some(name), body) if name.ends_with(".t.sol") => {
                test.get_or_insert_with(|| body.to_string());
            }
            (Some(_), body) => {
                exploit.get_or_insert_with(|| body.to_string());
            }
            (None, body) if !body.trim().is_empty() => unlabeled.push(body.to_string()),
            (None, _) => {}
        }
    }
    let mut unlabeled = unlabeled.into_iter();
    let exploit = exploit.or_else(|| unlabeled.next());
    let test = test.or_else(|| unlabeled.next());
    let (exploit, test) = match (exploit, test) {
        (Some(e), Some(t)) => (e, t),
        (None, None) => return Err(GenError::NoCodeBlocks),
        _ => return Err(GenError::OnlyOneScript),
    };
    for (which, src) in [(ScriptKind::Exploit, &exploit), (ScriptKind::Test, &test)] {
        if src.trim().is_empty() {
            return Err(GenError::UnlexableScript {
                which,
                reason: "empty script".into(),
            });
        }
        soltx::lex(src).map_err(|e| GenError::UnlexableScript {
            which,
            reason: e.to_string(),
        })?;
    }
    Ok(ScriptPair {
        exploit_source: exploit,
        test_source: test,
    })
}

/// Canonical two-block rendering; `extract_scripts` inverts it.
pub fn render_pair(pair: &ScriptPair) -> String {
    format!(
        "```solidity\n// FILE: Exploit.sol\n{}\n```\n\n```solidity\n// FILE: Exploit.t.sol\n{}\n```\n",
        pair.exploit_source, pair.test_source
    )
}
