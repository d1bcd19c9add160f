mod common;

use proptest::prelude::*;
use rex_core::soltx::{
    insert_payable_casts, is_checksummed, keccak256, lex, normalize_addresses, strip_comments,
    to_eip55, TokenKind,
};
use sha3::Digest;

#[test]
fn corpus_properties() {
    common::checks::lexer_and_transform_properties().unwrap();
}

#[test]
fn keccak_and_eip55_oracles() {
    common::checks::keccak_matches_oracle().unwrap();
    common::checks::eip55_vectors_and_properties().unwrap();
    for v in common::checks::EIP55_VECTORS {
        assert!(is_checksummed(v));
        assert!(!is_checksummed(&v.to_ascii_lowercase()));
    }
}

const FRAGMENTS: &[&str] = &[
    "contract C { ",
    "}",
    "function f(address a) public { ",
    "a.transfer(1);",
    "msg.sender.send(2);",
    "to.call{value: 3}(\"\");",
    "payable(x).transfer(4);",
    "address constant A = 0x5aaeb6053f3e94c9b9a09f33669435e7ef1beaed;",
    "\"0xfb6916095ca1df60bb79ce92ce3ea74c37c5d359 x.transfer(1)\"",
    "'it''s'",
    "// 0xdbf03b407c01e7cd3cbea99509d93f8dddc8c6fb y.send(1)\n",
    "/* a.transfer(1) */",
    "/** doc */",
    "hex\"deadbeef\"",
    "unicode\"ünï\"",
    "uint x = 1_000 + 0x1f;",
    "\n",
    "\n\n\n",
    "  ",
    "unchecked { x++; }",
    "assembly { let y := 1 }",
];

fn source() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(FRAGMENTS), 0..40).prop_map(|v| v.join(" "))
}

fn protected(src: &str) -> Vec<String> {
    lex(src)
        .unwrap()
        .iter()
        .filter(|t| t.kind == TokenKind::StringLiteral || t.kind.is_comment())
        .map(|t| t.text.to_string())
        .collect()
}

proptest! {
    #[test]
    fn lexing_is_lossless_on_any_text(s in any::<String>()) {
        if let Ok(ts) = lex(&s) {
            let joined: String = ts.iter().map(|t| t.text).collect();
            prop_assert_eq!(joined, s);
        }
    }

    #[test]
    fn transforms_idempotent_and_immune(s in source()) {
        let stripped = strip_comments(&s).unwrap();
        prop_assert_eq!(strip_comments(&stripped).unwrap(), stripped.clone());
        prop_assert!(lex(&stripped).unwrap().iter().all(|t| !t.kind.is_comment()));

        let (fixed, _) = normalize_addresses(&s).unwrap();
        prop_assert_eq!(normalize_addresses(&fixed).unwrap(), (fixed.clone(), 0));
        prop_assert_eq!(protected(&fixed), protected(&s));

        let (cast, _) = insert_payable_casts(&s).unwrap();
        prop_assert_eq!(insert_payable_casts(&cast).unwrap(), (cast.clone(), 0));
        prop_assert_eq!(protected(&cast), protected(&s));
    }

    #[test]
    fn keccak_agrees_with_sha3(data in prop::collection::vec(any::<u8>(), 0..600)) {
        let want: String = sha3::Keccak256::digest(&data).iter().map(|b| format!("{b:02x}")).collect();
        prop_assert_eq!(keccak256(&data).to_hex(), want);
    }

    #[test]
    fn eip55_rejects_malformed(s in "[0-9a-zA-Z]{0,45}") {
        let digits = s.strip_prefix("0x").unwrap_or(&s);
        let valid = digits.len() == 40 && digits.bytes().all(|b| b.is_ascii_hexdigit());
        prop_assert_eq!(to_eip55(&s).is_ok(), valid);
    }
}
