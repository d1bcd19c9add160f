use super::keccak::keccak256;
use super::SolTxError;

/// EIP-55 mixed-case checksum encoding of a 20-byte hex address.
///
/// Accepts 40 hex digits with or without a `0x`/`0X` prefix, in any case.
/// The result is always `0x`-prefixed.
pub fn to_eip55(address: &str) -> Result<String, SolTxError> {
    let digits = address
        .strip_prefix("0x")
        .or_else(|| address.strip_prefix("0X"))
        .unwrap_or(address);
    if digits.len() != 40 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(SolTxError::NotAnAddress(address.to_string()));
    }

    let lower = digits.to_ascii_lowercase();
    let hash = keccak256(lower.as_bytes());
    let mut out = String::with_capacity(42);
    out.push_str("0x");
    for (i, c) in lower.chars().enumerate() {
        if c.is_ascii_alphabetic() && hash.nibble(i) >= 8 {
            out.push(c.to_ascii_uppercase());
        } else {
            out.push(c);
        }
    }
    Ok(out)
}

/// Whether `address` already carries a valid EIP-55 checksum.
pub fn is_checksummed(address: &str) -> bool {
    matches!(to_eip55(address), Ok(c) if c[2..] == address[address.len() - 40..])
}
