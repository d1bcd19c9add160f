use rex_core::analytics::{chi_squared, cramers_v, ContingencyTable, SuccessTable};
use rex_core::corpus::VulnClass;
use rex_core::soltx::{keccak256, to_eip55};

use crate::CmdResult;

const KECCAK: [(&str, &str); 2] = [
    ("", "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"),
    ("abc", "4e03657aea45a94fc7d47ba826c8d667c0d1e6e33a64a036ec44f58fa12d6c45"),
];

const EIP55: [&str; 4] = [
    "0x5aAeb6053F3E94C9b9A09f33669435E7Ef1BeAed",
    "0xfB6916095ca1df60bB79Ce92cE3Ea74c37c5d359",
    "0xdbF03B407c01E7cD3CBea99509d93f8DDDC8C6FB",
    "0xD1220A0cf47c7B9Be7A2E6BA89F429762e7b9aDb",
];

// (table, chi-squared, V)
const TABLES: [([[u64; 2]; 2], f64, f64); 3] = [
    ([[5, 5], [5, 5]], 0.0, 0.0),
    ([[10, 0], [0, 10]], 20.0, 1.0),
    ([[4, 1], [1, 4]], 3.6, 0.6),
];

// Per-class counts in VulnClass order, and the expected mean rate.
const SUCCESS_COUNTS: [([(usize, usize); 8], f64); 2] = [
    ([(18, 30), (10, 18), (13, 14), (5, 7), (3, 4), (4, 6), (3, 5), (17, 30)], 67.3),
    ([(6, 30), (4, 18), (5, 14), (1, 7), (1, 4), (2, 6), (2, 5), (12, 30)], 28.8),
];

fn keccak() -> usize {
    KECCAK.iter().filter(|(i, want)| keccak256(i.as_bytes()).to_hex() == *want).count()
}

fn eip55() -> usize {
    EIP55
        .iter()
        .filter(|v| to_eip55(&v.to_ascii_lowercase()).is_ok_and(|c| c == **v))
        .count()
}

fn stats() -> usize {
    TABLES
        .iter()
        .filter(|(cells, chi2, v)| {
            let Ok(t) = ContingencyTable::from_rows(cells.iter().map(|r| r.to_vec()).collect()) else {
                return false;
            };
            let chi_ok = chi_squared(&t).is_ok_and(|c| (c - chi2).abs() < 1e-9);
            let v_ok = cramers_v(&t).is_ok_and(|r| (r.v - v).abs() < 1e-9);
            chi_ok && v_ok
        })
        .count()
}

fn averages() -> usize {
    SUCCESS_COUNTS
        .iter()
        .filter(|(counts, want)| {
            let rows: Vec<_> = VulnClass::ALL.iter().zip(counts).map(|(&c, &(s, t))| (c, s, t)).collect();
            SuccessTable::from_counts(&rows).average.is_some_and(|a| (a - want).abs() <= 0.05)
        })
        .count()
}

pub fn run() -> CmdResult {
    let checks = [
        ("keccak-256 vectors", keccak(), KECCAK.len()),
        ("EIP-55 vectors", eip55(), EIP55.len()),
        ("chi-squared and Cramér's V tables", stats(), TABLES.len()),
        ("success-rate averages", averages(), SUCCESS_COUNTS.len()),
    ];
    let mut all = true;
    for (name, passed, total) in checks {
        let ok = passed == total;
        all &= ok;
        println!("{} {name}: {passed}/{total}", if ok { "ok  " } else { "FAIL" });
    }
    Ok(if all { 0 } else { 1 })
}
