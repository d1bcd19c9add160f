use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{cramers_v, quantile_bins, AssociationResult, BinWarning, ContingencyTable, StructuralMetrics};
use crate::corpus::{CaseResult, VulnClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub class: VulnClass,
    pub successes: usize,
    pub total: usize,
}

impl SuccessRow {
    /// Percentage, or `None` for an empty class.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.successes as f64 / self.total as f64)
    }

    pub fn cell(&self) -> String {
        match self.rate() {
            Some(p) => format!("{}/{} ({p:.1}%)", self.successes, self.total),
            None => format!("{}/{} (—)", self.successes, self.total),
        }
    }
}

/// Per-class success counts plus the unweighted mean of class rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub rows: Vec<SuccessRow>,
    /// Mean of per-class percentages over classes with at least one case.
    pub average: Option<f64>,
}

impl SuccessTable {
    pub fn from_counts(counts: &[(VulnClass, usize, usize)]) -> Self {
        let rows: Vec<SuccessRow> = counts
            .iter()
            .map(|&(class, successes, total)| SuccessRow { class, successes, total })
            .collect();
        let rates: Vec<f64> = rows.iter().filter_map(SuccessRow::rate).collect();
        let average = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
        Self { rows, average }
    }

    pub fn average_cell(&self) -> String {
        self.average.map_or_else(|| "n/a".to_string(), |a| format!("{a:.1}%"))
    }

    pub fn to_markdown(&self, column: &str) -> String {
        render_columns(&[(column, self)])
    }
}

/// Side-by-side table, one column per labeled table. Rows follow the first table.
pub fn render_columns(columns: &[(&str, &SuccessTable)]) -> String {
    let mut out = String::from("| Vulnerability |");
    for (name, _) in columns {
        let _ = write!(out, " {name} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    let Some((_, first)) = columns.first() else {
        return out;
    };
    for (i, row) in first.rows.iter().enumerate() {
        let _ = write!(out, "| {} |", row.class.label());
        for (_, t) in columns {
            let cell = t.rows.get(i).map_or_else(String::new, SuccessRow::cell);
            let _ = write!(out, " {cell} |");
        }
        out.push('\n');
    }
    out.push_str("| Average Success Rate |");
    for (_, t) in columns {
        let _ = write!(out, " {} |", t.average_cell());
    }
    out.push('\n');
    out
}

/// Success tally of `results` over `classes`, in that order.
pub fn aggregate_success(results: &[CaseResult], classes: &[VulnClass]) -> SuccessTable {
    let counts: Vec<(VulnClass, usize, usize)> = classes
        .iter()
        .map(|&c| {
            let of_class = results.iter().filter(|r| r.vuln_class == c);
            let total = of_class.clone().count();
            let successes = of_class.filter(|r| r.status.is_success()).count();
            (c, successes, total)
        })
        .collect();
    SuccessTable::from_counts(&counts)
}

pub const FEATURES: [&str; 6] = [
    "nSLOC",
    "Complexity Score",
    "ExternalCallsCount",
    "InheritanceDepth",
    "HasInlineAssembly",
    "PayableFunc",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAssociation {
    pub feature: String,
    /// `None` when the feature or the outcome does not vary.
    pub result: Option<AssociationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<BinWarning>,
}

impl FeatureAssociation {
    pub fn v_cell(&self) -> String {
        self.result.as_ref().map_or_else(|| "N/A".to_string(), |r| format!("{:.3}", r.v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationReport {
    pub cases: usize,
    pub bins: usize,
    pub features: Vec<FeatureAssociation>,
}

impl AssociationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,cramers_v,chi2,n,k\n");
        for f in &self.features {
            match &f.result {
                Some(r) => {
                    let _ = writeln!(out, "{},{:.6},{:.6},{},{}", f.feature, r.v, r.chi2, r.n, r.k);
                }
                None => {
                    let _ = writeln!(out, "{},N/A,,,", f.feature);
                }
            }
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Feature | Cramér's V |\n|---|---|\n");
        for f in &self.features {
            let _ = writeln!(out, "| {} | {} |", f.feature, f.v_cell());
        }
        let _ = writeln!(
            out,
            "\nNumeric features split into {} rank quantile bins over {} cases.",
            self.bins, self.cases
        );
        out
    }
}

fn bool_label(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

/// Association between each feature and the exploit outcome.
///
/// Numeric features are discretized with [`quantile_bins`] into `q` bins;
/// a feature that does not vary is reported without a value.
pub fn association_report(cases: &[(StructuralMetrics, bool)], q: usize) -> AssociationReport {
    let outcome: Vec<String> = cases.iter().map(|(_, ok)| bool_label(*ok)).collect();
    let numeric: [fn(&StructuralMetrics) -> f64; 4] = [
        |m| m.nsloc as f64,
        |m| m.complexity_score as f64,
        |m| m.external_calls as f64,
        |m| m.inheritance_depth as f64,
    ];
    let flags: [fn(&StructuralMetrics) -> bool; 2] = [|m| m.has_inline_assembly, |m| m.has_payable_func];

    let mut columns: Vec<(Vec<String>, Option<BinWarning>)> = Vec::new();
    for f in numeric {
        let values: Vec<f64> = cases.iter().map(|(m, _)| f(m)).collect();
        match quantile_bins(&values, q) {
            Ok(b) => columns.push((b.labels, b.warning)),
            Err(_) => columns.push((Vec::new(), None)),
        }
    }
    for f in flags {
        columns.push((cases.iter().map(|(m, _)| bool_label(f(m))).collect(), None));
    }

    let features = FEATURES
        .iter()
        .zip(columns)
        .map(|(name, (labels, binning))| {
            let pairs: Vec<(&String, &String)> = labels.iter().zip(&outcome).collect();
            let table = ContingencyTable::cross_tab(&pairs);
            FeatureAssociation {
                feature: name.to_string(),
                result: cramers_v(&table).ok(),
                binning,
            }
        })
        .collect();
    AssociationReport {
        cases: cases.len(),
        bins: q,
        features,
    }
}
