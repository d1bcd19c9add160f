use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Observed counts, `cells[row][col]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub cells: Vec<Vec<u64>>,
}

impl ContingencyTable {
    /// Unlabeled table; rows must all have the same length.
    pub fn from_rows(cells: Vec<Vec<u64>>) -> Result<Self, StatsError> {
        let cols = cells.first().map_or(0, Vec::len);
        if cells.iter().any(|r| r.len() != cols) {
            return Err(StatsError::Ragged);
        }
        Ok(Self {
            row_labels: (1..=cells.len()).map(|i| format!("r{i}")).collect(),
            col_labels: (1..=cols).map(|i| format!("c{i}")).collect(),
            cells,
        })
    }

    /// Cross-tabulates paired observations; labels are sorted.
    pub fn cross_tab<A: AsRef<str>, B: AsRef<str>>(pairs: &[(A, B)]) -> Self {
        let rows: Vec<String> = pairs
            .iter()
            .map(|(a, _)| a.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let cols: Vec<String> = pairs
            .iter()
            .map(|(_, b)| b.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cells = vec![vec![0u64; cols.len()]; rows.len()];
        for (a, b) in pairs {
            let r = rows.binary_search_by(|x| x.as_str().cmp(a.as_ref())).unwrap();
            let c = cols.binary_search_by(|x| x.as_str().cmp(b.as_ref())).unwrap();
            cells[r][c] += 1;
        }
        Self {
            row_labels: rows,
            col_labels: cols,
            cells,
        }
    }

    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cols(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    pub fn n(&self) -> u64 {
        self.cells.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub chi2: f64,
    pub n: u64,
    /// `min(rows, cols)`.
    pub k: usize,
    pub v: f64,
}

/// Pearson's chi-squared statistic.
pub fn chi_squared(table: &ContingencyTable) -> Result<f64, StatsError> {
    let (r, c) = (table.rows(), table.cols());
    if r < 2 || c < 2 {
        return Err(StatsError::TooSmall { rows: r, cols: c });
    }
    let row_totals: Vec<u64> = table.cells.iter().map(|row| row.iter().sum()).collect();
    let col_totals: Vec<u64> = (0..c).map(|j| table.cells.iter().map(|row| row[j]).sum()).collect();
    if let Some(i) = row_totals.iter().position(|&t| t == 0) {
        return Err(StatsError::ZeroMarginal { axis: super::Axis::Row, index: i });
    }
    if let Some(j) = col_totals.iter().position(|&t| t == 0) {
        return Err(StatsError::ZeroMarginal { axis: super::Axis::Col, index: j });
    }
    let n = table.n() as f64;
    let mut chi2 = 0.0;
    for (i, row) in table.cells.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let expected = row_totals[i] as f64 * col_totals[j] as f64 / n;
            let d = obs as f64 - expected;
            chi2 += d * d / expected;
        }
    }
    Ok(chi2)
}

pub fn cramers_v(table: &ContingencyTable) -> Result<AssociationResult, StatsError> {
    let chi2 = chi_squared(table)?;
    let n = table.n();
    let k = table.rows().min(table.cols());
    let v = (chi2 / (n as f64 * (k - 1) as f64)).sqrt();
    Ok(AssociationResult { chi2, n, k, v })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinWarning {
    /// Every value is equal; one bin.
    DegenerateInput,
    /// Fewer distinct values than requested bins.
    Collapsed { requested: usize, produced: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    /// `"q1"`.. per input value, in input order.
    pub labels: Vec<String>,
    pub bins: usize,
    pub warning: Option<BinWarning>,
}

/// Rank-based quantile bins.
///
/// A run of equal values takes the bin of its lowest rank. Bins are numbered
/// without gaps, so every produced bin is non-empty.
pub fn quantile_bins(values: &[f64], q: usize) -> Result<Binning, StatsError> {
    if q < 2 {
        return Err(StatsError::TooFewBins(q));
    }
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // (value, number of values strictly below it)
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for (rank, &v) in sorted.iter().enumerate() {
        if groups.last().is_none_or(|&(g, _)| g != v) {
            groups.push((v, rank));
        }
    }
    let n = values.len();
    let g_count = groups.len();
    let target = q.min(g_count);
    let mut bin_of = Vec::with_capacity(g_count);
    let mut prev = 0usize;
    for (g, &(_, below)) in groups.iter().enumerate() {
        let bin = if g == 0 {
            0
        } else {
            let raw = below * q / n;
            let low = prev.max(target.saturating_sub(g_count - g));
            raw.clamp(low, prev + 1)
        };
        bin_of.push(bin);
        prev = bin;
    }
    let labels = values
        .iter()
        .map(|v| {
            let g = groups.partition_point(|&(x, _)| x < *v);
            format!("q{}", bin_of[g] + 1)
        })
        .collect();
    let bins = prev + 1;
    let warning = if g_count == 1 {
        Some(BinWarning::DegenerateInput)
    } else if bins < q {
        Some(BinWarning::Collapsed {
            requested: q,
            produced: bins,
        })
    } else {
        None
    };
    Ok(Binning { labels, bins, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[u64]]) -> ContingencyTable {
        ContingencyTable::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn reference_tables() {
        let cases: [(&[&[u64]], f64, f64); 3] = [
            (&[&[5, 5], &[5, 5]], 0.0, 0.0),
            (&[&[10, 0], &[0, 10]], 20.0, 1.0),
            (&[&[4, 1], &[1, 4]], 3.6, 0.6),
        ];
        for (rows, chi2, v) in cases {
            let t = table(rows);
            assert!((chi_squared(&t).unwrap() - chi2).abs() < 1e-9);
            let r = cramers_v(&t).unwrap();
            assert!((r.v - v).abs() < 1e-9, "{rows:?}");
            assert_eq!((r.n, r.k), (t.n(), 2));
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(
            chi_squared(&table(&[&[0, 0], &[1, 2]])),
            Err(StatsError::ZeroMarginal { axis: crate::analytics::Axis::Row, index: 0 })
        ));
        assert!(matches!(
            chi_squared(&table(&[&[0, 3], &[0, 2]])),
            Err(StatsError::ZeroMarginal { axis: crate::analytics::Axis::Col, index: 0 })
        ));
        assert!(matches!(chi_squared(&table(&[&[1, 2]])), Err(StatsError::TooSmall { .. })));
        assert!(ContingencyTable::from_rows(vec![vec![1, 2], vec![3]]).is_err());
    }

    #[test]
    fn cross_tab_counts() {
        let t = ContingencyTable::cross_tab(&[("a", "x"), ("b", "y"), ("a", "x"), ("a", "y")]);
        assert_eq!(t.row_labels, vec!["a", "b"]);
        assert_eq!(t.cells, vec![vec![2, 1], vec![0, 1]]);
    }

    fn labels(values: &[f64], q: usize) -> Vec<String> {
        quantile_bins(values, q).unwrap().labels
    }

    #[test]
    fn terciles() {
        let v: Vec<f64> = (1..=9).map(f64::from).collect();
        assert_eq!(labels(&v, 3), ["q1", "q1", "q1", "q2", "q2", "q2", "q3", "q3", "q3"]);
    }

    #[test]
    fn ties_share_lower_bin() {
        assert_eq!(labels(&[1., 1., 1., 2., 3., 4.], 2), ["q1", "q1", "q1", "q2", "q2", "q2"]);
        assert_eq!(labels(&[4., 1., 3., 1.], 2), ["q2", "q1", "q2", "q1"]);
    }

    #[test]
    fn degenerate_and_collapsed() {
        let b = quantile_bins(&[7.0; 5], 3).unwrap();
        assert_eq!(b.bins, 1);
        assert_eq!(b.warning, Some(BinWarning::DegenerateInput));
        assert!(b.labels.iter().all(|l| l == "q1"));

        let b = quantile_bins(&[1., 1., 1., 1., 2.], 3).unwrap();
        assert_eq!(b.bins, 2);
        assert_eq!(b.warning, Some(BinWarning::Collapsed { requested: 3, produced: 2 }));

        assert!(matches!(quantile_bins(&[], 3), Err(StatsError::EmptyInput)));
        assert!(matches!(quantile_bins(&[1.0], 1), Err(StatsError::TooFewBins(1))));
    }

    #[test]
    fn heavy_tail_still_fills_every_bin() {
        let v = [1., 1., 1., 1., 1., 1., 1., 2., 3.];
        let b = quantile_bins(&v, 3).unwrap();
        assert_eq!(b.bins, 3);
        assert_eq!(b.labels[7], "q2");
        assert_eq!(b.labels[8], "q3");
    }
}
