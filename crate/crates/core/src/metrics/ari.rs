use std::collections::HashMap;

/// Adjusted Rand index between two labelings of the same points.
/// Identical partitions score 1 regardless of label names.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let comb2 = |v: u64| (v * v.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.values().map(|&v| comb2(v)).sum();
    let sum_rows: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_cols: f64 = cols.values().map(|&v| comb2(v)).sum();
    let expected = sum_rows * sum_cols / comb2(n as u64);
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        // both partitions trivial (all-singletons or one block)
        return if rows.len() == cols.len() { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}
