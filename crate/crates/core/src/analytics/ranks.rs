use std::cmp::Ordering;

/// Midranks (1-based, ties share their average rank) doubled so they stay
/// integral, plus the size of every tie group.
pub(crate) fn doubled_midranks(values: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0u64; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        // positions start..=end hold ranks start+1 ..= end+1
        let doubled = (start + 1 + end + 1) as u64;
        for &idx in &order[start..=end] {
            ranks[idx] = doubled;
        }
        ties.push((end - start + 1) as u64);
        start = end + 1;
    }
    (ranks, ties)
}

/// Midranks of `values`: ties get the average of the ranks they span.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    doubled_midranks(values).0.into_iter().map(|r| r as f64 / 2.0).collect()
}

/// `sum(t^3 - t)` over tie groups.
pub(crate) fn tie_term(ties: &[u64]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(midranks(&[1., 2., 2., 4., 5.]), vec![1., 2.5, 2.5, 4., 5.]);
        assert_eq!(midranks(&[3., 1., 3., 3.]), vec![3., 1., 3., 3.]);
        let (_, ties) = doubled_midranks(&[3., 1., 3., 3.]);
        assert_eq!(ties, vec![1, 3]);
        assert_eq!(tie_term(&ties), 24.0);
        assert!(midranks(&[]).is_empty());
    }
}
