use std::collections::HashMap;

use crate::regions::RegionId;

use super::{FunctionsError, TransactionTable};

#[derive(Clone, Debug, PartialEq)]
pub struct FrequentItemset {
    /// Sorted ascending.
    pub items: Vec<RegionId>,
    pub count: usize,
    /// `count / rows`.
    pub support: f64,
}

pub const DEFAULT_MINSUP: f64 = 0.2;

/// Smallest count that meets `rows * minsup`. The epsilon keeps products such as
/// `3 * 0.2` from rounding just above an integer.
pub fn min_count(rows: usize, minsup: f64) -> usize {
    let need = rows as f64 * minsup - 1e-9;
    (need.ceil().max(0.0) as usize).max(1)
}

/// Level-wise Apriori. Output is ordered by itemset size, then lexicographically.
pub fn apriori(table: &TransactionTable, minsup: f64) -> Result<Vec<FrequentItemset>, FunctionsError> {
    if !(minsup > 0.0 && minsup <= 1.0) {
        return Err(FunctionsError::InvalidMinsup(minsup));
    }
    let n = table.rows.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let need = min_count(n, minsup);
    let itemset = |items: Vec<RegionId>, count: usize| FrequentItemset {
        items,
        count,
        support: count as f64 / n as f64,
    };

    let mut singles: HashMap<RegionId, usize> = HashMap::new();
    for row in &table.rows {
        for &r in row {
            *singles.entry(r).or_default() += 1;
        }
    }
    let mut level: Vec<(Vec<RegionId>, usize)> = singles
        .into_iter()
        .filter(|&(_, c)| c >= need)
        .map(|(r, c)| (vec![r], c))
        .collect();
    level.sort();

    let mut out = Vec::new();
    while !level.is_empty() {
        let candidates = generate_candidates(&level);
        out.extend(level.drain(..).map(|(items, c)| itemset(items, c)));
        if candidates.is_empty() {
            break;
        }
        let mut counts = vec![0usize; candidates.len()];
        for row in &table.rows {
            if row.len() < candidates[0].len() {
                continue;
            }
            for (c, cand) in counts.iter_mut().zip(&candidates) {
                if is_subset(cand, row) {
                    *c += 1;
                }
            }
        }
        level = candidates
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| c >= need)
            .collect();
    }
    Ok(out)
}

/// Prefix join of sorted (k-1)-itemsets, then prune candidates with an infrequent (k-1)-subset.
fn generate_candidates(level: &[(Vec<RegionId>, usize)]) -> Vec<Vec<RegionId>> {
    let frequent: std::collections::HashSet<&[RegionId]> = level.iter().map(|(s, _)| s.as_slice()).collect();
    let mut out = Vec::new();
    for (i, (a, _)) in level.iter().enumerate() {
        let k = a.len();
        for (b, _) in &level[i + 1..] {
            if a[..k - 1] != b[..k - 1] {
                break;
            }
            let mut cand = a.clone();
            cand.push(b[k - 1]);
            let all_frequent = (0..cand.len() - 2).all(|drop| {
                let sub: Vec<RegionId> = cand.iter().enumerate().filter(|&(j, _)| j != drop).map(|(_, &r)| r).collect();
                frequent.contains(sub.as_slice())
            });
            if all_frequent {
                out.push(cand);
            }
        }
    }
    out
}

/// Both slices sorted ascending.
pub(crate) fn is_subset(small: &[RegionId], big: &[RegionId]) -> bool {
    let mut it = big.iter();
    small.iter().all(|s| it.by_ref().any(|b| b == s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_rounding() {
        assert_eq!(min_count(3, 0.2), 1);
        assert_eq!(min_count(10, 0.2), 2);
        assert_eq!(min_count(5, 1.0), 5);
        assert_eq!(min_count(7, 0.5), 4);
    }

    #[test]
    fn subset_check() {
        assert!(is_subset(&[1, 4], &[0, 1, 3, 4]));
        assert!(!is_subset(&[1, 2], &[0, 1, 3, 4]));
        assert!(is_subset(&[], &[1]));
    }
}
