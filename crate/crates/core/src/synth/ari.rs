use std::collections::HashMap;

use crate::error::{Error, Result};

fn comb2(n: u64) -> i128 {
    let n = n as i128;
    n * (n - 1) / 2
}

/// Whether `a` and `b` induce the same partition up to relabeling.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut ab: HashMap<usize, usize> = HashMap::new();
    let mut ba: HashMap<usize, usize> = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *ab.entry(x).or_insert(y) == y && *ba.entry(y).or_insert(x) == x)
}

/// Adjusted Rand index between two labelings of the same observations.
///
/// Computed exactly in integer arithmetic as
/// `(index − expected) / (max − expected)` under the hypergeometric model.
/// When `max == expected` (e.g. both labelings a single cluster) the value is
/// 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            op: "adjusted_rand_index",
            expected: format!("{} labels", a.len()),
            got: format!("{}", b.len()),
        });
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: i128 = table.values().map(|&n| comb2(n)).sum();
    let sa: i128 = rows.values().map(|&n| comb2(n)).sum();
    let sb: i128 = cols.values().map(|&n| comb2(n)).sum();
    let total = comb2(a.len() as u64);
    // scaled by 2·total to stay integral
    let num = 2 * index * total - 2 * sa * sb;
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        return Ok(if same_partition(a, b) { 1.0 } else { 0.0 });
    }
    Ok(num as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pair-counting oracle over all C(n,2) pairs.
    fn brute_force_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut pairs) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                pairs += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        let expected = only_a * only_b / pairs;
        let max = (only_a + only_b) / 2.0;
        (both - expected) / (max - expected)
    }

    #[test]
    fn identical_and_trivial() {
        let a = [0, 0, 1, 1, 2, 2];
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &[5, 5, 7, 7, 9, 9]).unwrap(), 1.0);
        assert_eq!(adjusted_rand_index(&a, &[0; 6]).unwrap(), 0.0);
        assert_eq!(adjusted_rand_index(&[3; 4], &[1; 4]).unwrap(), 1.0);
        assert!(adjusted_rand_index(&a, &[0; 5]).is_err());
    }

    #[test]
    fn hand_example_matches_pair_counting() {
        let a = [1, 1, 2, 2, 3, 3];
        let b = [1, 1, 2, 3, 3, 3];
        let oracle = brute_force_ari(&a, &b);
        // 15 pairs: index 2, sum_a 3, sum_b 4, expected 0.8, max 3.5
        assert!((oracle - (2.0 - 0.8) / (3.5 - 0.8)).abs() < 1e-15);
        let got = adjusted_rand_index(&a, &b).unwrap();
        assert!((got - oracle).abs() < 1e-15, "{got} vs {oracle}");
    }

    proptest! {
        #[test]
        fn ari_axioms(
            a in proptest::collection::vec(0usize..4, 2..40),
            seed in proptest::collection::vec(0usize..4, 40),
            perm in Just([2usize, 0, 3, 1]),
        ) {
            let b: Vec<usize> = seed[..a.len()].to_vec();
            let ab = adjusted_rand_index(&a, &b).unwrap();
            let ba = adjusted_rand_index(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab <= 1.0 + 1e-15);
            prop_assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
            let pa: Vec<usize> = a.iter().map(|&x| perm[x]).collect();
            prop_assert_eq!(adjusted_rand_index(&pa, &b).unwrap(), ab);
            if !same_partition(&a, &b) {
                prop_assert!(ab < 1.0);
            }
            let oracle = brute_force_ari(&a, &b);
            if oracle.is_finite() {
                prop_assert!((ab - oracle).abs() < 1e-12);
            }
        }
    }
}
