use rand::seq::index;

use crate::datagen::Group;
use crate::rng::Rng;
use crate::{Error, Result};

/// One leave-one-out training tuple: a target row plus neighbors drawn from
/// the rest of its group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetExample {
    pub group: Group,
    pub target_index: usize,
    pub neighbor_indices: Vec<usize>,
}

/// `per_example` subsets of `subset_size` neighbors for every row, in
/// target-major order. Neighbors are drawn uniformly without replacement
/// from the rows other than the target.
pub fn sample_subsets(
    group: Group,
    rows: usize,
    per_example: usize,
    subset_size: usize,
    rng: &mut Rng,
) -> Result<Vec<SubsetExample>> {
    if subset_size == 0 || subset_size + 1 > rows {
        return Err(Error::invalid(format!(
            "subset size {subset_size} must lie in 1..={} for {rows} {group} rows",
            rows.saturating_sub(1)
        )));
    }
    if per_example == 0 {
        return Err(Error::invalid("subsets per example must be at least 1"));
    }
    let mut out = Vec::with_capacity(rows * per_example);
    for target in 0..rows {
        for _ in 0..per_example {
            let neighbor_indices = index::sample(rng, rows - 1, subset_size)
                .into_iter()
                .map(|i| if i >= target { i + 1 } else { i })
                .collect();
            out.push(SubsetExample {
                group,
                target_index: target,
                neighbor_indices,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn forced_complement() {
        let mut r = rng::stream(1, &[]);
        let ex = sample_subsets(Group::Control, 3, 1, 2, &mut r).unwrap();
        assert_eq!(ex.len(), 3);
        for e in &ex {
            let mut n = e.neighbor_indices.clone();
            n.sort_unstable();
            let expected: Vec<usize> = (0..3).filter(|&i| i != e.target_index).collect();
            assert_eq!(n, expected);
        }
    }

    #[test]
    fn count_and_exclusion() {
        let mut r = rng::stream(2, &[]);
        let ex = sample_subsets(Group::Treatment, 5, 3, 2, &mut r).unwrap();
        assert_eq!(ex.len(), 15);
        assert!(ex.iter().all(|e| !e.neighbor_indices.contains(&e.target_index)));
        assert_eq!(ex[3].target_index, 1);
    }

    #[test]
    fn oversized_subset_is_an_error() {
        let mut r = rng::stream(3, &[]);
        assert!(sample_subsets(Group::Control, 3, 1, 3, &mut r).is_err());
        assert!(sample_subsets(Group::Control, 3, 1, 0, &mut r).is_err());
        assert!(sample_subsets(Group::Control, 3, 0, 1, &mut r).is_err());
    }

    proptest! {
        #[test]
        fn neighbors_distinct_valid_and_exclude_target(rows in 2usize..40, per in 1usize..4, seed in any::<u64>(), frac in 0.0f64..1.0) {
            let n = 1 + ((rows - 2) as f64 * frac) as usize;
            let mut r = rng::stream(seed, &[]);
            let ex = sample_subsets(Group::Control, rows, per, n, &mut r).unwrap();
            prop_assert_eq!(ex.len(), rows * per);
            for e in ex {
                prop_assert_eq!(e.neighbor_indices.len(), n);
                let mut s = e.neighbor_indices.clone();
                s.sort_unstable();
                s.dedup();
                prop_assert_eq!(s.len(), n);
                prop_assert!(s.iter().all(|&i| i < rows && i != e.target_index));
            }
        }
    }
}
