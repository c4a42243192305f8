//! Bootstrap class balancing: every class is brought to exactly `cap`
//! samples — larger classes are down-sampled without replacement, smaller
//! ones re-drawn with replacement — deterministically under a fixed seed.

use super::ClassifyError;
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Returns indices into the input, grouped by class in class order with
/// each block sorted ascending; every class contributes exactly `cap`
/// entries (duplicates possible for classes below the cap).
pub fn bootstrap_balance(
    labels: &[usize],
    n_classes: usize,
    cap: usize,
    seed: u64,
) -> Result<Vec<usize>, ClassifyError> {
    if cap == 0 {
        return Err(ClassifyError::BadInput("cap must be positive".into()));
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(ClassifyError::BadInput(format!(
                "label {label} out of range for {n_classes} classes"
            )));
        }
        groups[label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_classes * cap);
    for (class, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(ClassifyError::EmptyClass(class));
        }
        let mut block: Vec<usize> = if group.len() > cap {
            sample(&mut rng, group.len(), cap)
                .iter()
                .map(|i| group[i])
                .collect()
        } else if group.len() == cap {
            group.clone()
        } else {
            (0..cap).map(|_| group[rng.gen_range(0..group.len())]).collect()
        };
        block.sort_unstable();
        out.extend(block);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn oversized_class_downsamples_to_distinct_cap() {
        let labels: Vec<usize> = vec![0; 500];
        let picked = bootstrap_balance(&labels, 1, 200, 42).unwrap();
        assert_eq!(picked.len(), 200);
        let unique: BTreeSet<usize> = picked.iter().copied().collect();
        assert_eq!(unique.len(), 200, "down-sampling must not repeat");
    }

    #[test]
    fn undersized_class_resamples_to_cap() {
        let labels: Vec<usize> = vec![0; 50];
        let picked = bootstrap_balance(&labels, 1, 200, 42).unwrap();
        assert_eq!(picked.len(), 200);
        assert!(picked.iter().all(|&i| i < 50));
        let unique: BTreeSet<usize> = picked.iter().copied().collect();
        assert!(unique.len() > 1, "resampling should hit several sources");
    }

    #[test]
    fn exact_cap_is_identity_up_to_order() {
        let labels: Vec<usize> = [vec![0; 10], vec![1; 10]].concat();
        let picked = bootstrap_balance(&labels, 2, 10, 7).unwrap();
        assert_eq!(picked, (0..20).collect::<Vec<_>>());
    }

    #[test]
    fn balancing_is_deterministic() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let a = bootstrap_balance(&labels, 3, 50, 42).unwrap();
        let b = bootstrap_balance(&labels, 3, 50, 42).unwrap();
        assert_eq!(a, b);
        // blocks stay in class order
        for (pos, &idx) in a.iter().enumerate() {
            assert_eq!(labels[idx], pos / 50);
        }
    }

    #[test]
    fn missing_class_is_an_error() {
        let labels = vec![0, 0, 2];
        assert!(matches!(
            bootstrap_balance(&labels, 3, 5, 1),
            Err(ClassifyError::EmptyClass(1))
        ));
    }
}
