use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{BenchmarkSet, Split, TaskInstance, TaskKind};
use crate::seed::{hash64, rng};

/// Test-set size for `n` instances: `round(0.1 * n)` with halves rounded
/// away from zero.
pub fn test_count(n: usize) -> usize {
    (n + 5) / 10
}

/// Labels every instance train or test, 9:1 per task kind. The test subset
/// of each kind is a seeded shuffle of that kind's instance ids.
pub fn split_benchmark(instances: Vec<TaskInstance>, seed: u64) -> BenchmarkSet {
    let mut by_kind: BTreeMap<TaskKind, Vec<TaskInstance>> = BTreeMap::new();
    for inst in instances {
        by_kind.entry(inst.kind).or_default().push(inst);
    }
    let mut out = Vec::new();
    for (kind, mut group) in by_kind {
        group.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        let mut order: Vec<usize> = (0..group.len()).collect();
        order.shuffle(&mut rng(hash64(seed, &[b"split", kind.id().as_bytes()])));
        let n_test = test_count(group.len());
        let mut labels = vec![Split::Train; group.len()];
        for &i in &order[..n_test] {
            labels[i] = Split::Test;
        }
        for (inst, label) in group.iter_mut().zip(labels) {
            inst.split = label;
        }
        out.extend(group);
    }
    BenchmarkSet::new(out, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchgen::{instance_id, AnswerKey};

    fn dummy(kind: TaskKind, n: usize) -> Vec<TaskInstance> {
        (0..n)
            .map(|i| TaskInstance {
                instance_id: instance_id(kind, i),
                kind,
                format: kind.format(),
                instruction: String::new(),
                image_refs: vec![],
                options: None,
                answer_key: AnswerKey::Text("x".into()),
                split: Split::Train,
                gen_seed: 0,
            })
            .collect()
    }

    #[test]
    fn ratio_arithmetic() {
        assert_eq!(test_count(10), 1);
        assert_eq!(test_count(95), 10);
        assert_eq!(test_count(1000), 100);
        assert_eq!(test_count(0), 0);
        assert_eq!(test_count(4), 0);
        assert_eq!(test_count(5), 1);
    }

    #[test]
    fn applied_per_kind() {
        let mut all = dummy(TaskKind::T2_1, 1000);
        all.extend(dummy(TaskKind::T1_1, 95));
        let set = split_benchmark(all, 4);
        let counts = |k: TaskKind, s: Split| {
            set.instances
                .iter()
                .filter(|i| i.kind == k && i.split == s)
                .count()
        };
        assert_eq!(counts(TaskKind::T2_1, Split::Test), 100);
        assert_eq!(counts(TaskKind::T2_1, Split::Train), 900);
        assert_eq!(counts(TaskKind::T1_1, Split::Test), 10);
        assert_eq!(counts(TaskKind::T1_1, Split::Train), 85);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = split_benchmark(dummy(TaskKind::T3_2, 200), 9);
        let b = split_benchmark(dummy(TaskKind::T3_2, 200), 9);
        assert_eq!(a, b);
        let c = split_benchmark(dummy(TaskKind::T3_2, 200), 10);
        assert_ne!(a, c);
    }
}
