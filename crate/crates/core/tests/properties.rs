use proptest::prelude::*;

use verstring::testkit::{baseline_persistent_bst, gen_version_tree, materialize_all, GeneratorConfig};
use verstring::{Backend, PersistentStringIndex, PrefixSelectIndex, SegmentIndexConfig, VersionId};

fn tree_config() -> impl Strategy<Value = GeneratorConfig> {
    (any::<u64>(), 1usize..120, 0u32..8, 0u32..8, 0u32..8, 0.0f64..=1.0, 1u32..30).prop_map(
        |(seed, nodes, i, d, r, path_bias, alphabet)| GeneratorConfig {
            seed,
            nodes,
            op_weights: [i + 1, d, r],
            path_bias,
            alphabet,
        },
    )
}

fn index_config() -> impl Strategy<Value = SegmentIndexConfig> {
    (prop_oneof![Just(0u32), 2u32..10], 1usize..80, any::<bool>(), 1u32..40).prop_map(
        |(delta, sample_rate, memo, bucket)| SegmentIndexConfig {
            delta,
            sample_rate,
            backend: if memo { Backend::Memoized } else { Backend::Direct },
            bucket,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_matches_materialization(gen in tree_config(), cfg in index_config()) {
        let tree = gen_version_tree(&gen);
        let idx = PersistentStringIndex::build(&tree, cfg).unwrap();
        let base = baseline_persistent_bst(&tree);
        for (v, s) in materialize_all(&tree).iter().enumerate() {
            let v = VersionId(v as u32);
            prop_assert_eq!(idx.length(v).unwrap(), s.len() as u64);
            prop_assert_eq!(&base.string(v), s);
            prop_assert_eq!(&idx.substring(v, 1, s.len() as u64).unwrap(), s);
            for (j, &c) in s.iter().enumerate() {
                prop_assert_eq!(idx.access(v, j as u64 + 1).unwrap(), c);
            }
        }
        idx.check_consistency().unwrap();
    }

    #[test]
    fn prefix_select_matches_sorting(mut a in prop::collection::hash_set(-1000i64..1000, 1..150)
        .prop_map(|s| s.into_iter().collect::<Vec<_>>()), cfg in index_config()) {
        a.reverse();
        let idx = PrefixSelectIndex::build(&a, cfg).unwrap();
        for i in 1..=a.len() {
            let mut prefix: Vec<(i64, u64)> = a[..i].iter().enumerate().map(|(k, &x)| (x, k as u64 + 1)).collect();
            prefix.sort_unstable();
            for (j, &(_, at)) in prefix.iter().enumerate() {
                prop_assert_eq!(idx.prefix_select(i as u64, j as u64 + 1).unwrap(), at);
            }
        }
    }
}
