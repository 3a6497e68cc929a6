//! Property tests for the confusion, scoring and lexicon invariants.

use proptest::prelude::*;

use viseme::confusion::{sum_folds, ConfusionCounts};
use viseme::lexicon::{P2VMap, PronunciationDictionary};
use viseme::scoring::{accuracy, align, correctness, AlignCosts};

fn labels(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("p{}", i)).collect()
}

fn counts_5x5() -> impl Strategy<Value = ConfusionCounts> {
    prop::collection::vec(0u64..50, 25)
        .prop_map(|cells| ConfusionCounts::new(labels(5), cells).unwrap())
}

proptest! {
    #[test]
    fn merge_preserves_grand_total(k in counts_5x5(), a in 0usize..5, b in 0usize..5) {
        prop_assume!(a != b);
        let la = k.labels()[a].clone();
        let lb = k.labels()[b].clone();
        let merged = k.merge_classes(&la, &lb, "m").unwrap();
        prop_assert_eq!(merged.grand_total(), k.grand_total());
    }

    /// Contracting counts then normalizing equals building the contracted
    /// probability matrix directly from grouped column sums.
    #[test]
    fn merge_then_normalize_matches_direct_construction(
        k in counts_5x5(), a in 0usize..5, b in 0usize..5
    ) {
        prop_assume!(a != b);
        let la = k.labels()[a].clone();
        let lb = k.labels()[b].clone();
        let merged = k.merge_classes(&la, &lb, "m").unwrap();
        let p = merged.column_normalize();

        // Direct route: group the original indices, sum cells per group pair,
        // then divide by the group-pair column sum.
        let groups: Vec<Vec<usize>> = {
            let mut g: Vec<Vec<usize>> = (0..5).filter(|&i| i != a && i != b)
                .map(|i| vec![i]).collect();
            let spot = a.min(b);
            let insert_at = g.iter().position(|grp| grp[0] > spot).unwrap_or(g.len());
            g.insert(insert_at, vec![a.min(b), a.max(b)]);
            g
        };
        for (gj, cols) in groups.iter().enumerate() {
            let colsum: u64 = cols.iter()
                .map(|&c| (0..5).map(|r| k.get(r, c)).sum::<u64>())
                .sum();
            for (gi, rows) in groups.iter().enumerate() {
                let mut cell = 0u64;
                for &r in rows {
                    for &c in cols {
                        cell += k.get(r, c);
                    }
                }
                let expected = if colsum == 0 { 0.0 } else { cell as f64 / colsum as f64 };
                prop_assert!((p.get(gi, gj) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fold_sum_is_permutation_invariant(
        folds in prop::collection::vec(counts_5x5(), 1..6),
        seed in any::<u64>()
    ) {
        let total = sum_folds(&folds).unwrap();
        let mut shuffled = folds;
        // Fisher-Yates with a trivial LCG; proptest supplies the seed.
        let mut state = seed;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        prop_assert_eq!(sum_folds(&shuffled).unwrap(), total);
    }

    #[test]
    fn normalized_columns_sum_to_one_on_support(k in counts_5x5()) {
        let p = k.column_normalize();
        for c in 0..5 {
            let colsum: f64 = (0..5).map(|r| p.get(r, c)).sum();
            if k.col_sum(c) == 0 {
                prop_assert_eq!(colsum, 0.0);
            } else {
                prop_assert!((colsum - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn alignment_count_identities(
        r in prop::collection::vec(0u8..4, 0..10),
        h in prop::collection::vec(0u8..4, 0..10)
    ) {
        let c = align(&r, &h, AlignCosts::default());
        prop_assert_eq!(c.n, c.h + c.s + c.d);
        prop_assert_eq!(h.len(), c.h + c.s + c.i);
        if c.n > 0 {
            prop_assert!(accuracy(&c).unwrap() <= correctness(&c).unwrap() + 1e-12);
            prop_assert_eq!(c.i == 0, accuracy(&c) == correctness(&c));
        }
    }

    #[test]
    fn self_alignment_is_all_hits(x in prop::collection::vec(0u8..4, 0..12)) {
        let c = align(&x, &x, AlignCosts::default());
        prop_assert_eq!((c.h, c.s, c.d, c.i), (x.len(), 0, 0, 0));
    }

    #[test]
    fn dictionary_round_trip(
        entries in prop::collection::btree_map(
            "[A-Z]{1,6}",
            prop::collection::vec(prop::collection::vec("[a-z]{1,2}", 1..5), 1..3),
            1..10,
        )
    ) {
        let mut dict = PronunciationDictionary::default();
        for (word, prons) in entries {
            for pron in prons {
                dict.push(word.clone(), pron);
            }
        }
        let again = PronunciationDictionary::parse(&dict.serialize()).unwrap();
        prop_assert_eq!(again, dict);
    }

    #[test]
    fn map_round_trip(sizes in prop::collection::vec(1usize..4, 1..6)) {
        let mut lines = String::new();
        let mut next = 0;
        for (c, size) in sizes.iter().enumerate() {
            lines.push_str(&format!("V{:02}", c + 1));
            for _ in 0..*size {
                lines.push_str(&format!(" q{}", next));
                next += 1;
            }
            lines.push('\n');
        }
        let map = P2VMap::parse(&lines).unwrap();
        let again = P2VMap::parse(&map.serialize()).unwrap();
        prop_assert_eq!(again, map);
    }
}
