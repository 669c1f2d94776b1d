use std::collections::BTreeMap;

use proptest::prelude::*;

use textbal::augment::{expand_minority, AugmentConfig, SynonymLexicon};
use textbal::corpus::{fit_label_codec, split, Dataset, Record};
use textbal::rebalance::{apply_plan, class_counts, make_plan, target_count};
use textbal::wordpiece::{train_vocab, TokenSeq};

fn dataset(counts: &[usize]) -> Dataset {
    let mut recs = Vec::new();
    for (c, &n) in counts.iter().enumerate() {
        for i in 0..n {
            recs.push(Record::new(
                format!("c{c}r{i}"),
                "",
                format!("word{} other{}", i % 5, c),
                format!("k{c}"),
            ));
        }
    }
    Dataset::new(recs).unwrap()
}

fn seqs(counts: &[usize]) -> Vec<TokenSeq> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| {
            (0..n).map(move |i| TokenSeq {
                id: format!("{c}:{i}"),
                ids: vec![i as u32, 0],
                length: 1,
                label_id: c,
            })
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_and_keeps_every_class(
        counts in proptest::collection::vec(1usize..30, 1..5),
        frac in 0.05f64..0.6,
        seed in any::<u64>(),
    ) {
        let d = dataset(&counts);
        let (train, test) = split(&d, frac, seed).unwrap();
        prop_assert_eq!(train.len() + test.len(), d.len());
        for class in d.class_counts().keys() {
            prop_assert!(train.class_counts().contains_key(class));
        }
        let mut ids: Vec<&str> = train.iter().chain(&test).map(|r| r.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), d.len());
    }

    #[test]
    fn oversampling_appends_exact_copies(
        counts in proptest::collection::vec(1usize..40, 2..5),
        r in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let data = seqs(&counts);
        let plan = make_plan(&class_counts(&data), r).unwrap();
        let out = apply_plan(&data, &plan, seed).unwrap();
        prop_assert_eq!(&out[..data.len()], &data[..]);
        for extra in &out[data.len()..] {
            prop_assert!(data.iter().any(|s| s.ids == extra.ids && s.label_id == extra.label_id));
        }
        let target = target_count(r, *counts.iter().max().unwrap());
        for (c, n) in class_counts(&out) {
            prop_assert_eq!(n, counts[c].max(target));
        }
    }

    #[test]
    fn minority_expansion_reaches_target_and_keeps_labels(
        counts in proptest::collection::vec(1usize..25, 2..4),
        r in 0.05f64..=1.0,
        seed in any::<u64>(),
    ) {
        let d = dataset(&counts);
        let cfg = AugmentConfig { seed, ..AugmentConfig::default() };
        let out = expand_minority(&d, r, &cfg, &SynonymLexicon::bundled()).unwrap();
        prop_assert_eq!(&out.records()[..d.len()], d.records());
        let target = target_count(r, *counts.iter().max().unwrap());
        for (class, &n) in d.class_counts() {
            prop_assert_eq!(out.class_counts()[class], n.max(target));
        }
        let by_id: BTreeMap<&str, &str> = d.iter().map(|r| (r.id.as_str(), r.label.as_str())).collect();
        for rec in &out.records()[d.len()..] {
            let source = rec.id.split('~').next().unwrap();
            prop_assert_eq!(by_id[source], rec.label.as_str());
        }
    }

    #[test]
    fn trained_vocab_covers_its_corpus(words in proptest::collection::vec("[a-z]{1,8}", 1..40)) {
        let v = train_vocab(&words, 500).unwrap().with_frame(false);
        for w in &words {
            let seq = v.encode(w, 32);
            prop_assert!(!seq.tokens().contains(&v.specials().unk));
            prop_assert_eq!(&v.decode(&seq).unwrap(), w);
        }
    }

    #[test]
    fn label_codec_round_trips(labels in proptest::collection::vec("[a-z]{1,6}", 1..10)) {
        let recs = labels.iter().enumerate().map(|(i, l)| Record::new(i.to_string(), "", "x", l.as_str())).collect();
        let d = Dataset::new(recs).unwrap();
        let codec = fit_label_codec(&d).unwrap();
        for l in &labels {
            prop_assert_eq!(codec.decode(codec.encode(l).unwrap()).unwrap(), l.as_str());
        }
        prop_assert!(codec.classes().windows(2).all(|w| w[0] < w[1]));
    }
}
