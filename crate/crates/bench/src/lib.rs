//! Shared fixtures for the benchmarks.

use textbal::grid::{gen_synthetic, synthetic_lexicon, SynthSpec};
use textbal::textprep::{clean_dataset, CleanConfig};
use textbal::wordpiece::{train_vocab, TokenSeq, VocabModel};
use textbal::{Dataset, LabelCodec, SynonymLexicon};

pub struct Fixture {
    pub data: Dataset,
    pub lexicon: SynonymLexicon,
    pub vocab: VocabModel,
    pub codec: LabelCodec,
    pub seqs: Vec<TokenSeq>,
}

/// Cleaned synthetic corpus scaled by `factor`, with its vocabulary and
/// encoded sequences.
pub fn fixture(factor: usize) -> Fixture {
    let spec = SynthSpec {
        counts: [100, 10, 10, 5, 5].iter().map(|c| c * factor).collect(),
        ..SynthSpec::default()
    };
    let data = clean_dataset(
        &gen_synthetic(&spec).expect("valid spec"),
        &CleanConfig::default(),
    );
    let texts: Vec<String> = data.iter().map(|r| r.text()).collect();
    let vocab = train_vocab(&texts, 2000).expect("vocabulary fits");
    let codec = textbal::corpus::fit_label_codec(&data).expect("non-empty");
    let seqs = data
        .iter()
        .map(|r| {
            vocab
                .encode(&r.text(), 64)
                .with_label(codec.encode(&r.label).expect("known class"))
        })
        .collect();
    Fixture {
        data,
        lexicon: synthetic_lexicon(&spec),
        vocab,
        codec,
        seqs,
    }
}
