//! Seed data, budget caps and training-set assembly.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SeedMode;
use crate::conllu::{budget_sample_indices, Corpus, Origin, Sentence};
use crate::seed::{rng_from_seed, sub_seed};

/// The seed data B_i of one learner.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSample {
    pub learner_index: usize,
    pub sentences: Corpus,
}

/// Draws B_1..B_3; learner i uses `seeds[i - 1]`. `iteration` only matters
/// for [`SeedMode::Vanilla`], which resamples for the initial models and
/// uses full copies afterwards.
pub fn sample_seed_data(labelled: &Corpus, mode: SeedMode, seeds: [u64; 3], iteration: usize) -> [SeedSample; 3] {
    let n = labelled.len();
    let mut out = seeds.map(|_| None);
    for (k, &seed) in seeds.iter().enumerate() {
        let mut rng = rng_from_seed(seed);
        let indices: Vec<usize> = match mode {
            SeedMode::FullCopy => (0..n).collect(),
            SeedMode::Vanilla if iteration > 0 => (0..n).collect(),
            SeedMode::WithReplacement | SeedMode::Vanilla => (0..n).map(|_| rng.random_range(0..n)).collect(),
            SeedMode::TwoAndAHalf => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let twice = n.div_ceil(2);
                let mut thrice = vec![false; n];
                for &i in &order[twice..] {
                    thrice[i] = true;
                }
                // two full copies, then the complement of the random half
                let mut idx: Vec<usize> = (0..n).chain(0..n).collect();
                idx.extend((0..n).filter(|&i| thrice[i]));
                idx
            }
        };
        out[k] = Some(SeedSample {
            learner_index: k + 1,
            sentences: Corpus::new(
                indices.iter().map(|&i| labelled.sentences[i].clone()).collect(),
                Origin::Labelled,
            ),
        });
    }
    out.map(|s| s.expect("filled above"))
}

/// Splits the shortest decimal rendering of `d` into digits and scale, so
/// that d = digits / 10^scale exactly.
fn decimal_parts(d: f64) -> (BigUint, u32) {
    let text = d.to_string();
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: String = int.chars().chain(frac.chars()).collect();
    (
        digits.parse::<BigUint>().expect("non-negative decimal"),
        frac.len() as u32,
    )
}

/// floor(A * d^age) in tokens, computed exactly with d read as the decimal
/// it prints as (0.71 is 71/100). Age 0 gives A.
pub fn decay_cap(augment_size: usize, decay: f64, age: usize) -> usize {
    if age == 0 {
        return augment_size;
    }
    let (digits, scale) = decimal_parts(decay);
    let age = age as u32;
    let numerator = BigUint::from(augment_size) * digits.pow(age);
    let denominator = BigUint::from(10u32).pow(scale * age);
    (numerator / denominator)
        .to_usize()
        .expect("cap is at most A because d <= 1")
}

/// Indices kept by [`cap_to_budget`], or `None` when the set already fits.
pub fn cap_indices(set: &Corpus, budget: usize, seed: u64) -> Option<Vec<usize>> {
    if set.token_total() <= budget {
        return None;
    }
    let lengths: Vec<usize> = set.sentences.iter().map(Sentence::token_count).collect();
    Some(budget_sample_indices::<fn(usize) -> String>(&lengths, budget, seed, None))
}

/// Returns `set` unchanged when it fits in `budget` tokens, else a seeded
/// greedy whole-sentence sample under the budget.
pub fn cap_to_budget(set: &Corpus, budget: usize, seed: u64) -> Corpus {
    match cap_indices(set, budget, seed) {
        None => set.clone(),
        Some(idx) => set.select(&idx),
    }
}

/// Repeats whole sentences of `seed` in seeded random passes until at least
/// `target` tokens are reached. Returns `seed` unchanged when it already
/// has `target` tokens; otherwise every sentence appears at least once.
pub fn oversample(seed_data: &Corpus, target: usize, seed: u64) -> Corpus {
    let total = seed_data.token_total();
    if total >= target || seed_data.is_empty() {
        return seed_data.clone();
    }
    let mut rng = rng_from_seed(seed);
    let mut order: Vec<usize> = (0..seed_data.len()).collect();
    let mut sentences = Vec::new();
    let mut tokens = 0;
    while tokens < target {
        order.shuffle(&mut rng);
        for &i in &order {
            if tokens >= target {
                break;
            }
            tokens += seed_data.sentences[i].token_count();
            sentences.push(seed_data.sentences[i].clone());
        }
    }
    Corpus::new(sentences, seed_data.origin)
}

/// One history set's contribution to R.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryPart {
    pub from_iteration: usize,
    pub available_tokens: usize,
    pub cap_tokens: usize,
    pub taken_tokens: usize,
}

/// A training set B_i ++ R with its accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct Assembly {
    pub corpus: Corpus,
    pub seed_tokens: usize,
    pub reuse_tokens: usize,
    pub history: Vec<HistoryPart>,
}

/// Builds B_i ++ R for iteration t = history.len(). `history[t' - 1]` is
/// L_{t',i}; each is sampled down to min(|L_{t',i}|, A * d^(t - t')) tokens
/// with a fresh seeded sample, and the samples are concatenated in order of
/// t'. With `oversample`, B_i is first repeated up to R's token total.
pub fn assemble_training_set(
    seed_data: &Corpus,
    history: &[Corpus],
    augment_size: usize,
    decay: f64,
    oversample_seed_data: bool,
    seed: u64,
) -> Assembly {
    let t = history.len();
    let mut parts = Vec::with_capacity(t);
    let mut reuse: Vec<Sentence> = Vec::new();
    for (k, set) in history.iter().enumerate() {
        let from = k + 1;
        let available = set.token_total();
        let cap = decay_cap(augment_size, decay, t - from).min(available);
        let taken = cap_to_budget(set, cap, sub_seed(seed, "history", &[from as u64]));
        parts.push(HistoryPart {
            from_iteration: from,
            available_tokens: available,
            cap_tokens: cap,
            taken_tokens: taken.token_total(),
        });
        reuse.extend(taken.sentences);
    }
    let reuse_tokens: usize = parts.iter().map(|p| p.taken_tokens).sum();
    let seed_part = if oversample_seed_data {
        oversample(seed_data, reuse_tokens, sub_seed(seed, "oversample", &[]))
    } else {
        seed_data.clone()
    };
    let seed_tokens = seed_part.token_total();
    let mut sentences = seed_part.sentences;
    sentences.extend(reuse);
    Assembly {
        corpus: Corpus::new(sentences, Origin::Mixed),
        seed_tokens,
        reuse_tokens,
        history: parts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus_of(lengths: &[usize]) -> Corpus {
        Corpus::new(
            lengths
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let forms: Vec<String> = (0..n).map(|k| format!("s{}w{}", i, k)).collect();
                    Sentence::from_forms(&forms)
                })
                .collect(),
            Origin::Labelled,
        )
    }

    #[test]
    fn two_and_a_half_copies() {
        let l = corpus_of(&vec![3; 910]);
        for s in sample_seed_data(&l, SeedMode::TwoAndAHalf, [1, 2, 3], 0) {
            assert_eq!(s.sentences.len(), 2275);
            let mut counts = std::collections::HashMap::new();
            for x in &s.sentences.sentences {
                *counts.entry(x.forms_key()).or_insert(0) += 1;
            }
            assert_eq!(counts.len(), 910);
            assert_eq!(counts.values().filter(|&&c| c == 2).count(), 455);
            assert_eq!(counts.values().filter(|&&c| c == 3).count(), 455);
        }
        let odd = corpus_of(&[2; 7]);
        // four sentences twice, three sentences three times
        assert_eq!(sample_seed_data(&odd, SeedMode::TwoAndAHalf, [1, 2, 3], 0)[0].sentences.len(), 17);
    }

    #[test]
    fn full_copy_is_the_labelled_data() {
        let l = corpus_of(&[1, 2, 3]);
        for s in sample_seed_data(&l, SeedMode::FullCopy, [1, 2, 3], 0) {
            assert_eq!(s.sentences.sentences, l.sentences);
        }
        for s in sample_seed_data(&l, SeedMode::Vanilla, [1, 2, 3], 2) {
            assert_eq!(s.sentences.sentences, l.sentences);
        }
    }

    #[test]
    fn with_replacement_draws_golden_distinct_count() {
        let l = corpus_of(&vec![1; 100]);
        let b = sample_seed_data(&l, SeedMode::WithReplacement, [2024, 2025, 2026], 0);
        let distinct: Vec<usize> = b
            .iter()
            .map(|s| {
                assert_eq!(s.sentences.len(), 100);
                s.sentences
                    .sentences
                    .iter()
                    .map(Sentence::forms_key)
                    .collect::<std::collections::HashSet<_>>()
                    .len()
            })
            .collect();
        // 100 * (1 - 0.99^100) ~ 63.4 expected, sd ~ 3
        assert!(distinct.iter().all(|&d| (50..=75).contains(&d)));
        assert_eq!(distinct, GOLDEN_DISTINCT.to_vec());
    }

    const GOLDEN_DISTINCT: [usize; 3] = [67, 67, 58];

    #[test]
    fn decay_caps() {
        assert_eq!(decay_cap(80_000, 0.5, 2), 20_000);
        assert_eq!(
            [0, 1, 2].map(|age| decay_cap(40_000, 0.71, age)),
            [40_000, 28_400, 20_164]
        );
        assert_eq!(decay_cap(40_000, 0.0, 0), 40_000);
        assert_eq!(decay_cap(40_000, 0.0, 1), 0);
        assert_eq!(decay_cap(40_000, 1.0, 11), 40_000);
        // 7 * 0.3^3 = 0.189
        assert_eq!(decay_cap(7, 0.3, 3), 0);
        assert_eq!(decay_cap(1000, 0.3, 3), 27);
    }

    #[test]
    fn caps_to_budget() {
        let small = corpus_of(&[10, 10, 10]);
        assert_eq!(cap_to_budget(&small, 40, 1), small);
        assert_eq!(cap_to_budget(&small, 25, 1).len(), 2);
        let big = corpus_of(&vec![7; 100]);
        assert!(cap_to_budget(&big, 400, 1).token_total() <= 400);
    }

    #[test]
    fn assembly_with_zero_decay_uses_only_the_newest_data() {
        let b = corpus_of(&[5, 5]);
        let hist = vec![corpus_of(&[4, 4]), corpus_of(&[3, 3, 3])];
        let a = assemble_training_set(&b, &hist, 100, 0.0, false, 9);
        assert_eq!(a.reuse_tokens, 9);
        assert_eq!(a.history[0].cap_tokens, 0);
        assert_eq!(a.corpus.len(), 2 + 3);
        assert_eq!(&a.corpus.sentences[2..], &hist[1].sentences[..]);
    }

    #[test]
    fn assembly_with_full_decay_concatenates_everything() {
        let b = corpus_of(&[5, 5]);
        let hist = vec![corpus_of(&[4, 4]), corpus_of(&[3, 3, 3])];
        let a = assemble_training_set(&b, &hist, 100, 1.0, false, 9);
        let expected: Vec<Sentence> = b
            .sentences
            .iter()
            .chain(&hist[0].sentences)
            .chain(&hist[1].sentences)
            .cloned()
            .collect();
        assert_eq!(a.corpus.sentences, expected);
    }

    #[test]
    fn oversampling_reaches_reuse_size() {
        let b = corpus_of(&[5, 5]);
        let hist = vec![corpus_of(&[4; 20])];
        let a = assemble_training_set(&b, &hist, 100, 1.0, true, 3);
        assert_eq!(a.reuse_tokens, 80);
        assert_eq!(a.seed_tokens, 80);
        assert_eq!(a.corpus.token_total(), 160);
        // never shrinks the seed data
        let a = assemble_training_set(&corpus_of(&vec![5; 30]), &hist, 100, 1.0, true, 3);
        assert_eq!(a.seed_tokens, 150);
        // first overshoot is kept
        let o = oversample(&corpus_of(&[5, 5]), 12, 1);
        assert_eq!(o.token_total(), 15);
    }

    proptest! {
        #[test]
        fn history_respects_caps(
            sizes in prop::collection::vec(prop::collection::vec(1usize..15, 0..20), 1..6),
            a in 1usize..200,
            d in 0u32..=100,
            o in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let d = f64::from(d) / 100.0;
            let hist: Vec<Corpus> = sizes.iter().map(|s| corpus_of(s)).collect();
            let b = corpus_of(&[6, 6]);
            let asm = assemble_training_set(&b, &hist, a, d, o, seed);
            let t = hist.len();
            for part in &asm.history {
                prop_assert!(part.taken_tokens <= part.cap_tokens);
                prop_assert!(part.cap_tokens <= decay_cap(a, d, t - part.from_iteration));
                if part.available_tokens <= decay_cap(a, d, t - part.from_iteration) {
                    prop_assert_eq!(part.taken_tokens, part.available_tokens);
                }
            }
            prop_assert_eq!(asm.corpus.token_total(), asm.seed_tokens + asm.reuse_tokens);
            prop_assert!(asm.seed_tokens >= b.token_total());
            if o {
                prop_assert!(asm.seed_tokens >= asm.reuse_tokens);
            }
        }
    }
}
