//! Agreement-based selection of automatically labelled sentences.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{Column, Corpus, Origin, Sentence};
use crate::error::{Error, Result};
use crate::metrics::check_alignment;

/// Where a selected sentence came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Position in the parsed sample U'.
    pub source: usize,
    /// The two agreeing learners (1-based, ascending); labels are the
    /// first one's.
    pub teachers: (usize, usize),
    pub unanimous: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementStats {
    /// Exactly one pair agreed.
    pub pairwise: usize,
    /// All three agreed.
    pub unanimous: usize,
    /// No pair agreed.
    pub discarded: usize,
}

/// The sets L_{t,1..3} produced in one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationData {
    pub t: usize,
    pub sets: [Corpus; 3],
    pub provenance: [Vec<Provenance>; 3],
    pub stats: AgreementStats,
}

impl IterationData {
    /// Keeps only the listed positions of learner `i`'s set (0-based `i`).
    pub fn retain(&mut self, i: usize, keep: &[usize]) {
        self.sets[i] = self.sets[i].select(keep);
        self.provenance[i] = keep.iter().map(|&k| self.provenance[i][k]).collect();
    }
}

fn agree(a: &Sentence, b: &Sentence, columns: &[Column]) -> bool {
    a.tokens
        .iter()
        .zip(&b.tokens)
        .all(|(x, y)| columns.iter().all(|&c| x.same_in(y, c)))
}

/// Splits the three learners' predictions over U' into L_{t,1..3}.
///
/// A sentence on which exactly one pair (j, k) agrees in every compared
/// column of every token goes to the third learner with j's labels. When
/// all three agree the receiver is drawn uniformly with one `rng` draw per
/// such sentence, in sentence order. Other sentences are dropped.
pub fn agreement_filter<R: Rng>(t: usize, preds: [&Corpus; 3], columns: &[Column], rng: &mut R) -> Result<IterationData> {
    check_alignment(preds[0], preds[1])?;
    check_alignment(preds[0], preds[2])?;
    if columns.is_empty() {
        return Err(Error::Config("agreement needs at least one column".into()));
    }
    let mut sets: [Vec<Sentence>; 3] = Default::default();
    let mut provenance: [Vec<Provenance>; 3] = Default::default();
    let mut stats = AgreementStats::default();
    for s in 0..preds[0].len() {
        let [p1, p2, p3] = preds.map(|p| &p.sentences[s]);
        let a12 = agree(p1, p2, columns);
        let a13 = agree(p1, p3, columns);
        let a23 = agree(p2, p3, columns);
        let (receiver, teachers, unanimous) = match (a12, a13, a23) {
            (true, true, true) => {
                stats.unanimous += 1;
                let r = rng.random_range(0..3);
                let teachers = match r {
                    0 => (2, 3),
                    1 => (1, 3),
                    _ => (1, 2),
                };
                (r, teachers, true)
            }
            (true, false, false) => (2, (1, 2), false),
            (false, true, false) => (1, (1, 3), false),
            (false, false, true) => (0, (2, 3), false),
            (false, false, false) => {
                stats.discarded += 1;
                continue;
            }
            // agreement is an equivalence: two agreeing pairs imply the third
            _ => unreachable!("agreement is transitive"),
        };
        if !unanimous {
            stats.pairwise += 1;
        }
        sets[receiver].push(preds[teachers.0 - 1].sentences[s].clone());
        provenance[receiver].push(Provenance {
            source: s,
            teachers,
            unanimous,
        });
    }
    Ok(IterationData {
        t,
        sets: sets.map(|v| Corpus::new(v, Origin::Predicted)),
        provenance,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn sent(heads: &[usize]) -> Sentence {
        let forms: Vec<String> = (0..heads.len()).map(|i| format!("w{}", i)).collect();
        let mut s = Sentence::from_forms(&forms);
        for (t, &h) in s.tokens.iter_mut().zip(heads) {
            t.head = h;
            t.deprel = if h == 0 { "root".into() } else { "dep".into() };
        }
        s
    }

    fn corpus(s: Vec<Sentence>) -> Corpus {
        Corpus::new(s, Origin::Predicted)
    }

    const COLS: [Column; 3] = [Column::Upos, Column::Head, Column::Deprel];

    #[test]
    fn pair_agreement_feeds_the_third_learner() {
        let mut a = sent(&[2, 0, 2]);
        a.tokens[0].lemma = "from-learner-1".into();
        let b = sent(&[2, 0, 2]);
        let c = sent(&[0, 1, 2]);
        let d = agreement_filter(1, [&corpus(vec![a.clone()]), &corpus(vec![b]), &corpus(vec![c])], &COLS, &mut rng_from_seed(0))
            .unwrap();
        assert!(d.sets[0].is_empty() && d.sets[1].is_empty());
        assert_eq!(d.sets[2].sentences, vec![a]);
        assert_eq!(d.provenance[2][0].teachers, (1, 2));
        assert_eq!(d.stats, AgreementStats { pairwise: 1, unanimous: 0, discarded: 0 });
    }

    #[test]
    fn disagreement_discards() {
        let mut relabelled = sent(&[0, 1]);
        relabelled.tokens[1].deprel = "other".into();
        let d = agreement_filter(
            1,
            [&corpus(vec![sent(&[0, 1])]), &corpus(vec![sent(&[2, 0])]), &corpus(vec![relabelled])],
            &COLS,
            &mut rng_from_seed(0),
        )
        .unwrap();
        assert!(d.sets.iter().all(Corpus::is_empty));
        assert_eq!(d.stats.discarded, 1);
    }

    #[test]
    fn uncompared_columns_do_not_block_agreement() {
        let a = sent(&[0, 1]);
        let mut b = a.clone();
        b.tokens[0].lemma = "x".into();
        let c = sent(&[2, 0]);
        let d = agreement_filter(1, [&corpus(vec![a]), &corpus(vec![b.clone()]), &corpus(vec![c])], &COLS, &mut rng_from_seed(0))
            .unwrap();
        assert_eq!(d.sets[2].len(), 1);
        let d = agreement_filter(
            1,
            [&corpus(vec![sent(&[0, 1])]), &corpus(vec![b]), &corpus(vec![sent(&[2, 0])])],
            &[Column::Lemma, Column::Head, Column::Deprel],
            &mut rng_from_seed(0),
        )
        .unwrap();
        assert_eq!(d.stats.discarded, 1);
    }

    #[test]
    fn unanimous_sentences_are_spread_uniformly() {
        let c = corpus(vec![sent(&[2, 0, 2]); 3000]);
        let d = agreement_filter(1, [&c, &c, &c], &COLS, &mut rng_from_seed(GOLDEN_SEED)).unwrap();
        let counts = d.sets.each_ref().map(Corpus::len);
        assert_eq!(counts.iter().sum::<usize>(), 3000);
        // binomial(3000, 1/3): sd = sqrt(3000 * 2/9) ~ 25.8
        for &n in &counts {
            assert!((n as f64 - 1000.0).abs() < 3.0 * 25.82, "{:?}", counts);
        }
        assert_eq!(counts, GOLDEN_COUNTS);
        for (i, prov) in d.provenance.iter().enumerate() {
            for p in prov {
                assert!(p.unanimous);
                assert!(p.teachers.0 != i + 1 && p.teachers.1 != i + 1);
            }
        }
    }

    const GOLDEN_SEED: u64 = 20_240_601;
    const GOLDEN_COUNTS: [usize; 3] = [1035, 987, 978];

    #[test]
    fn misaligned_predictions_fail() {
        let r = agreement_filter(
            1,
            [&corpus(vec![sent(&[0])]), &corpus(vec![sent(&[0, 1])]), &corpus(vec![sent(&[0])])],
            &COLS,
            &mut rng_from_seed(0),
        );
        assert!(r.is_err());
    }
}
