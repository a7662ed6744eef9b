//! Linear tree combination.
//!
//! Trees are combined greedily from the root down: starting from the virtual
//! root, the combiner repeatedly attaches the most-voted arc whose head is
//! already in the partial tree and whose dependent is not. Ties among arcs
//! with equal votes are broken uniformly at random, so combined trees (and
//! their scores) depend on the seed; evaluation therefore averages over
//! several repeats.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conllu::{Column, Corpus, Origin, Sentence};
use crate::error::{Error, Result};
use crate::metrics::{check_sentence_alignment, evaluate};
use crate::seed::{rng_from_seed, sub_seed};

/// How votes are counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// Each system votes for one (head, deprel) pair.
    #[default]
    ExactPair,
    /// Votes count heads only; the label is the plurality label among the
    /// systems proposing the chosen head.
    HeadThenLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombinerConfig {
    pub repeats: usize,
    pub base_seed: u64,
    pub mode: VoteMode,
}

impl Default for CombinerConfig {
    fn default() -> Self {
        CombinerConfig {
            repeats: 21,
            base_seed: 0,
            mode: VoteMode::ExactPair,
        }
    }
}

impl CombinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("combiner repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// One candidate arc for one dependent. Indices are 1-based, head 0 is the
/// root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArcVote {
    pub dependent: usize,
    pub head: usize,
    pub deprel: String,
    pub votes: usize,
    pub proposers: Vec<usize>,
}

/// Candidate arcs grouped per dependent, in order of first proposal.
pub fn arc_votes(trees: &[&Sentence], mode: VoteMode) -> Vec<Vec<ArcVote>> {
    let n = trees.first().map_or(0, |t| t.len());
    let mut out = Vec::with_capacity(n);
    for dep in 1..=n {
        let mut cands: Vec<ArcVote> = Vec::new();
        for (sys, tree) in trees.iter().enumerate() {
            let tok = &tree.tokens[dep - 1];
            let found = cands.iter_mut().find(|c| {
                c.head == tok.head && (mode == VoteMode::HeadThenLabel || c.deprel == tok.deprel)
            });
            match found {
                Some(c) => {
                    c.votes += 1;
                    c.proposers.push(sys);
                }
                None => cands.push(ArcVote {
                    dependent: dep,
                    head: tok.head,
                    deprel: tok.deprel.clone(),
                    votes: 1,
                    proposers: vec![sys],
                }),
            }
        }
        out.push(cands);
    }
    out
}

fn check_inputs(trees: &[&Sentence]) -> Result<()> {
    if trees.len() < 2 {
        return Err(Error::Config("tree combination needs at least two trees".into()));
    }
    for t in &trees[1..] {
        check_sentence_alignment(0, trees[0], t)?;
    }
    Ok(())
}

/// Picks uniformly among the values with the highest count; `values` is in
/// system order.
fn plurality<'a, R: Rng>(values: impl Iterator<Item = &'a str>, rng: &mut R) -> String {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for v in values {
        match counts.iter_mut().find(|(x, _)| *x == v) {
            Some((_, c)) => *c += 1,
            None => counts.push((v, 1)),
        }
    }
    let best = counts.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let tied: Vec<&str> = counts.iter().filter(|(_, c)| *c == best).map(|(v, _)| *v).collect();
    let pick = if tied.len() > 1 { rng.random_range(0..tied.len()) } else { 0 };
    tied.get(pick).map_or_else(|| "_".to_string(), |s| s.to_string())
}

/// Combines token-aligned trees into one valid tree.
pub fn combine_trees<R: Rng>(trees: &[&Sentence], mode: VoteMode, rng: &mut R) -> Result<Sentence> {
    check_inputs(trees)?;
    let n = trees[0].len();
    let votes = arc_votes(trees, mode);
    let mut attached = vec![false; n + 1];
    attached[0] = true;
    let mut chosen: Vec<Option<(usize, String)>> = vec![None; n];
    let mut root_used = false;

    for _ in 0..n {
        let mut best = 0;
        let mut tied: Vec<&ArcVote> = Vec::new();
        for (dep0, cands) in votes.iter().enumerate() {
            if attached[dep0 + 1] {
                continue;
            }
            for c in cands {
                if !attached[c.head] || (c.head == 0 && root_used) {
                    continue;
                }
                if c.votes > best {
                    best = c.votes;
                    tied.clear();
                }
                if c.votes == best {
                    tied.push(c);
                }
            }
        }
        // A tree proposing the chosen root always offers an attachable arc
        // for every remaining dependent, so this cannot trigger on valid input.
        if tied.is_empty() {
            return Err(Error::validation(0, "tree combination got stuck"));
        }
        let pick = if tied.len() > 1 { rng.random_range(0..tied.len()) } else { 0 };
        let arc = tied[pick];
        let deprel = match mode {
            VoteMode::ExactPair => arc.deprel.clone(),
            VoteMode::HeadThenLabel => plurality(
                arc.proposers.iter().map(|&s| trees[s].tokens[arc.dependent - 1].deprel.as_str()),
                rng,
            ),
        };
        attached[arc.dependent] = true;
        root_used |= arc.head == 0;
        chosen[arc.dependent - 1] = Some((arc.head, deprel));
    }

    let mut out = trees[0].clone();
    for (k, tok) in out.tokens.iter_mut().enumerate() {
        let (head, deprel) = chosen[k].take().expect("every token attached");
        tok.head = head;
        tok.deprel = deprel;
        for col in [Column::Lemma, Column::Upos, Column::Xpos, Column::Feats] {
            let values: Vec<_> = trees.iter().map(|t| t.tokens[k].column(col)).collect();
            let value = plurality(values.iter().map(|v| v.as_ref()), rng);
            tok.set_column(col, &value);
        }
    }
    Ok(out)
}

/// Seed of the combiner stream for one sentence of one repeat.
pub fn sentence_seed(base_seed: u64, repeat: usize, sentence: usize) -> u64 {
    sub_seed(base_seed, "combine", &[repeat as u64, sentence as u64])
}

fn combine_once(corpora: &[&Corpus], mode: VoteMode, base_seed: u64, repeat: usize) -> Result<Corpus> {
    let n = corpora[0].len();
    let sentences = (0..n)
        .map(|s| {
            let trees: Vec<&Sentence> = corpora.iter().map(|c| &c.sentences[s]).collect();
            let mut rng = rng_from_seed(sentence_seed(base_seed, repeat, s));
            combine_trees(&trees, mode, &mut rng).map_err(|e| match e {
                Error::Validation { message, .. } => Error::validation(s, message),
                Error::Alignment { message, .. } => Error::alignment(s, message),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::new(sentences, Origin::Predicted))
}

/// Returns `config.repeats` combined corpora; repeat `r` is seeded by
/// `(base_seed, r)` and each sentence by its own sub-stream.
pub fn combine_corpora(corpora: &[&Corpus], config: &CombinerConfig) -> Result<Vec<Corpus>> {
    config.validate()?;
    if corpora.len() < 2 {
        return Err(Error::Config("tree combination needs at least two corpora".into()));
    }
    for c in &corpora[1..] {
        if c.len() != corpora[0].len() {
            return Err(Error::alignment(
                c.len().min(corpora[0].len()),
                format!("corpora have {} and {} sentences", corpora[0].len(), c.len()),
            ));
        }
    }
    (0..config.repeats)
        .into_par_iter()
        .map(|r| combine_once(corpora, config.mode, config.base_seed, r))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScore {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub per_repeat: Vec<f64>,
}

impl EnsembleScore {
    pub fn from_scores(per_repeat: Vec<f64>) -> Self {
        let mean = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;
        let min = per_repeat.iter().copied().fold(f64::INFINITY, f64::min);
        let max = per_repeat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        EnsembleScore {
            mean,
            min,
            max,
            per_repeat,
        }
    }
}

/// Combines `config.repeats` times and scores every repeat against `gold`.
pub fn averaged_ensemble_las(corpora: &[&Corpus], gold: &Corpus, config: &CombinerConfig) -> Result<EnsembleScore> {
    let combined = combine_corpora(corpora, config)?;
    let scores = combined
        .iter()
        .map(|c| evaluate(gold, c).map(|r| r.las))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleScore::from_scores(scores))
}
