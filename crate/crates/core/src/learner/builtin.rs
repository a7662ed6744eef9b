//! Built-in learner: an averaged-perceptron UPOS tagger feeding a greedy (or
//! beam) arc-standard parser that predicts transitions and labels jointly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::perceptron::{argmax_masked, FeatureHash, Perceptron, PerceptronTrainer};
use super::transition::{oracle_moves, Move, State, NONE};
use crate::conllu::{Column, Corpus, Origin, Sentence};
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

const MAGIC: &[u8; 8] = b"TTPMv01\n";

/// What happened during training.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainReport {
    pub sentences: usize,
    pub tokens: usize,
    /// Non-projective sentences left out of parser training.
    pub non_projective_excluded: usize,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    tags: Vec<String>,
    labels: Vec<String>,
    root_labels: Vec<bool>,
    nonroot_labels: Vec<bool>,
    /// form -> [lemma, xpos, feats], most frequent in training.
    lexicon: BTreeMap<String, [String; 3]>,
    predicted: Vec<Column>,
    beam: usize,
    report: TrainReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuiltinModel {
    header: Header,
    tagger: Perceptron,
    parser: Perceptron,
}

const PAD_L: &str = "<s>";
const PAD_R: &str = "</s>";
const ROOT: &str = "<root>";
const NIL: &str = "<nil>";

fn suffix(w: &str, n: usize) -> &str {
    let start = w.char_indices().rev().nth(n.saturating_sub(1)).map_or(0, |(i, _)| i);
    &w[start..]
}

fn prefix(w: &str, n: usize) -> &str {
    let end = w.char_indices().nth(n).map_or(w.len(), |(i, _)| i);
    &w[..end]
}

fn shape(w: &str) -> &'static str {
    let mut upper = false;
    let mut digit = false;
    let mut alpha = false;
    for c in w.chars() {
        upper |= c.is_uppercase();
        digit |= c.is_numeric();
        alpha |= c.is_alphabetic();
    }
    match (upper, digit, alpha) {
        (_, true, false) => "num",
        (_, true, true) => "alnum",
        (true, _, _) => "cap",
        (false, false, true) => "lower",
        _ => "sym",
    }
}

fn tagger_features(forms: &[&str], tags: &[usize], tag_names: &[String], i: usize, out: &mut Vec<u64>) {
    out.clear();
    let word = |k: isize| -> &str {
        let j = i as isize + k;
        if j < 0 {
            PAD_L
        } else if j as usize >= forms.len() {
            PAD_R
        } else {
            forms[j as usize]
        }
    };
    let tag = |k: usize| -> &str {
        if i < k {
            PAD_L
        } else {
            &tag_names[tags[i - k]]
        }
    };
    let w = word(0);
    let f = FeatureHash::new;
    out.push(f(0).finish());
    out.push(f(1).str(w).finish());
    out.push(f(2).str(suffix(w, 3)).finish());
    out.push(f(3).str(suffix(w, 2)).finish());
    out.push(f(4).str(prefix(w, 2)).finish());
    out.push(f(5).str(tag(1)).finish());
    out.push(f(6).str(tag(2)).str(tag(1)).finish());
    out.push(f(7).str(word(-1)).finish());
    out.push(f(8).str(word(1)).finish());
    out.push(f(9).str(word(-2)).finish());
    out.push(f(10).str(word(2)).finish());
    out.push(f(11).str(tag(1)).str(w).finish());
    out.push(f(12).str(suffix(word(1), 3)).finish());
    out.push(f(13).str(suffix(word(-1), 3)).finish());
    out.push(f(14).str(shape(w)).finish());
    out.push(f(15).str(word(-1)).str(w).finish());
    out.push(f(16).str(w).str(word(1)).finish());
}

struct ParseView<'a> {
    forms: &'a [&'a str],
    tags: &'a [&'a str],
    labels: &'a [String],
}

impl ParseView<'_> {
    fn word(&self, p: Option<usize>) -> &str {
        match p {
            None | Some(NONE) => NIL,
            Some(0) => ROOT,
            Some(p) => self.forms[p - 1],
        }
    }

    fn tag(&self, p: Option<usize>) -> &str {
        match p {
            None | Some(NONE) => NIL,
            Some(0) => ROOT,
            Some(p) => self.tags[p - 1],
        }
    }

    fn label(&self, state: &State, p: Option<usize>) -> &str {
        match p {
            Some(p) if p != NONE && state.labels[p] != NONE => &self.labels[state.labels[p]],
            _ => NIL,
        }
    }
}

fn parser_features(view: &ParseView<'_>, state: &State, out: &mut Vec<u64>) {
    out.clear();
    let s0 = state.s(0);
    let s1 = state.s(1);
    let s2 = state.s(2);
    let b0 = state.b(0);
    let b1 = state.b(1);
    let b2 = state.b(2);
    let child = |p: Option<usize>, v: &Vec<usize>| p.map(|p| v[p]);
    let s0l = child(s0, &state.leftmost);
    let s0r = child(s0, &state.rightmost);
    let s1l = child(s1, &state.leftmost);
    let s1r = child(s1, &state.rightmost);

    let (s0w, s0t) = (view.word(s0), view.tag(s0));
    let (s1w, s1t) = (view.word(s1), view.tag(s1));
    let (b0w, b0t) = (view.word(b0), view.tag(b0));
    let (b1w, b1t) = (view.word(b1), view.tag(b1));
    let s2t = view.tag(s2);
    let b2t = view.tag(b2);
    let dist = match (s0, s1) {
        (Some(a), Some(b)) => (a - b).min(5),
        _ => 0,
    };
    let s0_left = s0.map_or(0, |p| state.left_count[p] as usize);
    let s0_right = s0.map_or(0, |p| state.right_count[p] as usize);
    let s1_right = s1.map_or(0, |p| state.right_count[p] as usize);

    let f = FeatureHash::new;
    out.push(f(0).finish());
    out.push(f(1).str(s0w).finish());
    out.push(f(2).str(s0t).finish());
    out.push(f(3).str(s0w).str(s0t).finish());
    out.push(f(4).str(s1w).finish());
    out.push(f(5).str(s1t).finish());
    out.push(f(6).str(s1w).str(s1t).finish());
    out.push(f(7).str(b0w).finish());
    out.push(f(8).str(b0t).finish());
    out.push(f(9).str(b0w).str(b0t).finish());
    out.push(f(10).str(b1w).finish());
    out.push(f(11).str(b1t).finish());
    out.push(f(12).str(b2t).finish());
    out.push(f(13).str(s2t).finish());
    out.push(f(14).str(s0t).str(s1t).finish());
    out.push(f(15).str(s0w).str(s1w).finish());
    out.push(f(16).str(s0w).str(s1t).finish());
    out.push(f(17).str(s0t).str(s1w).finish());
    out.push(f(18).str(s0t).str(b0t).finish());
    out.push(f(19).str(s0w).str(b0w).finish());
    out.push(f(20).str(s1t).str(s0t).str(b0t).finish());
    out.push(f(21).str(s2t).str(s1t).str(s0t).finish());
    out.push(f(22).str(s0t).str(b0t).str(b1t).finish());
    out.push(f(23).str(view.label(state, s0l)).finish());
    out.push(f(24).str(view.label(state, s0r)).finish());
    out.push(f(25).str(view.label(state, s1l)).finish());
    out.push(f(26).str(view.label(state, s1r)).finish());
    out.push(f(27).str(s1t).str(s0t).str(view.label(state, s0l)).finish());
    out.push(f(28).str(s1t).str(s0t).str(view.label(state, s1r)).finish());
    out.push(f(29).str(s0t).str(view.tag(s0l)).finish());
    out.push(f(30).str(s1t).str(view.tag(s1r)).finish());
    out.push(f(31).num(dist).str(s0t).str(s1t).finish());
    out.push(f(32).num(dist).str(s0w).str(s1w).finish());
    out.push(f(33).str(s0t).num(s0_left).num(s0_right).finish());
    out.push(f(34).str(s1t).num(s1_right).finish());
    out.push(f(35).str(s1w).str(s0w).str(b0t).finish());
    out.push(f(36).str(s0w).str(s0t).str(s1w).str(s1t).finish());
    out.push(f(37).str(s1t).str(s0w).str(b0w).finish());
    out.push(f(38).str(view.word(s1r)).str(s1w).str(s0w).finish());
    out.push(f(39).num(state.stack.len().min(6)).num(usize::from(b0.is_none())).finish());
}

fn class_of(mv: Move, label: usize) -> usize {
    match mv {
        Move::Shift => 0,
        Move::Left(_) => 1 + 2 * label,
        Move::Right(_) => 2 + 2 * label,
    }
}

fn move_of(class: usize) -> Move {
    match class {
        0 => Move::Shift,
        c if c % 2 == 1 => Move::Left((c - 1) / 2),
        c => Move::Right((c - 2) / 2),
    }
}

fn legal(state: &State, header: &Header, class: usize) -> bool {
    match move_of(class) {
        Move::Shift => state.can_shift(),
        Move::Left(l) => state.can_left() && header.nonroot_labels[l],
        Move::Right(l) => {
            state.can_right()
                && if state.right_attaches_root() {
                    header.root_labels[l]
                } else {
                    header.nonroot_labels[l]
                }
        }
    }
}

fn most_frequent(counts: HashMap<String, usize>) -> String {
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
        .map(|(v, _)| v)
        .unwrap_or_else(|| "_".to_string())
}

impl BuiltinModel {
    pub fn train(corpus: &Corpus, predicted: &[Column], epochs: usize, beam: usize, seed: u64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("training corpus has no sentences".into()));
        }
        corpus.check_trees()?;

        let tags: Vec<String> = corpus
            .sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.upos.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let labels: Vec<String> = corpus
            .sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.deprel.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let tag_index: HashMap<String, usize> = tags.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let label_index: HashMap<String, usize> = labels.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let mut root_labels = vec![false; labels.len()];
        let mut nonroot_labels = vec![false; labels.len()];
        let mut lex_counts: HashMap<String, [HashMap<String, usize>; 3]> = HashMap::new();
        for s in &corpus.sentences {
            for t in &s.tokens {
                let l = label_index[t.deprel.as_str()];
                if t.head == 0 {
                    root_labels[l] = true;
                } else {
                    nonroot_labels[l] = true;
                }
                let entry = lex_counts.entry(t.form.clone()).or_default();
                for (k, v) in [&t.lemma, &t.xpos, &t.feats].into_iter().enumerate() {
                    *entry[k].entry(v.clone()).or_default() += 1;
                }
            }
        }
        if !nonroot_labels.iter().any(|&b| b) {
            // single-token training data only; allow every label below the root
            nonroot_labels.iter_mut().for_each(|b| *b = true);
        }
        let lexicon = lex_counts
            .into_iter()
            .map(|(form, [a, b, c])| (form, [most_frequent(a), most_frequent(b), most_frequent(c)]))
            .collect();

        let mut report = TrainReport {
            sentences: corpus.len(),
            tokens: corpus.token_total(),
            non_projective_excluded: 0,
            epochs,
        };

        let mut oracles: Vec<Option<Vec<Move>>> = Vec::with_capacity(corpus.len());
        for s in &corpus.sentences {
            match oracle_moves(&s.heads()) {
                Ok(m) => oracles.push(Some(m)),
                Err(_) => {
                    report.non_projective_excluded += 1;
                    oracles.push(None);
                }
            }
        }

        let mut header = Header {
            tags,
            labels,
            root_labels,
            nonroot_labels,
            lexicon,
            predicted: predicted.to_vec(),
            beam: beam.max(1),
            report,
        };

        let mut rng = rng_from_seed(seed);
        let mut order: Vec<usize> = (0..corpus.len()).collect();

        let mut tagger = PerceptronTrainer::new(header.tags.len());
        let mut feats = Vec::with_capacity(64);
        let mut scores = Vec::new();
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &si in &order {
                let s = &corpus.sentences[si];
                let forms: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
                let mut guessed: Vec<usize> = Vec::with_capacity(forms.len());
                for (i, t) in s.tokens.iter().enumerate() {
                    tagger_features(&forms, &guessed, &header.tags, i, &mut feats);
                    tagger.scores(&feats, &mut scores);
                    let guess = argmax_masked(&scores, |_| true).expect("at least one tag");
                    tagger.update(&feats, tag_index[t.upos.as_str()], guess);
                    guessed.push(guess);
                }
            }
        }

        let n_classes = 1 + 2 * header.labels.len();
        let mut parser = PerceptronTrainer::new(n_classes);
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &si in &order {
                let Some(moves) = &oracles[si] else { continue };
                let s = &corpus.sentences[si];
                let forms: Vec<&str> = s.tokens.iter().map(|t| t.form.as_str()).collect();
                let tags: Vec<&str> = s.tokens.iter().map(|t| t.upos.as_str()).collect();
                let view = ParseView {
                    forms: &forms,
                    tags: &tags,
                    labels: &header.labels,
                };
                let mut state = State::new(s.len());
                for &mv in moves {
                    let gold = match mv {
                        Move::Shift => 0,
                        Move::Left(dep) | Move::Right(dep) => {
                            class_of(mv, label_index[s.tokens[dep - 1].deprel.as_str()])
                        }
                    };
                    parser_features(&view, &state, &mut feats);
                    parser.scores(&feats, &mut scores);
                    let guess = argmax_masked(&scores, |c| legal(&state, &header, c)).expect("a legal move");
                    parser.update(&feats, gold, guess);
                    state.apply(move_of(gold));
                }
            }
        }

        header.report.epochs = epochs;
        Ok(BuiltinModel {
            header,
            tagger: tagger.finish(),
            parser: parser.finish(),
        })
    }

    pub fn report(&self) -> &TrainReport {
        &self.header.report
    }

    fn tag(&self, forms: &[&str]) -> Vec<usize> {
        let mut tags = Vec::with_capacity(forms.len());
        let mut feats = Vec::with_capacity(32);
        let mut scores = Vec::new();
        for i in 0..forms.len() {
            tagger_features(forms, &tags, &self.header.tags, i, &mut feats);
            self.tagger.scores(&feats, &mut scores);
            tags.push(argmax_masked(&scores, |_| true).expect("at least one tag"));
        }
        tags
    }

    fn parse(&self, forms: &[&str], tags: &[&str]) -> State {
        let view = ParseView {
            forms,
            tags,
            labels: &self.header.labels,
        };
        let mut feats = Vec::with_capacity(64);
        let mut scores = Vec::new();
        if self.header.beam <= 1 {
            let mut state = State::new(forms.len());
            while !state.is_terminal() {
                parser_features(&view, &state, &mut feats);
                self.parser.scores(&feats, &mut scores);
                let best = argmax_masked(&scores, |c| legal(&state, &self.header, c)).expect("a legal move");
                state.apply(move_of(best));
            }
            return state;
        }

        let mut beam: Vec<(f64, State)> = vec![(0.0, State::new(forms.len()))];
        while !beam[0].1.is_terminal() {
            let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
            for (bi, (score, state)) in beam.iter().enumerate() {
                parser_features(&view, state, &mut feats);
                self.parser.scores(&feats, &mut scores);
                for (c, &s) in scores.iter().enumerate() {
                    if legal(state, &self.header, c) {
                        candidates.push((score + f64::from(s), bi, c));
                    }
                }
            }
            // stable: equal scores keep beam order, then class order
            candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
            candidates.truncate(self.header.beam);
            beam = candidates
                .into_iter()
                .map(|(score, bi, c)| {
                    let mut st = beam[bi].1.clone();
                    st.apply(move_of(c));
                    (score, st)
                })
                .collect();
        }
        beam.swap_remove(0).1
    }

    pub fn predict_sentence(&self, input: &Sentence) -> Sentence {
        let mut out = input.clone();
        if input.is_empty() {
            return out;
        }
        let forms: Vec<&str> = input.tokens.iter().map(|t| t.form.as_str()).collect();
        let tag_ids = self.tag(&forms);
        let tags: Vec<&str> = tag_ids.iter().map(|&t| self.header.tags[t].as_str()).collect();
        let state = self.parse(&forms, &tags);
        let predicted = |c: Column| self.header.predicted.contains(&c);
        for (k, t) in out.tokens.iter_mut().enumerate() {
            let pos = k + 1;
            t.head = state.heads[pos];
            t.deprel = self.header.labels[state.labels[pos]].clone();
            t.upos = if predicted(Column::Upos) { tags[k].to_string() } else { "_".into() };
            let lex = self.header.lexicon.get(&t.form);
            t.lemma = if predicted(Column::Lemma) {
                lex.map_or_else(|| t.form.clone(), |l| l[0].clone())
            } else {
                "_".into()
            };
            t.xpos = match (predicted(Column::Xpos), lex) {
                (true, Some(l)) => l[1].clone(),
                _ => "_".into(),
            };
            t.feats = match (predicted(Column::Feats), lex) {
                (true, Some(l)) => l[2].clone(),
                _ => "_".into(),
            };
        }
        out
    }

    pub fn predict(&self, input: &Corpus) -> Corpus {
        Corpus::new(
            input.sentences.iter().map(|s| self.predict_sentence(s)).collect(),
            Origin::Predicted,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&self.header).map_err(|e| Error::Model {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAGIC)?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        self.tagger.write_to(&mut out)?;
        self.parser.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |message: String| Error::Model {
            path: path.to_path_buf(),
            message,
        };
        let file = std::fs::File::open(path).map_err(|e| corrupt(e.to_string()))?;
        let mut input = std::io::BufReader::new(file);
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(|e| corrupt(e.to_string()))?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic".into()));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len).map_err(|e| corrupt(e.to_string()))?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        input.read_exact(&mut header).map_err(|e| corrupt(e.to_string()))?;
        let header: Header = serde_json::from_slice(&header).map_err(|e| corrupt(e.to_string()))?;
        let tagger = Perceptron::read_from(&mut input).map_err(|e| corrupt(e.to_string()))?;
        let parser = Perceptron::read_from(&mut input).map_err(|e| corrupt(e.to_string()))?;
        if tagger.n_classes() != header.tags.len() || parser.n_classes() != 1 + 2 * header.labels.len() {
            return Err(corrupt("class counts do not match header".into()));
        }
        Ok(BuiltinModel { header, tagger, parser })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affixes_respect_char_boundaries() {
        assert_eq!(suffix("héllo", 3), "llo");
        assert_eq!(suffix("ab", 3), "ab");
        assert_eq!(prefix("éa", 1), "é");
        assert_eq!(prefix("", 2), "");
    }

    #[test]
    fn class_encoding_round_trips() {
        for l in 0..5 {
            assert_eq!(move_of(class_of(Move::Left(0), l)), Move::Left(l));
            assert_eq!(move_of(class_of(Move::Right(0), l)), Move::Right(l));
        }
        assert_eq!(move_of(0), Move::Shift);
    }
}
