//! CoNLL-U data model, reading and writing, and the unlabelled sentence pool.
//!
//! Multiword-token ranges (`3-4`) and empty nodes (`3.1`) are kept verbatim
//! so that files round-trip, but they never show up in [`Sentence::tokens`]
//! and therefore never count towards lengths, budgets or agreement.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

const EMPTY: &str = "_";

/// The annotation columns a learner can predict and the agreement filter
/// can compare.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Column {
    Lemma,
    Upos,
    Xpos,
    Feats,
    Head,
    Deprel,
}

impl Column {
    pub const ALL: [Column; 6] = [
        Column::Lemma,
        Column::Upos,
        Column::Xpos,
        Column::Feats,
        Column::Head,
        Column::Deprel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::Lemma => "lemma",
            Column::Upos => "upos",
            Column::Xpos => "xpos",
            Column::Feats => "feats",
            Column::Head => "head",
            Column::Deprel => "deprel",
        }
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Column::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown column '{}'", s)))
    }
}

/// One syntactic word. `head` is 0 for the root, otherwise the 1-based id of
/// the governor.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// A token carrying only its form; every other column is `_` and the
    /// head is the placeholder 0.
    pub fn unannotated(id: usize, form: impl Into<String>) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: EMPTY.to_string(),
            upos: EMPTY.to_string(),
            xpos: EMPTY.to_string(),
            feats: EMPTY.to_string(),
            head: 0,
            deprel: EMPTY.to_string(),
            deps: EMPTY.to_string(),
            misc: EMPTY.to_string(),
        }
    }

    /// Value of an annotation column, with the head rendered as a string.
    pub fn column(&self, column: Column) -> std::borrow::Cow<'_, str> {
        match column {
            Column::Lemma => self.lemma.as_str().into(),
            Column::Upos => self.upos.as_str().into(),
            Column::Xpos => self.xpos.as_str().into(),
            Column::Feats => self.feats.as_str().into(),
            Column::Head => self.head.to_string().into(),
            Column::Deprel => self.deprel.as_str().into(),
        }
    }

    /// Whether two tokens carry the same value in `column`.
    pub fn same_in(&self, other: &Token, column: Column) -> bool {
        match column {
            Column::Lemma => self.lemma == other.lemma,
            Column::Upos => self.upos == other.upos,
            Column::Xpos => self.xpos == other.xpos,
            Column::Feats => self.feats == other.feats,
            Column::Head => self.head == other.head,
            Column::Deprel => self.deprel == other.deprel,
        }
    }

    pub fn set_column(&mut self, column: Column, value: &str) {
        match column {
            Column::Lemma => self.lemma = value.to_string(),
            Column::Upos => self.upos = value.to_string(),
            Column::Xpos => self.xpos = value.to_string(),
            Column::Feats => self.feats = value.to_string(),
            Column::Head => self.head = value.parse().unwrap_or(0),
            Column::Deprel => self.deprel = value.to_string(),
        }
    }
}

/// A sentence: its plain tokens plus the lines that are carried along
/// without taking part in any computation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Sentence {
    /// Leading `#` lines, without the trailing newline.
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    /// Multiword ranges, empty nodes and inner comments, each tagged with the
    /// number of plain tokens that precede it.
    pub extra_lines: Vec<(usize, String)>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence {
            comments: Vec::new(),
            tokens,
            extra_lines: Vec::new(),
        }
    }

    /// Build an unannotated sentence from forms.
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Self {
        Sentence::new(
            forms
                .iter()
                .enumerate()
                .map(|(i, f)| Token::unannotated(i + 1, f.as_ref()))
                .collect(),
        )
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    /// Forms joined by single spaces; the duplicate-detection key.
    pub fn forms_key(&self) -> String {
        let mut key = String::new();
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                key.push(' ');
            }
            key.push_str(&t.form);
        }
        key
    }

    /// Same sentence with every annotation column reset to `_`.
    pub fn stripped(&self) -> Sentence {
        Sentence {
            comments: self.comments.clone(),
            tokens: self
                .tokens
                .iter()
                .map(|t| Token::unannotated(t.id, t.form.clone()))
                .collect(),
            extra_lines: self.extra_lines.clone(),
        }
    }

    /// Checks that heads form a single-rooted tree over the tokens.
    pub fn check_tree(&self) -> std::result::Result<(), String> {
        check_heads(&self.heads())
    }

    pub fn is_tree(&self) -> bool {
        self.check_tree().is_ok()
    }
}

/// Tree check over a head vector (`heads[k]` is the head of token `k + 1`).
pub fn check_heads(heads: &[usize]) -> std::result::Result<(), String> {
    let n = heads.len();
    if n == 0 {
        return Err("empty sentence".into());
    }
    let mut roots = 0;
    for (k, &h) in heads.iter().enumerate() {
        if h > n {
            return Err(format!("token {} has head {} beyond length {}", k + 1, h, n));
        }
        if h == k + 1 {
            return Err(format!("token {} is its own head", k + 1));
        }
        if h == 0 {
            roots += 1;
        }
    }
    if roots != 1 {
        return Err(format!("expected exactly one root, found {}", roots));
    }
    // 0 = unvisited, 1 = on current path, 2 = reaches root
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        let mut path = Vec::new();
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            path.push(node);
            node = heads[node - 1];
        }
        if state[node] == 1 {
            return Err(format!("cycle through token {}", node));
        }
        for p in path {
            state[p] = 2;
        }
    }
    Ok(())
}

/// Where a corpus came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Labelled,
    Unlabelled,
    Predicted,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub origin: Origin,
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus::new(Vec::new(), Origin::Labelled)
    }
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>, origin: Origin) -> Self {
        Corpus { sentences, origin }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_total(&self) -> usize {
        self.sentences.iter().map(Sentence::token_count).sum()
    }

    /// Concatenation; never removes duplicates.
    pub fn concat(parts: &[&Corpus]) -> Corpus {
        let mut sentences = Vec::with_capacity(parts.iter().map(|c| c.len()).sum());
        let mut origin = None;
        for part in parts {
            sentences.extend(part.sentences.iter().cloned());
            origin = match origin {
                None => Some(part.origin),
                Some(o) if o == part.origin => Some(o),
                Some(_) => Some(Origin::Mixed),
            };
        }
        Corpus::new(sentences, origin.unwrap_or(Origin::Mixed))
    }

    /// Returns the index and reason of the first sentence that is not a tree.
    pub fn check_trees(&self) -> Result<()> {
        for (i, s) in self.sentences.iter().enumerate() {
            s.check_tree().map_err(|m| Error::validation(i, m))?;
        }
        Ok(())
    }

    pub fn stripped(&self) -> Corpus {
        Corpus::new(
            self.sentences.iter().map(Sentence::stripped).collect(),
            Origin::Unlabelled,
        )
    }

    pub fn select(&self, indices: &[usize]) -> Corpus {
        Corpus::new(
            indices.iter().map(|&i| self.sentences[i].clone()).collect(),
            self.origin,
        )
    }
}

fn parse_index(field: &str, line_no: usize, what: &str) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| Error::parse(line_no, format!("non-numeric {} '{}'", what, field)))
}

fn finish_sentence(
    sentence: &mut Sentence,
    first_line: usize,
    index: usize,
    sentences: &mut Vec<Sentence>,
) -> Result<()> {
    if sentence.tokens.is_empty() && sentence.extra_lines.is_empty() {
        if !sentence.comments.is_empty() {
            return Err(Error::parse(first_line, "comment block without tokens"));
        }
        return Ok(());
    }
    let n = sentence.tokens.len();
    for t in &sentence.tokens {
        if t.head > n {
            return Err(Error::validation(
                index,
                format!("token {} has head {} in a {}-token sentence", t.id, t.head, n),
            ));
        }
    }
    sentences.push(std::mem::take(sentence));
    Ok(())
}

/// Reads a CoNLL-U stream.
pub fn read_conllu<R: BufRead>(reader: R, origin: Origin) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    let mut first_line = 1;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse(line_no, e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);

        if line.trim().is_empty() {
            let index = sentences.len();
            finish_sentence(&mut current, first_line, index, &mut sentences)?;
            first_line = line_no + 1;
            continue;
        }

        if line.starts_with('#') {
            if current.tokens.is_empty() && current.extra_lines.is_empty() {
                current.comments.push(line.to_string());
            } else {
                current
                    .extra_lines
                    .push((current.tokens.len(), line.to_string()));
            }
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 10 {
            return Err(Error::parse(
                line_no,
                format!("expected 10 tab-separated columns, found {}", fields.len()),
            ));
        }

        if fields[0].contains('-') || fields[0].contains('.') {
            current
                .extra_lines
                .push((current.tokens.len(), line.to_string()));
            continue;
        }

        let id = parse_index(fields[0], line_no, "id")?;
        if id != current.tokens.len() + 1 {
            return Err(Error::parse(
                line_no,
                format!("expected token id {}, found {}", current.tokens.len() + 1, id),
            ));
        }
        let head = parse_index(fields[6], line_no, "head")?;
        if head == id {
            return Err(Error::validation(
                sentences.len(),
                format!("token {} is its own head", id),
            ));
        }
        if fields[1].is_empty() {
            return Err(Error::parse(line_no, "empty form"));
        }

        current.tokens.push(Token {
            id,
            form: fields[1].to_string(),
            lemma: fields[2].to_string(),
            upos: fields[3].to_string(),
            xpos: fields[4].to_string(),
            feats: fields[5].to_string(),
            head,
            deprel: fields[7].to_string(),
            deps: fields[8].to_string(),
            misc: fields[9].to_string(),
        });
    }
    let index = sentences.len();
    finish_sentence(&mut current, first_line, index, &mut sentences)?;

    Ok(Corpus::new(sentences, origin))
}

/// Parses CoNLL-U bytes.
pub fn parse_conllu(bytes: &[u8]) -> Result<Corpus> {
    read_conllu(bytes, Origin::Labelled)
}

fn field(s: &str) -> &str {
    if s.is_empty() {
        EMPTY
    } else {
        s
    }
}

fn write_token<W: Write>(out: &mut W, t: &Token) -> std::io::Result<()> {
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        t.id,
        field(&t.form),
        field(&t.lemma),
        field(&t.upos),
        field(&t.xpos),
        field(&t.feats),
        t.head,
        field(&t.deprel),
        field(&t.deps),
        field(&t.misc)
    )
}

pub fn write_sentence<W: Write>(out: &mut W, sentence: &Sentence) -> std::io::Result<()> {
    for c in &sentence.comments {
        writeln!(out, "{}", c)?;
    }
    let mut extra = sentence.extra_lines.iter().peekable();
    for (k, token) in sentence.tokens.iter().enumerate() {
        while let Some((_, line)) = extra.next_if(|(pos, _)| *pos <= k) {
            writeln!(out, "{}", line)?;
        }
        write_token(out, token)?;
    }
    for (_, line) in extra {
        writeln!(out, "{}", line)?;
    }
    writeln!(out)
}

pub fn write_conllu<W: Write>(out: &mut W, corpus: &Corpus) -> std::io::Result<()> {
    for sentence in &corpus.sentences {
        write_sentence(out, sentence)?;
    }
    Ok(())
}

pub fn to_conllu_bytes(corpus: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    write_conllu(&mut buf, corpus).expect("writing to a Vec cannot fail");
    buf
}

pub fn read_conllu_file(path: &std::path::Path, origin: Origin) -> Result<Corpus> {
    let file = std::fs::File::open(path)?;
    read_conllu(std::io::BufReader::new(file), origin)
}

pub fn write_conllu_file(path: &std::path::Path, corpus: &Corpus) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    write_conllu(&mut out, corpus)?;
    out.flush()?;
    Ok(())
}

/// Filtering rules applied while reading unlabelled text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolFilterSpec {
    pub min_len: usize,
    pub max_len: usize,
    pub max_token_bytes: usize,
    pub dedup: bool,
    pub shuffle_seed: u64,
    /// Keep each surviving line with this probability (seeded); 1.0 keeps all.
    pub keep_fraction: f64,
}

impl Default for PoolFilterSpec {
    fn default() -> Self {
        PoolFilterSpec {
            min_len: 5,
            max_len: 40,
            max_token_bytes: 200,
            dedup: true,
            shuffle_seed: 0,
            keep_fraction: 1.0,
        }
    }
}

impl PoolFilterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_len < 1 || self.min_len > self.max_len {
            return Err(Error::Config(format!(
                "need 1 <= min_len <= max_len, got {}..{}",
                self.min_len, self.max_len
            )));
        }
        if !(0.0..=1.0).contains(&self.keep_fraction) {
            return Err(Error::Config(format!(
                "keep_fraction must lie in [0, 1], got {}",
                self.keep_fraction
            )));
        }
        Ok(())
    }

    pub fn accepts(&self, forms: &[&str]) -> bool {
        (self.min_len..=self.max_len).contains(&forms.len())
            && forms.iter().all(|f| f.len() <= self.max_token_bytes)
    }
}

/// Statistics gathered during ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    pub lines_read: usize,
    pub rejected_length: usize,
    pub rejected_bytes: usize,
    pub duplicates: usize,
    pub dropped_by_fraction: usize,
    pub kept: usize,
}

/// Unlabelled sentences held as space-joined forms.
///
/// This is the compact form of an unlabelled [`Corpus`]: memory is
/// proportional to the surviving text only.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnlabelledPool {
    sentences: Vec<Box<str>>,
}

impl UnlabelledPool {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        UnlabelledPool {
            sentences: corpus
                .sentences
                .iter()
                .map(|s| s.forms_key().into_boxed_str())
                .collect(),
        }
    }

    pub fn from_lines<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        UnlabelledPool {
            sentences: lines
                .into_iter()
                .map(|l| {
                    l.as_ref()
                        .split_whitespace()
                        .collect::<Vec<_>>()
                        .join(" ")
                        .into_boxed_str()
                })
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    /// Reads one pre-tokenised sentence per line, filters, de-duplicates
    /// (first occurrence wins) and shuffles.
    pub fn ingest<R: BufRead>(reader: R, spec: &PoolFilterSpec) -> Result<(Self, IngestStats)> {
        spec.validate()?;
        let mut stats = IngestStats::default();
        let mut seen: HashSet<Box<str>> = HashSet::new();
        let mut sentences: Vec<Box<str>> = Vec::new();
        let mut fraction_rng = rng_from_seed(spec.shuffle_seed ^ 0x5eed_f4ac_7104_0001);
        let mut key = String::new();

        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(idx + 1, e.to_string()))?;
            stats.lines_read += 1;
            let forms: Vec<&str> = line.split_whitespace().collect();
            if forms.is_empty() {
                continue;
            }
            if !(spec.min_len..=spec.max_len).contains(&forms.len()) {
                stats.rejected_length += 1;
                continue;
            }
            if forms.iter().any(|f| f.len() > spec.max_token_bytes) {
                stats.rejected_bytes += 1;
                continue;
            }
            key.clear();
            for (i, f) in forms.iter().enumerate() {
                if i > 0 {
                    key.push(' ');
                }
                key.push_str(f);
            }
            if spec.dedup {
                if seen.contains(key.as_str()) {
                    stats.duplicates += 1;
                    continue;
                }
                seen.insert(key.as_str().into());
            }
            if spec.keep_fraction < 1.0 && fraction_rng.random::<f64>() >= spec.keep_fraction {
                stats.dropped_by_fraction += 1;
                continue;
            }
            sentences.push(key.as_str().into());
        }
        drop(seen);

        let mut rng = rng_from_seed(spec.shuffle_seed);
        sentences.shuffle(&mut rng);
        stats.kept = sentences.len();
        Ok((UnlabelledPool { sentences }, stats))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn line(&self, index: usize) -> &str {
        &self.sentences[index]
    }

    pub fn lines(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| &**s)
    }

    pub fn sentence_len(&self, index: usize) -> usize {
        self.sentences[index].split(' ').count()
    }

    pub fn sentence(&self, index: usize) -> Sentence {
        let forms: Vec<&str> = self.sentences[index].split(' ').collect();
        Sentence::from_forms(&forms)
    }

    pub fn token_total(&self) -> usize {
        (0..self.len()).map(|i| self.sentence_len(i)).sum()
    }

    pub fn into_corpus(self) -> Corpus {
        let sentences = (0..self.len()).map(|i| self.sentence(i)).collect();
        Corpus::new(sentences, Origin::Unlabelled)
    }

    /// Draws whole sentences under a token budget; see [`budget_sample_indices`].
    /// Returns the sampled corpus and the pool index of each sentence.
    pub fn sample(
        &self,
        budget: usize,
        seed: u64,
        reject_duplicates: bool,
    ) -> (Corpus, Vec<usize>) {
        let lengths: Vec<usize> = (0..self.len()).map(|i| self.sentence_len(i)).collect();
        let keys = |i: usize| self.line(i).to_string();
        let indices = budget_sample_indices(&lengths, budget, seed, reject_duplicates.then_some(&keys));
        let sentences = indices.iter().map(|&i| self.sentence(i)).collect();
        (Corpus::new(sentences, Origin::Unlabelled), indices)
    }

    pub fn write_text<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for s in &self.sentences {
            writeln!(out, "{}", s)?;
        }
        Ok(())
    }

    pub fn write_conllu<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for i in 0..self.len() {
            write_sentence(out, &self.sentence(i))?;
        }
        Ok(())
    }
}

/// Reads pre-tokenised text into a filtered, de-duplicated and shuffled
/// corpus whose tokens carry forms only.
pub fn ingest_unlabelled<R: BufRead>(reader: R, spec: &PoolFilterSpec) -> Result<Corpus> {
    let (pool, _) = UnlabelledPool::ingest(reader, spec)?;
    Ok(pool.into_corpus())
}

/// Greedy whole-sentence sampling under a token budget.
///
/// Sentences are visited in a seeded random order and taken until the next
/// visited sentence would overflow the budget. With `duplicate_key`,
/// sentences whose key was already taken are skipped.
pub fn budget_sample_indices<K>(
    lengths: &[usize],
    budget: usize,
    seed: u64,
    duplicate_key: Option<&K>,
) -> Vec<usize>
where
    K: Fn(usize) -> String,
{
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    let mut rng = rng_from_seed(seed);
    order.shuffle(&mut rng);

    let mut seen = HashSet::new();
    let mut total = 0usize;
    let mut picked = Vec::new();
    for i in order {
        if let Some(key_of) = duplicate_key {
            let key = key_of(i);
            if seen.contains(&key) {
                continue;
            }
            if total + lengths[i] > budget {
                break;
            }
            seen.insert(key);
        } else if total + lengths[i] > budget {
            break;
        }
        total += lengths[i];
        picked.push(i);
    }
    picked
}

/// Seeded whole-sentence sample of at most `budget` tokens.
pub fn sample_corpus(corpus: &Corpus, budget: usize, seed: u64, reject_duplicates: bool) -> Corpus {
    let lengths: Vec<usize> = corpus.sentences.iter().map(Sentence::token_count).collect();
    let keys = |i: usize| corpus.sentences[i].forms_key();
    let indices = budget_sample_indices(&lengths, budget, seed, reject_duplicates.then_some(&keys));
    corpus.select(&indices)
}
