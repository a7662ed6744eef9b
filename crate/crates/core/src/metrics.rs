//! Attachment scores, error breakdowns and McNemar significance.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::conllu::{Column, Corpus, Sentence};
use crate::error::{Error, Result};

/// How dependency labels are compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMatch {
    /// The full label including any `:subtype`.
    #[default]
    Full,
    /// Only the universal part before the first `:`.
    Universal,
}

impl LabelMatch {
    pub fn same(self, gold: &str, pred: &str) -> bool {
        match self {
            LabelMatch::Full => gold == pred,
            LabelMatch::Universal => universal(gold) == universal(pred),
        }
    }
}

fn universal(label: &str) -> &str {
    label.split(':').next().unwrap_or(label)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub las: f64,
    pub uas: f64,
    pub total_tokens: usize,
    /// Head and label correct, one flag per gold token in corpus order.
    #[serde(skip)]
    pub correct_flags: Vec<bool>,
    /// Token count of every sentence, for sentence-level aggregation.
    #[serde(skip)]
    pub sentence_lengths: Vec<usize>,
}

impl EvalReport {
    /// One flag per sentence: every token of the sentence is correct.
    pub fn sentence_flags(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.sentence_lengths.len());
        let mut offset = 0;
        for &n in &self.sentence_lengths {
            out.push(self.correct_flags[offset..offset + n].iter().all(|&f| f));
            offset += n;
        }
        out
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "metric\tvalue\nLAS\t{:.2}\nUAS\t{:.2}\ntokens\t{}\n",
            self.las, self.uas, self.total_tokens
        )
    }
}

fn percent(part: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * part as f64 / total as f64
    }
}

/// Checks that `pred` covers the same sentences and forms as `gold`.
pub fn check_alignment(gold: &Corpus, pred: &Corpus) -> Result<()> {
    if gold.len() != pred.len() {
        let first = gold.len().min(pred.len());
        return Err(Error::alignment(
            first,
            format!("gold has {} sentences, prediction {}", gold.len(), pred.len()),
        ));
    }
    for (i, (g, p)) in gold.sentences.iter().zip(&pred.sentences).enumerate() {
        check_sentence_alignment(i, g, p)?;
    }
    Ok(())
}

pub(crate) fn check_sentence_alignment(index: usize, g: &Sentence, p: &Sentence) -> Result<()> {
    if g.len() != p.len() {
        return Err(Error::alignment(
            index,
            format!("{} gold tokens vs {} predicted", g.len(), p.len()),
        ));
    }
    for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
        if gt.form != pt.form {
            return Err(Error::alignment(
                index,
                format!("token {}: form '{}' vs '{}'", gt.id, gt.form, pt.form),
            ));
        }
    }
    Ok(())
}

pub fn evaluate(gold: &Corpus, pred: &Corpus) -> Result<EvalReport> {
    evaluate_with(gold, pred, LabelMatch::Full)
}

pub fn evaluate_with(gold: &Corpus, pred: &Corpus, labels: LabelMatch) -> Result<EvalReport> {
    check_alignment(gold, pred)?;
    let mut flags = Vec::with_capacity(gold.token_total());
    let mut heads = 0;
    let mut sentence_lengths = Vec::with_capacity(gold.len());
    for (g, p) in gold.sentences.iter().zip(&pred.sentences) {
        sentence_lengths.push(g.len());
        for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
            let head_ok = gt.head == pt.head;
            heads += usize::from(head_ok);
            flags.push(head_ok && labels.same(&gt.deprel, &pt.deprel));
        }
    }
    let total = flags.len();
    if total == 0 {
        return Err(Error::Empty("nothing to evaluate".into()));
    }
    let correct = flags.iter().filter(|&&f| f).count();
    Ok(EvalReport {
        las: percent(correct, total),
        uas: percent(heads, total),
        total_tokens: total,
        correct_flags: flags,
        sentence_lengths,
    })
}

/// Fraction of tokens (in percent) whose value in each column matches gold.
pub fn column_accuracy(gold: &Corpus, pred: &Corpus, columns: &[Column]) -> Result<Vec<(Column, f64)>> {
    check_alignment(gold, pred)?;
    let total = gold.token_total();
    Ok(columns
        .iter()
        .map(|&c| {
            let same = gold
                .sentences
                .iter()
                .zip(&pred.sentences)
                .flat_map(|(g, p)| g.tokens.iter().zip(&p.tokens))
                .filter(|(gt, pt)| gt.same_in(pt, c))
                .count();
            (c, percent(same, total))
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub tokens: usize,
    pub correct: usize,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.tokens += 1;
        self.correct += usize::from(correct);
    }

    pub fn las(&self) -> f64 {
        percent(self.correct, self.tokens)
    }
}

pub const LENGTH_BINS: [&str; 4] = ["<=9", "10-19", "20-39", ">=40"];

pub fn length_bin(len: usize) -> usize {
    match len {
        0..=9 => 0,
        10..=19 => 1,
        20..=39 => 2,
        _ => 3,
    }
}

/// Labels seen fewer times than this are flagged in the per-label table.
pub const MIN_LABEL_OCCURRENCES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelStat {
    pub tally: Tally,
    pub below_threshold: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakdownReport {
    pub total_tokens: usize,
    pub oov: Tally,
    pub iv: Tally,
    /// Indexed like [`LENGTH_BINS`]; a token falls into its sentence's bin.
    pub by_length: [Tally; 4],
    /// Keyed by gold label.
    pub by_deprel: BTreeMap<String, LabelStat>,
}

impl BreakdownReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("group\tkey\ttokens\tLAS\tnote\n");
        for (key, t) in [("OOV", &self.oov), ("IV", &self.iv)] {
            let _ = writeln!(out, "oov\t{}\t{}\t{:.2}\t", key, t.tokens, t.las());
        }
        for (label, t) in LENGTH_BINS.iter().zip(&self.by_length) {
            let _ = writeln!(out, "length\t{}\t{}\t{:.2}\t", label, t.tokens, t.las());
        }
        for (label, stat) in &self.by_deprel {
            let note = if stat.below_threshold { "rare" } else { "" };
            let _ = writeln!(
                out,
                "deprel\t{}\t{}\t{:.2}\t{}",
                label,
                stat.tally.tokens,
                stat.tally.las(),
                note
            );
        }
        out
    }
}

pub fn breakdown(gold: &Corpus, pred: &Corpus, train_vocab: &HashSet<String>) -> Result<BreakdownReport> {
    breakdown_with(gold, pred, train_vocab, LabelMatch::Full)
}

pub fn breakdown_with(
    gold: &Corpus,
    pred: &Corpus,
    train_vocab: &HashSet<String>,
    labels: LabelMatch,
) -> Result<BreakdownReport> {
    let report = evaluate_with(gold, pred, labels)?;
    let mut oov = Tally::default();
    let mut iv = Tally::default();
    let mut by_length = [Tally::default(); 4];
    let mut by_deprel: BTreeMap<String, Tally> = BTreeMap::new();
    let mut flags = report.correct_flags.iter();
    for g in &gold.sentences {
        let bin = length_bin(g.len());
        for t in &g.tokens {
            let ok = *flags.next().expect("one flag per token");
            if train_vocab.contains(&t.form) {
                iv.add(ok);
            } else {
                oov.add(ok);
            }
            by_length[bin].add(ok);
            by_deprel.entry(t.deprel.clone()).or_default().add(ok);
        }
    }
    Ok(BreakdownReport {
        total_tokens: report.total_tokens,
        oov,
        iv,
        by_length,
        by_deprel: by_deprel
            .into_iter()
            .map(|(k, tally)| {
                (
                    k,
                    LabelStat {
                        tally,
                        below_threshold: tally.tokens < MIN_LABEL_OCCURRENCES,
                    },
                )
            })
            .collect(),
    })
}

pub fn vocabulary(corpus: &Corpus) -> HashSet<String> {
    corpus
        .sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(|t| t.form.clone()))
        .collect()
}

/// Star thresholds: one star per threshold the p-value does not exceed.
pub const STAR_THRESHOLDS: [f64; 5] = [0.05, 0.01, 0.001, 0.0001, 0.00001];

pub fn stars(p_value: f64) -> usize {
    STAR_THRESHOLDS.iter().filter(|&&t| p_value <= t).count()
}

pub fn render_stars(n: usize) -> String {
    "*".repeat(n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum McNemarMethod {
    /// Two-sided exact binomial test on the discordant pairs.
    #[default]
    Exact,
    /// Chi-square with continuity correction, one degree of freedom.
    ChiSquare,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignificanceResult {
    /// System 1 correct, system 2 wrong.
    pub b: usize,
    /// System 1 wrong, system 2 correct.
    pub c: usize,
    pub p_value: f64,
    pub stars: usize,
    /// No discordant pairs; the test carries no information.
    pub degenerate: bool,
    pub method: McNemarMethod,
}

/// Two-sided exact binomial p-value for `b` vs `c` discordant pairs,
/// `min(1, 2 * P[X <= min(b, c)])` with `X ~ Bin(b + c, 1/2)`.
pub fn exact_binomial_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.min(c);
    let tail = if n <= 64 {
        let mut binom: u128 = 1;
        let mut sum: u128 = 1;
        for k in 1..=m as u128 {
            binom = binom * (n as u128 - k + 1) / k;
            sum += binom;
        }
        sum as f64 / 2f64.powi(n as i32)
    } else {
        // Sum downwards from k = m; terms shrink at least geometrically
        // once k < n/2.
        let nf = n as f64;
        let mf = m as f64;
        let ln_term = ln_gamma(nf + 1.0) - ln_gamma(mf + 1.0) - ln_gamma(nf - mf + 1.0)
            - nf * std::f64::consts::LN_2;
        let mut term = ln_term.exp();
        let mut sum = term;
        let mut k = m;
        while k > 0 && term > sum * 1e-18 {
            term *= k as f64 / (n - k + 1) as f64;
            sum += term;
            k -= 1;
        }
        sum
    };
    (2.0 * tail).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Continuity-corrected chi-square McNemar p-value.
pub fn chi_square_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let stat = diff.max(0.0).powi(2) / n as f64;
    // survival function of chi-square(1) is erfc(sqrt(x / 2))
    erfc((stat / 2.0).sqrt()).clamp(f64::MIN_POSITIVE, 1.0)
}

pub fn mcnemar(flags1: &[bool], flags2: &[bool]) -> Result<SignificanceResult> {
    mcnemar_with(flags1, flags2, McNemarMethod::Exact)
}

pub fn mcnemar_with(flags1: &[bool], flags2: &[bool], method: McNemarMethod) -> Result<SignificanceResult> {
    if flags1.len() != flags2.len() {
        return Err(Error::alignment(
            0,
            format!("{} vs {} correctness flags", flags1.len(), flags2.len()),
        ));
    }
    let mut b = 0;
    let mut c = 0;
    for (&x, &y) in flags1.iter().zip(flags2) {
        match (x, y) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    Ok(mcnemar_counts(b, c, method))
}

pub fn mcnemar_counts(b: usize, c: usize, method: McNemarMethod) -> SignificanceResult {
    let p_value = match method {
        McNemarMethod::Exact => exact_binomial_p(b, c),
        McNemarMethod::ChiSquare => chi_square_p(b, c),
    };
    let degenerate = b + c == 0;
    SignificanceResult {
        b,
        c,
        p_value,
        stars: if degenerate { 0 } else { stars(p_value) },
        degenerate,
        method,
    }
}
