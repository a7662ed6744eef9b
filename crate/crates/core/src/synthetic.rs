//! A deterministic synthetic treebank from a small template grammar.
//!
//! Words are random syllable strings drawn from class lexicons with Zipfian
//! frequencies, so held-out data is full of rare and unseen words. Several
//! decisions depend on the lexical class of a word rather than on its
//! context:
//!
//! * a PP with an ambiguous preposition attaches to the object noun (`nmod`)
//!   when its noun is relational and to the verb (`obl`) otherwise;
//! * the object of a dative verb is `iobj`, optionally marked by the particle
//!   `ko`, while other verbs take `obj`.
//!
//! Relative clauses, auxiliaries, adverbs, coordination and unambiguous
//! prepositions fill in the rest.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conllu::{Corpus, Origin, Sentence, Token};
use crate::seed::{rng_from_seed, sub_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub train: usize,
    pub dev: usize,
    pub pool: usize,
    /// Zipf exponent of the lexicons.
    pub zipf: f64,
    /// Scales every open-class lexicon.
    pub lexicon_scale: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 1,
            train: 300,
            dev: 500,
            pool: 20_000,
            zipf: 1.0,
            lexicon_scale: 1.0,
        }
    }
}

/// Gold data; `pool` keeps its gold trees so selections can be scored.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTreebank {
    pub train: Corpus,
    pub dev: Corpus,
    pub pool: Corpus,
}

struct Lexicon {
    words: Vec<String>,
    cumulative: Vec<f64>,
}

impl Lexicon {
    fn new(rng: &mut ChaCha8Rng, size: usize, zipf: f64, taken: &mut std::collections::HashSet<String>) -> Self {
        let mut words = Vec::with_capacity(size);
        while words.len() < size {
            let w = random_word(rng);
            if taken.insert(w.clone()) {
                words.push(w);
            }
        }
        let mut total = 0.0;
        let cumulative = (1..=size)
            .map(|r| {
                total += 1.0 / (r as f64).powf(zipf);
                total
            })
            .collect();
        Lexicon { words, cumulative }
    }

    fn fixed(words: &[&str]) -> Self {
        Lexicon {
            words: words.iter().map(|w| w.to_string()).collect(),
            cumulative: (1..=words.len()).map(|r| r as f64).collect(),
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> &str {
        let total = *self.cumulative.last().expect("non-empty lexicon");
        let x = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&c| c <= x).min(self.words.len() - 1);
        &self.words[k]
    }
}

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr", "kl"];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

fn random_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("onsets"));
        w.push_str(NUCLEI.choose(rng).expect("nuclei"));
    }
    if rng.random_bool(0.3) {
        w.push(['n', 'm', 's', 'k'][rng.random_range(0..4)]);
    }
    w
}

struct Grammar {
    noun: Lexicon,
    relational: Lexicon,
    place: Lexicon,
    propn: Lexicon,
    trans: Lexicon,
    intrans: Lexicon,
    dative: Lexicon,
    adj: Lexicon,
    adv: Lexicon,
    det: Lexicon,
    pron: Lexicon,
    aux: Lexicon,
    cconj: Lexicon,
    amb_prep: Lexicon,
    noun_prep: Lexicon,
    verb_prep: Lexicon,
}

impl Grammar {
    fn new(spec: &SyntheticSpec) -> Self {
        let mut rng = rng_from_seed(sub_seed(spec.seed, "synthetic-lexicon", &[]));
        let mut taken = std::collections::HashSet::new();
        for w in ["ko", "ke", "."] {
            taken.insert(w.to_string());
        }
        let size = |n: f64| ((n * spec.lexicon_scale).round() as usize).max(2);
        let z = spec.zipf;
        let mut open = |n: f64| Lexicon::new(&mut rng, size(n), z, &mut taken);
        Grammar {
            noun: open(600.0),
            relational: open(250.0),
            place: open(250.0),
            propn: open(300.0),
            trans: open(300.0),
            intrans: open(200.0),
            dative: open(200.0),
            adj: open(300.0),
            adv: open(80.0),
            det: Lexicon::fixed(&["la", "de", "su", "ta"]),
            pron: Lexicon::fixed(&["mi", "tu", "ve", "no", "ri"]),
            aux: Lexicon::fixed(&["ha", "sei", "wol"]),
            cconj: Lexicon::fixed(&["e", "ou"]),
            amb_prep: Lexicon::fixed(&["po", "ni", "sa"]),
            noun_prep: Lexicon::fixed(&["di", "fo"]),
            verb_prep: Lexicon::fixed(&["ad", "tra"]),
        }
    }
}

/// Tokens under construction; heads are indices into `tokens`, `None` for
/// the root.
struct Builder {
    tokens: Vec<(String, &'static str, Option<usize>, &'static str)>,
}

impl Builder {
    fn push(&mut self, form: &str, upos: &'static str) -> usize {
        self.tokens.push((form.to_string(), upos, None, "_"));
        self.tokens.len() - 1
    }

    fn attach(&mut self, dep: usize, head: usize, rel: &'static str) {
        self.tokens[dep].2 = Some(head);
        self.tokens[dep].3 = rel;
    }

    fn finish(self) -> Sentence {
        let tokens = self
            .tokens
            .into_iter()
            .enumerate()
            .map(|(i, (form, upos, head, rel))| {
                let mut t = Token::unannotated(i + 1, form);
                t.upos = upos.to_string();
                t.head = head.map_or(0, |h| h + 1);
                t.deprel = if head.is_none() { "root".to_string() } else { rel.to_string() };
                t
            })
            .collect();
        Sentence::new(tokens)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum NounKind {
    Plain,
    Relational,
    Place,
}

struct Generator<'g> {
    g: &'g Grammar,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    /// A noun phrase; returns the index of its head noun.
    fn noun_phrase(&mut self, b: &mut Builder, kind: NounKind, allow_pron: bool, depth: usize) -> usize {
        if allow_pron && kind == NounKind::Plain && self.chance(0.12) {
            let w = self.g.pron.draw(&mut self.rng).to_string();
            return b.push(&w, "PRON");
        }
        if kind == NounKind::Plain && self.chance(0.12) {
            let w = self.g.propn.draw(&mut self.rng).to_string();
            return b.push(&w, "PROPN");
        }
        let mut pre = Vec::new();
        if self.chance(0.7) {
            let w = self.g.det.draw(&mut self.rng).to_string();
            pre.push((b.push(&w, "DET"), "det"));
        }
        if self.chance(0.3) {
            let w = self.g.adj.draw(&mut self.rng).to_string();
            pre.push((b.push(&w, "ADJ"), "amod"));
        }
        let lex = match kind {
            NounKind::Plain => &self.g.noun,
            NounKind::Relational => &self.g.relational,
            NounKind::Place => &self.g.place,
        };
        let w = lex.draw(&mut self.rng).to_string();
        let head = b.push(&w, "NOUN");
        for (d, rel) in pre {
            b.attach(d, head, rel);
        }
        if depth < 2 && self.chance(0.12) {
            // unambiguous noun-attaching preposition
            let pp = self.prep_phrase(b, &self.g.noun_prep, NounKind::Plain, depth + 1);
            b.attach(pp, head, "nmod");
        }
        head
    }

    fn prep_phrase(&mut self, b: &mut Builder, preps: &Lexicon, kind: NounKind, depth: usize) -> usize {
        let p = preps.draw(&mut self.rng).to_string();
        let case = b.push(&p, "ADP");
        let noun = self.noun_phrase(b, kind, false, depth);
        b.attach(case, noun, "case");
        noun
    }

    fn clause(&mut self, b: &mut Builder, depth: usize) -> usize {
        let subj = self.noun_phrase(b, NounKind::Plain, true, depth);
        let aux = self.chance(0.25).then(|| {
            let w = self.g.aux.draw(&mut self.rng).to_string();
            b.push(&w, "AUX")
        });
        let pre_adv = self.chance(0.1).then(|| {
            let w = self.g.adv.draw(&mut self.rng).to_string();
            b.push(&w, "ADV")
        });
        let class = self.rng.random_range(0..10);
        let (lex, has_obj, dative) = match class {
            0..=4 => (&self.g.trans, true, false),
            5..=7 => (&self.g.intrans, false, false),
            _ => (&self.g.dative, true, true),
        };
        let w = lex.draw(&mut self.rng).to_string();
        let verb = b.push(&w, "VERB");
        b.attach(subj, verb, "nsubj");
        if let Some(a) = aux {
            b.attach(a, verb, "aux");
        }
        if let Some(a) = pre_adv {
            b.attach(a, verb, "advmod");
        }
        let obj = if has_obj {
            let particle = (dative && self.chance(0.5)).then(|| b.push("ko", "ADP"));
            let o = self.noun_phrase(b, NounKind::Plain, true, depth);
            if let Some(p) = particle {
                b.attach(p, o, "case");
            }
            b.attach(o, verb, if dative { "iobj" } else { "obj" });
            if depth == 0 && b.tokens[o].1 == "NOUN" && self.chance(0.15) {
                let rel = self.relative_clause(b, depth + 1);
                b.attach(rel, o, "acl:relcl");
            }
            Some(o)
        } else {
            None
        };
        let pps = [0, 0, 1, 1, 1, 2][self.rng.random_range(0..6)];
        // once a PP hangs off the verb the object can take no more, which
        // keeps trees projective
        let mut object_open = true;
        for _ in 0..pps {
            if depth >= 2 {
                break;
            }
            match self.rng.random_range(0..4) {
                0 => {
                    let pp = self.prep_phrase(b, &self.g.verb_prep, NounKind::Plain, depth + 1);
                    b.attach(pp, verb, "obl");
                    object_open = false;
                }
                _ => {
                    let relational = self.chance(0.5);
                    let kind = if relational { NounKind::Relational } else { NounKind::Place };
                    let pp = self.prep_phrase(b, &self.g.amb_prep, kind, depth + 1);
                    match obj {
                        Some(o) if object_open && relational && b.tokens[o].1 == "NOUN" => b.attach(pp, o, "nmod"),
                        _ => {
                            b.attach(pp, verb, "obl");
                            object_open = false;
                        }
                    }
                }
            }
        }
        if self.chance(0.15) {
            let w = self.g.adv.draw(&mut self.rng).to_string();
            let a = b.push(&w, "ADV");
            b.attach(a, verb, "advmod");
        }
        verb
    }

    /// `ke` + verb + object, modifying the preceding noun.
    fn relative_clause(&mut self, b: &mut Builder, depth: usize) -> usize {
        let mark = b.push("ke", "PRON");
        let w = self.g.trans.draw(&mut self.rng).to_string();
        let verb = b.push(&w, "VERB");
        b.attach(mark, verb, "nsubj");
        let o = self.noun_phrase(b, NounKind::Plain, false, depth + 1);
        b.attach(o, verb, "obj");
        verb
    }

    fn sentence(&mut self) -> Sentence {
        let mut b = Builder { tokens: Vec::new() };
        let main = self.clause(&mut b, 0);
        if self.chance(0.2) {
            let w = self.g.cconj.draw(&mut self.rng).to_string();
            let cc = b.push(&w, "CCONJ");
            let second = self.clause(&mut b, 1);
            b.attach(cc, second, "cc");
            b.attach(second, main, "conj");
        }
        let p = b.push(".", "PUNCT");
        b.attach(p, main, "punct");
        b.finish()
    }
}

/// Generates train, dev and pool sentences from independent streams of one
/// grammar.
pub fn generate(spec: &SyntheticSpec) -> SyntheticTreebank {
    let grammar = Grammar::new(spec);
    let part = |name: &str, n: usize| {
        let mut gen = Generator {
            g: &grammar,
            rng: rng_from_seed(sub_seed(spec.seed, name, &[])),
        };
        Corpus::new((0..n).map(|_| gen.sentence()).collect(), Origin::Labelled)
    };
    SyntheticTreebank {
        train: part("synthetic-train", spec.train),
        dev: part("synthetic-dev", spec.dev),
        pool: part("synthetic-pool", spec.pool),
    }
}
