//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test -p tritrain-cli --test acceptance`.

use std::collections::HashMap;
use std::io::{BufReader, Write};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tritrain::analysis::{expected_test_best_of, simulate_best_of, Draw};
use tritrain::conllu::{Column, Corpus, Origin, PoolFilterSpec, Sentence, UnlabelledPool};
use tritrain::ensemble::{combine_trees, VoteMode};
use tritrain::metrics::{evaluate, exact_binomial_p, mcnemar, stars};
use tritrain::seed::rng_from_seed;
use tritrain::synthetic::{generate, SyntheticSpec};
use tritrain::tritraining::{agreement_filter, decay_cap, run, SeedMode, TriConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- 1

/// floor(A * d^age) with d taken from its decimal rendering.
fn cap_oracle(a: usize, d: f64, age: usize) -> usize {
    let text = format!("{}", d);
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    let digits: BigInt = format!("{}{}", int, frac).parse().unwrap();
    let d = BigRational::new(digits, BigInt::from(10u32).pow(frac.len() as u32));
    let mut value = BigRational::from_integer(BigInt::from(a));
    for _ in 0..age {
        value *= d.clone();
    }
    value.floor().to_integer().to_usize().unwrap()
}

fn decay_caps() -> Outcome {
    let mut rng = rng_from_seed(101);
    for case in 0..200 {
        let a = rng.random_range(1..=200_000);
        let d = match case % 3 {
            0 => rng.random_range(0..=1000) as f64 / 1000.0,
            1 => rng.random_range(0..=100) as f64 / 100.0,
            _ => rng.random::<f64>(),
        };
        let t = rng.random_range(1..=12);
        let t_prev = rng.random_range(1..=t);
        let age = t - t_prev;
        let (got, want) = (decay_cap(a, d, age), cap_oracle(a, d, age));
        check(got == want, || format!("A={} d={} age={}: {} != {}", a, d, age, got, want))?;
    }
    for age in 0..5 {
        check(decay_cap(40_000, 1.0, age) == 40_000, || format!("d=1 age {}", age))?;
        let want = if age == 0 { 40_000 } else { 0 };
        check(decay_cap(40_000, 0.0, age) == want, || format!("d=0 age {}", age))?;
    }
    let caps_071: Vec<usize> = (0..3).map(|age| decay_cap(40_000, 0.71, age)).collect();
    check(caps_071 == [40_000, 28_400, 20_164], || format!("0.71 caps {:?}", caps_071))?;
    Ok(format!("200 random cases, d=0, d=1, 0.71 caps {:?}", caps_071))
}

// ---------------------------------------------------------------- 2

fn random_prediction(rng: &mut ChaCha8Rng, base: &Sentence) -> Sentence {
    let mut s = base.clone();
    // the filter never looks at tree shape, so heads may be rewritten freely
    match rng.random_range(0..6) {
        0 | 1 => {}
        5 => {
            let k = rng.random_range(0..s.tokens.len());
            s.tokens[k].head = rng.random_range(0..=s.tokens.len());
        }
        2 => {
            let k = rng.random_range(0..s.tokens.len());
            s.tokens[k].deprel = ["nsubj", "obj", "obl"][rng.random_range(0..3)].into();
        }
        3 => {
            let k = rng.random_range(0..s.tokens.len());
            s.tokens[k].upos = ["NOUN", "VERB"][rng.random_range(0..2)].into();
        }
        _ => {
            let k = rng.random_range(0..s.tokens.len());
            s.tokens[k].lemma = format!("l{}", rng.random_range(0..2));
        }
    }
    s
}

struct Reference {
    sets: [Vec<Sentence>; 3],
    receivers: Vec<Option<usize>>,
}

/// Column-by-column comparison, then the same receiver rule.
fn reference_filter(preds: [&Corpus; 3], columns: &[Column], rng: &mut ChaCha8Rng) -> Reference {
    let mut sets: [Vec<Sentence>; 3] = Default::default();
    let mut receivers = Vec::new();
    for s in 0..preds[0].len() {
        let mut agree = [[true; 3]; 3];
        for x in 0..3 {
            for y in 0..3 {
                for &col in columns {
                    for k in 0..preds[x].sentences[s].tokens.len() {
                        let a = preds[x].sentences[s].tokens[k].column(col).into_owned();
                        let b = preds[y].sentences[s].tokens[k].column(col).into_owned();
                        if a != b {
                            agree[x][y] = false;
                        }
                    }
                }
            }
        }
        let pairs: Vec<(usize, usize)> = [(0, 1), (0, 2), (1, 2)].into_iter().filter(|&(x, y)| agree[x][y]).collect();
        let (receiver, teacher) = match pairs.len() {
            3 => {
                let r = rng.random_range(0..3);
                (r, if r == 0 { 1 } else { 0 })
            }
            1 => {
                let (x, y) = pairs[0];
                (3 - x - y, x)
            }
            _ => {
                receivers.push(None);
                continue;
            }
        };
        receivers.push(Some(receiver));
        sets[receiver].push(preds[teacher].sentences[s].clone());
    }
    Reference { sets, receivers }
}

fn agreement_oracle() -> Outcome {
    let mut rng = rng_from_seed(202);
    let mut totals = [0usize; 3];
    for case in 0..500 {
        let n = rng.random_range(1..=12);
        let bases: Vec<Sentence> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..=6);
                random_tree(&mut rng, len)
            })
            .collect();
        let corpora: Vec<Corpus> = (0..3)
            .map(|_| {
                Corpus::new(
                    bases.iter().map(|b| random_prediction(&mut rng, b)).collect(),
                    Origin::Predicted,
                )
            })
            .collect();
        let mut columns = vec![Column::Head, Column::Deprel];
        for c in [Column::Lemma, Column::Upos] {
            if rng.random_bool(0.5) {
                columns.push(c);
            }
        }
        columns.sort();
        let seed = rng.random::<u64>();
        let preds = [&corpora[0], &corpora[1], &corpora[2]];
        let got = agreement_filter(1, preds, &columns, &mut rng_from_seed(seed)).map_err(|e| e.to_string())?;
        let want = reference_filter(preds, &columns, &mut rng_from_seed(seed));
        for (i, total) in totals.iter_mut().enumerate() {
            check(got.sets[i].sentences == want.sets[i], || format!("case {}: set {} differs", case, i + 1))?;
            let sources: Vec<usize> = got.provenance[i].iter().map(|p| p.source).collect();
            let expected: Vec<usize> = want
                .receivers
                .iter()
                .enumerate()
                .filter(|(_, r)| **r == Some(i))
                .map(|(s, _)| s)
                .collect();
            check(sources == expected, || format!("case {}: receivers of {} differ", case, i + 1))?;
            *total += expected.len();
        }
    }
    Ok(format!("500 triples identical; sentences per receiver {:?}", totals))
}

// ---------------------------------------------------------------- 3

const LABELS: [&str; 3] = ["a", "b", "c"];

fn sentence_from(heads: &[usize], labels: &[&str]) -> Sentence {
    let forms: Vec<String> = (0..heads.len()).map(|i| format!("w{}", i)).collect();
    let mut s = Sentence::from_forms(&forms);
    for (k, t) in s.tokens.iter_mut().enumerate() {
        t.head = heads[k];
        t.deprel = if heads[k] == 0 { "root".into() } else { labels[k].into() };
    }
    s
}

/// A uniformly labelled random single-root tree: nodes are attached in a
/// random order, each to an already attached node.
fn random_tree(rng: &mut ChaCha8Rng, len: usize) -> Sentence {
    let mut order: Vec<usize> = (1..=len).collect();
    order.shuffle(rng);
    let mut heads = vec![0; len];
    for (pos, &node) in order.iter().enumerate().skip(1) {
        heads[node - 1] = order[rng.random_range(0..pos)];
    }
    let labels: Vec<&str> = (0..len).map(|_| LABELS[rng.random_range(0..3)]).collect();
    sentence_from(&heads, &labels)
}

fn single_root_trees(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut heads = vec![0usize; n];
    loop {
        let roots = heads.iter().filter(|&&h| h == 0).count();
        if roots == 1 && acyclic(&heads) {
            out.push(heads.clone());
        }
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            heads[k] += 1;
            if heads[k] <= n {
                break;
            }
            heads[k] = 0;
            k += 1;
        }
    }
}

/// Every token reaches 0 without revisiting a node.
fn acyclic(heads: &[usize]) -> bool {
    (1..=heads.len()).all(|start| {
        let mut cur = start;
        for _ in 0..=heads.len() {
            if cur == 0 {
                return true;
            }
            cur = heads[cur - 1];
        }
        false
    })
}

fn combiner() -> Outcome {
    let started = Instant::now();
    let mut rng = rng_from_seed(303);
    for case in 0..10_000 {
        let len = rng.random_range(2..=10);
        let trees: Vec<Sentence> = (0..3).map(|_| random_tree(&mut rng, len)).collect();
        let refs: Vec<&Sentence> = trees.iter().collect();
        let out = combine_trees(&refs, VoteMode::ExactPair, &mut rng_from_seed(case)).map_err(|e| e.to_string())?;
        let roots = out.tokens.iter().filter(|t| t.head == 0).count();
        check(out.is_tree() && roots == 1, || format!("random case {}: {:?}", case, out.heads()))?;
    }
    let mut majority_cases = 0usize;
    for n in 1..=4 {
        let trees = single_root_trees(n);
        let labels_a: Vec<&str> = (0..n).map(|k| LABELS[k % 3]).collect();
        let labels_b: Vec<&str> = (0..n).map(|k| LABELS[(k + 1) % 3]).collect();
        for a in &trees {
            for b in &trees {
                for label_b in [&labels_a, &labels_b] {
                    let ta = sentence_from(a, &labels_a);
                    let tb = sentence_from(b, label_b);
                    for pos in 0..3 {
                        let mut refs = vec![&ta, &ta];
                        refs.insert(pos, &tb);
                        let seed = majority_cases as u64;
                        let out = combine_trees(&refs, VoteMode::ExactPair, &mut rng_from_seed(seed)).map_err(|e| e.to_string())?;
                        check(out == ta, || format!("majority {:?} vs {:?} at {}: got {:?}", a, b, pos, out.heads()))?;
                        majority_cases += 1;
                    }
                }
            }
        }
    }
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(60), || format!("took {:?}", elapsed))?;
    Ok(format!(
        "10000 random triples valid; {} majority triples exact; {:.1?}",
        majority_cases, elapsed
    ))
}

// ---------------------------------------------------------------- 4

const BENEFIT_MASTER_SEED: u64 = 7;
/// Selected-iteration ensemble dev LAS of the reference run.
const GOLDEN_SELECTED_LAS: f64 = 93.5117853016;

fn synthetic_benefit() -> Outcome {
    let started = Instant::now();
    let tb = generate(&SyntheticSpec::default());
    check(tb.train.len() == 300 && tb.dev.len() == 500 && tb.pool.len() == 20_000, || "treebank sizes".into())?;
    let gold: HashMap<String, &Sentence> = tb.pool.sentences.iter().map(|s| (s.forms_key(), s)).collect();
    let pool = UnlabelledPool::from_corpus(&tb.pool.stripped());
    let cfg = TriConfig {
        augment_size: 5000,
        iterations: 4,
        decay: 0.5,
        seed_mode: SeedMode::TwoAndAHalf,
        master_seed: BENEFIT_MASTER_SEED,
        ..Default::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let workers = std::thread::available_parallelism().map_or(3, |n| n.get().min(3));
    let result = run(&cfg, &tb.train, &pool, &tb.dev, dir.path(), workers).map_err(|e| e.to_string())?;
    let records = &result.log.records;
    let baseline_single = records[0].learner_las.iter().sum::<f64>() / 3.0;
    let mut precision = Vec::new();
    for set in &result.data[0].sets {
        let g = Corpus::new(
            set.sentences.iter().map(|s| gold[&s.forms_key()].clone()).collect(),
            Origin::Labelled,
        );
        precision.push(evaluate(&g, set).map_err(|e| e.to_string())?.las);
    }
    for (i, &p) in precision.iter().enumerate() {
        check(p > baseline_single, || {
            format!("L_1,{} precision {:.4} <= single-learner mean {:.4}", i + 1, p, baseline_single)
        })?;
    }
    let means = result.log.ensemble_means();
    let selected = means[result.selected];
    check(selected >= means[0], || format!("selected {:.4} < iteration 0 {:.4}", selected, means[0]))?;
    check(selected > means[0], || format!("selected {:.4} does not beat iteration 0", selected))?;
    check((selected - GOLDEN_SELECTED_LAS).abs() < 1e-8, || {
        format!("selected ensemble LAS {:.10} differs from golden {:.10}", selected, GOLDEN_SELECTED_LAS)
    })?;
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(600), || format!("took {:?}", elapsed))?;
    Ok(format!(
        "precision {:.2?} > single mean {:.2}; ensemble {:.2} -> {:.2} (iteration {}); {:.1?}",
        precision, baseline_single, means[0], selected, result.selected, elapsed
    ))
}

// ---------------------------------------------------------------- 5

/// Two-sided p by listing all 2^n outcomes of n fair discordant pairs.
fn brute_force_p(b: usize, c: usize) -> f64 {
    let n = b + c;
    let m = b.min(c);
    let tail = (0u32..1 << n).filter(|x| (x.count_ones() as usize) <= m).count();
    (2.0 * tail as f64 / (1u64 << n) as f64).min(1.0)
}

fn mcnemar_suite() -> Outcome {
    let mut cases = 0;
    for n in 0..=16 {
        for b in 0..=n {
            let c = n - b;
            let want = brute_force_p(b, c);
            let got = exact_binomial_p(b, c);
            check((got - want).abs() <= 1e-12, || format!("b={} c={}: {} vs {}", b, c, got, want))?;
            let mut f1 = vec![true; b];
            f1.extend(vec![false; c]);
            let f2: Vec<bool> = f1.iter().map(|x| !x).collect();
            let r = mcnemar(&f1, &f2).map_err(|e| e.to_string())?;
            check(r.b == b && r.c == c && (r.p_value - want).abs() <= 1e-12, || format!("flags b={} c={}", b, c))?;
            cases += 1;
        }
    }
    let thresholds = [0.05, 0.01, 0.001, 0.0001, 0.00001];
    for (k, &t) in thresholds.iter().enumerate() {
        check(stars(t) == k + 1, || format!("stars({}) = {}", t, stars(t)))?;
        let above = f64::from_bits(t.to_bits() + 1);
        check(stars(above) == k, || format!("stars just above {} = {}", t, stars(above)))?;
    }
    let p = exact_binomial_p(10, 2);
    check((p - 0.038574).abs() < 5e-7 && stars(p) == 1, || format!("b=10 c=2 gives {}", p))?;
    Ok(format!("{} (b, c) pairs match enumeration; star boundaries exact", cases))
}

// ---------------------------------------------------------------- 6

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..1 << n {
        if mask.count_ones() as usize == k {
            out.push((0..n).filter(|i| mask & (1 << i) != 0).collect());
        }
    }
    out
}

fn best_of_k() -> Outcome {
    let mut rng = rng_from_seed(606);
    let reps = 20_000;
    let mut worst = 0.0f64;
    for pool_no in 0..50 {
        let n = rng.random_range(1..=8);
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(7000..8500) as f64) / 100.0).collect();
        let k = rng.random_range(1..=n);
        let all = subsets(n, k);
        let mut exact = BigRational::zero();
        for s in &all {
            let best = s.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
            exact += BigRational::from_float(best).unwrap();
        }
        let exact = (exact / BigRational::from_integer(BigInt::from(all.len()))).to_f64().unwrap();
        let dist = simulate_best_of(&scores, k, reps, pool_no, Draw::WithoutReplacement).map_err(|e| e.to_string())?;
        let se = dist.summary.standard_error;
        let diff = (dist.summary.mean - exact).abs();
        // summing 20000 floats costs ~1e-11 even when every sample is equal
        let roundoff = 1e-9;
        check(diff <= 4.0 * se + roundoff, || {
            format!("pool {}: |{} - {}| > 4 * {}", pool_no, dist.summary.mean, exact, se)
        })?;
        if se > roundoff {
            worst = worst.max(diff / se);
        }
    }
    let mut max_err = 0.0f64;
    for trial in 0..20 {
        let n = rng.random_range(1..=30);
        let dev: Vec<f64> = (0..n).map(|_| rng.random_range(60.0..90.0)).collect();
        let test: Vec<f64> = (0..n).map(|_| rng.random_range(60.0..90.0)).collect();
        let mut mean = BigRational::zero();
        for &t in &test {
            mean += BigRational::from_float(t).unwrap();
        }
        let mean = (mean / BigRational::from_integer(BigInt::from(n))).to_f64().unwrap();
        let e = expected_test_best_of(&dev, &test, 1, 2000, trial, Draw::WithoutReplacement).map_err(|e| e.to_string())?;
        check((e.exact - mean).abs() <= 1e-12, || format!("k=1 trial {}: {} vs {}", trial, e.exact, mean))?;
        let se = e.sampled.summary.standard_error;
        check((e.sampled.summary.mean - mean).abs() <= 4.0 * se + 1e-9, || format!("k=1 trial {} sampled mean", trial))?;
        max_err = max_err.max((e.exact - mean).abs());
    }
    Ok(format!(
        "50 pools within 4 SE (worst {:.2} SE); k=1 expectation error {:.1e}",
        worst, max_err
    ))
}

// ---------------------------------------------------------------- 7

fn tritrain_bin() -> &'static str {
    env!("CARGO_BIN_EXE_tritrain")
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(tritrain_bin()).args(args).env("RUST_LOG", "warn").output().map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{:?} failed: {}", args, String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let ds = d.to_str().unwrap();
    run_cli(&["synthetic", "--output-dir", ds, "--train", "80", "--dev", "40", "--pool", "2000"])?;
    std::fs::write(
        d.join("manifest.toml"),
        "output = \"run\"\npreset = \"A1500t-T3-d0.5\"\n[data]\ntrain = \"train.conllu\"\ndev = \"dev.conllu\"\nunlabelled = \"pool.txt\"\n[config]\ncombiner_repeats = 5\n[config.learner]\nepochs = 3\n",
    )
    .map_err(|e| e.to_string())?;
    let manifest = d.join("manifest.toml");
    let m = manifest.to_str().unwrap();
    let (a, b) = (d.join("a"), d.join("b"));
    run_cli(&["tritrain", m, "--seed", "42", "--workers", "1", "--output", a.to_str().unwrap()])?;
    run_cli(&["tritrain", m, "--seed", "42", "--workers", "4", "--output", b.to_str().unwrap()])?;
    let mut files = vec!["run-log.tsv".to_string()];
    for t in 1..=3 {
        for i in 1..=3 {
            files.push(format!("iter-{}/new-data-{}.conllu", t, i));
        }
    }
    let same = |f: &str| -> Result<bool, String> {
        let x = std::fs::read(a.join(f)).map_err(|e| format!("{}: {}", f, e))?;
        let y = std::fs::read(b.join(f)).map_err(|e| format!("{}: {}", f, e))?;
        Ok(x == y && !x.is_empty())
    };
    for f in &files {
        check(same(f)?, || format!("{} differs between --workers 1 and 4", f))?;
    }
    Ok(format!("{} files byte-identical across --workers 1 and 4", files.len()))
}

// ---------------------------------------------------------------- 8

fn write_big_input(path: &Path, lines: usize) -> std::io::Result<()> {
    let mut rng = rng_from_seed(808);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let vocab: Vec<String> = (0..5000).map(|i| format!("w{}", i)).collect();
    let long = "x".repeat(201);
    let mut recent: Vec<String> = Vec::new();
    let mut line = String::new();
    for n in 0..lines {
        line.clear();
        if n % 10 == 9 && !recent.is_empty() {
            // duplicate of an earlier line
            line.push_str(&recent[rng.random_range(0..recent.len())]);
        } else {
            let len = rng.random_range(1..=60);
            for k in 0..len {
                if k > 0 {
                    line.push(' ');
                }
                if rng.random_range(0..2000) == 0 {
                    line.push_str(&long);
                } else {
                    line.push_str(&vocab[rng.random_range(0..vocab.len())]);
                }
            }
            if recent.len() < 1000 {
                recent.push(line.clone());
            } else {
                let slot = rng.random_range(0..1000);
                recent[slot] = line.clone();
            }
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

fn throughput() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("big.txt");
    let lines = 1_000_000;
    write_big_input(&input, lines).map_err(|e| e.to_string())?;
    let spec = PoolFilterSpec {
        shuffle_seed: 8,
        ..Default::default()
    };
    let started = Instant::now();
    let file = std::fs::File::open(&input).map_err(|e| e.to_string())?;
    let (pool, stats) = UnlabelledPool::ingest(BufReader::new(file), &spec).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    check(stats.lines_read == lines, || format!("read {} lines", stats.lines_read))?;
    check(
        stats.kept + stats.rejected_length + stats.rejected_bytes + stats.duplicates == lines,
        || format!("{:?} does not account for every line", stats),
    )?;
    check(stats.duplicates > 0 && stats.rejected_bytes > 0, || format!("{:?}", stats))?;
    check(pool.lines().all(|l| spec.accepts(&l.split(' ').collect::<Vec<_>>())), || "filter violated".into())?;
    check(elapsed < Duration::from_secs(300), || format!("took {:?}", elapsed))?;
    Ok(format!(
        "{} lines in {:.1?}: kept {}, length {}, bytes {}, duplicates {}",
        lines, elapsed, stats.kept, stats.rejected_length, stats.rejected_bytes, stats.duplicates
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 decay caps", decay_caps),
        ("2 agreement filter oracle", agreement_oracle),
        ("3 combiner validity and majority", combiner),
        ("4 synthetic tri-training benefit", synthetic_benefit),
        ("5 McNemar exact p-values and stars", mcnemar_suite),
        ("6 best-of-k statistics", best_of_k),
        ("7 determinism across workers", determinism),
        ("8 ingest throughput", throughput),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {}", name, detail),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {}", name, why);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
