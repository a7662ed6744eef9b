//! Command-line front end for tri-training experiments.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 learner failure.

mod manifest;
mod mock;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tritrain::analysis::{
    enumerate_bucket_ensembles, expected_test_best_of, read_score_table, simulate_best_of, Draw, ScoredModel,
    ScoredModelPool,
};
use tritrain::conllu::{read_conllu_file, write_conllu_file, Corpus, Origin, PoolFilterSpec, UnlabelledPool};
use tritrain::ensemble::{combine_corpora, CombinerConfig, EnsembleScore, VoteMode};
use tritrain::learner::{self, LearnerSpec};
use tritrain::metrics::{self, breakdown_with, evaluate_with, mcnemar_with, render_stars, LabelMatch, McNemarMethod};
use tritrain::synthetic::{generate, SyntheticSpec};
use tritrain::tritraining::{preset_grid, GridVariant, TriConfig};

use crate::manifest::ExperimentManifest;

#[derive(Debug, Parser)]
#[command(name = "tritrain", version, about = "Tri-training for dependency parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run tri-training from an experiment manifest.
    Tritrain(TritrainArgs),
    /// List the named presets of the twelve-run grid.
    Presets(PresetsArgs),
    /// Score predictions against gold: LAS/UAS, breakdowns, significance.
    Eval(EvalArgs),
    /// Combine parses of the same sentences by voting.
    Combine(CombineArgs),
    /// Best-of-k baseline distributions and bucket ensembles.
    Simulate(SimulateArgs),
    /// Filter, de-duplicate and shuffle pre-tokenised text into a pool.
    Ingest(IngestArgs),
    /// Check an external learner against the subprocess protocol.
    LearnerCheck(LearnerCheckArgs),
    /// Write the bundled synthetic treebank.
    Synthetic(SyntheticArgs),
    #[command(hide = true)]
    MockLearner {
        #[arg(long)]
        fail: bool,
        #[command(subcommand)]
        command: mock::MockCommand,
    },
}

#[derive(Debug, Args)]
struct TritrainArgs {
    /// Experiment manifest (TOML).
    manifest: PathBuf,
    /// Preset name such as A80-T8-d0.5; overrides `preset`.
    #[arg(long)]
    preset: Option<String>,
    /// Master seed; overrides `config.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Run directory; overrides `output`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Concurrent learners and combiner threads. Results do not depend on it.
    #[arg(long, default_value_t = 3)]
    workers: usize,
}

#[derive(Debug, Args)]
struct PresetsArgs {
    /// Which decay values the grid uses.
    #[arg(long, value_enum, default_value_t = GridArg::Standard)]
    grid: GridArg,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GridArg {
    Standard,
    MbertVariant,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Exact,
    ChiSquare,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LabelArg {
    Full,
    Universal,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VoteArg {
    ExactPair,
    HeadThenLabel,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Gold CoNLL-U.
    #[arg(long)]
    gold: PathBuf,
    /// Predicted CoNLL-U.
    #[arg(long)]
    pred: PathBuf,
    /// Labelled training data whose forms define in-vocabulary tokens.
    #[arg(long)]
    train_vocab: Option<PathBuf>,
    /// A second system's predictions, tested against the first with McNemar.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// McNemar variant.
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    /// Use whole sentences (all tokens correct) as McNemar units.
    #[arg(long)]
    sentence_level: bool,
    /// Compare full labels or only the universal part before ':'.
    #[arg(long, value_enum, default_value_t = LabelArg::Full)]
    labels: LabelArg,
    /// Write a JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CombineArgs {
    /// Parses to combine (at least two).
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    /// Number of combinations with different tie-breaking.
    #[arg(long, default_value_t = 21)]
    repeats: usize,
    /// Seed for tie-breaking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Count votes for exact (head, label) pairs, or heads first.
    #[arg(long, value_enum, default_value_t = VoteArg::ExactPair)]
    vote_mode: VoteArg,
    /// Directory for combined-<r>.conllu.
    #[arg(long)]
    output_dir: PathBuf,
    /// Gold CoNLL-U; prints mean/min/max LAS over the repeats.
    #[arg(long)]
    gold: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Score table: id, dev LAS and optional test LAS, tab-separated.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Scores drawn per repetition.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Repetitions.
    #[arg(long, default_value_t = 250_000)]
    reps: usize,
    /// Seed for the draws and the bucket sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw the k scores with replacement.
    #[arg(long)]
    with_replacement: bool,
    /// Histogram bins.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Write histogram rows here.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// Per-learner score tables (three) for bucket ensembles.
    #[arg(long, num_args = 1..)]
    learner_tables: Vec<PathBuf>,
    /// Buckets per learner, by dev score.
    #[arg(long, default_value_t = 16)]
    bucket_count: usize,
    /// Write the enumerated model triples here.
    #[arg(long)]
    ensembles: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// One pre-tokenised sentence per line.
    #[arg(long)]
    input: PathBuf,
    /// The filtered pool, one sentence per line.
    #[arg(long)]
    output: PathBuf,
    /// Shortest sentence kept, in tokens.
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    /// Longest sentence kept, in tokens.
    #[arg(long, default_value_t = 40)]
    max_len: usize,
    /// Drop sentences with a longer token (UTF-8 bytes).
    #[arg(long, default_value_t = 200)]
    max_token_bytes: usize,
    /// Keep duplicate sentences.
    #[arg(long)]
    no_dedup: bool,
    /// Keep each sentence with this probability.
    #[arg(long, default_value_t = 1.0)]
    keep_fraction: f64,
    /// Shuffle seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write CoNLL-U instead of text.
    #[arg(long)]
    conllu: bool,
}

#[derive(Debug, Args)]
struct LearnerCheckArgs {
    /// External learner command; defaults to the bundled mock.
    #[arg(long)]
    cmd: Option<String>,
    /// Working directory; a temporary one by default.
    #[arg(long)]
    work_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SyntheticArgs {
    /// Directory for train.conllu, dev.conllu, pool.txt and pool-gold.conllu.
    #[arg(long)]
    output_dir: PathBuf,
    /// Grammar and sampling seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Labelled training sentences.
    #[arg(long, default_value_t = 300)]
    train: usize,
    /// Development sentences.
    #[arg(long, default_value_t = 500)]
    dev: usize,
    /// Unlabelled pool sentences.
    #[arg(long, default_value_t = 20_000)]
    pool: usize,
}

/// A usage problem found after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<tritrain::Error>() {
        Some(tritrain::Error::Learner(_)) | Some(tritrain::Error::Model { .. }) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Tritrain(a) => cmd_tritrain(a),
        Command::Presets(a) => cmd_presets(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Combine(a) => cmd_combine(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::LearnerCheck(a) => cmd_learner_check(a),
        Command::Synthetic(a) => cmd_synthetic(a),
        Command::MockLearner { fail, command } => mock::run_mock(command, fail),
    }
}

fn read_gold(path: &Path) -> anyhow::Result<Corpus> {
    read_conllu_file(path, Origin::Labelled).with_context(|| path.display().to_string())
}

fn read_pred(path: &Path) -> anyhow::Result<Corpus> {
    read_conllu_file(path, Origin::Predicted).with_context(|| path.display().to_string())
}

fn read_pool(path: &Path, spec: &PoolFilterSpec) -> anyhow::Result<UnlabelledPool> {
    if path.extension().is_some_and(|e| e == "conllu") {
        return Ok(UnlabelledPool::from_corpus(&read_conllu_file(path, Origin::Unlabelled)?));
    }
    let file = File::open(path).with_context(|| path.display().to_string())?;
    let (pool, stats) = UnlabelledPool::ingest(BufReader::new(file), spec)?;
    log::info!("unlabelled pool: {:?}", stats);
    Ok(pool)
}

fn cmd_tritrain(a: TritrainArgs) -> anyhow::Result<()> {
    if a.workers == 0 {
        return Err(UsageError("--workers must be at least 1".into()).into());
    }
    let mut m = ExperimentManifest::load(&a.manifest)?;
    if let Some(p) = a.preset {
        m.preset = Some(p);
    }
    if let Some(s) = a.seed {
        m.config.master_seed = s;
    }
    if let Some(o) = a.output {
        m.output = o;
    }
    m.resolve()?;
    m.check_paths()?;
    // the pool shuffle is one more stream of the master seed
    m.pool.shuffle_seed = m.config.coordinates(0, 0).stream("pool-shuffle", &[]);

    let train = read_gold(&m.data.train)?;
    let dev = read_gold(&m.data.dev)?;
    let pool = read_pool(&m.data.unlabelled, &m.pool)?;
    let result = tritrain::tritraining::run(&m.config, &train, &pool, &dev, &m.output, a.workers)?;
    println!("{}", result.log.to_tsv().trim_end());
    println!("selected iteration {}", result.selected);

    if let Some(test_path) = &m.data.test {
        let test = read_gold(test_path)?;
        let report = score_test(&m.config, &result.models, result.selected, &test, &m.output)?;
        println!(
            "test ensemble LAS: iteration 0 {:.2}, selected {:.2}",
            report["baseline"]["mean"].as_f64().unwrap_or(f64::NAN),
            report["selected"]["mean"].as_f64().unwrap_or(f64::NAN)
        );
        std::fs::write(m.output.join("test-scores.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

/// Ensemble test scores of iteration 0 and of the selected iteration, with
/// a token-level McNemar test between their first repeats.
fn score_test(
    config: &TriConfig,
    models: &[[learner::ModelHandle; 3]],
    selected: usize,
    test: &Corpus,
    out: &Path,
) -> anyhow::Result<serde_json::Value> {
    let input = test.stripped();
    let mut scores = Vec::new();
    let mut first = Vec::new();
    for t in [0, selected] {
        let preds = models[t]
            .iter()
            .map(|h| learner::predict(h, &input))
            .collect::<tritrain::Result<Vec<_>>>()?;
        let cfg = CombinerConfig {
            repeats: config.combiner_repeats,
            base_seed: config.coordinates(0, t).stream("combine-test", &[]),
            mode: config.vote_mode,
        };
        let combined = combine_corpora(&preds.iter().collect::<Vec<_>>(), &cfg)?;
        write_conllu_file(&out.join(format!("iter-{}", t)).join("ensemble-test.conllu"), &combined[0])?;
        let las = combined
            .iter()
            .map(|c| metrics::evaluate(test, c).map(|r| r.las))
            .collect::<tritrain::Result<Vec<_>>>()?;
        first.push(metrics::evaluate(test, &combined[0])?.correct_flags);
        scores.push(EnsembleScore::from_scores(las));
    }
    let sig = mcnemar_with(&first[1], &first[0], McNemarMethod::Exact)?;
    Ok(json!({
        "selected_iteration": selected,
        "baseline": {"mean": scores[0].mean, "min": scores[0].min, "max": scores[0].max},
        "selected": {"mean": scores[1].mean, "min": scores[1].min, "max": scores[1].max},
        "mcnemar": {"b": sig.b, "c": sig.c, "p_value": sig.p_value, "stars": render_stars(sig.stars)},
    }))
}

fn cmd_presets(a: PresetsArgs) -> anyhow::Result<()> {
    let variant = match a.grid {
        GridArg::Standard => GridVariant::Standard,
        GridArg::MbertVariant => GridVariant::MbertVariant,
    };
    println!("name\tA\tT\td\toversample\trepeat");
    for p in preset_grid(variant) {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            p.name,
            p.augment_size,
            p.iterations,
            p.decay,
            u8::from(p.oversample),
            u8::from(p.is_repeat)
        );
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let labels = match a.labels {
        LabelArg::Full => LabelMatch::Full,
        LabelArg::Universal => LabelMatch::Universal,
    };
    let gold = read_gold(&a.gold)?;
    let pred = read_pred(&a.pred)?;
    let report = evaluate_with(&gold, &pred, labels)?;
    println!("LAS {:.2}", report.las);
    println!("UAS {:.2}", report.uas);
    let mut out = json!({"las": report.las, "uas": report.uas, "tokens": report.total_tokens});

    if let Some(path) = &a.train_vocab {
        let vocab = metrics::vocabulary(&read_gold(path)?);
        let b = breakdown_with(&gold, &pred, &vocab, labels)?;
        print!("{}", b.to_tsv());
        out["breakdown"] = serde_json::to_value(&b)?;
    }
    if let Some(path) = &a.compare {
        let other = evaluate_with(&gold, &read_pred(path)?, labels)?;
        let method = match a.method {
            MethodArg::Exact => McNemarMethod::Exact,
            MethodArg::ChiSquare => McNemarMethod::ChiSquare,
        };
        let (f1, f2) = if a.sentence_level {
            (report.sentence_flags(), other.sentence_flags())
        } else {
            (report.correct_flags.clone(), other.correct_flags.clone())
        };
        let sig = mcnemar_with(&f1, &f2, method)?;
        println!("LAS2 {:.2}", other.las);
        println!(
            "McNemar b={} c={} p={:.6} {}",
            sig.b,
            sig.c,
            sig.p_value,
            render_stars(sig.stars)
        );
        out["compare"] = json!({
            "las": other.las,
            "uas": other.uas,
            "b": sig.b,
            "c": sig.c,
            "p_value": sig.p_value,
            "stars": sig.stars,
            "degenerate": sig.degenerate,
            "method": sig.method,
            "unit": if a.sentence_level { "sentence" } else { "token" },
        });
    }
    if let Some(path) = &a.json {
        std::fs::write(path, serde_json::to_string_pretty(&out)? + "\n")?;
    }
    Ok(())
}

fn cmd_combine(a: CombineArgs) -> anyhow::Result<()> {
    let corpora = a.inputs.iter().map(|p| read_pred(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let cfg = CombinerConfig {
        repeats: a.repeats,
        base_seed: a.seed,
        mode: match a.vote_mode {
            VoteArg::ExactPair => VoteMode::ExactPair,
            VoteArg::HeadThenLabel => VoteMode::HeadThenLabel,
        },
    };
    cfg.validate()?;
    let combined = combine_corpora(&corpora.iter().collect::<Vec<_>>(), &cfg)?;
    std::fs::create_dir_all(&a.output_dir)?;
    for (r, c) in combined.iter().enumerate() {
        write_conllu_file(&a.output_dir.join(format!("combined-{}.conllu", r)), c)?;
    }
    if let Some(g) = &a.gold {
        let gold = read_gold(g)?;
        let las = combined
            .iter()
            .map(|c| metrics::evaluate(&gold, c).map(|r| r.las))
            .collect::<tritrain::Result<Vec<_>>>()?;
        let s = EnsembleScore::from_scores(las);
        println!("repeats\tmean\tmin\tmax");
        println!("{}\t{:.4}\t{:.4}\t{:.4}", s.per_repeat.len(), s.mean, s.min, s.max);
    }
    Ok(())
}

fn read_table(path: &Path) -> anyhow::Result<Vec<ScoredModel>> {
    let file = File::open(path).with_context(|| path.display().to_string())?;
    Ok(read_score_table(BufReader::new(file))?)
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<()> {
    if a.scores.is_none() && a.learner_tables.is_empty() {
        return Err(UsageError("give --scores and/or --learner-tables".into()).into());
    }
    let draw = if a.with_replacement {
        Draw::WithReplacement
    } else {
        Draw::WithoutReplacement
    };
    if let Some(path) = &a.scores {
        let table = read_table(path)?;
        let dev: Vec<f64> = table.iter().map(|m| m.dev_las).collect();
        let dist = simulate_best_of(&dev, a.k, a.reps, a.seed, draw)?;
        println!("# best of {} dev scores, {} repetitions", a.k, a.reps);
        print!("{}", dist.summary_tsv());
        if let Some(h) = &a.histogram {
            std::fs::write(h, dist.histogram_tsv(a.bins))?;
        }
        if table.iter().all(|m| m.test_las.is_some()) {
            let test: Vec<f64> = table.iter().filter_map(|m| m.test_las).collect();
            let e = expected_test_best_of(&dev, &test, a.k, a.reps, a.seed, draw)?;
            println!("# test score of the best-by-dev model");
            println!("sampled_mean\t{:.6}", e.sampled.summary.mean);
            println!("standard_error\t{:.6}", e.sampled.summary.standard_error);
            println!("exact\t{:.6}", e.exact);
        }
    }
    if !a.learner_tables.is_empty() {
        let learners = a.learner_tables.iter().map(|p| read_table(p)).collect::<anyhow::Result<Vec<_>>>()?;
        let ids: Vec<Vec<String>> = learners.iter().map(|l| l.iter().map(|m| m.id.clone()).collect()).collect();
        let mut pool = ScoredModelPool::new(learners);
        pool.bucket_count = a.bucket_count;
        let ens = enumerate_bucket_ensembles(&pool, a.seed)?;
        println!("# {} bucket ensembles ({} buckets per learner)", ens.members.len(), ens.bucket_count);
        if let Some(out) = &a.ensembles {
            let mut w = BufWriter::new(File::create(out)?);
            for members in &ens.members {
                let row: Vec<&str> = members.iter().enumerate().map(|(l, &m)| ids[l][m].as_str()).collect();
                writeln!(w, "{}", row.join("\t"))?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> anyhow::Result<()> {
    let spec = PoolFilterSpec {
        min_len: a.min_len,
        max_len: a.max_len,
        max_token_bytes: a.max_token_bytes,
        dedup: !a.no_dedup,
        shuffle_seed: a.seed,
        keep_fraction: a.keep_fraction,
    };
    let file = File::open(&a.input).with_context(|| a.input.display().to_string())?;
    let (pool, stats) = UnlabelledPool::ingest(BufReader::new(file), &spec)?;
    let mut w = BufWriter::new(File::create(&a.output)?);
    if a.conllu {
        pool.write_conllu(&mut w)?;
    } else {
        pool.write_text(&mut w)?;
    }
    w.flush()?;
    println!(
        "read {} kept {} length {} bytes {} duplicates {} fraction {}",
        stats.lines_read,
        stats.kept,
        stats.rejected_length,
        stats.rejected_bytes,
        stats.duplicates,
        stats.dropped_by_fraction
    );
    Ok(())
}

fn cmd_learner_check(a: LearnerCheckArgs) -> anyhow::Result<()> {
    let cmd = match a.cmd {
        Some(c) => c,
        None => mock::mock_command()?,
    };
    let spec = LearnerSpec::external(cmd);
    match a.work_dir {
        Some(dir) => mock::learner_check(&spec, &dir),
        None => {
            let tmp = tempfile::tempdir()?;
            mock::learner_check(&spec, tmp.path())
        }
    }
}

fn cmd_synthetic(a: SyntheticArgs) -> anyhow::Result<()> {
    let tb = generate(&SyntheticSpec {
        seed: a.seed,
        train: a.train,
        dev: a.dev,
        pool: a.pool,
        ..Default::default()
    });
    std::fs::create_dir_all(&a.output_dir)?;
    write_conllu_file(&a.output_dir.join("train.conllu"), &tb.train)?;
    write_conllu_file(&a.output_dir.join("dev.conllu"), &tb.dev)?;
    write_conllu_file(&a.output_dir.join("pool-gold.conllu"), &tb.pool)?;
    let mut w = BufWriter::new(File::create(a.output_dir.join("pool.txt"))?);
    UnlabelledPool::from_corpus(&tb.pool).write_text(&mut w)?;
    w.flush()?;
    println!("wrote {}", a.output_dir.display());
    Ok(())
}
