//! A tiny external learner speaking the subprocess protocol, and the check
//! that drives any external learner through it.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Subcommand;
use serde::{Deserialize, Serialize};
use tritrain::conllu::{read_conllu_file, write_conllu_file, Corpus, Origin};
use tritrain::learner::{self, LearnerSpec};
use tritrain::metrics::check_alignment;
use tritrain::synthetic::{generate, SyntheticSpec};

#[derive(Debug, Subcommand)]
pub enum MockCommand {
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        model: PathBuf,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Serialize, Deserialize)]
struct MockModel {
    seed: u64,
    label: String,
    upos: String,
}

fn most_common<'a>(items: impl Iterator<Item = &'a str>) -> String {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for i in items {
        *counts.entry(i).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(a.0)))
        .map_or_else(|| "dep".to_string(), |(k, _)| k.to_string())
}

/// Chain trees: the first token is the root and every other token hangs off
/// its predecessor with the most frequent training label.
pub fn run_mock(cmd: MockCommand, fail: bool) -> anyhow::Result<()> {
    if fail {
        eprintln!("mock learner: failing on request");
        std::process::exit(7);
    }
    match cmd {
        MockCommand::Train { train, seed, model } => {
            let corpus = read_conllu_file(&train, Origin::Labelled)?;
            let tokens = || corpus.sentences.iter().flat_map(|s| &s.tokens);
            let m = MockModel {
                seed,
                label: most_common(tokens().filter(|t| t.head != 0).map(|t| t.deprel.as_str())),
                upos: most_common(tokens().map(|t| t.upos.as_str())),
            };
            std::fs::create_dir_all(&model)?;
            std::fs::write(model.join("mock.json"), serde_json::to_string(&m)?)?;
        }
        MockCommand::Predict { model, input, output } => {
            let m: MockModel = serde_json::from_str(
                &std::fs::read_to_string(model.join("mock.json")).context("mock model missing")?,
            )?;
            let mut corpus = read_conllu_file(&input, Origin::Unlabelled)?;
            for s in &mut corpus.sentences {
                for (i, t) in s.tokens.iter_mut().enumerate() {
                    t.head = i;
                    t.deprel = if i == 0 { "root".into() } else { m.label.clone() };
                    t.upos = m.upos.clone();
                    t.lemma = t.form.clone();
                }
            }
            write_conllu_file(&output, &corpus)?;
        }
    }
    Ok(())
}

/// The command line that runs this binary's mock learner.
pub fn mock_command() -> anyhow::Result<String> {
    let exe = std::env::current_exe().context("cannot locate the running binary")?;
    Ok(format!("{} mock-learner", exe.display()))
}

/// Trains and predicts with `spec` on a small synthetic treebank and checks
/// the output against the protocol. Prints one line per check.
pub fn learner_check(spec: &LearnerSpec, work: &Path) -> anyhow::Result<()> {
    spec.validate()?;
    let tb = generate(&SyntheticSpec {
        train: 40,
        dev: 10,
        pool: 0,
        ..Default::default()
    });
    let handle = learner::train(spec, &tb.train, 1, &work.join("model"))?;
    println!("ok\ttrain\t{}", handle.path.display());
    let input = tb.dev.stripped();
    let pred: Corpus = learner::predict(&handle, &input)?;
    println!("ok\tpredict\t{} sentences", pred.len());
    check_alignment(&tb.dev, &pred)?;
    println!("ok\talignment");
    pred.check_trees()?;
    println!("ok\ttrees");
    let again = learner::predict(&handle, &input)?;
    if again != pred {
        anyhow::bail!(tritrain::Error::Learner("two predictions with one model differ".into()));
    }
    println!("ok\tdeterministic");
    Ok(())
}
