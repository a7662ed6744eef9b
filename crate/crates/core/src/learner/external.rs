//! Subprocess adapter for external parsers.
//!
//! The command template is split on whitespace into a program and leading
//! arguments; the adapter then appends
//!
//! ```text
//! train   --train <file> --seed <n> --model <dir>
//! predict --model <dir> --input <file> --output <file>
//! ```
//!
//! All files are CoNLL-U. A nonzero exit status is reported together with the
//! tail of the program's stderr.

use std::path::Path;
use std::process::{Command, Output};

use crate::conllu::{read_conllu_file, write_conllu_file, Corpus, Origin};
use crate::error::{Error, Result};

const DIAGNOSTIC_TAIL: usize = 4000;

pub(crate) fn split_command(template: &str) -> Result<Vec<String>> {
    let parts: Vec<String> = template.split_whitespace().map(str::to_string).collect();
    if parts.is_empty() {
        return Err(Error::Config("external learner command is empty".into()));
    }
    Ok(parts)
}

fn run(command: &[String], args: &[&str]) -> Result<Output> {
    let output = Command::new(&command[0])
        .args(&command[1..])
        .args(args)
        .output()
        .map_err(|e| Error::Learner(format!("cannot start '{}': {}", command[0], e)))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        let start = stderr.len().saturating_sub(DIAGNOSTIC_TAIL);
        let start = (start..stderr.len()).find(|&i| stderr.is_char_boundary(i)).unwrap_or(0);
        return Err(Error::Learner(format!(
            "'{}' {} exited with {}: {}",
            command.join(" "),
            args.first().copied().unwrap_or(""),
            output.status,
            stderr[start..].trim()
        )));
    }
    Ok(output)
}

pub(crate) fn train(command: &[String], train_file: &Path, seed: u64, model_dir: &Path) -> Result<()> {
    run(
        command,
        &[
            "train",
            "--train",
            &train_file.to_string_lossy(),
            "--seed",
            &seed.to_string(),
            "--model",
            &model_dir.to_string_lossy(),
        ],
    )?;
    Ok(())
}

pub(crate) fn predict(command: &[String], model_dir: &Path, input: &Corpus) -> Result<Corpus> {
    let scratch = tempfile::Builder::new().prefix("tritrain-predict").tempdir()?;
    let input_path = scratch.path().join("input.conllu");
    let output_path = scratch.path().join("output.conllu");
    write_conllu_file(&input_path, input)?;
    run(
        command,
        &[
            "predict",
            "--model",
            &model_dir.to_string_lossy(),
            "--input",
            &input_path.to_string_lossy(),
            "--output",
            &output_path.to_string_lossy(),
        ],
    )?;
    if !output_path.exists() {
        return Err(Error::Learner(format!(
            "'{}' predict did not write {}",
            command.join(" "),
            output_path.display()
        )));
    }
    read_conllu_file(&output_path, Origin::Predicted)
}
