//! Learners: the train/predict abstraction, the built-in perceptron parser,
//! and the subprocess adapter for external parsers.

mod builtin;
mod external;
mod perceptron;
mod transition;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use self::builtin::{BuiltinModel, TrainReport};
pub use self::transition::{is_projective, replay, static_oracle, Transition};
pub use crate::seed::{derive_seed, SeedCoordinates};

use crate::conllu::{to_conllu_bytes, write_conllu_file, Column, Corpus, Origin, Sentence};
use crate::error::{Error, Result};
use crate::metrics::check_alignment;
use crate::seed::fnv1a64;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BUILTIN_MODEL_FILE: &str = "model.bin";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[default]
    BuiltinPerceptron,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub epochs: usize,
    pub beam: usize,
    pub external_cmd: Option<String>,
    pub predicted_columns: Vec<Column>,
}

impl Default for LearnerSpec {
    fn default() -> Self {
        LearnerSpec {
            kind: LearnerKind::BuiltinPerceptron,
            epochs: 10,
            beam: 1,
            external_cmd: None,
            predicted_columns: vec![Column::Upos, Column::Head, Column::Deprel],
        }
    }
}

impl LearnerSpec {
    pub fn external(cmd: impl Into<String>) -> Self {
        LearnerSpec {
            kind: LearnerKind::External,
            external_cmd: Some(cmd.into()),
            predicted_columns: Column::ALL.to_vec(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for needed in [Column::Head, Column::Deprel] {
            if !self.predicted_columns.contains(&needed) {
                return Err(Error::Config(format!("predicted_columns must include {}", needed)));
            }
        }
        match self.kind {
            LearnerKind::BuiltinPerceptron if self.epochs == 0 => {
                Err(Error::Config("epochs must be at least 1".into()))
            }
            LearnerKind::External if self.external_cmd.as_deref().is_none_or(|c| c.trim().is_empty()) => {
                Err(Error::Config("external learner needs external_cmd".into()))
            }
            _ => Ok(()),
        }
    }

    fn has(&self, column: Column) -> bool {
        self.predicted_columns.contains(&column)
    }
}

/// Stored beside every model artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub learner: LearnerSpec,
    /// FNV-1a of the CoNLL-U serialisation of the training data, hex.
    pub corpus_hash: String,
    pub seed: u64,
    pub coordinates: Option<SeedCoordinates>,
    pub report: Option<TrainReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub path: PathBuf,
    pub manifest: ModelManifest,
    pub dev_las: Option<f64>,
}

impl ModelHandle {
    /// Reads the handle of a previously trained model directory.
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::Model {
            path: manifest_path.clone(),
            message: e.to_string(),
        })?;
        let manifest: ModelManifest = serde_json::from_str(&text).map_err(|e| Error::Model {
            path: manifest_path,
            message: e.to_string(),
        })?;
        Ok(ModelHandle {
            path: dir.to_path_buf(),
            manifest,
            dev_las: None,
        })
    }

    pub fn iteration(&self) -> Option<usize> {
        self.manifest.coordinates.as_ref().map(|c| c.iteration)
    }

    pub fn learner_index(&self) -> Option<usize> {
        self.manifest.coordinates.as_ref().map(|c| c.learner_index)
    }
}

/// A model ready to predict.
pub enum LoadedModel {
    Builtin(Box<BuiltinModel>),
    External {
        command: Vec<String>,
        dir: PathBuf,
        spec: LearnerSpec,
    },
}

impl LoadedModel {
    pub fn predict(&self, input: &Corpus) -> Result<Corpus> {
        match self {
            LoadedModel::Builtin(model) => Ok(model.predict(input)),
            LoadedModel::External { command, dir, spec } => {
                let raw = external::predict(command, dir, input)?;
                normalise_prediction(input, raw, spec)
            }
        }
    }

    pub fn report(&self) -> Option<&TrainReport> {
        match self {
            LoadedModel::Builtin(m) => Some(m.report()),
            LoadedModel::External { .. } => None,
        }
    }
}

/// Copies predicted columns onto the input sentences, blanks the rest, and
/// checks that every sentence came back as a tree.
fn normalise_prediction(input: &Corpus, raw: Corpus, spec: &LearnerSpec) -> Result<Corpus> {
    check_alignment(input, &raw)?;
    let mut out = Vec::with_capacity(input.len());
    for (i, (inp, pred)) in input.sentences.iter().zip(raw.sentences).enumerate() {
        pred.check_tree()
            .map_err(|m| Error::Learner(format!("prediction for sentence {} is not a tree: {}", i, m)))?;
        let mut s: Sentence = inp.clone();
        for (t, p) in s.tokens.iter_mut().zip(&pred.tokens) {
            for c in Column::ALL {
                if spec.has(c) || matches!(c, Column::Head | Column::Deprel) {
                    t.set_column(c, &p.column(c));
                } else {
                    t.set_column(c, "_");
                }
            }
        }
        out.push(s);
    }
    Ok(Corpus::new(out, Origin::Predicted))
}

pub fn corpus_hash(corpus: &Corpus) -> String {
    format!("{:016x}", fnv1a64(&to_conllu_bytes(corpus)))
}

fn write_manifest(dir: &Path, manifest: &ModelManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Model {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::write(dir.join(MANIFEST_FILE), text + "\n")?;
    Ok(())
}

/// Trains a model into `model_dir`. `train_file`, when given, must already
/// hold `corpus` in CoNLL-U form and is handed to external learners as is.
pub fn train_loaded(
    spec: &LearnerSpec,
    corpus: &Corpus,
    seed: u64,
    coordinates: Option<SeedCoordinates>,
    model_dir: &Path,
    train_file: Option<&Path>,
) -> Result<(ModelHandle, LoadedModel)> {
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus has no sentences".into()));
    }
    if let Some(c) = &coordinates {
        if derive_seed(c) != seed {
            return Err(Error::Config("seed does not match its coordinates".into()));
        }
    }
    std::fs::create_dir_all(model_dir)?;
    let (loaded, report) = match spec.kind {
        LearnerKind::BuiltinPerceptron => {
            let model = BuiltinModel::train(corpus, &spec.predicted_columns, spec.epochs, spec.beam, seed)?;
            model.save(&model_dir.join(BUILTIN_MODEL_FILE))?;
            let report = model.report().clone();
            if report.non_projective_excluded > 0 {
                log::info!(
                    "{}: {} non-projective sentences excluded from parser training",
                    model_dir.display(),
                    report.non_projective_excluded
                );
            }
            (LoadedModel::Builtin(Box::new(model)), Some(report))
        }
        LearnerKind::External => {
            let command = external::split_command(spec.external_cmd.as_deref().unwrap_or(""))?;
            let owned_file;
            let file = match train_file {
                Some(f) => f,
                None => {
                    owned_file = model_dir.join("train-input.conllu");
                    write_conllu_file(&owned_file, corpus)?;
                    &owned_file
                }
            };
            external::train(&command, file, seed, model_dir)?;
            (
                LoadedModel::External {
                    command,
                    dir: model_dir.to_path_buf(),
                    spec: spec.clone(),
                },
                None,
            )
        }
    };
    let manifest = ModelManifest {
        learner: spec.clone(),
        corpus_hash: corpus_hash(corpus),
        seed,
        coordinates,
        report,
    };
    write_manifest(model_dir, &manifest)?;
    Ok((
        ModelHandle {
            path: model_dir.to_path_buf(),
            manifest,
            dev_las: None,
        },
        loaded,
    ))
}

pub fn train(spec: &LearnerSpec, corpus: &Corpus, seed: u64, model_dir: &Path) -> Result<ModelHandle> {
    train_loaded(spec, corpus, seed, None, model_dir, None).map(|(h, _)| h)
}

pub fn load(handle: &ModelHandle) -> Result<LoadedModel> {
    let spec = &handle.manifest.learner;
    match spec.kind {
        LearnerKind::BuiltinPerceptron => Ok(LoadedModel::Builtin(Box::new(BuiltinModel::load(
            &handle.path.join(BUILTIN_MODEL_FILE),
        )?))),
        LearnerKind::External => {
            if !handle.path.is_dir() {
                return Err(Error::Model {
                    path: handle.path.clone(),
                    message: "model directory does not exist".into(),
                });
            }
            Ok(LoadedModel::External {
                command: external::split_command(spec.external_cmd.as_deref().unwrap_or(""))?,
                dir: handle.path.clone(),
                spec: spec.clone(),
            })
        }
    }
}

pub fn predict(handle: &ModelHandle, input: &Corpus) -> Result<Corpus> {
    load(handle)?.predict(input)
}
