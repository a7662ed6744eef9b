//! The tri-training loop.
//!
//! Three learners start from their own samples B_i of the labelled data.
//! In every iteration a fresh unlabelled sample U' is parsed by all three
//! models; sentences on which exactly two models agree go to the third, and
//! sentences on which all three agree go to a randomly chosen learner. The
//! new data is capped at A tokens per learner, older data is reused under
//! an exponentially decaying cap, and every learner is retrained. The
//! iteration whose three-model ensemble scores best on dev is selected.

mod agreement;
mod data;
mod run;

use serde::{Deserialize, Serialize};

pub use self::agreement::{agreement_filter, AgreementStats, IterationData, Provenance};
pub use self::data::{
    assemble_training_set, cap_indices, cap_to_budget, decay_cap, oversample, sample_seed_data, Assembly,
    HistoryPart, SeedSample,
};
pub use self::run::{run, select_iteration, IterationRecord, RunLog, RunResult, RUN_LOG_FILE};

use crate::conllu::Column;
use crate::ensemble::VoteMode;
use crate::error::{Error, Result};
use crate::learner::LearnerSpec;
use crate::seed::SeedCoordinates;

/// How each learner's seed data B_i is drawn from the labelled data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedMode {
    /// |L| sentences drawn with replacement.
    WithReplacement,
    /// With replacement for the initial models, a full copy afterwards.
    Vanilla,
    /// B_i = L.
    FullCopy,
    /// A random half of L twice and the other half three times.
    #[default]
    TwoAndAHalf,
}

impl SeedMode {
    pub fn name(self) -> &'static str {
        match self {
            SeedMode::WithReplacement => "with_replacement",
            SeedMode::Vanilla => "vanilla",
            SeedMode::FullCopy => "full_copy",
            SeedMode::TwoAndAHalf => "two_and_a_half",
        }
    }

    pub const ALL: [SeedMode; 4] = [
        SeedMode::WithReplacement,
        SeedMode::Vanilla,
        SeedMode::FullCopy,
        SeedMode::TwoAndAHalf,
    ];
}

impl std::str::FromStr for SeedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SeedMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown seed mode '{}'", s)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriConfig {
    /// A: tokens of new automatically labelled data per learner and iteration.
    pub augment_size: usize,
    /// T.
    pub iterations: usize,
    /// d, read as the decimal number it prints as.
    pub decay: f64,
    pub oversample: bool,
    pub seed_mode: SeedMode,
    /// Columns compared by the agreement filter; defaults to the learner's
    /// predicted columns.
    pub agreement_columns: Option<Vec<Column>>,
    pub master_seed: u64,
    /// |U'| = unlabelled_multiplier * A tokens.
    pub unlabelled_multiplier: f64,
    pub is_repeat: bool,
    pub combiner_repeats: usize,
    pub vote_mode: VoteMode,
    pub learner: LearnerSpec,
}

impl Default for TriConfig {
    fn default() -> Self {
        TriConfig {
            augment_size: 40_000,
            iterations: 12,
            decay: 1.0,
            oversample: false,
            seed_mode: SeedMode::TwoAndAHalf,
            agreement_columns: None,
            master_seed: 0,
            unlabelled_multiplier: 16.0,
            is_repeat: false,
            combiner_repeats: 21,
            vote_mode: VoteMode::ExactPair,
            learner: LearnerSpec::default(),
        }
    }
}

impl TriConfig {
    pub fn validate(&self) -> Result<()> {
        if self.augment_size == 0 {
            return Err(Error::Config("augment_size must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::Config(format!("decay must lie in [0, 1], got {}", self.decay)));
        }
        if !(self.unlabelled_multiplier.is_finite() && self.unlabelled_multiplier > 0.0) {
            return Err(Error::Config("unlabelled_multiplier must be positive".into()));
        }
        if self.combiner_repeats == 0 {
            return Err(Error::Config("combiner_repeats must be at least 1".into()));
        }
        let cols = self.agreement_columns();
        for needed in [Column::Head, Column::Deprel] {
            if !cols.contains(&needed) {
                return Err(Error::Config(format!("agreement_columns must include {}", needed)));
            }
        }
        self.learner.validate()
    }

    pub fn agreement_columns(&self) -> Vec<Column> {
        let mut cols = self
            .agreement_columns
            .clone()
            .unwrap_or_else(|| self.learner.predicted_columns.clone());
        cols.sort();
        cols.dedup();
        cols
    }

    /// Canonical rendering of (A, T, d, o, seed mode), part of every seed.
    pub fn params_id(&self) -> String {
        format!(
            "A={},T={},d={},o={},seeds={}",
            self.augment_size,
            self.iterations,
            self.decay,
            u8::from(self.oversample),
            self.seed_mode.name()
        )
    }

    /// |U'| in tokens.
    pub fn unlabelled_budget(&self) -> usize {
        (self.unlabelled_multiplier * self.augment_size as f64).round() as usize
    }

    pub fn coordinates(&self, learner_index: usize, iteration: usize) -> SeedCoordinates {
        SeedCoordinates {
            master_seed: self.master_seed,
            params_id: self.params_id(),
            is_repeat: self.is_repeat,
            learner_index,
            iteration,
        }
    }

    pub fn apply_preset(&mut self, preset: &Preset) {
        self.augment_size = preset.augment_size;
        self.iterations = preset.iterations;
        self.decay = preset.decay;
        self.oversample = preset.oversample;
        self.is_repeat = preset.is_repeat;
    }
}

/// A named (A, T, d, o, repeat) setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub augment_size: usize,
    pub iterations: usize,
    pub decay: f64,
    pub oversample: bool,
    pub is_repeat: bool,
}

impl Preset {
    pub fn new(augment_size: usize, iterations: usize, decay: f64, oversample: bool, is_repeat: bool) -> Self {
        let mut name = format!("A{}-T{}-d{}", augment_size / 1000, iterations, decay);
        if !augment_size.is_multiple_of(1000) {
            name = format!("A{}t-T{}-d{}", augment_size, iterations, decay);
        }
        if oversample {
            name.push_str("-o");
        }
        if is_repeat {
            name.push_str("-repeat");
        }
        Preset {
            name,
            augment_size,
            iterations,
            decay,
            oversample,
            is_repeat,
        }
    }

    /// Parses names such as `A80-T8-d0.5`, `A160-T4-d0.5-o-repeat` or
    /// `A500t-T2-d1` (A in thousands of tokens, or in tokens with `t`).
    pub fn parse(name: &str) -> Result<Self> {
        let bad = || Error::Config(format!("'{}' is not a preset name (e.g. A80-T8-d0.5[-o][-repeat])", name));
        let mut parts = name.split('-');
        let a = parts.next().and_then(|p| p.strip_prefix('A')).ok_or_else(bad)?;
        let augment_size = match a.strip_suffix('t') {
            Some(tokens) => tokens.parse::<usize>().map_err(|_| bad())?,
            None => a.parse::<usize>().map_err(|_| bad())?.checked_mul(1000).ok_or_else(bad)?,
        };
        let iterations = parts
            .next()
            .and_then(|p| p.strip_prefix('T'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad)?;
        let decay: f64 = parts
            .next()
            .and_then(|p| p.strip_prefix('d'))
            .and_then(|p| p.parse().ok())
            .ok_or_else(bad)?;
        let (mut oversample, mut is_repeat) = (false, false);
        for flag in parts {
            match flag {
                "o" if !oversample && !is_repeat => oversample = true,
                "repeat" if !is_repeat => is_repeat = true,
                _ => return Err(bad()),
            }
        }
        if augment_size == 0 || iterations == 0 || !(0.0..=1.0).contains(&decay) {
            return Err(bad());
        }
        Ok(Preset::new(augment_size, iterations, decay, oversample, is_repeat))
    }
}

/// Which decay values the twelve-run grid uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridVariant {
    /// d in {1, 0.5}.
    Standard,
    /// d in {0.71, 0.5}, used with multilingual contextual embeddings.
    MbertVariant,
}

impl std::str::FromStr for GridVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(GridVariant::Standard),
            "mbert-variant" => Ok(GridVariant::MbertVariant),
            _ => Err(Error::Config(format!("unknown grid '{}' (standard, mbert-variant)", s))),
        }
    }
}

/// The twelve runs: (40k, 12, d_hi), (80k, 8, d_hi), two of (80k, 8, 0.5)
/// and two of (160k, 4, 0.5), each with and without oversampling.
pub fn preset_grid(variant: GridVariant) -> Vec<Preset> {
    let high = match variant {
        GridVariant::Standard => 1.0,
        GridVariant::MbertVariant => 0.71,
    };
    let base = [
        (40_000, 12, high, false),
        (80_000, 8, high, false),
        (80_000, 8, 0.5, false),
        (80_000, 8, 0.5, true),
        (160_000, 4, 0.5, false),
        (160_000, 4, 0.5, true),
    ];
    let mut grid = Vec::with_capacity(12);
    for oversample in [false, true] {
        for &(a, t, d, repeat) in &base {
            grid.push(Preset::new(a, t, d, oversample, repeat));
        }
    }
    grid
}
