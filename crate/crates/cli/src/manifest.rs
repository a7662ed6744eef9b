//! Experiment manifests: a TOML file naming the data, the output directory
//! and the tri-training configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tritrain::conllu::PoolFilterSpec;
use tritrain::tritraining::{Preset, TriConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub train: PathBuf,
    pub dev: PathBuf,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// One pre-tokenised sentence per line, or a `.conllu` file.
    pub unlabelled: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub output: PathBuf,
    #[serde(default)]
    pub preset: Option<String>,
    pub data: DataPaths,
    #[serde(default)]
    pub pool: PoolFilterSpec,
    #[serde(default)]
    pub config: TriConfig,
}

impl ExperimentManifest {
    /// Reads a manifest; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        let mut m: ExperimentManifest = toml::from_str(&text)
            .map_err(|e| tritrain::Error::Config(format!("{}: {}", path.display(), e)))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut m.output);
        fix(&mut m.data.train);
        fix(&mut m.data.dev);
        fix(&mut m.data.unlabelled);
        if let Some(t) = m.data.test.as_mut() {
            fix(t);
        }
        Ok(m)
    }

    /// Expands the preset into the configuration; the preset wins over the
    /// config table for (A, T, d, o, repeat).
    pub fn resolve(&mut self) -> anyhow::Result<()> {
        if let Some(name) = &self.preset {
            let preset = Preset::parse(name)?;
            self.config.apply_preset(&preset);
        }
        self.config.validate()?;
        self.pool.validate()?;
        Ok(())
    }

    pub fn check_paths(&self) -> anyhow::Result<()> {
        let mut paths = vec![&self.data.train, &self.data.dev, &self.data.unlabelled];
        paths.extend(self.data.test.as_ref());
        for p in paths {
            if !p.is_file() {
                bail!(tritrain::Error::Config(format!("data file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}
