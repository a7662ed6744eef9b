//! The orchestrator and its run directory.
//!
//! ```text
//! <out>/config.json
//! <out>/run-log.tsv        one row per iteration, deterministic
//! <out>/history.tsv        per learner and source iteration: available, cap, taken tokens
//! <out>/timings.tsv        wall-clock seconds per iteration
//! <out>/summary.json       selected iteration and all records
//! <out>/iter-<t>/learner-<i>/{train.conllu, model/, pred-dev.conllu}
//! <out>/iter-<t>/new-data-<i>.conllu, provenance-<i>.tsv
//! <out>/iter-<t>/ensemble-dev.conllu
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::agreement::{agreement_filter, AgreementStats, IterationData};
use super::data::{assemble_training_set, cap_indices, sample_seed_data, HistoryPart};
use super::TriConfig;
use crate::conllu::{write_conllu_file, Corpus, UnlabelledPool};
use crate::ensemble::{combine_corpora, CombinerConfig, EnsembleScore};
use crate::error::{Error, Result};
use crate::learner::{train_loaded, LoadedModel, ModelHandle};
use crate::metrics::evaluate;
use crate::seed::{derive_seed, rng_from_seed};

pub const RUN_LOG_FILE: &str = "run-log.tsv";
pub const HISTORY_FILE: &str = "history.tsv";
pub const TIMINGS_FILE: &str = "timings.tsv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub learner_las: [f64; 3],
    pub ensemble: EnsembleScore,
    pub unlabelled_tokens: usize,
    pub agreement: AgreementStats,
    /// |L_{t,i}| after capping.
    pub new_tokens: [usize; 3],
    /// |R| per learner.
    pub reuse_tokens: [usize; 3],
    /// |B_i ++ R| per learner.
    pub train_tokens: [usize; 3],
    pub history: [Vec<HistoryPart>; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
    #[serde(skip)]
    pub seconds: Vec<f64>,
}

const LOG_HEADER: &str = "iteration\tlas_1\tlas_2\tlas_3\tensemble_mean\tensemble_min\tensemble_max\t\
unlabelled_tokens\tpairwise\tunanimous\tdiscarded\tnew_tokens_1\tnew_tokens_2\tnew_tokens_3\t\
reuse_tokens_1\treuse_tokens_2\treuse_tokens_3\ttrain_tokens_1\ttrain_tokens_2\ttrain_tokens_3";

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\t")
}

impl RunLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for r in &self.records {
            let las: Vec<String> = r.learner_las.iter().map(|x| format!("{:.4}", x)).collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.t,
                las.join("\t"),
                r.ensemble.mean,
                r.ensemble.min,
                r.ensemble.max,
                r.unlabelled_tokens,
                r.agreement.pairwise,
                r.agreement.unanimous,
                r.agreement.discarded,
                join(&r.new_tokens),
                join(&r.reuse_tokens),
                join(&r.train_tokens),
            );
        }
        out
    }

    pub fn history_tsv(&self) -> String {
        let mut out = String::from("iteration\tlearner\tfrom_iteration\tavailable_tokens\tcap_tokens\ttaken_tokens\n");
        for r in &self.records {
            for (i, parts) in r.history.iter().enumerate() {
                for p in parts {
                    let _ = writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}",
                        r.t,
                        i + 1,
                        p.from_iteration,
                        p.available_tokens,
                        p.cap_tokens,
                        p.taken_tokens
                    );
                }
            }
        }
        out
    }

    pub fn timings_tsv(&self) -> String {
        let mut out = String::from("iteration\tseconds\n");
        for (t, s) in self.seconds.iter().enumerate() {
            let _ = writeln!(out, "{}\t{:.3}", t, s);
        }
        out
    }

    pub fn ensemble_means(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.ensemble.mean).collect()
    }

    pub fn selected(&self) -> Option<usize> {
        select_iteration(&self.ensemble_means())
    }

    fn flush(&self, out_dir: &Path) -> Result<()> {
        std::fs::write(out_dir.join(RUN_LOG_FILE), self.to_tsv())?;
        std::fs::write(out_dir.join(HISTORY_FILE), self.history_tsv())?;
        std::fs::write(out_dir.join(TIMINGS_FILE), self.timings_tsv())?;
        Ok(())
    }
}

/// Index of the best score; ties go to the earliest.
pub fn select_iteration(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (t, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(t);
        }
    }
    best
}

#[derive(Serialize)]
struct Summary<'a> {
    params_id: String,
    selected_iteration: usize,
    selected_ensemble_las: f64,
    baseline_ensemble_las: f64,
    records: &'a [IterationRecord],
}

pub struct RunResult {
    pub log: RunLog,
    /// models[t][i - 1] is learner i after iteration t.
    pub models: Vec<[ModelHandle; 3]>,
    /// data[t - 1] holds L_{t,1..3}.
    pub data: Vec<IterationData>,
    pub selected: usize,
}

struct Trained {
    handle: ModelHandle,
    model: LoadedModel,
    dev_pred: Corpus,
}

fn iteration_dir(out_dir: &Path, t: usize) -> PathBuf {
    out_dir.join(format!("iter-{}", t))
}

fn train_learner(config: &TriConfig, i: usize, t: usize, corpus: &Corpus, out_dir: &Path, dev: &Corpus) -> Result<Trained> {
    let dir = iteration_dir(out_dir, t).join(format!("learner-{}", i));
    std::fs::create_dir_all(&dir)?;
    let train_file = dir.join("train.conllu");
    write_conllu_file(&train_file, corpus)?;
    let coords = config.coordinates(i, t);
    let seed = derive_seed(&coords);
    let (mut handle, model) = train_loaded(&config.learner, corpus, seed, Some(coords), &dir.join("model"), Some(&train_file))?;
    let dev_pred = model.predict(&dev.stripped())?;
    write_conllu_file(&dir.join("pred-dev.conllu"), &dev_pred)?;
    handle.dev_las = Some(evaluate(dev, &dev_pred)?.las);
    Ok(Trained {
        handle,
        model,
        dev_pred,
    })
}

fn train_all(
    pool: &rayon::ThreadPool,
    config: &TriConfig,
    t: usize,
    corpora: [&Corpus; 3],
    out_dir: &Path,
    dev: &Corpus,
) -> Result<[Trained; 3]> {
    let results: Vec<Result<Trained>> = pool.install(|| {
        use rayon::prelude::*;
        (0..3)
            .into_par_iter()
            .map(|k| train_learner(config, k + 1, t, corpora[k], out_dir, dev))
            .collect()
    });
    let mut trained = Vec::with_capacity(3);
    for r in results {
        trained.push(r?);
    }
    Ok(trained.try_into().unwrap_or_else(|_| unreachable!("three learners")))
}

fn ensemble_score(
    pool: &rayon::ThreadPool,
    config: &TriConfig,
    t: usize,
    trained: &[Trained; 3],
    dev: &Corpus,
    out_dir: &Path,
) -> Result<EnsembleScore> {
    let cfg = CombinerConfig {
        repeats: config.combiner_repeats,
        base_seed: config.coordinates(0, t).stream("combine", &[]),
        mode: config.vote_mode,
    };
    let preds: Vec<&Corpus> = trained.iter().map(|x| &x.dev_pred).collect();
    let combined = pool.install(|| combine_corpora(&preds, &cfg))?;
    write_conllu_file(&iteration_dir(out_dir, t).join("ensemble-dev.conllu"), &combined[0])?;
    let scores = combined
        .iter()
        .map(|c| evaluate(dev, c).map(|r| r.las))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleScore::from_scores(scores))
}

fn write_provenance(path: &Path, data: &IterationData, i: usize, pool_index: &[usize]) -> Result<()> {
    let mut out = String::from("source\tpool_index\tteacher_1\tteacher_2\tunanimous\n");
    for p in &data.provenance[i] {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            p.source,
            pool_index[p.source],
            p.teachers.0,
            p.teachers.1,
            u8::from(p.unanimous)
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Runs tri-training and writes the run directory under `out_dir`.
///
/// Every random draw comes from a stream keyed by the experiment
/// coordinates, so the output does not depend on `workers`.
pub fn run(
    config: &TriConfig,
    labelled: &Corpus,
    unlabelled: &UnlabelledPool,
    dev: &Corpus,
    out_dir: &Path,
    workers: usize,
) -> Result<RunResult> {
    config.validate()?;
    if labelled.is_empty() {
        return Err(Error::Empty("labelled data has no sentences".into()));
    }
    if dev.is_empty() {
        return Err(Error::Empty("dev data has no sentences".into()));
    }
    labelled.check_trees()?;
    dev.check_trees()?;
    if unlabelled.is_empty() {
        log::warn!("unlabelled pool is empty; later iterations retrain on seed data only");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {}", workers, e)))?;
    std::fs::create_dir_all(out_dir)?;
    let config_json = serde_json::to_string_pretty(config).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out_dir.join(CONFIG_FILE), config_json + "\n")?;

    let columns = config.agreement_columns();
    let seed_streams = [1, 2, 3].map(|i| config.coordinates(i, 0).stream("seed-data", &[]));
    let mut log = RunLog::default();
    let mut models: Vec<[ModelHandle; 3]> = Vec::new();
    let mut all_data: Vec<IterationData> = Vec::new();
    let mut history: [Vec<Corpus>; 3] = Default::default();

    let started = Instant::now();
    let seeds = sample_seed_data(labelled, config.seed_mode, seed_streams, 0);
    let mut current = train_all(&pool, config, 0, seeds.each_ref().map(|s| &s.sentences), out_dir, dev)?;
    let ensemble = ensemble_score(&pool, config, 0, &current, dev, out_dir)?;
    log.records.push(IterationRecord {
        t: 0,
        learner_las: current.each_ref().map(|x| x.handle.dev_las.unwrap_or(0.0)),
        ensemble,
        unlabelled_tokens: 0,
        agreement: AgreementStats::default(),
        new_tokens: [0; 3],
        reuse_tokens: [0; 3],
        train_tokens: seeds.each_ref().map(|s| s.sentences.token_total()),
        history: Default::default(),
    });
    log.seconds.push(started.elapsed().as_secs_f64());
    log.flush(out_dir)?;
    models.push(current.each_ref().map(|x| x.handle.clone()));
    log::info!("iteration 0: ensemble dev LAS {:.2}", log.records[0].ensemble.mean);

    for t in 1..=config.iterations {
        let started = Instant::now();
        let iter_coords = config.coordinates(0, t);
        let (u_prime, pool_index) =
            unlabelled.sample(config.unlabelled_budget(), iter_coords.stream("unlabelled", &[]), true);
        let preds: Vec<Result<Corpus>> = pool.install(|| {
            use rayon::prelude::*;
            current.par_iter().map(|x| x.model.predict(&u_prime)).collect()
        });
        let preds = preds.into_iter().collect::<Result<Vec<_>>>()?;
        let mut receiver_rng = rng_from_seed(iter_coords.stream("receiver", &[]));
        let mut data = agreement_filter(t, [&preds[0], &preds[1], &preds[2]], &columns, &mut receiver_rng)?;
        drop(preds);

        let dir = iteration_dir(out_dir, t);
        std::fs::create_dir_all(&dir)?;
        let seeds = sample_seed_data(labelled, config.seed_mode, seed_streams, t);
        let mut assemblies = Vec::with_capacity(3);
        for k in 0..3 {
            let i = k + 1;
            if let Some(keep) = cap_indices(&data.sets[k], config.augment_size, config.coordinates(i, t).stream("cap", &[])) {
                data.retain(k, &keep);
            }
            write_conllu_file(&dir.join(format!("new-data-{}.conllu", i)), &data.sets[k])?;
            write_provenance(&dir.join(format!("provenance-{}.tsv", i)), &data, k, &pool_index)?;
            history[k].push(data.sets[k].clone());
            assemblies.push(assemble_training_set(
                &seeds[k].sentences,
                &history[k],
                config.augment_size,
                config.decay,
                config.oversample,
                config.coordinates(i, t).stream("assemble", &[]),
            ));
        }
        current = train_all(&pool, config, t, [0, 1, 2].map(|k| &assemblies[k].corpus), out_dir, dev)?;
        let ensemble = ensemble_score(&pool, config, t, &current, dev, out_dir)?;
        log.records.push(IterationRecord {
            t,
            learner_las: current.each_ref().map(|x| x.handle.dev_las.unwrap_or(0.0)),
            ensemble,
            unlabelled_tokens: u_prime.token_total(),
            agreement: data.stats,
            new_tokens: data.sets.each_ref().map(Corpus::token_total),
            reuse_tokens: [0, 1, 2].map(|k| assemblies[k].reuse_tokens),
            train_tokens: [0, 1, 2].map(|k| assemblies[k].corpus.token_total()),
            history: [0, 1, 2].map(|k| assemblies[k].history.clone()),
        });
        log.seconds.push(started.elapsed().as_secs_f64());
        log.flush(out_dir)?;
        models.push(current.each_ref().map(|x| x.handle.clone()));
        all_data.push(data);
        log::info!(
            "iteration {}: ensemble dev LAS {:.2}",
            t,
            log.records[t].ensemble.mean
        );
    }

    let selected = log.selected().expect("at least one iteration");
    let summary = Summary {
        params_id: config.params_id(),
        selected_iteration: selected,
        selected_ensemble_las: log.records[selected].ensemble.mean,
        baseline_ensemble_las: log.records[0].ensemble.mean,
        records: &log.records,
    };
    let summary_json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(out_dir.join(SUMMARY_FILE), summary_json + "\n")?;
    Ok(RunResult {
        log,
        models,
        data: all_data,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_prefers_the_earliest_best() {
        assert_eq!(select_iteration(&[70.0, 72.0, 71.0]), Some(1));
        assert_eq!(select_iteration(&[70.0, 72.0, 72.0]), Some(1));
        assert_eq!(select_iteration(&[75.0, 72.0]), Some(0));
        assert_eq!(select_iteration(&[]), None);
    }
}
