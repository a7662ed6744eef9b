//! Baseline distributions: bucketed ensemble enumeration, best-of-k
//! resampling and expected test scores under dev-based model selection.

use std::io::BufRead;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, sub_seed};

pub const DEFAULT_BUCKETS: usize = 16;
pub const PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

/// One row of a score table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredModel {
    pub id: String,
    pub dev_las: f64,
    pub test_las: Option<f64>,
}

/// Reads `id <TAB> dev [<TAB> test]` rows. Blank lines and `#` comments are
/// skipped, and so is a first line whose dev field is not a number (a
/// header).
pub fn read_score_table<R: BufRead>(reader: R) -> Result<Vec<ScoredModel>> {
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::parse(idx + 1, format!("expected 2 or 3 columns, found {}", fields.len())));
        }
        let dev = match fields[1].trim().parse::<f64>() {
            Ok(v) if v.is_finite() => v,
            _ if rows.is_empty() && idx == 0 => continue,
            _ => return Err(Error::parse(idx + 1, format!("dev score '{}' is not a number", fields[1]))),
        };
        let test = match fields.get(2) {
            Some(f) => Some(
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(idx + 1, format!("test score '{}' is not a number", f)))?,
            ),
            None => None,
        };
        rows.push(ScoredModel {
            id: fields[0].to_string(),
            dev_las: dev,
            test_las: test,
        });
    }
    Ok(rows)
}

/// Models of each learner with their dev scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredModelPool {
    pub learners: Vec<Vec<ScoredModel>>,
    pub bucket_count: usize,
}

impl ScoredModelPool {
    pub fn new(learners: Vec<Vec<ScoredModel>>) -> Self {
        ScoredModelPool {
            learners,
            bucket_count: DEFAULT_BUCKETS,
        }
    }
}

/// Splits `0..n` into `count` contiguous runs whose sizes differ by at most
/// one.
pub fn bucket_ranges(n: usize, count: usize) -> Vec<std::ops::Range<usize>> {
    (0..count).map(|b| b * n / count..(b + 1) * n / count).collect()
}

/// Indices of `models` in ascending dev order (stable), split into buckets.
pub fn buckets(models: &[ScoredModel], count: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..models.len()).collect();
    order.sort_by(|&a, &b| models[a].dev_las.total_cmp(&models[b].dev_las));
    bucket_ranges(order.len(), count)
        .into_iter()
        .map(|r| order[r].to_vec())
        .collect()
}

/// Bucket combinations with one sampled model index per learner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketEnsembles {
    pub bucket_count: usize,
    /// One entry per bucket combination in lexicographic bucket order; each
    /// holds an index into the corresponding learner's model list.
    pub members: Vec<Vec<usize>>,
}

/// Enumerates all `bucket_count ^ learners` bucket combinations and samples
/// one model from each bucket of each combination.
pub fn enumerate_bucket_ensembles(pool: &ScoredModelPool, seed: u64) -> Result<BucketEnsembles> {
    if pool.learners.is_empty() || pool.learners.iter().any(|l| l.is_empty()) {
        return Err(Error::Empty("every learner needs at least one scored model".into()));
    }
    if pool.bucket_count == 0 {
        return Err(Error::Config("bucket count must be at least 1".into()));
    }
    let smallest = pool.learners.iter().map(Vec::len).min().unwrap_or(0);
    let count = if smallest < pool.bucket_count {
        log::warn!(
            "only {} models for some learner; using {} buckets instead of {}",
            smallest,
            smallest,
            pool.bucket_count
        );
        smallest
    } else {
        pool.bucket_count
    };
    let per_learner: Vec<Vec<Vec<usize>>> = pool.learners.iter().map(|l| buckets(l, count)).collect();
    let m = per_learner.len();
    let total = count.checked_pow(m as u32).ok_or_else(|| Error::Config("too many bucket combinations".into()))?;
    let mut rng = rng_from_seed(sub_seed(seed, "buckets", &[]));
    let mut members = Vec::with_capacity(total);
    let mut combo = vec![0usize; m];
    for _ in 0..total {
        members.push(
            combo
                .iter()
                .enumerate()
                .map(|(l, &b)| {
                    let bucket = &per_learner[l][b];
                    bucket[rng.random_range(0..bucket.len())]
                })
                .collect(),
        );
        // odometer, last learner fastest
        for pos in (0..m).rev() {
            combo[pos] += 1;
            if combo[pos] < count {
                break;
            }
            combo[pos] = 0;
        }
    }
    Ok(BucketEnsembles {
        bucket_count: count,
        members,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub standard_error: f64,
    pub min: f64,
    pub max: f64,
    /// Pairs of (percentile, value) with linear interpolation between order
    /// statistics.
    pub percentiles: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub samples: Vec<f64>,
    pub summary: Summary,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Linear interpolation between closest ranks on sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl ScoreDistribution {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("score distribution has no samples".into()));
        }
        let n = samples.len();
        let m = mean(&samples);
        let var = if n > 1 {
            samples.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let summary = Summary {
            count: n,
            mean: m,
            sd: var.sqrt(),
            standard_error: (var / n as f64).sqrt(),
            min: sorted[0],
            max: sorted[n - 1],
            percentiles: PERCENTILES.iter().map(|&p| (p, percentile(&sorted, p))).collect(),
        };
        Ok(ScoreDistribution { samples, summary })
    }

    /// Equal-width bins over [min, max]: (lower edge, upper edge, count). The
    /// last bin is closed on the right.
    pub fn histogram(&self, bins: usize) -> Vec<(f64, f64, usize)> {
        let bins = bins.max(1);
        let (lo, hi) = (self.summary.min, self.summary.max);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in &self.samples {
            let b = if width > 0.0 { ((x - lo) / width) as usize } else { 0 };
            counts[b.min(bins - 1)] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c))
            .collect()
    }

    pub fn summary_tsv(&self) -> String {
        let s = &self.summary;
        let mut out = format!(
            "count\t{}\nmean\t{:.6}\nsd\t{:.6}\nstandard_error\t{:.6}\nmin\t{:.6}\nmax\t{:.6}\n",
            s.count, s.mean, s.sd, s.standard_error, s.min, s.max
        );
        for (p, v) in &s.percentiles {
            out.push_str(&format!("p{}\t{:.6}\n", p, v));
        }
        out
    }

    pub fn histogram_tsv(&self, bins: usize) -> String {
        let mut out = String::from("lower\tupper\tcount\n");
        for (lo, hi, c) in self.histogram(bins) {
            out.push_str(&format!("{:.6}\t{:.6}\t{}\n", lo, hi, c));
        }
        out
    }
}

/// How each repetition picks its k scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Draw {
    #[default]
    WithoutReplacement,
    WithReplacement,
}

/// Seed of repetition `rep`; repetitions are independent streams so results
/// do not depend on how they are scheduled.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    sub_seed(seed, "best-of", &[rep as u64])
}

fn draw_indices(n: usize, k: usize, draw: Draw, seed: u64, rep: usize) -> Vec<usize> {
    let mut rng = rng_from_seed(repetition_seed(seed, rep));
    match draw {
        Draw::WithoutReplacement => index::sample(&mut rng, n, k).into_vec(),
        Draw::WithReplacement => (0..k).map(|_| rng.random_range(0..n)).collect(),
    }
}

fn check_k(n: usize, k: usize, reps: usize, draw: Draw) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("score list is empty".into()));
    }
    if k == 0 || (draw == Draw::WithoutReplacement && k > n) {
        return Err(Error::Config(format!("k = {} is not in 1..={}", k, n)));
    }
    if reps == 0 {
        return Err(Error::Config("reps must be at least 1".into()));
    }
    Ok(())
}

/// Distribution of the maximum of k scores drawn from `scores`.
pub fn simulate_best_of(scores: &[f64], k: usize, reps: usize, seed: u64, draw: Draw) -> Result<ScoreDistribution> {
    check_k(scores.len(), k, reps, draw)?;
    let samples: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            draw_indices(scores.len(), k, draw, seed, rep)
                .into_iter()
                .map(|i| scores[i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    ScoreDistribution::new(samples)
}

/// Index with the best dev score; ties go to the lowest index.
fn select_by_dev(dev: &[f64], picks: &[usize]) -> usize {
    let mut best = picks[0];
    for &i in &picks[1..] {
        if dev[i] > dev[best] || (dev[i] == dev[best] && i < best) {
            best = i;
        }
    }
    best
}

/// Expected test score of the dev-selected model among k draws.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionExpectation {
    /// Test scores of the selected model, one per repetition.
    pub sampled: ScoreDistribution,
    /// The expectation in closed form over all possible draws.
    pub exact: f64,
}

/// Closed-form expectation of the test score of the dev-selected model.
///
/// Rank the models by preference (dev descending, index ascending). The
/// model at rank r is selected exactly when it is drawn and none of the r
/// preferred models is. Without replacement that has probability
/// C(n-1-r, k-1) / C(n, k); with replacement ((n-r)^k - (n-r-1)^k) / n^k.
pub fn exact_expected_best_of(dev: &[f64], test: &[f64], k: usize, draw: Draw) -> Result<f64> {
    check_aligned(dev, test)?;
    check_k(dev.len(), k, 1, draw)?;
    let n = dev.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dev[b].total_cmp(&dev[a]).then(a.cmp(&b)));
    let mut total = 0.0;
    match draw {
        Draw::WithoutReplacement => {
            // p_r = C(n-1-r, k-1) / C(n, k), updated by the ratio p_{r+1}/p_r
            // = (n-k-r) / (n-1-r) to stay in floating point range
            let mut p = k as f64 / n as f64;
            for (r, &i) in order.iter().enumerate() {
                if n - r < k {
                    break;
                }
                total += p * test[i];
                if n - 1 - r > 0 {
                    p *= (n - k - r) as f64 / (n - 1 - r) as f64;
                }
            }
        }
        Draw::WithReplacement => {
            let nf = n as f64;
            for (r, &i) in order.iter().enumerate() {
                let above = ((n - r) as f64 / nf).powi(k as i32);
                let below = ((n - r - 1) as f64 / nf).powi(k as i32);
                total += (above - below) * test[i];
            }
        }
    }
    Ok(total)
}

fn check_aligned(dev: &[f64], test: &[f64]) -> Result<()> {
    if dev.len() != test.len() {
        return Err(Error::Config(format!(
            "{} dev scores but {} test scores",
            dev.len(),
            test.len()
        )));
    }
    Ok(())
}

/// Repeatedly draws k models, picks the best by dev score and records its
/// test score. Draws use the same streams as [`simulate_best_of`].
pub fn expected_test_best_of(
    dev: &[f64],
    test: &[f64],
    k: usize,
    reps: usize,
    seed: u64,
    draw: Draw,
) -> Result<SelectionExpectation> {
    check_aligned(dev, test)?;
    check_k(dev.len(), k, reps, draw)?;
    let samples: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|rep| test[select_by_dev(dev, &draw_indices(dev.len(), k, draw, seed, rep))])
        .collect();
    Ok(SelectionExpectation {
        sampled: ScoreDistribution::new(samples)?,
        exact: exact_expected_best_of(dev, test, k, draw)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize == k {
                out.push((0..n).filter(|i| mask >> i & 1 == 1).collect());
            }
        }
        out
    }

    fn enumerate_selection(dev: &[f64], test: &[f64], k: usize) -> f64 {
        let subs = subsets(dev.len(), k);
        let total: f64 = subs
            .iter()
            .map(|s| {
                let best = s.iter().copied().fold(s[0], |b, i| if dev[i] > dev[b] { i } else { b });
                test[best]
            })
            .sum();
        total / subs.len() as f64
    }

    #[test]
    fn pair_maximum_expectation() {
        let pool = [1.0, 2.0, 3.0, 4.0];
        assert!((enumerate_selection(&pool, &pool, 2) - 10.0 / 3.0).abs() < 1e-12);
        assert!((exact_expected_best_of(&pool, &pool, 2, Draw::WithoutReplacement).unwrap() - 10.0 / 3.0).abs() < 1e-12);
        let d = simulate_best_of(&pool, 2, 40_000, 5, Draw::WithoutReplacement).unwrap();
        assert!((d.summary.mean - 10.0 / 3.0).abs() < 3.0 * d.summary.standard_error);
    }

    #[test]
    fn degenerate_pools() {
        let d = simulate_best_of(&[75.0; 6], 3, 100, 1, Draw::WithoutReplacement).unwrap();
        assert!(d.samples.iter().all(|&x| x == 75.0));
        let pool = [3.0, 9.0, 1.0];
        let d = simulate_best_of(&pool, 3, 100, 1, Draw::WithoutReplacement).unwrap();
        assert!(d.samples.iter().all(|&x| x == 9.0));
    }

    #[test]
    fn bad_k_is_rejected() {
        assert!(simulate_best_of(&[1.0, 2.0], 3, 10, 0, Draw::WithoutReplacement).is_err());
        assert!(simulate_best_of(&[1.0, 2.0], 3, 10, 0, Draw::WithReplacement).is_ok());
        assert!(simulate_best_of(&[], 1, 10, 0, Draw::WithoutReplacement).is_err());
        assert!(expected_test_best_of(&[1.0], &[1.0, 2.0], 1, 10, 0, Draw::WithoutReplacement).is_err());
    }

    #[test]
    fn dev_equal_to_test_reproduces_best_of() {
        let pool = [70.1, 71.5, 69.0, 72.2, 70.9];
        let sim = simulate_best_of(&pool, 3, 5_000, 77, Draw::WithoutReplacement).unwrap();
        let sel = expected_test_best_of(&pool, &pool, 3, 5_000, 77, Draw::WithoutReplacement).unwrap();
        assert_eq!(sim.samples, sel.sampled.samples);
        assert_eq!(sim.summary.mean, sel.sampled.summary.mean);
    }

    #[test]
    fn tied_dev_scores_pick_lowest_index() {
        let dev = [1.0; 5];
        let test = [10.0, 20.0, 30.0, 40.0, 50.0];
        for k in 1..=5 {
            let exact = exact_expected_best_of(&dev, &test, k, Draw::WithoutReplacement).unwrap();
            let brute = enumerate_selection(&dev, &test, k);
            assert!((exact - brute).abs() < 1e-9, "k={} {} {}", k, exact, brute);
        }
        assert_eq!(select_by_dev(&dev, &[3, 1, 4]), 1);
    }

    #[test]
    fn single_draw_expectation_is_the_mean() {
        let dev = [3.0, 1.0, 2.0, 5.0];
        let test = [60.0, 61.5, 62.25, 70.0];
        let e = expected_test_best_of(&dev, &test, 1, 2_000, 3, Draw::WithoutReplacement).unwrap();
        assert!((e.exact - mean(&test)).abs() < 1e-12);
        assert!((e.sampled.summary.mean - mean(&test)).abs() < 4.0 * e.sampled.summary.standard_error);
    }

    #[test]
    fn with_replacement_closed_form_matches_enumeration() {
        let dev = [2.0, 7.0, 7.0, 1.0];
        let test = [1.0, 2.0, 3.0, 4.0];
        let n = dev.len();
        for k in 1..=3 {
            let mut total = 0.0;
            let mut count = 0;
            let mut draw = vec![0usize; k];
            loop {
                total += test[select_by_dev(&dev, &draw)];
                count += 1;
                let mut pos = 0;
                while pos < k {
                    draw[pos] += 1;
                    if draw[pos] < n {
                        break;
                    }
                    draw[pos] = 0;
                    pos += 1;
                }
                if pos == k {
                    break;
                }
            }
            let exact = exact_expected_best_of(&dev, &test, k, Draw::WithReplacement).unwrap();
            assert!((exact - total / count as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_statistics() {
        let d = ScoreDistribution::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(d.summary.mean, 3.0);
        assert!((d.summary.sd - 2.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.summary.percentiles[2], (50.0, 3.0));
        assert_eq!(d.summary.percentiles[0], (5.0, 1.2));
        let h = d.histogram(2);
        assert_eq!(h.iter().map(|b| b.2).collect::<Vec<_>>(), vec![2, 3]);
        assert!(ScoreDistribution::new(vec![]).is_err());
    }

    fn models(scores: &[f64]) -> Vec<ScoredModel> {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| ScoredModel {
                id: format!("m{}", i),
                dev_las: s,
                test_las: None,
            })
            .collect()
    }

    #[test]
    fn buckets_of_48_models() {
        let scores: Vec<f64> = (0..48).map(|i| ((i * 37) % 48) as f64).collect();
        let ms = models(&scores);
        let bs = buckets(&ms, 16);
        assert!(bs.iter().all(|b| b.len() == 3));
        // contiguous in dev order
        for w in bs.windows(2) {
            let hi = w[0].iter().map(|&i| scores[i]).fold(f64::MIN, f64::max);
            let lo = w[1].iter().map(|&i| scores[i]).fold(f64::MAX, f64::min);
            assert!(hi <= lo);
        }
        let pool = ScoredModelPool::new(vec![ms.clone(), ms.clone(), ms]);
        let e1 = enumerate_bucket_ensembles(&pool, 9).unwrap();
        let e2 = enumerate_bucket_ensembles(&pool, 9).unwrap();
        assert_eq!(e1.members.len(), 4096);
        assert_eq!(e1, e2);
        // combination (b0, b1, b2) sits at b0*256 + b1*16 + b2
        assert!(bs[5].contains(&e1.members[5 * 256 + 3 * 16 + 15][0]));
        assert!(bs[3].contains(&e1.members[5 * 256 + 3 * 16 + 15][1]));
        assert!(bs[15].contains(&e1.members[5 * 256 + 3 * 16 + 15][2]));
    }

    #[test]
    fn sixteen_models_give_the_full_cross_product() {
        let ms = models(&(0..16).map(f64::from).collect::<Vec<_>>());
        let pool = ScoredModelPool::new(vec![ms.clone(), ms.clone(), ms]);
        let e = enumerate_bucket_ensembles(&pool, 1).unwrap();
        let set: std::collections::HashSet<Vec<usize>> = e.members.iter().cloned().collect();
        assert_eq!(set.len(), 4096);
    }

    #[test]
    fn small_pool_lowers_bucket_count() {
        let ms = models(&[1.0, 2.0, 3.0, 4.0]);
        let pool = ScoredModelPool::new(vec![ms.clone(), ms.clone(), ms]);
        let e = enumerate_bucket_ensembles(&pool, 1).unwrap();
        assert_eq!(e.bucket_count, 4);
        assert_eq!(e.members.len(), 64);
        assert!(enumerate_bucket_ensembles(&ScoredModelPool::new(vec![vec![]]), 1).is_err());
    }

    #[test]
    fn score_table_parsing() {
        let text = "id\tdev\ttest\n# comment\nm1\t70.5\t69.0\nm2\t71.0\t70.0\n\n";
        let rows = read_score_table(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].test_las, Some(70.0));
        assert!(read_score_table("m1\t70\nm2\tx\n".as_bytes()).is_err());
        assert!(read_score_table("m1\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn buckets_partition_the_models(n in 1usize..100, count in 1usize..20) {
            let count = count.min(n);
            let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64).collect();
            let bs = buckets(&models(&scores), count);
            let sizes: Vec<usize> = bs.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let mut all: Vec<usize> = bs.concat();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn samples_stay_within_the_pool(pool in prop::collection::vec(0.0f64..100.0, 1..9), k in 1usize..9, seed in any::<u64>()) {
            let k = k.min(pool.len());
            let d = simulate_best_of(&pool, k, 200, seed, Draw::WithoutReplacement).unwrap();
            let lo = pool.iter().copied().fold(f64::MAX, f64::min);
            let hi = pool.iter().copied().fold(f64::MIN, f64::max);
            prop_assert!(d.samples.iter().all(|&x| x >= lo && x <= hi));
        }

        #[test]
        fn exact_expectation_is_monotone_in_k(pool in prop::collection::vec(0.0f64..100.0, 1..9)) {
            let mut prev = f64::MIN;
            for k in 1..=pool.len() {
                let e = enumerate_selection(&pool, &pool, k);
                let closed = exact_expected_best_of(&pool, &pool, k, Draw::WithoutReplacement).unwrap();
                prop_assert!((e - closed).abs() < 1e-9);
                prop_assert!(e >= prev - 1e-12);
                prev = e;
            }
        }
    }
}
