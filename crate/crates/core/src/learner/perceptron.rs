//! Multi-class averaged perceptron over hashed sparse features.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};
use std::io::{self, Read, Write};

/// Feature keys are already FNV hashes, so the map hasher passes them
/// through.
#[derive(Default)]
pub(crate) struct PassThroughHasher(u64);

impl Hasher for PassThroughHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0 << 8) | u64::from(b);
        }
    }

    fn write_u64(&mut self, n: u64) {
        self.0 = n;
    }
}

pub(crate) type FeatureMap<V> = HashMap<u64, V, BuildHasherDefault<PassThroughHasher>>;

/// Incremental FNV-1a feature hash: a template id followed by string parts.
#[derive(Clone, Copy)]
pub(crate) struct FeatureHash(u64);

impl FeatureHash {
    pub(crate) fn new(template: u8) -> Self {
        let mut h = FeatureHash(0xcbf2_9ce4_8422_2325);
        h.byte(template);
        h
    }

    #[inline]
    fn byte(&mut self, b: u8) {
        self.0 ^= u64::from(b);
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
    }

    pub(crate) fn str(mut self, s: &str) -> Self {
        for &b in s.as_bytes() {
            self.byte(b);
        }
        self.byte(0x1f);
        self
    }

    pub(crate) fn num(mut self, n: usize) -> Self {
        for b in (n as u64).to_le_bytes() {
            self.byte(b);
        }
        self
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}

struct TrainingWeights {
    w: Vec<f64>,
    // sum of (update time * delta), for averaging
    u: Vec<f64>,
}

/// Perceptron under training. Averaging follows the `w - u / c` scheme, so
/// each update costs O(features) regardless of the number of instances seen.
pub(crate) struct PerceptronTrainer {
    n_classes: usize,
    weights: FeatureMap<TrainingWeights>,
    instances: u64,
}

impl PerceptronTrainer {
    pub(crate) fn new(n_classes: usize) -> Self {
        PerceptronTrainer {
            n_classes,
            weights: FeatureMap::default(),
            instances: 1,
        }
    }

    pub(crate) fn scores(&self, features: &[u64], scores: &mut Vec<f64>) {
        scores.clear();
        scores.resize(self.n_classes, 0.0);
        for f in features {
            if let Some(tw) = self.weights.get(f) {
                for (s, w) in scores.iter_mut().zip(&tw.w) {
                    *s += w;
                }
            }
        }
    }

    /// One training instance: reward `truth`, penalise `guess` when they
    /// differ.
    pub(crate) fn update(&mut self, features: &[u64], truth: usize, guess: usize) {
        if truth != guess {
            let c = self.instances as f64;
            let n = self.n_classes;
            for &f in features {
                let tw = self.weights.entry(f).or_insert_with(|| TrainingWeights {
                    w: vec![0.0; n],
                    u: vec![0.0; n],
                });
                tw.w[truth] += 1.0;
                tw.u[truth] += c;
                tw.w[guess] -= 1.0;
                tw.u[guess] -= c;
            }
        }
        self.instances += 1;
    }

    pub(crate) fn finish(self) -> Perceptron {
        let c = self.instances as f64;
        let mut weights: Vec<(u64, Vec<(u16, f32)>)> = self
            .weights
            .into_iter()
            .filter_map(|(f, tw)| {
                let sparse: Vec<(u16, f32)> = tw
                    .w
                    .iter()
                    .zip(&tw.u)
                    .enumerate()
                    .map(|(k, (w, u))| (k as u16, (w - u / c) as f32))
                    .filter(|(_, v)| *v != 0.0)
                    .collect();
                (!sparse.is_empty()).then_some((f, sparse))
            })
            .collect();
        weights.sort_unstable_by_key(|(f, _)| *f);
        Perceptron::from_sparse(self.n_classes, weights)
    }
}

/// Averaged, read-only weights.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Perceptron {
    n_classes: usize,
    weights: FeatureMap<Vec<(u16, f32)>>,
}

impl Perceptron {
    fn from_sparse(n_classes: usize, weights: Vec<(u64, Vec<(u16, f32)>)>) -> Self {
        Perceptron {
            n_classes,
            weights: weights.into_iter().collect(),
        }
    }

    pub(crate) fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub(crate) fn scores(&self, features: &[u64], scores: &mut Vec<f32>) {
        scores.clear();
        scores.resize(self.n_classes, 0.0);
        for f in features {
            if let Some(ws) = self.weights.get(f) {
                for &(k, w) in ws {
                    scores[k as usize] += w;
                }
            }
        }
    }

    pub(crate) fn write_to<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let mut keys: Vec<&u64> = self.weights.keys().collect();
        keys.sort_unstable();
        out.write_all(&(self.n_classes as u64).to_le_bytes())?;
        out.write_all(&(keys.len() as u64).to_le_bytes())?;
        for k in keys {
            let ws = &self.weights[k];
            out.write_all(&k.to_le_bytes())?;
            out.write_all(&(ws.len() as u16).to_le_bytes())?;
            for &(c, w) in ws {
                out.write_all(&c.to_le_bytes())?;
                out.write_all(&w.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub(crate) fn read_from<R: Read>(input: &mut R) -> io::Result<Self> {
        let n_classes = read_u64(input)? as usize;
        let n_features = read_u64(input)? as usize;
        let mut weights = FeatureMap::default();
        weights.reserve(n_features);
        for _ in 0..n_features {
            let key = read_u64(input)?;
            let mut b2 = [0u8; 2];
            input.read_exact(&mut b2)?;
            let len = u16::from_le_bytes(b2) as usize;
            let mut ws = Vec::with_capacity(len);
            for _ in 0..len {
                input.read_exact(&mut b2)?;
                let c = u16::from_le_bytes(b2);
                if c as usize >= n_classes {
                    return Err(io::Error::new(io::ErrorKind::InvalidData, "class index out of range"));
                }
                let mut b4 = [0u8; 4];
                input.read_exact(&mut b4)?;
                ws.push((c, f32::from_le_bytes(b4)));
            }
            weights.insert(key, ws);
        }
        Ok(Perceptron { n_classes, weights })
    }
}

fn read_u64<R: Read>(input: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Index of the highest score among allowed classes; ties go to the lowest
/// index.
pub(crate) fn argmax_masked<T: PartialOrd + Copy>(scores: &[T], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (k, &s) in scores.iter().enumerate() {
        if !allowed(k) {
            continue;
        }
        match best {
            Some((_, b)) if s <= b => {}
            _ => best = Some((k, s)),
        }
    }
    best.map(|(k, _)| k)
}
