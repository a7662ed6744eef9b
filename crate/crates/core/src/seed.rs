//! Deterministic seeds.
//!
//! Every random draw in the toolkit comes from a ChaCha8 stream whose seed is
//! a 64-bit FNV-1a hash of a canonical string. The string for a learner's
//! training seed is
//!
//! ```text
//! master=<u64>|params=<params id>|repeat=<0|1>|learner=<i>|iteration=<t>
//! ```
//!
//! and per-purpose streams append `|purpose=<name>` followed by any extra
//! `|<key>=<value>` pairs. External learners can reproduce the seeds from this
//! description alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coordinates that identify one model training run inside an experiment.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedCoordinates {
    pub master_seed: u64,
    pub params_id: String,
    pub is_repeat: bool,
    pub learner_index: usize,
    pub iteration: usize,
}

impl SeedCoordinates {
    pub fn canonical(&self) -> String {
        format!(
            "master={}|params={}|repeat={}|learner={}|iteration={}",
            self.master_seed,
            self.params_id,
            u8::from(self.is_repeat),
            self.learner_index,
            self.iteration
        )
    }

    /// Seed for a named auxiliary stream at these coordinates.
    pub fn stream(&self, purpose: &str, extra: &[(&str, u64)]) -> u64 {
        let mut s = self.canonical();
        s.push_str("|purpose=");
        s.push_str(purpose);
        for (k, v) in extra {
            s.push('|');
            s.push_str(k);
            s.push('=');
            s.push_str(&v.to_string());
        }
        fnv1a64(s.as_bytes())
    }
}

/// Training seed for the learner at `coords`.
pub fn derive_seed(coords: &SeedCoordinates) -> u64 {
    fnv1a64(coords.canonical().as_bytes())
}

/// Seed for an auxiliary stream keyed by a base seed and integer parts, used
/// where no experiment coordinates exist (combiner repeats, resampling).
pub fn sub_seed(base: u64, purpose: &str, parts: &[u64]) -> u64 {
    let mut s = format!("base={}|purpose={}", base, purpose);
    for p in parts {
        s.push('|');
        s.push_str(&p.to_string());
    }
    fnv1a64(s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coords(t: usize, repeat: bool) -> SeedCoordinates {
        SeedCoordinates {
            master_seed: 42,
            params_id: "A=40000,T=12,d=1,o=0,seeds=two_and_a_half".into(),
            is_repeat: repeat,
            learner_index: 1,
            iteration: t,
        }
    }

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn same_coordinates_same_seed() {
        assert_eq!(derive_seed(&coords(3, false)), derive_seed(&coords(3, false)));
    }

    #[test]
    fn iteration_changes_seed_golden() {
        let seeds: Vec<u64> = (0..=12).map(|t| derive_seed(&coords(t, false))).collect();
        let mut distinct = seeds.clone();
        distinct.sort();
        distinct.dedup();
        assert_eq!(distinct.len(), 13);
        // frozen values, cross-checked with an independent FNV-1a implementation
        assert_eq!(seeds[0], GOLDEN_T0);
        assert_eq!(seeds[12], GOLDEN_T12);
    }

    #[test]
    fn repeat_flag_changes_seed_golden() {
        let a = derive_seed(&coords(0, false));
        let b = derive_seed(&coords(0, true));
        assert_ne!(a, b);
        assert_eq!(b, GOLDEN_REPEAT_T0);
    }

    #[test]
    fn canonical_rendering_is_fixed() {
        assert_eq!(
            coords(2, true).canonical(),
            "master=42|params=A=40000,T=12,d=1,o=0,seeds=two_and_a_half|repeat=1|learner=1|iteration=2"
        );
    }

    const GOLDEN_T0: u64 = 855_606_577_786_219_833;
    const GOLDEN_T12: u64 = 11_282_210_248_067_384_028;
    const GOLDEN_REPEAT_T0: u64 = 5_501_348_674_552_953_838;
}
