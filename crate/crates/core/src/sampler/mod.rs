//! Pluggable QUBO samplers.
//!
//! A sampler returns an energy-sorted set of binary assignments for a QUBO
//! problem. Three backends are provided: simulated annealing
//! ([`SimulatedAnnealingSampler`]), an exact exhaustive solver
//! ([`ExhaustiveSolver`]) used as an oracle at small dimensions, and a
//! job-based remote client ([`RemoteSampler`]).

mod exhaustive;
mod remote;
mod sa;

pub use exhaustive::{exhaustive_solve, ExhaustiveSolver};
pub use remote::{remote_sample, RemoteSampler};
pub use sa::SimulatedAnnealingSampler;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;

/// Cooling schedule of the annealing backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TemperatureSchedule {
    /// Scale-free default: starts at the largest absolute coefficient and
    /// cools geometrically to a thousandth of it.
    Auto,
    /// Explicit geometric schedule; requires `t_start > t_end > 0`.
    Geometric { t_start: f64, t_end: f64 },
}

/// Knobs shared by every sampler backend.
///
/// `chain_strength` only matters to hardware-style remote backends and is a
/// documented no-op for the local ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub num_reads: usize,
    pub sweeps_per_read: usize,
    pub schedule: TemperatureSchedule,
    pub seed: u64,
    /// How many lowest-energy reads downstream averaging consumes.
    pub best_s: usize,
    pub chain_strength: f64,
}

impl SamplerConfig {
    /// Defaults (1000 reads, 100 sweeps, auto schedule, best 100) with an
    /// explicit seed; seeds are always caller-provided in this crate.
    pub fn new(seed: u64) -> Self {
        Self {
            num_reads: 1000,
            sweeps_per_read: 100,
            schedule: TemperatureSchedule::Auto,
            seed,
            best_s: 100,
            chain_strength: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 {
            return Err(Error::InvalidParam("num_reads must be >= 1".into()));
        }
        if self.sweeps_per_read == 0 {
            return Err(Error::InvalidParam("sweeps_per_read must be >= 1".into()));
        }
        if self.best_s == 0 || self.best_s > self.num_reads {
            return Err(Error::InvalidParam(format!(
                "best_s must be in 1..=num_reads, got {} of {}",
                self.best_s, self.num_reads
            )));
        }
        if let TemperatureSchedule::Geometric { t_start, t_end } = self.schedule {
            if !(t_start > t_end && t_end > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "geometric schedule needs t_start > t_end > 0, got ({t_start}, {t_end})"
                )));
            }
        }
        Ok(())
    }
}

/// One sampler read: a bit assignment and its energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bits: Vec<u8>,
    pub energy: f64,
}

/// Reads sorted ascending by energy. Duplicate assignments are kept;
/// repeated low-energy reads are how averaging weights reliable solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    entries: Vec<Sample>,
}

impl SampleSet {
    /// Sorts the reads by energy (stable, so equal energies keep their
    /// original read order).
    pub fn from_unsorted(mut entries: Vec<Sample>) -> Self {
        entries.sort_by(|a, b| a.energy.partial_cmp(&b.energy).expect("finite energies"));
        Self { entries }
    }

    pub fn entries(&self) -> &[Sample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn best(&self) -> &Sample {
        &self.entries[0]
    }

    /// The `s` lowest-energy reads (fewer if the set is smaller).
    pub fn take_best(&self, s: usize) -> &[Sample] {
        &self.entries[..s.min(self.entries.len())]
    }
}

/// Backend contract: return an energy-sorted sample set for a QUBO.
/// Implementations must accept concurrent calls.
pub trait Sampler: Send + Sync {
    fn sample(&self, q: &QuboMatrix, cfg: &SamplerConfig) -> Result<SampleSet>;

    /// Largest variable count the backend accepts, if bounded.
    fn capacity(&self) -> Option<usize> {
        None
    }
}

/// Per-dimension preparation shared by all problems of one size.
///
/// Mirrors reusing a complete-matrix embedding: the first problem of a given
/// dimension pays the construction cost, later ones reuse it. For the local
/// backends the structure is the complete adjacency over `dim` variables.
#[derive(Debug)]
pub struct DimStructure {
    pub dim: usize,
    /// `neighbors[i]` lists every variable coupled with `i` in a complete
    /// problem of this dimension.
    pub neighbors: Vec<Vec<u32>>,
}

impl DimStructure {
    fn complete(dim: usize) -> Self {
        let neighbors = (0..dim)
            .map(|i| (0..dim as u32).filter(|&j| j != i as u32).collect())
            .collect();
        Self { dim, neighbors }
    }
}

/// Cache counters; `entries` is the number of distinct dimensions built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub entries: usize,
}

/// Thread-safe per-dimension structure cache with at-most-once construction
/// per dimension (the build happens under the map lock).
#[derive(Debug, Default)]
pub struct StructureCache {
    map: Mutex<HashMap<usize, Arc<DimStructure>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl StructureCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_build(&self, dim: usize) -> Arc<DimStructure> {
        let mut map = self.map.lock().expect("structure cache poisoned");
        if let Some(existing) = map.get(&dim) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Arc::clone(existing);
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let built = Arc::new(DimStructure::complete(dim));
        map.insert(dim, Arc::clone(&built));
        built
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.map.lock().expect("structure cache poisoned").len(),
        }
    }

    pub fn clear(&self) {
        self.map.lock().expect("structure cache poisoned").clear();
    }
}
