//! Job-based remote sampler client.
//!
//! The wire protocol is deliberately generic: `POST {base}/jobs` submits
//! `{dim, entries: [[i, j, v], ...], num_reads, seed}` and returns
//! `{job_id}`; `GET {base}/jobs/{id}` returns
//! `{status: "pending" | "done" | "failed", samples: [{bits, energy}]}`
//! where `bits` is a string of `dim` characters, index 0 leftmost.
//!
//! Returned energies are validated against local recomputation (tolerance
//! 1e-6) and replaced by the exact local values before re-sorting, so a
//! remote set satisfies the same consistency guarantees as a local one.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::QuboMatrix;
use crate::sampler::{Sample, SampleSet, Sampler, SamplerConfig};

const ENERGY_TOLERANCE: f64 = 1e-6;

#[derive(Serialize)]
struct JobRequest {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
    num_reads: usize,
    seed: u64,
}

#[derive(Deserialize)]
struct JobCreated {
    job_id: String,
}

#[derive(Deserialize)]
struct JobState {
    status: String,
    #[serde(default)]
    samples: Option<Vec<RemoteSample>>,
}

#[derive(Deserialize)]
struct RemoteSample {
    bits: String,
    energy: f64,
}

/// Client for the job-based sampling protocol.
#[derive(Debug, Clone)]
pub struct RemoteSampler {
    endpoint: String,
    poll_interval: Duration,
    timeout: Duration,
}

impl RemoteSampler {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            poll_interval: Duration::from_millis(50),
            timeout: Duration::from_secs(30),
        }
    }

    pub fn with_timing(mut self, poll_interval: Duration, timeout: Duration) -> Self {
        self.poll_interval = poll_interval;
        self.timeout = timeout;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn submit(&self, q: &QuboMatrix, cfg: &SamplerConfig) -> Result<String> {
        let request = JobRequest {
            dim: q.dim(),
            entries: q.iter_nonzero().collect(),
            num_reads: cfg.num_reads,
            seed: cfg.seed,
        };
        let url = format!("{}/jobs", self.endpoint.trim_end_matches('/'));
        let mut response = ureq::post(&url)
            .send_json(&request)
            .map_err(|e| Error::RemoteConnection(e.to_string()))?;
        let created: JobCreated = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::RemoteMalformed(e.to_string()))?;
        Ok(created.job_id)
    }

    fn poll(&self, job_id: &str) -> Result<Vec<RemoteSample>> {
        let url = format!("{}/jobs/{job_id}", self.endpoint.trim_end_matches('/'));
        let deadline = Instant::now() + self.timeout;
        loop {
            let mut response = ureq::get(&url)
                .call()
                .map_err(|e| Error::RemoteConnection(e.to_string()))?;
            let state: JobState = response
                .body_mut()
                .read_json()
                .map_err(|e| Error::RemoteMalformed(e.to_string()))?;
            match state.status.as_str() {
                "done" => {
                    return state.samples.ok_or_else(|| {
                        Error::RemoteMalformed("done job carries no samples".into())
                    });
                }
                "failed" => return Err(Error::RemoteJobFailed(format!("job {job_id}"))),
                "pending" => {}
                other => {
                    return Err(Error::RemoteMalformed(format!(
                        "unknown job status {other:?}"
                    )));
                }
            }
            if Instant::now() >= deadline {
                return Err(Error::RemoteTimeout(self.timeout));
            }
            std::thread::sleep(self.poll_interval);
        }
    }

    fn decode(&self, q: &QuboMatrix, raw: Vec<RemoteSample>) -> Result<SampleSet> {
        let mut entries = Vec::with_capacity(raw.len());
        for (idx, sample) in raw.into_iter().enumerate() {
            if sample.bits.len() != q.dim() {
                return Err(Error::RemoteMalformed(format!(
                    "sample {idx} has {} bits, expected {}",
                    sample.bits.len(),
                    q.dim()
                )));
            }
            let bits: Vec<u8> = sample
                .bits
                .chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(Error::RemoteMalformed(format!(
                        "sample {idx} holds non-binary character {other:?}"
                    ))),
                })
                .collect::<Result<_>>()?;
            let recomputed = q.energy(&bits)?;
            if (recomputed - sample.energy).abs() > ENERGY_TOLERANCE {
                return Err(Error::RemoteIntegrity {
                    sample: idx,
                    reported: sample.energy,
                    recomputed,
                });
            }
            entries.push(Sample {
                bits,
                energy: recomputed,
            });
        }
        Ok(SampleSet::from_unsorted(entries))
    }
}

impl Sampler for RemoteSampler {
    fn sample(&self, q: &QuboMatrix, cfg: &SamplerConfig) -> Result<SampleSet> {
        cfg.validate()?;
        let job_id = self.submit(q, cfg)?;
        let raw = self.poll(&job_id)?;
        self.decode(q, raw)
    }
}

/// One-shot convenience wrapper.
pub fn remote_sample(q: &QuboMatrix, endpoint: &str, cfg: &SamplerConfig) -> Result<SampleSet> {
    RemoteSampler::new(endpoint).sample(q, cfg)
}
