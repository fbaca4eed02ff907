//! Brute-force affordance search over a dataset and the recomputation
//! check.

use std::cmp::Ordering;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{draw_sample, evaluate_sample, DatasetMeta, DatasetReader, GraspRecord, PipelineError};
use crate::affordance::{score, AffordanceConfig, Task};
use crate::exec::{Execution, Executor};

/// Largest relative deviation `verify` accepts.
pub const VERIFY_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Ranked {
    /// Position of the record in the dataset.
    pub index: usize,
    pub score: f64,
    pub record: GraspRecord,
}

fn rank_order(a: &Ranked, b: &Ranked) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.record.object_id.cmp(&b.record.object_id))
        .then(a.index.cmp(&b.index))
}

/// The `top_k` highest-scoring records for `task`. Gated (`-∞`) records
/// are skipped; ties go to the smaller `(object_id, index)`.
pub fn argmax_search(
    dataset: &Path,
    task: Task,
    cfg: &AffordanceConfig,
    top_k: usize,
) -> Result<Vec<Ranked>, PipelineError> {
    let ids = DatasetMeta::read(dataset)?
        .map(|m| m.object_ids())
        .unwrap_or_default();
    let reader = DatasetReader::open(dataset, &ids)?;
    let top_k = top_k.max(1);
    let mut kept: Vec<Ranked> = Vec::new();
    for (index, record) in reader.enumerate() {
        let record = record?;
        let s = score(task, &record.phi, cfg).score;
        if s == f64::NEG_INFINITY || s.is_nan() {
            continue;
        }
        kept.push(Ranked {
            index,
            score: s,
            record,
        });
        if kept.len() >= 4 * top_k + 256 {
            kept.sort_by(rank_order);
            kept.truncate(top_k);
        }
    }
    if kept.is_empty() {
        return Err(PipelineError::EmptyResult);
    }
    kept.sort_by(rank_order);
    kept.truncate(top_k);
    Ok(kept)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub records: usize,
    pub checked: usize,
    pub max_deviation: f64,
    /// Dataset index of the largest deviation.
    pub worst_index: Option<usize>,
    /// Records deviating by more than [`VERIFY_TOLERANCE`].
    pub mismatches: usize,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// `|a - b| / max(|a|, |b|)`, zero for equal values (infinities included)
/// and for two NaNs.
fn deviation(a: f64, b: f64) -> f64 {
    if a == b || (a.is_nan() && b.is_nan()) {
        0.0
    } else if a.is_finite() && b.is_finite() {
        (a - b).abs() / a.abs().max(b.abs())
    } else {
        f64::INFINITY
    }
}

fn record_deviation(stored: &GraspRecord, fresh: &GraspRecord) -> f64 {
    if stored.object_id != fresh.object_id
        || stored.reached != fresh.reached
        || stored.viable != fresh.viable
    {
        return f64::INFINITY;
    }
    stored
        .numeric_fields()
        .iter()
        .zip(fresh.numeric_fields())
        .map(|(a, b)| deviation(*a, b))
        .fold(0.0, f64::max)
}

/// Regenerates a seeded random `fraction` of the records from the run
/// configuration in the sidecar and compares them with what is stored, at
/// the storage precision.
pub fn verify(dataset: &Path, fraction: f64) -> Result<VerifyReport, PipelineError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(PipelineError::Config(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    let meta = DatasetMeta::read(dataset)?.ok_or_else(|| PipelineError::Format {
        path: dataset.display().to_string(),
        message: "no .meta.json sidecar; cannot recompute records".into(),
    })?;
    let reader = DatasetReader::open(dataset, &meta.object_ids())?;
    let format = reader.format();
    let records: Vec<GraspRecord> = reader.collect::<Result<_, _>>()?;
    let cfg = &meta.config;
    let n = records.len();
    let k = ((fraction * n as f64).ceil() as usize).min(n);
    if k == 0 {
        return Ok(VerifyReport {
            records: n,
            checked: 0,
            max_deviation: 0.0,
            worst_index: None,
            mismatches: 0,
        });
    }
    let objects = cfg.load_objects()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7665_7269_6679);
    let mut picks = sample(&mut rng, n, k).into_vec();
    picks.sort_unstable();
    let executor = Executor::new(Execution::from_workers(cfg.workers));
    let devs = executor.map(0..picks.len(), |j| {
        let i = picks[j];
        let (obj, p0, d) = draw_sample(cfg.seed, objects.len(), i);
        evaluate_sample(&objects[obj], &p0, &d, cfg)
            .map(|fresh| record_deviation(&records[i], &fresh.quantized(format)))
            .map_err(|source| PipelineError::Metrics { index: i, source })
    });
    let mut report = VerifyReport {
        records: n,
        checked: k,
        max_deviation: 0.0,
        worst_index: None,
        mismatches: 0,
    };
    for (j, dev) in devs.into_iter().enumerate() {
        let dev = dev?;
        if dev > VERIFY_TOLERANCE {
            report.mismatches += 1;
        }
        if report.worst_index.is_none() || dev > report.max_deviation {
            report.max_deviation = dev;
            report.worst_index = Some(picks[j]);
        }
    }
    Ok(report)
}
