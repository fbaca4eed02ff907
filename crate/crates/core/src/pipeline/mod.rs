//! Dataset generation: uniform pregrasp and use-direction sampling, the
//! direction map onto the surface, parallel evaluation with counter-based
//! seeding, and brute-force affordance search over stored samples.

mod record;
mod scene;
mod search;

pub use record::{
    read_dataset, DatasetFormat, DatasetMeta, DatasetReader, DatasetWriter, GraspRecord,
    BINARY_MAGIC, BINARY_RECORD_BYTES, BINARY_VERSION, CSV_COLUMNS,
};
pub use scene::export_scene;
pub use search::{argmax_search, verify, Ranked, VerifyReport, VERIFY_TOLERANCE};

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::affordance::{is_viable, AffordanceConfig};
use crate::exec::{Execution, Executor};
use crate::geom::{load_mesh, shapes, GeomError, Mesh, Ray, Vec3};
use crate::hand::{execute_policy, Grasp, HandModel, Pregrasp};
use crate::metrics::{compute_phi_opt, MetricsConfig, PhiError, UsePoint};

/// Samples evaluated per parallel batch before the batch is written.
pub const BATCH_SIZE: usize = 1024;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("object {id:?}: {source}")]
    ObjectLoad {
        id: String,
        #[source]
        source: GeomError,
    },
    #[error("object {id:?}: unknown builtin mesh {name:?}")]
    UnknownBuiltin { id: String, name: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset {path}: {message}")]
    Format { path: String, message: String },
    #[error("no record passes the task gates")]
    EmptyResult,
    #[error("use ray found no surface")]
    NoIntersection,
    #[error("sample {index}: {source}")]
    Metrics {
        index: usize,
        #[source]
        source: PhiError,
    },
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Normalized spherical coordinates of a use direction, both in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UseDirection {
    pub d_theta: f64,
    pub d_phi: f64,
}

impl UseDirection {
    pub fn from_array(a: [f64; 2]) -> Self {
        UseDirection {
            d_theta: a[0],
            d_phi: a[1],
        }
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.d_theta, self.d_phi]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| (-1.0..=1.0).contains(v))
    }

    /// Unit vector, decoded like the pregrasp approach direction.
    pub fn direction(&self) -> Vec3 {
        let theta = (self.d_theta + 1.0) * 0.5 * PI;
        let phi = self.d_phi * PI;
        Vec3::new(
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        )
    }
}

/// A mesh source: `builtin:<name>` or a path to an OFF/OBJ file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub mesh: String,
}

impl ObjectSpec {
    pub fn builtin(name: &str) -> Self {
        ObjectSpec {
            id: name.to_string(),
            mesh: format!("builtin:{name}"),
        }
    }

    /// Makes relative file paths absolute against `base`.
    pub fn resolved(&self, base: &Path) -> ObjectSpec {
        if self.mesh.starts_with("builtin:") || Path::new(&self.mesh).is_absolute() {
            return self.clone();
        }
        let p = base.join(&self.mesh);
        let p = p.canonicalize().unwrap_or(p);
        ObjectSpec {
            id: self.id.clone(),
            mesh: p.display().to_string(),
        }
    }
}

/// A loaded object with its 16-byte id hash used by the binary format.
pub struct PreparedObject {
    pub spec: ObjectSpec,
    pub mesh: Mesh,
    pub hash: [u8; 16],
}

pub fn object_hash(id: &str) -> [u8; 16] {
    let digest = Sha256::digest(id.as_bytes());
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

pub fn load_object(spec: &ObjectSpec) -> Result<PreparedObject, PipelineError> {
    let mesh = match spec.mesh.strip_prefix("builtin:") {
        Some(name) => shapes::builtin(name).ok_or_else(|| PipelineError::UnknownBuiltin {
            id: spec.id.clone(),
            name: name.to_string(),
        })?,
        None => {
            load_mesh(Path::new(&spec.mesh), None).map_err(|source| PipelineError::ObjectLoad {
                id: spec.id.clone(),
                source,
            })?
        }
    };
    Ok(PreparedObject {
        spec: spec.clone(),
        mesh,
        hash: object_hash(&spec.id),
    })
}

fn default_samples() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Zero uses every available core.
    #[serde(default)]
    pub workers: usize,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub affordance: AffordanceConfig,
    #[serde(default)]
    pub hand: HandModel,
}

impl RunConfig {
    pub fn new(seed: u64, samples: usize, objects: Vec<ObjectSpec>) -> Self {
        RunConfig {
            seed,
            samples,
            workers: 1,
            objects,
            metrics: MetricsConfig::default(),
            affordance: AffordanceConfig::default(),
            hand: HandModel::default(),
        }
    }

    /// Every bundled mesh, in [`shapes::BUILTIN_NAMES`] order.
    pub fn bundled(seed: u64, samples: usize) -> Self {
        RunConfig::new(
            seed,
            samples,
            shapes::BUILTIN_NAMES
                .iter()
                .map(|n| ObjectSpec::builtin(n))
                .collect(),
        )
    }

    /// Parses a config file; relative mesh paths are taken from the file's
    /// directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        cfg.objects = cfg.objects.iter().map(|o| o.resolved(&base)).collect();
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.objects.is_empty() {
            return bad("object list is empty".into());
        }
        let mut ids: Vec<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate object id {:?}", w[0]));
        }
        if let Some(o) = self
            .objects
            .iter()
            .find(|o| o.id.is_empty() || o.id.contains([',', '"', '\n']))
        {
            return bad(format!(
                "object id {:?} must be nonempty without commas, quotes or newlines",
                o.id
            ));
        }
        self.metrics.validate().map_err(PipelineError::Config)?;
        self.hand.validate().map_err(PipelineError::Config)?;
        self.affordance.validate().map_err(PipelineError::Config)?;
        Ok(())
    }

    pub fn load_objects(&self) -> Result<Vec<PreparedObject>, PipelineError> {
        self.objects.iter().map(load_object).collect()
    }
}

/// The generator for sample `index`: the run seed keys the stream and the
/// index selects it, so samples never depend on scheduling.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Uniform over `[-1, 1]⁵ × [0, 1]`.
pub fn sample_pregrasp<R: Rng>(rng: &mut R) -> Pregrasp {
    let mut a = [0.0; 6];
    for v in a.iter_mut().take(5) {
        *v = rng.random_range(-1.0..=1.0);
    }
    a[5] = rng.random_range(0.0..=1.0);
    Pregrasp::from_array(a)
}

pub fn sample_use_direction<R: Rng>(rng: &mut R) -> UseDirection {
    UseDirection {
        d_theta: rng.random_range(-1.0..=1.0),
        d_phi: rng.random_range(-1.0..=1.0),
    }
}

/// Object index, pregrasp and use direction of sample `index`. Objects
/// are visited round-robin.
pub fn draw_sample(seed: u64, n_objects: usize, index: usize) -> (usize, Pregrasp, UseDirection) {
    let mut rng = sample_rng(seed, index as u64);
    let p0 = sample_pregrasp(&mut rng);
    let d = sample_use_direction(&mut rng);
    (index % n_objects, p0, d)
}

/// Farthest surface crossing of the ray from the center of mass along `d`.
pub fn direction_map(mesh: &Mesh, d: &UseDirection) -> Result<UsePoint, PipelineError> {
    mesh.ray_farthest_hit(&Ray::new(mesh.center_of_mass(), d.direction()))
        .map(|h| UsePoint::from_hit(&h))
        .ok_or(PipelineError::NoIntersection)
}

/// Runs the policy and the metrics for one sample, keeping the grasp.
pub fn evaluate_grasp(
    obj: &PreparedObject,
    p0: &Pregrasp,
    d: &UseDirection,
    cfg: &RunConfig,
) -> Result<(GraspRecord, Grasp, Option<UsePoint>), PhiError> {
    let grasp = execute_policy(&obj.mesh, p0, &cfg.hand);
    let use_point = direction_map(&obj.mesh, d).ok();
    let report = compute_phi_opt(&obj.mesh, &grasp, use_point.as_ref(), &cfg.metrics)?;
    let phi = report.phi;
    let viable = grasp.reached_object && is_viable(&phi, &cfg.affordance);
    let nan3 = [f64::NAN; 3];
    let record = GraspRecord {
        object_id: obj.spec.id.clone(),
        p0: p0.to_array(),
        d: d.to_array(),
        use_point: use_point.map_or(nan3, |u| u.point.into()),
        use_normal: use_point.map_or(nan3, |u| u.inward_normal.into()),
        n_contacts: grasp.contacts.len() as u32,
        phi,
        reached: grasp.reached_object,
        viable,
    };
    Ok((record, grasp, use_point))
}

pub fn evaluate_sample(
    obj: &PreparedObject,
    p0: &Pregrasp,
    d: &UseDirection,
    cfg: &RunConfig,
) -> Result<GraspRecord, PhiError> {
    evaluate_grasp(obj, p0, d, cfg).map(|r| r.0)
}

/// Records for the sample indices in `range`, in index order.
pub fn generate_records(
    cfg: &RunConfig,
    objects: &[PreparedObject],
    range: std::ops::Range<usize>,
    executor: &Executor,
) -> Result<Vec<GraspRecord>, PipelineError> {
    executor
        .map(range, |i| {
            let (k, p0, d) = draw_sample(cfg.seed, objects.len(), i);
            evaluate_sample(&objects[k], &p0, &d, cfg)
                .map_err(|source| PipelineError::Metrics { index: i, source })
        })
        .into_iter()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub samples: usize,
    pub reached: usize,
    pub viable: usize,
    pub use_invalid: usize,
    pub viability_rate: f64,
    pub wall_time_s: f64,
    pub workers: usize,
}

/// Evaluates `cfg.samples` samples and writes them to `out` (CSV when the
/// extension is `.csv`, binary otherwise) plus a `<out>.meta.json` sidecar
/// that lets the records be recomputed.
pub fn generate_dataset(cfg: &RunConfig, out: &Path) -> Result<Summary, PipelineError> {
    cfg.validate()?;
    let start = Instant::now();
    let objects = cfg.load_objects()?;
    let execution = Execution::from_workers(cfg.workers);
    let executor = Executor::new(execution);
    let mut writer = DatasetWriter::create(out, DatasetFormat::from_path(out))?;
    let mut summary = Summary {
        samples: cfg.samples,
        reached: 0,
        viable: 0,
        use_invalid: 0,
        viability_rate: 0.0,
        wall_time_s: 0.0,
        workers: execution.workers(),
    };
    let mut next = 0;
    while next < cfg.samples {
        let end = (next + BATCH_SIZE).min(cfg.samples);
        for r in generate_records(cfg, &objects, next..end, &executor)? {
            summary.reached += r.reached as usize;
            summary.viable += r.viable as usize;
            summary.use_invalid += r.use_point[0].is_nan() as usize;
            writer.write(&r)?;
        }
        next = end;
    }
    writer.finish()?;
    DatasetMeta::new(cfg).write(out)?;
    summary.viability_rate = summary.viable as f64 / summary.samples as f64;
    summary.wall_time_s = start.elapsed().as_secs_f64();
    Ok(summary)
}
