//! `tgqm`: evaluate single grasps, generate datasets, search them for the
//! best grasp per task, render camera-in-hand depth images and verify
//! stored records.
//!
//! Exit codes: 0 ok, 1 input error, 2 the hand missed the object, 3 no
//! record passes the task gates, 4 verification mismatch.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use tgqm::affordance::{score, AffordanceConfig, Preset, Task};
use tgqm::hand::{ContactSource, HandModel, Pregrasp};
use tgqm::metrics::{MetricVector, MetricsConfig};
use tgqm::pipeline::{
    argmax_search, draw_sample, evaluate_grasp, export_scene, generate_dataset, load_object,
    verify, DatasetMeta, ObjectSpec, PipelineError, RunConfig, UseDirection,
};
use tgqm::render::{encode_pgm, render_depth, write_grim, CameraParams};

const EXIT_INPUT: u8 = 1;
const EXIT_MISS: u8 = 2;
const EXIT_EMPTY: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "tgqm", version, about = "Task-oriented grasp quality engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the grasp policy once and print the metric vector and task scores.
    Evaluate(EvaluateArgs),
    /// Generate a dataset of random grasps and use points.
    Sample(SampleArgs),
    /// Rank dataset records for a task.
    Optimize(OptimizeArgs),
    /// Render the camera-in-hand depth image of a pregrasp.
    Render(RenderArgs),
    /// Recompute a random fraction of a dataset and compare.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Mesh file (.off/.obj) or builtin:<name>.
    #[arg(long)]
    mesh: String,
    /// Six comma-separated pregrasp values.
    #[arg(long, allow_hyphen_values = true)]
    pregrasp: String,
    /// Two comma-separated use-direction values.
    #[arg(long, allow_hyphen_values = true)]
    use_dir: String,
    /// JSON file with `metrics`, `affordance` and `hand` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Run configuration; without it every bundled mesh is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output dataset; `.csv` selects CSV, anything else the binary format.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores. Overrides TGQM_THREADS.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// beat, cut or pick.
    #[arg(long)]
    task: Task,
    /// default, no_robustness or extra_robustness.
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Write the best grasp as an OBJ scene.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    mesh: String,
    #[arg(long, allow_hyphen_values = true)]
    pregrasp: String,
    /// GRIM depth raster.
    #[arg(long)]
    out: PathBuf,
    /// Also write a 16-bit PGM preview.
    #[arg(long)]
    pgm: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    width: u32,
    #[arg(long, default_value_t = 128)]
    height: u32,
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    fraction: f64,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Render(a) => cmd_render(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let empty = matches!(
                e.downcast_ref::<PipelineError>(),
                Some(PipelineError::EmptyResult)
            );
            ExitCode::from(if empty { EXIT_EMPTY } else { EXIT_INPUT })
        }
    }
}

fn parse_vec<const N: usize>(what: &str, text: &str) -> Result<[f64; N]> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("{what}: bad number {s:?}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let arr: [f64; N] = values
        .try_into()
        .map_err(|v: Vec<f64>| anyhow!("{what}: expected {N} values, got {}", v.len()))?;
    if arr.iter().any(|v| !v.is_finite()) {
        bail!("{what}: values must be finite");
    }
    Ok(arr)
}

fn parse_pregrasp(text: &str) -> Result<Pregrasp> {
    let p0 = Pregrasp::from_array(parse_vec::<6>("--pregrasp", text)?);
    if !p0.is_valid() {
        bail!("--pregrasp: values must lie in [-1, 1] (spread in [0, 1])");
    }
    Ok(p0)
}

fn mesh_spec(mesh: &str) -> ObjectSpec {
    let id = match mesh.strip_prefix("builtin:") {
        Some(name) => name.to_string(),
        None => Path::new(mesh)
            .file_stem()
            .map_or_else(|| mesh.to_string(), |s| s.to_string_lossy().into_owned()),
    };
    ObjectSpec {
        id,
        mesh: mesh.to_string(),
    }
}

/// JSON number, or `"inf"` / `"-inf"` / `null` for non-finite values.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        Value::Null
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("{v}")
    }
}

fn phi_json(phi: &MetricVector) -> Value {
    json!({
        "eps": phi.eps,
        "inertia": phi.inertia,
        "e_i": num(phi.effort_impact),
        "e_h": phi.effort_hold.iter().map(|v| num(*v)).collect::<Vec<_>>(),
        "delta": phi.discharge,
        "u_tau": phi.use_force,
        "u_g": phi.use_geometry,
    })
}

fn vec3_or_null(v: [f64; 3]) -> Value {
    if v.iter().any(|x| x.is_nan()) {
        Value::Null
    } else {
        json!(v)
    }
}

/// Reads the metric, affordance and hand sections of a JSON file. Other
/// keys, such as those of a full run configuration, are ignored.
fn evaluation_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = RunConfig::new(0, 1, Vec::new());
    let Some(path) = path else {
        return Ok(cfg);
    };
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let section = |key: &str| value.get(key).cloned();
    if let Some(v) = section("metrics") {
        cfg.metrics = serde_json::from_value::<MetricsConfig>(v).context("metrics section")?;
    }
    if let Some(v) = section("affordance") {
        cfg.affordance =
            serde_json::from_value::<AffordanceConfig>(v).context("affordance section")?;
    }
    if let Some(v) = section("hand") {
        cfg.hand = serde_json::from_value::<HandModel>(v).context("hand section")?;
    }
    cfg.metrics.validate().map_err(|e| anyhow!(e))?;
    cfg.hand.validate().map_err(|e| anyhow!(e))?;
    cfg.affordance.validate().map_err(|e| anyhow!(e))?;
    Ok(cfg)
}

fn part_name(source: &ContactSource) -> String {
    match source {
        ContactSource::Palm => "palm".into(),
        ContactSource::Link { finger, link } => format!("finger{finger}_link{link}"),
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<u8> {
    let p0 = parse_pregrasp(&a.pregrasp)?;
    let d = UseDirection::from_array(parse_vec::<2>("--use-dir", &a.use_dir)?);
    if !d.is_valid() {
        bail!("--use-dir: values must lie in [-1, 1]");
    }
    let cfg = evaluation_config(a.config.as_deref())?;
    let obj = load_object(&mesh_spec(&a.mesh))?;
    let (record, grasp, _) = evaluate_grasp(&obj, &p0, &d, &cfg)?;
    let phi = record.phi;
    let scores: Vec<(Task, f64)> = [Task::Beat, Task::Cut, Task::Pick]
        .into_iter()
        .map(|t| (t, score(t, &phi, &cfg.affordance).score))
        .collect();

    if a.json {
        let contacts: Vec<Value> = grasp
            .contacts
            .iter()
            .map(|c| json!({ "point": [c.point.x, c.point.y, c.point.z], "normal": [c.normal.x, c.normal.y, c.normal.z], "part": part_name(&c.source) }))
            .collect();
        let w = grasp.pose.wrist;
        let ax = grasp.pose.approach();
        let report = json!({
            "mesh": a.mesh,
            "pregrasp": record.p0,
            "use_dir": record.d,
            "reached": record.reached,
            "force_closure": phi.eps > 0.0,
            "n_contacts": record.n_contacts,
            "wrist": [w.x, w.y, w.z],
            "approach": [ax.x, ax.y, ax.z],
            "contacts": contacts,
            "use_point": vec3_or_null(record.use_point),
            "use_normal": vec3_or_null(record.use_normal),
            "phi": phi_json(&phi),
            "viable": record.viable,
            "scores": {
                "beat": num(scores[0].1),
                "cut": num(scores[1].1),
                "pick": num(scores[2].1),
            },
        });
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("mesh        {}", a.mesh);
        println!("reached     {}", record.reached);
        println!("contacts    {}", record.n_contacts);
        for c in &grasp.contacts {
            println!(
                "  {:<14} ({:.5}, {:.5}, {:.5})",
                part_name(&c.source),
                c.point.x,
                c.point.y,
                c.point.z
            );
        }
        if record.use_point[0].is_nan() {
            println!("use point   none");
        } else {
            let u = record.use_point;
            println!("use point   ({:.5}, {:.5}, {:.5})", u[0], u[1], u[2]);
        }
        println!("eps         {}", fmt_num(phi.eps));
        println!("inertia     {}", fmt_num(phi.inertia));
        println!("e_i         {}", fmt_num(phi.effort_impact));
        let eh: Vec<String> = phi.effort_hold.iter().map(|v| fmt_num(*v)).collect();
        println!("e_h         {}", eh.join(" "));
        println!("delta       {}", fmt_num(phi.discharge));
        println!("u_tau       {}", fmt_num(phi.use_force));
        println!("u_g         {}", fmt_num(phi.use_geometry));
        println!("viable      {}", record.viable);
        for (t, s) in &scores {
            println!(
                "score {:<5} {}",
                format!("{t:?}").to_lowercase(),
                fmt_num(*s)
            );
        }
    }
    Ok(if record.reached { 0 } else { EXIT_MISS })
}

/// The worker count: the flag, then `TGQM_THREADS`, then the config.
fn resolve_workers(flag: Option<usize>, config: usize) -> Result<usize> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var("TGQM_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .with_context(|| format!("TGQM_THREADS: expected a worker count, got {v:?}")),
        _ => Ok(config),
    }
}

fn cmd_sample(a: SampleArgs) -> Result<u8> {
    let mut cfg = match &a.config {
        Some(path) => RunConfig::from_file(path)?,
        None => {
            let mut c = RunConfig::bundled(0, 1000);
            c.workers = 0;
            c
        }
    };
    if let Some(n) = a.count {
        cfg.samples = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.workers = resolve_workers(a.workers, cfg.workers)?;
    let summary = generate_dataset(&cfg, &a.out)?;
    if a.json {
        let mut v = serde_json::to_value(&summary)?;
        v["out"] = json!(a.out.display().to_string());
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("wrote {} samples to {}", summary.samples, a.out.display());
        println!("reached        {}", summary.reached);
        println!("viable         {}", summary.viable);
        println!("use invalid    {}", summary.use_invalid);
        println!("viability rate {:.4}%", 100.0 * summary.viability_rate);
        println!(
            "wall time      {:.2} s on {} worker(s)",
            summary.wall_time_s, summary.workers
        );
    }
    Ok(0)
}

fn cmd_optimize(a: OptimizeArgs) -> Result<u8> {
    let meta = DatasetMeta::read(&a.dataset)?;
    let mut cfg = meta
        .as_ref()
        .map_or_else(AffordanceConfig::default, |m| m.config.affordance);
    if let Some(p) = a.preset {
        cfg.preset = p;
        cfg.tau_eps = p.tau_eps();
    }
    let ranked = argmax_search(&a.dataset, a.task, &cfg, a.top_k)?;

    let mut scene_path = None;
    if let Some(path) = &a.export {
        let meta = meta.as_ref().ok_or_else(|| {
            anyhow!("--export needs the dataset's .meta.json sidecar to regenerate the grasp")
        })?;
        let run = &meta.config;
        let objects = run.load_objects()?;
        let best = &ranked[0];
        let (k, p0, d) = draw_sample(run.seed, objects.len(), best.index);
        let (_, grasp, use_point) = evaluate_grasp(&objects[k], &p0, &d, run)?;
        let text = export_scene(&objects[k].mesh, &grasp, use_point.as_ref(), &run.hand);
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        scene_path = Some(path.display().to_string());
    }

    if a.json {
        let results: Vec<Value> = ranked
            .iter()
            .enumerate()
            .map(|(i, r)| {
                json!({
                    "rank": i + 1,
                    "index": r.index,
                    "object_id": r.record.object_id,
                    "score": r.score,
                    "p0": r.record.p0,
                    "d": r.record.d,
                    "use_point": vec3_or_null(r.record.use_point),
                    "reached": r.record.reached,
                    "viable": r.record.viable,
                    "phi": phi_json(&r.record.phi),
                })
            })
            .collect();
        let mut out = json!({
            "task": a.task,
            "tau_eps": num(cfg.tau_eps),
            "results": results,
        });
        if let Some(s) = scene_path {
            out["scene"] = json!(s);
        }
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!(
            "{:>4} {:>9} {:<12} {:>14} {:>9} {:>9} {:>9} {:>9}",
            "rank", "index", "object", "score", "eps", "delta", "u_tau", "u_g"
        );
        for (i, r) in ranked.iter().enumerate() {
            let phi = &r.record.phi;
            println!(
                "{:>4} {:>9} {:<12} {:>14.6e} {:>9.4} {:>9.4} {:>9.4} {:>9.3}",
                i + 1,
                r.index,
                r.record.object_id,
                r.score,
                phi.eps,
                phi.discharge,
                phi.use_force,
                phi.use_geometry
            );
        }
        if let Some(s) = scene_path {
            println!("scene written to {s}");
        }
    }
    Ok(0)
}

fn cmd_render(a: RenderArgs) -> Result<u8> {
    let p0 = parse_pregrasp(&a.pregrasp)?;
    let cam = CameraParams {
        width: a.width,
        height: a.height,
        fov_deg: a.fov,
        noise_sigma: a.noise_sigma,
        noise_seed: a.noise_seed,
    };
    cam.validate()?;
    let obj = load_object(&mesh_spec(&a.mesh))?;
    let img = render_depth(&obj.mesh, &p0, &cam)?;
    write_grim(&img, &a.out)?;
    if let Some(pgm) = &a.pgm {
        std::fs::write(pgm, encode_pgm(&img))
            .with_context(|| format!("writing {}", pgm.display()))?;
    }
    println!(
        "{}x{} depth image, {} object pixels, written to {}",
        img.width,
        img.height,
        img.finite_count(),
        a.out.display()
    );
    Ok(0)
}

fn cmd_verify(a: VerifyArgs) -> Result<u8> {
    let report = verify(&a.dataset, a.fraction)?;
    if a.json {
        let v = json!({
            "records": report.records,
            "checked": report.checked,
            "max_deviation": num(report.max_deviation),
            "worst_index": report.worst_index,
            "mismatches": report.mismatches,
            "passed": report.passed(),
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
    } else {
        println!("records       {}", report.records);
        println!("checked       {}", report.checked);
        println!("max deviation {:e}", report.max_deviation);
        if let Some(i) = report.worst_index {
            println!("worst index   {i}");
        }
        println!("mismatches    {}", report.mismatches);
        println!("{}", if report.passed() { "PASS" } else { "FAIL" });
    }
    Ok(if report.passed() { 0 } else { EXIT_MISMATCH })
}
