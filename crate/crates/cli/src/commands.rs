//! Synthetic-family commands: generate, train, eval, ablate.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use traji_agents::policy::{eval_rng, rollout};
use traji_agents::{
    ablate, evaluate, train_bc, train_dati, train_ddpg, CheckpointPolicy, EvalReport, LossRecord, SavedAgent, Task, Variant,
};
use traji_core::seed::Stream;
use traji_core::FamilySpec;
use traji_nn::Checkpoint;

use crate::config::{self, write_json, AgentKind, RunConfig, TaskConfig, RESOLVED_NAME};
use crate::output::{create_dir, write_eval, write_losses};
use crate::svg::{Plot, Series, BLUE, GREEN, GREYS, RED};
use crate::UsageError;

fn xy(tr: &traji_core::Trajectory) -> Vec<(f64, f64)> {
    tr.states.iter().map(|s| (s.x, s.y)).collect()
}

pub fn generate(family: &str, n: usize, out: &Path, seed: u64) -> Result<()> {
    let spec = FamilySpec::by_name(family)
        .map_err(|_| UsageError(format!("unknown family `{family}` (fixed_start, u_shaped, circles, ribbons)")))?;
    create_dir(out)?;
    let mut plot = Plot::new(format!("{} ({n} members)", spec.kind.name()));
    for i in 0..n {
        let alpha = spec.draw_alpha(seed, Stream::TrainReference, i as u64);
        let tr = spec.sample(alpha, spec.n_steps)?;
        let path = out.join(format!("{}_{i:03}.csv", spec.kind.name()));
        let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        tr.write_csv(std::io::BufWriter::new(f))?;
        plot.push(Series::new(xy(&tr), GREYS).width(1.0));
    }
    let [lo, hi] = spec.alpha_range;
    plot.push(Series::new(xy(&spec.sample(lo, spec.n_steps)?), BLUE).width(2.0).label(format!("alpha = {lo:.3}")));
    plot.push(Series::new(xy(&spec.sample(hi, spec.n_steps)?), GREEN).width(2.0).label(format!("alpha = {hi:.3}")));
    std::fs::write(out.join(format!("{}.svg", spec.kind.name())), plot.render())?;
    log::info!("wrote {n} trajectories to {}", out.display());
    Ok(())
}

/// Runs `f` over `items` on up to `jobs` threads, keeping results in order.
pub fn fan_out<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Vec<Result<R>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                results.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    results.into_inner().expect("threads joined").into_iter().map(|r| r.expect("every item ran")).collect()
}

fn tag_task(mut ckpt: Checkpoint, task: &TaskConfig) -> Result<Checkpoint> {
    if let Some(m) = ckpt.meta.as_object_mut() {
        m.insert("task".into(), serde_json::to_value(task)?);
    }
    Ok(ckpt)
}

fn train_one(cfg: &RunConfig, task: &Task, seed: u64, out: &Path) -> Result<()> {
    let policy = CheckpointPolicy { dir: Some(out.to_path_buf()), every: cfg.checkpoint_every };
    let (ckpt, losses): (Checkpoint, Vec<LossRecord>) = match cfg.agent {
        AgentKind::Dati => {
            let o = train_dati(task, cfg.dati.clone(), seed, &policy)?;
            let steps = o.transitions as u64;
            (o.agent.checkpoint(None, steps, seed), o.losses)
        }
        AgentKind::DdpgTi => {
            let o = train_ddpg(task, cfg.ddpg.clone(), seed, &policy)?;
            (o.agent.checkpoint(0, seed), o.losses)
        }
        AgentKind::Bc => {
            let o = train_bc(task, cfg.bc.clone(), seed)?;
            (o.agent.checkpoint(0, seed), o.losses)
        }
    };
    let name = cfg.agent.name();
    tag_task(ckpt, &cfg.task)?.save(&out.join(format!("{name}_seed{seed}.json")))?;
    write_losses(&out.join(format!("losses_{name}_seed{seed}.csv")), &losses)?;
    log::info!("{name} seed {seed} done");
    Ok(())
}

pub fn train(mut cfg: RunConfig, jobs: usize) -> Result<PathBuf> {
    cfg.resolve()?;
    let out = config::out_dir(cfg.out.as_deref(), "runs/train");
    create_dir(&out)?;
    write_json(&out.join(RESOLVED_NAME), &cfg)?;
    let task = cfg.task.build()?;
    let failures: Vec<String> = fan_out(&cfg.seeds, jobs, |&seed| train_one(&cfg, &task, seed, &out))
        .into_iter()
        .zip(&cfg.seeds)
        .filter_map(|(r, s)| r.err().map(|e| format!("seed {s}: {e:#}")))
        .collect();
    if !failures.is_empty() {
        bail!("training failed for {} seed(s): {}", failures.len(), failures.join("; "));
    }
    Ok(out)
}

fn checkpoint_task(ckpt: &Checkpoint, path: &Path, fallback: Option<&TaskConfig>) -> Result<TaskConfig> {
    if let Some(t) = ckpt.meta.get("task") {
        return serde_json::from_value(t.clone()).context("checkpoint task");
    }
    if let Some(t) = fallback {
        return Ok(t.clone());
    }
    let resolved = path.parent().unwrap_or(Path::new(".")).join(RESOLVED_NAME);
    if resolved.exists() {
        let c: RunConfig = config::load(&resolved)?;
        return Ok(c.task);
    }
    Err(anyhow!("{} names no task; pass --config", path.display()))
}

fn collect_checkpoints(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    let name = f.file_name().and_then(|n| n.to_str()).unwrap_or("");
                    name.ends_with(".json") && name != RESOLVED_NAME && !name.contains("_ep") && !name.contains("diverged")
                })
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no checkpoints found");
    }
    Ok(out)
}

#[derive(Debug, serde::Serialize)]
struct EvalSummary {
    family: String,
    agent: String,
    best: Option<f64>,
    per_seed_best: Vec<(u64, f64)>,
    /// Normalized DTW per seed (rows) and reference (columns).
    matrix: Vec<Vec<f64>>,
}

pub fn eval(paths: &[PathBuf], refs: u64, seeds: usize, config_path: Option<&Path>, out: Option<&Path>) -> Result<PathBuf> {
    let fallback = match config_path {
        Some(p) => Some(config::load::<RunConfig>(p)?.task),
        None => None,
    };
    let files = collect_checkpoints(paths)?;
    let mut loaded = Vec::new();
    for f in &files {
        let ckpt = Checkpoint::load(f).with_context(|| format!("loading {}", f.display()))?;
        let task_cfg = checkpoint_task(&ckpt, f, fallback.as_ref())?;
        let seed = ckpt.meta.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
        loaded.push((seed, ckpt, task_cfg));
    }
    loaded.sort_by_key(|(s, _, _)| *s);
    let family = loaded[0].2.family.clone();
    if loaded.iter().any(|(_, _, t)| t != &loaded[0].2) {
        bail!("checkpoints were trained on different tasks");
    }
    let task = loaded[0].2.build()?;
    // one checkpoint: several evaluation seeds; many: one seed each
    let jobs: Vec<(u64, usize)> = if loaded.len() == 1 {
        (0..seeds.max(1) as u64).map(|j| (loaded[0].0 + j, 0)).collect()
    } else {
        loaded.iter().enumerate().take(seeds.max(1)).map(|(i, (s, _, _))| (*s, i)).collect()
    };
    let agents = loaded
        .iter()
        .map(|(_, c, _)| SavedAgent::from_checkpoint(&task, c).map_err(anyhow::Error::from))
        .collect::<Result<Vec<_>>>()?;
    let mut report = EvalReport::default();
    for &(seed, i) in &jobs {
        report.merge(evaluate(&task, agents[i].policy().as_mut(), seed, refs)?);
    }
    let out = config::out_dir(out, "runs/eval");
    create_dir(&out)?;
    write_eval(&out.join("eval.csv"), &report)?;
    let matrix = jobs
        .iter()
        .map(|(s, _)| report.rows.iter().filter(|r| r.seed == *s).map(|r| r.norm_dtw).collect())
        .collect();
    let summary = EvalSummary {
        family: family.clone(),
        agent: agents[0].kind().to_string(),
        best: report.best(),
        per_seed_best: report.per_seed_best(),
        matrix,
    };
    write_json(&out.join("report.json"), &summary)?;
    // overlay of the best seed's rollouts on its references
    if let Some(best) = report.rows.iter().min_by(|a, b| a.norm_dtw.total_cmp(&b.norm_dtw)) {
        let (seed, i) = *jobs.iter().find(|(s, _)| *s == best.seed).expect("row from a job");
        let mut plot = Plot::new(format!("{family}: {} seed {seed}", agents[i].kind()));
        for r in 0..refs {
            let reference = task.source.eval(seed, r)?;
            let mut rng = eval_rng(seed, r);
            let roll = rollout(&task, agents[i].policy().as_mut(), reference.clone(), &mut rng)?;
            let color = if r == best.ref_id { RED } else { BLUE };
            plot.push(Series::new(xy(&reference), GREYS).width(2.5));
            plot.push(Series::new(xy(&roll.trajectory), color).dashed());
        }
        std::fs::write(out.join("overlay.svg"), plot.render())?;
    }
    match summary.best {
        Some(b) => log::info!("best normalized DTW {b:.4}"),
        None => log::warn!("no evaluation rows"),
    }
    Ok(out)
}

pub fn ablate_cmd(mut cfg: RunConfig, variant: Variant) -> Result<PathBuf> {
    cfg.resolve()?;
    if cfg.task.family != "circles" {
        log::warn!("ablations are defined on circles; running on `{}`", cfg.task.family);
    }
    let out = config::out_dir(cfg.out.as_deref(), "runs/ablate");
    create_dir(&out)?;
    write_json(&out.join(RESOLVED_NAME), &cfg)?;
    let task = cfg.task.build()?;
    let r = ablate(&task, &cfg.dati, variant, &cfg.seeds, cfg.eval_refs)?;
    write_eval(&out.join(format!("eval_{}.csv", variant.name())), &r.report)?;
    let mut w = csv::Writer::from_path(out.join(format!("ablation_{}.csv", variant.name())))?;
    w.write_record(["variant", "top1", "top2"])?;
    let f = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    w.write_record([variant.name().to_string(), f(r.top1), f(r.top2)])?;
    w.flush()?;
    log::info!("{}: top-1 {:?}, top-2 {:?}", variant.name(), r.top1, r.top2);
    Ok(out)
}
