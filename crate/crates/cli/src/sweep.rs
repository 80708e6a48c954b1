use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use nonsplit::scenario::{parse_scenario, run_scenario, write_records, Scenario};
use nonsplit::topology::Ratio;

pub const WORKERS_ENV: &str = "NONSPLIT_WORKERS";

struct Job {
    label: String,
    scenario: Scenario,
    defaults: Vec<String>,
    dir: PathBuf,
}

fn worker_count(flag: Option<usize>, jobs: usize) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .with_context(|| format!("{WORKERS_ENV}=`{v}` is not a positive integer"))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        bail!("worker count must be at least 1");
    }
    Ok(n.min(jobs.max(1)))
}

fn plan(paths: &[PathBuf], out: &Path, ratios: &[String]) -> Result<Vec<Job>> {
    if paths.is_empty() {
        bail!("no scenario given");
    }
    let ratios: Vec<Option<Ratio>> = if ratios.is_empty() {
        vec![None]
    } else {
        ratios.iter().map(|r| r.parse().map(Some)).collect::<nonsplit::Result<_>>()?
    };
    let single = paths.len() == 1 && ratios.len() == 1;
    let mut jobs = Vec::new();
    for path in paths {
        let parsed = parse_scenario(path).with_context(|| format!("reading {}", path.display()))?;
        let sc = &parsed.scenario;
        if sc.sources.is_empty() || sc.probes.is_empty() {
            bail!("{}: `run` needs at least one source and one probe", path.display());
        }
        let stem = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
        for r in &ratios {
            let mut sc = sc.clone();
            let mut label = stem.clone();
            if let Some(r) = r {
                if sc.regions.is_empty() {
                    bail!("{}: --ratio given but the scenario has no blocks", path.display());
                }
                sc.regions.iter_mut().for_each(|reg| reg.ratio = *r);
                label = format!("{stem}_r{}-{}", r.coarse, r.fine);
            }
            let dir = if single { out.to_path_buf() } else { out.join(&label) };
            jobs.push(Job {
                label,
                scenario: sc,
                defaults: parsed.defaults.clone(),
                dir,
            });
        }
    }
    Ok(jobs)
}

fn execute(job: &Job, force: bool) -> Result<String> {
    let t = Instant::now();
    let out = run_scenario(&job.scenario)?;
    let secs = t.elapsed().as_secs_f64();
    write_records(&job.dir, &job.scenario, &out, &job.defaults, secs, force)?;
    let mut line = format!(
        "{}: {} steps, dt {:.4e} s, {:.1} s -> {}",
        job.label,
        out.records.info.steps,
        out.records.info.dt,
        secs,
        job.dir.display()
    );
    if let (Some(r), Some(cut)) = (&out.reflection, job.scenario.source_cutoff()) {
        if let Some(db) = r.max_db_below(0.8 * cut) {
            line.push_str(&format!(", max |S11| {db:.1} dB up to 0.8 cutoff"));
        }
    }
    Ok(line)
}

pub fn run(paths: &[PathBuf], out: &Path, force: bool, ratios: &[String], jobs: Option<usize>) -> Result<()> {
    let plan = plan(paths, out, ratios)?;
    if plan.len() > 1 && out.exists() && std::fs::read_dir(out)?.next().is_some() && !force {
        bail!("{} already exists and is not empty; pass --force to overwrite", out.display());
    }
    let workers = worker_count(jobs, plan.len())?;
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(usize, Result<String>)>> = Mutex::new(Vec::new());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = plan.get(k) else { break };
                let r = execute(job, force);
                results.lock().expect("result lock").push((k, r));
            });
        }
    });
    let mut results = results.into_inner().expect("result lock");
    results.sort_by_key(|(k, _)| *k);
    let mut failed = 0;
    for (k, r) in results {
        match r {
            Ok(line) => println!("{line}"),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e:#}", plan[k].label);
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} runs failed", plan.len());
    }
    Ok(())
}
