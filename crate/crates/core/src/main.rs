use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use revo::harness::config::REEVAL_SEED_OFFSET;
use revo::harness::eval::{read_eval_csv, write_episodes_csv, write_eval_csv, BEST_MAX_FAILURE_RATE};
use revo::harness::plots::{plot_profiles, plot_scale};
use revo::harness::scale::{read_scale_csv, write_scale_csv};
use revo::harness::single_path::{profile_rows, read_profile_csv, write_profile_csv};
use revo::harness::train::list_checkpoints;
use revo::harness::{
    emit_plots, evaluate_checkpoint, select_best, single_path_study, train, vod_scale_experiment, EvalReport, EvalSet,
    RunCurve, TrainConfig, DEFAULT_FACTORS,
};
use revo::nn::load_checkpoint;
use revo::paths::{generate_random_path, Path};
use revo::planner::{time_optimal_profile, Vod};
use revo::rl::{drive, run_policy, write_trace_csv, PolicyMode};

#[derive(Parser)]
#[command(name = "revo", version, about = "Time-optimal velocity planning and learning for path-following vehicles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Policy architecture: revo, revo-a or revo-f.
    #[arg(long)]
    mode: Option<PolicyMode>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn config(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
            None => TrainConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&FsPath> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random path and write it as `path.csv`.
    GenPath {
        #[command(flatten)]
        common: Common,
        /// Path length (m).
        #[arg(long)]
        length: Option<f64>,
    },
    /// Compute the time-optimal profile for a path file, from rest to rest.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Path CSV with header `x,y`.
        #[arg(long)]
        path: PathBuf,
    },
    /// Drive the planner or a checkpoint along a path and dump the trajectory.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Path CSV; a random path from `--seed` when omitted.
        #[arg(long)]
        path: Option<PathBuf>,
        /// Policy checkpoint; the planner drives when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Planner velocity scale factor.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Train policies, then evaluate every checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Gradient updates per run (overrides the config).
        #[arg(long)]
        total_updates: Option<u64>,
        /// Updates between checkpoints (overrides the config).
        #[arg(long)]
        checkpoint_every: Option<u64>,
        /// Number of consecutive seeds to train, starting at `--seed`.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Skip checkpoint evaluation.
        #[arg(long)]
        no_eval: bool,
    },
    /// Evaluate a checkpoint or every checkpoint of a run directory.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Single checkpoint file.
        #[arg(long, conflicts_with = "run")]
        checkpoint: Option<PathBuf>,
        /// Run directory written by `train`.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Number of evaluation paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Re-evaluate the best checkpoint on 1000 fresh paths.
        #[arg(long)]
        reeval_best: bool,
    },
    /// Failure rate of the planner with scaled-up velocities.
    ScaleExp {
        #[command(flatten)]
        common: Common,
        /// Number of evaluation paths.
        #[arg(long, default_value_t = 100)]
        paths: usize,
        /// Comma-separated scale factors.
        #[arg(long, value_delimiter = ',')]
        factors: Option<Vec<f64>>,
    },
    /// Train on one fixed path and dump velocity profiles at snapshot episodes.
    SinglePath {
        #[command(flatten)]
        common: Common,
        /// Path CSV; a random path from `--seed` when omitted.
        #[arg(long)]
        path: Option<PathBuf>,
        /// Comma-separated episode counts.
        #[arg(long, value_delimiter = ',', default_value = "0,50,100,155,200")]
        snapshots: Vec<u64>,
    },
    /// Render SVG/CSV plots from run directories and experiment outputs.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Directories holding `eval.csv`, `scale.csv` or `profiles.csv`, or parents of such directories.
        #[arg(long, num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn read_path(file: &FsPath) -> Result<Path> {
    let f = File::open(file).with_context(|| format!("opening {}", file.display()))?;
    Ok(Path::read_csv(f).with_context(|| format!("reading {}", file.display()))?)
}

fn path_or_random(file: Option<&PathBuf>, cfg: &TrainConfig) -> Result<Path> {
    match file {
        Some(f) => read_path(f),
        None => Ok(generate_random_path(&cfg.path_gen.with_seed(cfg.seed))),
    }
}

fn create(path: &FsPath) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn gen_path(common: &Common, length: Option<f64>) -> Result<()> {
    let mut cfg = common.config()?;
    if let Some(l) = length {
        cfg.path_gen.target_length = l;
        cfg.path_gen.validate(cfg.vehicle.r_min)?;
    }
    let path = generate_random_path(&cfg.path_gen.with_seed(cfg.seed));
    let file = common.out_dir()?.join("path.csv");
    path.write_csv(create(&file)?)?;
    println!(
        "wrote {} ({} points, {:.1} m, max |curvature| {:.4})",
        file.display(),
        path.len(),
        path.length(),
        path.max_abs_curvature()
    );
    Ok(())
}

fn plan(common: &Common, path_file: &FsPath) -> Result<()> {
    let cfg = common.config()?;
    let path = read_path(path_file)?;
    let profile = time_optimal_profile(&path, 0.0, 0.0, &cfg.vehicle);
    let file = common.out_dir()?.join("profile.csv");
    profile.write_csv(create(&file)?)?;
    println!("wrote {} (traversal time {:.3} s)", file.display(), profile.traversal_time());
    Ok(())
}

fn simulate(common: &Common, path_file: Option<&PathBuf>, checkpoint: Option<&PathBuf>, scale: f64) -> Result<()> {
    let cfg = common.config()?;
    if !(scale > 0.0) {
        bail!("--scale must be positive");
    }
    let path = path_or_random(path_file, &cfg)?;
    let p = cfg.vehicle;
    let vod = Vod::scaled(p, scale);
    let record = match checkpoint {
        Some(c) => {
            let (ckpt, manifest) = load_checkpoint(c).with_context(|| format!("loading {}", c.display()))?;
            let mode: PolicyMode = manifest.mode.parse()?;
            let actor = ckpt.networks.first().context("checkpoint holds no actor")?;
            if actor.input_size() != mode.state_dim() {
                bail!("actor input {} does not fit mode {mode}", actor.input_size());
            }
            run_policy(mode, actor, &path, &p, cfg.dt, cfg.episode_steps, vod)
        }
        None => drive(&path, &p, cfg.dt, cfg.episode_steps, vod, |o| o.tau_vod),
    };
    let file = common.out_dir()?.join("trace.csv");
    write_trace_csv(&record.trace, create(&file)?)?;
    println!(
        "wrote {}: steps {} avg_v {:.3} m/s outcome {}",
        file.display(),
        record.steps,
        record.avg_v,
        record.cause
    );
    Ok(())
}

fn write_reports(dir: &FsPath, reports: &[EvalReport], set: &EvalSet) -> Result<Vec<revo::harness::EvalRow>> {
    let rows: Vec<_> = reports.iter().map(EvalReport::row).collect();
    write_eval_csv(&rows, create(&dir.join("eval.csv"))?)?;
    write_episodes_csv(reports, &set.vod, create(&dir.join("eval_episodes.csv"))?)?;
    let best = select_best(&rows, BEST_MAX_FAILURE_RATE);
    let text = match best {
        Some(i) => format!(
            "updates = {}\nmean_velocity = {}\nnormalized = {}\nfailure_rate = {}\n",
            rows[i].updates, rows[i].mean_velocity, rows[i].normalized, rows[i].failure_rate
        ),
        None => "# no checkpoint meets the failure-rate ceiling\n".to_string(),
    };
    fs::write(dir.join("best.toml"), text)?;
    Ok(rows)
}

fn evaluate_run(dir: &FsPath, cfg: &TrainConfig, set: &EvalSet) -> Result<Vec<EvalReport>> {
    let checkpoints = list_checkpoints(dir).with_context(|| format!("listing checkpoints in {}", dir.display()))?;
    if checkpoints.is_empty() {
        bail!("no checkpoints in {}", dir.display());
    }
    checkpoints
        .iter()
        .map(|c| evaluate_checkpoint(c, cfg, set).with_context(|| format!("evaluating {}", c.display())))
        .collect()
}

fn print_rows(rows: &[revo::harness::EvalRow]) {
    for r in rows {
        println!(
            "updates {:>6}  mean_v {:7.3}  normalized {:6.3}  failure_rate {:5.3}",
            r.updates, r.mean_velocity, r.normalized, r.failure_rate
        );
    }
}

fn run_train(common: &Common, total: Option<u64>, every: Option<u64>, seeds: u64, no_eval: bool) -> Result<()> {
    let mut base = common.config()?;
    if let Some(t) = total {
        base.total_updates = t;
    }
    if let Some(e) = every {
        base.checkpoint_every = e;
    }
    base.validate()?;
    if seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let out = common.out_dir()?;
    let set = (!no_eval).then(|| EvalSet::new(&base, base.eval_paths));
    let mut curves = Vec::new();
    for k in 0..seeds {
        let cfg = TrainConfig {
            seed: base.seed + k,
            ..base
        };
        let dir = out.join(format!("{}_seed{}", cfg.mode, cfg.seed));
        let outcome = train(&cfg, &dir).with_context(|| format!("training into {}", dir.display()))?;
        println!(
            "{}: {} episodes, {} updates, {} checkpoints",
            dir.display(),
            outcome.episodes,
            outcome.updates,
            outcome.checkpoints.len()
        );
        if let Some(set) = &set {
            let reports = evaluate_run(&dir, &cfg, set)?;
            let rows = write_reports(&dir, &reports, set)?;
            print_rows(&rows);
            curves.push(RunCurve {
                label: cfg.mode.to_string(),
                seed: cfg.seed,
                rows,
            });
        }
    }
    emit_plots(&curves, &out.join("plots"))?;
    Ok(())
}

fn run_eval(common: &Common, checkpoint: Option<&PathBuf>, run: Option<&PathBuf>, paths: Option<usize>, reeval: bool) -> Result<()> {
    let mut cfg = match (run, &common.config) {
        (Some(dir), None) if dir.join("config.toml").exists() => TrainConfig::load(&dir.join("config.toml"))?,
        _ => common.config()?,
    };
    if let Some(s) = common.seed {
        cfg.eval_seed = s;
    }
    let n = paths.unwrap_or(cfg.eval_paths);
    if n == 0 {
        bail!("--paths must be positive");
    }
    let out = common.out_dir()?;
    let set = EvalSet::new(&cfg, n);
    let reports = match (checkpoint, run) {
        (Some(c), _) => vec![evaluate_checkpoint(c, &cfg, &set).with_context(|| format!("evaluating {}", c.display()))?],
        (None, Some(dir)) => evaluate_run(dir, &cfg, &set)?,
        (None, None) => bail!("pass --checkpoint <file> or --run <dir>"),
    };
    let rows = write_reports(out, &reports, &set)?;
    print_rows(&rows);
    if reeval {
        let Some(best) = select_best(&rows, BEST_MAX_FAILURE_RATE) else {
            bail!("no checkpoint meets the failure-rate ceiling of {BEST_MAX_FAILURE_RATE}");
        };
        let file = match (checkpoint, run) {
            (Some(c), _) => c.clone(),
            (None, Some(dir)) => list_checkpoints(dir)?[best].clone(),
            _ => unreachable!(),
        };
        let fresh_cfg = TrainConfig {
            eval_seed: cfg.eval_seed + REEVAL_SEED_OFFSET,
            ..cfg
        };
        let fresh = EvalSet::new(&fresh_cfg, 1000);
        let report = evaluate_checkpoint(&file, &fresh_cfg, &fresh)?;
        write_eval_csv(&[report.row()], create(&out.join("best_reeval.csv"))?)?;
        println!("best checkpoint {} on 1000 fresh paths:", file.display());
        print_rows(&[report.row()]);
    }
    Ok(())
}

fn scale_exp(common: &Common, paths: usize, factors: Option<&Vec<f64>>) -> Result<()> {
    let mut cfg = common.config()?;
    if let Some(s) = common.seed {
        cfg.eval_seed = s;
    }
    let factors: Vec<f64> = factors.cloned().unwrap_or_else(|| DEFAULT_FACTORS.to_vec());
    if paths == 0 || factors.iter().any(|f| !(*f > 0.0)) {
        bail!("--paths and every factor must be positive");
    }
    let points = vod_scale_experiment(&cfg, &factors, paths);
    let out = common.out_dir()?;
    write_scale_csv(&points, create(&out.join("scale.csv"))?)?;
    plot_scale(&points, out)?;
    for p in &points {
        println!("factor {:.2}  failure_rate {:.3}  mean_v {:.3}", p.factor, p.failure_rate, p.mean_velocity);
    }
    Ok(())
}

fn single_path(common: &Common, path_file: Option<&PathBuf>, snapshots: &[u64]) -> Result<()> {
    let cfg = common.config()?;
    let path = path_or_random(path_file, &cfg)?;
    let modes = match common.mode {
        Some(m) => vec![m],
        None => vec![PolicyMode::Revo, PolicyMode::RevoF],
    };
    let mut rows = Vec::new();
    for mode in modes {
        let snaps = single_path_study(&cfg, mode, &path, snapshots)?;
        for s in &snaps {
            println!(
                "{mode} episode {:>4}  updates {:>6}  avg_v {:.3}  gap to planner {:.3}",
                s.episode,
                s.updates,
                s.policy.avg_v,
                s.velocity_gap()
            );
        }
        rows.extend(profile_rows(mode, &snaps));
    }
    let out = common.out_dir()?;
    write_profile_csv(&rows, create(&out.join("profiles.csv"))?)?;
    plot_profiles(&rows, out)?;
    Ok(())
}

fn collect_dirs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for d in inputs {
        if !d.is_dir() {
            bail!("{} is not a directory", d.display());
        }
        dirs.push(d.clone());
        let mut subs: Vec<PathBuf> = fs::read_dir(d)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        subs.sort();
        dirs.extend(subs);
    }
    Ok(dirs)
}

fn plot(common: &Common, inputs: &[PathBuf]) -> Result<()> {
    let out = common.out.clone();
    let mut curves = Vec::new();
    let mut written = Vec::new();
    for dir in collect_dirs(inputs)? {
        let eval = dir.join("eval.csv");
        if eval.exists() {
            let rows = read_eval_csv(File::open(&eval)?).with_context(|| format!("reading {}", eval.display()))?;
            let cfg_file = dir.join("config.toml");
            let (label, seed) = if cfg_file.exists() {
                let c = TrainConfig::load(&cfg_file)?;
                (c.mode.to_string(), c.seed)
            } else {
                (dir.file_name().map_or("run".into(), |n| n.to_string_lossy().into_owned()), 0)
            };
            curves.push(RunCurve { label, seed, rows });
        }
        let scale = dir.join("scale.csv");
        if scale.exists() {
            written.extend(plot_scale(&read_scale_csv(File::open(&scale)?)?, &out)?);
        }
        let profiles = dir.join("profiles.csv");
        if profiles.exists() {
            written.extend(plot_profiles(&read_profile_csv(File::open(&profiles)?)?, &out)?);
        }
    }
    written.extend(emit_plots(&curves, &out)?);
    for f in &written {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenPath { common, length } => gen_path(common, *length),
        Command::Plan { common, path } => plan(common, path),
        Command::Simulate {
            common,
            path,
            checkpoint,
            scale,
        } => simulate(common, path.as_ref(), checkpoint.as_ref(), *scale),
        Command::Train {
            common,
            total_updates,
            checkpoint_every,
            seeds,
            no_eval,
        } => run_train(common, *total_updates, *checkpoint_every, *seeds, *no_eval),
        Command::Eval {
            common,
            checkpoint,
            run,
            paths,
            reeval_best,
        } => run_eval(common, checkpoint.as_ref(), run.as_ref(), *paths, *reeval_best),
        Command::ScaleExp { common, paths, factors } => scale_exp(common, *paths, factors.as_ref()),
        Command::SinglePath {
            common,
            path,
            snapshots,
        } => single_path(common, path.as_ref(), snapshots),
        Command::Plot { common, inputs } => plot(common, inputs),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
