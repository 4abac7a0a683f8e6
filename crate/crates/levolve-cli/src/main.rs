//! Command-line front end for the level-evolution toolkit.
//!
//! Every subcommand resolves its settings as flags > config file > built-in
//! defaults, writes a manifest.json echoing the fully resolved values into
//! its output directory, and is output-reproducible for a fixed seed.
//!
//! Exit codes: 0 success, 2 usage/bad input, 3 I/O or unreadable file,
//! 4 numeric failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::json;

use levolve::cmaes::{write_history_csv, CmaConfig, CmaError};
use levolve::corpus::{
    self, encode_window, load_level_file, slide_windows, CorpusError, TileGrid,
};
use levolve::fitness::{
    agent_cma_config, evolve_agent, evolve_ground, evolve_segmented_level, f_ground,
    measure_ground, parse_plan, write_fitness_log, AgentObjective, FitnessError, JumpGoal,
    LevelSimulator,
};
use levolve::gan::{
    load_model, save_model, wgan_train, GanError, Generator, TrainConfig, LATENT_DIM,
};
use levolve::render::{to_image, Palette};
use levolve::sim::{astar_plan, EnemyTimeline, SimResult, Simulation, Status, World};

#[derive(Parser)]
#[command(
    name = "levolve",
    version,
    about = "Train a level generator, evolve its latent space, simulate the results"
)]
struct Cli {
    /// Plain key=value settings file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Threads for fitness evaluation (1 = fully serial reference behavior).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train the generator on a tile-text level file.
    Train {
        /// Level file in tile-symbol text form.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Generator updates (each preceded by the critic updates).
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        critic_steps: Option<usize>,
        /// Critic weight-clip bound.
        #[arg(long)]
        clip: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Decode levels from a trained model: random latents or a given one.
    Generate {
        #[arg(long)]
        model: Option<PathBuf>,
        /// How many random levels to sample (ignored with --latent).
        #[arg(long)]
        count: Option<usize>,
        /// File of 32 whitespace-separated numbers.
        #[arg(long)]
        latent: Option<PathBuf>,
        /// ascii | image | both
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Jitter a latent vector with uniform noise and render the offspring.
    Mutate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        latent: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        /// Noise range: each component moves by U(-radius, radius).
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search the latent space for a level optimizing a fitness function.
    Evolve {
        #[arg(long)]
        model: Option<PathBuf>,
        /// ground | segments | jumps-max | jumps-min
        #[arg(long)]
        fitness: Option<String>,
        /// Ground-coverage target for --fitness ground.
        #[arg(long)]
        target: Option<f64>,
        /// Segment plan for --fitness segments, e.g. 1.0,1.0,0.7,0.7e,0.7e
        #[arg(long)]
        plan: Option<String>,
        #[arg(long)]
        evals: Option<usize>,
        #[arg(long)]
        lambda: Option<usize>,
        #[arg(long)]
        sigma0: Option<f64>,
        /// Simulations averaged per agent-based evaluation.
        #[arg(long)]
        repeats: Option<usize>,
        /// Base seed for the per-run simulator seeds.
        #[arg(long)]
        sim_seed: Option<u64>,
        #[arg(long)]
        jump_cap: Option<u32>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the playthrough agent on a level file and report the outcomes.
    Simulate {
        #[arg(long)]
        level: Option<PathBuf>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the default of 100 ticks per level-width tile.
        #[arg(long)]
        tick_limit: Option<u32>,
        #[arg(long)]
        jump_cap: Option<u32>,
        /// Also write a per-tick trace of the first run.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a level file to an image (and optionally ASCII to stdout).
    Render {
        #[arg(long)]
        level: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Echo the level as text to stdout too.
        #[arg(long)]
        ascii: bool,
    },
}

enum CliError {
    Usage(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<GanError> for CliError {
    fn from(e: GanError) -> Self {
        match e {
            GanError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<FitnessError> for CliError {
    fn from(e: FitnessError) -> Self {
        match e {
            FitnessError::EmptyPlan | FitnessError::BadPlan(_) => CliError::Usage(e.to_string()),
            FitnessError::Cma(c) => CliError::from(c),
            FitnessError::Gan(g) => CliError::from(g),
            FitnessError::Io(io) => CliError::Io(io.to_string()),
        }
    }
}

impl From<CmaError> for CliError {
    fn from(e: CmaError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> Self {
        CliError::Io(e.to_string())
    }
}

/// key=value settings from --config, '#' comments allowed.
struct Settings(BTreeMap<String, String>);

impl Settings {
    fn load(path: Option<&Path>) -> Result<Settings, CliError> {
        let mut map = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
            for (ln, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!("config line {}: expected key=value", ln + 1))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Settings(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))
            }),
        }
    }
}

/// flags > config file > default.
fn resolve<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &Settings,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg.get(key)?.unwrap_or(default)),
    }
}

fn resolve_required<T: FromStr + Clone>(
    flag: Option<T>,
    cfg: &Settings,
    key: &str,
) -> Result<T, CliError> {
    match flag {
        Some(v) => Ok(v),
        None => cfg
            .get(key)?
            .ok_or_else(|| CliError::Usage(format!("missing required --{key}"))),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("create {}: {e}", dir.display())))
}

fn write_manifest(
    dir: &Path,
    command: &str,
    resolved: serde_json::Value,
    outputs: &[String],
) -> Result<(), CliError> {
    let manifest = json!({
        "command": command,
        "resolved": resolved,
        "outputs": outputs,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(())
}

fn read_latent(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("latent {}: {e}", path.display())))?;
    let vals: Result<Vec<f64>, _> = text.split_whitespace().map(f64::from_str).collect();
    let vals =
        vals.map_err(|e| CliError::Usage(format!("latent {}: {e}", path.display())))?;
    if vals.len() != LATENT_DIM {
        return Err(CliError::Usage(format!(
            "latent {}: expected {} values, found {}",
            path.display(),
            LATENT_DIM,
            vals.len()
        )));
    }
    Ok(vals)
}

fn write_latent(path: &Path, z: &[f64]) -> Result<(), CliError> {
    let text: Vec<String> = z.iter().map(|v| format!("{v}")).collect();
    std::fs::write(path, text.join(" ") + "\n")?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Ascii,
    Image,
    Both,
}

impl Format {
    fn parse(s: &str) -> Result<Format, CliError> {
        match s {
            "ascii" => Ok(Format::Ascii),
            "image" => Ok(Format::Image),
            "both" => Ok(Format::Both),
            other => Err(CliError::Usage(format!(
                "--format {other}: expected ascii, image or both"
            ))),
        }
    }
}

/// Write one level under `dir` in the requested formats; returns filenames.
fn emit_level(
    dir: &Path,
    stem: &str,
    grid: &TileGrid,
    format: Format,
) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    if format != Format::Image {
        let name = format!("{stem}.txt");
        std::fs::write(dir.join(&name), corpus::render_vglc(grid))?;
        written.push(name);
    }
    if format != Format::Ascii {
        let name = format!("{stem}.png");
        to_image(grid, &Palette::default(), &dir.join(&name))?;
        written.push(name);
    }
    Ok(written)
}

fn load_generator(path: &Path) -> Result<Generator, CliError> {
    load_model(path).map_err(CliError::from)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = Settings::load(cli.config.as_deref())?;
    let workers = resolve(cli.workers, &cfg, "workers", 1usize)?;
    if workers > 1 {
        // Size the shared pool once; fitness drivers use it when workers > 1.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    match cli.cmd {
        Cmd::Train {
            corpus,
            out_dir,
            iterations,
            batch_size,
            lr,
            critic_steps,
            clip,
            seed,
        } => {
            let corpus_path: PathBuf = resolve_required(corpus, &cfg, "corpus")?;
            let out_dir = resolve(out_dir, &cfg, "out_dir", PathBuf::from("runs/train"))?;
            let tc = TrainConfig {
                iterations: resolve(iterations, &cfg, "iterations", 5000)?,
                batch_size: resolve(batch_size, &cfg, "batch_size", 32)?,
                lr: resolve(lr, &cfg, "lr", 0.00005)?,
                critic_steps: resolve(critic_steps, &cfg, "critic_steps", 5)?,
                clip: resolve(clip, &cfg, "clip", 0.01)?,
                seed: resolve(seed, &cfg, "seed", 0)?,
            };
            cmd_train(&corpus_path, &out_dir, tc)
        }
        Cmd::Generate { model, count, latent, format, out_dir, seed } => {
            let model: PathBuf = resolve_required(model, &cfg, "model")?;
            let out_dir = resolve(out_dir, &cfg, "out_dir", PathBuf::from("runs/generate"))?;
            let count = resolve(count, &cfg, "count", 1usize)?;
            let format = Format::parse(&resolve(format, &cfg, "format", "both".to_string())?)?;
            let seed = resolve(seed, &cfg, "seed", 0u64)?;
            let latent = match latent {
                Some(p) => Some(p),
                None => cfg.get::<PathBuf>("latent")?,
            };
            cmd_generate(&model, count, latent.as_deref(), format, &out_dir, seed)
        }
        Cmd::Mutate { model, latent, count, radius, format, out_dir, seed } => {
            let model: PathBuf = resolve_required(model, &cfg, "model")?;
            let latent: PathBuf = resolve_required(latent, &cfg, "latent")?;
            let out_dir = resolve(out_dir, &cfg, "out_dir", PathBuf::from("runs/mutate"))?;
            let count = resolve(count, &cfg, "count", 10usize)?;
            let radius = resolve(radius, &cfg, "radius", 0.3)?;
            let format = Format::parse(&resolve(format, &cfg, "format", "both".to_string())?)?;
            let seed = resolve(seed, &cfg, "seed", 0u64)?;
            cmd_mutate(&model, &latent, count, radius, format, &out_dir, seed)
        }
        Cmd::Evolve {
            model,
            fitness,
            target,
            plan,
            evals,
            lambda,
            sigma0,
            repeats,
            sim_seed,
            jump_cap,
            out_dir,
            seed,
        } => {
            let model: PathBuf = resolve_required(model, &cfg, "model")?;
            let fitness: String = resolve_required(fitness, &cfg, "fitness")?;
            let out_dir = resolve(out_dir, &cfg, "out_dir", PathBuf::from("runs/evolve"))?;
            let args = EvolveArgs {
                target: resolve(target, &cfg, "target", 0.7)?,
                plan: resolve(plan, &cfg, "plan", "1.0,1.0,0.7,0.7e,0.7e".to_string())?,
                evals: resolve(evals, &cfg, "evals", 1000usize)?,
                lambda: match lambda {
                    Some(l) => Some(l),
                    None => cfg.get("lambda")?,
                },
                sigma0: match sigma0 {
                    Some(s) => Some(s),
                    None => cfg.get("sigma0")?,
                },
                repeats: resolve(repeats, &cfg, "repeats", 10usize)?,
                sim_seed: resolve(sim_seed, &cfg, "sim_seed", 0u64)?,
                jump_cap: resolve(jump_cap, &cfg, "jump_cap", 50u32)?,
                seed: resolve(seed, &cfg, "seed", 0u64)?,
                workers,
            };
            cmd_evolve(&model, &fitness, &args, &out_dir)
        }
        Cmd::Simulate { level, runs, seed, tick_limit, jump_cap, trace, out_dir } => {
            let level: PathBuf = resolve_required(level, &cfg, "level")?;
            let out_dir = resolve(out_dir, &cfg, "out_dir", PathBuf::from("runs/simulate"))?;
            let runs = resolve(runs, &cfg, "runs", 10usize)?;
            let seed = resolve(seed, &cfg, "seed", 0u64)?;
            let tick_limit = match tick_limit {
                Some(t) => Some(t),
                None => cfg.get("tick_limit")?,
            };
            let jump_cap = resolve(jump_cap, &cfg, "jump_cap", 50u32)?;
            cmd_simulate(&level, runs, seed, tick_limit, jump_cap, trace, &out_dir)
        }
        Cmd::Render { level, out, ascii } => {
            let level: PathBuf = resolve_required(level, &cfg, "level")?;
            let grid = load_level_file(&level)?;
            if ascii {
                print!("{}", corpus::render_vglc(&grid));
            }
            let out = match out {
                Some(o) => o,
                None => level.with_extension("png"),
            };
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                ensure_dir(parent)?;
            }
            to_image(&grid, &Palette::default(), &out)?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn cmd_train(corpus_path: &Path, out_dir: &Path, tc: TrainConfig) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let grid = load_level_file(corpus_path)?;
    let windows: Vec<_> = slide_windows(&grid)?.iter().map(encode_window).collect();
    eprintln!(
        "training on {} windows: {} iterations, batch {}, lr {}",
        windows.len(),
        tc.iterations,
        tc.batch_size,
        tc.lr
    );
    let mut logs = Vec::with_capacity(tc.iterations);
    let generator = wgan_train(windows, tc, |log| {
        if log.iteration % 25 == 0 || log.iteration == tc.iterations {
            eprintln!(
                "iter {:>5}  wasserstein {:>9.4}  g-loss {:>9.4}",
                log.iteration, log.wasserstein, log.generator_loss
            );
        }
        logs.push(*log);
    })?;
    let model_path = out_dir.join("model.lgm");
    save_model(&generator, &model_path)?;
    levolve::gan::write_training_log(&out_dir.join("training_log.csv"), &logs)?;
    write_manifest(
        out_dir,
        "train",
        json!({
            "corpus": corpus_path.display().to_string(),
            "iterations": tc.iterations,
            "batch_size": tc.batch_size,
            "lr": tc.lr,
            "critic_steps": tc.critic_steps,
            "clip": tc.clip,
            "seed": tc.seed,
        }),
        &["model.lgm".into(), "training_log.csv".into()],
    )?;
    eprintln!("wrote {}", model_path.display());
    Ok(())
}

fn cmd_generate(
    model_path: &Path,
    count: usize,
    latent: Option<&Path>,
    format: Format,
    out_dir: &Path,
    seed: u64,
) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let model = load_generator(model_path)?;
    let mut outputs = Vec::new();
    match latent {
        Some(latent_path) => {
            let z = read_latent(latent_path)?;
            let grid = model.generate(&z)?;
            outputs.extend(emit_level(out_dir, "level", &grid, format)?);
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..count {
                let z: Vec<f64> =
                    (0..LATENT_DIM).map(|_| rng.sample(StandardNormal)).collect();
                let grid = model.generate(&z)?;
                let stem = format!("level_{i:03}");
                write_latent(&out_dir.join(format!("{stem}.latent.txt")), &z)?;
                outputs.push(format!("{stem}.latent.txt"));
                outputs.extend(emit_level(out_dir, &stem, &grid, format)?);
            }
        }
    }
    write_manifest(
        out_dir,
        "generate",
        json!({
            "model": model_path.display().to_string(),
            "count": count,
            "latent": latent.map(|p| p.display().to_string()),
            "format": match format { Format::Ascii => "ascii", Format::Image => "image", Format::Both => "both" },
            "seed": seed,
        }),
        &outputs,
    )?;
    Ok(())
}

fn cmd_mutate(
    model_path: &Path,
    latent_path: &Path,
    count: usize,
    radius: f64,
    format: Format,
    out_dir: &Path,
    seed: u64,
) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let model = load_generator(model_path)?;
    let parent = read_latent(latent_path)?;
    let mut outputs = Vec::new();
    let parent_grid = model.generate(&parent)?;
    outputs.extend(emit_level(out_dir, "parent", &parent_grid, format)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let child: Vec<f64> = parent
            .iter()
            .map(|&v| if radius > 0.0 { v + rng.gen_range(-radius..radius) } else { v })
            .collect();
        let grid = model.generate(&child)?;
        let stem = format!("mutant_{i:03}");
        write_latent(&out_dir.join(format!("{stem}.latent.txt")), &child)?;
        outputs.push(format!("{stem}.latent.txt"));
        outputs.extend(emit_level(out_dir, &stem, &grid, format)?);
    }
    write_manifest(
        out_dir,
        "mutate",
        json!({
            "model": model_path.display().to_string(),
            "latent": latent_path.display().to_string(),
            "count": count,
            "radius": radius,
            "seed": seed,
        }),
        &outputs,
    )?;
    Ok(())
}

struct EvolveArgs {
    target: f64,
    plan: String,
    evals: usize,
    lambda: Option<usize>,
    sigma0: Option<f64>,
    repeats: usize,
    sim_seed: u64,
    jump_cap: u32,
    seed: u64,
    workers: usize,
}

fn cmd_evolve(
    model_path: &Path,
    fitness: &str,
    args: &EvolveArgs,
    out_dir: &Path,
) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let model = load_generator(model_path)?;
    // Representation-based searches start at the origin with sigma 1;
    // agent-based ones at a random point in [-1,1]^32 with sigma 2.
    let mut cma = match fitness {
        "jumps-max" | "jumps-min" => agent_cma_config(args.seed),
        _ => CmaConfig::new(LATENT_DIM, args.seed),
    };
    cma.max_evals = args.evals;
    if let Some(l) = args.lambda {
        cma.lambda = l;
    }
    if let Some(s) = args.sigma0 {
        cma.sigma0 = s;
    }
    let mut resolved = json!({
        "model": model_path.display().to_string(),
        "fitness": fitness,
        "evals": cma.max_evals,
        "lambda": cma.lambda,
        "sigma0": cma.sigma0,
        "seed": args.seed,
        "workers": args.workers,
    });
    let mut outputs: Vec<String> =
        vec!["best.txt".into(), "best.png".into(), "best_latent.txt".into(), "history.csv".into(), "fitness_log.csv".into()];
    let (best_grid, best_z, best_fitness, rows, history) = match fitness {
        "ground" => {
            resolved["target"] = json!(args.target);
            let out = evolve_ground(&model, args.target, &cma, args.workers)?;
            eprintln!(
                "best fitness {:.4}: ground fraction {:.4} vs target {} (|g-t| = {:.4})",
                out.best_fitness,
                measure_ground(&out.best_grid),
                args.target,
                f_ground(&out.best_grid, args.target)
            );
            (out.best_grid, out.best_z, out.best_fitness, out.rows, out.history)
        }
        "segments" => {
            let plan = parse_plan(&args.plan)?;
            resolved["plan"] = json!(args.plan);
            let (level, outcomes) = evolve_segmented_level(&model, &plan, &cma, args.workers)?;
            for (i, o) in outcomes.iter().enumerate() {
                write_fitness_log(&out_dir.join(format!("segment_{i}_fitness_log.csv")), &o.rows)?;
                write_history_csv(&out_dir.join(format!("segment_{i}_history.csv")), &o.history)?;
                outputs.push(format!("segment_{i}_fitness_log.csv"));
                outputs.push(format!("segment_{i}_history.csv"));
                eprintln!(
                    "segment {i}: target {} enemies {} -> fitness {:.4}, g {:.4}",
                    plan[i].target,
                    plan[i].enemies,
                    o.best_fitness,
                    measure_ground(&o.best_grid)
                );
            }
            // The per-segment logs are the record; the combined level keeps
            // the last segment's rows out of the top-level files.
            let last = outcomes.last().expect("non-empty plan");
            (level, last.best_z.clone(), last.best_fitness, Vec::new(), Vec::new())
        }
        "jumps-max" | "jumps-min" => {
            let goal = if fitness == "jumps-max" {
                JumpGoal::MaximizeJumps
            } else {
                JumpGoal::MinimizeJumps
            };
            let obj = AgentObjective {
                goal,
                repeats: args.repeats,
                seed_base: args.sim_seed,
            };
            let sim = LevelSimulator { jump_cap: args.jump_cap, ..LevelSimulator::default() };
            resolved["repeats"] = json!(args.repeats);
            resolved["sim_seed"] = json!(args.sim_seed);
            resolved["jump_cap"] = json!(args.jump_cap);
            let out = evolve_agent(&model, &obj, &sim, &cma, args.workers)?;
            let best_eval = out
                .rows
                .iter()
                .filter_map(|r| r.agent.as_ref())
                .find(|a| a.fitness == out.best_fitness);
            if let Some(a) = best_eval {
                eprintln!(
                    "best fitness {:.4}: p_mean {:.3}, jumps_mean {:.2}, playable {:.0}%",
                    a.fitness,
                    a.p_mean,
                    a.jumps_mean,
                    a.playable_fraction * 100.0
                );
            }
            (out.best_grid, out.best_z, out.best_fitness, out.rows, out.history)
        }
        other => {
            return Err(CliError::Usage(format!(
                "--fitness {other}: expected ground, segments, jumps-max or jumps-min"
            )))
        }
    };
    std::fs::write(out_dir.join("best.txt"), corpus::render_vglc(&best_grid))?;
    to_image(&best_grid, &Palette::default(), &out_dir.join("best.png"))?;
    write_latent(&out_dir.join("best_latent.txt"), &best_z)?;
    write_fitness_log(&out_dir.join("fitness_log.csv"), &rows)?;
    write_history_csv(&out_dir.join("history.csv"), &history)?;
    resolved["best_fitness"] = json!(best_fitness);
    write_manifest(out_dir, "evolve", resolved, &outputs)?;
    Ok(())
}

fn cmd_simulate(
    level_path: &Path,
    runs: usize,
    seed: u64,
    tick_limit: Option<u32>,
    jump_cap: u32,
    trace: bool,
    out_dir: &Path,
) -> Result<(), CliError> {
    ensure_dir(out_dir)?;
    let grid = load_level_file(level_path)?;
    let world = World::build(&grid);
    let tick_limit = tick_limit.unwrap_or(levolve::sim::default_tick_limit(world.width));
    let timeline = EnemyTimeline::build(&world, tick_limit);
    let mut results: Vec<SimResult> = Vec::with_capacity(runs);
    let mut first_plan = None;
    for k in 0..runs as u64 {
        let (plan, r) = astar_plan(&world, &timeline, seed + k, tick_limit, jump_cap);
        if k == 0 {
            first_plan = Some(plan);
        }
        results.push(r);
    }
    let mut csv = String::from("seed,p,jumps,completed,ticks\n");
    for r in &results {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed, r.p, r.jumps, r.completed, r.ticks
        ));
    }
    std::fs::write(out_dir.join("runs.csv"), csv)?;
    let n = results.len() as f64;
    let p_mean = results.iter().map(|r| r.p).sum::<f64>() / n;
    let jumps_mean = results.iter().map(|r| r.jumps as f64).sum::<f64>() / n;
    let playable = results.iter().filter(|r| r.completed).count() as f64 / n;
    println!(
        "runs {}  p_mean {:.4}  jumps_mean {:.2}  playable_fraction {:.2}",
        runs, p_mean, jumps_mean, playable
    );
    let mut outputs = vec!["runs.csv".to_string()];
    if trace {
        let plan = first_plan.expect("at least one run");
        let mut sim = Simulation::new(&world, &timeline);
        let mut text = String::from("tick,x,y,vy,grounded,dx,jump,status\n");
        for act in &plan {
            let status = sim.step(*act);
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                sim.tick,
                sim.agent.x,
                sim.agent.y,
                sim.agent.vy,
                sim.agent.grounded,
                act.dx,
                act.jump,
                match status {
                    Status::Running => "running",
                    Status::Won => "won",
                    Status::Dead => "dead",
                }
            ));
            if status != Status::Running {
                break;
            }
        }
        std::fs::write(out_dir.join("trace.csv"), text)?;
        outputs.push("trace.csv".into());
    }
    write_manifest(
        out_dir,
        "simulate",
        json!({
            "level": level_path.display().to_string(),
            "runs": runs,
            "seed": seed,
            "tick_limit": tick_limit,
            "jump_cap": jump_cap,
            "p_mean": p_mean,
            "jumps_mean": jumps_mean,
            "playable_fraction": playable,
        }),
        &outputs,
    )?;
    Ok(())
}
