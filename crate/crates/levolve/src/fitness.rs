//! Objective functions over generated levels and the CMA-ES drivers that
//! evolve latent vectors against them.
//!
//! Two families: representation-based objectives read tile statistics
//! straight off the decoded grid (ground fraction, enemy count) and
//! evaluate the raw latent vector; agent-based objectives squash the latent
//! through a sigmoid into [-1,1]^n, decode, and score playthroughs of the
//! simulated agent.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cmaes::{CmaConfig, CmaError, CmaState, GenRecord};
use crate::corpus::TileGrid;
use crate::gan::{GanError, Generator, LATENT_DIM};
use crate::sim::{astar_solve_in, EnemyTimeline, SimResult, World};

const GROUND_TILE: u8 = 0;
const ENEMY_TILE: u8 = 5;

#[derive(Debug, Error)]
pub enum FitnessError {
    #[error("segment plan is empty")]
    EmptyPlan,
    #[error("bad segment plan: {0}")]
    BadPlan(String),
    #[error(transparent)]
    Cma(#[from] CmaError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fraction of the bottom row covered by ground tiles (identity 0).
pub fn measure_ground(grid: &TileGrid) -> f64 {
    let bottom = grid.height() - 1;
    let ground = (0..grid.width()).filter(|&c| grid.get(bottom, c) == GROUND_TILE).count();
    ground as f64 / grid.width() as f64
}

pub fn f_ground(grid: &TileGrid, target: f64) -> f64 {
    (measure_ground(grid) - target).abs()
}

pub fn count_enemies(grid: &TileGrid) -> usize {
    grid.cells().iter().filter(|&&id| id == ENEMY_TILE).count()
}

/// Segment objective: ground distance plus, when enabled, the linear enemy
/// reward 0.5 * (20 - n). Deliberately unclamped, so n > 20 keeps paying.
pub fn f_segment(grid: &TileGrid, target: f64, enemies_enabled: bool) -> f64 {
    let base = f_ground(grid, target);
    if enemies_enabled {
        base + 0.5 * (20.0 - count_enemies(grid) as f64)
    } else {
        base
    }
}

/// Componentwise squash of an unconstrained latent into (-1, 1).
pub fn sigmoid_map(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| 2.0 / (1.0 + (-v).exp()) - 1.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpGoal {
    /// F1: reach the goal, then the more jumps the better (harder levels).
    MaximizeJumps,
    /// F2: reach the goal with as few jumps as possible (easier levels).
    MinimizeJumps,
}

#[derive(Debug, Clone, Copy)]
pub struct AgentObjective {
    pub goal: JumpGoal,
    pub repeats: usize,
    pub seed_base: u64,
}

impl AgentObjective {
    pub fn new(goal: JumpGoal) -> AgentObjective {
        AgentObjective { goal, repeats: 10, seed_base: 0 }
    }
}

/// F1 per run: -p while incomplete, -p - jumps on completion.
pub fn score_f1(r: &SimResult) -> f64 {
    if r.completed {
        -r.p - r.jumps as f64
    } else {
        -r.p
    }
}

/// F2 per run: 60 - p while incomplete, jumps - p on completion. The
/// simulator's jump cap keeps every completed score strictly below every
/// failed one.
pub fn score_f2(r: &SimResult) -> f64 {
    if r.completed {
        -r.p + r.jumps as f64
    } else {
        -r.p + 60.0
    }
}

fn score(goal: JumpGoal, r: &SimResult) -> f64 {
    match goal {
        JumpGoal::MaximizeJumps => score_f1(r),
        JumpGoal::MinimizeJumps => score_f2(r),
    }
}

/// Mean outcome of the repeated playthroughs behind one fitness value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentEval {
    pub fitness: f64,
    pub p_mean: f64,
    pub jumps_mean: f64,
    pub playable_fraction: f64,
}

/// Production playthrough runner: A* agent, one shared enemy timeline per
/// level, tick limit proportional to width.
#[derive(Debug, Clone, Copy)]
pub struct LevelSimulator {
    pub ticks_per_width: u32,
    pub jump_cap: u32,
}

impl Default for LevelSimulator {
    fn default() -> Self {
        LevelSimulator { ticks_per_width: 100, jump_cap: 50 }
    }
}

impl LevelSimulator {
    pub fn run(&self, grid: &TileGrid, seeds: &[u64]) -> Vec<SimResult> {
        let world = World::build(grid);
        let tick_limit = self.ticks_per_width * world.width as u32;
        let timeline = EnemyTimeline::build(&world, tick_limit);
        seeds
            .iter()
            .map(|&s| astar_solve_in(&world, &timeline, s, tick_limit, self.jump_cap))
            .collect()
    }
}

/// Average the per-run scores of `obj.repeats` playthroughs with seeds
/// seed_base, seed_base+1, ...
pub fn eval_grid<F>(grid: &TileGrid, obj: &AgentObjective, runs: F) -> AgentEval
where
    F: Fn(&TileGrid, &[u64]) -> Vec<SimResult>,
{
    assert!(obj.repeats >= 1);
    let seeds: Vec<u64> = (0..obj.repeats as u64).map(|k| obj.seed_base + k).collect();
    let results = runs(grid, &seeds);
    assert_eq!(results.len(), seeds.len());
    let n = results.len() as f64;
    AgentEval {
        fitness: results.iter().map(|r| score(obj.goal, r)).sum::<f64>() / n,
        p_mean: results.iter().map(|r| r.p).sum::<f64>() / n,
        jumps_mean: results.iter().map(|r| r.jumps as f64).sum::<f64>() / n,
        playable_fraction: results.iter().filter(|r| r.completed).count() as f64 / n,
    }
}

/// Agent-based fitness of one latent point: sigmoid-squash, decode, play.
pub fn agent_fitness<F>(
    z: &[f64],
    model: &Generator,
    obj: &AgentObjective,
    runs: F,
) -> Result<AgentEval, GanError>
where
    F: Fn(&TileGrid, &[u64]) -> Vec<SimResult>,
{
    let grid = model.generate(&sigmoid_map(z))?;
    Ok(eval_grid(&grid, obj, runs))
}

/// One CSV row per objective evaluation, in evaluation order.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub evaluation: usize,
    pub fitness: f64,
    /// Populated for agent-based objectives only.
    pub agent: Option<AgentEval>,
}

pub fn write_fitness_log(path: &Path, rows: &[EvalRow]) -> Result<(), std::io::Error> {
    let mut out = String::from("evaluation,fitness,p_mean,jumps_mean,playable_fraction\n");
    for r in rows {
        match &r.agent {
            Some(a) => out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.evaluation, r.fitness, a.p_mean, a.jumps_mean, a.playable_fraction
            )),
            None => out.push_str(&format!("{},{},,,\n", r.evaluation, r.fitness)),
        }
    }
    std::fs::write(path, out)
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub best_z: Vec<f64>,
    pub best_fitness: f64,
    pub best_grid: TileGrid,
    pub rows: Vec<EvalRow>,
    pub history: Vec<GenRecord>,
}

/// Ask/tell loop shared by every evolve entry point; the objective returns
/// the fitness plus optional agent detail for the log.
fn drive<E>(
    cfg: &CmaConfig,
    workers: usize,
    eval: E,
) -> Result<(Vec<f64>, f64, Vec<EvalRow>, Vec<GenRecord>), FitnessError>
where
    E: Fn(&[f64]) -> (f64, Option<AgentEval>) + Sync,
{
    let mut state = CmaState::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows: Vec<EvalRow> = Vec::new();
    let mut history = Vec::new();
    while state.evaluations < cfg.max_evals {
        let candidates = state.ask(&mut rng)?;
        let outs: Vec<(f64, Option<AgentEval>)> = if workers > 1 {
            use rayon::prelude::*;
            candidates.par_iter().map(|c| eval(c)).collect()
        } else {
            candidates.iter().map(|c| eval(c)).collect()
        };
        let fitnesses: Vec<f64> = outs.iter().map(|o| o.0).collect();
        for (f, agent) in outs {
            rows.push(EvalRow { evaluation: rows.len(), fitness: f, agent });
        }
        state.tell(&candidates, &fitnesses)?;
        history.push(GenRecord {
            generation: state.generation,
            evaluations: state.evaluations,
            best_fitness: state.best.as_ref().expect("told at least once").1,
            mean_fitness: fitnesses.iter().sum::<f64>() / fitnesses.len() as f64,
        });
    }
    let (best_z, best_f) = state.best.expect("nonzero budget");
    Ok((best_z, best_f, rows, history))
}

/// Evolve a latent point whose decoded level hits a ground-coverage target.
/// Representation-based: the latent is fed to the generator unsquashed.
pub fn evolve_ground(
    model: &Generator,
    target: f64,
    cfg: &CmaConfig,
    workers: usize,
) -> Result<EvolveOutcome, FitnessError> {
    evolve_segment(model, target, false, cfg, workers)
}

/// Ground target plus optional enemy-count reward; building block of the
/// segmented difficulty ramp.
pub fn evolve_segment(
    model: &Generator,
    target: f64,
    enemies_enabled: bool,
    cfg: &CmaConfig,
    workers: usize,
) -> Result<EvolveOutcome, FitnessError> {
    let eval = |z: &[f64]| {
        let grid = model.generate(z).expect("finite generator output");
        (f_segment(&grid, target, enemies_enabled), None)
    };
    let (best_z, best_fitness, rows, history) = drive(cfg, workers, eval)?;
    let best_grid = model.generate(&best_z)?;
    Ok(EvolveOutcome { best_z, best_fitness, best_grid, rows, history })
}

/// Evolve a latent point against an agent-based objective. Playthrough
/// results are memoized per decoded grid: distinct latents frequently
/// decode to the same level once the search converges.
pub fn evolve_agent(
    model: &Generator,
    obj: &AgentObjective,
    sim: &LevelSimulator,
    cfg: &CmaConfig,
    workers: usize,
) -> Result<EvolveOutcome, FitnessError> {
    let memo: Mutex<HashMap<TileGrid, AgentEval>> = Mutex::new(HashMap::new());
    let eval = |z: &[f64]| {
        let grid = model.generate(&sigmoid_map(z)).expect("finite generator output");
        if let Some(hit) = memo.lock().unwrap().get(&grid) {
            return (hit.fitness, Some(*hit));
        }
        let e = eval_grid(&grid, obj, |g, seeds| sim.run(g, seeds));
        memo.lock().unwrap().insert(grid, e);
        (e.fitness, Some(e))
    };
    let (best_z, best_fitness, rows, history) = drive(cfg, workers, eval)?;
    let best_grid = model.generate(&sigmoid_map(&best_z))?;
    Ok(EvolveOutcome { best_z, best_fitness, best_grid, rows, history })
}

/// CMA-ES settings for agent-based objectives: start from a uniform-random
/// point in [-1,1]^n with a wide step size.
pub fn agent_cma_config(seed: u64) -> CmaConfig {
    let mut cfg = CmaConfig::new(LATENT_DIM, seed);
    cfg.sigma0 = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    cfg.mean0 = (0..LATENT_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub target: f64,
    pub enemies: bool,
}

/// Parse a plan like "1.0,1.0,0.7,0.7e,0.7e": one ground target per
/// segment, 'e' suffix enabling the enemy term.
pub fn parse_plan(text: &str) -> Result<Vec<SegmentSpec>, FitnessError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(FitnessError::EmptyPlan);
    }
    let mut plan = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        let (num, enemies) = match part.strip_suffix(['e', 'E']) {
            Some(rest) => (rest, true),
            None => (part, false),
        };
        let target: f64 = num
            .parse()
            .map_err(|_| FitnessError::BadPlan(format!("unreadable target {part:?}")))?;
        if !(0.0..=1.0).contains(&target) {
            return Err(FitnessError::BadPlan(format!("target {target} outside [0, 1]")));
        }
        plan.push(SegmentSpec { target, enemies });
    }
    Ok(plan)
}

/// One independent CMA-ES per segment, best levels concatenated in plan
/// order into a 14 x 28*len level. Segment i runs with cfg.seed + i.
pub fn evolve_segmented_level(
    model: &Generator,
    plan: &[SegmentSpec],
    cfg: &CmaConfig,
    workers: usize,
) -> Result<(TileGrid, Vec<EvolveOutcome>), FitnessError> {
    if plan.is_empty() {
        return Err(FitnessError::EmptyPlan);
    }
    let mut outcomes = Vec::with_capacity(plan.len());
    for (i, seg) in plan.iter().enumerate() {
        let mut seg_cfg = cfg.clone();
        seg_cfg.seed = cfg.seed + i as u64;
        outcomes.push(evolve_segment(model, seg.target, seg.enemies, &seg_cfg, workers)?);
    }
    let segments: Vec<TileGrid> = outcomes.iter().map(|o| o.best_grid.clone()).collect();
    Ok((TileGrid::concat_horizontal(&segments), outcomes))
}
