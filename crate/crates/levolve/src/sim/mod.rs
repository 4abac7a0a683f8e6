//! Deterministic tick-based platformer simulation.
//!
//! Geometry is measured in subunits, 8 per tile; y grows downward. The
//! agent is one tile (8x8 subunits). Physics constants: run speed 2
//! subunits/tick, gravity 1 subunit/tick^2, jump impulse -8, terminal fall
//! speed 8, stomp bounce -4. A jump therefore rises 8+7+...+1 = 36 subunits
//! and leaves the agent airborne at the end of 16 consecutive ticks.
//!
//! Tick order: horizontal movement (with ledge recheck), jump, gravity
//! (applied only if the agent was already airborne before the jump step),
//! vertical movement with collision, enemy movement and contact resolution,
//! pit death, win check.

mod astar;

pub use astar::{astar_plan, astar_solve, astar_solve_in};

use crate::corpus::{TileGrid, EMPTY_TILE};

/// Subunits per tile edge.
pub const SUBS: i32 = 8;
/// Tile identities that block movement. Identity 2 is passable, identity 5
/// marks an enemy spawn on a passable cell.
pub const SOLID_IDS: [u8; 8] = [0, 1, 3, 4, 6, 7, 8, 9];
const ENEMY_ID: u8 = 5;

pub fn default_tick_limit(width: usize) -> u32 {
    100 * width as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Action {
    pub dx: i8,
    pub jump: bool,
}

/// All agent inputs: three directions times jump/no-jump.
pub const ACTIONS: [Action; 6] = [
    Action { dx: 1, jump: false },
    Action { dx: 1, jump: true },
    Action { dx: 0, jump: false },
    Action { dx: 0, jump: true },
    Action { dx: -1, jump: false },
    Action { dx: -1, jump: true },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Agent {
    /// Top-left corner of the 8x8 hitbox, in subunits.
    pub x: i32,
    pub y: i32,
    pub vy: i32,
    pub grounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Won,
    Dead,
}

/// Static level geometry plus enemy spawn points.
pub struct World {
    pub grid: TileGrid,
    pub width: usize,
    pub height: usize,
    solid: Vec<bool>,
    /// Subunit top-left positions of the enemies taken out of the grid.
    pub enemy_spawns: Vec<(i32, i32)>,
    pub spawn: Agent,
}

impl World {
    /// Extract enemies (their cells become passable) and locate the agent
    /// spawn: standing on the highest solid tile of column 0, or falling
    /// from the top row when column 0 is hollow.
    pub fn build(grid: &TileGrid) -> World {
        let (h, w) = (grid.height(), grid.width());
        let mut cleaned = grid.clone();
        let mut enemy_spawns = Vec::new();
        for r in 0..h {
            for c in 0..w {
                if grid.get(r, c) == ENEMY_ID {
                    cleaned.set(r, c, EMPTY_TILE);
                    enemy_spawns.push((c as i32 * SUBS, r as i32 * SUBS));
                }
            }
        }
        let solid: Vec<bool> =
            cleaned.cells().iter().map(|id| SOLID_IDS.contains(id)).collect();
        let top_solid = (0..h).find(|&r| solid[r * w]);
        let spawn = match top_solid {
            Some(r) => Agent { x: 0, y: r as i32 * SUBS - SUBS, vy: 0, grounded: true },
            None => Agent { x: 0, y: 0, vy: 0, grounded: false },
        };
        World { grid: cleaned, width: w, height: h, solid, enemy_spawns, spawn }
    }

    /// Pixel x the agent must reach to win: the rightmost tile column.
    pub fn goal_x(&self) -> i32 {
        (self.width as i32 - 1) * SUBS
    }

    fn solid_tile(&self, r: i32, c: i32) -> bool {
        if c < 0 {
            // The left level edge is a wall.
            return true;
        }
        if r < 0 || r >= self.height as i32 || c >= self.width as i32 {
            // Above the grid, past the right edge and below the grid are
            // all open; falling out the bottom is handled as a pit death.
            return false;
        }
        self.solid[r as usize * self.width + c as usize]
    }

    /// Whether an 8x8 box at (x, y) overlaps any solid tile.
    pub fn blocked(&self, x: i32, y: i32) -> bool {
        let c0 = x.div_euclid(SUBS);
        let c1 = (x + SUBS - 1).div_euclid(SUBS);
        let r0 = y.div_euclid(SUBS);
        let r1 = (y + SUBS - 1).div_euclid(SUBS);
        for r in r0..=r1 {
            for c in c0..=c1 {
                if self.solid_tile(r, c) {
                    return true;
                }
            }
        }
        false
    }

    fn supported(&self, x: i32, y: i32) -> bool {
        self.blocked(x, y + 1)
    }
}

/// Agent movement for one tick: returns true when a jump was initiated.
/// Covers phases 1-4 of the tick; enemy contact and win/death checks are
/// separate so the searchers can reuse this exactly.
pub(crate) fn phys_step(world: &World, a: &mut Agent, act: Action) -> bool {
    // 1. Horizontal, one subunit at a time; then ledge recheck.
    let dx = act.dx as i32;
    if dx != 0 {
        for _ in 0..2 {
            if world.blocked(a.x + dx, a.y) {
                break;
            }
            a.x += dx;
        }
    }
    if a.grounded && !world.supported(a.x, a.y) {
        a.grounded = false;
    }
    // Gravity only acts if the agent was airborne before this tick's jump,
    // so the first jump tick rises the full impulse.
    let airborne_before_jump = !a.grounded;
    // 2. Jump.
    let mut jumped = false;
    if act.jump && a.grounded {
        a.vy = -SUBS;
        a.grounded = false;
        jumped = true;
    }
    // 3. Gravity with terminal velocity.
    if airborne_before_jump {
        a.vy = (a.vy + 1).min(SUBS);
    }
    // 4. Vertical, one subunit at a time with collision.
    if a.vy < 0 {
        for _ in 0..-a.vy {
            if world.blocked(a.x, a.y - 1) {
                a.vy = 0; // head bump
                break;
            }
            a.y -= 1;
        }
    } else if a.vy > 0 {
        for _ in 0..a.vy {
            if world.blocked(a.x, a.y + 1) {
                a.vy = 0;
                a.grounded = true; // landed
                break;
            }
            a.y += 1;
        }
        // A fall that ends exactly flush with a surface also lands.
        if !a.grounded && world.supported(a.x, a.y) {
            a.vy = 0;
            a.grounded = true;
        }
    }
    jumped
}

/// One enemy's state at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnemyFrame {
    pub x: i32,
    pub y: i32,
    /// False once the enemy has fallen out of the level.
    pub present: bool,
}

/// Enemy positions for every tick, precomputed once per world. Enemy motion
/// never depends on the agent, so searches index this by tick instead of
/// carrying enemy state.
pub struct EnemyTimeline {
    frames: Vec<Vec<EnemyFrame>>,
}

impl EnemyTimeline {
    pub fn build(world: &World, tick_limit: u32) -> EnemyTimeline {
        #[derive(Clone)]
        struct E {
            x: i32,
            y: i32,
            vy: i32,
            facing: i32,
            present: bool,
        }
        let mut enemies: Vec<E> = world
            .enemy_spawns
            .iter()
            // Enemies start walking left.
            .map(|&(x, y)| E { x, y, vy: 0, facing: -1, present: true })
            .collect();
        let snapshot = |es: &[E]| -> Vec<EnemyFrame> {
            es.iter().map(|e| EnemyFrame { x: e.x, y: e.y, present: e.present }).collect()
        };
        let mut frames = Vec::with_capacity(tick_limit as usize + 1);
        frames.push(snapshot(&enemies));
        for _ in 0..tick_limit {
            for e in enemies.iter_mut() {
                if !e.present {
                    continue;
                }
                // Walk 1 subunit; walls and level edges reverse facing.
                let nx = e.x + e.facing;
                let off_edge = nx < 0 || nx + SUBS > world.width as i32 * SUBS;
                if off_edge || world.blocked(nx, e.y) {
                    e.facing = -e.facing;
                } else {
                    e.x = nx;
                }
                // Same gravity rule as the agent; enemies walk off ledges.
                if world.supported(e.x, e.y) {
                    e.vy = 0;
                } else {
                    e.vy = (e.vy + 1).min(SUBS);
                    for _ in 0..e.vy {
                        if world.blocked(e.x, e.y + 1) {
                            e.vy = 0;
                            break;
                        }
                        e.y += 1;
                    }
                }
                if e.y >= world.height as i32 * SUBS {
                    e.present = false;
                }
            }
            frames.push(snapshot(&enemies));
        }
        EnemyTimeline { frames }
    }

    /// Enemy states at the end of `tick` (frame 0 is the spawn state).
    pub fn frame(&self, tick: u32) -> &[EnemyFrame] {
        let idx = (tick as usize).min(self.frames.len() - 1);
        &self.frames[idx]
    }

    pub fn ticks(&self) -> u32 {
        self.frames.len() as u32 - 1
    }
}

fn overlaps(ax: i32, ay: i32, bx: i32, by: i32) -> bool {
    ax < bx + SUBS && bx < ax + SUBS && ay < by + SUBS && by < ay + SUBS
}

/// Resolve agent/enemy contact after movement. `alive` is the kill mask for
/// the true game; pass `None` to model enemies as unkillable (the searcher's
/// conservative view). Returns false when the agent dies.
pub(crate) fn resolve_contacts(
    a: &mut Agent,
    frame: &[EnemyFrame],
    mut alive: Option<&mut [bool]>,
    stomps: &mut u32,
) -> bool {
    let is_live = |alive: &Option<&mut [bool]>, i: usize| match alive {
        Some(mask) => mask[i],
        None => true,
    };
    // Stomps first: falling onto an enemy from above kills it and bounces
    // the agent once, regardless of how many enemies were squashed.
    let mut bounced = false;
    for i in 0..frame.len() {
        let e = frame[i];
        if !e.present || !is_live(&alive, i) {
            continue;
        }
        if overlaps(a.x, a.y, e.x, e.y) && a.vy > 0 && (a.y + SUBS - 1) - e.y < a.vy {
            if let Some(mask) = alive.as_deref_mut() {
                mask[i] = false;
            }
            *stomps += 1;
            bounced = true;
        }
    }
    if bounced {
        a.vy = -4;
        a.grounded = false;
    }
    // Any remaining overlap is lethal side/below contact.
    for i in 0..frame.len() {
        let e = frame[i];
        if !e.present || !is_live(&alive, i) {
            continue;
        }
        if overlaps(a.x, a.y, e.x, e.y) {
            return false;
        }
    }
    true
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimResult {
    /// Fraction of the level width covered by the agent's right edge.
    pub p: f64,
    pub jumps: u32,
    pub completed: bool,
    pub ticks: u32,
    pub seed: u64,
}

/// The true game: kill tracking on, driven one action per tick.
pub struct Simulation<'w> {
    world: &'w World,
    timeline: &'w EnemyTimeline,
    pub agent: Agent,
    pub tick: u32,
    pub jumps: u32,
    pub stomps: u32,
    alive: Vec<bool>,
    best_right: i32,
    pub status: Status,
}

impl<'w> Simulation<'w> {
    pub fn new(world: &'w World, timeline: &'w EnemyTimeline) -> Self {
        Simulation {
            world,
            timeline,
            agent: world.spawn,
            tick: 0,
            jumps: 0,
            stomps: 0,
            alive: vec![true; world.enemy_spawns.len()],
            best_right: world.spawn.x + SUBS,
            status: Status::Running,
        }
    }

    pub fn step(&mut self, act: Action) -> Status {
        if self.status != Status::Running {
            return self.status;
        }
        let world = self.world;
        if phys_step(world, &mut self.agent, act) {
            self.jumps += 1;
        }
        let frame = self.timeline.frame(self.tick + 1);
        let survived =
            resolve_contacts(&mut self.agent, frame, Some(&mut self.alive), &mut self.stomps);
        self.tick += 1;
        self.best_right = self.best_right.max(self.agent.x + SUBS);
        let in_pit = self.agent.y >= world.height as i32 * SUBS;
        if !survived || in_pit {
            self.status = Status::Dead;
        } else if self.agent.x >= world.goal_x() {
            self.status = Status::Won;
        }
        self.status
    }

    pub fn enemies_alive(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn progress(&self) -> f64 {
        (self.best_right as f64 / (self.world.width as f64 * SUBS as f64)).min(1.0)
    }

    pub fn result(&self, seed: u64) -> SimResult {
        SimResult {
            p: if self.status == Status::Won { 1.0 } else { self.progress() },
            jumps: self.jumps,
            completed: self.status == Status::Won,
            ticks: self.tick,
            seed,
        }
    }
}

/// Run a fixed action sequence through the true game.
pub fn replay(world: &World, timeline: &EnemyTimeline, actions: &[Action], seed: u64) -> SimResult {
    let mut sim = Simulation::new(world, timeline);
    for &a in actions {
        if sim.step(a) != Status::Running {
            break;
        }
    }
    sim.result(seed)
}

/// Exhaustive breadth-first search of the true game, layer per tick.
/// Returns the optimal win tick count, or None when the level cannot be
/// completed within the tick limit. Only practical on small worlds; this is
/// the reference the A* agent is validated against.
pub fn bfs_optimal_ticks(world: &World, tick_limit: u32) -> Option<u32> {
    use std::collections::HashSet;

    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    struct S {
        agent: Agent,
        mask: u32,
    }
    assert!(world.enemy_spawns.len() <= 32, "bfs mask is u32");
    let timeline = EnemyTimeline::build(world, tick_limit);
    let full_mask = if world.enemy_spawns.is_empty() {
        0
    } else {
        (1u32 << world.enemy_spawns.len()) - 1
    };
    let mut frontier: HashSet<S> = HashSet::new();
    frontier.insert(S { agent: world.spawn, mask: full_mask });
    let stateless = world.enemy_spawns.is_empty();
    for t in 0..tick_limit {
        let mut next: HashSet<S> = HashSet::with_capacity(frontier.len() * 2);
        let frame = timeline.frame(t + 1);
        for s in &frontier {
            for &act in &ACTIONS {
                let mut agent = s.agent;
                let mut alive: Vec<bool> =
                    (0..world.enemy_spawns.len()).map(|i| s.mask >> i & 1 == 1).collect();
                phys_step(world, &mut agent, act);
                let mut stomps = 0;
                if !resolve_contacts(&mut agent, frame, Some(&mut alive), &mut stomps) {
                    continue;
                }
                if agent.y >= world.height as i32 * SUBS {
                    continue;
                }
                if agent.x >= world.goal_x() {
                    return Some(t + 1);
                }
                let mask = alive
                    .iter()
                    .enumerate()
                    .fold(0u32, |m, (i, &a)| if a { m | 1 << i } else { m });
                next.insert(S { agent, mask });
            }
        }
        if next.is_empty() || (stateless && next == frontier) {
            // Reachable set is closed with no win inside it.
            return None;
        }
        frontier = next;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_vglc;

    fn world(text: &str) -> World {
        World::build(&parse_vglc(text).unwrap())
    }

    fn flat(width: usize) -> String {
        let mut s = String::new();
        for _ in 0..4 {
            s.push_str(&"-".repeat(width));
            s.push('\n');
        }
        s.push_str(&"X".repeat(width));
        s.push('\n');
        s
    }

    #[test]
    fn spawn_stands_on_highest_solid_of_column_zero() {
        let w = world("----\n----\nX---\nXXXX");
        assert_eq!(w.spawn, Agent { x: 0, y: 2 * SUBS - SUBS, vy: 0, grounded: true });
        let hollow = world("---\n---\n-XX");
        assert!(!hollow.spawn.grounded);
        assert_eq!((hollow.spawn.x, hollow.spawn.y), (0, 0));
    }

    #[test]
    fn enemies_extracted_and_cells_passable() {
        let w = world("-----\n-E-E-\nXXXXX");
        assert_eq!(w.enemy_spawns, vec![(SUBS, SUBS), (3 * SUBS, SUBS)]);
        assert!(!w.blocked(SUBS, SUBS));
        assert_eq!(w.grid.get(1, 1), EMPTY_TILE);
    }

    #[test]
    fn pipes_block_like_ground() {
        let w = world("----\n-<>-\n-[]-\nXXXX");
        let tl = EnemyTimeline::build(&w, 50);
        let mut sim = Simulation::new(&w, &tl);
        for _ in 0..20 {
            sim.step(Action { dx: 1, jump: false });
        }
        // Stopped flush against the pipe at column 1.
        assert_eq!(sim.agent.x, 0);
        assert_eq!(sim.status, Status::Running);
    }

    #[test]
    fn grounded_idle_is_an_equilibrium() {
        let w = world(&flat(10));
        let tl = EnemyTimeline::build(&w, 10);
        let mut sim = Simulation::new(&w, &tl);
        let before = sim.agent;
        sim.step(Action { dx: 0, jump: false });
        assert_eq!(sim.agent, before);
        assert_eq!(sim.tick, 1);
    }

    #[test]
    fn jump_arc_closed_form() {
        // Tall shaft so the jump never hits a ceiling.
        let mut text = String::new();
        for _ in 0..8 {
            text.push_str("-----\n");
        }
        text.push_str("XXXXX\n");
        let w = world(&text);
        let tl = EnemyTimeline::build(&w, 100);
        let mut sim = Simulation::new(&w, &tl);
        let y0 = sim.agent.y;
        let mut apex = 0;
        let mut airborne_ticks = 0;
        sim.step(Action { dx: 0, jump: true });
        let mut ticks = 1;
        loop {
            apex = apex.max(y0 - sim.agent.y);
            if !sim.agent.grounded {
                airborne_ticks += 1;
            } else {
                break;
            }
            sim.step(Action { dx: 0, jump: false });
            ticks += 1;
        }
        assert_eq!(apex, 36, "jump apex is 8+7+...+1 subunits");
        assert_eq!(airborne_ticks, 16);
        assert_eq!(ticks, 17, "lands on the 17th tick");
        assert_eq!(sim.jumps, 1);
        assert_eq!(sim.agent.y, y0);
    }

    #[test]
    fn running_jump_carries_32_subunits_and_clears_a_3_gap() {
        // Floor with a 3-tile gap; agent starts at the left edge.
        let text = "------------\n------------\n------------\n------------\nXXX---XXXXXX\n";
        let w = world(text);
        let tl = EnemyTimeline::build(&w, 200);
        let mut sim = Simulation::new(&w, &tl);
        // Run to the gap edge.
        while sim.agent.x < 2 * SUBS {
            sim.step(Action { dx: 1, jump: false });
        }
        let takeoff_x = sim.agent.x;
        sim.step(Action { dx: 1, jump: true });
        let mut carried = if sim.agent.grounded { 0 } else { 2 };
        while !sim.agent.grounded && sim.status == Status::Running {
            sim.step(Action { dx: 1, jump: false });
            if !sim.agent.grounded {
                carried += 2;
            }
        }
        assert_eq!(sim.status, Status::Running, "survived the gap");
        assert!(sim.agent.x >= 6 * SUBS, "landed past the gap");
        assert_eq!(carried, 32, "airborne ticks carry 16 * 2 subunits");
        assert!(sim.agent.x - takeoff_x >= 32);
    }

    #[test]
    fn empty_grid_is_a_quick_pit_death() {
        let w = world(&"------------\n".repeat(3));
        let tl = EnemyTimeline::build(&w, 50);
        let mut sim = Simulation::new(&w, &tl);
        let mut status = Status::Running;
        for _ in 0..10 {
            status = sim.step(Action { dx: 1, jump: false });
            if status != Status::Running {
                break;
            }
        }
        assert_eq!(status, Status::Dead);
        let r = sim.result(0);
        assert!(!r.completed);
        assert!(r.p < 0.3, "p = {}", r.p);
    }

    #[test]
    fn enemy_paces_between_walls_and_reverses() {
        // Enemy boxed between two pipes, two tiles of floor to pace.
        let w = world("X------X\nX-E----X\nXXXXXXXX");
        let tl = EnemyTimeline::build(&w, 100);
        let xs: Vec<i32> = (0..40).map(|t| tl.frame(t)[0].x).collect();
        assert!(xs.iter().all(|&x| (SUBS..=6 * SUBS).contains(&x)));
        // Starts walking left, bounces off the wall at column 0.
        assert_eq!(xs[1], xs[0] - 1);
        let min = xs.iter().min().unwrap();
        let max = xs.iter().max().unwrap();
        assert_eq!(*min, SUBS, "reaches the left wall");
        assert!(*max > *min, "turns around and walks back");
    }

    #[test]
    fn enemy_walks_off_ledge_and_out_of_the_level() {
        let w = world("--E-\n-XX-\n----");
        let tl = EnemyTimeline::build(&w, 200);
        let last = tl.frame(200);
        assert!(!last[0].present, "enemy fell into the pit");
    }

    #[test]
    fn stomp_kills_bounces_and_counts() {
        // Agent drops off a ledge onto an enemy pinned between pipes.
        let w = world("X-------\nX-------\nXX------\nXX-E----\nXXXX----\nXXXXXXXX");
        let tl = EnemyTimeline::build(&w, 100);
        let mut sim = Simulation::new(&w, &tl);
        let mut steps = 0;
        while sim.status == Status::Running && steps < 60 {
            sim.step(Action { dx: 1, jump: false });
            steps += 1;
            if sim.stomps > 0 {
                break;
            }
        }
        assert_eq!(sim.stomps, 1, "stomped the enemy");
        assert_eq!(sim.enemies_alive(), 0);
        assert_eq!(sim.agent.vy, -4, "bounce impulse");
        assert_eq!(sim.status, Status::Running, "stomp is not lethal");
    }

    #[test]
    fn side_contact_kills_the_agent() {
        let w = world("--------\n-----E--\nXXXXXXXX");
        let tl = EnemyTimeline::build(&w, 100);
        let mut sim = Simulation::new(&w, &tl);
        let mut status = Status::Running;
        for _ in 0..40 {
            status = sim.step(Action { dx: 1, jump: false });
            if status != Status::Running {
                break;
            }
        }
        assert_eq!(status, Status::Dead);
        assert_eq!(sim.stomps, 0);
    }

    #[test]
    fn flat_floor_run_is_optimal_and_jumpless() {
        let w = world(&flat(28));
        let r = astar_solve(&w, 0, default_tick_limit(28), 50);
        assert!(r.completed);
        assert_eq!(r.p, 1.0);
        assert_eq!(r.jumps, 0);
        // Spawn x=0, goal x=(28-1)*8=216, 2 subunits per tick.
        assert_eq!(r.ticks, 108);
        let bfs = bfs_optimal_ticks(&w, default_tick_limit(28));
        assert_eq!(bfs, Some(108));
    }

    #[test]
    fn unjumpable_wall_bounds_progress_to_the_wall_column() {
        let mut text = String::new();
        let width = 28;
        for _ in 0..13 {
            let mut row = "-".repeat(width);
            row.replace_range(10..11, "X");
            text.push_str(&row);
            text.push('\n');
        }
        text.push_str(&"X".repeat(width));
        let w = world(&text);
        let r = astar_solve(&w, 1, default_tick_limit(width), 50);
        assert!(!r.completed);
        let expect = 10.0 / 28.0;
        assert!((r.p - expect).abs() <= 1.0 / 28.0, "p = {}, wall at {}", r.p, expect);
        assert_eq!(bfs_optimal_ticks(&w, default_tick_limit(width)), None);
    }

    #[test]
    fn astar_matches_bfs_on_a_gap_course() {
        let text = "------------\n------------\n------------\n------------\nXXX--XXXXXXX\n";
        let w = world(text);
        let tick_limit = default_tick_limit(12);
        let r = astar_solve(&w, 7, tick_limit, 50);
        assert!(r.completed);
        assert!(r.jumps >= 1);
        assert_eq!(bfs_optimal_ticks(&w, tick_limit), Some(r.ticks));
    }

    #[test]
    fn astar_is_deterministic_per_seed() {
        let text = "------------\n------------\n--------X---\n----X---X---\nXXX--XXXXXXX\n";
        let w = world(text);
        let a = astar_solve(&w, 42, default_tick_limit(12), 50);
        let b = astar_solve(&w, 42, default_tick_limit(12), 50);
        assert_eq!(a, b);
    }

    #[test]
    fn astar_completes_with_an_enemy_in_the_way() {
        let w = world("------------\n------------\n------------\n-----E------\nXXXXXXXXXXXX");
        let r = astar_solve(&w, 3, default_tick_limit(12), 50);
        assert!(r.completed, "agent jumps over or stomps the enemy");
        // BFS on the true game agrees the level is winnable.
        assert!(bfs_optimal_ticks(&w, default_tick_limit(12)).is_some());
    }

    #[test]
    fn progress_fraction_uses_right_edge() {
        let w = world(&flat(28));
        let tl = EnemyTimeline::build(&w, 10);
        let sim = Simulation::new(&w, &tl);
        // At spawn the agent covers the first tile: p = 8 / (28*8).
        assert!((sim.progress() - 1.0 / 28.0).abs() < 1e-12);
    }
}
