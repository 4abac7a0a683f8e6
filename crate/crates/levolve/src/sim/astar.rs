//! A* playthrough search.
//!
//! The searcher plans against a model where enemies follow the precomputed
//! timeline and cannot be killed: a stomp still bounces the agent but the
//! enemy stays. That keeps enemy state out of the search key entirely — a
//! state is (x, y, vy, grounded) plus the tick when the world has enemies
//! (enemy positions are a function of the tick). The plan is then replayed
//! through the true game, which is what gets reported.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    phys_step, replay, resolve_contacts, Action, Agent, EnemyTimeline, SimResult, World, ACTIONS,
    SUBS,
};

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    x: i32,
    y: i32,
    vy: i32,
    grounded: bool,
    /// Tick for worlds with enemies; 0 otherwise, collapsing time.
    tick: u32,
}

struct Node {
    agent: Agent,
    tick: u32,
    jumps: u32,
    parent: u32,
    action: u8,
}

/// Ticks-to-goal lower bound: the agent covers at most 2 subunits per tick.
fn heuristic(x: i32, goal_x: i32) -> u32 {
    let d = goal_x - x;
    if d <= 0 {
        0
    } else {
        (d as u32).div_ceil(2)
    }
}

/// Search for a playthrough and replay the best plan found. `seed` only
/// shuffles tie-breaking among equally promising states; `jump_cap` bounds
/// how many jumps a plan may spend.
pub fn astar_solve(world: &World, seed: u64, tick_limit: u32, jump_cap: u32) -> SimResult {
    let timeline = EnemyTimeline::build(world, tick_limit);
    astar_solve_in(world, &timeline, seed, tick_limit, jump_cap)
}

/// As `astar_solve`, but reusing a prebuilt enemy timeline (it must cover
/// `tick_limit` ticks). Lets repeated runs on one world share the build.
pub fn astar_solve_in(
    world: &World,
    timeline: &EnemyTimeline,
    seed: u64,
    tick_limit: u32,
    jump_cap: u32,
) -> SimResult {
    astar_plan(world, timeline, seed, tick_limit, jump_cap).1
}

/// The searched action sequence together with its replay outcome.
pub fn astar_plan(
    world: &World,
    timeline: &EnemyTimeline,
    seed: u64,
    tick_limit: u32,
    jump_cap: u32,
) -> (Vec<Action>, SimResult) {
    assert!(timeline.ticks() >= tick_limit, "timeline too short");
    let has_enemies = !world.enemy_spawns.is_empty();
    let goal_x = world.goal_x();
    let budget = 50_000usize.max(1_500 * world.width);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut nodes: Vec<Node> = Vec::with_capacity(4096);
    nodes.push(Node { agent: world.spawn, tick: 0, jumps: 0, parent: u32::MAX, action: 0 });
    // Min-heap on (f, jumps spent, random tie, insertion index): among
    // equally fast plans the agent prefers the one that jumps less.
    let mut open: BinaryHeap<Reverse<(u32, u32, u32, u32)>> = BinaryHeap::new();
    open.push(Reverse((heuristic(world.spawn.x, goal_x), 0, rng.next_u32(), 0)));
    // Best g seen per key; doubles as the closed set.
    let mut seen: HashMap<Key, u32> = HashMap::new();

    let key_of = |a: &Agent, tick: u32| Key {
        x: a.x,
        y: a.y,
        vy: a.vy,
        grounded: a.grounded,
        tick: if has_enemies { tick } else { 0 },
    };
    seen.insert(key_of(&world.spawn, 0), 0);

    // The node whose plan we fall back to when no win is found: furthest
    // right, then earliest.
    let mut best: u32 = 0;
    let mut best_x = world.spawn.x;
    let mut goal: Option<u32> = None;
    let mut expanded = 0usize;

    while let Some(Reverse((_, _, _, idx))) = open.pop() {
        let (agent, tick, jumps) = {
            let n = &nodes[idx as usize];
            (n.agent, n.tick, n.jumps)
        };
        // A cheaper route to this state has already been expanded.
        if seen.get(&key_of(&agent, tick)).is_some_and(|&g| g < tick) {
            continue;
        }
        if agent.x >= goal_x {
            goal = Some(idx);
            break;
        }
        if agent.x > best_x {
            best_x = agent.x;
            best = idx;
        }
        expanded += 1;
        if expanded >= budget || tick >= tick_limit {
            continue;
        }
        for (ai, &act) in ACTIONS.iter().enumerate() {
            if act.jump && (!agent.grounded || jumps >= jump_cap) {
                // Airborne jump presses are no-ops; grounded ones past the
                // cap are refused rather than spent.
                continue;
            }
            let mut child = agent;
            let jumped = phys_step(world, &mut child, act);
            let mut stomps = 0;
            if !resolve_contacts(&mut child, timeline.frame(tick + 1), None, &mut stomps) {
                continue;
            }
            if child.y >= world.height as i32 * SUBS {
                continue;
            }
            let ctick = tick + 1;
            let cjumps = jumps + jumped as u32;
            let k = key_of(&child, ctick);
            if seen.get(&k).is_some_and(|&g| g <= ctick) {
                continue;
            }
            seen.insert(k, ctick);
            let cidx = nodes.len() as u32;
            nodes.push(Node { agent: child, tick: ctick, jumps: cjumps, parent: idx, action: ai as u8 });
            open.push(Reverse((ctick + heuristic(child.x, goal_x), cjumps, rng.next_u32(), cidx)));
        }
        if expanded >= budget {
            break;
        }
    }

    let end = goal.unwrap_or(best);
    let mut actions: Vec<Action> = Vec::new();
    let mut at = end;
    while at != 0 {
        let n = &nodes[at as usize];
        actions.push(ACTIONS[n.action as usize]);
        at = n.parent;
    }
    actions.reverse();
    let result = replay(world, timeline, &actions, seed);
    (actions, result)
}
