//! Execution under the FSYNC, SSYNC and ASYNC schedulers.
//!
//! FSYNC and SSYNC steps are atomic Look-Compute-Move cycles read against the
//! pre-step configuration. ASYNC splits every cycle into three scheduler
//! visible phase advances: Look (freeze the matches of the current snapshot),
//! Compute (pick a match and switch the light) and Move.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::{AlgorithmSpec, GuardCell};
use crate::error::{Error, Result};
use crate::grid::{Color, ColorBag, Configuration, ConfigurationJson, Direction, Grid, NodeId, Symmetry};
use crate::observation::{ball_offsets, Orientation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynchronyModel {
    Fsync,
    Ssync,
    Async,
}

impl SynchronyModel {
    pub const ALL: [SynchronyModel; 3] = [SynchronyModel::Fsync, SynchronyModel::Ssync, SynchronyModel::Async];

    pub fn as_str(self) -> &'static str {
        match self {
            SynchronyModel::Fsync => "fsync",
            SynchronyModel::Ssync => "ssync",
            SynchronyModel::Async => "async",
        }
    }
}

impl fmt::Display for SynchronyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SynchronyModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fsync" => Ok(SynchronyModel::Fsync),
            "ssync" => Ok(SynchronyModel::Ssync),
            "async" => Ok(SynchronyModel::Async),
            other => Err(Error::Usage(format!("unknown model `{other}`"))),
        }
    }
}

/// One way a robot may act on its snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Choice {
    /// Index into the algorithm's rule list.
    pub rule: usize,
    pub orientation: Orientation,
    pub new_color: Color,
    /// Global direction of the move, `None` for idle.
    pub step: Option<Direction>,
}

impl Choice {
    fn outcome(&self) -> (Color, Option<Direction>) {
        (self.new_color, self.step)
    }
}

/// Progress of a robot through its current cycle.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RobotPhase {
    Ready,
    /// Look done. Holds every match of the frozen snapshot, one per distinct
    /// outcome; which one fires is decided at Compute.
    Observed(Vec<Choice>),
    /// Compute done, light already switched; the move is still pending.
    Committed(Choice),
}

impl RobotPhase {
    pub fn name(&self) -> &'static str {
        match self {
            RobotPhase::Ready => "ready",
            RobotPhase::Observed(_) => "observed",
            RobotPhase::Committed(_) => "committed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Robot {
    /// Bookkeeping only; never consulted when matching rules.
    pub id: usize,
    pub pos: NodeId,
    pub color: Color,
    pub phase: RobotPhase,
}

/// Bitmap of visited nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Visited {
    bits: Vec<u64>,
    count: usize,
}

impl Visited {
    pub fn new(nodes: usize) -> Self {
        Visited {
            bits: vec![0; nodes.div_ceil(64)],
            count: 0,
        }
    }

    pub fn insert(&mut self, idx: usize) {
        let (w, b) = (idx / 64, idx % 64);
        if self.bits[w] & (1 << b) == 0 {
            self.bits[w] |= 1 << b;
            self.count += 1;
        }
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.bits[idx / 64] & (1 << (idx % 64)) != 0
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_superset(&self, other: &Visited) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & b == *b)
    }
}

/// A configuration together with per-robot phases and the visited set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExecState {
    robots: Vec<Robot>,
    visited: Visited,
}

impl ExecState {
    /// Fresh state: every robot ready, occupied nodes visited.
    pub fn from_configuration(g: &Grid, c: &Configuration) -> Self {
        let robots = c
            .robots()
            .enumerate()
            .map(|(id, (pos, color))| Robot {
                id,
                pos,
                color,
                phase: RobotPhase::Ready,
            })
            .collect();
        let mut visited = Visited::new(g.node_count());
        for v in c.occupied_nodes() {
            visited.insert(g.index(v));
        }
        let mut s = ExecState { robots, visited };
        s.normalize();
        s
    }

    fn normalize(&mut self) {
        self.robots
            .sort_by(|a, b| (a.pos, a.color, &a.phase, a.id).cmp(&(b.pos, b.color, &b.phase, b.id)));
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn robot(&self, id: usize) -> Option<&Robot> {
        self.robots.iter().find(|r| r.id == id)
    }

    pub fn visited(&self) -> &Visited {
        &self.visited
    }

    pub fn config(&self) -> Configuration {
        Configuration::from_robots(self.robots.iter().map(|r| (r.pos, r.color)))
    }

    pub fn all_ready(&self) -> bool {
        self.robots.iter().all(|r| r.phase == RobotPhase::Ready)
    }

    pub fn unvisited(&self, g: &Grid) -> Vec<NodeId> {
        g.nodes().filter(|v| !self.visited.contains(g.index(*v))).collect()
    }

    /// Identity-free encoding, suitable for hashing.
    pub fn key(&self) -> Vec<u8> {
        self.encode(None, None)
    }

    /// Least encoding over the images of this state under `group`.
    pub fn canonical_key(&self, g: &Grid, group: &[Symmetry]) -> Vec<u8> {
        group
            .iter()
            .map(|s| self.encode(Some(g), Some(*s)))
            .min()
            .unwrap_or_else(|| self.key())
    }

    /// Image under a grid symmetry.
    pub fn transformed(&self, g: &Grid, s: Symmetry) -> ExecState {
        let map_choice = |c: &Choice| Choice {
            step: c.step.map(|d| s.apply_direction(d)),
            ..*c
        };
        let robots = self
            .robots
            .iter()
            .map(|r| Robot {
                id: r.id,
                pos: s.apply(g, r.pos),
                color: r.color,
                phase: match &r.phase {
                    RobotPhase::Ready => RobotPhase::Ready,
                    RobotPhase::Observed(cs) => RobotPhase::Observed(cs.iter().map(map_choice).collect()),
                    RobotPhase::Committed(c) => RobotPhase::Committed(map_choice(c)),
                },
            })
            .collect();
        let mut visited = Visited::new(g.node_count());
        for v in g.nodes() {
            if self.visited.contains(g.index(v)) {
                visited.insert(g.index(s.apply(g, v)));
            }
        }
        let mut out = ExecState { robots, visited };
        out.normalize();
        out
    }

    fn encode(&self, g: Option<&Grid>, s: Option<Symmetry>) -> Vec<u8> {
        let dir = |d: Option<Direction>| -> u8 {
            match d.map(|d| s.map_or(d, |s| s.apply_direction(d))) {
                None => 0,
                Some(Direction::North) => 1,
                Some(Direction::East) => 2,
                Some(Direction::South) => 3,
                Some(Direction::West) => 4,
            }
        };
        let mut parts: Vec<Vec<u8>> = self
            .robots
            .iter()
            .map(|r| {
                let pos = match (g, s) {
                    (Some(g), Some(s)) => s.apply(g, r.pos),
                    _ => r.pos,
                };
                let mut p = vec![pos.i as u8, pos.j as u8, r.color.as_char() as u8];
                match &r.phase {
                    RobotPhase::Ready => p.push(0),
                    RobotPhase::Observed(cs) => {
                        p.push(1);
                        let mut outs: Vec<(u8, u8)> =
                            cs.iter().map(|c| (c.new_color.as_char() as u8, dir(c.step))).collect();
                        outs.sort();
                        outs.dedup();
                        p.push(outs.len() as u8);
                        for (c, d) in outs {
                            p.push(c);
                            p.push(d);
                        }
                    }
                    RobotPhase::Committed(c) => {
                        p.push(2);
                        p.push(c.new_color.as_char() as u8);
                        p.push(dir(c.step));
                    }
                }
                p
            })
            .collect();
        parts.sort();
        let mut out: Vec<u8> = parts.concat();
        out.push(0xff);
        match (g, s) {
            // Same layout as the little-endian words below, so that images
            // under different symmetries compare like for like.
            (Some(g), Some(s)) if s != Symmetry::Identity => {
                let mut bits = vec![0u8; self.visited.bits.len() * 8];
                for v in g.nodes() {
                    if self.visited.contains(g.index(v)) {
                        let w = g.index(s.apply(g, v));
                        bits[w / 8] |= 1 << (w % 8);
                    }
                }
                out.extend(bits);
            }
            _ => {
                for w in &self.visited.bits {
                    out.extend(w.to_le_bytes());
                }
            }
        }
        out
    }
}

/// A robot that some rule enables, with the rule label and matching frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enabled {
    pub robot: usize,
    pub rule: String,
    pub orientation: Orientation,
}

/// Record of one robot's activity in a transition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fired {
    pub robot: usize,
    pub rule: String,
    pub orientation: Orientation,
    /// `cycle` for atomic FSYNC/SSYNC cycles, else `look`, `compute` or `move`.
    pub event: String,
}

#[derive(Clone, Debug)]
pub struct Transition {
    pub state: ExecState,
    pub fired: Vec<Fired>,
    /// No robot moved and no light changed.
    pub phase_only: bool,
}

/// A rule guard turned into global offsets for one orientation.
#[derive(Clone, Debug)]
struct Compiled {
    rule: usize,
    orientation: Orientation,
    self_color: Color,
    center: ColorBag,
    cells: Vec<((i32, i32), GuardCell)>,
    new_color: Color,
    step: Option<Direction>,
}

/// Dense occupancy table for the current configuration.
struct Occupancy {
    cells: Vec<ColorBag>,
}

impl Occupancy {
    fn new(g: &Grid, robots: &[Robot]) -> Self {
        let mut cells = vec![ColorBag::new(); g.node_count()];
        for r in robots {
            cells[g.index(r.pos)].insert(r.color);
        }
        Occupancy { cells }
    }
}

/// Scheduling policy for single traces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerPolicy {
    /// Robots take turns in id order; in ASYNC a robot finishes its cycle
    /// before the next one starts.
    RoundRobin,
    /// Uniform over the successor set.
    Random(u64),
    /// Least successor in key order.
    First,
}

impl SchedulerPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerPolicy::RoundRobin => "round-robin",
            SchedulerPolicy::Random(_) => "random",
            SchedulerPolicy::First => "first",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            SchedulerPolicy::Random(s) => *s,
            _ => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    TerminalFullCoverage,
    TerminalPartialCoverage,
    StepLimit,
    CycleDetected,
}

#[derive(Clone, Debug)]
pub struct TraceStep {
    pub t: usize,
    pub state: ExecState,
    pub fired: Vec<Fired>,
    pub phase_only: bool,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub algorithm: String,
    pub grid: Grid,
    pub model: SynchronyModel,
    pub policy: String,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
    pub outcome: Outcome,
}

impl Trace {
    /// Configuration sequence with consecutive repeats (phase-only steps) removed.
    pub fn configurations(&self) -> Vec<Configuration> {
        let mut out: Vec<Configuration> = Vec::new();
        for step in &self.steps {
            let c = step.state.config();
            if out.last() != Some(&c) {
                out.push(c);
            }
        }
        out
    }

    pub fn final_state(&self) -> &ExecState {
        &self.steps.last().expect("traces start with the initial state").state
    }

    pub fn to_json(&self) -> TraceJson {
        TraceJson {
            algorithm: self.algorithm.clone(),
            grid: [self.grid.rows(), self.grid.cols()],
            model: self.model.as_str().to_string(),
            policy: self.policy.clone(),
            seed: self.seed,
            steps: self
                .steps
                .iter()
                .map(|s| StepJson {
                    t: s.t,
                    state: s.state.config().to_json(),
                    phases: s
                        .state
                        .robots()
                        .iter()
                        .map(|r| PhaseJson {
                            robot: r.id,
                            i: r.pos.i,
                            j: r.pos.j,
                            color: r.color.to_string(),
                            phase: r.phase.name().to_string(),
                        })
                        .collect(),
                    fired: s.fired.clone(),
                    phase_only: s.phase_only,
                })
                .collect(),
            outcome: self.outcome,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceJson {
    pub algorithm: String,
    pub grid: [usize; 2],
    pub model: String,
    pub policy: String,
    pub seed: u64,
    pub steps: Vec<StepJson>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepJson {
    pub t: usize,
    pub state: ConfigurationJson,
    pub phases: Vec<PhaseJson>,
    pub fired: Vec<Fired>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub phase_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseJson {
    pub robot: usize,
    pub i: usize,
    pub j: usize,
    pub color: String,
    pub phase: String,
}

/// An algorithm bound to a grid, with guards pre-rotated into global frames.
pub struct Engine<'a> {
    algo: &'a AlgorithmSpec,
    grid: Grid,
    compiled: Vec<Compiled>,
}

impl<'a> Engine<'a> {
    /// Binds `algo` to `grid`; grids below the declared minima are rejected.
    pub fn new(algo: &'a AlgorithmSpec, grid: Grid) -> Result<Self> {
        if grid.rows() < algo.min_m || grid.cols() < algo.min_n {
            return Err(Error::GridBelowMinimum {
                m: grid.rows(),
                n: grid.cols(),
                min_m: algo.min_m,
                min_n: algo.min_n,
            });
        }
        Ok(Engine::unchecked(algo, grid))
    }

    /// Like [`Engine::new`] without the minimum-size check.
    pub fn unchecked(algo: &'a AlgorithmSpec, grid: Grid) -> Self {
        let mut compiled = Vec::new();
        for (idx, rule) in algo.rules.iter().enumerate() {
            let mut seen: Vec<(Vec<((i32, i32), GuardCell)>, Option<Direction>)> = Vec::new();
            for o in Orientation::all(algo.chirality) {
                let mut cells: Vec<((i32, i32), GuardCell)> = ball_offsets(algo.phi)
                    .iter()
                    .zip(rule.guard.cells())
                    .filter(|(off, _)| **off != (0, 0))
                    .map(|(off, cell)| (o.to_global(*off), cell.clone()))
                    .collect();
                cells.sort();
                let step = rule
                    .action
                    .movement
                    .offset()
                    .map(|m| Direction::from_offset(o.to_global(m)).expect("unit move"));
                // Symmetric guards produce the same global pattern twice.
                if seen.iter().any(|(c, s)| *c == cells && *s == step) {
                    continue;
                }
                seen.push((cells.clone(), step));
                let GuardCell::Exact(center) = rule.guard.center().clone() else {
                    unreachable!("validated guards have an exact center")
                };
                compiled.push(Compiled {
                    rule: idx,
                    orientation: o,
                    self_color: rule.guard.self_color(),
                    center,
                    cells,
                    new_color: rule.action.new_color,
                    step,
                });
            }
        }
        Engine { algo, grid, compiled }
    }

    pub fn algorithm(&self) -> &AlgorithmSpec {
        self.algo
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn initial_state(&self) -> ExecState {
        ExecState::from_configuration(&self.grid, &self.algo.init)
    }

    /// Symmetries that commute with the algorithm: reflections only when the
    /// robots lack a common chirality.
    pub fn symmetry_group(&self) -> Vec<Symmetry> {
        Symmetry::group(&self.grid, !self.algo.chirality)
    }

    fn matches<'s>(&'s self, occ: &'s Occupancy, pos: NodeId, color: Color) -> impl Iterator<Item = &'s Compiled> + 's {
        let here = occ.cells[self.grid.index(pos)].clone();
        self.compiled.iter().filter(move |c| {
            c.self_color == color
                && c.center == here
                && c.cells.iter().all(|((gi, gj), want)| match self.grid.offset(pos, *gi, *gj) {
                    None => matches!(want, GuardCell::Boundary | GuardCell::EmptyOrBoundary),
                    Some(v) => {
                        let have = &occ.cells[self.grid.index(v)];
                        match want {
                            GuardCell::Empty | GuardCell::EmptyOrBoundary => have.is_empty(),
                            GuardCell::Boundary => false,
                            GuardCell::Exact(bag) => bag == have,
                        }
                    }
                })
        })
    }

    /// Distinct outcomes available to a robot, least rule index first.
    fn choices(&self, occ: &Occupancy, pos: NodeId, color: Color) -> Vec<Choice> {
        let mut out: Vec<Choice> = Vec::new();
        for c in self.matches(occ, pos, color) {
            let choice = Choice {
                rule: c.rule,
                orientation: c.orientation,
                new_color: c.new_color,
                step: c.step,
            };
            if !out.iter().any(|x| x.outcome() == choice.outcome()) {
                out.push(choice);
            }
        }
        out
    }

    fn check_config(&self, c: &Configuration) -> Result<()> {
        if c.robot_count() != self.algo.k {
            return Err(Error::InconsistentConfiguration(format!(
                "{} robots, algorithm declares {}",
                c.robot_count(),
                self.algo.k
            )));
        }
        if let Some(col) = c.colors().into_iter().find(|col| !self.algo.colors.contains(col)) {
            return Err(Error::InconsistentConfiguration(format!("color {col} is not declared")));
        }
        if !c.fits(&self.grid) {
            return Err(Error::InconsistentConfiguration("robot outside the grid".into()));
        }
        Ok(())
    }

    /// Every (robot, rule, orientation) whose guard matches; robots are
    /// indexed in `Configuration::robots` order. Empty iff `c` is terminal.
    pub fn enabled(&self, c: &Configuration) -> Result<Vec<Enabled>> {
        self.check_config(c)?;
        let state = ExecState::from_configuration(&self.grid, c);
        let occ = Occupancy::new(&self.grid, &state.robots);
        let mut out = Vec::new();
        for (idx, (pos, color)) in c.robots().enumerate() {
            for (ri, rule) in self.algo.rules.iter().enumerate() {
                for o in Orientation::all(self.algo.chirality) {
                    if self.guard_matches_at(&occ, pos, color, ri, o) {
                        out.push(Enabled {
                            robot: idx,
                            rule: rule.label.clone(),
                            orientation: o,
                        });
                    }
                }
            }
        }
        out.sort_by(|a, b| (a.robot, &a.rule, a.orientation).cmp(&(b.robot, &b.rule, b.orientation)));
        Ok(out)
    }

    fn guard_matches_at(&self, occ: &Occupancy, pos: NodeId, color: Color, rule: usize, o: Orientation) -> bool {
        let guard = &self.algo.rules[rule].guard;
        guard.self_color() == color
            && ball_offsets(self.algo.phi).iter().zip(guard.cells()).all(|(off, want)| {
                let (gi, gj) = o.to_global(*off);
                match self.grid.offset(pos, gi, gj) {
                    None => matches!(want, GuardCell::Boundary | GuardCell::EmptyOrBoundary),
                    Some(v) => {
                        let have = &occ.cells[self.grid.index(v)];
                        match want {
                            GuardCell::Empty | GuardCell::EmptyOrBoundary => have.is_empty(),
                            GuardCell::Boundary => false,
                            GuardCell::Exact(bag) => bag == have,
                        }
                    }
                }
            })
    }

    fn fired(&self, robot: usize, c: &Choice, event: &str) -> Fired {
        Fired {
            robot,
            rule: self.algo.rules[c.rule].label.clone(),
            orientation: c.orientation,
            event: event.to_string(),
        }
    }

    fn step_pos(&self, pos: NodeId, step: Option<Direction>) -> NodeId {
        match step {
            None => pos,
            Some(d) => {
                let (di, dj) = d.offset();
                self.grid
                    .offset(pos, di, dj)
                    .expect("guards only allow moves onto existing nodes")
            }
        }
    }

    fn finish(&self, mut s: ExecState) -> ExecState {
        for r in &s.robots {
            s.visited.insert(self.grid.index(r.pos));
        }
        s.normalize();
        s
    }

    /// Atomic cycles of the robots in `active` (index, choice), all reading
    /// the pre-step configuration.
    fn apply_cycles(&self, s: &ExecState, active: &[(usize, Choice)]) -> Transition {
        let mut next = s.clone();
        let mut fired = Vec::new();
        for (idx, choice) in active {
            let r = &mut next.robots[*idx];
            r.color = choice.new_color;
            r.pos = self.step_pos(r.pos, choice.step);
            fired.push(self.fired(r.id, choice, "cycle"));
        }
        let next = self.finish(next);
        let phase_only = next.config() == s.config();
        Transition {
            state: next,
            fired,
            phase_only,
        }
    }

    fn ready_choices(&self, s: &ExecState) -> Vec<(usize, Vec<Choice>)> {
        let occ = Occupancy::new(&self.grid, &s.robots);
        s.robots
            .iter()
            .enumerate()
            .map(|(idx, r)| (idx, self.choices(&occ, r.pos, r.color)))
            .filter(|(_, cs)| !cs.is_empty())
            .collect()
    }

    fn product(&self, s: &ExecState, enabled: &[&(usize, Vec<Choice>)], out: &mut Vec<Transition>) {
        let mut picks = vec![0usize; enabled.len()];
        loop {
            let active: Vec<(usize, Choice)> = enabled
                .iter()
                .zip(&picks)
                .map(|((idx, cs), p)| (*idx, cs[*p]))
                .collect();
            out.push(self.apply_cycles(s, &active));
            let mut k = 0;
            loop {
                if k == picks.len() {
                    return;
                }
                picks[k] += 1;
                if picks[k] < enabled[k].1.len() {
                    break;
                }
                picks[k] = 0;
                k += 1;
            }
        }
    }

    fn dedup(&self, s: &ExecState, mut ts: Vec<Transition>) -> Vec<Transition> {
        let own = s.key();
        let mut seen = HashSet::new();
        ts.retain(|t| {
            let k = t.state.key();
            k != own && seen.insert(k)
        });
        ts
    }

    /// All robots that are enabled act at once.
    pub fn fsync_successors(&self, s: &ExecState) -> Vec<Transition> {
        debug_assert!(s.all_ready());
        let enabled = self.ready_choices(s);
        if enabled.is_empty() {
            return Vec::new();
        }
        let refs: Vec<_> = enabled.iter().collect();
        let mut out = Vec::new();
        self.product(s, &refs, &mut out);
        self.dedup(s, out)
    }

    /// Any non-empty subset of the enabled robots acts.
    pub fn ssync_successors(&self, s: &ExecState) -> Vec<Transition> {
        debug_assert!(s.all_ready());
        let enabled = self.ready_choices(s);
        let mut out = Vec::new();
        for mask in 1u64..(1u64 << enabled.len()) {
            let subset: Vec<_> = enabled
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, e)| e)
                .collect();
            self.product(s, &subset, &mut out);
        }
        self.dedup(s, out)
    }

    /// One phase advance of one robot. Looks that find no matching rule are
    /// stutters and are not generated.
    pub fn async_successors(&self, s: &ExecState) -> Vec<Transition> {
        let occ = Occupancy::new(&self.grid, &s.robots);
        let mut out = Vec::new();
        for (idx, r) in s.robots.iter().enumerate() {
            match &r.phase {
                RobotPhase::Ready => {
                    let cs = self.choices(&occ, r.pos, r.color);
                    if let Some(first) = cs.first() {
                        let fired = vec![self.fired(r.id, first, "look")];
                        let mut next = s.clone();
                        next.robots[idx].phase = RobotPhase::Observed(cs);
                        out.push(Transition {
                            state: self.finish(next),
                            fired,
                            phase_only: true,
                        });
                    }
                }
                RobotPhase::Observed(cs) => {
                    for c in cs {
                        let mut next = s.clone();
                        next.robots[idx].color = c.new_color;
                        next.robots[idx].phase = RobotPhase::Committed(*c);
                        out.push(Transition {
                            state: self.finish(next),
                            fired: vec![self.fired(r.id, c, "compute")],
                            phase_only: c.new_color == r.color,
                        });
                    }
                }
                RobotPhase::Committed(c) => {
                    let mut next = s.clone();
                    next.robots[idx].pos = self.step_pos(r.pos, c.step);
                    next.robots[idx].phase = RobotPhase::Ready;
                    out.push(Transition {
                        state: self.finish(next),
                        fired: vec![self.fired(r.id, c, "move")],
                        phase_only: c.step.is_none(),
                    });
                }
            }
        }
        self.dedup(s, out)
    }

    pub fn successors(&self, model: SynchronyModel, s: &ExecState) -> Vec<Transition> {
        match model {
            SynchronyModel::Fsync => self.fsync_successors(s),
            SynchronyModel::Ssync => self.ssync_successors(s),
            SynchronyModel::Async => self.async_successors(s),
        }
    }

    /// Terminal: every robot ready and none enabled.
    pub fn is_terminal(&self, s: &ExecState) -> bool {
        s.all_ready() && self.ready_choices(s).is_empty()
    }

    pub fn default_max_steps(&self) -> usize {
        16 * self.grid.node_count() * self.algo.k.max(1)
    }

    /// Runs one execution from the initial configuration.
    pub fn run(&self, model: SynchronyModel, policy: SchedulerPolicy, max_steps: Option<usize>) -> Trace {
        self.run_from(self.initial_state(), model, policy, max_steps)
    }

    pub fn run_from(
        &self,
        start: ExecState,
        model: SynchronyModel,
        policy: SchedulerPolicy,
        max_steps: Option<usize>,
    ) -> Trace {
        let max_steps = max_steps.unwrap_or_else(|| self.default_max_steps());
        let mut rng = ChaCha8Rng::seed_from_u64(policy.seed());
        let mut rr = RoundRobin::default();
        let mut seen = HashSet::new();
        let mut state = start;
        seen.insert(state.key());
        let mut steps = vec![TraceStep {
            t: 0,
            state: state.clone(),
            fired: Vec::new(),
            phase_only: false,
        }];
        let outcome = loop {
            let mut succ = self.successors(model, &state);
            if succ.is_empty() {
                break if state.visited.count() == self.grid.node_count() {
                    Outcome::TerminalFullCoverage
                } else {
                    Outcome::TerminalPartialCoverage
                };
            }
            if steps.len() > max_steps {
                break Outcome::StepLimit;
            }
            let next = match policy {
                SchedulerPolicy::First => {
                    succ.sort_by_cached_key(|t| t.state.key());
                    succ.swap_remove(0)
                }
                SchedulerPolicy::Random(_) => {
                    succ.sort_by_cached_key(|t| t.state.key());
                    let pick = rng.gen_range(0..succ.len());
                    succ.swap_remove(pick)
                }
                SchedulerPolicy::RoundRobin => rr.pick(self, model, &state),
            };
            state = next.state;
            steps.push(TraceStep {
                t: steps.len(),
                state: state.clone(),
                fired: next.fired,
                phase_only: next.phase_only,
            });
            if !seen.insert(state.key()) {
                break Outcome::CycleDetected;
            }
        };
        Trace {
            algorithm: self.algo.name.clone(),
            grid: self.grid,
            model,
            policy: policy.name().to_string(),
            seed: policy.seed(),
            steps,
            outcome,
        }
    }
}

#[derive(Default)]
struct RoundRobin {
    next_id: usize,
    current: Option<usize>,
}

impl RoundRobin {
    fn pick(&mut self, e: &Engine<'_>, model: SynchronyModel, s: &ExecState) -> Transition {
        let k = s.robots.len();
        let by_id: BTreeMap<usize, usize> = s.robots.iter().enumerate().map(|(idx, r)| (r.id, idx)).collect();
        let ids: Vec<usize> = by_id.keys().copied().collect();
        let rotation = |from: usize| {
            let start = ids.iter().position(|id| *id >= from).unwrap_or(0);
            (0..k).map(move |x| ids[(start + x) % k])
        };
        match model {
            SynchronyModel::Fsync => {
                let enabled = e.ready_choices(s);
                let active: Vec<_> = enabled.iter().map(|(idx, cs)| (*idx, cs[0])).collect();
                e.apply_cycles(s, &active)
            }
            SynchronyModel::Ssync => {
                let enabled: BTreeMap<usize, Choice> = e
                    .ready_choices(s)
                    .into_iter()
                    .map(|(idx, cs)| (s.robots[idx].id, cs[0]))
                    .collect();
                let id = rotation(self.next_id)
                    .find(|id| enabled.contains_key(id))
                    .expect("caller checked that some robot is enabled");
                self.next_id = id + 1;
                e.apply_cycles(s, &[(by_id[&id], enabled[&id])])
            }
            SynchronyModel::Async => {
                let id = match self.current {
                    Some(id) => id,
                    None => {
                        let occ = Occupancy::new(&e.grid, &s.robots);
                        let id = rotation(self.next_id)
                            .find(|id| {
                                let r = &s.robots[by_id[id]];
                                r.phase != RobotPhase::Ready || !e.choices(&occ, r.pos, r.color).is_empty()
                            })
                            .expect("caller checked that some robot can act");
                        self.current = Some(id);
                        id
                    }
                };
                let idx = by_id[&id];
                let r = &s.robots[idx];
                let t = match &r.phase {
                    RobotPhase::Ready => {
                        let occ = Occupancy::new(&e.grid, &s.robots);
                        let cs = e.choices(&occ, r.pos, r.color);
                        let mut next = s.clone();
                        let fired = vec![e.fired(id, &cs[0], "look")];
                        next.robots[idx].phase = RobotPhase::Observed(cs);
                        Transition {
                            state: e.finish(next),
                            fired,
                            phase_only: true,
                        }
                    }
                    RobotPhase::Observed(cs) => {
                        let c = cs[0];
                        let mut next = s.clone();
                        next.robots[idx].color = c.new_color;
                        next.robots[idx].phase = RobotPhase::Committed(c);
                        Transition {
                            state: e.finish(next),
                            fired: vec![e.fired(id, &c, "compute")],
                            phase_only: c.new_color == r.color,
                        }
                    }
                    RobotPhase::Committed(c) => {
                        let mut next = s.clone();
                        next.robots[idx].pos = e.step_pos(r.pos, c.step);
                        next.robots[idx].phase = RobotPhase::Ready;
                        self.current = None;
                        self.next_id = id + 1;
                        Transition {
                            state: e.finish(next),
                            fired: vec![e.fired(id, c, "move")],
                            phase_only: c.step.is_none(),
                        }
                    }
                };
                t
            }
        }
    }
}

/// Robots enabled in `c`; empty iff `c` is terminal.
pub fn enabled(a: &AlgorithmSpec, g: Grid, c: &Configuration) -> Result<Vec<Enabled>> {
    Engine::unchecked(a, g).enabled(c)
}

pub fn fsync_successors(a: &AlgorithmSpec, g: Grid, s: &ExecState) -> Vec<ExecState> {
    Engine::unchecked(a, g).fsync_successors(s).into_iter().map(|t| t.state).collect()
}

pub fn ssync_successors(a: &AlgorithmSpec, g: Grid, s: &ExecState) -> Vec<ExecState> {
    Engine::unchecked(a, g).ssync_successors(s).into_iter().map(|t| t.state).collect()
}

pub fn async_successors(a: &AlgorithmSpec, g: Grid, s: &ExecState) -> Vec<ExecState> {
    Engine::unchecked(a, g).async_successors(s).into_iter().map(|t| t.state).collect()
}

/// Runs `a` on `g`. `max_steps` defaults to `16*m*n*k`.
pub fn run(
    a: &AlgorithmSpec,
    g: Grid,
    model: SynchronyModel,
    policy: SchedulerPolicy,
    max_steps: Option<usize>,
) -> Result<Trace> {
    Ok(Engine::new(a, g)?.run(model, policy, max_steps))
}
