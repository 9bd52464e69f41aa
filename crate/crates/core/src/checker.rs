//! Exhaustive state-space search.
//!
//! States are explored breadth first and merged modulo the symmetries the
//! algorithm commutes with. The quotient graph is then scanned for bad sinks
//! and for cycles; a violation is turned back into a concrete trace by
//! replaying engine successors from the initial state.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::AlgorithmSpec;
use crate::engine::{Engine, ExecState, Outcome, SynchronyModel, Trace, TraceJson, TraceStep};
use crate::grid::{is_end_node, is_inner_node, Configuration, ConfigurationJson, Grid, NodeId, Symmetry};

pub const DEFAULT_STATE_BUDGET: usize = 50_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Verified,
    Nontermination,
    PartialCoverage,
    Error,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Verified => "VERIFIED",
            Verdict::Nontermination => "NONTERMINATION",
            Verdict::PartialCoverage => "PARTIAL_COVERAGE",
            Verdict::Error => "ERROR",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    /// Maximum number of canonical states before giving up.
    pub state_budget: usize,
    /// Merge states that are images of each other under a grid symmetry.
    pub symmetry: bool,
    /// Stop exploring at the first sink that is not a full-coverage
    /// terminal. The verdict and witness are the same as for a full run
    /// that reports that sink, but `terminal` and `stats` only describe the
    /// part of the graph explored so far, and cycles elsewhere go unnoticed.
    pub stop_at_bad_sink: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            state_budget: DEFAULT_STATE_BUDGET,
            symmetry: true,
            stop_at_bad_sink: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckStats {
    /// Distinct concrete states generated.
    pub states: usize,
    /// Distinct states modulo symmetry, i.e. nodes of the explored graph.
    pub canonical: usize,
    pub max_frontier: usize,
    pub ms: u64,
}

/// Concrete execution ending in a violation: a bad sink, or a cycle whose
/// first state is `states[cycle_start]` and whose closing transition leads
/// from the last state back to it.
#[derive(Clone, Debug)]
pub struct Witness {
    pub trace: Trace,
    pub cycle_start: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub algorithm: String,
    pub grid: Grid,
    pub model: SynchronyModel,
    pub verdict: Verdict,
    /// Terminal configurations reached, one representative per symmetry class.
    pub terminal: Vec<Configuration>,
    /// Unvisited nodes of the bad terminal, for PARTIAL_COVERAGE.
    pub unvisited: Vec<NodeId>,
    pub witness: Option<Witness>,
    pub stats: CheckStats,
    pub message: Option<String>,
}

impl CheckReport {
    fn error(a: &AlgorithmSpec, g: Grid, model: SynchronyModel, message: String, stats: CheckStats) -> Self {
        CheckReport {
            algorithm: a.name.clone(),
            grid: g,
            model,
            verdict: Verdict::Error,
            terminal: Vec::new(),
            unvisited: Vec::new(),
            witness: None,
            stats,
            message: Some(message),
        }
    }

    pub fn to_json(&self) -> CheckReportJson {
        CheckReportJson {
            algorithm: self.algorithm.clone(),
            grid: [self.grid.rows(), self.grid.cols()],
            model: self.model.as_str().to_string(),
            verdict: self.verdict,
            terminal: self.terminal.iter().map(Configuration::to_json).collect(),
            stats: self.stats,
            witness: self.witness.as_ref().map(|w| w.trace.to_json()),
            cycle_start: self.witness.as_ref().and_then(|w| w.cycle_start),
            unvisited: self.unvisited.iter().map(|v| [v.i, v.j]).collect(),
            message: self.message.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReportJson {
    pub algorithm: String,
    pub grid: [usize; 2],
    pub model: String,
    pub verdict: Verdict,
    pub terminal: Vec<ConfigurationJson>,
    pub stats: CheckStats,
    pub witness: Option<TraceJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_start: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unvisited: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

/// The explored quotient graph.
struct Explored {
    keys: Vec<Vec<u8>>,
    reps: Vec<ExecState>,
    edges: Vec<Vec<u32>>,
    parent: Vec<u32>,
}

const NO_PARENT: u32 = u32::MAX;

fn fingerprint(s: &ExecState) -> u64 {
    let mut h = DefaultHasher::new();
    s.key().hash(&mut h);
    h.finish()
}

pub fn check(a: &AlgorithmSpec, g: Grid, model: SynchronyModel) -> CheckReport {
    check_with(a, g, model, &CheckOptions::default())
}

pub fn check_with(a: &AlgorithmSpec, g: Grid, model: SynchronyModel, opts: &CheckOptions) -> CheckReport {
    let started = Instant::now();
    let engine = match Engine::new(a, g) {
        Ok(e) => e,
        Err(e) => return CheckReport::error(a, g, model, e.to_string(), CheckStats::default()),
    };
    let group = if opts.symmetry {
        engine.symmetry_group()
    } else {
        vec![Symmetry::Identity]
    };

    let mut stats = CheckStats::default();
    let mut concrete: HashSet<u64> = HashSet::new();
    let mut index: HashMap<Vec<u8>, u32> = HashMap::new();
    let mut ex = Explored {
        keys: Vec::new(),
        reps: Vec::new(),
        edges: Vec::new(),
        parent: Vec::new(),
    };

    let init = engine.initial_state();
    concrete.insert(fingerprint(&init));
    let key = init.canonical_key(&g, &group);
    index.insert(key.clone(), 0);
    ex.keys.push(key);
    ex.reps.push(init);
    ex.parent.push(NO_PARENT);
    let mut frontier: VecDeque<u32> = VecDeque::from([0]);

    while let Some(cur) = frontier.pop_front() {
        stats.max_frontier = stats.max_frontier.max(frontier.len() + 1);
        let succ = engine.successors(model, &ex.reps[cur as usize]);
        if opts.stop_at_bad_sink && succ.is_empty() {
            let s = &ex.reps[cur as usize];
            if !engine.is_terminal(s) || s.visited().count() < g.node_count() {
                // Sinks are scanned below in id order, which is the order
                // they leave the queue, so this is the sink reported anyway.
                // States still queued have larger ids and get no edges.
                ex.edges.push(Vec::new());
                ex.edges.resize(ex.reps.len(), Vec::new());
                break;
            }
        }
        let mut out: Vec<u32> = Vec::with_capacity(succ.len());
        for t in succ {
            concrete.insert(fingerprint(&t.state));
            let key = t.state.canonical_key(&g, &group);
            let id = match index.get(&key) {
                Some(id) => *id,
                None => {
                    if ex.reps.len() >= opts.state_budget {
                        stats.states = concrete.len();
                        stats.canonical = ex.reps.len();
                        stats.ms = started.elapsed().as_millis() as u64;
                        return CheckReport::error(
                            a,
                            g,
                            model,
                            format!("state budget of {} exceeded", opts.state_budget),
                            stats,
                        );
                    }
                    let id = ex.reps.len() as u32;
                    index.insert(key.clone(), id);
                    ex.keys.push(key);
                    ex.reps.push(t.state);
                    ex.parent.push(cur);
                    frontier.push_back(id);
                    id
                }
            };
            if !out.contains(&id) {
                out.push(id);
            }
        }
        ex.edges.push(out);
    }
    stats.states = concrete.len();
    stats.canonical = ex.reps.len();

    // Sinks, in discovery order.
    // Keyed by canonical image, valued by the configuration actually reached.
    let mut terminal: BTreeMap<Configuration, Configuration> = BTreeMap::new();
    let mut violation: Option<(Verdict, u32)> = None;
    for (id, out) in ex.edges.iter().enumerate() {
        if !out.is_empty() {
            continue;
        }
        let s = &ex.reps[id];
        if engine.is_terminal(s) {
            let c = s.config();
            terminal.entry(canonical_config(&g, &group, &c)).or_insert(c);
            if s.visited().count() < g.node_count() && violation.is_none() {
                violation = Some((Verdict::PartialCoverage, id as u32));
            }
        } else if violation.is_none() {
            // Only stutters left while some robot stays enabled.
            violation = Some((Verdict::Nontermination, id as u32));
        }
    }

    let mut report = CheckReport {
        algorithm: a.name.clone(),
        grid: g,
        model,
        verdict: Verdict::Verified,
        terminal: terminal.into_values().collect(),
        unvisited: Vec::new(),
        witness: None,
        stats,
        message: None,
    };

    if let Some((verdict, sink)) = violation {
        let path = path_to(&ex, sink);
        let trace = replay(&engine, &g, &group, model, &ex, &path, None);
        report.verdict = verdict;
        report.unvisited = trace.final_state().unvisited(&g);
        report.witness = Some(Witness {
            trace,
            cycle_start: None,
        });
    } else if let Some(cycle) = find_cycle(&ex.edges) {
        let mut path = path_to(&ex, cycle[0]);
        path.extend(&cycle[1..]);
        let (trace, start) = replay_cycle(&engine, &g, &group, model, &ex, &path, cycle.len());
        report.verdict = Verdict::Nontermination;
        report.message = Some("cycle in the reachable transition graph; fairness was not analysed".into());
        report.witness = Some(Witness {
            trace,
            cycle_start: Some(start),
        });
    }
    report.stats.ms = started.elapsed().as_millis() as u64;
    report
}

fn canonical_config(g: &Grid, group: &[Symmetry], c: &Configuration) -> Configuration {
    group
        .iter()
        .map(|s| c.transformed(g, *s))
        .min()
        .unwrap_or_else(|| c.clone())
}

fn path_to(ex: &Explored, mut id: u32) -> Vec<u32> {
    let mut path = vec![id];
    while ex.parent[id as usize] != NO_PARENT {
        id = ex.parent[id as usize];
        path.push(id);
    }
    path.reverse();
    path
}

/// First cycle found by depth-first search from the root, as a list of
/// node ids where the last one has an edge back to the first.
fn find_cycle(edges: &[Vec<u32>]) -> Option<Vec<u32>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Done,
    }
    if edges.is_empty() {
        return None;
    }
    let mut mark = vec![Mark::New; edges.len()];
    let mut stack: Vec<(u32, usize)> = vec![(0, 0)];
    mark[0] = Mark::Open;
    while let Some(&mut (node, ref mut next)) = stack.last_mut() {
        if let Some(&succ) = edges[node as usize].get(*next) {
            *next += 1;
            match mark[succ as usize] {
                Mark::New => {
                    mark[succ as usize] = Mark::Open;
                    stack.push((succ, 0));
                }
                Mark::Open => {
                    let from = stack.iter().position(|(n, _)| *n == succ).expect("open nodes are on the stack");
                    return Some(stack[from..].iter().map(|(n, _)| *n).collect());
                }
                Mark::Done => {}
            }
        } else {
            mark[node as usize] = Mark::Done;
            stack.pop();
        }
    }
    None
}

fn step_into(
    engine: &Engine<'_>,
    g: &Grid,
    group: &[Symmetry],
    model: SynchronyModel,
    from: &ExecState,
    key: &[u8],
) -> crate::engine::Transition {
    engine
        .successors(model, from)
        .into_iter()
        .find(|t| t.state.canonical_key(g, group) == key)
        .expect("quotient edges are realised by concrete successors")
}

fn replay(
    engine: &Engine<'_>,
    g: &Grid,
    group: &[Symmetry],
    model: SynchronyModel,
    ex: &Explored,
    path: &[u32],
    outcome: Option<Outcome>,
) -> Trace {
    let mut state = engine.initial_state();
    let mut steps = vec![TraceStep {
        t: 0,
        state: state.clone(),
        fired: Vec::new(),
        phase_only: false,
    }];
    for id in &path[1..] {
        let t = step_into(engine, g, group, model, &state, &ex.keys[*id as usize]);
        state = t.state;
        steps.push(TraceStep {
            t: steps.len(),
            state: state.clone(),
            fired: t.fired,
            phase_only: t.phase_only,
        });
    }
    let outcome = outcome.unwrap_or(if state.visited().count() == g.node_count() {
        Outcome::TerminalFullCoverage
    } else {
        Outcome::TerminalPartialCoverage
    });
    Trace {
        algorithm: engine.algorithm().name.clone(),
        grid: *g,
        model,
        policy: "checker".into(),
        seed: 0,
        steps,
        outcome,
    }
}

/// Replays `path` (ending in a quotient cycle of `lap` nodes) and keeps going
/// round the cycle until a concrete state repeats. Returns the trace, whose
/// last state steps back to `steps[start]`, and `start`.
fn replay_cycle(
    engine: &Engine<'_>,
    g: &Grid,
    group: &[Symmetry],
    model: SynchronyModel,
    ex: &Explored,
    path: &[u32],
    lap: usize,
) -> (Trace, usize) {
    let mut trace = replay(engine, g, group, model, ex, path, Some(Outcome::CycleDetected));
    let cycle = &path[path.len() - lap..];
    let mut seen: HashMap<Vec<u8>, usize> = trace
        .steps
        .iter()
        .enumerate()
        .map(|(t, s)| (s.state.key(), t))
        .collect();
    // Each lap applies one group element; the group has at most 8 of them.
    for round in 0..=(8 * lap) {
        let target = cycle[round % lap];
        let t = step_into(engine, g, group, model, &trace.final_state().clone(), &ex.keys[target as usize]);
        if let Some(&start) = seen.get(&t.state.key()) {
            return (trace, start);
        }
        seen.insert(t.state.key(), trace.steps.len());
        trace.steps.push(TraceStep {
            t: trace.steps.len(),
            state: t.state,
            fired: t.fired,
            phase_only: t.phase_only,
        });
    }
    unreachable!("a concrete state repeats within |group| laps")
}

/// Checks every grid in `ms × ns` that meets the algorithm's minima, on up
/// to `jobs` threads (0 = all cores). Reports come back in (m, n) order.
pub fn check_range(
    a: &AlgorithmSpec,
    ms: std::ops::RangeInclusive<usize>,
    ns: std::ops::RangeInclusive<usize>,
    model: SynchronyModel,
    jobs: usize,
) -> Vec<CheckReport> {
    let grids: Vec<Grid> = ms
        .flat_map(|m| ns.clone().map(move |n| (m, n)))
        .filter(|(m, n)| *m >= a.min_m && *n >= a.min_n)
        .filter_map(|(m, n)| Grid::new(m, n).ok())
        .collect();
    let run = || grids.par_iter().map(|g| check(a, *g, model)).collect::<Vec<_>>();
    if jobs == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(run),
            Err(_) => grids.iter().map(|g| check(a, *g, model)).collect(),
        }
    }
}

/// Which situation of the two-robot impossibility argument a witness shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefutationCase {
    /// The robots settle with both of them on inner nodes.
    BothInner,
    /// They settle while at least one of them stands on an end node.
    AtEndNode,
    /// They settle elsewhere near the border.
    Other,
    /// They never settle: a cycle.
    Cycle,
}

#[derive(Clone, Debug)]
pub struct Refutation {
    pub report: CheckReport,
    pub case: Option<RefutationCase>,
    /// States of the witness where some robot is on an inner node.
    pub inner_states: usize,
    /// States of the witness where some robot is on an end node.
    pub end_states: usize,
}

/// Runs [`check`] and classifies the witness, if any, by where its robots
/// stand.
pub fn refute_candidate(a: &AlgorithmSpec, g: Grid, model: SynchronyModel) -> Refutation {
    let opts = CheckOptions {
        stop_at_bad_sink: true,
        ..CheckOptions::default()
    };
    refute_candidate_with(a, g, model, &opts)
}

pub fn refute_candidate_with(a: &AlgorithmSpec, g: Grid, model: SynchronyModel, opts: &CheckOptions) -> Refutation {
    let report = check_with(a, g, model, opts);
    let Some(w) = &report.witness else {
        return Refutation {
            report,
            case: None,
            inner_states: 0,
            end_states: 0,
        };
    };
    let robots_of = |s: &ExecState| s.robots().iter().map(|r| r.pos).collect::<Vec<_>>();
    let states = w.trace.steps.iter().map(|s| robots_of(&s.state));
    let (mut inner, mut end) = (0, 0);
    for ps in states {
        inner += ps.iter().any(|v| is_inner_node(&g, *v)) as usize;
        end += ps.iter().any(|v| is_end_node(&g, *v)) as usize;
    }
    let last = robots_of(w.trace.final_state());
    let case = if w.cycle_start.is_some() {
        RefutationCase::Cycle
    } else if last.iter().all(|v| is_inner_node(&g, *v)) {
        RefutationCase::BothInner
    } else if last.iter().any(|v| is_end_node(&g, *v)) {
        RefutationCase::AtEndNode
    } else {
        RefutationCase::Other
    };
    Refutation {
        report,
        case: Some(case),
        inner_states: inner,
        end_states: end,
    }
}
