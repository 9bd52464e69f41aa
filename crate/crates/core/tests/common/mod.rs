//! Helpers shared by the integration tests. The oracles here are written
//! against plain coordinates and deliberately avoid the library's own
//! symmetry and canonicalisation code.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use myogrid::catalog;
use myogrid::engine::{Engine, ExecState, SynchronyModel};
use myogrid::{AlgorithmSpec, Configuration, Grid};

/// A configuration as a sorted list of `(i, j, colors)` with sorted colors.
pub type Cells = Vec<(usize, usize, String)>;

pub fn algo(name: &str) -> AlgorithmSpec {
    catalog::get(name).unwrap_or_else(|e| panic!("{name}: {e}")).spec
}

pub fn grid(m: usize, n: usize) -> Grid {
    Grid::new(m, n).expect("valid grid")
}

pub fn cfg(triples: &[(usize, usize, &str)]) -> Configuration {
    Configuration::from_triples(triples)
}

pub fn cells(c: &Configuration) -> Cells {
    let mut out: Cells = c
        .iter()
        .map(|(v, bag)| {
            let mut s: Vec<char> = bag.iter().map(|col| col.as_char()).collect();
            s.sort_unstable();
            (v.i, v.j, s.into_iter().collect())
        })
        .collect();
    out.sort();
    out
}

pub fn owned(triples: &[(usize, usize, &str)]) -> Cells {
    let mut out: Cells = triples
        .iter()
        .map(|&(i, j, s)| {
            let mut s: Vec<char> = s.chars().collect();
            s.sort_unstable();
            (i, j, s.into_iter().collect())
        })
        .collect();
    out.sort();
    out
}

/// The eight point maps of the square, restricted to those that send an
/// `m x n` grid onto itself.
pub fn grid_maps(m: usize, n: usize) -> Vec<Box<dyn Fn(usize, usize) -> (usize, usize)>> {
    let mut maps: Vec<Box<dyn Fn(usize, usize) -> (usize, usize)>> = vec![
        Box::new(|i, j| (i, j)),
        Box::new(move |i, j| (m - 1 - i, n - 1 - j)),
        Box::new(move |i, j| (m - 1 - i, j)),
        Box::new(move |i, j| (i, n - 1 - j)),
    ];
    if m == n {
        maps.push(Box::new(|i, j| (j, i)));
        maps.push(Box::new(move |i, j| (n - 1 - j, m - 1 - i)));
        maps.push(Box::new(move |i, j| (j, m - 1 - i)));
        maps.push(Box::new(move |i, j| (n - 1 - j, i)));
    }
    maps
}

pub fn same_up_to_symmetry(m: usize, n: usize, a: &Cells, b: &Cells) -> bool {
    grid_maps(m, n).iter().any(|f| {
        let mut img: Cells = a
            .iter()
            .map(|(i, j, s)| {
                let (x, y) = f(*i, *j);
                (x, y, s.clone())
            })
            .collect();
        img.sort();
        &img == b
    })
}

/// Breadth-first set of configurations reachable under `model`, with no
/// symmetry reduction.
pub fn reachable_configs(e: &Engine<'_>, model: SynchronyModel, cap: usize) -> BTreeSet<Cells> {
    let mut seen: HashMap<Vec<u8>, ()> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut out = BTreeSet::new();
    let s0 = e.initial_state();
    seen.insert(s0.key(), ());
    queue.push_back(s0);
    while let Some(s) = queue.pop_front() {
        out.insert(cells(&s.config()));
        for t in e.successors(model, &s) {
            if seen.insert(t.state.key(), ()).is_none() {
                assert!(seen.len() <= cap, "state space larger than {cap}");
                queue.push_back(t.state);
            }
        }
    }
    out
}

/// Every state reachable under `model`, with no symmetry reduction.
pub fn reachable_states(e: &Engine<'_>, model: SynchronyModel, cap: usize) -> Vec<ExecState> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    let s0 = e.initial_state();
    seen.insert(s0.key());
    queue.push_back(s0);
    while let Some(s) = queue.pop_front() {
        for t in e.successors(model, &s) {
            if seen.insert(t.state.key()) {
                assert!(seen.len() <= cap, "state space larger than {cap}");
                queue.push_back(t.state);
            }
        }
        out.push(s);
    }
    out
}

/// Replaces every robot of color `from` by the robots spelled in `into`.
pub fn expand(c: &Cells, from: char, into: &str) -> Cells {
    let mut out: Cells = c
        .iter()
        .map(|(i, j, s)| {
            let mut v: Vec<char> = s
                .chars()
                .flat_map(|ch| if ch == from { into.chars().collect() } else { vec![ch] })
                .collect();
            v.sort_unstable();
            (*i, *j, v.into_iter().collect())
        })
        .collect();
    out.sort();
    out
}

/// The terminal configurations each catalog entry is documented to reach,
/// as a function of the grid size.
pub fn documented_terminal(name: &str, m: usize, n: usize) -> Cells {
    let odd = m % 2 == 1;
    let t = |v: &[(usize, usize, &str)]| owned(v);
    match name {
        "F22T2" | "A23T2" if odd => t(&[(m - 1, n - 2, "G"), (m - 1, n - 1, "W")]),
        "F22T2" => t(&[(m - 1, 1, "GW")]),
        "A23T2" => t(&[(m - 1, 0, "B"), (m - 1, 1, "W")]),
        "F22F3" if odd => t(&[(m - 1, 0, "G"), (m - 2, 1, "G"), (m - 1, 1, "W")]),
        "F22F3" => t(&[(m - 1, n - 1, "G"), (m - 2, n - 2, "G"), (m - 1, n - 2, "W")]),
        "F21T3" => expand(&documented_terminal("F22T2", m, n), 'W', "GG"),
        "F21F4" => expand(&documented_terminal("F22F3", m, n), 'W', "GG"),
        "F12F5" => expand(&documented_terminal("F13F4", m, n), 'B', "GG"),
        "F13T2" if odd => t(&[(m - 1, n - 1, "GW")]),
        "F13T2" => t(&[(m - 1, 0, "GB")]),
        "F13F4" if odd => t(&[(m - 2, 0, "G"), (m - 1, 0, "WWB")]),
        "F13F4" => t(&[(m - 2, n - 1, "G"), (m - 1, n - 1, "WWB")]),
        "F12T3" if odd => t(&[(m - 1, 0, "GGW")]),
        "F12T3" => t(&[(m - 1, n - 1, "GWW")]),
        "A23F3" if odd => t(&[(m - 2, 1, "G"), (m - 1, 0, "W"), (m - 1, 1, "B")]),
        "A23F3" => t(&[(m - 2, n - 2, "G"), (m - 1, n - 1, "W"), (m - 1, n - 2, "B")]),
        "A22T3" if odd => t(&[(m - 2, 1, "G"), (m - 1, 0, "W"), (m - 1, 1, "W")]),
        "A22T3" => t(&[(m - 2, n - 2, "G"), (m - 1, n - 2, "G"), (m - 1, n - 1, "W")]),
        "A22F4" if odd => t(&[(m - 2, 1, "W"), (m - 2, 2, "G"), (m - 1, 0, "W"), (m - 1, 1, "W")]),
        "A22F4" => t(&[(m - 2, n - 2, "W"), (m - 2, n - 3, "G"), (m - 1, n - 1, "W"), (m - 1, n - 2, "W")]),
        "A13T3" if odd => t(&[(m - 1, n - 2, "G"), (m - 1, n - 1, "GW")]),
        "A13T3" => t(&[(m - 1, 0, "WB"), (m - 1, 1, "W")]),
        "A13F6" if odd => t(&[(m - 2, 0, "G"), (m - 2, 1, "G"), (m - 1, 0, "WB"), (m - 1, 1, "WB")]),
        "A13F6" => t(&[(m - 2, n - 1, "G"), (m - 2, n - 2, "G"), (m - 1, n - 1, "WB"), (m - 1, n - 2, "WB")]),
        other => panic!("no documented terminal for {other}"),
    }
}

/// Grid ranges the catalog is verified on: `(m range, n range)`.
pub fn verified_range(name: &str) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
    match name {
        "A13F6" => (3..=4, 3..=4),
        n if n.starts_with('A') => (2..=4, 3..=4),
        _ => (2..=5, 3..=5),
    }
}

pub const FSYNC_FAMILY: [&str; 8] = ["F22T2", "F22F3", "F21T3", "F21F4", "F13T2", "F13F4", "F12T3", "F12F5"];
pub const ASYNC_FAMILY: [&str; 6] = ["A23T2", "A23F3", "A22T3", "A22F4", "A13T3", "A13F6"];

pub mod invariants {
    //! Per-transition properties shared by the property tests and the
    //! acceptance suite. Each returns a description of the first violation.

    use std::collections::BTreeSet;

    use myogrid::engine::{Engine, ExecState, SynchronyModel, Transition};
    use myogrid::observation::{extract_views, match_guard, Orientation, View};
    use myogrid::{AlgorithmSpec, Color, Configuration, Grid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub type Check = Result<(), String>;

    fn census(c: &Configuration) -> Vec<Color> {
        let mut v: Vec<Color> = c.robots().map(|(_, col)| col).collect();
        v.sort();
        v
    }

    /// Robot count and colors are preserved; visited grows and covers the robots.
    pub fn conservation_and_visited(a: &AlgorithmSpec, g: &Grid, s: &ExecState, succ: &[Transition]) -> Check {
        for t in succ {
            let c = t.state.config();
            if c.robot_count() != a.k {
                return Err(format!("robot count {} != {}", c.robot_count(), a.k));
            }
            if let Some(col) = c.colors().into_iter().find(|col| !a.colors.contains(col)) {
                return Err(format!("undeclared color {col}"));
            }
            if !t.state.visited().is_superset(s.visited()) {
                return Err("visited set shrank".into());
            }
            let unmarked = c.occupied_nodes().find(|v| !t.state.visited().contains(g.index(*v)));
            if let Some(v) = unmarked {
                return Err(format!("occupied node {v} not marked visited"));
            }
        }
        Ok(())
    }

    /// Activating every enabled robot is one of the SSYNC choices.
    pub fn fsync_within_ssync(e: &Engine<'_>, s: &ExecState) -> Check {
        if !s.all_ready() {
            return Ok(());
        }
        let ss: BTreeSet<Vec<u8>> = e.ssync_successors(s).iter().map(|t| t.state.key()).collect();
        for t in e.fsync_successors(s) {
            if !ss.contains(&t.state.key()) {
                return Err("an FSYNC successor is not an SSYNC successor".into());
            }
        }
        Ok(())
    }

    /// successors(σ s) = σ(successors(s)) for every symmetry the algorithm respects.
    pub fn equivariance(e: &Engine<'_>, model: SynchronyModel, s: &ExecState, succ: &[Transition]) -> Check {
        let g = e.grid();
        for sym in e.symmetry_group() {
            let image: BTreeSet<Vec<u8>> = succ.iter().map(|t| t.state.transformed(&g, sym).key()).collect();
            let direct: BTreeSet<Vec<u8>> = e
                .successors(model, &s.transformed(&g, sym))
                .iter()
                .map(|t| t.state.key())
                .collect();
            if image != direct {
                return Err(format!("successors not equivariant under {sym:?}"));
            }
        }
        Ok(())
    }

    /// Every image of a state under the algorithm's symmetries has the same
    /// canonical key.
    pub fn canonical_key_is_orbit_invariant(e: &Engine<'_>, s: &ExecState) -> Check {
        let g = e.grid();
        let group = e.symmetry_group();
        let key = s.canonical_key(&g, &group);
        for sym in &group {
            if s.transformed(&g, *sym).canonical_key(&g, &group) != key {
                return Err(format!("canonical key differs for the {sym:?} image"));
            }
        }
        Ok(())
    }

    /// The engine's compiled matcher agrees with matching extracted views.
    pub fn enabled_matches_views(a: &AlgorithmSpec, e: &Engine<'_>, c: &Configuration) -> Check {
        let g = e.grid();
        let mut oracle = Vec::new();
        for (idx, (pos, color)) in c.robots().enumerate() {
            let views = extract_views(&g, c, pos, color, a.phi, a.chirality).map_err(|x| x.to_string())?;
            for r in &a.rules {
                for o in match_guard(&views, &r.guard).map_err(|x| x.to_string())? {
                    oracle.push((idx, r.label.clone(), o));
                }
            }
        }
        let mut got: Vec<_> = e
            .enabled(c)
            .map_err(|x| x.to_string())?
            .into_iter()
            .map(|x| (x.robot, x.rule, x.orientation))
            .collect();
        oracle.sort();
        got.sort();
        if got != oracle {
            return Err(format!("engine {got:?} vs views {oracle:?}"));
        }
        Ok(())
    }

    /// The views of one robot form a single orbit under quarter turns (and
    /// mirror images without chirality).
    pub fn view_closure(a: &AlgorithmSpec, g: &Grid, c: &Configuration) -> Check {
        for (pos, color) in c.robots() {
            let views = extract_views(g, c, pos, color, a.phi, a.chirality).map_err(|x| x.to_string())?;
            let set: BTreeSet<View> = views.iter().map(|(v, _)| v.clone()).collect();
            let base = &views[0].0;
            let mut orbit = BTreeSet::new();
            let mut v = base.clone();
            for _ in 0..4 {
                orbit.insert(v.clone());
                if !a.chirality {
                    orbit.insert(v.mirrored());
                }
                v = v.rotated();
            }
            if set != orbit {
                return Err(format!("views of {color} on {pos} are not one orbit"));
            }
            let frames: BTreeSet<Orientation> = views.iter().map(|(_, o)| *o).collect();
            if frames.len() != if a.chirality { 4 } else { 8 } {
                return Err("wrong number of view frames".into());
            }
        }
        Ok(())
    }

    /// Documented color invariants: entries that never change colors keep
    /// different colors apart until termination, and F13F4 never stacks G
    /// with B.
    pub fn cohabitation(name: &str, initial: &Configuration, s: &ExecState, terminal: bool) -> Check {
        let c = s.config();
        let g = Color::new('G').unwrap();
        let b = Color::new('B').unwrap();
        match name {
            "F22T2" | "F22F3" => {
                if census(&c) != census(initial) {
                    return Err("a robot changed color".into());
                }
                if !terminal && c.iter().any(|(_, bag)| bag.distinct().count() > 1) {
                    return Err(format!("different colors share a node in {c:?}"));
                }
            }
            "F13F4" => {
                if c.iter().any(|(_, bag)| bag.contains(g) && bag.contains(b)) {
                    return Err(format!("G and B share a node in {c:?}"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn model_for(name: &str, pick: u32) -> SynchronyModel {
        match (name.starts_with('A'), pick % 3) {
            (false, _) => SynchronyModel::Fsync,
            (true, 0) => SynchronyModel::Async,
            (true, 1) => SynchronyModel::Ssync,
            (true, _) => SynchronyModel::Fsync,
        }
    }

    /// Random walk through the successor graph checking every property at
    /// every step; returns the number of transitions examined.
    pub fn random_walk(name: &str, m: usize, n: usize, model: SynchronyModel, seed: u64, steps: usize) -> Result<usize, String> {
        let a = super::algo(name);
        let g = super::grid(m, n);
        let e = Engine::new(&a, g).map_err(|x| x.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = e.initial_state();
        let mut examined = 0;
        for _ in 0..steps {
            let succ = e.successors(model, &s);
            let terminal = succ.is_empty();
            let tag = |x: String| format!("{name} {m}x{n} {model} seed {seed}: {x}");
            conservation_and_visited(&a, &g, &s, &succ).map_err(tag)?;
            equivariance(&e, model, &s, &succ).map_err(tag)?;
            canonical_key_is_orbit_invariant(&e, &s).map_err(tag)?;
            fsync_within_ssync(&e, &s).map_err(tag)?;
            enabled_matches_views(&a, &e, &s.config()).map_err(tag)?;
            view_closure(&a, &g, &s.config()).map_err(tag)?;
            cohabitation(name, &a.init, &s, terminal && s.all_ready()).map_err(tag)?;
            examined += succ.len();
            if terminal {
                break;
            }
            s = succ[rng.gen_range(0..succ.len())].state.clone();
        }
        Ok(examined)
    }
}
