//! Finite grid topology, robot configurations and grid symmetries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// A finite `m x n` grid. Nodes are `(i, j)` with `0 <= i < m`, `0 <= j < n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    m: usize,
    n: usize,
}

impl Grid {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidGrid {
                m,
                n,
                reason: "both dimensions must be positive".into(),
            });
        }
        Ok(Grid { m, n })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.m * self.n
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.i < self.m && v.j < self.n
    }

    /// Node at `v + (di, dj)`, or `None` when it falls off the grid.
    pub fn offset(&self, v: NodeId, di: i32, dj: i32) -> Option<NodeId> {
        let i = v.i as i64 + di as i64;
        let j = v.j as i64 + dj as i64;
        if i < 0 || j < 0 || i >= self.m as i64 || j >= self.n as i64 {
            None
        } else {
            Some(NodeId::new(i as usize, j as usize))
        }
    }

    pub fn index(&self, v: NodeId) -> usize {
        v.i * self.n + v.j
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.m).flat_map(move |i| (0..self.n).map(move |j| NodeId::new(i, j)))
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        Direction::ALL
            .iter()
            .filter_map(move |d| {
                let (di, dj) = d.offset();
                self.offset(v, di, dj)
            })
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.neighbors(v).count()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.m, self.n)
    }
}

/// Internal node index. Robots never observe these.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub i: usize,
    pub j: usize,
}

impl NodeId {
    pub const fn new(i: usize, j: usize) -> Self {
        NodeId { i, j }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Manhattan distance, which is the shortest-path distance on a grid.
pub fn node_distance(a: NodeId, b: NodeId) -> usize {
    a.i.abs_diff(b.i) + a.j.abs_diff(b.j)
}

/// A node of degree smaller than four.
pub fn is_end_node(g: &Grid, v: NodeId) -> bool {
    g.degree(v) < 4
}

/// A node whose distance to every end node is at least three.
pub fn is_inner_node(g: &Grid, v: NodeId) -> bool {
    // End nodes are exactly the border nodes, so the nearest one is straight
    // towards the closest side.
    let to_border = v.i.min(g.m - 1 - v.i).min(v.j).min(g.n - 1 - v.j);
    to_border >= 3
}

/// Global compass directions. Only the simulator knows them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    pub fn offset(self) -> (i32, i32) {
        match self {
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
            Direction::West => (0, -1),
        }
    }

    pub fn from_offset(d: (i32, i32)) -> Option<Direction> {
        match d {
            (-1, 0) => Some(Direction::North),
            (0, 1) => Some(Direction::East),
            (1, 0) => Some(Direction::South),
            (0, -1) => Some(Direction::West),
            _ => None,
        }
    }
}

/// A light color, written as a single ASCII uppercase letter.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Color(u8);

impl Color {
    pub fn new(c: char) -> Result<Self> {
        if c.is_ascii_uppercase() {
            Ok(Color(c as u8))
        } else {
            Err(Error::InvalidColor(c))
        }
    }

    pub fn as_char(self) -> char {
        self.0 as char
    }
}

impl fmt::Debug for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A multiset of colors, kept sorted so that equal multisets compare equal.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColorBag(SmallVec<[Color; 6]>);

impl ColorBag {
    pub fn new() -> Self {
        ColorBag(SmallVec::new())
    }

    pub fn single(c: Color) -> Self {
        let mut bag = ColorBag::new();
        bag.insert(c);
        bag
    }

    /// Parses a run of color letters such as `GW` or `GG`.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars().map(Color::new).collect()
    }

    pub fn insert(&mut self, c: Color) {
        let at = self.0.partition_point(|x| *x <= c);
        self.0.insert(at, c);
    }

    /// Removes one occurrence of `c`; returns false when absent.
    pub fn remove_one(&mut self, c: Color) -> bool {
        match self.0.iter().position(|x| *x == c) {
            Some(at) => {
                self.0.remove(at);
                true
            }
            None => false,
        }
    }

    pub fn contains(&self, c: Color) -> bool {
        self.0.contains(&c)
    }

    pub fn count(&self, c: Color) -> usize {
        self.0.iter().filter(|x| **x == c).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Color> + '_ {
        self.0.iter().copied()
    }

    /// Distinct colors, ascending.
    pub fn distinct(&self) -> impl Iterator<Item = Color> + '_ {
        let mut prev = None;
        self.0.iter().copied().filter(move |c| {
            let fresh = prev != Some(*c);
            prev = Some(*c);
            fresh
        })
    }
}

impl FromIterator<Color> for ColorBag {
    fn from_iter<I: IntoIterator<Item = Color>>(iter: I) -> Self {
        let mut v: SmallVec<[Color; 6]> = iter.into_iter().collect();
        v.sort();
        ColorBag(v)
    }
}

impl fmt::Display for ColorBag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for ColorBag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{self}}}")
    }
}

/// Occupied nodes and the colors of the robots on them.
///
/// Only occupied nodes are stored; a node never maps to an empty bag.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    occupied: BTreeMap<NodeId, ColorBag>,
}

impl Configuration {
    pub fn new() -> Self {
        Configuration::default()
    }

    pub fn from_robots<I: IntoIterator<Item = (NodeId, Color)>>(robots: I) -> Self {
        let mut c = Configuration::new();
        for (v, col) in robots {
            c.add(v, col);
        }
        c
    }

    /// Builds a configuration from `(i, j, "GW")` triples. Panics on bad colors;
    /// intended for tests and literals.
    pub fn from_triples(triples: &[(usize, usize, &str)]) -> Self {
        let mut c = Configuration::new();
        for &(i, j, colors) in triples {
            for col in ColorBag::parse(colors).expect("valid color letters").iter() {
                c.add(NodeId::new(i, j), col);
            }
        }
        c
    }

    pub fn add(&mut self, v: NodeId, c: Color) {
        self.occupied.entry(v).or_default().insert(c);
    }

    pub fn remove(&mut self, v: NodeId, c: Color) -> bool {
        let Some(bag) = self.occupied.get_mut(&v) else {
            return false;
        };
        let removed = bag.remove_one(c);
        if bag.is_empty() {
            self.occupied.remove(&v);
        }
        removed
    }

    pub fn get(&self, v: NodeId) -> Option<&ColorBag> {
        self.occupied.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &ColorBag)> + '_ {
        self.occupied.iter().map(|(v, b)| (*v, b))
    }

    /// One entry per robot, ordered by node then color.
    pub fn robots(&self) -> impl Iterator<Item = (NodeId, Color)> + '_ {
        self.occupied
            .iter()
            .flat_map(|(v, bag)| bag.iter().map(move |c| (*v, c)))
    }

    pub fn robot_count(&self) -> usize {
        self.occupied.values().map(ColorBag::len).sum()
    }

    pub fn occupied_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.occupied.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn colors(&self) -> BTreeSet<Color> {
        self.robots().map(|(_, c)| c).collect()
    }

    pub fn fits(&self, g: &Grid) -> bool {
        self.occupied.keys().all(|v| g.contains(*v))
    }

    /// Image under a grid symmetry.
    pub fn transformed(&self, g: &Grid, s: Symmetry) -> Configuration {
        Configuration {
            occupied: self
                .occupied
                .iter()
                .map(|(v, bag)| (s.apply(g, *v), bag.clone()))
                .collect(),
        }
    }

    pub fn to_json(&self) -> ConfigurationJson {
        ConfigurationJson {
            robots: self
                .occupied
                .iter()
                .map(|(v, bag)| RobotEntry {
                    i: v.i,
                    j: v.j,
                    colors: bag.iter().map(|c| c.as_char().to_string()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &ConfigurationJson) -> Result<Self> {
        let mut c = Configuration::new();
        for entry in &json.robots {
            for s in &entry.colors {
                let mut chars = s.chars();
                let (Some(ch), None) = (chars.next(), chars.next()) else {
                    return Err(Error::InconsistentConfiguration(format!(
                        "color entry `{s}` is not a single letter"
                    )));
                };
                c.add(NodeId::new(entry.i, entry.j), Color::new(ch)?);
            }
        }
        Ok(c)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json()).expect("configuration serializes")
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, (v, bag)) in self.occupied.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}:{bag:?}")?;
        }
        write!(f, "}}")
    }
}

/// Serialized configuration: entries sorted by `(i, j)`, colors sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigurationJson {
    pub robots: Vec<RobotEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotEntry {
    pub i: usize,
    pub j: usize,
    pub colors: Vec<String>,
}

/// An automorphism of the grid graph.
///
/// Quarter turns and the diagonal reflections exist only on square grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symmetry {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    /// `i -> m-1-i`
    FlipRows,
    /// `j -> n-1-j`
    FlipCols,
    Transpose,
    AntiTranspose,
}

impl Symmetry {
    pub const ALL: [Symmetry; 8] = [
        Symmetry::Identity,
        Symmetry::Rot90,
        Symmetry::Rot180,
        Symmetry::Rot270,
        Symmetry::FlipRows,
        Symmetry::FlipCols,
        Symmetry::Transpose,
        Symmetry::AntiTranspose,
    ];

    /// The symmetry group of `g`; with `reflections = false` only rotations.
    pub fn group(g: &Grid, reflections: bool) -> Vec<Symmetry> {
        Symmetry::ALL
            .into_iter()
            .filter(|s| g.m == g.n || !s.needs_square())
            .filter(|s| reflections || !s.is_reflection())
            .collect()
    }

    pub fn needs_square(self) -> bool {
        matches!(
            self,
            Symmetry::Rot90 | Symmetry::Rot270 | Symmetry::Transpose | Symmetry::AntiTranspose
        )
    }

    pub fn is_reflection(self) -> bool {
        matches!(
            self,
            Symmetry::FlipRows | Symmetry::FlipCols | Symmetry::Transpose | Symmetry::AntiTranspose
        )
    }

    pub fn apply(self, g: &Grid, v: NodeId) -> NodeId {
        let (m, n) = (g.m, g.n);
        let (i, j) = (v.i, v.j);
        match self {
            Symmetry::Identity => NodeId::new(i, j),
            Symmetry::Rot90 => NodeId::new(j, m - 1 - i),
            Symmetry::Rot180 => NodeId::new(m - 1 - i, n - 1 - j),
            Symmetry::Rot270 => NodeId::new(n - 1 - j, i),
            Symmetry::FlipRows => NodeId::new(m - 1 - i, j),
            Symmetry::FlipCols => NodeId::new(i, n - 1 - j),
            Symmetry::Transpose => NodeId::new(j, i),
            Symmetry::AntiTranspose => NodeId::new(n - 1 - j, m - 1 - i),
        }
    }

    /// Linear part, acting on displacement vectors.
    pub fn apply_offset(self, (di, dj): (i32, i32)) -> (i32, i32) {
        match self {
            Symmetry::Identity => (di, dj),
            Symmetry::Rot90 => (dj, -di),
            Symmetry::Rot180 => (-di, -dj),
            Symmetry::Rot270 => (-dj, di),
            Symmetry::FlipRows => (-di, dj),
            Symmetry::FlipCols => (di, -dj),
            Symmetry::Transpose => (dj, di),
            Symmetry::AntiTranspose => (-dj, -di),
        }
    }

    pub fn apply_direction(self, d: Direction) -> Direction {
        Direction::from_offset(self.apply_offset(d.offset())).expect("unit vectors map to unit vectors")
    }
}

/// The symmetry orbit of a configuration and its canonical representative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalForms {
    pub orbit: BTreeSet<Configuration>,
    /// Lexicographically least member of the orbit, comparing the sorted
    /// `(i, j, colors)` lists.
    pub representative: Configuration,
}

/// Orbit of `c` under the full symmetry group of `g`.
pub fn canonical_forms(g: &Grid, c: &Configuration) -> CanonicalForms {
    let orbit: BTreeSet<Configuration> = Symmetry::group(g, true)
        .into_iter()
        .map(|s| c.transformed(g, s))
        .collect();
    let representative = orbit.iter().next().cloned().unwrap_or_default();
    CanonicalForms {
        orbit,
        representative,
    }
}

/// True when `a` and `b` lie in the same orbit under `group`.
pub fn equivalent_under(g: &Grid, group: &[Symmetry], a: &Configuration, b: &Configuration) -> bool {
    group.iter().any(|s| a.transformed(g, *s) == *b)
}
