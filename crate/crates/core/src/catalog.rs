//! The bundled algorithms.
//!
//! Names encode the table row: `F`/`A` for the synchrony model the algorithm
//! is written for, then φ, ℓ, `T`/`F` for chirality and the robot count.
//! Four entries are obtained from another one by [`split_color`]; their
//! files are generated once and checked in, so that changes to the base
//! algorithm show up as a failing regression test instead of silently
//! altering them.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::Serialize;

use crate::dsl::{parse_algorithm, AlgorithmSpec, GuardCell, Rule};
use crate::engine::SynchronyModel;
use crate::error::{Error, Result};
use crate::grid::{Color, ColorBag, Configuration};

/// Environment variable naming a directory of `<name>.lcm` files that
/// replaces the built-in catalog.
pub const CATALOG_ENV: &str = "MYOGRID_CATALOG";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TableRow {
    pub synchrony: SynchronyModel,
    pub phi: u8,
    pub colors: usize,
    pub chirality: bool,
    pub robots: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Explicit,
    DerivedBySplit { base: String, from: char, into: String },
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub spec: AlgorithmSpec,
    pub row: TableRow,
    pub provenance: Provenance,
}

struct Bundled {
    name: &'static str,
    model: SynchronyModel,
    text: &'static str,
    split: Option<(&'static str, char, &'static str)>,
}

macro_rules! bundled {
    ($name:literal, $model:ident) => {
        bundled!($name, $model, None)
    };
    ($name:literal, $model:ident, $split:expr) => {
        Bundled {
            name: $name,
            model: SynchronyModel::$model,
            text: include_str!(concat!("../catalog/", $name, ".lcm")),
            split: $split,
        }
    };
}

const BUNDLED: &[Bundled] = &[
    bundled!("F22T2", Fsync),
    bundled!("F22F3", Fsync),
    bundled!("F21T3", Fsync, Some(("F22T2", 'W', "GG"))),
    bundled!("F21F4", Fsync, Some(("F22F3", 'W', "GG"))),
    bundled!("F13T2", Fsync),
    bundled!("F13F4", Fsync),
    bundled!("F12T3", Fsync),
    bundled!("F12F5", Fsync, Some(("F13F4", 'B', "GG"))),
    bundled!("A23T2", Async),
    bundled!("A23F3", Async),
    bundled!("A22T3", Async),
    bundled!("A22F4", Async),
    bundled!("A13T3", Async),
    bundled!("A13F6", Async),
];

/// Names of all entries, in table order.
pub fn names() -> Vec<&'static str> {
    BUNDLED.iter().map(|b| b.name).collect()
}

/// Source text of an entry, honouring [`CATALOG_ENV`].
pub fn source(name: &str) -> Result<String> {
    let b = BUNDLED
        .iter()
        .find(|b| b.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownAlgorithm(name.to_string()))?;
    match std::env::var_os(CATALOG_ENV) {
        Some(dir) => {
            let path = PathBuf::from(dir).join(format!("{}.lcm", b.name));
            Ok(std::fs::read_to_string(path)?)
        }
        None => Ok(b.text.to_string()),
    }
}

pub fn get(name: &str) -> Result<CatalogEntry> {
    let b = BUNDLED
        .iter()
        .find(|b| b.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownAlgorithm(name.to_string()))?;
    let spec = parse_algorithm(&source(b.name)?)?;
    let row = TableRow {
        synchrony: b.model,
        phi: spec.phi,
        colors: spec.colors.len(),
        chirality: spec.chirality,
        robots: spec.k,
    };
    let provenance = match b.split {
        None => Provenance::Explicit,
        Some((base, from, into)) => Provenance::DerivedBySplit {
            base: base.to_string(),
            from,
            into: into.to_string(),
        },
    };
    Ok(CatalogEntry { spec, row, provenance })
}

pub fn list() -> Result<Vec<CatalogEntry>> {
    BUNDLED.iter().map(|b| get(b.name)).collect()
}

/// Replaces every robot of color `from` by the robots in `into`.
///
/// Sound for fully synchronous executions as long as robots never change
/// color and `from` robots never share a node with robots whose color occurs
/// in `into`: the replacement robots then see what the original saw (with
/// `from` spelled as `into`) and move in lockstep. Both conditions are
/// checked on the rules and the initial configuration.
pub fn split_color(a: &AlgorithmSpec, from: Color, into: &ColorBag) -> Result<AlgorithmSpec> {
    if into.is_empty() {
        return Err(Error::SplitUnsound("the replacement multiset is empty".into()));
    }
    if !a.colors.contains(&from) {
        return Err(Error::SplitUnsound(format!("{from} is not a color of {}", a.name)));
    }
    if let Some(r) = a.rules.iter().find(|r| r.guard.self_color() != r.action.new_color) {
        return Err(Error::SplitUnsound(format!("rule {} changes color", r.label)));
    }
    let mixes = |bag: &ColorBag| bag.contains(from) && bag.distinct().any(|c| c != from && into.contains(c));
    for r in &a.rules {
        for cell in r.guard.cells() {
            if let GuardCell::Exact(bag) = cell {
                if mixes(bag) {
                    return Err(Error::SplitUnsound(format!(
                        "rule {} expects {from} together with a color of {into}",
                        r.label
                    )));
                }
            }
        }
    }
    if a.init.iter().any(|(_, bag)| mixes(bag)) {
        return Err(Error::SplitUnsound(format!(
            "{from} shares a node with a color of {into} initially"
        )));
    }

    let expand = |bag: &ColorBag| -> ColorBag {
        let mut out = ColorBag::new();
        for c in bag.iter() {
            if c == from {
                for d in into.iter() {
                    out.insert(d);
                }
            } else {
                out.insert(c);
            }
        }
        out
    };

    let mut init = Configuration::new();
    for (v, bag) in a.init.iter() {
        for c in expand(bag).iter() {
            init.add(v, c);
        }
    }

    let targets: Vec<Color> = into.distinct().collect();
    let mut rules = Vec::new();
    for r in &a.rules {
        let mut guard = r.guard.clone();
        for cell in guard.cells_mut() {
            if let GuardCell::Exact(bag) = cell {
                *bag = expand(bag);
            }
        }
        if r.guard.self_color() != from {
            rules.push(Rule { guard, ..r.clone() });
            continue;
        }
        for (idx, c) in targets.iter().enumerate() {
            let mut guard = guard.clone();
            guard.set_self_color(*c);
            let label = if targets.len() == 1 {
                r.label.clone()
            } else {
                format!("{}{}", r.label, (b'a' + idx as u8) as char)
            };
            let mut action = r.action;
            action.new_color = *c;
            rules.push(Rule { label, guard, action });
        }
    }

    let mut colors: Vec<Color> = Vec::new();
    let used: BTreeSet<Color> = init
        .colors()
        .into_iter()
        .chain(rules.iter().flat_map(|r| [r.guard.self_color(), r.action.new_color]))
        .collect();
    for c in a.colors.iter().copied().chain(into.iter()) {
        if c != from && used.contains(&c) && !colors.contains(&c) {
            colors.push(c);
        }
    }

    let spec = AlgorithmSpec {
        name: format!("{}-split-{}", a.name, from),
        phi: a.phi,
        colors,
        chirality: a.chirality,
        k: init.robot_count(),
        min_m: a.min_m,
        min_n: a.min_n,
        init,
        rules,
    };
    spec.validate()?;
    Ok(spec)
}
