//! Look-phase views and guard matching.
//!
//! A view is expressed in the robot's own frame. Offset `(-1, 0)` is the
//! robot's "up". An [`Orientation`] maps view-frame offsets to global
//! offsets; the unrotated, unmirrored orientation is the North view.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsl::{Guard, GuardCell};
use crate::error::{Error, Result};
use crate::grid::{Color, ColorBag, Configuration, Grid, NodeId};

const BALL1: [(i32, i32); 5] = [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)];
const BALL2: [(i32, i32); 13] = [
    (-2, 0),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -2),
    (0, -1),
    (0, 0),
    (0, 1),
    (0, 2),
    (1, -1),
    (1, 0),
    (1, 1),
    (2, 0),
];

/// Offsets with Manhattan norm at most `phi`, row-major. This is the order of
/// the view tuples (without the leading self color).
pub fn ball_offsets(phi: u8) -> &'static [(i32, i32)] {
    match phi {
        1 => &BALL1,
        2 => &BALL2,
        _ => &[],
    }
}

pub(crate) fn ball_index(phi: u8, off: (i32, i32)) -> Option<usize> {
    ball_offsets(phi).iter().position(|o| *o == off)
}

pub(crate) fn check_phi(phi: u8) -> Result<()> {
    if phi == 1 || phi == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedPhi(phi))
    }
}

/// How a view frame sits on the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Orientation {
    /// Clockwise quarter turns of the view's "up" relative to North: 0, 90, 180, 270.
    #[serde(rename = "rot")]
    pub rotation: u16,
    #[serde(rename = "mirror")]
    pub mirrored: bool,
}

impl Orientation {
    pub const NORTH: Orientation = Orientation {
        rotation: 0,
        mirrored: false,
    };

    /// All orientations a robot considers: the four rotations, then (without
    /// chirality) their mirror images.
    pub fn all(chirality: bool) -> Vec<Orientation> {
        let mirrors: &[bool] = if chirality { &[false] } else { &[false, true] };
        mirrors
            .iter()
            .flat_map(|&mirrored| {
                [0, 90, 180, 270].map(|rotation| Orientation { rotation, mirrored })
            })
            .collect()
    }

    /// View-frame offset to global offset.
    pub fn to_global(self, (di, dj): (i32, i32)) -> (i32, i32) {
        let (mut a, mut b) = if self.mirrored { (di, -dj) } else { (di, dj) };
        for _ in 0..(self.rotation / 90) {
            (a, b) = (b, -a);
        }
        (a, b)
    }

    /// Global offset to view-frame offset.
    pub fn to_view(self, (gi, gj): (i32, i32)) -> (i32, i32) {
        let (mut a, mut b) = (gi, gj);
        for _ in 0..(self.rotation / 90) {
            (a, b) = (-b, a);
        }
        if self.mirrored {
            (a, -b)
        } else {
            (a, b)
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.rotation, if self.mirrored { "m" } else { "" })
    }
}

/// Content of one observed cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellContent {
    Empty,
    Boundary,
    Occupied(ColorBag),
}

impl CellContent {
    fn token(&self) -> String {
        match self {
            CellContent::Empty => ".".into(),
            CellContent::Boundary => "#".into(),
            CellContent::Occupied(bag) => bag.to_string(),
        }
    }
}

/// A snapshot of the cells within distance `phi`, in one orientation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct View {
    phi: u8,
    self_color: Color,
    cells: Vec<CellContent>,
}

impl View {
    pub fn phi(&self) -> u8 {
        self.phi
    }

    pub fn self_color(&self) -> Color {
        self.self_color
    }

    pub fn cells(&self) -> impl Iterator<Item = ((i32, i32), &CellContent)> + '_ {
        ball_offsets(self.phi).iter().copied().zip(self.cells.iter())
    }

    pub fn cell(&self, off: (i32, i32)) -> Option<&CellContent> {
        ball_index(self.phi, off).map(|k| &self.cells[k])
    }

    /// Re-expresses the view in a frame turned a quarter clockwise.
    pub fn rotated(&self) -> View {
        let turn = Orientation {
            rotation: 90,
            mirrored: false,
        };
        self.reframed(turn)
    }

    /// Mirror image (left and right exchanged).
    pub fn mirrored(&self) -> View {
        let flip = Orientation {
            rotation: 0,
            mirrored: true,
        };
        self.reframed(flip)
    }

    fn reframed(&self, o: Orientation) -> View {
        let cells = ball_offsets(self.phi)
            .iter()
            .map(|&off| self.cell(o.to_global(off)).cloned().expect("ball is closed under symmetries"))
            .collect();
        View {
            phi: self.phi,
            self_color: self.self_color,
            cells,
        }
    }

    /// Debug rendering using the algorithm file cell tokens.
    pub fn render(&self) -> String {
        let r = self.phi as i32;
        let mut out = format!("self {}\n", self.self_color);
        for di in -r..=r {
            let row: Vec<String> = (-r..=r)
                .map(|dj| self.cell((di, dj)).map_or("-".into(), CellContent::token))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

fn read_cell(g: &Grid, c: &Configuration, pos: NodeId, (gi, gj): (i32, i32)) -> CellContent {
    match g.offset(pos, gi, gj) {
        None => CellContent::Boundary,
        Some(v) => match c.get(v) {
            None => CellContent::Empty,
            Some(bag) => CellContent::Occupied(bag.clone()),
        },
    }
}

/// The views a robot of color `self_color` at `pos` obtains in a Look phase:
/// four rotations, or eight orientations without chirality.
///
/// The center cell holds every robot on `pos`, the observer included.
pub fn extract_views(
    g: &Grid,
    c: &Configuration,
    pos: NodeId,
    self_color: Color,
    phi: u8,
    chirality: bool,
) -> Result<Vec<(View, Orientation)>> {
    check_phi(phi)?;
    if !c.get(pos).is_some_and(|bag| bag.contains(self_color)) {
        return Err(Error::RobotNotPresent {
            i: pos.i,
            j: pos.j,
            color: self_color.as_char(),
        });
    }
    Ok(Orientation::all(chirality)
        .into_iter()
        .map(|o| {
            let cells = ball_offsets(phi)
                .iter()
                .map(|&off| read_cell(g, c, pos, o.to_global(off)))
                .collect();
            (
                View {
                    phi,
                    self_color,
                    cells,
                },
                o,
            )
        })
        .collect())
}

pub(crate) fn cell_satisfies(content: &CellContent, want: &GuardCell) -> bool {
    match (want, content) {
        (GuardCell::Empty, CellContent::Empty) => true,
        (GuardCell::Boundary, CellContent::Boundary) => true,
        (GuardCell::EmptyOrBoundary, CellContent::Empty | CellContent::Boundary) => true,
        (GuardCell::Exact(bag), CellContent::Occupied(have)) => bag == have,
        _ => false,
    }
}

/// Orientations whose view satisfies `guard`. Empty when the rule is not
/// enabled by these views.
pub fn match_guard(views: &[(View, Orientation)], guard: &Guard) -> Result<Vec<Orientation>> {
    let mut out = Vec::new();
    for (view, o) in views {
        if view.phi != guard.phi() {
            return Err(Error::PhiMismatch {
                guard: guard.phi(),
                view: view.phi,
            });
        }
        if view.self_color != guard.self_color() {
            continue;
        }
        let ok = view
            .cells
            .iter()
            .zip(guard.cells())
            .all(|(have, want)| cell_satisfies(have, want));
        if ok {
            out.push(*o);
        }
    }
    Ok(out)
}
