//! Textual algorithm descriptions: guards drawn as cell grids, actions as a
//! new color plus a move in the guard frame.
//!
//! ```text
//! algorithm <name>
//! phi <1|2>
//! colors <C1> <C2> ...
//! chirality <yes|no>
//! robots <k>
//! grid-min <m> <n>
//! init
//!   <i> <j> <colors>
//! end
//! rule <label>
//!   self <color>
//!   guard
//!     <2*phi+1 rows of 2*phi+1 tokens>
//!   end
//!   action <color> <idle|up|down|left|right>
//! end
//! ```
//!
//! Cell tokens: `.` empty, `#` outside the grid, `?` either, `-` not part of
//! the visibility ball, letters an exact multiset. Lines starting with `#`
//! are comments everywhere except inside a `guard` block, where they are rows.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use crate::error::{DslError, Result};
use crate::grid::{Color, ColorBag, Configuration, NodeId};
use crate::observation::{ball_index, ball_offsets, Orientation};

/// Constraint on one guard cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GuardCell {
    /// White: no robot.
    Empty,
    /// Black: the node does not exist.
    Boundary,
    /// Gray: empty or non-existent.
    EmptyOrBoundary,
    /// Exactly this multiset of colors.
    Exact(ColorBag),
}

impl GuardCell {
    fn token(&self) -> String {
        match self {
            GuardCell::Empty => ".".into(),
            GuardCell::Boundary => "#".into(),
            GuardCell::EmptyOrBoundary => "?".into(),
            GuardCell::Exact(bag) => bag.to_string(),
        }
    }
}

/// A complete pattern over the visibility ball, in the guard frame.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Guard {
    phi: u8,
    self_color: Color,
    cells: Vec<GuardCell>,
}

impl Guard {
    /// `cells` are listed in [`ball_offsets`] order.
    pub fn new(phi: u8, self_color: Color, cells: Vec<GuardCell>) -> Option<Guard> {
        (ball_offsets(phi).len() == cells.len() && !cells.is_empty()).then_some(Guard {
            phi,
            self_color,
            cells,
        })
    }

    pub fn phi(&self) -> u8 {
        self.phi
    }

    pub fn self_color(&self) -> Color {
        self.self_color
    }

    pub fn cells(&self) -> &[GuardCell] {
        &self.cells
    }

    pub fn cell(&self, off: (i32, i32)) -> Option<&GuardCell> {
        ball_index(self.phi, off).map(|k| &self.cells[k])
    }

    pub fn center(&self) -> &GuardCell {
        self.cell((0, 0)).expect("center is in every ball")
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [GuardCell] {
        &mut self.cells
    }

    pub(crate) fn set_self_color(&mut self, c: Color) {
        self.self_color = c;
    }
}

/// Movement relative to the guard frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Movement {
    Idle,
    Up,
    Down,
    Left,
    Right,
}

impl Movement {
    pub fn offset(self) -> Option<(i32, i32)> {
        match self {
            Movement::Idle => None,
            Movement::Up => Some((-1, 0)),
            Movement::Down => Some((1, 0)),
            Movement::Left => Some((0, -1)),
            Movement::Right => Some((0, 1)),
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            Movement::Idle => "idle",
            Movement::Up => "up",
            Movement::Down => "down",
            Movement::Left => "left",
            Movement::Right => "right",
        }
    }

    fn parse(s: &str) -> Option<Movement> {
        Some(match s {
            "idle" => Movement::Idle,
            "up" => Movement::Up,
            "down" => Movement::Down,
            "left" => Movement::Left,
            "right" => Movement::Right,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub new_color: Color,
    pub movement: Movement,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub label: String,
    pub guard: Guard,
    pub action: Action,
}

/// A parsed and validated algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlgorithmSpec {
    pub name: String,
    pub phi: u8,
    pub colors: Vec<Color>,
    pub chirality: bool,
    pub k: usize,
    pub min_m: usize,
    pub min_n: usize,
    pub init: Configuration,
    pub rules: Vec<Rule>,
}

impl AlgorithmSpec {
    pub fn rule(&self, label: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.label == label)
    }

    /// Checks the invariants the parser enforces, for specs built in code.
    pub fn validate(&self) -> Result<(), DslError> {
        let semantic = |message: String| DslError::Semantic { line: 0, message };
        if self.phi != 1 && self.phi != 2 {
            return Err(semantic(format!("phi must be 1 or 2, got {}", self.phi)));
        }
        let declared: BTreeSet<Color> = self.colors.iter().copied().collect();
        if declared.len() != self.colors.len() {
            return Err(semantic("colors are listed twice".into()));
        }
        let undeclared = |c: Color| DslError::UndeclaredColor {
            line: 0,
            color: c.as_char(),
        };
        for c in self.init.colors() {
            if !declared.contains(&c) {
                return Err(undeclared(c));
            }
        }
        if self.init.robot_count() != self.k {
            return Err(DslError::RobotCount {
                declared: self.k,
                found: self.init.robot_count(),
            });
        }
        let mut labels = BTreeSet::new();
        for rule in &self.rules {
            if !labels.insert(rule.label.as_str()) {
                return Err(DslError::DuplicateLabel {
                    line: 0,
                    label: rule.label.clone(),
                });
            }
            if rule.guard.phi != self.phi {
                return Err(semantic(format!("rule {} has the wrong phi", rule.label)));
            }
            for c in [rule.guard.self_color, rule.action.new_color] {
                if !declared.contains(&c) {
                    return Err(undeclared(c));
                }
            }
            for cell in &rule.guard.cells {
                if let GuardCell::Exact(bag) = cell {
                    if let Some(c) = bag.iter().find(|c| !declared.contains(c)) {
                        return Err(undeclared(c));
                    }
                }
            }
            check_rule_shape(rule).map_err(semantic)?;
        }
        Ok(())
    }
}

fn check_rule_shape(rule: &Rule) -> std::result::Result<(), String> {
    match rule.guard.center() {
        GuardCell::Exact(bag) if bag.contains(rule.guard.self_color) => {}
        _ => {
            return Err(format!(
                "rule {}: the center cell must list the observing robot's color {}",
                rule.label, rule.guard.self_color
            ))
        }
    }
    if let Some(off) = rule.action.movement.offset() {
        if matches!(
            rule.guard.cell(off),
            Some(GuardCell::Boundary | GuardCell::EmptyOrBoundary)
        ) {
            return Err(format!(
                "rule {}: the movement target may lie outside the grid",
                rule.label
            ));
        }
    }
    Ok(())
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next meaningful line, skipping blanks and (optionally) comments.
    fn next(&mut self, comments: bool) -> Option<(usize, &'a str)> {
        for (k, raw) in self.inner.by_ref() {
            let line = raw.trim();
            if line.is_empty() || (comments && line.starts_with('#')) {
                continue;
            }
            return Some((k + 1, line));
        }
        None
    }
}

fn syntax(line: usize, message: impl Into<String>) -> DslError {
    DslError::Syntax {
        line,
        message: message.into(),
    }
}

fn parse_color(line: usize, tok: &str) -> Result<Color, DslError> {
    let mut chars = tok.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Color::new(c).map_err(|_| syntax(line, format!("bad color `{tok}`"))),
        _ => Err(syntax(line, format!("bad color `{tok}`"))),
    }
}

fn parse_bag(line: usize, tok: &str) -> Result<ColorBag, DslError> {
    ColorBag::parse(tok).map_err(|_| syntax(line, format!("bad color multiset `{tok}`")))
}

fn parse_usize(line: usize, tok: Option<&str>, what: &str) -> Result<usize, DslError> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| syntax(line, format!("expected {what}")))
}

fn expect_end(line: usize, words: &[&str], n: usize) -> Result<(), DslError> {
    if words.len() == n {
        Ok(())
    } else {
        Err(syntax(line, format!("unexpected trailing tokens after `{}`", words[0])))
    }
}

/// Parses and validates an algorithm file.
pub fn parse_algorithm(text: &str) -> Result<AlgorithmSpec, DslError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let mut name = None;
    let mut phi = None;
    let mut colors: Option<Vec<Color>> = None;
    let mut chirality = None;
    let mut k = None;
    let mut minima = None;
    let mut init = None;
    let mut rules: Vec<(usize, Rule)> = Vec::new();

    while let Some((ln, line)) = lines.next(true) {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "algorithm" => {
                expect_end(ln, &words, 2)?;
                name = Some(words[1].to_string());
            }
            "phi" => {
                expect_end(ln, &words, 2)?;
                match words[1] {
                    "1" => phi = Some(1u8),
                    "2" => phi = Some(2u8),
                    other => return Err(syntax(ln, format!("phi must be 1 or 2, got `{other}`"))),
                }
            }
            "colors" => {
                let cs = words[1..]
                    .iter()
                    .map(|t| parse_color(ln, t))
                    .collect::<Result<Vec<_>, _>>()?;
                if cs.is_empty() {
                    return Err(syntax(ln, "expected at least one color"));
                }
                if cs.iter().collect::<BTreeSet<_>>().len() != cs.len() {
                    return Err(syntax(ln, "duplicate color"));
                }
                colors = Some(cs);
            }
            "chirality" => {
                expect_end(ln, &words, 2)?;
                chirality = Some(match words[1] {
                    "yes" => true,
                    "no" => false,
                    other => return Err(syntax(ln, format!("chirality must be yes or no, got `{other}`"))),
                });
            }
            "robots" => {
                expect_end(ln, &words, 2)?;
                k = Some(parse_usize(ln, words.get(1).copied(), "a robot count")?);
            }
            "grid-min" => {
                expect_end(ln, &words, 3)?;
                let m = parse_usize(ln, words.get(1).copied(), "minimum rows")?;
                let n = parse_usize(ln, words.get(2).copied(), "minimum columns")?;
                if m == 0 || n == 0 {
                    return Err(syntax(ln, "grid minima must be positive"));
                }
                minima = Some((m, n));
            }
            "init" => {
                expect_end(ln, &words, 1)?;
                let cs = colors
                    .as_ref()
                    .ok_or_else(|| syntax(ln, "`colors` must precede `init`"))?;
                init = Some(parse_init(&mut lines, cs)?);
            }
            "rule" => {
                expect_end(ln, &words, 2)?;
                let p = phi.ok_or_else(|| syntax(ln, "`phi` must precede rules"))?;
                let cs = colors
                    .as_ref()
                    .ok_or_else(|| syntax(ln, "`colors` must precede rules"))?;
                let rule = parse_rule(&mut lines, words[1], p, cs)?;
                if rules.iter().any(|(_, r)| r.label == rule.label) {
                    return Err(DslError::DuplicateLabel {
                        line: ln,
                        label: rule.label,
                    });
                }
                rules.push((ln, rule));
            }
            other => return Err(syntax(ln, format!("unknown directive `{other}`"))),
        }
    }

    let missing = |what: &str| syntax(0, format!("missing `{what}` directive"));
    let (min_m, min_n) = minima.ok_or_else(|| missing("grid-min"))?;
    let spec = AlgorithmSpec {
        name: name.ok_or_else(|| missing("algorithm"))?,
        phi: phi.ok_or_else(|| missing("phi"))?,
        colors: colors.ok_or_else(|| missing("colors"))?,
        chirality: chirality.ok_or_else(|| missing("chirality"))?,
        k: k.ok_or_else(|| missing("robots"))?,
        min_m,
        min_n,
        init: init.ok_or_else(|| missing("init"))?,
        rules: rules.iter().map(|(_, r)| r.clone()).collect(),
    };
    for (ln, rule) in &rules {
        check_rule_shape(rule).map_err(|message| DslError::Semantic { line: *ln, message })?;
    }
    spec.validate()?;
    Ok(spec)
}

fn parse_init(lines: &mut Lines<'_>, colors: &[Color]) -> Result<Configuration, DslError> {
    let mut config = Configuration::new();
    loop {
        let (ln, line) = lines.next(true).ok_or_else(|| syntax(0, "unterminated `init` block"))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        if words == ["end"] {
            return Ok(config);
        }
        if words.len() != 3 {
            return Err(syntax(ln, "expected `<i> <j> <colors>`"));
        }
        let i = parse_usize(ln, Some(words[0]), "a row index")?;
        let j = parse_usize(ln, Some(words[1]), "a column index")?;
        for c in parse_bag(ln, words[2])?.iter() {
            if !colors.contains(&c) {
                return Err(DslError::UndeclaredColor {
                    line: ln,
                    color: c.as_char(),
                });
            }
            config.add(NodeId::new(i, j), c);
        }
    }
}

fn parse_rule(lines: &mut Lines<'_>, label: &str, phi: u8, colors: &[Color]) -> Result<Rule, DslError> {
    let declared = |ln: usize, c: Color| {
        if colors.contains(&c) {
            Ok(c)
        } else {
            Err(DslError::UndeclaredColor {
                line: ln,
                color: c.as_char(),
            })
        }
    };
    let mut self_color = None;
    let mut cells = None;
    let mut action = None;
    loop {
        let (ln, line) = lines
            .next(true)
            .ok_or_else(|| syntax(0, format!("unterminated rule `{label}`")))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[0] {
            "end" => {
                expect_end(ln, &words, 1)?;
                break;
            }
            "self" => {
                expect_end(ln, &words, 2)?;
                self_color = Some(declared(ln, parse_color(ln, words[1])?)?);
            }
            "guard" => {
                expect_end(ln, &words, 1)?;
                cells = Some(parse_guard_rows(lines, phi, &declared)?);
            }
            "action" => {
                expect_end(ln, &words, 3)?;
                let c = declared(ln, parse_color(ln, words[1])?)?;
                let movement = Movement::parse(words[2])
                    .ok_or_else(|| syntax(ln, format!("unknown movement `{}`", words[2])))?;
                action = Some(Action {
                    new_color: c,
                    movement,
                });
            }
            other => return Err(syntax(ln, format!("unknown rule directive `{other}`"))),
        }
    }
    let what = |w: &str| syntax(0, format!("rule `{label}` lacks `{w}`"));
    let self_color = self_color.ok_or_else(|| what("self"))?;
    Ok(Rule {
        label: label.to_string(),
        guard: Guard {
            phi,
            self_color,
            cells: cells.ok_or_else(|| what("guard"))?,
        },
        action: action.ok_or_else(|| what("action"))?,
    })
}

fn parse_guard_rows(
    lines: &mut Lines<'_>,
    phi: u8,
    declared: &dyn Fn(usize, Color) -> Result<Color, DslError>,
) -> Result<Vec<GuardCell>, DslError> {
    let r = phi as i32;
    let mut cells = vec![GuardCell::Empty; ball_offsets(phi).len()];
    for di in -r..=r {
        let (ln, line) = lines.next(false).ok_or_else(|| syntax(0, "unterminated guard"))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != (2 * r + 1) as usize {
            return Err(syntax(ln, format!("guard rows need {} cells", 2 * r + 1)));
        }
        for (dj, tok) in (-r..=r).zip(toks) {
            let slot = ball_index(phi, (di, dj));
            match (tok, slot) {
                ("-", None) => {}
                ("-", Some(_)) => {
                    return Err(syntax(ln, format!("cell ({di},{dj}) is inside the ball and needs a value")))
                }
                (_, None) => return Err(DslError::OutsideBall { line: ln, di, dj }),
                (tok, Some(k)) => {
                    cells[k] = match tok {
                        "." => GuardCell::Empty,
                        "#" => GuardCell::Boundary,
                        "?" => GuardCell::EmptyOrBoundary,
                        letters => {
                            let bag = parse_bag(ln, letters)?;
                            for c in bag.iter() {
                                declared(ln, c)?;
                            }
                            GuardCell::Exact(bag)
                        }
                    }
                }
            }
        }
    }
    match lines.next(true) {
        Some((_, "end")) => Ok(cells),
        Some((ln, _)) => Err(syntax(ln, "expected `end` after guard rows")),
        None => Err(syntax(0, "unterminated guard")),
    }
}

/// Canonical text form; `parse_algorithm(&render_algorithm(a)) == a`.
pub fn render_algorithm(a: &AlgorithmSpec) -> String {
    let mut out = String::new();
    let colors: Vec<String> = a.colors.iter().map(|c| c.to_string()).collect();
    writeln!(out, "algorithm {}", a.name).unwrap();
    writeln!(out, "phi {}", a.phi).unwrap();
    writeln!(out, "colors {}", colors.join(" ")).unwrap();
    writeln!(out, "chirality {}", if a.chirality { "yes" } else { "no" }).unwrap();
    writeln!(out, "robots {}", a.k).unwrap();
    writeln!(out, "grid-min {} {}", a.min_m, a.min_n).unwrap();
    writeln!(out, "init").unwrap();
    for (v, bag) in a.init.iter() {
        writeln!(out, "  {} {} {}", v.i, v.j, bag).unwrap();
    }
    writeln!(out, "end").unwrap();
    for rule in &a.rules {
        writeln!(out).unwrap();
        write!(out, "{rule}").unwrap();
    }
    out
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.guard.phi as i32;
        let width = self.guard.cells.iter().map(|c| c.token().len()).max().unwrap_or(1);
        writeln!(f, "rule {}", self.label)?;
        writeln!(f, "  self {}", self.guard.self_color)?;
        writeln!(f, "  guard")?;
        for di in -r..=r {
            let row: Vec<String> = (-r..=r)
                .map(|dj| {
                    let tok = self.guard.cell((di, dj)).map_or("-".to_string(), GuardCell::token);
                    format!("{tok:<width$}")
                })
                .collect();
            writeln!(f, "    {}", row.join(" ").trim_end())?;
        }
        writeln!(f, "  end")?;
        writeln!(
            f,
            "  action {} {}",
            self.action.new_color,
            self.action.movement.keyword()
        )?;
        writeln!(f, "end")
    }
}

/// A finding from [`lint_rules`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    /// Some view satisfies both guards; the scheduler picks one.
    Overlap {
        first: String,
        second: String,
        /// Frame of `second` relative to `first`.
        orientation: Orientation,
    },
    /// The guard matches itself in another orientation with a different
    /// resulting move, so the scheduler chooses the direction.
    AmbiguousMove { rule: String, orientation: Orientation },
    /// No view on any admissible grid satisfies the guard.
    Unsatisfiable { rule: String, reason: String },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Overlap {
                first,
                second,
                orientation,
            } => write!(f, "overlap: {first} and {second} (relative orientation {orientation})"),
            Diagnostic::AmbiguousMove { rule, orientation } => {
                write!(f, "ambiguous move: {rule} matches itself at orientation {orientation}")
            }
            Diagnostic::Unsatisfiable { rule, reason } => write!(f, "unsatisfiable: {rule}: {reason}"),
        }
    }
}

/// Per-cell requirement obtained by intersecting guard cells.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Need {
    Free,
    Empty,
    Boundary,
    Exact(ColorBag),
}

fn need_of(cell: &GuardCell) -> Need {
    match cell {
        GuardCell::Empty => Need::Empty,
        GuardCell::Boundary => Need::Boundary,
        GuardCell::EmptyOrBoundary => Need::Free,
        GuardCell::Exact(b) => Need::Exact(b.clone()),
    }
}

fn meet(a: &GuardCell, b: &GuardCell) -> Option<Need> {
    use GuardCell::*;
    Some(match (a, b) {
        (EmptyOrBoundary, Exact(_)) | (Exact(_), EmptyOrBoundary) => return None,
        (EmptyOrBoundary, x) | (x, EmptyOrBoundary) => need_of(x),
        (Empty, Empty) => Need::Empty,
        (Boundary, Boundary) => Need::Boundary,
        (Exact(x), Exact(y)) if x == y => Need::Exact(x.clone()),
        _ => return None,
    })
}

/// Whether some grid of at least `min_m x min_n` (in either orientation, since
/// the guard frame may be turned) has a node whose neighborhood has exactly
/// the required in-grid / off-grid pattern.
fn boundary_pattern_realizable(phi: u8, needs: &[(i32, i32, Need)], min_m: usize, min_n: usize) -> bool {
    let r = phi as usize;
    // Distances to the up/down/left/right borders; `r` stands for "r or more".
    for up in 0..=r {
        for down in 0..=r {
            for left in 0..=r {
                for right in 0..=r {
                    let fits = |a: usize, b: usize, min: usize| a == r || b == r || a + b + 1 >= min;
                    let sizes_ok = (fits(up, down, min_m) && fits(left, right, min_n))
                        || (fits(up, down, min_n) && fits(left, right, min_m));
                    if !sizes_ok {
                        continue;
                    }
                    let pattern_ok = needs.iter().all(|(di, dj, need)| {
                        let inside = -(up as i32) <= *di
                            && *di <= down as i32
                            && -(left as i32) <= *dj
                            && *dj <= right as i32;
                        match need {
                            Need::Free => true,
                            Need::Boundary => !inside,
                            Need::Empty | Need::Exact(_) => inside,
                        }
                    });
                    if pattern_ok {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn robots_needed(needs: &[(i32, i32, Need)]) -> usize {
    needs
        .iter()
        .map(|(_, _, n)| match n {
            Need::Exact(b) => b.len(),
            _ => 0,
        })
        .sum()
}

fn satisfiable(a: &AlgorithmSpec, needs: &[(i32, i32, Need)]) -> Result<(), String> {
    if robots_needed(needs) > a.k {
        return Err(format!("requires more than {} robots", a.k));
    }
    if !boundary_pattern_realizable(a.phi, needs, a.min_m, a.min_n) {
        return Err(format!(
            "boundary cells cannot be realized on any grid of at least {}x{}",
            a.min_m, a.min_n
        ));
    }
    Ok(())
}

/// Reports overlapping guards, self-ambiguous moves and unsatisfiable guards.
pub fn lint_rules(a: &AlgorithmSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let offsets = ball_offsets(a.phi);
    for rule in &a.rules {
        let needs: Vec<_> = offsets
            .iter()
            .zip(rule.guard.cells())
            .map(|(&(di, dj), c)| (di, dj, need_of(c)))
            .collect();
        if let Err(reason) = satisfiable(a, &needs) {
            out.push(Diagnostic::Unsatisfiable {
                rule: rule.label.clone(),
                reason,
            });
        }
    }
    for (x, first) in a.rules.iter().enumerate() {
        for second in &a.rules[x..] {
            if first.guard.self_color != second.guard.self_color {
                continue;
            }
            let same = std::ptr::eq(first, second);
            for q in Orientation::all(a.chirality) {
                if same && q == Orientation::NORTH {
                    continue;
                }
                // `second`'s cell at `off` sits at `q.to_global(off)` in `first`'s frame.
                let mut needs = Vec::with_capacity(offsets.len());
                let mut compatible = true;
                for &off in offsets {
                    let there = q.to_global(off);
                    let want1 = first.guard.cell(there).expect("ball is symmetric");
                    let want2 = second.guard.cell(off).expect("offset in ball");
                    match meet(want1, want2) {
                        Some(n) => needs.push((there.0, there.1, n)),
                        None => {
                            compatible = false;
                            break;
                        }
                    }
                }
                if !compatible || satisfiable(a, &needs).is_err() {
                    continue;
                }
                if same {
                    let m1 = first.action.movement.offset();
                    let m2 = second.action.movement.offset().map(|o| q.to_global(o));
                    if m1 != m2 {
                        out.push(Diagnostic::AmbiguousMove {
                            rule: first.label.clone(),
                            orientation: q,
                        });
                    }
                } else {
                    out.push(Diagnostic::Overlap {
                        first: first.label.clone(),
                        second: second.label.clone(),
                        orientation: q,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TINY: &str = "\
# a two-rule algorithm
algorithm tiny
phi 1
colors G W
chirality yes
robots 2
grid-min 2 3
init
  0 0 G
  0 1 W
end

rule R1
  self W
  guard
    - ? -
    G W .
    - ? -
  end
  action W right
end
";

    #[test]
    fn parses_header_and_rules() {
        let a = parse_algorithm(TINY).unwrap();
        assert_eq!(a.name, "tiny");
        assert_eq!((a.phi, a.k, a.min_m, a.min_n), (1, 2, 2, 3));
        assert!(a.chirality);
        assert_eq!(a.rules.len(), 1);
        assert_eq!(a.rules[0].action.movement, Movement::Right);
        assert_eq!(
            a.rules[0].guard.cell((0, -1)),
            Some(&GuardCell::Exact(ColorBag::parse("G").unwrap()))
        );
        assert_eq!(a.rules[0].guard.cell((-1, 0)), Some(&GuardCell::EmptyOrBoundary));
    }

    #[test]
    fn round_trip() {
        let a = parse_algorithm(TINY).unwrap();
        let text = render_algorithm(&a);
        assert_eq!(parse_algorithm(&text).unwrap(), a);
        assert_eq!(text.matches("\nrule ").count(), 1);
    }

    #[test]
    fn undeclared_color() {
        let text = TINY.replace("action W right", "action X right");
        let err = parse_algorithm(&text).unwrap_err();
        assert!(matches!(err, DslError::UndeclaredColor { color: 'X', .. }), "{err}");
        assert!(err.to_string().contains("undeclared color"));
    }

    #[test]
    fn empty_rule_section_is_legal() {
        let text = TINY.split("\nrule").next().unwrap();
        let a = parse_algorithm(text).unwrap();
        assert!(a.rules.is_empty());
    }

    #[test]
    fn semantic_errors() {
        let dup = format!("{TINY}\n{}", &TINY[TINY.find("rule R1").unwrap()..]);
        assert!(matches!(parse_algorithm(&dup), Err(DslError::DuplicateLabel { .. })));

        let outside = TINY.replace("    - ? -\n    G W .", "    . ? -\n    G W .");
        assert!(matches!(parse_algorithm(&outside), Err(DslError::OutsideBall { di: -1, dj: -1, .. })));

        let count = TINY.replace("robots 2", "robots 3");
        assert!(matches!(
            parse_algorithm(&count),
            Err(DslError::RobotCount { declared: 3, found: 2 })
        ));

        let short_row = TINY.replace("    G W .", "    G W");
        assert!(matches!(parse_algorithm(&short_row), Err(DslError::Syntax { .. })));

        let bad_center = TINY.replace("    G W .", "    G G .");
        assert!(matches!(parse_algorithm(&bad_center), Err(DslError::Semantic { .. })));

        let off_grid = TINY.replace("    G W .", "    G W #");
        assert!(matches!(parse_algorithm(&off_grid), Err(DslError::Semantic { .. })));
    }

    #[test]
    fn syntax_error_reports_line() {
        let text = TINY.replace("phi 1", "phi 7");
        match parse_algorithm(&text) {
            Err(DslError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lint_flags_identical_rules() {
        let second = TINY[TINY.find("rule R1").unwrap()..].replace("rule R1", "rule R2");
        let a = parse_algorithm(&format!("{TINY}\n{second}")).unwrap();
        let diags = lint_rules(&a);
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::Overlap { first, second, .. } if first == "R1" && second == "R2")));
    }

    #[test]
    fn lint_flags_opposite_boundaries() {
        let text = TINY.replace("    - ? -\n    G W .\n    - ? -", "    - # -\n    G W .\n    - # -");
        let a = parse_algorithm(&text).unwrap();
        let diags = lint_rules(&a);
        assert!(diags.iter().any(|d| matches!(d, Diagnostic::Unsatisfiable { rule, .. } if rule == "R1")));
        // The same pattern is fine once single-row grids are admissible.
        let loose = text.replace("grid-min 2 3", "grid-min 1 3");
        let a = parse_algorithm(&loose).unwrap();
        assert!(lint_rules(&a).iter().all(|d| !matches!(d, Diagnostic::Unsatisfiable { .. })));
    }

    /// Brute-force oracle: does the guard's boundary pattern occur at some node
    /// of some grid between the minima and `limit x limit`?
    fn pattern_occurs(a: &AlgorithmSpec, guard: &Guard, limit: usize) -> bool {
        use crate::grid::Grid;
        for m in a.min_m..=limit {
            for n in a.min_n..=limit {
                let g = Grid::new(m, n).unwrap();
                for v in g.nodes() {
                    for o in Orientation::all(a.chirality) {
                        let ok = ball_offsets(a.phi).iter().zip(guard.cells()).all(|(&off, cell)| {
                            let (gi, gj) = o.to_global(off);
                            let inside = g.offset(v, gi, gj).is_some();
                            match cell {
                                GuardCell::Boundary => !inside,
                                GuardCell::EmptyOrBoundary => true,
                                _ => inside,
                            }
                        });
                        if ok {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    #[test]
    fn realizability_agrees_with_enumeration() {
        let rows = ["- # -\nG W .\n- # -", "- # -\n# W .\n- . -", "- . -\n# W #\n- . -", "- ? -\n. W #\n- # -"];
        for (k, pat) in rows.iter().enumerate() {
            for minima in ["grid-min 1 1", "grid-min 2 3", "grid-min 3 3"] {
                let body = TINY
                    .replace("    - ? -\n    G W .\n    - ? -", &pat.lines().map(|l| format!("    {l}")).collect::<Vec<_>>().join("\n"))
                    .replace("grid-min 2 3", minima)
                    .replace("action W right", if pat.ends_with("- . -") { "action W down" } else { "action W left" });
                let Ok(a) = parse_algorithm(&body) else { continue };
                let unsat = lint_rules(&a).iter().any(|d| matches!(d, Diagnostic::Unsatisfiable { .. }));
                let occurs = pattern_occurs(&a, &a.rules[0].guard, 5);
                assert_eq!(!unsat, occurs, "pattern {k} with {minima}");
            }
        }
    }
}
