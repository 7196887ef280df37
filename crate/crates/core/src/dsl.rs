//! The grid-layout DSL.
//!
//! A program is a fixed sequence of twelve production choices, one per
//! nonterminal of the grammar below, and renders to a 7×7 grid:
//!
//! ```text
//! Program   -> <Shape, Colour>
//! Shape     -> Box(Left, Right, Top, Bottom, Thickness, O, I)
//! Left, Right, Top, Bottom -> 0 | 1 | ... | 6
//! Thickness -> 1 | 2 | 3
//! O         -> chicken | pig
//! I         -> chicken | pig | pebble
//! Colour    -> [red, green, blue][A2(A1)]
//! A1        -> x | y | x + y
//! A2        -> z:0 | z:1 | z:2 | z:z%2 | z:z%2+1 | z:2*(z%2)
//! ```
//!
//! Coordinates are `x` = column and `y` = row, origin at the top-left.
//! Pebbles are colourless: they render with colour index 0 and a pebble
//! reveal says nothing about colour.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::UttId;

pub const GRID_SIZE: usize = 7;
pub const NUM_CELLS: usize = GRID_SIZE * GRID_SIZE;
pub const NUM_NONTERMINALS: usize = 12;
pub const MAX_ARITY: usize = 7;
pub const ARITIES: [usize; NUM_NONTERMINALS] = [1, 1, 7, 7, 7, 7, 3, 2, 3, 1, 3, 6];

/// Distinct cell contents an utterance can reveal: chicken and pig in three
/// colours each, plus the colourless pebble.
pub const CELL_CONTENTS: usize = 7;
pub const NUM_UTTERANCES: usize = NUM_CELLS * CELL_CONTENTS;

pub const PALETTE: [&str; 3] = ["red", "green", "blue"];

/// Number of choice tuples before the validity predicate is applied.
pub fn candidate_count() -> usize {
    ARITIES.iter().product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Nonterminal {
    Program,
    Shape,
    Left,
    Right,
    Top,
    Bottom,
    Thickness,
    Outside,
    Inside,
    Colour,
    A1,
    A2,
}

impl Nonterminal {
    pub const ALL: [Nonterminal; NUM_NONTERMINALS] = [
        Nonterminal::Program,
        Nonterminal::Shape,
        Nonterminal::Left,
        Nonterminal::Right,
        Nonterminal::Top,
        Nonterminal::Bottom,
        Nonterminal::Thickness,
        Nonterminal::Outside,
        Nonterminal::Inside,
        Nonterminal::Colour,
        Nonterminal::A1,
        Nonterminal::A2,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn arity(self) -> usize {
        ARITIES[self.index()]
    }

    pub fn name(self) -> &'static str {
        match self {
            Nonterminal::Program => "Program",
            Nonterminal::Shape => "Shape",
            Nonterminal::Left => "Left",
            Nonterminal::Right => "Right",
            Nonterminal::Top => "Top",
            Nonterminal::Bottom => "Bottom",
            Nonterminal::Thickness => "Thickness",
            Nonterminal::Outside => "O",
            Nonterminal::Inside => "I",
            Nonterminal::Colour => "Colour",
            Nonterminal::A1 => "A1",
            Nonterminal::A2 => "A2",
        }
    }

    /// Human-readable label of the `choice`-th expansion rule.
    pub fn rule_label(self, choice: usize) -> String {
        assert!(choice < self.arity(), "{} has no rule {choice}", self.name());
        match self {
            Nonterminal::Program => "<Shape, Colour>".into(),
            Nonterminal::Shape => "Box".into(),
            Nonterminal::Left | Nonterminal::Right | Nonterminal::Top | Nonterminal::Bottom => choice.to_string(),
            Nonterminal::Thickness => (choice + 1).to_string(),
            Nonterminal::Outside | Nonterminal::Inside => Object::ALL[choice].name().into(),
            Nonterminal::Colour => "[red, green, blue][A2(A1)]".into(),
            Nonterminal::A1 => ["x", "y", "x+y"][choice].into(),
            Nonterminal::A2 => ["z:0", "z:1", "z:2", "z:z%2", "z:z%2+1", "z:2*(z%2)"][choice].into(),
        }
    }

    pub fn rule_labels(self) -> Vec<String> {
        (0..self.arity()).map(|j| self.rule_label(j)).collect()
    }
}

impl fmt::Display for Nonterminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Nonterminal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let alias = match lower.as_str() {
            "outside" => "o",
            "inside" => "i",
            other => other,
        };
        Self::ALL
            .iter()
            .copied()
            .find(|nt| nt.name().eq_ignore_ascii_case(alias))
            .ok_or_else(|| Error::UnknownNonterminal(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Object {
    Chicken,
    Pig,
    Pebble,
}

impl Object {
    pub const ALL: [Object; 3] = [Object::Chicken, Object::Pig, Object::Pebble];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Object::Chicken => "chicken",
            Object::Pig => "pig",
            Object::Pebble => "pebble",
        }
    }
}

/// What an occupied cell shows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Content {
    pub object: Object,
    pub colour: u8,
}

impl Content {
    /// Builds a content value, forcing pebbles to the canonical colour 0.
    pub fn new(object: Object, colour: u8) -> Self {
        let colour = if object == Object::Pebble { 0 } else { colour };
        Content { object, colour }
    }

    /// Dense index in `0..CELL_CONTENTS`: chickens 0–2, pigs 3–5, pebble 6.
    pub fn index(self) -> usize {
        match self.object {
            Object::Pebble => 6,
            obj => obj.index() * 3 + self.colour as usize,
        }
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < CELL_CONTENTS);
        match i {
            6 => Content::new(Object::Pebble, 0),
            _ => Content::new(Object::ALL[i / 3], (i % 3) as u8),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Option<Content>", into = "Option<Content>")]
pub enum Cell {
    #[default]
    Empty,
    Occupied(Content),
}

impl Cell {
    pub fn content(self) -> Option<Content> {
        match self {
            Cell::Empty => None,
            Cell::Occupied(c) => Some(c),
        }
    }

    pub fn is_occupied(self) -> bool {
        matches!(self, Cell::Occupied(_))
    }
}

impl From<Option<Content>> for Cell {
    fn from(c: Option<Content>) -> Self {
        c.map_or(Cell::Empty, |c| Cell::Occupied(Content::new(c.object, c.colour)))
    }
}

impl From<Cell> for Option<Content> {
    fn from(c: Cell) -> Self {
        c.content()
    }
}

/// A rendered 7×7 pattern. Serialized as seven rows (top to bottom).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    rows: [[Cell; GRID_SIZE]; GRID_SIZE],
}

impl Grid {
    pub fn get(&self, x: usize, y: usize) -> Cell {
        self.rows[y][x]
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(y, row)| row.iter().enumerate().map(move |(x, &c)| (x, y, c)))
    }

    pub fn occupied_count(&self) -> usize {
        self.cells().filter(|(_, _, c)| c.is_occupied()).count()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            for (x, cell) in row.iter().enumerate() {
                if x > 0 {
                    f.write_str(" ")?;
                }
                match cell {
                    Cell::Empty => f.write_str("..")?,
                    Cell::Occupied(c) => {
                        let obj = match c.object {
                            Object::Chicken => 'C',
                            Object::Pig => 'P',
                            Object::Pebble => 'o',
                        };
                        let col = match c.object {
                            Object::Pebble => '_',
                            _ => ['r', 'g', 'b'][c.colour as usize],
                        };
                        write!(f, "{obj}{col}")?;
                    }
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Returns the reason a choice sequence is not a valid program, if any.
fn check_choices(choices: &[u8]) -> std::result::Result<(), String> {
    if choices.len() != NUM_NONTERMINALS {
        return Err(format!("expected {NUM_NONTERMINALS} choices, got {}", choices.len()));
    }
    for (nt, (&c, &arity)) in Nonterminal::ALL.iter().zip(choices.iter().zip(ARITIES.iter())) {
        if c as usize >= arity {
            return Err(format!("{} choice {c} out of range 0..{arity}", nt.name()));
        }
    }
    let [left, right, top, bottom, thickness] = [2, 3, 4, 5, 6].map(|i| choices[i] as usize);
    let thickness = thickness + 1;
    if left >= right {
        return Err("Left must be smaller than Right".into());
    }
    if top >= bottom {
        return Err("Top must be smaller than Bottom".into());
    }
    let min_side = 2 * thickness + 1;
    if right - left + 1 < min_side || bottom - top + 1 < min_side {
        return Err(format!("box too small for thickness {thickness}"));
    }
    Ok(())
}

/// The validity predicate: both box sides at least `2·Thickness + 1` so the
/// interior is never empty.
pub fn is_valid(choices: &[u8]) -> bool {
    check_choices(choices).is_ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct Program([u8; NUM_NONTERMINALS]);

impl Program {
    pub fn new(choices: [u8; NUM_NONTERMINALS]) -> Result<Self> {
        check_choices(&choices).map_err(|reason| Error::InvalidProgram {
            choices: choices.to_vec(),
            reason,
        })?;
        Ok(Program(choices))
    }

    pub fn from_slice(choices: &[u8]) -> Result<Self> {
        let arr: [u8; NUM_NONTERMINALS] = choices.try_into().map_err(|_| Error::InvalidProgram {
            choices: choices.to_vec(),
            reason: format!("expected {NUM_NONTERMINALS} choices"),
        })?;
        Self::new(arr)
    }

    pub fn choices(&self) -> &[u8; NUM_NONTERMINALS] {
        &self.0
    }

    pub fn choice(&self, nt: Nonterminal) -> usize {
        self.0[nt.index()] as usize
    }

    pub fn left(&self) -> usize {
        self.choice(Nonterminal::Left)
    }

    pub fn right(&self) -> usize {
        self.choice(Nonterminal::Right)
    }

    pub fn top(&self) -> usize {
        self.choice(Nonterminal::Top)
    }

    pub fn bottom(&self) -> usize {
        self.choice(Nonterminal::Bottom)
    }

    /// Rule value of `Thickness` (1–3), not the choice index.
    pub fn thickness(&self) -> usize {
        self.choice(Nonterminal::Thickness) + 1
    }

    pub fn outside(&self) -> Object {
        Object::ALL[self.choice(Nonterminal::Outside)]
    }

    pub fn inside(&self) -> Object {
        Object::ALL[self.choice(Nonterminal::Inside)]
    }

    fn colour_at(&self, x: usize, y: usize) -> u8 {
        let z = match self.choice(Nonterminal::A1) {
            0 => x,
            1 => y,
            _ => x + y,
        };
        let c = match self.choice(Nonterminal::A2) {
            0 => 0,
            1 => 1,
            2 => 2,
            3 => z % 2,
            4 => z % 2 + 1,
            _ => 2 * (z % 2),
        };
        c as u8
    }

    /// Evaluates a single cell without rendering the whole grid.
    pub fn cell(&self, x: usize, y: usize) -> Cell {
        let (l, r, t, b) = (self.left(), self.right(), self.top(), self.bottom());
        if x < l || x > r || y < t || y > b {
            return Cell::Empty;
        }
        let ring = (x - l).min(r - x).min(y - t).min(b - y);
        let object = if ring < self.thickness() {
            self.outside()
        } else {
            self.inside()
        };
        Cell::Occupied(Content::new(object, self.colour_at(x, y)))
    }

    pub fn render(&self) -> Grid {
        let mut rows = [[Cell::Empty; GRID_SIZE]; GRID_SIZE];
        for (y, row) in rows.iter_mut().enumerate() {
            for (x, cell) in row.iter_mut().enumerate() {
                *cell = self.cell(x, y);
            }
        }
        Grid { rows }
    }

    /// The lexicon `l(h, D)`.
    pub fn is_consistent(&self, spec: &Spec) -> bool {
        spec.iter().all(|u| self.satisfies(u))
    }

    pub fn satisfies(&self, u: &Utterance) -> bool {
        self.cell(u.x as usize, u.y as usize) == Cell::Occupied(u.content())
    }

    /// One utterance per occupied cell, in utterance-id order.
    pub fn utterances(&self) -> Vec<Utterance> {
        self.render()
            .cells()
            .filter_map(|(x, y, c)| c.content().map(|c| Utterance::from_content(x, y, c)))
            .collect()
    }
}

impl TryFrom<Vec<u8>> for Program {
    type Error = Error;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        Program::from_slice(&v)
    }
}

impl From<Program> for Vec<u8> {
    fn from(p: Program) -> Self {
        p.0.to_vec()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, nt) in Nonterminal::ALL.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            if nt.arity() == 1 {
                f.write_str("·")?;
            } else {
                f.write_str(&nt.rule_label(self.0[i] as usize))?;
            }
        }
        f.write_str("]")
    }
}

pub fn render(p: &Program) -> Grid {
    p.render()
}

pub fn consistent(p: &Program, d: &Spec) -> bool {
    p.is_consistent(d)
}

pub fn valid_utterances(p: &Program) -> Vec<Utterance> {
    p.utterances()
}

/// Every valid program, in lexicographic order of choices. The position in
/// this sequence is the program index used throughout the crate.
pub fn enumerate_programs() -> Vec<Program> {
    let mut out = Vec::new();
    let mut choices = [0u8; NUM_NONTERMINALS];
    loop {
        if is_valid(&choices) {
            out.push(Program(choices));
        }
        // odometer increment, last nonterminal fastest
        let mut i = NUM_NONTERMINALS;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            choices[i] += 1;
            if (choices[i] as usize) < ARITIES[i] {
                break;
            }
            choices[i] = 0;
        }
    }
}

/// One revealed cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawUtterance")]
pub struct Utterance {
    pub x: u8,
    pub y: u8,
    pub object: Object,
    pub colour: u8,
}

#[derive(Deserialize)]
struct RawUtterance {
    x: u8,
    y: u8,
    object: Object,
    #[serde(default)]
    colour: u8,
}

impl TryFrom<RawUtterance> for Utterance {
    type Error = Error;

    fn try_from(r: RawUtterance) -> Result<Self> {
        Utterance::new(r.x, r.y, r.object, r.colour)
    }
}

impl Utterance {
    pub fn new(x: u8, y: u8, object: Object, colour: u8) -> Result<Self> {
        if x as usize >= GRID_SIZE || y as usize >= GRID_SIZE {
            return Err(Error::InvalidUtterance(format!("cell ({x}, {y}) is off the grid")));
        }
        if colour > 2 {
            return Err(Error::InvalidUtterance(format!("colour {colour} out of range")));
        }
        let c = Content::new(object, colour);
        Ok(Utterance {
            x,
            y,
            object: c.object,
            colour: c.colour,
        })
    }

    pub fn from_content(x: usize, y: usize, c: Content) -> Self {
        Utterance {
            x: x as u8,
            y: y as u8,
            object: c.object,
            colour: c.colour,
        }
    }

    pub fn content(&self) -> Content {
        Content::new(self.object, self.colour)
    }

    /// Dense id ordered by `(y, x, object, colour)`.
    pub fn id(&self) -> UttId {
        let cell = self.y as usize * GRID_SIZE + self.x as usize;
        (cell * CELL_CONTENTS + self.content().index()) as UttId
    }

    pub fn from_id(id: UttId) -> Self {
        let id = id as usize;
        assert!(id < NUM_UTTERANCES, "utterance id {id} out of range");
        let cell = id / CELL_CONTENTS;
        Utterance::from_content(
            cell % GRID_SIZE,
            cell / GRID_SIZE,
            Content::from_index(id % CELL_CONTENTS),
        )
    }
}

impl fmt::Display for Utterance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.object {
            Object::Pebble => write!(f, "({}, {}, pebble)", self.x, self.y),
            obj => write!(
                f,
                "({}, {}, {} {})",
                self.x,
                self.y,
                PALETTE[self.colour as usize],
                obj.name()
            ),
        }
    }
}

/// An ordered sequence of reveals with no two on the same cell.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Utterance>", into = "Vec<Utterance>")]
pub struct Spec(Vec<Utterance>);

impl Spec {
    pub fn new() -> Self {
        Spec(Vec::new())
    }

    /// Drops every reveal of an already-revealed cell, keeping the first.
    pub fn dedup_first(utterances: impl IntoIterator<Item = Utterance>) -> Self {
        let mut spec = Spec::new();
        for u in utterances {
            let _ = spec.push(u);
        }
        spec
    }

    pub fn push(&mut self, u: Utterance) -> Result<()> {
        if self.contains_cell(u.x, u.y) {
            return Err(Error::DuplicateCell { x: u.x, y: u.y });
        }
        self.0.push(u);
        Ok(())
    }

    pub fn contains_cell(&self, x: u8, y: u8) -> bool {
        self.0.iter().any(|v| v.x == x && v.y == y)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Utterance> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Utterance] {
        &self.0
    }

    pub fn prefix(&self, n: usize) -> Spec {
        Spec(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn ids(&self) -> Vec<UttId> {
        self.0.iter().map(Utterance::id).collect()
    }

    pub fn from_ids(ids: &[UttId]) -> Result<Self> {
        ids.iter()
            .map(|&id| Utterance::from_id(id))
            .collect::<Vec<_>>()
            .try_into()
    }
}

impl TryFrom<Vec<Utterance>> for Spec {
    type Error = Error;

    fn try_from(v: Vec<Utterance>) -> Result<Self> {
        let mut spec = Spec::new();
        for u in v {
            spec.push(u)?;
        }
        Ok(spec)
    }
}

impl From<Spec> for Vec<Utterance> {
    fn from(s: Spec) -> Self {
        s.0
    }
}

impl<'a> IntoIterator for &'a Spec {
    type Item = &'a Utterance;
    type IntoIter = std::slice::Iter<'a, Utterance>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
