//! Constrained matching tables and their combination rules.
//!
//! Every cluster stores four values, one per coloring of its two boundary
//! vertices: white means the vertex is not covered by the cluster's part of
//! the matching, black means it is. Each value is the best matching of the
//! cluster's edges that realises that coloring, or null when no matching
//! does. Two clusters meeting at a shared vertex combine under the single
//! rule that at most one side may cover the shared vertex.

use std::fmt;
use std::ops::{Add, Index, IndexMut};
use std::str::FromStr;

use thiserror::Error;

use crate::forest::Edge;
use crate::toptree::Annotation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub const BOTH: [Color; 2] = [Color::White, Color::Black];

    pub fn is_black(self) -> bool {
        self == Color::Black
    }

    fn or(self, other: Color) -> Color {
        if self.is_black() || other.is_black() {
            Color::Black
        } else {
            Color::White
        }
    }
}

/// Coloring of a cluster's (first, second) boundary vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    WW = 0,
    WB = 1,
    BW = 2,
    BB = 3,
}

impl State {
    pub const ALL: [State; 4] = [State::WW, State::WB, State::BW, State::BB];

    pub fn new(first: Color, second: Color) -> State {
        match (first, second) {
            (Color::White, Color::White) => State::WW,
            (Color::White, Color::Black) => State::WB,
            (Color::Black, Color::White) => State::BW,
            (Color::Black, Color::Black) => State::BB,
        }
    }

    pub fn first(self) -> Color {
        match self {
            State::WW | State::WB => Color::White,
            State::BW | State::BB => Color::Black,
        }
    }

    pub fn second(self) -> Color {
        match self {
            State::WW | State::BW => Color::White,
            State::WB | State::BB => Color::Black,
        }
    }

    /// Same coloring seen with the boundary order reversed.
    pub fn swap(self) -> State {
        State::new(self.second(), self.first())
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A matching value, or null for an unrealisable coloring.
///
/// Null sorts below every number, so `max` skips it, and it absorbs
/// addition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchValue(Option<u64>);

impl MatchValue {
    pub const NULL: MatchValue = MatchValue(None);
    pub const ZERO: MatchValue = MatchValue(Some(0));

    pub const fn new(v: u64) -> MatchValue {
        MatchValue(Some(v))
    }

    pub fn get(self) -> Option<u64> {
        self.0
    }

    pub fn is_null(self) -> bool {
        self.0.is_none()
    }
}

impl From<u64> for MatchValue {
    fn from(v: u64) -> Self {
        MatchValue::new(v)
    }
}

impl Add for MatchValue {
    type Output = MatchValue;

    fn add(self, rhs: MatchValue) -> MatchValue {
        match (self.0, rhs.0) {
            (Some(a), Some(b)) => MatchValue(Some(a + b)),
            _ => MatchValue::NULL,
        }
    }
}

impl fmt::Display for MatchValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("$"),
        }
    }
}

impl FromStr for MatchValue {
    type Err = ParseTableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "$" => Ok(MatchValue::NULL),
            t => t.parse::<u64>().map(MatchValue::new).map_err(|_| ParseTableError(s.to_string())),
        }
    }
}

/// Null-aware maximum over a sequence; null when empty or all null.
pub fn max_value<I: IntoIterator<Item = MatchValue>>(values: I) -> MatchValue {
    values.into_iter().max().unwrap_or(MatchValue::NULL)
}

/// The four constrained optima of a cluster in its stored boundary order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MatchTable {
    pub ww: MatchValue,
    pub wb: MatchValue,
    pub bw: MatchValue,
    pub bb: MatchValue,
}

impl MatchTable {
    pub const NULL: MatchTable = MatchTable { ww: MatchValue::NULL, wb: MatchValue::NULL, bw: MatchValue::NULL, bb: MatchValue::NULL };

    pub fn new(ww: MatchValue, wb: MatchValue, bw: MatchValue, bb: MatchValue) -> Self {
        MatchTable { ww, wb, bw, bb }
    }

    /// Shorthand for tests and literals; `None` is null.
    pub fn from_options(v: [Option<u64>; 4]) -> Self {
        MatchTable::new(MatchValue(v[0]), MatchValue(v[1]), MatchValue(v[2]), MatchValue(v[3]))
    }

    pub fn values(&self) -> [MatchValue; 4] {
        [self.ww, self.wb, self.bw, self.bb]
    }

    pub fn is_all_null(&self) -> bool {
        self.values().iter().all(|v| v.is_null())
    }

    /// Keeps only the entries whose state satisfies `keep`.
    pub fn restricted(&self, keep: impl Fn(State) -> bool) -> MatchTable {
        let mut out = MatchTable::NULL;
        for s in State::ALL {
            if keep(s) {
                out[s] = self[s];
            }
        }
        out
    }
}

impl Index<State> for MatchTable {
    type Output = MatchValue;

    fn index(&self, s: State) -> &MatchValue {
        match s {
            State::WW => &self.ww,
            State::WB => &self.wb,
            State::BW => &self.bw,
            State::BB => &self.bb,
        }
    }
}

impl IndexMut<State> for MatchTable {
    fn index_mut(&mut self, s: State) -> &mut MatchValue {
        match s {
            State::WW => &mut self.ww,
            State::WB => &mut self.wb,
            State::BW => &mut self.bw,
            State::BB => &mut self.bb,
        }
    }
}

impl fmt::Display for MatchTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.ww, self.wb, self.bw, self.bb)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed match table `{0}`")]
pub struct ParseTableError(String);

impl FromStr for MatchTable {
    type Err = ParseTableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseTableError(s.to_string());
        let inner = s.trim().strip_prefix('(').and_then(|t| t.strip_suffix(')')).ok_or_else(bad)?;
        let parts: Vec<&str> = inner.split(',').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        Ok(MatchTable::new(parts[0].parse()?, parts[1].parse()?, parts[2].parse()?, parts[3].parse()?))
    }
}

/// Table of a single edge. Unweighted edges score 1.
pub fn table_base(weight: u64, weighted: bool) -> MatchTable {
    let matched = if weighted { weight } else { 1 };
    MatchTable::new(MatchValue::ZERO, MatchValue::NULL, MatchValue::NULL, MatchValue::new(matched))
}

pub fn table_swap(t: &MatchTable) -> MatchTable {
    MatchTable::new(t.ww, t.bw, t.wb, t.bb)
}

pub fn table_best(t: &MatchTable) -> MatchValue {
    max_value(t.values())
}

/// Ways the shared vertex's two sides may be colored: at most one black.
const SHARED_SPLITS: [(Color, Color); 3] = [(Color::White, Color::White), (Color::White, Color::Black), (Color::Black, Color::White)];

/// Values of the union of two clusters indexed by
/// (outer state of the left side, color of the shared vertex, outer state
/// of the right side).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JoinedTable([[[MatchValue; 2]; 2]; 2]);

impl JoinedTable {
    pub fn get(&self, outer_left: Color, shared: Color, outer_right: Color) -> MatchValue {
        self.0[outer_left as usize][shared as usize][outer_right as usize]
    }
}

/// Joins `left` (oriented with the shared vertex second) and `right`
/// (shared vertex first).
pub fn merge_at_shared(left: &MatchTable, right: &MatchTable) -> JoinedTable {
    let mut out = [[[MatchValue::NULL; 2]; 2]; 2];
    for x in Color::BOTH {
        for z in Color::BOTH {
            for (u, v) in SHARED_SPLITS {
                let y = u.or(v);
                let term = left[State::new(x, u)] + right[State::new(v, z)];
                let slot = &mut out[x as usize][y as usize][z as usize];
                *slot = (*slot).max(term);
            }
        }
    }
    JoinedTable(out)
}

/// Compress (A,B) with (B,C) into (A,C); B becomes interior.
pub fn table_compress(left: &MatchTable, right: &MatchTable) -> MatchTable {
    let joined = merge_at_shared(left, right);
    let mut out = MatchTable::NULL;
    for x in Color::BOTH {
        for z in Color::BOTH {
            out[State::new(x, z)] = max_value(Color::BOTH.map(|y| joined.get(x, y, z)));
        }
    }
    out
}

/// Rake leaf (A,B) onto (B,C) giving (B,C); the dangling A becomes interior.
pub fn table_rake(leaf: &MatchTable, onto: &MatchTable) -> MatchTable {
    let joined = merge_at_shared(leaf, onto);
    let mut out = MatchTable::NULL;
    for y in Color::BOTH {
        for z in Color::BOTH {
            out[State::new(y, z)] = max_value(Color::BOTH.map(|x| joined.get(x, y, z)));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CombineKind {
    Rake,
    Compress,
}

/// Every (left state, right state, result state) triple the merge rule
/// combines, in oriented coordinates: left is (outer, shared), right is
/// (shared, outer); the result is (A, C) for compress and (B, C) for rake.
pub fn combine_terms(kind: CombineKind) -> impl Iterator<Item = (State, State, State)> {
    let mut out = Vec::with_capacity(12);
    for x in Color::BOTH {
        for z in Color::BOTH {
            for (u, v) in SHARED_SPLITS {
                let result = match kind {
                    CombineKind::Compress => State::new(x, z),
                    CombineKind::Rake => State::new(u.or(v), z),
                };
                out.push((State::new(x, u), State::new(v, z), result));
            }
        }
    }
    out.into_iter()
}

/// Checks the slack bounds every realisable table satisfies: dropping the
/// at most two edges that cover the boundary loses at most that many
/// matched edges. Weighted tables have no such bound and are only checked
/// for ww being present.
pub fn slack_violation(t: &MatchTable, weighted: bool) -> Option<&'static str> {
    if t.ww.is_null() {
        return Some("ww is null");
    }
    if weighted {
        return None;
    }
    let ww = t.ww.get().unwrap_or(0);
    let within = |big: MatchValue, small: MatchValue, slack: u64| match (big.get(), small.get()) {
        (Some(b), Some(s)) => b + slack >= s,
        _ => true,
    };
    let wwv = MatchValue::new(ww);
    if !within(wwv, t.wb, 1) || !within(wwv, t.bw, 1) || !within(wwv, t.bb, 2) {
        return Some("ww slack");
    }
    if !within(t.wb, t.bb, 1) || !within(t.bw, t.bb, 1) {
        return Some("single-side slack");
    }
    None
}

/// The maximum-matching annotation plugged into the top tree.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Matching {
    pub weighted: bool,
}

impl Matching {
    pub fn unweighted() -> Self {
        Matching { weighted: false }
    }

    pub fn weighted() -> Self {
        Matching { weighted: true }
    }
}

impl Annotation for Matching {
    type Table = MatchTable;

    fn base(&self, edge: &Edge) -> MatchTable {
        table_base(edge.weight, self.weighted)
    }

    fn rake(&self, leaf: &MatchTable, onto: &MatchTable) -> MatchTable {
        table_rake(leaf, onto)
    }

    fn compress(&self, left: &MatchTable, right: &MatchTable) -> MatchTable {
        table_compress(left, right)
    }

    fn reverse(&self, t: &MatchTable) -> MatchTable {
        table_swap(t)
    }

    fn value(&self, t: &MatchTable) -> u64 {
        table_best(t).get().unwrap_or(0)
    }
}
