//! Symbolic geometry of the fractal: words over `{0,1,2,3}`, the four
//! contracting maps, cell intersections and canonical lattice points.
//!
//! Identity of lattice points is decided purely symbolically; planar
//! coordinates exist only for cross-checks and plotting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// A finite word addressing the cell `K_ω = F_ω(K)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(d) = digits.iter().find(|&&d| d > 3) {
            return Err(Error::Parse(format!("digit {d} outside {{0,1,2,3}}")));
        }
        Ok(Word(digits))
    }

    /// Panics on a digit outside `{0,1,2,3}`; for literals in code and tests.
    pub fn from_digits(digits: &[u8]) -> Self {
        Word::new(digits.to_vec()).expect("word digits must lie in 0..=3")
    }

    /// `d^count`
    pub fn repeat(d: u8, count: usize) -> Self {
        Word::from_digits(&vec![d; count])
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn push(&mut self, d: u8) {
        assert!(d <= 3);
        self.0.push(d);
    }

    pub fn with(&self, tail: &[u8]) -> Word {
        let mut w = self.clone();
        for &d in tail {
            w.push(d);
        }
        w
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn last(&self) -> Option<u8> {
        self.0.last().copied()
    }

    /// Reflection across the vertical axis: `0 <-> 1`, `2 <-> 3`.
    pub fn reflect(&self) -> Word {
        Word(self.0.iter().map(|&d| d ^ 1).collect())
    }

    /// All words of the given length in lexicographic order.
    pub fn all_of_length(len: usize) -> impl Iterator<Item = Word> {
        let count = 4usize.pow(len as u32);
        (0..count).map(move |mut c| {
            let mut digits = vec![0u8; len];
            for slot in digits.iter_mut().rev() {
                *slot = (c % 4) as u8;
                c /= 4;
            }
            Word(digits)
        })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" || s.is_empty() {
            return Ok(Word::empty());
        }
        let digits = s
            .chars()
            .map(|c| match c {
                '0'..='3' => Ok(c as u8 - b'0'),
                _ => Err(Error::Parse(format!("invalid word {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Word(digits))
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// One of the three boundary points `q1, q2, q3` of `K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Corner {
    Q1,
    Q2,
    Q3,
}

impl Corner {
    pub const ALL: [Corner; 3] = [Corner::Q1, Corner::Q2, Corner::Q3];

    pub fn index(self) -> usize {
        match self {
            Corner::Q1 => 1,
            Corner::Q2 => 2,
            Corner::Q3 => 3,
        }
    }

    pub fn from_index(i: usize) -> Result<Corner> {
        match i {
            1 => Ok(Corner::Q1),
            2 => Ok(Corner::Q2),
            3 => Ok(Corner::Q3),
            _ => Err(Error::Parse(format!("corner index {i} outside 1..=3"))),
        }
    }

    pub fn reflect(self) -> Corner {
        match self {
            Corner::Q1 => Corner::Q1,
            Corner::Q2 => Corner::Q3,
            Corner::Q3 => Corner::Q2,
        }
    }

    pub fn coords(self) -> (f64, f64) {
        match self {
            Corner::Q1 => (0.0, 0.0),
            Corner::Q2 => (-1.0, -SQRT3 / 2.0),
            Corner::Q3 => (1.0, -SQRT3 / 2.0),
        }
    }
}

/// Canonical identity of a lattice point `F_ω(q_j)`.
///
/// Normal form: corner `Q1` with a word that is empty or ends in 2 or 3;
/// corner `Q2` with a word that is empty or ends in 1 or 3; corner `Q3`
/// with a word that is empty or ends in 0 or 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId {
    word: Word,
    corner: Corner,
}

impl VertexId {
    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn corner(&self) -> Corner {
        self.corner
    }

    pub fn q1() -> Self {
        VertexId { word: Word::empty(), corner: Corner::Q1 }
    }

    pub fn q2() -> Self {
        VertexId { word: Word::empty(), corner: Corner::Q2 }
    }

    pub fn q3() -> Self {
        VertexId { word: Word::empty(), corner: Corner::Q3 }
    }

    /// `q0 = F_0(q2) = F_2(q1)`, the centre of the balls `B_n`.
    pub fn q0() -> Self {
        VertexId { word: Word::from_digits(&[2]), corner: Corner::Q1 }
    }

    /// Smallest level `L` with this point in `V_L`.
    pub fn level(&self) -> usize {
        self.word.len()
    }

    pub fn coords(&self) -> (f64, f64) {
        apply_map(&self.word, self.corner.coords())
    }

    pub fn reflect(&self) -> VertexId {
        canonicalize(&self.word.reflect(), self.corner.reflect())
    }

    /// Every address of the point, as `(prefix, repeated digit)` meaning
    /// `prefix d d d ...`, in lexicographic order of the infinite sequences.
    pub fn addresses(&self) -> Vec<(Vec<u8>, u8)> {
        let mut out = self.raw_addresses();
        let key = |(p, r): &(Vec<u8>, u8)| {
            let mut v = p.clone();
            v.resize(self.word.len() + 2, *r);
            v
        };
        out.sort_by_key(key);
        out
    }

    fn raw_addresses(&self) -> Vec<(Vec<u8>, u8)> {
        let w = self.word.digits();
        match self.corner {
            Corner::Q1 => {
                let mut out = vec![(w.to_vec(), 0)];
                match w.last() {
                    Some(2) => {
                        let mut alt = w[..w.len() - 1].to_vec();
                        alt.push(0);
                        out.push((alt, 2));
                    }
                    Some(3) => {
                        let mut alt = w[..w.len() - 1].to_vec();
                        alt.push(1);
                        out.push((alt, 3));
                    }
                    _ => out.push((w.to_vec(), 1)),
                }
                out
            }
            Corner::Q2 => vec![(w.to_vec(), 2)],
            Corner::Q3 => vec![(w.to_vec(), 3)],
        }
    }

    /// First `len` digits of the first address.
    pub fn first_address(&self, len: usize) -> Vec<u8> {
        let (prefix, rep) = &self.addresses()[0];
        let mut v = prefix.clone();
        while v.len() < len {
            v.push(*rep);
        }
        v.truncate(len.max(prefix.len()));
        v
    }

    /// Whether the point lies on the bottom Cantor set `F_ρ(C)` of cell `ρ`.
    pub fn on_cantor_piece(&self, rho: &Word) -> bool {
        let rho = rho.digits();
        self.addresses().iter().any(|(prefix, rep)| {
            if *rep < 2 {
                return false;
            }
            let digit_at = |i: usize| if i < prefix.len() { prefix[i] } else { *rep };
            (0..rho.len()).all(|i| digit_at(i) == rho[i])
                && (rho.len()..prefix.len()).all(|i| prefix[i] >= 2)
        })
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.word, self.corner.index())
    }
}

impl FromStr for VertexId {
    type Err = Error;

    /// Parses `word:corner`; the result is canonicalized.
    fn from_str(s: &str) -> Result<Self> {
        let (w, c) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("vertex {s:?} is not of the form word:corner")))?;
        let word: Word = w.parse()?;
        let idx: usize = c
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad corner in {s:?}")))?;
        Ok(canonicalize(&word, Corner::from_index(idx)?))
    }
}

impl Serialize for VertexId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How two cells meet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntersectionKind {
    Disjoint,
    Nested { ancestor: Word },
    Point(VertexId),
}

fn apply_single(d: u8, (x, y): (f64, f64)) -> (f64, f64) {
    let c = 8.0 / (9.0 * SQRT3);
    match d {
        0 => (2.0 / 9.0 * x + c * y, 2.0 / 3.0 * y),
        1 => (2.0 / 9.0 * x - c * y, 2.0 / 3.0 * y),
        2 => (x / 3.0 - 2.0 / 3.0, y / 3.0 - 1.0 / SQRT3),
        3 => (x / 3.0 + 2.0 / 3.0, y / 3.0 - 1.0 / SQRT3),
        _ => unreachable!("word digits are validated"),
    }
}

/// `F_ω(p) = F_{i1} ∘ ... ∘ F_{in}(p)`.
pub fn apply_map(word: &Word, point: (f64, f64)) -> (f64, f64) {
    word.digits().iter().rev().fold(point, |p, &d| apply_single(d, p))
}

/// Normal form of the lattice point `F_word(q_corner)`.
pub fn canonicalize(word: &Word, corner: Corner) -> VertexId {
    let mut w = word.digits().to_vec();
    let mut c = corner;
    loop {
        match c {
            Corner::Q1 => {
                // F_0 and F_1 fix q1
                while matches!(w.last(), Some(0 | 1)) {
                    w.pop();
                }
                break;
            }
            Corner::Q2 => {
                while w.last() == Some(&2) {
                    w.pop();
                }
                if w.last() == Some(&0) {
                    // F_κ0(q2) = F_κ2(q1)
                    *w.last_mut().unwrap() = 2;
                    c = Corner::Q1;
                    continue;
                }
                break;
            }
            Corner::Q3 => {
                while w.last() == Some(&3) {
                    w.pop();
                }
                if w.last() == Some(&1) {
                    // F_κ1(q3) = F_κ3(q1)
                    *w.last_mut().unwrap() = 3;
                    c = Corner::Q1;
                    continue;
                }
                break;
            }
        }
    }
    VertexId { word: Word(w), corner: c }
}

fn in_set(tail: &[u8], allowed: &[u8]) -> bool {
    tail.iter().all(|d| allowed.contains(d))
}

/// Classifies `K_a ∩ K_b`.
pub fn cell_intersection(a: &Word, b: &Word) -> IntersectionKind {
    if a.is_prefix_of(b) {
        return IntersectionKind::Nested { ancestor: a.clone() };
    }
    if b.is_prefix_of(a) {
        return IntersectionKind::Nested { ancestor: b.clone() };
    }
    let k = a
        .digits()
        .iter()
        .zip(b.digits())
        .take_while(|(x, y)| x == y)
        .count();
    let kappa = &a.digits()[..k];
    let (da, ta) = (a.digits()[k], &a.digits()[k + 1..]);
    let (db, tb) = (b.digits()[k], &b.digits()[k + 1..]);
    let point = |d: u8| canonicalize(&Word(kappa.to_vec()).with(&[d]), Corner::Q1);
    // (left digit, left tail, right digit, right tail)
    for (dl, tl, dr, tr) in [(da, ta, db, tb), (db, tb, da, ta)] {
        match (dl, dr) {
            (2, 0) if in_set(tl, &[0, 1]) && in_set(tr, &[2]) => {
                return IntersectionKind::Point(point(2))
            }
            (0, 1) if in_set(tl, &[0, 1]) && in_set(tr, &[0, 1]) => {
                return IntersectionKind::Point(point(0))
            }
            (1, 3) if in_set(tl, &[3]) && in_set(tr, &[0, 1]) => {
                return IntersectionKind::Point(point(3))
            }
            _ => {}
        }
    }
    IntersectionKind::Disjoint
}
