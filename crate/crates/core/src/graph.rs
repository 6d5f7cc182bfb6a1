//! Level-`L` electrical networks `(V_L, E_L)`.
//!
//! The network is a tree and is never materialized as an edge list.
//! Vertex `0` is `q1`; for a cell number `c` (the base-4 value of a word of
//! length `L`, most significant digit first) the vertices `1 + 2c` and
//! `2 + 2c` are `F_c(q2)` and `F_c(q3)`. Every `q1`-corner coincides with one
//! of those, so each non-root vertex owns exactly one edge: the one joining
//! it to the `q1`-corner of its cell, which we call its parent.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::addressing::{canonicalize, Corner, VertexId, Word};
use crate::error::{Error, Result};
use crate::rational::{fmt_rational, pow, Rational, Scalar};

/// Hard ceiling imposed by `u32` vertex indices.
pub const LEVEL_LIMIT: u32 = 15;
pub const DEFAULT_MAX_LEVEL: u32 = 12;

pub const NO_PARENT: u32 = u32::MAX;

static MAX_LEVEL_OVERRIDE: AtomicU32 = AtomicU32::new(0);

/// Sets the ceiling used by [`max_level`] for the rest of the process.
/// Zero clears it.
pub fn set_max_level(level: u32) {
    MAX_LEVEL_OVERRIDE.store(level.min(LEVEL_LIMIT), Ordering::Relaxed);
}

/// Level ceiling: an explicit [`set_max_level`], else `DENDRITE_MAX_LEVEL`,
/// else the default.
pub fn max_level() -> u32 {
    let forced = MAX_LEVEL_OVERRIDE.load(Ordering::Relaxed);
    if forced > 0 {
        return forced;
    }
    std::env::var("DENDRITE_MAX_LEVEL")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .map(|l: u32| l.min(LEVEL_LIMIT))
        .unwrap_or(DEFAULT_MAX_LEVEL)
}

fn rep(d: u64, count: u32) -> u64 {
    (0..count).fold(0, |acc, _| (acc << 2) | d)
}

/// Interleaves the bits of `sigma` into base-4 digits 0/1.
fn spread(sigma: u64, count: u32) -> u64 {
    (0..count).fold(0, |acc, b| acc | (((sigma >> b) & 1) << (2 * b)))
}

#[derive(Debug)]
pub struct LevelGraph {
    level: u32,
    s0: Rational,
    s0_num: u64,
    s0_den: u64,
    /// `q^L` when `s0 = p/q`: distances are integers over this scale.
    scale: Option<u64>,
    network: OnceLock<Arc<Network>>,
}

impl LevelGraph {
    /// Builds the level-`level` network with `s1 = s0` and `s2 = s3 = 1 - s0`.
    pub fn new(level: u32, s0: Rational) -> Result<Self> {
        Self::with_max_level(level, s0, max_level())
    }

    pub fn with_max_level(level: u32, s0: Rational, max: u32) -> Result<Self> {
        if s0 <= Rational::zero() || s0 >= Rational::one() {
            return Err(Error::InvalidParameter(format!(
                "s0 = {} must lie strictly between 0 and 1",
                fmt_rational(&s0)
            )));
        }
        if level > max.min(LEVEL_LIMIT) {
            return Err(Error::Capacity(format!(
                "level {level} exceeds the configured maximum {}",
                max.min(LEVEL_LIMIT)
            )));
        }
        let s0_num = s0.numer().to_u64();
        let s0_den = s0.denom().to_u64();
        let (s0_num, s0_den) = match (s0_num, s0_den) {
            (Some(p), Some(q)) => (p, q),
            _ => return Err(Error::Capacity("s0 numerator or denominator too large".into())),
        };
        let scale = s0_den
            .checked_pow(level)
            .filter(|&s| s <= (1u64 << 60));
        Ok(LevelGraph { level, s0, s0_num, s0_den, scale, network: OnceLock::new() })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn s0(&self) -> &Rational {
        &self.s0
    }

    pub fn s2(&self) -> Rational {
        Rational::one() - &self.s0
    }

    pub fn vertex_count(&self) -> usize {
        2 * (1usize << (2 * self.level)) + 1
    }

    pub fn edge_count(&self) -> usize {
        self.vertex_count() - 1
    }

    fn high_mask(&self) -> u64 {
        rep(2, self.level)
    }

    fn split(v: u32) -> (u64, u64) {
        let k = (v - 1) as u64;
        (k / 2, 2 + k % 2)
    }

    fn join(cell: u64, corner: u64) -> u32 {
        (1 + 2 * cell + (corner - 2)) as u32
    }

    fn cell_word(&self, cell: u64) -> Word {
        let digits = (0..self.level)
            .rev()
            .map(|i| ((cell >> (2 * i)) & 3) as u8)
            .collect();
        Word::new(digits).expect("digits are in range")
    }

    fn word_cell(&self, w: &Word, pad: u64) -> u64 {
        let mut c = w.digits().iter().fold(0u64, |acc, &d| (acc << 2) | d as u64);
        for _ in w.len() as u32..self.level {
            c = (c << 2) | pad;
        }
        c
    }

    pub fn vertex(&self, v: u32) -> VertexId {
        if v == 0 {
            return VertexId::q1();
        }
        let (cell, j) = Self::split(v);
        let corner = if j == 2 { Corner::Q2 } else { Corner::Q3 };
        canonicalize(&self.cell_word(cell), corner)
    }

    pub fn index_of(&self, x: &VertexId) -> Result<u32> {
        let w = x.word();
        let missing = || Error::VertexNotInGraph(x.to_string(), self.level);
        if w.len() > self.level as usize {
            return Err(missing());
        }
        Ok(match x.corner() {
            Corner::Q1 => match w.last() {
                None => 0,
                Some(d) => {
                    // F_ρ2(q1) = F_ρ0(q2), F_ρ3(q1) = F_ρ1(q3)
                    let mut digits = w.digits().to_vec();
                    *digits.last_mut().unwrap() = d - 2;
                    let rho = Word::new(digits)?;
                    Self::join(self.word_cell(&rho, d as u64), d as u64)
                }
            },
            Corner::Q2 => Self::join(self.word_cell(w, 2), 2),
            Corner::Q3 => Self::join(self.word_cell(w, 3), 3),
        })
    }

    pub fn contains(&self, x: &VertexId) -> bool {
        x.level() <= self.level as usize
    }

    /// The `q1`-corner of the vertex's cell; `None` for the root `q1`.
    pub fn parent(&self, v: u32) -> Option<u32> {
        if v == 0 {
            return None;
        }
        let (cell, _) = Self::split(v);
        let hb = cell & self.high_mask();
        if hb == 0 {
            return Some(0);
        }
        let i = hb.trailing_zeros() / 2;
        let kappa = cell >> (2 * i);
        let d = kappa & 3;
        let rho = (kappa & !3) | (d - 2);
        Some(Self::join((rho << (2 * i)) | rep(d, i), d))
    }

    /// Calls `f` for every vertex whose parent is `v`.
    pub fn for_each_child(&self, v: u32, mut f: impl FnMut(u32)) {
        let (prefix, t) = if v == 0 {
            (0u64, self.level)
        } else {
            let (cell, j) = Self::split(v);
            let mut t = 0;
            while t < self.level && (cell >> (2 * t)) & 3 == j {
                t += 1;
            }
            if t == self.level || (cell >> (2 * t)) & 3 != j - 2 {
                return;
            }
            (((cell >> (2 * t)) | 2) << (2 * t), t)
        };
        for sigma in 0..(1u64 << t) {
            let c = prefix | spread(sigma, t);
            f(Self::join(c, 2));
            f(Self::join(c, 3));
        }
    }

    pub fn for_each_neighbor(&self, v: u32, mut f: impl FnMut(u32)) {
        if let Some(p) = self.parent(v) {
            f(p);
        }
        self.for_each_child(v, f);
    }

    /// Number of digits in `{0,1}` of the cell owning the edge above `v`.
    pub fn edge_class(&self, v: u32) -> u8 {
        let (cell, _) = Self::split(v);
        (self.level - (cell & self.high_mask()).count_ones()) as u8
    }

    /// `s_ω` for an edge of the given class.
    pub fn resistance_of_class(&self, class: u8) -> Rational {
        let a = class as i64;
        let b = self.level as i64 - a;
        pow(&self.s0, a) * pow(&self.s2(), b)
    }

    pub fn conductance_of_class<S: Scalar>(&self, class: u8) -> S {
        S::from_rational(&self.resistance_of_class(class).recip())
    }

    /// Conductances indexed by edge class.
    pub fn conductance_table<S: Scalar>(&self) -> Vec<S> {
        (0..=self.level as u8).map(|a| self.conductance_of_class(a)).collect()
    }

    /// Edge resistance numerators over [`LevelGraph::distance_scale`].
    pub(crate) fn length_table(&self) -> Result<Vec<u64>> {
        self.distance_scale()?;
        let (p, r) = (self.s0_num, self.s0_den - self.s0_num);
        Ok((0..=self.level)
            .map(|a| p.pow(a) * r.pow(self.level - a))
            .collect())
    }

    /// `q^L` for `s0 = p/q`; integer distances are numerators over this.
    pub fn distance_scale(&self) -> Result<u64> {
        self.scale.ok_or_else(|| {
            Error::Capacity(format!(
                "denominator of s0 to the power {} does not fit exact integer distances",
                self.level
            ))
        })
    }

    /// `(parent, child, class)` for every edge, ordered by child index.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, u8)> + '_ {
        (1..self.vertex_count() as u32).map(|v| (self.parent(v).unwrap(), v, self.edge_class(v)))
    }

    /// The whole network rooted at `q1` in breadth-first order; cached.
    pub fn network(&self) -> Arc<Network> {
        self.network
            .get_or_init(|| Arc::new(search(self, 0, None, u64::MAX, &mut Vec::new())))
            .clone()
    }

    /// Verifies the tree assumption: breadth-first search from `q1` over
    /// parent and child links reaches every vertex exactly once, and every
    /// child link is the inverse of a parent link.
    pub fn check_tree(&self) -> Result<()> {
        let n = self.vertex_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0u32]);
        seen[0] = true;
        let mut count = 1usize;
        while let Some(v) = queue.pop_front() {
            let mut bad = None;
            self.for_each_child(v, |c| {
                if self.parent(c) != Some(v) || seen[c as usize] {
                    bad = Some(c);
                    return;
                }
                seen[c as usize] = true;
                count += 1;
                queue.push_back(c);
            });
            if let Some(c) = bad {
                return Err(Error::InvalidParameter(format!(
                    "level-{} network is not a tree near {}",
                    self.level,
                    self.vertex(c)
                )));
            }
        }
        if count != n {
            return Err(Error::InvalidParameter(format!(
                "level-{} network is disconnected: reached {count} of {n} vertices",
                self.level
            )));
        }
        Ok(())
    }

    /// Exact resistance metric, the length of the unique tree path.
    pub fn resistance_distance(&self, u: &VertexId, v: &VertexId) -> Result<Rational> {
        let a = self.index_of(u)?;
        let b = self.index_of(v)?;
        let num = self.path_length(a, b)?;
        Ok(Rational::new(BigInt::from(num), BigInt::from(self.distance_scale()?)))
    }

    /// `v`, its parent, and so on up to the root.
    pub fn ancestors(&self, v: u32) -> Vec<u32> {
        let mut chain = vec![v];
        let mut v = v;
        while let Some(p) = self.parent(v) {
            chain.push(p);
            v = p;
        }
        chain
    }

    /// The meeting point of the three tree paths between `a`, `b` and `c`.
    pub fn median(&self, a: u32, b: u32, c: u32) -> u32 {
        let lca = |x: u32, y: u32| {
            let up: HashSet<u32> = self.ancestors(x).into_iter().collect();
            let mut y = y;
            while !up.contains(&y) {
                y = self.parent(y).expect("every chain reaches the root");
            }
            y
        };
        let depth = |v: u32| self.ancestors(v).len();
        [lca(a, b), lca(a, c), lca(b, c)]
            .into_iter()
            .max_by_key(|&v| depth(v))
            .expect("three candidates")
    }

    /// Tree path length between two indices, as a numerator over the scale.
    pub fn path_length(&self, a: u32, b: u32) -> Result<u64> {
        let lengths = self.length_table()?;
        let mut up = HashMap::new();
        let (mut v, mut acc) = (a, 0u64);
        up.insert(v, 0u64);
        while let Some(p) = self.parent(v) {
            acc += lengths[self.edge_class(v) as usize];
            v = p;
            up.insert(v, acc);
        }
        let (mut v, mut acc) = (b, 0u64);
        loop {
            if let Some(d) = up.get(&v) {
                return Ok(acc + d);
            }
            acc += lengths[self.edge_class(v) as usize];
            v = self.parent(v).expect("every chain reaches the root");
        }
    }

    pub fn to_json(&self) -> GraphExport {
        GraphExport {
            level: self.level,
            s0: fmt_rational(&self.s0),
            vertices: (0..self.vertex_count() as u32).map(|v| self.vertex(v).to_string()).collect(),
            edges: self
                .edges()
                .map(|(p, c, k)| {
                    [
                        self.vertex(p).to_string(),
                        self.vertex(c).to_string(),
                        fmt_rational(&self.resistance_of_class(k).recip()),
                    ]
                })
                .collect(),
        }
    }

    /// Sorted `(u, v, conductance)` with `u < v`, for exact comparisons.
    pub fn edge_list(&self) -> Vec<(VertexId, VertexId, Rational)> {
        let mut out: Vec<_> = self
            .edges()
            .map(|(p, c, k)| {
                let (a, b) = (self.vertex(p), self.vertex(c));
                let g = self.resistance_of_class(k).recip();
                if a < b { (a, b, g) } else { (b, a, g) }
            })
            .collect();
        out.sort();
        out
    }
}

#[derive(Debug, Serialize)]
pub struct GraphExport {
    pub level: u32,
    pub s0: String,
    pub vertices: Vec<String>,
    pub edges: Vec<[String; 3]>,
}

#[derive(Debug)]
enum Lookup {
    Dense(Vec<u32>),
    Sparse(HashMap<u32, u32>),
}

/// A rooted subtree of a level graph in local coordinates: position `k`
/// holds global vertex `ids[k]`, and `parent[k] < k` except at the root.
#[derive(Debug)]
pub struct Network {
    level: u32,
    ids: Vec<u32>,
    parent: Vec<u32>,
    class: Vec<u8>,
    lookup: Lookup,
}

impl Network {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn parent(&self, k: u32) -> Option<u32> {
        let p = self.parent[k as usize];
        (p != NO_PARENT).then_some(p)
    }

    pub fn parents(&self) -> &[u32] {
        &self.parent
    }

    pub fn classes(&self) -> &[u8] {
        &self.class
    }

    pub fn global(&self, k: u32) -> u32 {
        self.ids[k as usize]
    }

    pub fn local(&self, v: u32) -> Option<u32> {
        match &self.lookup {
            Lookup::Dense(d) => d.get(v as usize).copied().filter(|&k| k != NO_PARENT),
            Lookup::Sparse(m) => m.get(&v).copied(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallState {
    Interior,
    Frontier,
}

/// An edge from an interior vertex to a frontier vertex that the sphere of
/// the radius crosses strictly inside; `fraction` is the resistance length
/// from the inner end to the crossing point over the edge length.
#[derive(Debug, Clone)]
pub struct CutEdge {
    pub inner: u32,
    pub outer: u32,
    pub fraction: Rational,
}

/// Which side of the ball `B(q0, r)` a frontier vertex lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Reached through `K_0`.
    Upper,
    /// Inside `K_2`.
    Lower,
}

/// The open ball `B(center, radius)` of a level graph: interior vertices at
/// distance `< radius` and the grounded frontier around them.
#[derive(Debug)]
pub struct BallRegion {
    pub center: VertexId,
    pub radius: Rational,
    net: Arc<Network>,
    dist: Vec<u64>,
    scale: u64,
    floor_num: u64,
    state: Vec<BallState>,
    frontier: Vec<u32>,
    cut_edges: Vec<CutEdge>,
}

impl BallRegion {
    pub fn new(g: &LevelGraph, center: &VertexId, radius: &Rational) -> Result<Self> {
        if *radius <= Rational::zero() {
            return Err(Error::InvalidParameter("ball radius must be positive".into()));
        }
        let root = g.index_of(center)?;
        let scale = g.distance_scale()?;
        let lengths = g.length_table()?;
        let t = radius * Rational::from_integer(BigInt::from(scale));
        let threshold = t.ceil().to_integer().to_u64().unwrap_or(u64::MAX);
        let floor_num = t.floor().to_integer().to_u64().unwrap_or(u64::MAX);

        let mut dist = Vec::new();
        let net = search(g, root, Some(&lengths), threshold, &mut dist);

        let mut state = Vec::with_capacity(net.len());
        let mut frontier = Vec::new();
        let mut cut_edges = Vec::new();
        for k in 0..net.len() {
            if dist[k] < threshold {
                state.push(BallState::Interior);
            } else {
                state.push(BallState::Frontier);
                frontier.push(k as u32);
                let p = net.parent[k];
                let (du, df) = (dist[p as usize], dist[k]);
                let r = radius * Rational::from_integer(BigInt::from(scale));
                let df_r = Rational::from_integer(BigInt::from(df));
                if df_r > r {
                    let fraction = (r - Rational::from_integer(BigInt::from(du)))
                        / Rational::from_integer(BigInt::from(df - du));
                    cut_edges.push(CutEdge { inner: p, outer: k as u32, fraction });
                }
            }
        }
        Ok(BallRegion {
            center: center.clone(),
            radius: radius.clone(),
            net: Arc::new(net),
            dist,
            scale,
            floor_num,
            state,
            frontier,
            cut_edges,
        })
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn level(&self) -> u32 {
        self.net.level
    }

    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    pub fn state(&self, k: u32) -> BallState {
        self.state[k as usize]
    }

    pub fn is_interior(&self, k: u32) -> bool {
        self.state[k as usize] == BallState::Interior
    }

    /// Local positions of the interior vertices.
    pub fn interior(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.len() as u32).filter(|&k| self.is_interior(k))
    }

    pub fn interior_count(&self) -> usize {
        self.len() - self.frontier.len()
    }

    pub fn frontier(&self) -> &[u32] {
        &self.frontier
    }

    pub fn cut_edges(&self) -> &[CutEdge] {
        &self.cut_edges
    }

    /// Distance from the center as a numerator over [`BallRegion::scale`].
    pub fn dist_num(&self, k: u32) -> u64 {
        self.dist[k as usize]
    }

    pub fn scale(&self) -> u64 {
        self.scale
    }

    /// `floor(radius * scale)`: a distance numerator `d` satisfies
    /// `d / scale <= radius` iff `d <= radius_floor_num()`.
    pub fn radius_floor_num(&self) -> u64 {
        self.floor_num
    }

    pub fn dist(&self, k: u32) -> Rational {
        Rational::new(BigInt::from(self.dist[k as usize]), BigInt::from(self.scale))
    }

    pub fn dist_f64(&self, k: u32) -> f64 {
        self.dist[k as usize] as f64 / self.scale as f64
    }

    pub fn local_of(&self, x: &VertexId, g: &LevelGraph) -> Option<u32> {
        g.index_of(x).ok().and_then(|v| self.net.local(v))
    }

    pub fn vertex(&self, g: &LevelGraph, k: u32) -> VertexId {
        g.vertex(self.net.global(k))
    }

    /// Splits the frontier into the part reached through `K_0` and the part
    /// inside `K_2`; meaningful for balls centred at `q0`.
    pub fn boundary_sides(&self, g: &LevelGraph) -> Result<(Vec<u32>, Vec<u32>)> {
        if self.center != VertexId::q0() {
            return Err(Error::Unsupported(
                "boundary sides are defined for balls centred at q0".into(),
            ));
        }
        let (mut upper, mut lower) = (Vec::new(), Vec::new());
        for &k in &self.frontier {
            match side_of(&self.vertex(g, k)) {
                Side::Upper => upper.push(k),
                Side::Lower => lower.push(k),
            }
        }
        Ok((upper, lower))
    }

    /// Whether the subtree spanned by the region is connected and every
    /// interior/frontier label matches the distances.
    pub fn check(&self) -> bool {
        let t = self.frontier.iter().map(|&k| self.dist[k as usize]).min();
        (1..self.len()).all(|k| (self.net.parent[k] as usize) < k)
            && self.frontier.iter().all(|&k| {
                let p = self.net.parent[k as usize];
                p != NO_PARENT && self.is_interior(p)
            })
            && self
                .interior()
                .all(|k| t.is_none_or(|t| self.dist[k as usize] < t))
    }
}

/// Side of `q0` a point lies on, by the first digit of its first address.
pub fn side_of(x: &VertexId) -> Side {
    if x.first_address(1)[0] >= 2 {
        Side::Lower
    } else {
        Side::Upper
    }
}

/// Breadth-first search from `root`. With `lengths`, distances from the
/// root are recorded in `dist` and only vertices closer than `threshold`
/// are expanded.
fn search(g: &LevelGraph, root: u32, lengths: Option<&[u64]>, threshold: u64, dist: &mut Vec<u64>) -> Network {
    let hint = if lengths.is_none() { g.vertex_count() } else { 0 };
    let mut ids = Vec::with_capacity(hint);
    let mut parent = Vec::with_capacity(hint);
    let mut class = Vec::with_capacity(hint);
    ids.push(root);
    parent.push(NO_PARENT);
    class.push(0u8);
    dist.clear();
    dist.push(0);
    let mut head = 0usize;
    while head < ids.len() {
        let d = if lengths.is_some() { dist[head] } else { 0 };
        if d < threshold {
            let v = ids[head];
            let from = parent[head];
            let back = if from == NO_PARENT { NO_PARENT } else { ids[from as usize] };
            let me = head as u32;
            g.for_each_neighbor(v, |w| {
                if w != back {
                    let owner = if g.parent(w) == Some(v) { w } else { v };
                    let c = g.edge_class(owner);
                    ids.push(w);
                    parent.push(me);
                    class.push(c);
                    if let Some(len) = lengths {
                        dist.push(d + len[c as usize]);
                    }
                }
            });
        }
        head += 1;
    }
    let lookup = if ids.len() * 8 >= g.vertex_count() {
        let mut dense = vec![NO_PARENT; g.vertex_count()];
        for (k, &v) in ids.iter().enumerate() {
            dense[v as usize] = k as u32;
        }
        Lookup::Dense(dense)
    } else {
        Lookup::Sparse(ids.iter().enumerate().map(|(k, &v)| (v, k as u32)).collect())
    };
    Network { level: g.level, ids, parent, class, lookup }
}

/// A general (not necessarily tree) network on a vertex subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedNetwork {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<(VertexId, VertexId, Rational)>,
}

/// Exact trace of the energy onto `keep`, by eliminating the other vertices
/// (leaves first, then series pairs, then star-mesh if any remain).
pub fn schur_trace(g: &LevelGraph, keep: &[VertexId]) -> Result<ReducedNetwork> {
    let mut kept = HashSet::new();
    for x in keep {
        kept.insert(g.index_of(x)?);
    }
    if kept.len() < 2 {
        return Err(Error::InvalidParameter("schur_trace needs at least two kept vertices".into()));
    }
    let n = g.vertex_count();
    let mut adj: Vec<HashMap<u32, Rational>> = vec![HashMap::new(); n];
    for (p, c, k) in g.edges() {
        let cond = g.resistance_of_class(k).recip();
        adj[p as usize].insert(c, cond.clone());
        adj[c as usize].insert(p, cond);
    }
    let mut alive = vec![true; n];
    let mut work: Vec<u32> = (0..n as u32).filter(|v| !kept.contains(v)).collect();
    // process low degrees first; degrees only shrink for leaves and series nodes
    work.sort_by_key(|&v| std::cmp::Reverse(adj[v as usize].len()));
    let mut stack: Vec<u32> = work.iter().copied().filter(|&v| adj[v as usize].len() <= 2).collect();
    let mut rest: Vec<u32> = work.into_iter().filter(|&v| adj[v as usize].len() > 2).collect();
    loop {
        let v = match stack.pop() {
            Some(v) => v,
            None => match rest.pop() {
                Some(v) => v,
                None => break,
            },
        };
        if !alive[v as usize] {
            continue;
        }
        alive[v as usize] = false;
        let nbrs: Vec<(u32, Rational)> = adj[v as usize].drain().collect();
        let total: Rational = nbrs.iter().map(|(_, c)| c.clone()).sum();
        for (a, _) in &nbrs {
            adj[*a as usize].remove(&v);
        }
        for i in 0..nbrs.len() {
            for j in i + 1..nbrs.len() {
                let (a, ga) = &nbrs[i];
                let (b, gb) = &nbrs[j];
                let add = ga * gb / &total;
                *adj[*a as usize].entry(*b).or_insert_with(Rational::zero) += add.clone();
                *adj[*b as usize].entry(*a).or_insert_with(Rational::zero) += add;
            }
        }
        for (a, _) in &nbrs {
            if alive[*a as usize] && !kept.contains(a) && adj[*a as usize].len() <= 2 {
                stack.push(*a);
            }
        }
    }
    let mut vertices: Vec<VertexId> = kept.iter().map(|&v| g.vertex(v)).collect();
    vertices.sort();
    let mut edges = Vec::new();
    for &v in &kept {
        for (&w, c) in &adj[v as usize] {
            let (a, b) = (g.vertex(v), g.vertex(w));
            if a < b {
                edges.push((a, b, c.clone()));
            }
        }
    }
    edges.sort();
    Ok(ReducedNetwork { vertices, edges })
}

impl ReducedNetwork {
    pub fn from_graph(g: &LevelGraph) -> Self {
        let mut vertices: Vec<VertexId> = (0..g.vertex_count() as u32).map(|v| g.vertex(v)).collect();
        vertices.sort();
        ReducedNetwork { vertices, edges: g.edge_list() }
    }
}

/// All vertices of `V_n`, as they appear in a graph of level `>= n`.
pub fn lattice(n: u32) -> Vec<VertexId> {
    let g = LevelGraph::with_max_level(n, crate::rational::ratio(1, 2), LEVEL_LIMIT)
        .expect("lattice level within limits");
    (0..g.vertex_count() as u32).map(|v| g.vertex(v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn half(level: u32) -> LevelGraph {
        LevelGraph::new(level, ratio(1, 2)).unwrap()
    }

    fn vid(s: &str) -> VertexId {
        s.parse().unwrap()
    }

    #[test]
    fn small_levels() {
        let g0 = half(0);
        assert_eq!(g0.vertex_count(), 3);
        assert_eq!(g0.edge_list().len(), 2);
        assert!(g0.edge_list().iter().all(|e| e.2 == ratio(1, 1)));
        let g1 = half(1);
        assert_eq!(g1.vertex_count(), 9);
        assert!(g1.edge_list().iter().all(|e| e.2 == ratio(2, 1)));
    }

    #[test]
    fn vertex_count_matches_enumeration() {
        for level in 0..=5u32 {
            let g = half(level);
            let mut all = HashSet::new();
            for w in Word::all_of_length(level as usize) {
                for c in Corner::ALL {
                    all.insert(canonicalize(&w, c));
                }
            }
            assert_eq!(all.len(), g.vertex_count());
            for x in &all {
                let v = g.index_of(x).unwrap();
                assert_eq!(&g.vertex(v), x);
            }
            g.check_tree().unwrap();
        }
    }

    #[test]
    fn edges_join_cell_corners() {
        let g = half(3);
        for (p, c, _) in g.edges() {
            let (cell, j) = LevelGraph::split(c);
            let w = g.cell_word(cell);
            assert_eq!(g.vertex(p), canonicalize(&w, Corner::Q1));
            assert_eq!(g.vertex(c), canonicalize(&w, Corner::from_index(j as usize).unwrap()));
        }
    }

    #[test]
    fn distances() {
        let g = half(4);
        assert_eq!(g.resistance_distance(&VertexId::q1(), &VertexId::q2()).unwrap(), ratio(1, 1));
        assert_eq!(g.resistance_distance(&VertexId::q2(), &VertexId::q3()).unwrap(), ratio(2, 1));
        assert_eq!(g.resistance_distance(&VertexId::q0(), &VertexId::q1()).unwrap(), ratio(1, 2));
        let s = LevelGraph::new(3, ratio(1, 3)).unwrap();
        assert_eq!(s.resistance_distance(&VertexId::q1(), &VertexId::q3()).unwrap(), ratio(1, 1));
        assert!(g.resistance_distance(&vid("00002:1"), &VertexId::q1()).is_err());
    }

    #[test]
    fn ball_whole_space() {
        let g = half(3);
        let b = BallRegion::new(&g, &VertexId::q1(), &ratio(3, 1)).unwrap();
        assert_eq!(b.interior_count(), g.vertex_count());
        assert!(b.frontier().is_empty());
    }

    #[test]
    fn ball_around_q0() {
        let g = half(5);
        let b = BallRegion::new(&g, &VertexId::q0(), &ratio(1, 4)).unwrap();
        assert!(b.check());
        let f = b.local_of(&vid("02:1"), &g).unwrap();
        assert_eq!(b.state(f), BallState::Frontier);
        assert!(b.cut_edges().is_empty());
        let (upper, lower) = b.boundary_sides(&g).unwrap();
        assert!(!upper.is_empty() && !lower.is_empty());
        assert!(upper.iter().all(|&k| b.vertex(&g, k).word().digits()[0] == 0));
    }

    #[test]
    fn schur_trace_renormalizes() {
        let g1 = half(1);
        let red = schur_trace(&g1, &lattice(0)).unwrap();
        assert_eq!(red, ReducedNetwork::from_graph(&half(0)));
        let all = lattice(1);
        assert_eq!(schur_trace(&g1, &all).unwrap(), ReducedNetwork::from_graph(&g1));
        assert!(schur_trace(&g1, &[VertexId::q1()]).is_err());
    }

    #[test]
    fn capacity_errors() {
        assert!(matches!(
            LevelGraph::with_max_level(13, ratio(1, 2), 12),
            Err(Error::Capacity(_))
        ));
        assert!(LevelGraph::new(2, ratio(3, 2)).is_err());
    }
}
