//! Resistance to the boundary of `B_n = B(q0, 2^-n)`, the two-node network
//! reduction, mean exit times and the exit-time ratio experiment.

use std::io::Write;

use serde::Serialize;

use crate::addressing::{canonicalize, Corner, VertexId, Word};
use crate::error::{Error, Result};
use crate::graph::{side_of, BallRegion, LevelGraph, Side};
use crate::measure::{for_each_ball_cell, lumped_masses, WeightVector};
use crate::rational::{fmt_f64, int, pow, pow2, ratio, to_f64, Rational};
use crate::solver::{ball_equilibrium, green_g1, VertexFunction};
use crate::stats::{log2_slope, SlopeFit};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum TypicalKind {
    Q0,
    /// `x_{m,k} = F_{0 2^{n-1} 0^m 2 3^k}(q1)`.
    Xmk { m: u32, k: u32 },
    /// `y_k = F_{2 0^{n-1} 2^k}(q1)`.
    Yk { k: u32 },
    /// `F_{0 2^{n-1} 0^m 2 3 ω}(q1)` with `ω ∈ {2,3}^{k-1}`.
    ReflectedXmk { m: u32, tail: Word },
    /// `F_{2 ω1 ω2}(q1)` with `ω1 ∈ {0,1}^{n-1}`, `ω2 ∈ {2,3}^k`.
    ReflectedYk { w1: Word, w2: Word },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypicalPoint {
    pub n: u32,
    pub kind: TypicalKind,
}

impl TypicalPoint {
    pub fn new(n: u32, kind: TypicalKind) -> Self {
        TypicalPoint { n, kind }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            TypicalKind::Q0 => "q0".into(),
            TypicalKind::Xmk { m, k } => format!("x({m},{k})"),
            TypicalKind::Yk { k } => format!("y({k})"),
            TypicalKind::ReflectedXmk { m, tail } => format!("x({m};3{tail})"),
            TypicalKind::ReflectedYk { w1, w2 } => format!("y({w1};{w2})"),
        }
    }
}

fn upper_prefix(n: u32) -> Vec<u8> {
    let mut w = vec![0u8];
    w.extend(std::iter::repeat_n(2, n as usize - 1));
    w
}

pub fn typical_point(tp: &TypicalPoint) -> Result<VertexId> {
    let n = tp.n;
    if n == 0 {
        return Err(Error::InvalidParameter("ball index n must be at least 1".into()));
    }
    let mut w;
    match &tp.kind {
        TypicalKind::Q0 => return Ok(VertexId::q0()),
        TypicalKind::Xmk { m, k } => {
            w = upper_prefix(n);
            w.extend(std::iter::repeat_n(0, *m as usize));
            w.push(2);
            w.extend(std::iter::repeat_n(3, *k as usize));
        }
        TypicalKind::Yk { k } => {
            w = vec![2];
            w.extend(std::iter::repeat_n(0, n as usize - 1));
            w.extend(std::iter::repeat_n(2, *k as usize));
        }
        TypicalKind::ReflectedXmk { m, tail } => {
            if tail.digits().iter().any(|&d| d < 2) {
                return Err(Error::InvalidParameter(format!("tail {tail} is not in {{2,3}}*")));
            }
            w = upper_prefix(n);
            w.extend(std::iter::repeat_n(0, *m as usize));
            w.extend([2, 3]);
            w.extend_from_slice(tail.digits());
        }
        TypicalKind::ReflectedYk { w1, w2 } => {
            if w1.len() != n as usize - 1 || w1.digits().iter().any(|&d| d >= 2) {
                return Err(Error::InvalidParameter(format!("{w1} is not a word in {{0,1}}^{}", n - 1)));
            }
            if w2.is_empty() || w2.digits().iter().any(|&d| d < 2) {
                return Err(Error::InvalidParameter(format!("{w2} is not a non-empty word in {{2,3}}*")));
            }
            w = vec![2];
            w.extend_from_slice(w1.digits());
            w.extend_from_slice(w2.digits());
        }
    }
    Ok(canonicalize(&Word::from_digits(&w), Corner::Q1))
}

/// `2^-n` as the radius of `B_n`.
pub fn ball_radius(n: u32) -> Rational {
    pow2(-(n as i64))
}

pub fn ball_n(g: &LevelGraph, n: u32) -> Result<BallRegion> {
    BallRegion::new(g, &VertexId::q0(), &ball_radius(n))
}

/// `R(x, B_n^c)` at level `L` with its equilibrium potential. The value
/// decreases with `L` toward the continuum resistance.
pub fn boundary_resistance(g: &LevelGraph, x: &VertexId, n: u32) -> Result<(f64, VertexFunction<f64>)> {
    let ball = ball_n(g, n)?;
    let (psi, r) = ball_equilibrium::<f64>(g, &ball, x)?;
    Ok((r, psi))
}

/// Largest diameter of a level-`L` cell, `2 max(s0, s2)^L`.
fn cell_diameter(g: &LevelGraph) -> Rational {
    let s = if g.s0() > &g.s2() { g.s0().clone() } else { g.s2() };
    int(2) * pow(&s, g.level() as i64)
}

/// Two-sided bounds on the continuum `R(x, B_n^c)`: the frontier lies
/// outside the ball, and every path to `B_n^c` first crosses a lattice
/// point at distance at least `2^-n` minus one cell diameter.
pub fn boundary_resistance_bounds(g: &LevelGraph, x: &VertexId, n: u32) -> Result<(f64, f64)> {
    let (upper, _) = boundary_resistance(g, x, n)?;
    let inner = ball_radius(n) - cell_diameter(g);
    let lower = if inner > Rational::from_integer(0.into()) {
        let ball = BallRegion::new(g, &VertexId::q0(), &inner)?;
        match ball_equilibrium::<f64>(g, &ball, x) {
            Ok((_, r)) => r,
            Err(_) => 0.0,
        }
    } else {
        0.0
    };
    Ok((lower, upper))
}

/// The two reduction nodes `(z_L, z_R)` of an interior point, read off
/// its first address.
pub fn reduction_nodes(x: &VertexId, n: u32) -> Result<(VertexId, VertexId)> {
    let n = n as usize;
    let d = x.first_address(x.level() + n + 8);
    let outside = || Error::InvalidParameter(format!("{x} is not inside B_{n}"));
    let on_frontier = || Error::InvalidParameter(format!("{x} lies on the frontier of B_{n}"));
    let first_free = |from: usize| (from..d.len()).find(|&i| d[i] < 2);
    let q1 = |w: &[u8]| canonicalize(&Word::from_digits(w), Corner::Q1);
    // `F_ρ(q_{2+e})` for e in {0,1} is `F_{ρ(2+e)}(q1)`
    let side = |w: &[u8], e: u8| {
        let mut v = w.to_vec();
        v.push(2 + e);
        q1(&v)
    };
    match d[0] {
        0 => {
            if d[1..n].iter().any(|&x| x != 2) {
                return Err(outside());
            }
            let m = d[n..].iter().take_while(|&&x| x == 0).count();
            if n + m >= d.len() - 1 {
                return Err(on_frontier());
            }
            if d[n + m] != 2 {
                return Err(outside());
            }
            let c = &d[..n + m + 1];
            match d[n + m + 1] {
                0 | 2 => Ok((canonicalize(&Word::from_digits(c), Corner::Q2), q1(c))),
                1 => Ok((q1(c), side(c, 1))),
                _ => {
                    let j = first_free(n + m + 2).ok_or_else(on_frontier)?;
                    Ok((q1(&d[..j]), side(&d[..j], d[j])))
                }
            }
        }
        2 => {
            if d[1..n].iter().any(|&x| x >= 2) {
                return Err(outside());
            }
            let j = first_free(n).ok_or_else(on_frontier)?;
            Ok((q1(&d[..j]), side(&d[..j], d[j])))
        }
        _ => Err(outside()),
    }
}

/// Outcome of reducing `B_n` with its shorted complement to the nodes
/// `x, z_L, z_R` and ground.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionResult {
    pub x: VertexId,
    pub z_l: VertexId,
    pub z_r: VertexId,
    /// Where `x`'s branch meets the arc `z_L z_R`; `x` itself when on it.
    pub foot: VertexId,
    /// Measured `R(z_L, B_n^c)` and `R(z_R, B_n^c)`.
    pub r_zl: f64,
    pub r_zr: f64,
    pub r_l: f64,
    pub r_r: f64,
    pub r_x: f64,
    pub psi_zl: f64,
    pub psi_zr: f64,
    #[serde(serialize_with = "ser_rational")]
    pub a_mass: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub d_mass: Rational,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&crate::rational::fmt_rational(r))
}

/// Solves `1/R_L = 1/r_L + 1/(D + r_R)`, `1/R_R = 1/r_R + 1/(D + r_L)` for
/// `(r_L, r_R)` through the star form of the triangle: its ground arm `g`
/// satisfies `g² + D g = R_L R_R`. An infinite `r` means no separate path
/// to ground.
pub fn solve_rlr(r_zl: f64, r_zr: f64, d: f64) -> (f64, f64) {
    if d == 0.0 {
        return (r_zl, r_zr);
    }
    let g = 0.5 * (-d + (d * d + 4.0 * r_zl * r_zr).sqrt());
    let (al, ar) = (r_zl - g, r_zr - g);
    let r_l = if ar > 0.0 { d * g / ar } else { f64::INFINITY };
    let r_r = if al > 0.0 { d * g / al } else { f64::INFINITY };
    (r_l, r_r)
}

fn parallel(a: f64, b: f64) -> f64 {
    1.0 / (1.0 / a + 1.0 / b)
}

/// `(μ(A_n^x), μ(D_n^x))`.
pub fn exit_sets_measure(x: &VertexId, n: u32, w: &WeightVector) -> (Rational, Rational) {
    let n = n as i64;
    let up = w.w0() * pow(w.w2(), n) / (int(1) - w.w0());
    let down_piece = w.w2() * pow(w.w0(), n - 1);
    let down = &down_piece * pow2(n - 1);
    let ball = &up + &down;
    if *x == VertexId::q0() {
        return (ball.clone(), ball);
    }
    match side_of(x) {
        Side::Upper => (up, down),
        Side::Lower => (down_piece, ball),
    }
}

pub fn network_reduce(g: &LevelGraph, x: &VertexId, n: u32, w: &WeightVector) -> Result<ReductionResult> {
    let ball = ball_n(g, n)?;
    if !ball.local_of(x, g).is_some_and(|k| ball.is_interior(k)) {
        return Err(Error::InvalidParameter(format!("{x} is not interior to B_{n} at level {}", g.level())));
    }
    let (z_l, z_r) = reduction_nodes(x, n)?;
    for z in [&z_l, &z_r] {
        if !g.contains(z) {
            return Err(Error::InvalidParameter(format!(
                "reduction node {z} needs a level above {}",
                g.level()
            )));
        }
    }
    let (_, r_zl) = ball_equilibrium::<f64>(g, &ball, &z_l)?;
    let (_, r_zr) = ball_equilibrium::<f64>(g, &ball, &z_r)?;
    let dist = |a: &VertexId, b: &VertexId| g.resistance_distance(a, b).map(|r| to_f64(&r));
    let d = dist(&z_l, &z_r)?;
    let (r_l, r_r) = solve_rlr(r_zl, r_zr, d);

    let foot = g.vertex(g.median(g.index_of(x)?, g.index_of(&z_l)?, g.index_of(&z_r)?));
    let (fl, fr) = (dist(&foot, &z_l)?, dist(&foot, &z_r)?);
    let r_foot = parallel(fl + r_l, fr + r_r);
    let r_x = dist(x, &foot)? + r_foot;
    let at_foot = r_foot / r_x;
    let branch = |r: f64, len: f64| if r.is_infinite() { 1.0 } else { r / (len + r) };
    let (a_mass, d_mass) = exit_sets_measure(x, n, w);
    Ok(ReductionResult {
        x: x.clone(),
        z_l,
        z_r,
        foot,
        r_zl,
        r_zr,
        r_l,
        r_r,
        r_x,
        psi_zl: at_foot * branch(r_l, fl),
        psi_zr: at_foot * branch(r_r, fr),
        a_mass,
        d_mass,
    })
}

/// `G1(x) = R(x, B_n^c) ∫ ψ_n^x dμ` with the integral taken over the
/// level-`L` potential, cell by cell.
#[derive(Debug, Clone, Serialize)]
pub struct G1Estimate {
    pub r_lower: f64,
    pub r_upper: f64,
    /// Corner-range bounds on `∫ ψ dμ`.
    pub int_lower: f64,
    pub int_upper: f64,
    /// Exact integral of the cellwise harmonic interpolant.
    pub int_value: f64,
    pub g1_lower: f64,
    pub g1_upper: f64,
    pub g1: f64,
}

pub fn g1_via_identity(g: &LevelGraph, x: &VertexId, n: u32, w: &WeightVector) -> Result<G1Estimate> {
    let ball = ball_n(g, n)?;
    let (psi, r) = ball_equilibrium::<f64>(g, &ball, x)?;
    let (r_lower, _) = boundary_resistance_bounds(g, x, n)?;
    let net = ball.network().clone();
    let value = |v: u32| net.local(v).map(|k| *psi.at(k)).unwrap_or(0.0);
    let mu: Vec<f64> = (0..=g.level())
        .map(|a| to_f64(&w.class_measure(a, g.level() - a)))
        .collect();
    let (mut lo, mut hi) = (0.0, 0.0);
    for_each_ball_cell(g, &ball, |c| {
        let vals = c.corners.map(value);
        let m = mu[c.class as usize];
        lo += m * vals.iter().cloned().fold(f64::INFINITY, f64::min);
        hi += m * vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    })?;
    let masses = lumped_masses::<f64>(g, w, &ball)?;
    let int_value: f64 = masses.iter().map(|&(k, m)| m * psi.at(k)).sum();
    Ok(G1Estimate {
        r_lower,
        r_upper: r,
        int_lower: lo,
        int_upper: hi,
        int_value,
        g1_lower: r_lower * lo,
        g1_upper: r * hi,
        g1: r * int_value,
    })
}

/// Direct solve of `G1` on `B_n` with lumped masses.
pub fn g1_direct(g: &LevelGraph, n: u32, w: &WeightVector) -> Result<(BallRegion, VertexFunction<f64>)> {
    let ball = ball_n(g, n)?;
    let masses = lumped_masses::<f64>(g, w, &ball)?;
    let f = green_g1(g, &ball, &masses)?;
    Ok((ball, f))
}

/// Infimum of a ball function over `B(q0, radius)`: interior vertices and
/// the points where cut edges cross the radius, by linear interpolation.
pub fn inf_over_subball(
    g: &LevelGraph,
    f: &VertexFunction<f64>,
    radius: &Rational,
) -> Result<f64> {
    let small = BallRegion::new(g, &VertexId::q0(), radius)?;
    let net = f.network();
    let at = |v: u32| -> Result<f64> {
        net.local(v)
            .map(|k| *f.at(k))
            .ok_or_else(|| Error::InvalidParameter("sub-ball leaves the function's domain".into()))
    };
    let snet = small.network();
    let mut inf = f64::INFINITY;
    for k in small.interior() {
        inf = inf.min(at(snet.global(k))?);
    }
    for e in small.cut_edges() {
        let (a, b) = (at(snet.global(e.inner))?, at(snet.global(e.outer))?);
        let t = to_f64(&e.fraction);
        inf = inf.min(a + t * (b - a));
    }
    Ok(inf)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitRow {
    pub n: u32,
    pub level: u32,
    pub inf: f64,
    pub sup: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub weights: WeightVector,
    pub level_offset: u32,
    pub n_range: (u32, u32),
    pub rows: Vec<ExitRow>,
    pub fit: Option<SlopeFit>,
}

impl ExitReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["n", "L", "inf_g1", "sup_g1", "ratio"])?;
        for r in &self.rows {
            wtr.write_record([
                r.n.to_string(),
                r.level.to_string(),
                fmt_f64(r.inf),
                fmt_f64(r.sup),
                fmt_f64(r.ratio),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// `inf_{4^-n B_n} G1 / sup_{B_n} G1` for each `n`, at level `n + offset`.
pub fn exit_ratio_experiment(
    n_range: std::ops::RangeInclusive<u32>,
    w: &WeightVector,
    level_offset: u32,
) -> Result<ExitReport> {
    let mut rows = Vec::new();
    for n in n_range.clone() {
        let level = n + level_offset;
        let g = LevelGraph::new(level, ratio(1, 2))?;
        let (_, f) = g1_direct(&g, n, w)?;
        let (_, sup) = f.min_max();
        let inf = inf_over_subball(&g, &f, &pow2(-3 * n as i64))?;
        rows.push(ExitRow { n, level, inf, sup, ratio: inf / sup });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(ExitReport {
        weights: w.clone(),
        level_offset,
        n_range: (*n_range.start(), *n_range.end()),
        fit: log2_slope(&xs, &ys),
        rows,
    })
}

/// Per-point exit data for `q0`, `x_{0,0}` and `y_1`.
#[derive(Debug, Clone, Serialize)]
pub struct ExitPointRow {
    pub n: u32,
    pub level: u32,
    pub x_kind: String,
    pub estimate: G1Estimate,
}

pub fn exit_point_rows(
    n_range: std::ops::RangeInclusive<u32>,
    w: &WeightVector,
    level_offset: u32,
) -> Result<Vec<ExitPointRow>> {
    let mut rows = Vec::new();
    for n in n_range {
        let level = n + level_offset;
        let g = LevelGraph::new(level, ratio(1, 2))?;
        for kind in [TypicalKind::Q0, TypicalKind::Xmk { m: 0, k: 0 }, TypicalKind::Yk { k: 1 }] {
            let tp = TypicalPoint::new(n, kind);
            let x = typical_point(&tp)?;
            rows.push(ExitPointRow { n, level, x_kind: tp.label(), estimate: g1_via_identity(&g, &x, n, w)? });
        }
    }
    Ok(rows)
}

pub fn write_point_csv<W: Write>(rows: &[ExitPointRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "n", "L", "x_kind", "R_lower", "R_upper", "int_lower", "int_upper", "g1_lower", "g1_upper",
    ])?;
    for r in rows {
        let e = &r.estimate;
        wtr.write_record([
            r.n.to_string(),
            r.level.to_string(),
            r.x_kind.clone(),
            fmt_f64(e.r_lower),
            fmt_f64(e.r_upper),
            fmt_f64(e.int_lower),
            fmt_f64(e.int_upper),
            fmt_f64(e.g1_lower),
            fmt_f64(e.g1_upper),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
