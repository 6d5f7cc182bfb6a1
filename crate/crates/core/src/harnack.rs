//! Harmonic functions on `B_n` with Cantor-piece boundary data, and the
//! strong and weak Harnack ratios they produce.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::addressing::{canonicalize, Corner, VertexId, Word};
use crate::error::{Error, Result};
use crate::exit_time::ball_n;
use crate::graph::{BallRegion, LevelGraph};
use crate::measure::{for_each_ball_cell, WeightVector};
use crate::rational::{fmt_f64, from_f64, pow2, ratio, to_f64, Rational, Scalar};
use crate::solver::{ball_harmonic, VertexFunction};
use crate::stats::log2_slope;

/// Boundary data on `∂B_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryProfile {
    /// Indicator of `F_{0 2^{n-1} 0^m 2 3^k}(C)`.
    UpperPiece { m: u32, k: u32 },
    /// Indicator of `F_{2 ω 2^k}(C)`, `ω ∈ {0,1}^{n-1}`.
    LowerPiece { omega: Word, k: u32 },
    /// `upper[m]` on `F_{0 2^{n-1} 0^m 2 3}(C)`, `tail` on the pieces past
    /// the end of `upper` and on the apex `F_{0 2^{n-1}}(q1)`, `lower[ω]` on
    /// `F_{2ω}(C)` (0 when absent).
    Mixture {
        upper: Vec<Rational>,
        tail: Rational,
        lower: BTreeMap<Word, Rational>,
    },
}

impl BoundaryProfile {
    pub fn label(&self) -> String {
        match self {
            BoundaryProfile::UpperPiece { m, k } => format!("upper({m},{k})"),
            BoundaryProfile::LowerPiece { omega, k } => format!("lower({omega},{k})"),
            BoundaryProfile::Mixture { .. } => "mixture".into(),
        }
    }

    /// Constant `c` on the whole boundary.
    pub fn constant(n: u32, c: Rational) -> Self {
        let lower = Word::all_of_length(n as usize - 1)
            .filter(|w| w.digits().iter().all(|&d| d < 2))
            .map(|w| (w, c.clone()))
            .collect();
        BoundaryProfile::Mixture { upper: Vec::new(), tail: c, lower }
    }

    fn validate(&self, n: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let lower_word = |w: &Word| w.len() == n as usize - 1 && w.digits().iter().all(|&d| d < 2);
        match self {
            BoundaryProfile::UpperPiece { .. } => Ok(()),
            BoundaryProfile::LowerPiece { omega, .. } => {
                if lower_word(omega) {
                    Ok(())
                } else {
                    bad(format!("{omega} does not index a lower piece of B_{n}"))
                }
            }
            BoundaryProfile::Mixture { upper, tail, lower } => {
                if let Some(w) = lower.keys().find(|w| !lower_word(w)) {
                    return bad(format!("{w} does not index a lower piece of B_{n}"));
                }
                let coeffs = upper.iter().chain(lower.values()).chain(std::iter::once(tail));
                if coeffs.clone().any(|c| *c < Rational::zero()) {
                    return bad("mixture coefficients must be non-negative".into());
                }
                if coeffs.into_iter().all(|c| c.is_zero()) {
                    return bad("mixture coefficients are all zero".into());
                }
                Ok(())
            }
        }
    }
}

/// Where a point of `∂B_n` sits in the decomposition `P_n^↑ ∪ P_n^↓`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundaryPiece {
    /// `F_{0 2^{n-1}}(q1)`.
    Apex,
    /// On `F_{0 2^{n-1} 0^m 2 3}(C)`, followed by `tail ∈ {2,3}*`.
    Upper { m: u32, tail: Vec<u8> },
    /// On `F_{2ω}(C)`, followed by `tail ∈ {2,3}*`.
    Lower { omega: Vec<u8>, tail: Vec<u8> },
}

pub fn boundary_piece(x: &VertexId, n: u32) -> Option<BoundaryPiece> {
    let n = n as usize;
    let apex = {
        let mut w = vec![0u8];
        w.extend(std::iter::repeat_n(2, n - 1));
        canonicalize(&Word::from_digits(&w), Corner::Q1)
    };
    if *x == apex {
        return Some(BoundaryPiece::Apex);
    }
    let len = x.level() + n + 4;
    for (prefix, rep) in x.addresses() {
        if rep < 2 {
            continue;
        }
        let mut d = prefix.clone();
        d.resize(len.max(prefix.len() + 1), rep);
        let cantor_from = |i: usize| d[i..].iter().all(|&c| c >= 2);
        if d[0] == 0 && d[1..n].iter().all(|&c| c == 2) {
            let m = d[n..].iter().take_while(|&&c| c == 0).count();
            let at = n + m;
            if at + 2 <= d.len() && d[at] == 2 && d[at + 1] == 3 && cantor_from(at + 2) {
                let tail = prefix.get(at + 2..).map(|t| t.to_vec()).unwrap_or_default();
                return Some(BoundaryPiece::Upper { m: m as u32, tail });
            }
        } else if d[0] == 2 && d[1..n].iter().all(|&c| c < 2) && cantor_from(n) {
            let tail = prefix.get(n..).map(|t| t.to_vec()).unwrap_or_default();
            return Some(BoundaryPiece::Lower { omega: d[1..n].to_vec(), tail });
        }
    }
    None
}

/// Frontier values of the profile, keyed by local position.
pub fn profile_values(
    g: &LevelGraph,
    ball: &BallRegion,
    n: u32,
    profile: &BoundaryProfile,
) -> Result<HashMap<u32, Rational>> {
    profile.validate(n)?;
    let mut out = HashMap::new();
    for &k in ball.frontier() {
        let x = ball.vertex(g, k);
        let piece = boundary_piece(&x, n).ok_or_else(|| {
            Error::InvalidParameter(format!("frontier vertex {x} is not on the boundary of B_{n}"))
        })?;
        let value = match (profile, &piece) {
            (BoundaryProfile::UpperPiece { m, k }, BoundaryPiece::Upper { m: pm, .. }) => {
                let on = *pm == *m && upper_tail_matches(&x, n, *m, *k);
                if on { Rational::one() } else { Rational::zero() }
            }
            (BoundaryProfile::LowerPiece { omega, k }, BoundaryPiece::Lower { omega: po, .. }) => {
                let on = po.as_slice() == omega.digits() && lower_tail_matches(&x, omega, *k);
                if on { Rational::one() } else { Rational::zero() }
            }
            (BoundaryProfile::Mixture { upper, tail, .. }, BoundaryPiece::Upper { m, .. }) => {
                upper.get(*m as usize).cloned().unwrap_or_else(|| tail.clone())
            }
            (BoundaryProfile::Mixture { tail, .. }, BoundaryPiece::Apex) => tail.clone(),
            (BoundaryProfile::Mixture { lower, .. }, BoundaryPiece::Lower { omega, .. }) => lower
                .get(&Word::from_digits(omega))
                .cloned()
                .unwrap_or_else(Rational::zero),
            _ => Rational::zero(),
        };
        if !value.is_zero() {
            out.insert(k, value);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} vanishes on every level-{} frontier vertex of B_{n}",
            profile.label(),
            g.level()
        )));
    }
    Ok(out)
}

fn upper_tail_matches(x: &VertexId, n: u32, m: u32, k: u32) -> bool {
    let mut rho = vec![0u8];
    rho.extend(std::iter::repeat_n(2, n as usize - 1));
    rho.extend(std::iter::repeat_n(0, m as usize));
    rho.push(2);
    rho.extend(std::iter::repeat_n(3, k as usize));
    x.on_cantor_piece(&Word::from_digits(&rho))
}

fn lower_tail_matches(x: &VertexId, omega: &Word, k: u32) -> bool {
    let mut rho = vec![2u8];
    rho.extend_from_slice(omega.digits());
    rho.extend(std::iter::repeat_n(2, k as usize));
    x.on_cantor_piece(&Word::from_digits(&rho))
}

/// Harmonic extension to `B_n` of the profile, at level `L ≥ n + k + 3`.
pub fn boundary_harmonic<S: Scalar>(
    g: &LevelGraph,
    n: u32,
    profile: &BoundaryProfile,
) -> Result<(BallRegion, VertexFunction<S>)> {
    let depth = match profile {
        BoundaryProfile::UpperPiece { m, k } => n + m + k + 3,
        BoundaryProfile::LowerPiece { k, .. } => n + k + 3,
        BoundaryProfile::Mixture { .. } => n + 3,
    };
    if g.level() < depth {
        return Err(Error::InvalidParameter(format!(
            "{} on B_{n} needs level at least {depth}",
            profile.label()
        )));
    }
    let ball = ball_n(g, n)?;
    let values: HashMap<u32, S> = profile_values(g, &ball, n, profile)?
        .into_iter()
        .map(|(k, v)| (k, S::from_rational(&v)))
        .collect();
    let f = ball_harmonic(g, &ball, &values);
    Ok((ball, f))
}

/// Extremes of a function on `B_n` over `B(q0, radius)`: interior vertices
/// and cut-edge crossings by linear interpolation.
pub fn extremes_over_subball(g: &LevelGraph, f: &VertexFunction<f64>, radius: &Rational) -> Result<(f64, f64)> {
    let small = BallRegion::new(g, &VertexId::q0(), radius)?;
    let net = f.network();
    let at = |v: u32| -> Result<f64> {
        net.local(v)
            .map(|k| *f.at(k))
            .ok_or_else(|| Error::InvalidParameter("sub-ball leaves the function's domain".into()))
    };
    let snet = small.network();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut see = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    for k in small.interior() {
        see(at(snet.global(k))?);
    }
    for e in small.cut_edges() {
        let (a, b) = (at(snet.global(e.inner))?, at(snet.global(e.outer))?);
        see(a + to_f64(&e.fraction) * (b - a));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Serialize)]
pub struct EhiResult {
    pub n: u32,
    pub level: u32,
    pub inf: f64,
    pub sup: f64,
    pub ratio: f64,
    /// `(2^n ε + 1)^-1`.
    pub model: f64,
}

/// `inf / sup` over `ε B_n` of the harmonic function with data
/// `1_{F_{2 0^{n-1} 2^k}(C)}`.
pub fn ehi_ratio(g: &LevelGraph, n: u32, k: u32, epsilon: &Rational) -> Result<EhiResult> {
    if *epsilon <= Rational::zero() || *epsilon > ratio(1, 2) {
        return Err(Error::InvalidParameter("epsilon must lie in (0, 1/2]".into()));
    }
    let omega = Word::from_digits(&vec![0; n as usize - 1]);
    let (_, f) = boundary_harmonic::<f64>(g, n, &BoundaryProfile::LowerPiece { omega, k })?;
    let (inf, sup) = extremes_over_subball(g, &f, &(epsilon * pow2(-(n as i64))))?;
    let e = to_f64(epsilon);
    Ok(EhiResult {
        n,
        level: g.level(),
        inf,
        sup,
        ratio: inf / sup,
        model: 1.0 / (2f64.powi(n as i32) * e + 1.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnackReport {
    pub n: u32,
    pub level: u32,
    pub delta: f64,
    pub weights: WeightVector,
    pub profile: String,
    /// Bounds on the `μ`-mean of `u^δ` over `½B_n`.
    pub mean_lower: f64,
    pub mean_upper: f64,
    pub inf: f64,
    pub ratio_lower: f64,
    pub ratio_upper: f64,
}

impl HarnackReport {
    /// Geometric midpoint of the ratio bounds.
    pub fn ratio(&self) -> f64 {
        (self.ratio_lower * self.ratio_upper).sqrt()
    }
}

/// `⨍_{½B_n} u^δ dμ / (inf_{½B_n} u)^δ` for the harmonic extension of the
/// profile. Cells inside `½B_n` contribute `μ·[min, max]` of the corner
/// values raised to `δ`; straddling cells only to the upper bound.
pub fn weh_ratio(
    g: &LevelGraph,
    n: u32,
    delta: f64,
    w: &WeightVector,
    profile: &BoundaryProfile,
) -> Result<HarnackReport> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter("delta must lie in (0, 1]".into()));
    }
    let (_, u) = boundary_harmonic::<f64>(g, n, profile)?;
    let half = pow2(-(n as i64) - 1);
    let ball = BallRegion::new(g, &VertexId::q0(), &half)?;
    let net = u.network().clone();
    let value = |v: u32| net.local(v).map(|k| *u.at(k)).unwrap_or(0.0);
    let l = g.level();
    let mu: Vec<f64> = (0..=l).map(|a| to_f64(&w.class_measure(a, l - a))).collect();
    let (mut int_lo, mut int_hi, mut mu_lo, mut mu_hi) = (0.0, 0.0, 0.0, 0.0);
    for_each_ball_cell(g, &ball, |c| {
        let vals = c.corners.map(value);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let m = mu[c.class as usize];
        int_hi += m * hi.powf(delta);
        mu_hi += m;
        if c.inside {
            int_lo += m * lo.powf(delta);
            mu_lo += m;
        }
    })?;
    let (inf, _) = extremes_over_subball(g, &u, &half)?;
    let mean_lower = if mu_hi > 0.0 { int_lo / mu_hi } else { 0.0 };
    let mean_upper = if mu_lo > 0.0 { int_hi / mu_lo } else { f64::INFINITY };
    let base = inf.powf(delta);
    Ok(HarnackReport {
        n,
        level: l,
        delta,
        weights: w.clone(),
        profile: profile.label(),
        mean_lower,
        mean_upper,
        inf,
        ratio_lower: mean_lower / base,
        ratio_upper: mean_upper / base,
    })
}

/// Weights with `w2 / w0 = 2^{1-δ} ρ`; the ratio is taken as the exact
/// rational value of its double when irrational.
pub fn weights_for(delta: f64, rho: &Rational) -> Result<WeightVector> {
    if *rho <= Rational::zero() {
        return Err(Error::InvalidParameter("rho must be positive".into()));
    }
    let factor = if delta == 1.0 {
        Rational::one()
    } else if delta == 0.5 {
        from_f64(std::f64::consts::SQRT_2)?
    } else {
        from_f64(2f64.powf(1.0 - delta))?
    };
    WeightVector::with_ratio(&(factor * rho))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub rho: String,
    pub report: HarnackReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthSummary {
    pub delta: f64,
    pub rho: String,
    pub rho_value: f64,
    /// `2^slope` of `log2(ratio)` against `n`.
    pub growth_factor: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub delta: f64,
    pub level_offset: u32,
    pub n_range: (u32, u32),
    pub rows: Vec<ScanRow>,
    pub growth: Vec<GrowthSummary>,
}

impl ScanReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_harnack_csv(self.rows.iter().map(|r| (r.rho.as_str(), &r.report)), out)
    }
}

pub fn write_harnack_csv<'a, W: Write>(
    rows: impl IntoIterator<Item = (&'a str, &'a HarnackReport)>,
    out: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "n", "delta", "rho", "profile", "mean_lower", "mean_upper", "inf", "ratio_lower", "ratio_upper",
    ])?;
    for (rho, r) in rows {
        wtr.write_record([
            r.n.to_string(),
            fmt_f64(r.delta),
            rho.to_string(),
            r.profile.clone(),
            fmt_f64(r.mean_lower),
            fmt_f64(r.mean_upper),
            fmt_f64(r.inf),
            fmt_f64(r.ratio_lower),
            fmt_f64(r.ratio_upper),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Growth factor in `n` of the wEH ratio for the profile `upper(0,0)`,
/// one weight choice per `ρ`.
pub fn weh_threshold_scan(
    delta: f64,
    rhos: &[Rational],
    n_range: std::ops::RangeInclusive<u32>,
    level_offset: u32,
) -> Result<ScanReport> {
    let profile = BoundaryProfile::UpperPiece { m: 0, k: 0 };
    let mut rows = Vec::new();
    let mut growth = Vec::new();
    for rho in rhos {
        let w = weights_for(delta, rho)?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for n in n_range.clone() {
            let g = LevelGraph::new(n + level_offset, ratio(1, 2))?;
            let report = weh_ratio(&g, n, delta, &w, &profile)?;
            xs.push(n as f64);
            ys.push(report.ratio());
            rows.push(ScanRow { rho: crate::rational::fmt_rational(rho), report });
        }
        let slope = log2_slope(&xs, &ys).map(|f| f.slope).unwrap_or(0.0);
        growth.push(GrowthSummary {
            delta,
            rho: crate::rational::fmt_rational(rho),
            rho_value: to_f64(rho),
            growth_factor: 2f64.powf(slope),
        });
    }
    Ok(ScanReport {
        delta,
        level_offset,
        n_range: (*n_range.start(), *n_range.end()),
        rows,
        growth,
    })
}
