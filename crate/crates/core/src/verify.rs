//! Invariant suites behind `dendrite verify`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::addressing::{apply_map, canonicalize, Corner, VertexId, Word};
use crate::error::{Error, Result};
use crate::exit_time::{g1_direct, g1_via_identity, typical_point, TypicalKind, TypicalPoint};
use crate::graph::{BallRegion, LevelGraph};
use crate::harnack::{boundary_harmonic, BoundaryProfile};
use crate::measure::WeightVector;
use crate::rational::{int, ratio, Rational};
use crate::solver::{green_g1, solve_dirichlet, Constraints};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Tree,
    Geometry,
    Maximum,
    Green,
    Superposition,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Tree, Suite::Geometry, Suite::Maximum, Suite::Green, Suite::Superposition];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Tree => "tree",
            Suite::Geometry => "geometry",
            Suite::Maximum => "maximum",
            Suite::Green => "green",
            Suite::Superposition => "superposition",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses one suite name, or `all`.
pub fn parse_suites(s: &str) -> Result<Vec<Suite>> {
    if s == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse()).collect()
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

/// Sizes and tolerances for the suites.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    pub max_level: u32,
    pub seed: u64,
    /// Highest level checked for tree-ness.
    pub tree_level: u32,
    /// Longest raw words in the geometry cross-check.
    pub word_length: usize,
    /// Relative gap allowed between the Green identity and a direct solve.
    pub green_tolerance: f64,
}

impl VerifyOptions {
    /// `desk` is the default; `quick` shrinks every grid.
    pub fn preset(name: &str, max_level: u32, seed: u64) -> Result<Self> {
        let (tree, words, tol) = match name {
            "desk" => (10, 6, 0.05),
            "quick" => (7, 4, 0.05),
            "strict" => (11, 7, 0.01),
            _ => return Err(Error::Parse(format!("unknown tolerance preset {name:?}"))),
        };
        Ok(VerifyOptions {
            max_level,
            seed,
            tree_level: tree.min(max_level),
            word_length: words,
            green_tolerance: tol,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}/{}: {}", self.suite, self.name, self.detail)
    }
}

struct Recorder {
    suite: Suite,
    out: Vec<CheckOutcome>,
}

impl Recorder {
    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.out.push(CheckOutcome { suite: self.suite, name: name.into(), passed, detail: detail.into() });
    }
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
    let mut rec = Recorder { suite, out: Vec::new() };
    match suite {
        Suite::Tree => tree_suite(&mut rec, opts)?,
        Suite::Geometry => geometry_suite(&mut rec, opts),
        Suite::Maximum => maximum_suite(&mut rec, opts)?,
        Suite::Green => green_suite(&mut rec, opts)?,
        Suite::Superposition => superposition_suite(&mut rec, opts)?,
    }
    Ok(rec.out)
}

fn graph(level: u32, opts: &VerifyOptions) -> Result<LevelGraph> {
    LevelGraph::with_max_level(level, ratio(1, 2), opts.max_level)
}

fn tree_suite(rec: &mut Recorder, opts: &VerifyOptions) -> Result<()> {
    for s0 in [ratio(1, 2), ratio(1, 3)] {
        for level in 0..=opts.tree_level {
            let g = LevelGraph::with_max_level(level, s0.clone(), opts.max_level)?;
            let res = g.check_tree();
            let edges_ok = g.edge_count() + 1 == g.vertex_count();
            let detail = match &res {
                Ok(()) => format!("{} vertices, {} edges", g.vertex_count(), g.edge_count()),
                Err(e) => e.to_string(),
            };
            rec.check(format!("L={level},s0={s0}"), res.is_ok() && edges_ok, detail);
        }
    }
    Ok(())
}

/// Every raw pair `(word, corner)` up to the configured length: equal
/// normal forms iff equal coordinates.
fn geometry_suite(rec: &mut Recorder, opts: &VerifyOptions) {
    let mut reps: BTreeMap<VertexId, (f64, f64)> = BTreeMap::new();
    let mut worst_same = 0f64;
    let mut pairs = 0usize;
    for len in 0..=opts.word_length {
        for w in Word::all_of_length(len) {
            for c in [Corner::Q1, Corner::Q2, Corner::Q3] {
                let p = apply_map(&w, c.coords());
                let v = canonicalize(&w, c);
                let q = *reps.entry(v).or_insert(p);
                worst_same = worst_same.max((p.0 - q.0).hypot(p.1 - q.1));
                pairs += 1;
            }
        }
    }
    rec.check(
        "same-normal-form-same-point",
        worst_same < 1e-9,
        format!("{pairs} raw pairs, max spread {worst_same:e}"),
    );
    let mut pts: Vec<(f64, f64)> = reps.values().cloned().collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut closest = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[j].0 - pts[i].0 >= closest.max(1e-9) {
                break;
            }
            closest = closest.min((pts[j].0 - pts[i].0).hypot(pts[j].1 - pts[i].1));
        }
    }
    rec.check(
        "distinct-normal-forms-distinct-points",
        closest >= 1e-9,
        format!("{} normal forms, closest pair {closest:e}", pts.len()),
    );
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    ratio(rng.random_range(-40..=40), rng.random_range(1..=9))
}

fn maximum_suite(rec: &mut Recorder, opts: &VerifyOptions) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for level in 1..=5u32.min(opts.max_level) {
        let g = graph(level, opts)?;
        for trial in 0..4 {
            let mut c = Constraints::new();
            for x in [VertexId::q1(), VertexId::q2(), VertexId::q3()] {
                c = c.pin(x, random_rational(&mut rng));
            }
            for _ in 0..trial {
                let v = g.vertex(rng.random_range(3..g.vertex_count() as u32));
                if !c.pinned.iter().any(|(x, _)| *x == v) {
                    c = c.pin(v, random_rational(&mut rng));
                }
            }
            let lo = c.pinned.iter().map(|(_, r)| r).min().cloned().unwrap_or_else(Rational::zero);
            let hi = c.pinned.iter().map(|(_, r)| r).max().cloned().unwrap_or_else(Rational::zero);
            let f = solve_dirichlet::<Rational>(&g, &c)?;
            let (fmin, fmax) = f.min_max();
            rec.check(
                format!("exact L={level} trial={trial}"),
                fmin >= lo && fmax <= hi,
                format!("range [{fmin}, {fmax}] within pins [{lo}, {hi}]"),
            );
        }
    }
    let level = 10.min(opts.max_level);
    let g = graph(level, opts)?;
    let c = Constraints::new()
        .pin(VertexId::q1(), int(0))
        .pin(VertexId::q2(), int(1))
        .pin(VertexId::q3(), ratio(1, 3));
    let (fmin, fmax) = solve_dirichlet::<f64>(&g, &c)?.min_max();
    rec.check(
        format!("float L={level}"),
        fmin >= -1e-12 && fmax <= 1.0 + 1e-12,
        format!("range [{fmin}, {fmax}]"),
    );
    let level = 8.min(opts.max_level);
    if level >= 7 {
        let g = graph(level, opts)?;
        let profile = BoundaryProfile::LowerPiece { omega: "0".parse()?, k: 1 };
        let (_, f) = boundary_harmonic::<f64>(&g, 2, &profile)?;
        let (fmin, fmax) = f.min_max();
        rec.check(
            format!("ball L={level}"),
            fmin >= 0.0 && fmax <= 1.0,
            format!("range [{fmin}, {fmax}] for {}", profile.label()),
        );
    }
    Ok(())
}

fn green_suite(rec: &mut Recorder, opts: &VerifyOptions) -> Result<()> {
    let weights = [WeightVector::equal(), WeightVector::symmetric(ratio(1, 6), ratio(1, 3))?];
    for w in &weights {
        for n in 2..=3u32 {
            let level = (n + 6).min(opts.max_level);
            let g = graph(level, opts)?;
            let (ball, direct) = g1_direct(&g, n, w)?;
            for kind in [TypicalKind::Q0, TypicalKind::Xmk { m: 0, k: 0 }, TypicalKind::Yk { k: 1 }] {
                let tp = TypicalPoint::new(n, kind);
                let x = typical_point(&tp)?;
                let k = ball
                    .local_of(&x, &g)
                    .ok_or_else(|| Error::InvalidParameter(format!("{x} not in B_{n}")))?;
                let d = *direct.at(k);
                let e = g1_via_identity(&g, &x, n, w)?;
                let gap = (e.g1 / d - 1.0).abs();
                rec.check(
                    format!("identity w={w} n={n} x={}", tp.label()),
                    gap <= opts.green_tolerance,
                    format!("identity {:.6e}, direct {d:.6e}, gap {gap:.2e}", e.g1),
                );
                rec.check(
                    format!("bracket w={w} n={n} x={}", tp.label()),
                    e.g1_lower <= d && d <= e.g1_upper,
                    format!("direct {d:.6e} in [{:.6e}, {:.6e}]", e.g1_lower, e.g1_upper),
                );
            }
        }
    }
    // G(x, y) = G(y, x) for unit masses, exactly.
    let g = graph(5, opts)?;
    let ball = BallRegion::new(&g, &VertexId::q0(), &ratio(1, 4))?;
    let interior: Vec<u32> = ball.interior().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37);
    let mut worst = true;
    for _ in 0..6 {
        let a = interior[rng.random_range(0..interior.len())];
        let b = interior[rng.random_range(0..interior.len())];
        let ga = green_g1(&g, &ball, &[(a, int(1))])?;
        let gb = green_g1(&g, &ball, &[(b, int(1))])?;
        worst &= ga.at(b) == gb.at(a);
    }
    rec.check("symmetry L=5", worst, "six sampled pairs, rational mode");
    Ok(())
}

fn superposition_suite(rec: &mut Recorder, opts: &VerifyOptions) -> Result<()> {
    let n = 2;
    let level = 7.min(opts.max_level);
    let g = graph(level, opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(17));
    let mut coeff = || ratio(rng.random_range(0..=12), rng.random_range(1..=5));
    let mixture = |upper: Vec<Rational>, tail: Rational, l0: Rational, l1: Rational| {
        let lower = [("0", l0), ("1", l1)]
            .into_iter()
            .map(|(w, c)| (w.parse::<Word>().expect("literal word"), c))
            .collect();
        BoundaryProfile::Mixture { upper, tail, lower }
    };
    for trial in 0..3 {
        let a = [coeff(), coeff(), coeff(), coeff(), int(1)];
        let b = [coeff(), coeff(), coeff(), coeff(), int(2)];
        let (s, t) = (coeff() + int(1), coeff());
        let combo: Vec<Rational> = a.iter().zip(&b).map(|(x, y)| &s * x + &t * y).collect();
        let make = |c: &[Rational]| mixture(vec![c[0].clone(), c[1].clone()], c[4].clone(), c[2].clone(), c[3].clone());
        let (_, fa) = boundary_harmonic::<Rational>(&g, n, &make(&a))?;
        let (_, fb) = boundary_harmonic::<Rational>(&g, n, &make(&b))?;
        let (_, fc) = boundary_harmonic::<Rational>(&g, n, &make(&combo))?;
        let exact = (0..fc.values().len() as u32).all(|k| *fc.at(k) == &s * fa.at(k) + &t * fb.at(k));
        rec.check(
            format!("mixture L={level} trial={trial}"),
            exact,
            format!("{} vertices, s={s}, t={t}", fc.values().len()),
        );
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_suite_lists() {
        assert_eq!(parse_suites("all").unwrap().len(), 5);
        assert_eq!(parse_suites("tree,green").unwrap(), vec![Suite::Tree, Suite::Green]);
        assert!(parse_suites("nope").is_err());
    }

    #[test]
    fn quick_suites_pass() {
        let opts = VerifyOptions::preset("quick", 9, 7).unwrap();
        for s in [Suite::Tree, Suite::Geometry, Suite::Superposition] {
            for c in run_suite(s, &opts).unwrap() {
                assert!(c.passed, "{c}");
            }
        }
    }
}
