//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.
//!
//! The lines go straight to stderr so they show up even when the harness
//! captures output.

use std::io::Write;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use dendrite::addressing::{canonicalize, Corner, VertexId, Word};
use dendrite::exit_time::{ball_n, boundary_resistance, exit_ratio_experiment};
use dendrite::graph::{lattice, schur_trace, LevelGraph, ReducedNetwork};
use dendrite::harmonics::{
    discrete_approximation, energy_closed, psi_coefficients, recurrence_residual, Coef, HarmonicSpec, PsiCase,
};
use dendrite::harnack::{ehi_ratio, weh_threshold_scan};
use dendrite::measure::{
    doubling_ratio, doubling_witness, epsilon0, epsilon1, integrate_pw_harmonic, WeightVector,
};
use dendrite::rational::{int, pow2, ratio, to_f64, Rational};
use dendrite::solver::{ball_equilibrium, effective_resistance};
use dendrite::stats::log2_slope;
use num_traits::Zero;

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} {tag}: {title}: {detail}");
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn half(level: u32) -> LevelGraph {
    LevelGraph::new(level, ratio(1, 2)).unwrap()
}

#[test]
fn criterion_01_exact_boundary_resistances() {
    let t = Instant::now();
    let mut bad = Vec::new();
    for level in 0..=6 {
        let g = half(level);
        for corner in [VertexId::q2(), VertexId::q3()] {
            let r: Rational = effective_resistance(&g, std::slice::from_ref(&corner), &[VertexId::q1()]).unwrap();
            if r != int(1) {
                bad.push(format!("L={level} {corner}: {r}"));
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        1,
        "R(q2,q1) = R(q3,q1) = 1 exactly, L = 0..6",
        bad.is_empty() && secs < 1.0,
        &format!("{} mismatches, {secs:.3}s", bad.len()),
    );
}

#[test]
fn criterion_02_renormalization() {
    let mut checked = 0;
    let mut bad = Vec::new();
    for s0 in [ratio(1, 2), ratio(1, 3), ratio(2, 5)] {
        for level in 0..=5 {
            let fine = LevelGraph::new(level + 1, s0.clone()).unwrap();
            let coarse = LevelGraph::new(level, s0.clone()).unwrap();
            let traced = schur_trace(&fine, &lattice(level)).unwrap();
            if traced != ReducedNetwork::from_graph(&coarse) {
                bad.push(format!("s0={s0} L={level}"));
            }
            checked += 1;
        }
    }
    report(
        2,
        "trace of level L+1 onto V_L equals level L",
        bad.is_empty(),
        &format!("{checked} cases, mismatches {bad:?}"),
    );
}

struct LevelSweep {
    levels: Vec<u32>,
    e_down: Vec<f64>,
    e_up: Vec<f64>,
    down_ladder: Vec<f64>,
    /// `a_m` for `m = 0..=4`, per level.
    up_ladder: Vec<[f64; 5]>,
}

fn sweep() -> &'static LevelSweep {
    static SWEEP: OnceLock<LevelSweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let down = HarmonicSpec::u_down(ratio(1, 2)).unwrap();
        let up = HarmonicSpec::u_up();
        let f0q2 = canonicalize(&Word::from_digits(&[0]), Corner::Q2);
        let ladder_points: Vec<VertexId> = (0..=4)
            .map(|m| {
                let mut w = vec![0u8; m];
                w.push(2);
                canonicalize(&Word::from_digits(&w), Corner::Q1)
            })
            .collect();
        let mut s = LevelSweep {
            levels: Vec::new(),
            e_down: Vec::new(),
            e_up: Vec::new(),
            down_ladder: Vec::new(),
            up_ladder: Vec::new(),
        };
        for level in 6..=12 {
            let g = half(level);
            let (f, e) = discrete_approximation::<f64>(&down, &g).unwrap();
            s.e_down.push(e);
            s.down_ladder.push(f.value(&g, &f0q2).unwrap());
            drop(f);
            let (f, e) = discrete_approximation::<f64>(&up, &g).unwrap();
            s.e_up.push(e);
            s.up_ladder.push(std::array::from_fn(|m| f.value(&g, &ladder_points[m]).unwrap()));
            s.levels.push(level);
        }
        s
    })
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] - 1e-12)
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + 1e-12)
}

#[test]
fn criterion_03_closed_form_energies() {
    let mut closed_ok = true;
    for (s0, expect) in [(ratio(1, 2), int(3)), (ratio(1, 3), int(4)), (ratio(2, 5), ratio(7, 2))] {
        closed_ok &= energy_closed(&HarmonicSpec::u_down(s0).unwrap()) == expect;
    }
    closed_ok &= energy_closed(&HarmonicSpec::u_up()) == ratio(3, 2);
    let s = sweep();
    let monotone = non_decreasing(&s.e_down) && non_decreasing(&s.e_up);
    let d = s.e_down.last().unwrap() / 3.0 - 1.0;
    let u = s.e_up.last().unwrap() / 1.5 - 1.0;
    report(
        3,
        "E(u_down) = 1/s0 + 1, E(u_up) = 3/2; discrete energies rise to them",
        closed_ok && monotone && d.abs() <= 0.02 && u.abs() <= 0.02,
        &format!("closed exact: {closed_ok}, monotone: {monotone}, L=12 gaps {d:.2e} / {u:.2e}"),
    );
}

#[test]
fn criterion_04_ladder_values() {
    let s = sweep();
    let last = s.levels.len() - 1;
    let mut ok = (s.down_ladder[last] / 0.25 - 1.0).abs() <= 0.02 && non_increasing(&s.down_ladder);
    let mut worst = (s.down_ladder[last] / 0.25 - 1.0).abs();
    for m in 0..5 {
        let series: Vec<f64> = s.up_ladder.iter().map(|a| a[m]).collect();
        let target = 4f64.powi(-(m as i32 + 1));
        let gap = (series[last] / target - 1.0).abs();
        worst = worst.max(gap);
        ok &= gap <= 0.02 && (non_increasing(&series) || non_decreasing(&series));
    }
    report(
        4,
        "u_down(F_0(q2)) -> 1/4 and a_m -> 4^-(m+1), m <= 4",
        ok,
        &format!("worst relative gap at L=12 {worst:.2e}, monotone in L"),
    );
}

#[test]
fn criterion_05_exact_ball_resistance() {
    let t = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for n in 1..=3u32 {
        let exact = 1.0 / (3.0 * (2f64.powi(n as i32 - 1) + 2f64.powi(2 * n as i32 - 1)));
        let rs: Vec<f64> = (n + 3..=n + 7)
            .map(|l| boundary_resistance(&half(l), &VertexId::q0(), n).unwrap().0)
            .collect();
        let gap = rs.last().unwrap() / exact - 1.0;
        ok &= non_increasing(&rs) && gap.abs() <= 0.05 && *rs.last().unwrap() >= exact - 1e-12;
        detail.push(format!("n={n}: {:.6} vs {exact:.6}", rs.last().unwrap()));
    }
    let secs = t.elapsed().as_secs_f64();
    report(
        5,
        "R(q0, B_n^c) decreases to 1/(3(2^(n-1) + 2^(2n-1)))",
        ok && secs < 30.0,
        &format!("{}, {secs:.2}s", detail.join("; ")),
    );
}

#[test]
fn criterion_06_coefficient_oracles() {
    let mut graphs: std::collections::BTreeMap<u32, LevelGraph> = Default::default();
    let mut cases = Vec::new();
    for n in 1..=3 {
        for m0 in 0..=3 {
            for k0 in 0..=3 {
                cases.push(PsiCase::Xmk { n, m0, k0 });
            }
        }
        for k0 in 1..=3 {
            cases.push(PsiCase::Yk { n, k0 });
        }
    }
    let mut worst = 0f64;
    let mut worst_at = String::new();
    let mut residual_ok = true;
    for case in cases {
        let table = psi_coefficients(case).unwrap();
        let (n, depth, source) = match case {
            PsiCase::Xmk { n, m0, k0 } => (n, m0 + k0, table.get(Coef::A, m0 as i64, k0 as i64).map(|_| ())),
            PsiCase::Yk { n, k0 } => (n, k0, table.get(Coef::B, 0, k0 as i64).map(|_| ())),
        };
        assert!(source.is_some());
        let level = (n + depth + 4).min(12);
        let g = graphs.entry(level).or_insert_with(|| half(level));
        let ball = ball_n(g, n).unwrap();
        let x = match case {
            PsiCase::Xmk { m0, k0, .. } => table.entries.iter().find(|e| e.coef == Coef::A && e.m == m0 as i64 && e.k == k0 as i64),
            PsiCase::Yk { k0, .. } => table.entries.iter().find(|e| e.coef == Coef::B && e.k == k0 as i64),
        }
        .unwrap()
        .point(case);
        let (psi, _) = ball_equilibrium::<f64>(g, &ball, &x).unwrap();
        for e in &table.entries {
            let p = e.point(case);
            let k = ball.local_of(&p, g).expect("entry point lies in the ball");
            let got = *psi.at(k);
            let want = to_f64(&e.value);
            let gap = (got / want - 1.0).abs();
            if gap > worst {
                worst = gap;
                worst_at = format!("{case:?} {}", e.label());
            }
        }
        // c_{j-1}, c_j, c_{j+1} along the spine, then the chain
        let chain: Vec<&Rational> = match case {
            PsiCase::Xmk { m0, k0, .. } => {
                let mut c: Vec<&Rational> =
                    (-1..=m0 as i64).map(|m| table.get(Coef::A, m, 0).unwrap()).collect();
                c.extend((1..=k0 as i64).map(|k| table.get(Coef::A, m0 as i64, k).unwrap()));
                c
            }
            PsiCase::Yk { k0, .. } => (0..=k0 as i64).map(|k| table.get(Coef::B, 0, k).unwrap()).collect(),
        };
        for w in chain.windows(3) {
            residual_ok &= recurrence_residual(w[0], w[1], w[2]).is_zero();
        }
    }
    report(
        6,
        "potential tables match discrete equilibrium potentials within 5%",
        worst <= 0.05 && residual_ok,
        &format!("worst relative gap {worst:.2e} at {worst_at}; recurrence residuals zero: {residual_ok}"),
    );
}

#[test]
fn criterion_07_exit_time_anomaly() {
    let r = exit_ratio_experiment(2..=5, &WeightVector::equal(), 5).unwrap();
    let slope = r.fit.map(|f| f.slope).unwrap_or(f64::NAN);
    let ratios: Vec<String> = r.rows.iter().map(|x| format!("{:.3}", x.ratio)).collect();
    report(
        7,
        "exit ratio log2 slope in [-1.25, -0.75], n = 2..5",
        (-1.25..=-0.75).contains(&slope),
        &format!("slope {slope:.3}, ratios {ratios:?}"),
    );
}

#[test]
fn criterion_08_ehi_failure() {
    let mut ns = Vec::new();
    let mut ys = Vec::new();
    for n in 2..=5u32 {
        let g = half(n + 6);
        ns.push(n as f64);
        ys.push(ehi_ratio(&g, n, 1, &ratio(1, 2)).unwrap().ratio);
    }
    let slope = log2_slope(&ns, &ys).unwrap().slope;
    report(
        8,
        "EHI ratio log2 slope -1 +/- 0.25 at eps = 1/2, k = 1",
        (slope + 1.0).abs() <= 0.25,
        &format!("slope {slope:.3}"),
    );
}

#[test]
fn criterion_09_weh_threshold() {
    let rhos = [ratio(1, 2), int(1), ratio(3, 2), int(2)];
    let mut ok = true;
    let mut detail = Vec::new();
    for delta in [0.5, 1.0] {
        let scan = weh_threshold_scan(delta, &rhos, 2..=5, 6).unwrap();
        for gsum in &scan.growth {
            let pass = if gsum.rho_value <= 1.0 {
                gsum.growth_factor <= 1.15
            } else {
                gsum.growth_factor >= 0.8 * gsum.rho_value
            };
            ok &= pass;
            detail.push(format!("d={delta} rho={}: {:.3}", gsum.rho, gsum.growth_factor));
        }
    }
    report(
        9,
        "wEH growth <= 1.15 for rho <= 1, >= 0.8 rho for rho in {3/2, 2}",
        ok,
        &detail.join(", "),
    );
}

#[test]
fn criterion_10_measure_facts() {
    let w = WeightVector::equal();
    let s0 = ratio(1, 2);
    let (e0, e1) = (epsilon0(&w), epsilon1(&w));
    let down = integrate_pw_harmonic(&HarmonicSpec::u_down(s0.clone()).unwrap(), &w, &s0, None).unwrap();
    let up = integrate_pw_harmonic(&HarmonicSpec::u_up(), &w, &s0, None).unwrap();
    let down_ok = down.within(&e0, &(&e0 * int(4)));
    let up_ok = up.within(&e1, &(&e1 * int(4)));

    let mut witness_ok = true;
    let mut witness = Vec::new();
    for n in 2..=6u32 {
        let g = half(n + 5);
        let (lo, _) = doubling_ratio(&g, &w, &doubling_witness(n), &pow2(-(n as i64))).unwrap();
        let lo = to_f64(&lo);
        witness_ok &= lo > 3.0 / 16.0 * 2f64.powi(n as i32);
        witness.push(format!("{lo:.2}"));
    }

    let mut lattice_worst = 0f64;
    for n in 1..=3u32 {
        let g = half(n + 6);
        for x in lattice(n) {
            for j in 1..=2 {
                let (_, hi) = doubling_ratio(&g, &w, &x, &pow2(-(n as i64) - j)).unwrap();
                lattice_worst = lattice_worst.max(to_f64(&hi));
            }
        }
    }
    let lattice_ok = lattice_worst <= 64.0;
    report(
        10,
        "integral bounds, doubling blow-up at y_n, lattice doubling <= 64",
        down_ok && up_ok && witness_ok && lattice_ok,
        &format!(
            "int u_down in [{:.5}, {:.5}] vs [{:.5}, {:.5}]: {down_ok}; \
             int u_up in [{:.5}, {:.5}] vs [{:.5}, {:.5}]: {up_ok}; \
             witness lower bounds {witness:?}: {witness_ok}; lattice max {lattice_worst:.3}: {lattice_ok}",
            down.lower_f64(),
            down.upper_f64(),
            to_f64(&e0),
            4.0 * to_f64(&e0),
            up.lower_f64(),
            up.upper_f64(),
            to_f64(&e1),
            4.0 * to_f64(&e1),
        ),
    );
}

#[test]
fn criterion_11_property_suites() {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_dendrite"))
        .args(["verify", "--suite", "all"])
        .env_remove("DENDRITE_MAX_LEVEL")
        .output()
        .expect("binary runs");
    let secs = t.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let summary = stdout.lines().last().unwrap_or("").to_string();
    report(
        11,
        "verify --suite all is green in under 5 minutes",
        out.status.success() && secs < 300.0,
        &format!("{summary}, exit {:?}, {secs:.1}s", out.status.code()),
    );
}
