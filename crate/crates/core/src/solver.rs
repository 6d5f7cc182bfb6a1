//! Dirichlet problems on level networks.
//!
//! Every network here is a tree, so both the exact and the floating solver
//! use the same two-pass elimination: fold each subtree into an affine map
//! `u_v = α + β·u_parent` from the leaves up, then substitute downwards.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;

use num_traits::Zero;

use crate::addressing::VertexId;
use crate::error::{Error, Result};
use crate::graph::{BallRegion, LevelGraph, Network, NO_PARENT};
use crate::rational::{fmt_f64, fmt_rational, Rational, Scalar};

/// A function on the vertices of a network (the whole graph or a ball).
#[derive(Debug, Clone)]
pub struct VertexFunction<S> {
    net: Arc<Network>,
    values: Vec<S>,
}

impl<S: Scalar> VertexFunction<S> {
    pub fn new(net: Arc<Network>, values: Vec<S>) -> Self {
        assert_eq!(net.len(), values.len());
        VertexFunction { net, values }
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    /// Value at a local position.
    pub fn at(&self, k: u32) -> &S {
        &self.values[k as usize]
    }

    pub fn get(&self, g: &LevelGraph, x: &VertexId) -> Option<&S> {
        let v = g.index_of(x).ok()?;
        self.net.local(v).map(|k| &self.values[k as usize])
    }

    pub fn value(&self, g: &LevelGraph, x: &VertexId) -> Result<S> {
        self.get(g, x)
            .cloned()
            .ok_or_else(|| Error::VertexNotInGraph(x.to_string(), g.level()))
    }

    pub fn min_max(&self) -> (S, S) {
        let mut lo = self.values[0].clone();
        let mut hi = lo.clone();
        for v in &self.values[1..] {
            if *v < lo {
                lo = v.clone();
            }
            if *v > hi {
                hi = v.clone();
            }
        }
        (lo, hi)
    }

    /// Rows `vertex,value_exact,value_float` ordered by vertex index.
    pub fn write_csv<W: Write>(&self, g: &LevelGraph, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vertex", "value_exact", "value_float"])?;
        let mut order: Vec<u32> = (0..self.net.len() as u32).collect();
        order.sort_by_key(|&k| self.net.global(k));
        for k in order {
            let v = &self.values[k as usize];
            w.write_record([
                g.vertex(self.net.global(k)).to_string(),
                v.exact().map(|r| fmt_rational(&r)).unwrap_or_default(),
                fmt_f64(v.as_f64()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pinned boundary values.
#[derive(Debug, Clone, Default)]
pub struct Constraints {
    pub pinned: Vec<(VertexId, Rational)>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pin(mut self, x: VertexId, value: Rational) -> Self {
        self.pinned.push((x, value));
        self
    }

    pub fn pin_all(mut self, xs: impl IntoIterator<Item = VertexId>, value: &Rational) -> Self {
        self.pinned.extend(xs.into_iter().map(|x| (x, value.clone())));
        self
    }
}

/// Tree elimination on a network in local coordinates.
///
/// `pins` fix values, `sources` add a mass term `m_v` to the equation
/// `Σ_w g_vw (u_v - u_w) = m_v` at free vertices. Free components without
/// a pin (possible only when `pins` is empty) are set to zero.
pub fn solve_network<S: Scalar>(
    net: &Network,
    cond: &[S],
    pins: &[(u32, S)],
    sources: &[(u32, S)],
) -> Vec<S> {
    let n = net.len();
    let parents = net.parents();
    let classes = net.classes();
    let mut pinned = vec![false; n];
    let mut num = vec![S::zero(); n];
    let mut den = vec![S::zero(); n];
    for (k, m) in sources {
        num[*k as usize] = num[*k as usize].clone() + m.clone();
    }
    for (k, val) in pins {
        pinned[*k as usize] = true;
        num[*k as usize] = val.clone();
    }
    // upward pass: num/den become α/β
    for k in (0..n).rev() {
        let p = parents[k];
        if pinned[k] {
            den[k] = S::zero();
        } else if p == NO_PARENT {
            num[k] = if den[k].is_zero() {
                S::zero()
            } else {
                num[k].clone() / den[k].clone()
            };
            den[k] = S::zero();
        } else {
            let g = cond[classes[k] as usize].clone();
            let d = g.clone() + den[k].clone();
            num[k] = num[k].clone() / d.clone();
            den[k] = g / d;
        }
        if p != NO_PARENT {
            let p = p as usize;
            if !pinned[p] {
                let g = cond[classes[k] as usize].clone();
                den[p] = den[p].clone() + g.clone() * (S::one() - den[k].clone());
                num[p] = num[p].clone() + g * num[k].clone();
            }
        }
    }
    // downward pass
    for k in 0..n {
        let p = parents[k];
        if p != NO_PARENT && !den[k].is_zero() {
            let up = num[p as usize].clone();
            num[k] = num[k].clone() + den[k].clone() * up;
        }
    }
    num
}

fn energy_on<S: Scalar>(net: &Network, cond: &[S], values: &[S]) -> S {
    let parents = net.parents();
    let classes = net.classes();
    let mut e = S::zero();
    for k in 1..net.len() {
        let p = parents[k];
        if p == NO_PARENT {
            continue;
        }
        let d = values[k].clone() - values[p as usize].clone();
        e = e + cond[classes[k] as usize].clone() * d.clone() * d;
    }
    e
}

fn local_pins<S: Scalar>(g: &LevelGraph, net: &Network, pinned: &[(VertexId, Rational)]) -> Result<Vec<(u32, S)>> {
    pinned
        .iter()
        .map(|(x, val)| {
            let v = g.index_of(x)?;
            let k = net
                .local(v)
                .ok_or_else(|| Error::VertexNotInGraph(x.to_string(), g.level()))?;
            Ok((k, S::from_rational(val)))
        })
        .collect()
}

/// Energy minimizer on the whole level graph with the given pinned values.
pub fn solve_dirichlet<S: Scalar>(g: &LevelGraph, c: &Constraints) -> Result<VertexFunction<S>> {
    if c.pinned.is_empty() {
        return Err(Error::EmptyConstraints);
    }
    let net = g.network();
    let pins = local_pins(g, &net, &c.pinned)?;
    let values = solve_network(&net, &g.conductance_table::<S>(), &pins, &[]);
    Ok(VertexFunction::new(net, values))
}

/// `Σ_edges c (Δf)^2`.
pub fn dirichlet_energy<S: Scalar>(g: &LevelGraph, f: &VertexFunction<S>) -> S {
    energy_on(&f.net, &g.conductance_table::<S>(), &f.values)
}

/// `1 / min{E(u) : u|A = 0, u|B = 1}`.
pub fn effective_resistance<S: Scalar>(g: &LevelGraph, a: &[VertexId], b: &[VertexId]) -> Result<S> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyConstraints);
    }
    let set: HashSet<&VertexId> = a.iter().collect();
    if let Some(x) = b.iter().find(|x| set.contains(x)) {
        return Err(Error::OverlappingSets(x.to_string()));
    }
    let c = Constraints::new()
        .pin_all(a.iter().cloned(), &Rational::zero())
        .pin_all(b.iter().cloned(), &num_traits::One::one());
    let u = solve_dirichlet::<S>(g, &c)?;
    Ok(S::one() / dirichlet_energy(g, &u))
}

/// Potential equal to 1 at `x`, 0 on `grounded`, harmonic elsewhere, with
/// the resistance `R(x, grounded) = 1 / E(ψ)`.
pub fn equilibrium_potential<S: Scalar>(
    g: &LevelGraph,
    x: &VertexId,
    grounded: &[VertexId],
) -> Result<(VertexFunction<S>, S)> {
    if grounded.contains(x) {
        return Err(Error::OverlappingSets(x.to_string()));
    }
    if grounded.is_empty() {
        return Err(Error::EmptyConstraints);
    }
    let c = Constraints::new()
        .pin(x.clone(), num_traits::One::one())
        .pin_all(grounded.iter().cloned(), &Rational::zero());
    let psi = solve_dirichlet::<S>(g, &c)?;
    let r = S::one() / dirichlet_energy(g, &psi);
    Ok((psi, r))
}

/// Equilibrium potential of `x` against the frontier of a ball.
pub fn ball_equilibrium<S: Scalar>(
    g: &LevelGraph,
    ball: &BallRegion,
    x: &VertexId,
) -> Result<(VertexFunction<S>, S)> {
    let k = ball
        .local_of(x, g)
        .filter(|&k| ball.is_interior(k))
        .ok_or_else(|| Error::InvalidParameter(format!("{x} is not interior to the ball")))?;
    let mut pins: Vec<(u32, S)> = ball.frontier().iter().map(|&f| (f, S::zero())).collect();
    pins.push((k, S::one()));
    if pins.len() == 1 {
        return Err(Error::InvalidParameter("ball has an empty frontier".into()));
    }
    let cond = g.conductance_table::<S>();
    let net = ball.network().clone();
    let values = solve_network(&net, &cond, &pins, &[]);
    let r = S::one() / energy_on(&net, &cond, &values);
    Ok((VertexFunction::new(net, values), r))
}

/// Harmonic function on a ball with prescribed frontier values (others 0).
pub fn ball_harmonic<S: Scalar>(
    g: &LevelGraph,
    ball: &BallRegion,
    frontier_values: &HashMap<u32, S>,
) -> VertexFunction<S> {
    let pins: Vec<(u32, S)> = ball
        .frontier()
        .iter()
        .map(|&f| (f, frontier_values.get(&f).cloned().unwrap_or_else(S::zero)))
        .collect();
    let net = ball.network().clone();
    let values = solve_network(&net, &g.conductance_table::<S>(), &pins, &[]);
    VertexFunction::new(net, values)
}

/// Discrete Green operator: zero on the frontier and graph Laplacian equal
/// to the vertex mass at every interior vertex. Masses are keyed by local
/// position in the ball.
pub fn green_g1<S: Scalar>(
    g: &LevelGraph,
    ball: &BallRegion,
    masses: &[(u32, S)],
) -> Result<VertexFunction<S>> {
    if let Some((k, _)) = masses.iter().find(|(k, m)| !ball.is_interior(*k) && !m.is_zero()) {
        return Err(Error::InvalidParameter(format!(
            "mass placed on frontier vertex {}",
            ball.vertex(g, *k)
        )));
    }
    let pins: Vec<(u32, S)> = ball.frontier().iter().map(|&f| (f, S::zero())).collect();
    let net = ball.network().clone();
    let values = if pins.is_empty() {
        return Err(Error::InvalidParameter("ball has an empty frontier".into()));
    } else {
        solve_network(&net, &g.conductance_table::<S>(), &pins, masses)
    };
    Ok(VertexFunction::new(net, values))
}
