//! Closed-form harmonic functions and the coefficient tables of the
//! equilibrium potentials at typical points of `B(q0, 2^-n)`.
//!
//! All evaluators work on symbolic addresses: a lattice point `F_ω(q_j)`
//! is evaluated by pushing corner data through the extension maps `A_i`.

use std::fmt;
use std::io::Write;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::addressing::{canonicalize, Corner, VertexId, Word};
use crate::error::{Error, Result};
use crate::graph::LevelGraph;
use crate::rational::{fmt_rational, int, pow2, ratio, to_f64, Rational, Scalar};
use crate::solver::{dirichlet_energy, solve_dirichlet, Constraints, VertexFunction};

/// Corner data in the order `(q1, q2, q3)`.
pub type CornerData = [Rational; 3];

/// Values at the corners of `K_i` of the harmonic function with corner
/// data `a` on `K` (spine-linear, constant off the spine).
pub fn extend(i: u8, s0: &Rational, a: &CornerData) -> CornerData {
    let s2 = Rational::one() - s0;
    let m2 = &s2 * &a[0] + s0 * &a[1];
    let m3 = &s2 * &a[0] + s0 * &a[2];
    match i {
        0 => [a[0].clone(), m2, a[0].clone()],
        1 => [a[0].clone(), a[0].clone(), m3],
        2 => [m2.clone(), a[1].clone(), m2],
        3 => [m3.clone(), m3, a[2].clone()],
        _ => unreachable!("digit out of range"),
    }
}

fn corner_value(a: &CornerData, c: Corner) -> Rational {
    a[c.index() - 1].clone()
}

fn eval_minus(s0: &Rational, data: CornerData, tail: &[u8], c: Corner) -> Rational {
    let a = tail.iter().fold(data, |a, &i| extend(i, s0, &a));
    corner_value(&a, c)
}

fn scaled(k: &Rational, a: [Rational; 3]) -> CornerData {
    a.map(|x| x * k)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HarmonicKind {
    /// `u^-_{a2,a1,a3}`: boundary values `q1 = a1, q2 = a2, q3 = a3`.
    UMinus { a2: Rational, a1: Rational, a3: Rational },
    /// 1 at `q1`, 0 on the bottom Cantor set.
    UDown,
    /// 1 at `q2`, 0 at `q1` and on every `F_{0^m 23}(C)`; needs `s0 = 1/2`.
    UUp,
    /// `u(q2) = a, u(q1) = b, u(F_3(q1)) = c`, zero on `F_3(C)`.
    UPlus { a: Rational, b: Rational, c: Rational },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpec {
    pub kind: HarmonicKind,
    pub s0: Rational,
}

impl HarmonicSpec {
    pub fn new(kind: HarmonicKind, s0: Rational) -> Result<Self> {
        if s0 <= Rational::zero() || s0 >= Rational::one() {
            return Err(Error::InvalidParameter("s0 must lie strictly between 0 and 1".into()));
        }
        if kind == HarmonicKind::UUp && s0 != ratio(1, 2) {
            return Err(Error::Unsupported("the u-up function is only available for s0 = 1/2".into()));
        }
        Ok(HarmonicSpec { kind, s0 })
    }

    pub fn u_minus(a2: Rational, a1: Rational, a3: Rational, s0: Rational) -> Result<Self> {
        Self::new(HarmonicKind::UMinus { a2, a1, a3 }, s0)
    }

    pub fn u_down(s0: Rational) -> Result<Self> {
        Self::new(HarmonicKind::UDown, s0)
    }

    pub fn u_up() -> Self {
        Self::new(HarmonicKind::UUp, ratio(1, 2)).expect("s0 = 1/2 is valid")
    }

    pub fn u_plus(a: Rational, b: Rational, c: Rational, s0: Rational) -> Result<Self> {
        Self::new(HarmonicKind::UPlus { a, b, c }, s0)
    }

    pub fn s2(&self) -> Rational {
        Rational::one() - &self.s0
    }

    /// `λ = s2 / 2`, the value of `u↓` at `F_0(q2)`.
    pub fn lambda(&self) -> Rational {
        self.s2() / int(2)
    }

    /// Image under the reflection `0 <-> 1`, `2 <-> 3`, when it is again
    /// one of the supported kinds.
    pub fn reflect(&self) -> Option<HarmonicSpec> {
        let kind = match &self.kind {
            HarmonicKind::UMinus { a2, a1, a3 } => {
                HarmonicKind::UMinus { a2: a3.clone(), a1: a1.clone(), a3: a2.clone() }
            }
            HarmonicKind::UDown => HarmonicKind::UDown,
            _ => return None,
        };
        Some(HarmonicSpec { kind, s0: self.s0.clone() })
    }

    fn eval_down(&self, w: &[u8], c: Corner) -> Rational {
        let lambda = self.lambda();
        let mut scale = Rational::one();
        for (pos, &d) in w.iter().enumerate() {
            match d {
                2 | 3 => scale *= &lambda,
                0 => {
                    let data = scaled(&scale, [int(1), lambda.clone(), int(1)]);
                    return eval_minus(&self.s0, data, &w[pos + 1..], c);
                }
                _ => {
                    let data = scaled(&scale, [int(1), int(1), lambda.clone()]);
                    return eval_minus(&self.s0, data, &w[pos + 1..], c);
                }
            }
        }
        match c {
            Corner::Q1 => scale,
            _ => Rational::zero(),
        }
    }

    fn eval_plus(&self, a: &Rational, b: &Rational, c: &Rational, w: &[u8], corner: Corner) -> Rational {
        let s0 = &self.s0;
        let mid = s0 * a + self.s2() * b;
        match w.first() {
            None => match corner {
                Corner::Q1 => b.clone(),
                Corner::Q2 => a.clone(),
                Corner::Q3 => Rational::zero(),
            },
            Some(0) => eval_minus(s0, [b.clone(), mid, b.clone()], &w[1..], corner),
            Some(1) => eval_minus(s0, [b.clone(), b.clone(), c.clone()], &w[1..], corner),
            Some(2) => eval_minus(s0, [mid.clone(), a.clone(), mid], &w[1..], corner),
            Some(_) => c * self.eval_down(&w[1..], corner),
        }
    }

    fn eval_up(&self, w: &[u8], c: Corner) -> Rational {
        let m = w.iter().take_while(|&&d| d == 0).count();
        let a = |m: i64| pow2(-2 * (m + 1));
        match w.get(m) {
            None => match c {
                Corner::Q2 => a(m as i64 - 1),
                _ => Rational::zero(),
            },
            Some(2) => {
                let (am, prev) = (a(m as i64), a(m as i64 - 1));
                let c3 = &am / int(4);
                self.eval_plus(&prev, &am, &c3, &w[m + 1..], c)
            }
            Some(_) => Rational::zero(),
        }
    }
}

/// Value of the closed-form function at a lattice point.
pub fn eval_closed(spec: &HarmonicSpec, v: &VertexId) -> Result<Rational> {
    let w = v.word().digits();
    let c = v.corner();
    Ok(match &spec.kind {
        HarmonicKind::UMinus { a2, a1, a3 } => {
            eval_minus(&spec.s0, [a1.clone(), a2.clone(), a3.clone()], w, c)
        }
        HarmonicKind::UDown => spec.eval_down(w, c),
        HarmonicKind::UUp => spec.eval_up(w, c),
        HarmonicKind::UPlus { a, b, c: c3 } => spec.eval_plus(a, b, c3, w, c),
    })
}

/// Exact energy of the closed-form function.
pub fn energy_closed(spec: &HarmonicSpec) -> Rational {
    let s0inv = spec.s0.recip();
    match &spec.kind {
        HarmonicKind::UMinus { a2, a1, a3 } => {
            let d2 = a1 - a2;
            let d3 = a1 - a3;
            &d2 * &d2 + &d3 * &d3
        }
        HarmonicKind::UDown => s0inv + int(1),
        HarmonicKind::UUp => ratio(3, 2),
        HarmonicKind::UPlus { a, b, c } => {
            let ab = a - b;
            let bc = b - c;
            &ab * &ab + &s0inv * &bc * &bc + spec.s2().recip() * (&s0inv + int(1)) * c * c
        }
    }
}

/// Lattice points `F_{prefix ω}(q2)`, `F_{prefix ω}(q3)`, `ω ∈ {2,3}^depth`:
/// the level-`L` trace of the Cantor piece `F_prefix(C)`.
fn cantor_points(prefix: &[u8], depth: u32) -> Vec<VertexId> {
    let mut out = Vec::with_capacity(2 << depth);
    for bits in 0u64..(1 << depth) {
        let mut w = prefix.to_vec();
        w.extend((0..depth).rev().map(|b| 2 + ((bits >> b) & 1) as u8));
        let w = Word::from_digits(&w);
        out.push(canonicalize(&w, Corner::Q2));
        out.push(canonicalize(&w, Corner::Q3));
    }
    out
}

/// Boundary conditions whose level-`L` energy minimizer approximates the
/// closed-form function; the zero sets are replaced by their lattice points.
pub fn discrete_constraints(spec: &HarmonicSpec, level: u32) -> Constraints {
    let zero = Rational::zero();
    match &spec.kind {
        HarmonicKind::UMinus { a2, a1, a3 } => Constraints::new()
            .pin(VertexId::q1(), a1.clone())
            .pin(VertexId::q2(), a2.clone())
            .pin(VertexId::q3(), a3.clone()),
        HarmonicKind::UDown => {
            Constraints::new().pin(VertexId::q1(), int(1)).pin_all(cantor_points(&[], level), &zero)
        }
        HarmonicKind::UUp => {
            let mut c = Constraints::new().pin(VertexId::q2(), int(1)).pin(VertexId::q1(), zero.clone());
            for m in 0..level.saturating_sub(1) {
                let mut prefix = vec![0u8; m as usize];
                prefix.extend([2, 3]);
                c = c.pin_all(cantor_points(&prefix, level - m - 2), &zero);
            }
            c
        }
        HarmonicKind::UPlus { a, b, c } => {
            let mut k = Constraints::new()
                .pin(VertexId::q2(), a.clone())
                .pin(VertexId::q1(), b.clone());
            if level >= 1 {
                k = k
                    .pin(canonicalize(&Word::from_digits(&[3]), Corner::Q1), c.clone())
                    .pin_all(cantor_points(&[3], level - 1), &zero);
            }
            k
        }
    }
}

/// Level-`L` energy minimizer under [`discrete_constraints`] and its energy.
pub fn discrete_approximation<S: Scalar>(
    spec: &HarmonicSpec,
    g: &LevelGraph,
) -> Result<(VertexFunction<S>, S)> {
    if g.s0() != &spec.s0 {
        return Err(Error::InvalidParameter(format!(
            "graph s0 = {} differs from the function's s0 = {}",
            g.s0(),
            spec.s0
        )));
    }
    let f = solve_dirichlet::<S>(g, &discrete_constraints(spec, g.level()))?;
    let e = dirichlet_energy(g, &f);
    Ok((f, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PsiCase {
    /// Source at `x_{m0,k0} = F_{0 2^{n-1} 0^{m0} 2 3^{k0}}(q1)`.
    Xmk { n: u32, m0: u32, k0: u32 },
    /// Source at `y_{k0} = F_{2 0^{n-1} 2^{k0}}(q1)`, `k0 >= 1`.
    Yk { n: u32, k0: u32 },
}

impl fmt::Display for PsiCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiCase::Xmk { .. } => f.write_str("xmk"),
            PsiCase::Yk { .. } => f.write_str("yk"),
        }
    }
}

/// Which coefficient family an entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coef {
    /// `a_{m,k}`: value at `x_{m,k}`; `a_{-1,0}` is the value at `q0`.
    A,
    /// `a'_{m0,k} = a_{m0,k} / 4`: value at `F_{... 3^k 2}(q1)`.
    APrime,
    /// `b_k`: value at `y_k`, with `b_0` the value at `q0`.
    B,
    /// `b'_k = b_k / 4`: value at `F_{2 0^{n-1} 2^k 3}(q1)`.
    BPrime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiEntry {
    pub coef: Coef,
    pub m: i64,
    pub k: i64,
    #[serde(serialize_with = "ser_rational")]
    pub value: Rational,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_rational(r))
}

impl PsiEntry {
    pub fn label(&self) -> String {
        match self.coef {
            Coef::A => format!("a({},{})", self.m, self.k),
            Coef::APrime => format!("a'({},{})", self.m, self.k),
            Coef::B => format!("b({})", self.k),
            Coef::BPrime => format!("b'({})", self.k),
        }
    }

    /// The lattice point where the entry is the potential's value.
    pub fn point(&self, case: PsiCase) -> VertexId {
        let n = match case {
            PsiCase::Xmk { n, .. } | PsiCase::Yk { n, .. } => n as usize,
        };
        let mut w = Vec::new();
        match self.coef {
            Coef::A if self.m < 0 => return VertexId::q0(),
            Coef::A | Coef::APrime => {
                w.push(0);
                w.extend(std::iter::repeat_n(2, n - 1));
                w.extend(std::iter::repeat_n(0, self.m as usize));
                w.push(2);
                w.extend(std::iter::repeat_n(3, self.k as usize));
                if self.coef == Coef::APrime {
                    w.push(2);
                }
            }
            Coef::B | Coef::BPrime => {
                w.push(2);
                w.extend(std::iter::repeat_n(0, n - 1));
                w.extend(std::iter::repeat_n(2, self.k as usize));
                if self.coef == Coef::BPrime {
                    w.push(3);
                }
            }
        }
        canonicalize(&Word::from_digits(&w), Corner::Q1)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PsiCoefficients {
    pub case: PsiCase,
    pub entries: Vec<PsiEntry>,
}

/// `24(1 + 2^-n) 2^j - (3 - 4·2^-n) 4^-j`: the decaying-free solution of
/// `4c_{j+1} - 9c_j + 2c_{j-1} = 0` that satisfies the balance at `q0`.
fn spine_profile(n: u32, j: i64) -> Rational {
    let e = pow2(-(n as i64));
    int(24) * (int(1) + &e) * pow2(j) - (int(3) - int(4) * &e) * pow2(-2 * j)
}

/// `3(1 + 2^-n) 2^k - (3 - 4·2^-n) 4^-k`: the same recurrence with the
/// balance `b_0 (3·2^n + 4) = 4 b_1` at `q0` seen from `y_1`.
fn lower_profile(n: u32, k: i64) -> Rational {
    let e = pow2(-(n as i64));
    int(3) * (int(1) + &e) * pow2(k) - (int(3) - int(4) * &e) * pow2(-2 * k)
}

impl PsiCoefficients {
    pub fn get(&self, coef: Coef, m: i64, k: i64) -> Option<&Rational> {
        self.entries
            .iter()
            .find(|e| e.coef == coef && e.m == m && e.k == k)
            .map(|e| &e.value)
    }

    /// `R(source, B_n^c)` implied by the table: the current leaving the
    /// source through its inward edge plus its grounded outward load.
    pub fn resistance(&self) -> Rational {
        match self.case {
            PsiCase::Xmk { n, m0, k0 } => {
                let j = (m0 + k0) as i64;
                let inward = if k0 == 0 {
                    self.get(Coef::A, m0 as i64 - 1, 0)
                } else {
                    self.get(Coef::A, m0 as i64, k0 as i64 - 1)
                }
                .expect("table holds the inward neighbour");
                let g = pow2(n as i64 + j + 1);
                (g * (int(1) - inward + int(3))).recip()
            }
            PsiCase::Yk { n, k0 } => {
                let inward = self.get(Coef::B, 0, k0 as i64 - 1).expect("table holds b_{k0-1}");
                let g = pow2((n + k0) as i64);
                (g * (int(1) - inward + int(3))).recip()
            }
        }
    }

    /// Rows `case,n,m0,k0,index,value_exact,value_float`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["case", "n", "m0", "k0", "index", "value_exact", "value_float"])?;
        let (n, m0, k0) = match self.case {
            PsiCase::Xmk { n, m0, k0 } => (n, m0.to_string(), k0),
            PsiCase::Yk { n, k0 } => (n, String::new(), k0),
        };
        for e in &self.entries {
            w.write_record([
                self.case.to_string(),
                n.to_string(),
                m0.clone(),
                k0.to_string(),
                e.label(),
                fmt_rational(&e.value),
                crate::rational::fmt_f64(to_f64(&e.value)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact values of the equilibrium potential of a typical point at the
/// typical points on its way to `q0` (`s0 = 1/2`).
///
/// Along the upper spine `x_{0,0}, ..., x_{m0,0}` and then the chain
/// `x_{m0,1}, ..., x_{m0,k0}` every node sees the same local network up to
/// the factor `2^{n+j}`, so both runs are one solution `c_j` of the
/// recurrence with `j = m + k`.
pub fn psi_coefficients(case: PsiCase) -> Result<PsiCoefficients> {
    let mut entries = Vec::new();
    let entry = |coef, m: i64, k: i64, value| PsiEntry { coef, m, k, value };
    match case {
        PsiCase::Xmk { n, m0, k0 } => {
            if n == 0 {
                return Err(Error::InvalidParameter("ball index n must be at least 1".into()));
            }
            let top = spine_profile(n, (m0 + k0) as i64);
            let c = |j: i64| spine_profile(n, j) / &top;
            for m in -1..=m0 as i64 {
                entries.push(entry(Coef::A, m, 0, c(m)));
            }
            for m in 0..m0 as i64 {
                entries.push(entry(Coef::A, m, 1, c(m) / int(4)));
            }
            if k0 == 0 {
                entries.push(entry(Coef::A, m0 as i64, 1, ratio(1, 4)));
            }
            for k in 1..=k0 as i64 {
                entries.push(entry(Coef::A, m0 as i64, k, c(m0 as i64 + k)));
            }
            for k in 1..k0 as i64 {
                entries.push(entry(Coef::APrime, m0 as i64, k, c(m0 as i64 + k) / int(4)));
            }
        }
        PsiCase::Yk { n, k0 } => {
            if n == 0 || k0 == 0 {
                return Err(Error::InvalidParameter("the y-chain needs n >= 1 and k0 >= 1".into()));
            }
            let top = lower_profile(n, k0 as i64);
            for k in 0..=k0 as i64 {
                entries.push(entry(Coef::B, 0, k, lower_profile(n, k) / &top));
            }
            for k in 0..k0 as i64 {
                entries.push(entry(Coef::BPrime, 0, k, lower_profile(n, k) / &top / int(4)));
            }
        }
    }
    Ok(PsiCoefficients { case, entries })
}

/// The three-term recurrence residual `4c_{j+1} - 9c_j + 2c_{j-1}`.
pub fn recurrence_residual(prev: &Rational, cur: &Rational, next: &Rational) -> Rational {
    int(4) * next - int(9) * cur + int(2) * prev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vid(s: &str) -> VertexId {
        s.parse().unwrap()
    }

    fn half() -> Rational {
        ratio(1, 2)
    }

    #[test]
    fn closed_values() {
        let u = HarmonicSpec::u_minus(int(0), int(1), int(0), half()).unwrap();
        assert_eq!(eval_closed(&u, &VertexId::q0()).unwrap(), ratio(1, 2));
        let down = HarmonicSpec::u_down(half()).unwrap();
        assert_eq!(eval_closed(&down, &vid("23:1")).unwrap(), ratio(1, 16));
        assert_eq!(eval_closed(&down, &VertexId::q0()).unwrap(), ratio(1, 4));
        let up = HarmonicSpec::u_up();
        assert_eq!(eval_closed(&up, &vid("002:1")).unwrap(), ratio(1, 64));
        assert_eq!(eval_closed(&up, &VertexId::q2()).unwrap(), int(1));
        assert_eq!(eval_closed(&up, &VertexId::q1()).unwrap(), int(0));
        assert_eq!(eval_closed(&up, &vid("0023:1")).unwrap(), ratio(1, 256));
    }

    #[test]
    fn closed_energies() {
        assert_eq!(energy_closed(&HarmonicSpec::u_down(half()).unwrap()), int(3));
        assert_eq!(energy_closed(&HarmonicSpec::u_down(ratio(1, 3)).unwrap()), int(4));
        assert_eq!(energy_closed(&HarmonicSpec::u_up()), ratio(3, 2));
        let plus = HarmonicSpec::u_plus(int(1), int(1), int(0), half()).unwrap();
        assert_eq!(energy_closed(&plus), int(2));
    }

    #[test]
    fn u_up_rejects_other_ratios() {
        assert!(matches!(
            HarmonicSpec::new(HarmonicKind::UUp, ratio(1, 3)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn upper_chain_example() {
        let t = psi_coefficients(PsiCase::Xmk { n: 1, m0: 1, k0: 0 }).unwrap();
        assert_eq!(t.get(Coef::A, 0, 0).unwrap(), &ratio(20, 41));
        assert_eq!(t.get(Coef::A, 1, 0).unwrap(), &int(1));
    }

    #[test]
    fn lower_chain_example() {
        let t = psi_coefficients(PsiCase::Yk { n: 1, k0: 1 }).unwrap();
        assert_eq!(t.get(Coef::B, 0, 0).unwrap(), &ratio(2, 5));
        assert_eq!(t.get(Coef::B, 0, 1).unwrap(), &int(1));
    }

    #[test]
    fn normalization_and_recurrence() {
        for n in 1..=3 {
            for m0 in 0..=3 {
                for k0 in 0..=3 {
                    let case = PsiCase::Xmk { n, m0, k0 };
                    let t = psi_coefficients(case).unwrap();
                    assert_eq!(t.get(Coef::A, m0 as i64, k0 as i64).unwrap(), &int(1));
                    assert!(t.entries.iter().all(|e| e.value >= int(0) && e.value <= int(1)));
                    for m in 0..m0 as i64 {
                        let r = recurrence_residual(
                            t.get(Coef::A, m - 1, 0).unwrap(),
                            t.get(Coef::A, m, 0).unwrap(),
                            t.get(Coef::A, m + 1, 0).unwrap(),
                        );
                        assert!(r.is_zero());
                    }
                }
            }
        }
    }

    #[test]
    fn q0_resistance_from_table() {
        // x_{0,0} has the same table shape; R(q0) follows from the spine ends
        let t = psi_coefficients(PsiCase::Xmk { n: 1, m0: 0, k0: 0 }).unwrap();
        assert!(t.resistance() > Rational::zero());
    }

    #[test]
    fn entry_points() {
        let case = PsiCase::Xmk { n: 2, m0: 1, k0: 1 };
        let e = PsiEntry { coef: Coef::A, m: 1, k: 1, value: int(1) };
        assert_eq!(e.point(case), vid("02023:1"));
        let case = PsiCase::Yk { n: 2, k0: 1 };
        let e = PsiEntry { coef: Coef::B, m: 0, k: 1, value: int(1) };
        assert_eq!(e.point(case), vid("202:1"));
        let e = PsiEntry { coef: Coef::B, m: 0, k: 0, value: int(1) };
        assert_eq!(e.point(case), VertexId::q0());
    }

    #[test]
    fn csv_columns() {
        let t = psi_coefficients(PsiCase::Yk { n: 1, k0: 2 }).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case,n,m0,k0,index,value_exact,value_float\nyk,1,,2,b(0),"));
    }

    #[test]
    fn discrete_energies_increase_towards_closed_values() {
        for spec in [HarmonicSpec::u_down(half()).unwrap(), HarmonicSpec::u_up()] {
            let exact = to_f64(&energy_closed(&spec));
            let mut prev = 0.0;
            for level in 2..=7 {
                let g = LevelGraph::new(level, half()).unwrap();
                let (_, e) = discrete_approximation::<Rational>(&spec, &g).unwrap();
                let e = to_f64(&e);
                assert!(e >= prev && e <= exact + 1e-12, "{level}: {e}");
                prev = e;
            }
        }
    }

    #[test]
    fn u_minus_is_reproduced_exactly() {
        let spec = HarmonicSpec::u_minus(int(2), int(-1), ratio(1, 3), ratio(1, 3)).unwrap();
        let g = LevelGraph::new(4, ratio(1, 3)).unwrap();
        let (f, e) = discrete_approximation::<Rational>(&spec, &g).unwrap();
        assert_eq!(e, energy_closed(&spec));
        for v in 0..g.vertex_count() as u32 {
            let x = g.vertex(v);
            assert_eq!(f.value(&g, &x).unwrap(), eval_closed(&spec, &x).unwrap());
        }
    }
}
