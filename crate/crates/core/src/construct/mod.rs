//! Builders of default times with prescribed conditional law: the Cox
//! threshold time, the stopping-time family, and the general builder that
//! splits a target increasing process into shocks and a smooth part.

mod family;

pub use family::{cox_construct, family_construct};

use serde::{Deserialize, Serialize};

use crate::check::Check;
use crate::enlargement::EnlargedSpace;
use crate::error::{contract, contract_at, Error, Node, Result};
use crate::kernel::{indicator, Coord, Process, RandomTime, ScenarioTree};
use crate::scalar::Scalar;
use crate::stopping::ShockDecomposition;

/// How the smooth part of the target is turned into the hazard process `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionMode {
    /// Product recursion; reproduces the target law exactly on the grid.
    DiscreteExact,
    /// `a_n = 1 - exp(-Σ ΔA^c_k / (p^0_{k-1} - A^c_{k-1}))`, exact only in
    /// the continuous limit.
    Exponential,
}

/// Discretization of the uniform threshold `Θ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaGrid {
    /// `m` mid-point levels of mass `1/m`.
    Uniform(usize),
    /// Cells between consecutive distinct values of the hazard process (and
    /// 0, 1), represented by their mid-points; `P(Θ < x) = x` holds exactly
    /// at every value the process takes.
    Breakpoints,
}

/// Target increasing process on a root tree, with designated shock times
/// whose jumps are carried by those times.
#[derive(Debug, Clone)]
pub struct ConstructionSpec<S: Scalar> {
    pub tree: ScenarioTree<S>,
    pub a: Process<S>,
    pub shocks: Vec<RandomTime>,
}

/// Quantities derived from a validated spec.
#[derive(Debug, Clone)]
pub struct SpecParts<S: Scalar> {
    /// Jump `ΔA_{T^i}` per shock (zero where `T^i = ∞`).
    pub jumps: Vec<Vec<S>>,
    /// Smooth part `A^c = A - Σ ΔA_{T^i} 1_{T^i ≤ ·}`.
    pub ac: Process<S>,
}

impl<S: Scalar> ConstructionSpec<S> {
    pub fn validate(&self) -> Result<SpecParts<S>> {
        let tree = &self.tree;
        if tree.has_theta() || tree.n_base_outcomes() != tree.n_outcomes() {
            return Err(contract("construction expects a root tree without extra coordinates"));
        }
        let n_out = tree.n_outcomes();
        let horizon = tree.horizon();
        if self.a.n_outcomes() != n_out || self.a.horizon() != horizon {
            return Err(Error::Shape("target process does not match tree".into()));
        }
        let f = tree.f();
        if !self.a.has_level(tree.filtration(), crate::kernel::Level::Optional, f.tol.mart) {
            return Err(contract("target process is not adapted"));
        }
        for w in 0..n_out {
            if !self.a.get(0, w).is_zero() {
                return Err(contract_at(0, w, "target must start at 0"));
            }
            if *self.a.get(horizon, w) > S::one() {
                return Err(contract_at(horizon, w, "target exceeds 1"));
            }
        }
        for (i, t) in self.shocks.iter().enumerate() {
            t.check_stopping_time(tree.filtration(), &format!("shock {}", i + 1))?;
            for j in 0..i {
                if (0..n_out).any(|w| t.is_finite(w) && t.value(w) == self.shocks[j].value(w)) {
                    return Err(contract(format!("shocks {} and {} coincide", j + 1, i + 1)));
                }
            }
        }
        let jumps: Vec<Vec<S>> = self
            .shocks
            .iter()
            .map(|t| {
                (0..n_out)
                    .map(|w| t.value(w).map_or(S::zero(), |k| self.a.increment(k, w)))
                    .collect()
            })
            .collect();
        let mut ac = self.a.clone();
        for n in 0..=horizon {
            for w in 0..n_out {
                let mut v = self.a.get(n, w).clone();
                for (i, t) in self.shocks.iter().enumerate() {
                    if t.le(w, n) {
                        v = v - jumps[i][w].clone();
                    }
                }
                ac.set(n, w, v);
            }
        }
        for n in 1..=horizon {
            for w in 0..n_out {
                let d = ac.increment(n, w);
                if d < S::zero() {
                    return Err(contract_at(n, w, "target is not increasing"));
                }
                if !d.is_zero() && self.shocks.iter().any(|t| t.is(w, n)) {
                    return Err(contract_at(
                        n,
                        w,
                        "smooth part moves at a shock time; designate the whole jump to the shock",
                    ));
                }
            }
        }
        Ok(SpecParts { jumps, ac })
    }
}

/// Internals of the general construction, all on the root tree.
#[derive(Debug, Clone)]
pub struct Internals<S: Scalar> {
    pub mode: ConstructionMode,
    pub ac: Process<S>,
    /// `p^i_n = E[ΔA_{T^i} | F_n]` per shock.
    pub p: Vec<Process<S>>,
    /// `p^0_n = E[A^c_N | F_n]`.
    pub p0: Process<S>,
    /// `E[1 - A_N | F_n]`, the mass left beyond the horizon.
    pub p_inf: Process<S>,
    pub a: Process<S>,
    /// Explosion time: first `n` with `A^c_n = p^0_n`.
    pub nu: RandomTime,
    /// Running conditional law of the label, in label order
    /// `[idiosyncratic, shock 1, ..., shock k, beyond horizon]`.
    pub q: Vec<Process<S>>,
    /// `(p^0_n - A^c_{n-1}) / (1 - a_{n-1})`.
    pub q_tilde: Process<S>,
}

/// A constructed default time on an extended space.
#[derive(Debug, Clone)]
pub struct BuiltTime<S: Scalar> {
    pub space: EnlargedSpace<S>,
    /// Designated shocks lifted to the extended space.
    pub shocks: Vec<RandomTime>,
    /// The idiosyncratic time (∞ where absent).
    pub t0: RandomTime,
    pub internals: Option<Internals<S>>,
}

impl<S: Scalar> BuiltTime<S> {
    /// `P(τ ≤ n | F_n)` on the extended space.
    pub fn conditional_law(&self) -> Result<Process<S>> {
        let es = &self.space;
        let f = es.f();
        let rows = (0..=es.horizon())
            .map(|n| {
                let ev: Vec<bool> = (0..es.n_outcomes()).map(|w| es.tau().le(w, n)).collect();
                f.cond_exp(&indicator(&ev), n)
            })
            .collect::<Result<Vec<_>>>()?;
        Process::new(rows)
    }

    /// Compares `P(τ ≤ n | F_n)` with a target given on the root tree.
    pub fn law_check(&self, target: &Process<S>, tol: f64) -> Result<Check> {
        let lifted = self.space.tree().lift_process(target);
        Ok(Check::processes("construct/conditional law", &self.conditional_law()?, &lifted, tol))
    }

    /// Shock decomposition with the designated shocks.
    pub fn decomposition(&self) -> Result<ShockDecomposition> {
        ShockDecomposition::new(&self.space, self.shocks.clone())
    }
}

fn cond_process<S: Scalar>(tree: &ScenarioTree<S>, x: &[S]) -> Result<Process<S>> {
    let rows = (0..=tree.horizon())
        .map(|n| tree.cond_exp(x, n))
        .collect::<Result<Vec<_>>>()?;
    Process::new(rows)
}

/// Builds the hazard process `a` and its explosion time `ν` from the
/// smooth part `A^c` and `p^0`.
pub fn build_a<S: Scalar>(
    ac: &Process<S>,
    p0: &Process<S>,
    mode: ConstructionMode,
) -> (Process<S>, RandomTime) {
    let horizon = ac.horizon();
    let n_out = ac.n_outcomes();
    let mut a = Process::<S>::zeros(horizon, n_out);
    let mut nu = vec![None; n_out];
    for w in 0..n_out {
        let mut expo = S::zero();
        for n in 0..=horizon {
            if nu[w].is_none() && ac.get(n, w) == p0.get(n, w) {
                nu[w] = Some(n);
            }
            if n == 0 {
                continue;
            }
            let prev = a.get(n - 1, w).clone();
            let next = match mode {
                ConstructionMode::DiscreteExact => {
                    let den = p0.get(n, w).clone() - ac.get(n - 1, w).clone();
                    if den.is_zero() {
                        prev
                    } else {
                        let num = p0.get(n, w).clone() - ac.get(n, w).clone();
                        S::one() - (S::one() - prev) * num / den
                    }
                }
                ConstructionMode::Exponential => {
                    let den = p0.get(n - 1, w).clone() - ac.get(n - 1, w).clone();
                    if !den.is_zero() && nu[w].is_none_or(|v| n <= v) {
                        expo = expo + ac.increment(n, w) / den;
                    }
                    S::one() - (-expo.clone()).exp()
                }
            };
            a.set(n, w, next);
        }
    }
    (a, RandomTime::new(nu))
}

/// Running values `q_n = p_0 + Σ_{k≤n} Δp_k / (1 - a_{k-1})`; increments
/// where `1 - a_{k-1} = 0` are dropped (the threshold time has passed).
pub fn running_law<S: Scalar>(p: &Process<S>, a: &Process<S>) -> Process<S> {
    let mut q = Process::<S>::zeros(p.horizon(), p.n_outcomes());
    for w in 0..p.n_outcomes() {
        q.set(0, w, p.get(0, w).clone());
        for n in 1..=p.horizon() {
            let s = S::one() - a.get(n - 1, w).clone();
            let mut v = q.get(n - 1, w).clone();
            if !s.is_zero() {
                v = v + p.increment(n, w) / s;
            }
            q.set(n, w, v);
        }
    }
    q
}

/// Values of a process, sorted and deduplicated, with 0 and 1 added: the
/// breakpoints of the threshold grid.
pub fn theta_breakpoints<S: Scalar>(x: &Process<S>) -> (Vec<S>, Vec<S>) {
    let mut pts: Vec<S> = x.rows().iter().flatten().cloned().collect();
    pts.push(S::zero());
    pts.push(S::one());
    pts.retain(|v| *v >= S::zero() && *v <= S::one());
    pts.sort_by(|a, b| a.partial_cmp(b).expect("comparable values"));
    pts.dedup();
    let two = S::one() + S::one();
    let mut values = Vec::new();
    let mut masses = Vec::new();
    for w in pts.windows(2) {
        let m = w[1].clone() - w[0].clone();
        if !m.is_zero() {
            values.push((w[0].clone() + w[1].clone()) / two.clone());
            masses.push(m);
        }
    }
    (values, masses)
}

pub(crate) fn extend_theta<S: Scalar>(
    tree: &ScenarioTree<S>,
    grid: &ThetaGrid,
    driver: &Process<S>,
) -> Result<ScenarioTree<S>> {
    match grid {
        ThetaGrid::Uniform(m) => tree.extend_with_uniform(*m),
        ThetaGrid::Breakpoints => {
            let (v, m) = theta_breakpoints(driver);
            tree.extend_with_theta(v, m)
        }
    }
}

/// The general construction: `τ = T^S` with `T^0 = inf{n : a_n > Θ}` and
/// the label `S` drawn from the running law sampled at `T^0 ∧ N`.
pub fn construct_tau<S: Scalar>(
    spec: &ConstructionSpec<S>,
    mode: ConstructionMode,
    grid: &ThetaGrid,
) -> Result<BuiltTime<S>> {
    let parts = spec.validate()?;
    let tree = &spec.tree;
    let horizon = tree.horizon();
    let n_out = tree.n_outcomes();
    let k = spec.shocks.len();
    let p = parts
        .jumps
        .iter()
        .map(|j| cond_process(tree, j))
        .collect::<Result<Vec<_>>>()?;
    let p0 = cond_process(tree, parts.ac.at(horizon))?;
    let rest: Vec<S> = spec
        .a
        .at(horizon)
        .iter()
        .map(|x| S::one() - x.clone())
        .collect();
    let p_inf = cond_process(tree, &rest)?;
    let (a, nu) = build_a(&parts.ac, &p0, mode);

    let mut q = Vec::with_capacity(k + 2);
    q.push(Process::<S>::zeros(horizon, n_out));
    for pi in p.iter().chain(std::iter::once(&p_inf)) {
        q.push(running_law(pi, &a));
    }
    let mut q_tilde = Process::<S>::zeros(horizon, n_out);
    for n in 0..=horizon {
        for w in 0..n_out {
            let others = q[1..].iter().fold(S::zero(), |s, qi| s + qi.get(n, w).clone());
            q[0].set(n, w, S::one() - others);
            let (prev_ac, prev_a) = if n == 0 {
                (S::zero(), S::zero())
            } else {
                (parts.ac.get(n - 1, w).clone(), a.get(n - 1, w).clone())
            };
            let s = S::one() - prev_a;
            if !s.is_zero() {
                q_tilde.set(n, w, (p0.get(n, w).clone() - prev_ac) / s);
            }
        }
    }

    let ext = extend_theta(tree, grid, &a)?;
    let thetas = ext.theta_values().to_vec();
    let t0_of = |c: &Coord| -> Option<usize> {
        let th = &thetas[c.theta.expect("theta coordinate")];
        (0..=horizon).find(|&n| a.get(n, c.base) > th)
    };
    let tol = if S::EXACT { 0.0 } else { 1e-12 };
    // validate the label law before splitting
    for c in ext.coords() {
        let m = t0_of(c).unwrap_or(horizon).min(horizon);
        let mut total = S::zero();
        for (s, qs) in q.iter().enumerate() {
            let v = qs.get(m, c.base).clone();
            if v.to_f64() < -tol || (S::EXACT && v < S::zero()) {
                return Err(Error::Construction {
                    node: Node { time: m, outcome: c.base },
                    msg: format!("label {} has negative conditional weight {:e}", s, v.to_f64()),
                });
            }
            total = total + v;
        }
        if !total.approx_eq(&S::one(), 1e-12) {
            return Err(Error::Construction {
                node: Node { time: m, outcome: c.base },
                msg: "label law does not sum to one".into(),
            });
        }
    }
    let ext = ext.extend(|_, c| {
        let m = t0_of(c).unwrap_or(horizon).min(horizon);
        q.iter()
            .enumerate()
            .map(|(s, qs)| {
                let v = qs.get(m, c.base).clone();
                let v = if v < S::zero() { S::zero() } else { v };
                (Coord { label: Some(s), ..*c }, v)
            })
            .collect()
    })?;

    let n_ext = ext.n_outcomes();
    let t0 = RandomTime::new(ext.coords().iter().map(&t0_of).collect());
    let shocks: Vec<RandomTime> = spec.shocks.iter().map(|t| ext.lift_time(t)).collect();
    let tau = RandomTime::new(
        (0..n_ext)
            .map(|w| match ext.coords()[w].label {
                Some(0) => t0.value(w),
                Some(s) if s <= k => shocks[s - 1].value(w),
                _ => None,
            })
            .collect(),
    );
    let t0_idio = t0.restrict(
        &ext.coords()
            .iter()
            .map(|c| c.label == Some(0))
            .collect::<Vec<_>>(),
    )?;
    let space = EnlargedSpace::new(ext, tau)?;
    Ok(BuiltTime {
        space,
        shocks,
        t0: t0_idio,
        internals: Some(Internals {
            mode,
            ac: parts.ac,
            p,
            p0,
            p_inf,
            a,
            nu,
            q,
            q_tilde,
        }),
    })
}
