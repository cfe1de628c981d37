use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::kernel::process::{Process, RandomTime};
use crate::scalar::{sum, Scalar, Tolerances};

/// A partition of the outcome set into blocks (atoms of a sigma-field).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds a partition from arbitrary hashable keys; block ids follow the
    /// order of first appearance.
    pub fn from_keys<K: std::hash::Hash + Eq>(keys: impl IntoIterator<Item = K>) -> Self {
        let mut ids: HashMap<K, usize> = HashMap::new();
        let mut block_of = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (w, k) in keys.into_iter().enumerate() {
            let next = ids.len();
            let id = *ids.entry(k).or_insert(next);
            if id == members.len() {
                members.push(Vec::new());
            }
            members[id].push(w);
            block_of.push(id);
        }
        Partition { block_of, members }
    }

    pub fn trivial(n_outcomes: usize) -> Self {
        Partition::from_keys(std::iter::repeat_n(0u8, n_outcomes))
    }

    pub fn block_of(&self, outcome: usize) -> usize {
        self.block_of[outcome]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn n_blocks(&self) -> usize {
        self.members.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.block_of.len()
    }

    /// True when every block of `self` lies inside one block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.members.iter().all(|b| {
            let c = coarser.block_of(b[0]);
            b.iter().all(|&w| coarser.block_of(w) == c)
        })
    }

    /// Is the event (indicator per outcome) a union of blocks?
    pub fn measures_event(&self, event: &[bool]) -> bool {
        self.members
            .iter()
            .all(|b| b.iter().all(|&w| event[w] == event[b[0]]))
    }

    /// Is the value vector constant on blocks?
    pub fn measures<S: Scalar>(&self, x: &[S], tol: f64) -> bool {
        self.members
            .iter()
            .all(|b| b.iter().all(|&w| x[w].approx_eq(&x[b[0]], tol)))
    }

    /// Conditional expectation of `x` given this partition, per outcome.
    pub fn cond_exp<S: Scalar>(&self, probs: &[S], x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); x.len()];
        for b in &self.members {
            let mass = sum(b.iter().map(|&w| probs[w].clone()));
            let num = sum(b.iter().map(|&w| probs[w].clone() * x[w].clone()));
            let v = num / mass;
            for &w in b {
                out[w] = v.clone();
            }
        }
        out
    }

    /// Probability of each block, indexed by outcome.
    pub fn mass<S: Scalar>(&self, probs: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); probs.len()];
        for b in &self.members {
            let m = sum(b.iter().map(|&w| probs[w].clone()));
            for &w in b {
                out[w] = m.clone();
            }
        }
        out
    }
}

/// A filtration on a finite outcome set: one partition per time index
/// `0..=horizon`, each refining its predecessor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filtration {
    parts: Vec<Partition>,
    trivial: Partition,
}

impl Filtration {
    pub fn new(parts: Vec<Partition>) -> Result<Self> {
        if parts.is_empty() {
            return Err(contract("filtration needs at least time 0"));
        }
        let n_out = parts[0].n_outcomes();
        for (n, w) in parts.windows(2).enumerate() {
            if w[1].n_outcomes() != n_out {
                return Err(Error::Shape("partitions over different outcome sets".into()));
            }
            if !w[1].refines(&w[0]) {
                return Err(contract(format!(
                    "partition at time {} does not refine time {}",
                    n + 1,
                    n
                )));
            }
        }
        Ok(Filtration {
            trivial: Partition::trivial(n_out),
            parts,
        })
    }

    pub fn horizon(&self) -> usize {
        self.parts.len() - 1
    }

    pub fn n_outcomes(&self) -> usize {
        self.trivial.n_outcomes()
    }

    pub fn at(&self, n: usize) -> &Partition {
        &self.parts[n]
    }

    /// The sigma-field "just before" `n`: time `n-1`, trivial at `n = 0`.
    pub fn before(&self, n: usize) -> &Partition {
        if n == 0 {
            &self.trivial
        } else {
            &self.parts[n - 1]
        }
    }

    pub fn is_sub_filtration_of(&self, finer: &Filtration) -> bool {
        self.parts.len() == finer.parts.len()
            && self.parts.iter().zip(&finer.parts).all(|(c, f)| f.refines(c))
    }
}

/// Extension coordinates carried by an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Coord {
    /// Terminal atom of the root (factor) tree.
    pub base: usize,
    /// Level of the independent uniform coordinate, if present.
    pub theta: Option<usize>,
    /// Label drawn by a construction (e.g. which shock the default rides on).
    pub label: Option<usize>,
}

/// A finite filtered probability space. The root tree's terminal atoms are
/// its outcomes; extended trees add independent or conditionally drawn
/// coordinates that the factor filtration `F` never reveals.
#[derive(Debug, Clone)]
pub struct ScenarioTree<S: Scalar> {
    probs: Vec<S>,
    coords: Vec<Coord>,
    filtration: Filtration,
    theta_values: Vec<S>,
    theta_masses: Vec<S>,
    base_outcomes: usize,
}

impl<S: Scalar> ScenarioTree<S> {
    /// Builds a tree from terminal paths. `paths[k].0` lists the state after
    /// each step (length = horizon); the time-`n` atom of a path is its
    /// length-`n` prefix. Zero-probability paths are pruned.
    pub fn from_paths(horizon: usize, paths: Vec<(Vec<u32>, S)>) -> Result<Self> {
        Self::from_paths_tol(horizon, paths, Tolerances::default())
    }

    pub fn from_paths_tol(
        horizon: usize,
        paths: Vec<(Vec<u32>, S)>,
        tol: Tolerances,
    ) -> Result<Self> {
        let kept: Vec<(Vec<u32>, S)> = paths
            .into_iter()
            .filter(|(_, p)| !p.is_zero())
            .collect();
        if kept.is_empty() {
            return Err(contract("tree has no outcome of positive probability"));
        }
        for (path, p) in &kept {
            if path.len() != horizon {
                return Err(Error::Shape(format!(
                    "path of length {} for horizon {}",
                    path.len(),
                    horizon
                )));
            }
            if *p < S::zero() {
                return Err(contract("negative probability"));
            }
        }
        check_unit_mass(kept.iter().map(|(_, p)| p.clone()), tol)?;
        let mut seen = std::collections::HashSet::new();
        for (path, _) in &kept {
            if !seen.insert(path.clone()) {
                return Err(contract(format!("duplicate path {:?}", path)));
            }
        }
        let parts = (0..=horizon)
            .map(|n| Partition::from_keys(kept.iter().map(|(path, _)| path[..n].to_vec())))
            .collect();
        let n = kept.len();
        Ok(ScenarioTree {
            probs: kept.into_iter().map(|(_, p)| p).collect(),
            coords: (0..n)
                .map(|k| Coord {
                    base: k,
                    theta: None,
                    label: None,
                })
                .collect(),
            filtration: Filtration::new(parts)?,
            theta_values: Vec::new(),
            theta_masses: Vec::new(),
            base_outcomes: n,
        })
    }

    /// Recombining-free binomial tree: every step is up (1) with
    /// probability `p_up`, down (0) otherwise.
    pub fn binomial(horizon: usize, p_up: S) -> Result<Self> {
        let mut paths = Vec::new();
        for bits in 0..(1u64 << horizon) {
            let path: Vec<u32> = (0..horizon).map(|i| ((bits >> i) & 1) as u32).collect();
            let ups = path.iter().filter(|&&b| b == 1).count();
            let mut p = S::one();
            for _ in 0..ups {
                p = p * p_up.clone();
            }
            for _ in ups..horizon {
                p = p * (S::one() - p_up.clone());
            }
            paths.push((path, p));
        }
        Self::from_paths(horizon, paths)
    }

    /// A single deterministic path: `F` is trivial at all times.
    pub fn trivial(horizon: usize) -> Result<Self> {
        Self::from_paths(horizon, vec![(vec![0; horizon], S::one())])
    }

    pub fn horizon(&self) -> usize {
        self.filtration.horizon()
    }

    pub fn n_outcomes(&self) -> usize {
        self.probs.len()
    }

    /// Number of outcomes of the root tree this space was built from.
    pub fn n_base_outcomes(&self) -> usize {
        self.base_outcomes
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    /// The factor filtration `F`.
    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn theta_values(&self) -> &[S] {
        &self.theta_values
    }

    pub fn theta_masses(&self) -> &[S] {
        &self.theta_masses
    }

    pub fn has_theta(&self) -> bool {
        !self.theta_values.is_empty()
    }

    /// Lifts a per-outcome vector of the root tree onto this space.
    pub fn lift_vec<T: Clone>(&self, base: &[T]) -> Vec<T> {
        self.coords.iter().map(|c| base[c.base].clone()).collect()
    }

    /// Lifts a root-tree process onto this space.
    pub fn lift_process(&self, p: &Process<S>) -> Process<S> {
        p.lift(|w| self.coords[w].base, self.n_outcomes())
    }

    /// Lifts a root-tree random time onto this space.
    pub fn lift_time(&self, t: &RandomTime) -> RandomTime {
        t.lift(|w| self.coords[w].base, self.n_outcomes())
    }

    /// Conditional expectation `E[x | F_n]`.
    pub fn cond_exp(&self, x: &[S], n: usize) -> Result<Vec<S>> {
        if n > self.horizon() {
            return Err(Error::Range(format!(
                "time {} beyond horizon {}",
                n,
                self.horizon()
            )));
        }
        if x.len() != self.n_outcomes() {
            return Err(Error::Shape("variable does not match outcome count".into()));
        }
        Ok(self.filtration.at(n).cond_exp(&self.probs, x))
    }

    /// Expectation under the tree's probability.
    pub fn expect(&self, x: &[S]) -> S {
        sum(self
            .probs
            .iter()
            .zip(x)
            .map(|(p, v)| p.clone() * v.clone()))
    }

    pub fn prob_of(&self, event: &[bool]) -> S {
        sum(self
            .probs
            .iter()
            .zip(event)
            .filter(|(_, &e)| e)
            .map(|(p, _)| p.clone()))
    }

    /// Product with an independent uniform coordinate on `m` mid-point
    /// levels `(2j-1)/(2m)`, each of mass `1/m`.
    pub fn extend_with_uniform(&self, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Range(format!("uniform levels m = {} < 2", m)));
        }
        let values = (1..=m)
            .map(|j| S::ratio(2 * j as i64 - 1, 2 * m as i64))
            .collect();
        let masses = vec![S::ratio(1, m as i64); m];
        self.extend_with_theta(values, masses)
    }

    /// Product with an independent discrete uniform-like coordinate given by
    /// explicit representative values and masses.
    pub fn extend_with_theta(&self, values: Vec<S>, masses: Vec<S>) -> Result<Self> {
        if self.has_theta() {
            return Err(contract("space already carries a uniform coordinate"));
        }
        if values.len() != masses.len() || values.is_empty() {
            return Err(Error::Shape("theta values and masses differ in length".into()));
        }
        check_unit_mass(masses.iter().cloned(), Tolerances::default())?;
        let mut out = self.extend(|_, c| {
            masses
                .iter()
                .enumerate()
                .map(|(j, m)| {
                    (
                        Coord {
                            theta: Some(j),
                            ..*c
                        },
                        m.clone(),
                    )
                })
                .collect()
        })?;
        out.theta_values = values;
        out.theta_masses = masses;
        Ok(out)
    }

    /// Splits every outcome into weighted children carrying new coordinates.
    /// The weights of each outcome's children are a conditional law and must
    /// sum to one; zero weights are pruned. `F` is lifted unchanged.
    pub fn extend<E>(&self, mut children: E) -> Result<Self>
    where
        E: FnMut(usize, &Coord) -> Vec<(Coord, S)>,
    {
        let tol = Tolerances::default();
        let mut probs = Vec::new();
        let mut coords = Vec::new();
        let mut origin = Vec::new();
        for w in 0..self.n_outcomes() {
            let kids = children(w, &self.coords[w]);
            check_unit_mass(kids.iter().map(|(_, q)| q.clone()), tol).map_err(|e| {
                Error::Contract(format!("conditional law at outcome {}: {}", w, e))
            })?;
            for (c, q) in kids {
                if q < S::zero() {
                    return Err(contract(format!("negative conditional weight at outcome {}", w)));
                }
                if q.is_zero() {
                    continue;
                }
                probs.push(self.probs[w].clone() * q);
                coords.push(c);
                origin.push(w);
            }
        }
        let parts = (0..=self.horizon())
            .map(|n| {
                let p = self.filtration.at(n);
                Partition::from_keys(origin.iter().map(|&w| p.block_of(w)))
            })
            .collect();
        Ok(ScenarioTree {
            probs,
            coords,
            filtration: Filtration::new(parts)?,
            theta_values: self.theta_values.clone(),
            theta_masses: self.theta_masses.clone(),
            base_outcomes: self.base_outcomes,
        })
    }

    /// Same outcomes and filtration, new probability weights (a measure
    /// change by positive factors, renormalised).
    pub fn reweighted(&self, factors: &[S]) -> Result<Self> {
        if factors.len() != self.n_outcomes() {
            return Err(Error::Shape("factor count".into()));
        }
        if factors.iter().any(|f| *f <= S::zero()) {
            return Err(contract("reweighting factors must be positive"));
        }
        let raw: Vec<S> = self
            .probs
            .iter()
            .zip(factors)
            .map(|(p, f)| p.clone() * f.clone())
            .collect();
        let total = sum(raw.iter().cloned());
        let mut out = self.clone();
        out.probs = raw.into_iter().map(|p| p / total.clone()).collect();
        Ok(out)
    }
}

fn check_unit_mass<S: Scalar>(masses: impl IntoIterator<Item = S>, tol: Tolerances) -> Result<()> {
    let total = sum(masses);
    if !total.approx_eq(&S::one(), tol.sum) {
        return Err(contract(format!(
            "probabilities sum to {} instead of 1",
            total.to_f64()
        )));
    }
    Ok(())
}
