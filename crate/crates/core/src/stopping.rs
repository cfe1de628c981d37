//! Stopping-time algebra: restriction, predictability, the accessible /
//! inaccessible split, compensators, and the decomposition of a default
//! time along the factor stopping times it charges.

use serde::{Deserialize, Serialize};

use crate::enlargement::EnlargedSpace;
use crate::error::{contract, Error, Result};
use crate::kernel::{indicator, Filtered, Filtration, Process, RandomTime, ScenarioTree};
use crate::scalar::Scalar;

/// Largest number of candidate pieces an exhaustive search will visit.
pub const SEARCH_CAP: usize = 1 << 16;

/// `T` restricted to `E`, with whether the result is a stopping time.
pub fn restrict_checked(t: &RandomTime, event: &[bool], filt: &Filtration) -> Result<(RandomTime, bool)> {
    let r = t.restrict(event)?;
    let st = r.is_stopping_time(filt);
    Ok((r, st))
}

/// `{T = n}` is `F_{n-1}`-measurable for every `n` (and `{T = 0}` trivial).
pub fn is_predictable(t: &RandomTime, filt: &Filtration) -> Result<bool> {
    t.check_stopping_time(filt, "time")?;
    Ok((0..=filt.horizon()).all(|n| filt.before(n).measures_event(&t.event_eq(n))))
}

/// Largest event `E` on which `τ` restricted to `E` is a finite predictable
/// time, or `None` when it is empty. A predictable time is a disjoint union
/// of graph pieces `{n} × B` with `B` an `F_{n-1}` block, so the maximal
/// event collects every block of `F_{n-1}` lying inside `{τ = n}`.
pub fn has_predictable_part(tau: &RandomTime, filt: &Filtration) -> Result<Option<Vec<bool>>> {
    tau.check_stopping_time(filt, "default time")?;
    let pieces: usize = (0..=filt.horizon()).map(|n| filt.before(n).n_blocks()).sum();
    if pieces > SEARCH_CAP {
        return Err(Error::Capacity(format!(
            "{} predictable graph pieces exceed the exhaustive cap {}; use the sampled Monte Carlo mode",
            pieces, SEARCH_CAP
        )));
    }
    let mut e = vec![false; tau.n_outcomes()];
    for n in 0..=filt.horizon() {
        for b in filt.before(n).blocks() {
            if b.iter().all(|&w| tau.is(w, n)) {
                for &w in b {
                    e[w] = true;
                }
            }
        }
    }
    Ok(e.iter().any(|&x| x).then_some(e))
}

/// Accessible / totally inaccessible split of a stopping time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingClassification {
    /// Maximal event carrying a predictable part, if any.
    pub predictable_part: Option<Vec<bool>>,
    /// Outcomes covered by graphs of predictable times (the accessible part).
    pub accessible: Vec<bool>,
    /// Outcomes whose default is carried by the uniform coordinate.
    pub inaccessible: Vec<bool>,
    /// Per time `n`: is `{T = n}` already known at `n - 1`?
    pub predictable_at: Vec<bool>,
    /// Outcomes covered by some predictable graph in the exhaustive search,
    /// before the uniform-coordinate convention is applied.
    pub covered_by_search: Vec<bool>,
}

/// Outcomes where `τ` is finite and varies across the outcome's section of
/// the uniform coordinate (same factor atom and label, other levels).
pub fn theta_carried<S: Scalar>(tree: &ScenarioTree<S>, tau: &RandomTime) -> Vec<bool> {
    let n = tree.n_outcomes();
    if !tree.has_theta() {
        return vec![false; n];
    }
    let mut sections: std::collections::HashMap<(usize, Option<usize>), Vec<usize>> =
        std::collections::HashMap::new();
    for (w, c) in tree.coords().iter().enumerate() {
        sections.entry((c.base, c.label)).or_default().push(w);
    }
    let mut out = vec![false; n];
    for ws in sections.values() {
        let first = tau.value(ws[0]);
        let varies = ws.iter().any(|&w| tau.value(w) != first);
        if varies {
            for &w in ws {
                out[w] = tau.is_finite(w);
            }
        }
    }
    out
}

/// Classifies a stopping time of `filt` on the outcome space of `tree`.
///
/// On a finite grid every constant time is predictable, so the exhaustive
/// search covers all of `{T < ∞}`; times carried by the uniform coordinate
/// are reported as the totally inaccessible part instead.
pub fn classify<S: Scalar>(
    t: &RandomTime,
    tree: &ScenarioTree<S>,
    filt: &Filtration,
) -> Result<StoppingClassification> {
    let predictable_part = has_predictable_part(t, filt)?;
    let mut covered = vec![false; t.n_outcomes()];
    // constant times are predictable; their graphs meet {T = n} entirely
    for (w, c) in covered.iter_mut().enumerate() {
        *c = t.is_finite(w);
    }
    let inaccessible = theta_carried(tree, t);
    let accessible = covered
        .iter()
        .zip(&inaccessible)
        .map(|(&c, &b)| c && !b)
        .collect();
    let predictable_at = (0..=filt.horizon())
        .map(|n| filt.before(n).measures_event(&t.event_eq(n)))
        .collect();
    Ok(StoppingClassification {
        predictable_part,
        accessible,
        inaccessible,
        predictable_at,
        covered_by_search: covered,
    })
}

/// Compensator of a stopping time and its compensated indicator.
#[derive(Debug, Clone)]
pub struct Compensator<S: Scalar> {
    /// `P(T = n | F_{n-1}) / P(T ≥ n | F_{n-1})`, with `0/0 = 0`.
    pub hazard: Process<S>,
    /// `Λ_{n∧T}`.
    pub lambda: Process<S>,
    /// `1_{T ≤ n} - Λ_{n∧T}`.
    pub n: Process<S>,
}

pub fn compensator<S: Scalar>(t: &RandomTime, f: Filtered<'_, S>) -> Result<Compensator<S>> {
    t.check_stopping_time(f.filt, "time")?;
    let horizon = f.horizon();
    let n_out = f.n_outcomes();
    let mut hazard = Process::<S>::zeros(horizon, n_out);
    let mut lambda = Process::<S>::zeros(horizon, n_out);
    for n in 1..=horizon {
        let eq: Vec<bool> = (0..n_out).map(|w| t.is(w, n)).collect();
        let ge: Vec<bool> = (0..n_out).map(|w| t.ge(w, n)).collect();
        let num = f.cond_exp_before(&indicator(&eq), n)?;
        let den = f.cond_exp_before(&indicator(&ge), n)?;
        for w in 0..n_out {
            let h = if den[w].is_zero() {
                S::zero()
            } else {
                num[w].clone() / den[w].clone()
            };
            let mut l = lambda.get(n - 1, w).clone();
            if t.ge(w, n) {
                l = l + h.clone();
            }
            hazard.set(n, w, h);
            lambda.set(n, w, l);
        }
    }
    let n = t.indicator::<S>(horizon).sub(&lambda)?;
    Ok(Compensator { hazard, lambda, n })
}

/// A default time written as `τ = Σ_{i≥0} T^i 1_{T^i = τ}` with factor
/// stopping times `T^1, T^2, ...` and an idiosyncratic remainder `T^0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockDecomposition {
    pub shocks: Vec<RandomTime>,
    pub t0: RandomTime,
    /// `{τ = T^i < ∞}` per shock.
    pub coincidence: Vec<Vec<bool>>,
}

impl ShockDecomposition {
    /// Validates designated shocks against `τ` and derives `T^0`.
    pub fn new<S: Scalar>(es: &EnlargedSpace<S>, shocks: Vec<RandomTime>) -> Result<Self> {
        let f = es.tree().filtration();
        let n_out = es.n_outcomes();
        for (i, s) in shocks.iter().enumerate() {
            if s.n_outcomes() != n_out {
                return Err(Error::Shape(format!("shock {} has wrong outcome count", i + 1)));
            }
            s.check_stopping_time(f, &format!("shock {}", i + 1))?;
        }
        for i in 0..shocks.len() {
            for j in i + 1..shocks.len() {
                if (0..n_out).any(|w| shocks[i].is_finite(w) && shocks[i].value(w) == shocks[j].value(w)) {
                    return Err(contract(format!("shocks {} and {} coincide", i + 1, j + 1)));
                }
            }
        }
        let tau = es.tau();
        let coincidence: Vec<Vec<bool>> = shocks
            .iter()
            .map(|s| (0..n_out).map(|w| s.is_finite(w) && s.value(w) == tau.value(w)).collect())
            .collect();
        let rest: Vec<bool> = (0..n_out).map(|w| !coincidence.iter().any(|c| c[w])).collect();
        let t0 = tau.restrict(&rest)?;
        let out = ShockDecomposition {
            shocks,
            t0,
            coincidence,
        };
        if out.reassemble() != *tau {
            return Err(contract("shock decomposition does not reproduce the default time"));
        }
        Ok(out)
    }

    pub fn n_shocks(&self) -> usize {
        self.shocks.len()
    }

    /// `Σ_{i≥0} T^i 1_{T^i = τ}` path by path.
    pub fn reassemble(&self) -> RandomTime {
        let n_out = self.t0.n_outcomes();
        RandomTime::new(
            (0..n_out)
                .map(|w| {
                    self.coincidence
                        .iter()
                        .zip(&self.shocks)
                        .find(|(c, _)| c[w])
                        .map(|(_, s)| s.value(w))
                        .unwrap_or(self.t0.value(w))
                })
                .collect(),
        )
    }

    /// `P(τ = T^i < ∞) > 0`.
    pub fn charged<S: Scalar>(&self, tree: &ScenarioTree<S>, i: usize) -> bool {
        !tree.prob_of(&self.coincidence[i]).is_zero()
    }
}

/// Canonical decomposition: every default that is not carried by the
/// uniform coordinate rides on the factor stopping time `n 1_B + ∞ 1_{B^c}`,
/// where `B` is the `F_n`-saturation of those defaults at `n`. Shocks are
/// ordered by time.
pub fn decompose_default_time<S: Scalar>(es: &EnlargedSpace<S>) -> Result<ShockDecomposition> {
    let tau = es.tau();
    tau.check_stopping_time(es.g_filtration(), "default time")?;
    let tree = es.tree();
    let carried = theta_carried(tree, tau);
    let n_out = es.n_outcomes();
    let mut shocks = Vec::new();
    for n in 0..=es.horizon() {
        let part = tree.filtration().at(n);
        let mut hit = vec![false; part.n_blocks()];
        for w in 0..n_out {
            if tau.is(w, n) && !carried[w] {
                hit[part.block_of(w)] = true;
            }
        }
        if hit.iter().any(|&h| h) {
            shocks.push(RandomTime::new(
                (0..n_out).map(|w| hit[part.block_of(w)].then_some(n)).collect(),
            ));
        }
    }
    ShockDecomposition::new(es, shocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn coin_first_heads(horizon: usize) -> (ScenarioTree<f64>, RandomTime) {
        let tree = ScenarioTree::binomial(horizon, 0.5f64).unwrap();
        let t = RandomTime::new(
            tree.coords()
                .iter()
                .map(|c| (0..horizon).find(|&i| (c.base >> i) & 1 == 1).map(|i| i + 1))
                .collect(),
        );
        (tree, t)
    }

    #[test]
    fn first_heads_is_not_predictable() {
        let (tree, t) = coin_first_heads(3);
        assert!(!is_predictable(&t, tree.filtration()).unwrap());
        let c = RandomTime::constant(tree.n_outcomes(), Some(2));
        assert!(is_predictable(&c, tree.filtration()).unwrap());
    }

    #[test]
    fn geometric_compensator_hazard() {
        let (tree, t) = coin_first_heads(3);
        let c = compensator(&t, tree.f()).unwrap();
        for n in 1..=3 {
            for w in 0..tree.n_outcomes() {
                let expect = if t.ge(w, n) { 0.5 } else { 0.0 };
                assert_eq!(*c.hazard.get(n, w), expect);
            }
        }
        assert!(tree.f().is_martingale(&c.n).unwrap());
    }

    #[test]
    fn constant_time_has_unit_jump() {
        let tree = ScenarioTree::<Rational>::binomial(2, Rational::ratio(1, 3)).unwrap();
        let t = RandomTime::constant(tree.n_outcomes(), Some(1));
        let c = compensator(&t, tree.f()).unwrap();
        assert_eq!(c.lambda.at(1)[0], Rational::ratio(1, 1));
        assert_eq!(c.lambda.at(2)[0], Rational::ratio(1, 1));
        let p = has_predictable_part(&t, tree.filtration()).unwrap().unwrap();
        assert!(p.iter().all(|&x| x));
    }
}
