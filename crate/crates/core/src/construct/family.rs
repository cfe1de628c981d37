use crate::enlargement::EnlargedSpace;
use crate::error::{contract, contract_at, Error, Result};
use crate::kernel::{Coord, Level, Process, RandomTime, ScenarioTree};
use crate::scalar::Scalar;

use super::{extend_theta, BuiltTime, ThetaGrid};

/// Threshold time `τ = inf{n : A_n ≥ Θ}` with `Θ` independent of the
/// factor tree.
pub fn cox_construct<S: Scalar>(
    tree: &ScenarioTree<S>,
    a: &Process<S>,
    grid: &ThetaGrid,
) -> Result<BuiltTime<S>> {
    if tree.has_theta() {
        return Err(contract("tree already carries a threshold coordinate"));
    }
    if a.horizon() != tree.horizon() || a.n_outcomes() != tree.n_outcomes() {
        return Err(Error::Shape("target process does not match tree".into()));
    }
    if !a.has_level(tree.filtration(), Level::Optional, tree.f().tol.mart) {
        return Err(contract("target process is not adapted"));
    }
    for n in 1..=a.horizon() {
        for w in 0..a.n_outcomes() {
            if a.increment(n, w) < S::zero() {
                return Err(contract_at(n, w, "target is not increasing"));
            }
        }
    }
    let ext = extend_theta(tree, grid, a)?;
    let horizon = tree.horizon();
    let tau = RandomTime::new(
        ext.coords()
            .iter()
            .map(|c| {
                let th = &ext.theta_values()[c.theta.expect("theta coordinate")];
                (0..=horizon).find(|&n| a.get(n, c.base) >= th)
            })
            .collect(),
    );
    let space = EnlargedSpace::new(ext, tau.clone())?;
    Ok(BuiltTime {
        space,
        shocks: Vec::new(),
        t0: tau,
        internals: None,
    })
}

/// `τ = T^S` for given factor stopping times and a label whose conditional
/// law given `F_n` is `law[i]_n`. The label is drawn from the terminal law.
pub fn family_construct<S: Scalar>(
    tree: &ScenarioTree<S>,
    times: &[RandomTime],
    law: &[Process<S>],
) -> Result<BuiltTime<S>> {
    if times.len() != law.len() || times.is_empty() {
        return Err(Error::Shape("one conditional-law process per time is required".into()));
    }
    let f = tree.f();
    let tol = if S::EXACT { 0.0 } else { f.tol.sum };
    for (i, t) in times.iter().enumerate() {
        t.check_stopping_time(tree.filtration(), &format!("time {}", i + 1))?;
    }
    for (i, p) in law.iter().enumerate() {
        if !f.is_martingale(p)? {
            return Err(contract(format!("law of label {} is not a martingale", i + 1)));
        }
    }
    for n in 0..=tree.horizon() {
        for w in 0..tree.n_outcomes() {
            let mut total = S::zero();
            for p in law {
                let v = p.get(n, w).clone();
                if v < S::zero() || v > S::one() {
                    return Err(contract_at(n, w, "conditional probability outside [0, 1]"));
                }
                total = total + v;
            }
            if !total.approx_eq(&S::one(), tol) {
                return Err(contract_at(n, w, "conditional probabilities do not sum to one"));
            }
        }
    }
    let horizon = tree.horizon();
    let ext = tree.extend(|w, c| {
        law.iter()
            .enumerate()
            .map(|(i, p)| (Coord { label: Some(i), ..*c }, p.get(horizon, w).clone()))
            .collect()
    })?;
    let lifted: Vec<RandomTime> = times.iter().map(|t| ext.lift_time(t)).collect();
    let tau = RandomTime::new(
        ext.coords()
            .iter()
            .enumerate()
            .map(|(w, c)| lifted[c.label.expect("label")].value(w))
            .collect(),
    );
    let n_ext = ext.n_outcomes();
    let space = EnlargedSpace::new(ext, tau)?;
    Ok(BuiltTime {
        space,
        shocks: lifted,
        t0: RandomTime::never(n_ext),
        internals: None,
    })
}
