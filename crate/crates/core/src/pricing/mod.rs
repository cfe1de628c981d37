//! Defaultable claims: brute-force and pre-default prices, the classic
//! intensity formula, the default-adjusted measure, the shock-aware
//! pricing formula, and the default-event risk premium.

mod loss;
mod premium;
mod qtau;

pub use loss::{bond_price, loss_holds, loss_no_predictable_check, LossVerdict};
pub use premium::{
    credit_spread, orthogonal_decomposition, premium_direct, risk_premium, shock_free_premium, CreditSpread,
    Orthogonal, PremiumReport, SpreadConvention,
};
pub use qtau::{measure_change, price_via_qtau, recovery_decomposition, MeasureChange, QtauPrice, Recovery};

use serde::{Deserialize, Serialize};

use crate::enlargement::{AzemaData, EnlargedSpace, GCompensator, ShockAzema};
use crate::error::{contract, singular, Error, Result};
use crate::kernel::{Level, Process};
use crate::scalar::Scalar;
use crate::stopping::{decompose_default_time, ShockDecomposition};

/// How discount factors and survival adjustments are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscountMode {
    /// Products `Π (1 + r_k Δt)` and `Π (1 - ΔΛ_k)`; identities hold exactly.
    DiscreteExact,
    /// Exponentials `e^{R}` and `e^{Λ}`; exact only as `Δt → 0`.
    Continuous,
}

/// Short rate `r_k` applied over step `k` (known at `k - 1`).
#[derive(Debug, Clone)]
pub struct Rates<S: Scalar> {
    pub r: Process<S>,
    pub dt: S,
    pub mode: DiscountMode,
}

impl<S: Scalar> Rates<S> {
    pub fn constant(rate: S, dt: S, mode: DiscountMode, horizon: usize, n_outcomes: usize) -> Self {
        Rates {
            r: Process::constant(horizon, n_outcomes, rate),
            dt,
            mode,
        }
    }

    pub fn zero(horizon: usize, n_outcomes: usize, mode: DiscountMode) -> Self {
        Self::constant(S::zero(), S::one(), mode, horizon, n_outcomes)
    }

    /// Bank account `B_n`.
    pub fn bank(&self) -> Process<S> {
        let mut b = Process::<S>::constant(self.r.horizon(), self.r.n_outcomes(), S::one());
        let mut acc = vec![S::zero(); self.r.n_outcomes()];
        for n in 1..=self.r.horizon() {
            for (w, cum) in acc.iter_mut().enumerate() {
                let step = self.r.get(n, w).clone() * self.dt.clone();
                let v = match self.mode {
                    DiscountMode::DiscreteExact => b.get(n - 1, w).clone() * (S::one() + step),
                    DiscountMode::Continuous => {
                        *cum = cum.clone() + step;
                        cum.exp()
                    }
                };
                b.set(n, w, v);
            }
        }
        b
    }

    /// One-step growth `g_k = B_k / B_{k-1}`.
    pub fn growth(&self) -> Process<S> {
        let b = self.bank();
        b.map(|n, w, x| if n == 0 { S::one() } else { x.clone() / b.get(n - 1, w).clone() })
    }

    /// Cumulated rate `R_n = Σ_{k≤n} r_k Δt`.
    pub fn cumulated(&self) -> Process<S> {
        let mut out = Process::<S>::zeros(self.r.horizon(), self.r.n_outcomes());
        for n in 1..=self.r.horizon() {
            for w in 0..self.r.n_outcomes() {
                let v = out.get(n - 1, w).clone() + self.r.get(n, w).clone() * self.dt.clone();
                out.set(n, w, v);
            }
        }
        out
    }

    pub fn validate<T: Scalar>(&self, es: &EnlargedSpace<T>) -> Result<()> {
        if self.r.horizon() != es.horizon() || self.r.n_outcomes() != es.n_outcomes() {
            return Err(Error::Shape("rates do not match the space".into()));
        }
        if !self.r.has_level(es.tree().filtration(), Level::Predictable, 1e-12) {
            return Err(contract("short rate must be known one step ahead"));
        }
        let b = self.bank();
        if b.rows().iter().flatten().any(|x| *x <= S::zero()) {
            return Err(contract("discount factors must be positive"));
        }
        Ok(())
    }
}

/// Promised payment `P` at maturity, recovery `C_τ` paid at default.
#[derive(Debug, Clone)]
pub struct DefaultableClaim<S: Scalar> {
    pub maturity: usize,
    pub promised: Vec<S>,
    pub recovery: Process<S>,
}

impl<S: Scalar> DefaultableClaim<S> {
    pub fn zero_recovery(maturity: usize, promised: Vec<S>, horizon: usize) -> Self {
        let n = promised.len();
        DefaultableClaim {
            maturity,
            promised,
            recovery: Process::zeros(horizon, n),
        }
    }

    pub fn validate(&self, es: &EnlargedSpace<S>) -> Result<()> {
        if self.maturity > es.horizon() {
            return Err(Error::Range(format!(
                "maturity {} beyond horizon {}",
                self.maturity,
                es.horizon()
            )));
        }
        let f = es.tree().filtration();
        if self.promised.len() != es.n_outcomes()
            || self.recovery.n_outcomes() != es.n_outcomes()
            || self.recovery.horizon() != es.horizon()
        {
            return Err(Error::Shape("claim does not match the space".into()));
        }
        if !f.at(self.maturity).measures(&self.promised, 0.0) {
            return Err(contract("promised payment must be known at maturity"));
        }
        if !self.recovery.has_level(f, Level::Optional, 0.0) {
            return Err(contract("recovery must be adapted to the factor filtration"));
        }
        let neg = self.promised.iter().any(|x| *x < S::zero())
            || self.recovery.rows().iter().flatten().any(|x| *x < S::zero());
        if neg {
            return Err(contract("claim payments must be nonnegative"));
        }
        Ok(())
    }
}

/// A default time with everything the pricing layer consumes.
#[derive(Debug, Clone)]
pub struct DefaultModel<S: Scalar> {
    pub space: EnlargedSpace<S>,
    pub sd: ShockDecomposition,
    pub az: AzemaData<S>,
    pub gc: GCompensator<S>,
    pub sa: ShockAzema<S>,
}

impl<S: Scalar> DefaultModel<S> {
    /// Requires immersion.
    pub fn new(space: EnlargedSpace<S>, sd: ShockDecomposition) -> Result<Self> {
        let az = space.azema()?;
        let gc = space.g_compensator(&az)?;
        let sa = space.shock_azema(&sd)?;
        Ok(DefaultModel { space, sd, az, gc, sa })
    }

    /// Uses the canonical per-time shock decomposition.
    pub fn canonical(space: EnlargedSpace<S>) -> Result<Self> {
        let sd = decompose_default_time(&space)?;
        Self::new(space, sd)
    }

    pub fn horizon(&self) -> usize {
        self.space.horizon()
    }

    pub fn n_outcomes(&self) -> usize {
        self.space.n_outcomes()
    }

    /// Total `F`-hazard `ΔΛ_k = Δa^τ_k / Z_{k-1}`.
    pub fn hazard(&self) -> &Process<S> {
        &self.gc.hazard
    }

    /// `Π_{j ≤ n} (1 - ΔΛ_j)` (discrete-exact) or `e^{-Λ_n}` (continuous).
    pub fn survival_factor(&self, mode: DiscountMode) -> Process<S> {
        let h = self.hazard();
        let mut out = Process::<S>::constant(self.horizon(), self.n_outcomes(), S::one());
        let mut cum = vec![S::zero(); self.n_outcomes()];
        for n in 1..=self.horizon() {
            for (w, c) in cum.iter_mut().enumerate() {
                let v = match mode {
                    DiscountMode::DiscreteExact => {
                        out.get(n - 1, w).clone() * (S::one() - h.get(n, w).clone())
                    }
                    DiscountMode::Continuous => {
                        *c = c.clone() + h.get(n, w).clone();
                        (-c.clone()).exp()
                    }
                };
                out.set(n, w, v);
            }
        }
        out
    }
}

/// Extends a process computed on `0..=T` flat to the horizon.
pub(crate) fn freeze_after<S: Scalar>(p: &mut Process<S>, maturity: usize) {
    for n in maturity + 1..=p.horizon() {
        for w in 0..p.n_outcomes() {
            let v = p.get(maturity, w).clone();
            p.set(n, w, v);
        }
    }
}

/// `S(X)_n = B_n E[P B_T^{-1} 1_{τ>T} + C_τ B_τ^{-1} 1_{τ≤T} | G_n]`.
pub fn price_brute<S: Scalar>(
    claim: &DefaultableClaim<S>,
    es: &EnlargedSpace<S>,
    rates: &Rates<S>,
) -> Result<Process<S>> {
    claim.validate(es)?;
    rates.validate(es)?;
    let b = rates.bank();
    let t = claim.maturity;
    let tau = es.tau();
    let y: Vec<S> = (0..es.n_outcomes())
        .map(|w| match tau.value(w) {
            Some(k) if k <= t => claim.recovery.get(k, w).clone() / b.get(k, w).clone(),
            _ => claim.promised[w].clone() / b.get(t, w).clone(),
        })
        .collect();
    let g = es.g();
    let mut out = Process::<S>::zeros(es.horizon(), es.n_outcomes());
    for n in 0..=t {
        let ce = g.cond_exp(&y, n)?;
        for (w, v) in ce.into_iter().enumerate() {
            out.set(n, w, b.get(n, w).clone() * v);
        }
    }
    freeze_after(&mut out, t);
    Ok(out)
}

/// Pre-default price
/// `S̃_n = (B_n / Z_n) E[P B_T^{-1} 1_{τ>T} + C_τ B_τ^{-1} 1_{n<τ≤T} | F_n]`,
/// with `S̃_T = P`, and `S̃_n = C_n` where `Z_n = 0`.
pub fn predefault_price<S: Scalar>(
    claim: &DefaultableClaim<S>,
    es: &EnlargedSpace<S>,
    az: &AzemaData<S>,
    rates: &Rates<S>,
) -> Result<Process<S>> {
    claim.validate(es)?;
    rates.validate(es)?;
    let b = rates.bank();
    let t = claim.maturity;
    let tau = es.tau();
    let f = es.f();
    let mut out = Process::<S>::zeros(es.horizon(), es.n_outcomes());
    for n in 0..=t {
        if n == t {
            for w in 0..es.n_outcomes() {
                let v = if az.z.get(n, w).is_zero() {
                    claim.recovery.get(n, w).clone()
                } else {
                    claim.promised[w].clone()
                };
                out.set(n, w, v);
            }
            continue;
        }
        let y: Vec<S> = (0..es.n_outcomes())
            .map(|w| match tau.value(w) {
                Some(k) if k <= n => S::zero(),
                Some(k) if k <= t => claim.recovery.get(k, w).clone() / b.get(k, w).clone(),
                _ => claim.promised[w].clone() / b.get(t, w).clone(),
            })
            .collect();
        let ce = f.cond_exp(&y, n)?;
        for (w, v) in ce.into_iter().enumerate() {
            let z = az.z.get(n, w);
            if z.is_zero() {
                if !tau.le(w, n) {
                    return Err(singular(n, w, "Z_n = 0 on a live branch before maturity"));
                }
                // default is certain by n: the claim is worth its recovery
                out.set(n, w, claim.recovery.get(n, w).clone());
                continue;
            }
            out.set(n, w, b.get(n, w).clone() * v / z.clone());
        }
    }
    freeze_after(&mut out, t);
    Ok(out)
}

/// Intensity formula, valid when the dual projections coincide and the
/// recovery is predictable:
/// `S̃_n = B_n E[Σ_{n<k≤T} C_k B_k^{-1} ΔΛ_k Π_{n<j<k}(1-ΔΛ_j) + P B_T^{-1} Π_{n<j≤T}(1-ΔΛ_j) | F_n]`
/// (discrete-exact), or the same with `e^{-(R+Λ)}` discounting (continuous).
pub fn classic_price<S: Scalar>(
    claim: &DefaultableClaim<S>,
    model: &DefaultModel<S>,
    rates: &Rates<S>,
) -> Result<Process<S>> {
    let es = &model.space;
    claim.validate(es)?;
    rates.validate(es)?;
    let f = es.f();
    if !claim.recovery.has_level(es.tree().filtration(), Level::Predictable, 0.0) {
        return Err(contract("recovery is not predictable; use price_via_qtau"));
    }
    if model.az.a_opt.first_mismatch(&model.az.a_pred, f.tol.mart).is_some() {
        return Err(contract(
            "dual optional and dual predictable projections differ (charged shocks); use price_via_qtau",
        ));
    }
    let t = claim.maturity;
    let b = rates.bank();
    let h = model.hazard();
    let surv = model.survival_factor(rates.mode);
    let n_out = es.n_outcomes();
    let mut out = Process::<S>::zeros(es.horizon(), n_out);
    for n in 0..=t {
        let y: Vec<S> = (0..n_out)
            .map(|w| {
                // survival from n to k, relative to the factor at n
                let rel = |k: usize| match rates.mode {
                    DiscountMode::DiscreteExact => {
                        let mut s = S::one();
                        for j in n + 1..k {
                            s = s * (S::one() - h.get(j, w).clone());
                        }
                        s
                    }
                    DiscountMode::Continuous => surv.get(k, w).clone() / surv.get(n, w).clone(),
                };
                let mut acc = S::zero();
                for k in n + 1..=t {
                    acc = acc
                        + claim.recovery.get(k, w).clone() / b.get(k, w).clone()
                            * h.get(k, w).clone()
                            * rel(k);
                }
                let last = match rates.mode {
                    DiscountMode::DiscreteExact if t > n => rel(t) * (S::one() - h.get(t, w).clone()),
                    _ => rel(t),
                };
                acc + claim.promised[w].clone() / b.get(t, w).clone() * last
            })
            .collect();
        let ce = f.cond_exp(&y, n)?;
        for (w, v) in ce.into_iter().enumerate() {
            out.set(n, w, b.get(n, w).clone() * v);
        }
    }
    freeze_after(&mut out, t);
    Ok(out)
}
