use crate::error::{singular, Error, Node, Result};
use crate::kernel::{indicator, Process};
use crate::scalar::Scalar;

use super::EnlargedSpace;

/// Azéma supermartingale of `τ` and its companions.
#[derive(Debug, Clone)]
pub struct AzemaData<S: Scalar> {
    /// `Z_n = P(τ > n | F_n)`.
    pub z: Process<S>,
    /// Dual optional projection `A^τ` of `1_{τ ≤ ·}`.
    pub a_opt: Process<S>,
    /// Dual predictable projection `a^τ` of `1_{τ ≤ ·}`.
    pub a_pred: Process<S>,
    /// `μ = A^τ + Z`.
    pub mu: Process<S>,
    /// Martingale part of `Z = m - a^τ`.
    pub m: Process<S>,
}

/// The `G`-compensator of the default indicator.
#[derive(Debug, Clone)]
pub struct GCompensator<S: Scalar> {
    /// `F`-predictable hazard `Δa^τ_n / Z_{n-1}` (zero where `Z_{n-1} = 0`).
    pub hazard: Process<S>,
    /// `Λ_{n∧τ}`.
    pub lambda: Process<S>,
    /// `N = 1_{τ ≤ ·} - Λ_{·∧τ}`.
    pub n: Process<S>,
}

impl<S: Scalar> EnlargedSpace<S> {
    pub fn azema(&self) -> Result<AzemaData<S>> {
        let f = self.f();
        let horizon = self.horizon();
        let rows = (0..=horizon)
            .map(|n| {
                let alive: Vec<bool> = (0..self.n_outcomes()).map(|w| !self.tau.le(w, n)).collect();
                f.cond_exp(&indicator(&alive), n)
            })
            .collect::<Result<Vec<_>>>()?;
        let z = Process::new(rows)?;
        let d = self.default_indicator();
        let a_opt = f.dual_optional_projection(&d)?;
        let a_pred = f.dual_predictable_projection(&d)?;
        let (m, dm_a) = f.doob_meyer(&z)?;
        if let Some((n, w)) = dm_a.first_mismatch(&a_pred, f.tol.mart) {
            return Err(Error::Consistency {
                node: Node { time: n, outcome: w },
                msg: "Doob-Meyer part of Z differs from the dual predictable projection".into(),
                gap: (dm_a.get(n, w).clone() - a_pred.get(n, w).clone()).to_f64().abs(),
            });
        }
        let mu = a_opt.add(&z)?;
        Ok(AzemaData {
            z,
            a_opt,
            a_pred,
            mu,
            m,
        })
    }

    /// `Λ_n = Σ_{k ≤ n∧τ} Δa^τ_k / Z_{k-1}`.
    pub fn g_compensator(&self, az: &AzemaData<S>) -> Result<GCompensator<S>> {
        let horizon = self.horizon();
        let n_out = self.n_outcomes();
        let mut hazard = Process::<S>::zeros(horizon, n_out);
        for n in 1..=horizon {
            for w in 0..n_out {
                let zp = az.z.get(n - 1, w);
                let da = az.a_pred.increment(n, w);
                if zp.is_zero() {
                    if self.tau.ge(w, n) {
                        return Err(singular(n, w, "Z_{n-1} = 0 on a live branch"));
                    }
                    continue;
                }
                hazard.set(n, w, da / zp.clone());
            }
        }
        let mut lambda = Process::<S>::zeros(horizon, n_out);
        for n in 1..=horizon {
            for w in 0..n_out {
                let mut v = lambda.get(n - 1, w).clone();
                if self.tau.ge(w, n) {
                    v = v + hazard.get(n, w).clone();
                }
                lambda.set(n, w, v);
            }
        }
        let n = self.default_indicator().sub(&lambda)?;
        Ok(GCompensator { hazard, lambda, n })
    }

    /// The compensator computed directly as the `G`-dual predictable
    /// projection of the default indicator (independent of `Z`).
    pub fn g_compensator_direct(&self) -> Result<Process<S>> {
        self.g().dual_predictable_projection(&self.default_indicator())
    }
}
