use crate::check::Check;
use crate::error::{contract, Result};
use crate::kernel::{indicator, stochastic_integral, IntegrandConvention, Process};
use crate::scalar::Scalar;
use crate::stopping::{compensator, Compensator, ShockDecomposition};

use super::{AzemaData, EnlargedSpace, GCompensator};

/// Shock-level description of the Azéma supermartingale under immersion.
#[derive(Debug, Clone)]
pub struct ShockAzema<S: Scalar> {
    /// `F`-compensators of the shocks.
    pub comps: Vec<Compensator<S>>,
    /// `p^i_n = P(τ = T^i | F_n)`.
    pub p: Vec<Process<S>>,
    /// `v^i_n = E[ΔN^i_n Δp^i_n | F_{n-1}] / ΔΛ^i_n`, zero off the support.
    pub v: Vec<Process<S>>,
    /// Dual optional projection of `1_{T^0 ≤ ·}`.
    pub a0_opt: Process<S>,
    /// Dual predictable projection of `1_{T^0 ≤ ·}`.
    pub a0_pred: Process<S>,
    /// The martingale `N̂` assembled from the shock terms.
    pub nhat: Process<S>,
    /// Per-step intensity rebuilt from the shock terms.
    pub intensity: Process<S>,
}

/// `G`-side attribution of the compensator to the shocks.
#[derive(Debug, Clone)]
pub struct IntensityData<S: Scalar> {
    /// `g^i_n = P(τ = T^i | G_n)`.
    pub g: Vec<Process<S>>,
    /// `u^i_n = E[Δg^i_n ΔN^i_n | G_{n-1}] / ΔΛ^i_n`.
    pub u: Vec<Process<S>>,
    /// `G`-compensator of `T^0`.
    pub lambda0: Process<S>,
    /// `Σ_i ∫ (g^i_- + u^i) dΛ^i_{·∧T^i} + Λ^0`.
    pub assembled: Process<S>,
}

impl<S: Scalar> EnlargedSpace<S> {
    /// `P(τ = T^i | F_n)` for every shock, without any immersion check.
    pub fn shock_probabilities(&self, sd: &ShockDecomposition) -> Result<Vec<Process<S>>> {
        let f = self.f();
        sd.coincidence
            .iter()
            .map(|c| {
                let x = indicator::<S>(c);
                let rows = (0..=self.horizon())
                    .map(|n| f.cond_exp(&x, n))
                    .collect::<Result<Vec<_>>>()?;
                Process::new(rows)
            })
            .collect()
    }

    /// The martingales `p^i`; requires immersion.
    pub fn p_processes(&self, sd: &ShockDecomposition) -> Result<Vec<Process<S>>> {
        let im = self.check_immersion()?;
        if !im.holds {
            return Err(contract(format!(
                "immersion fails (worst node {:?}); p^i are only stopped martingales under immersion, use shock_probabilities",
                im.worst
            )));
        }
        self.shock_probabilities(sd)
    }

    /// `g^i_n = P(τ = T^i | G_n)`.
    pub fn g_processes(&self, sd: &ShockDecomposition) -> Result<Vec<Process<S>>> {
        let g = self.g();
        sd.coincidence
            .iter()
            .map(|c| {
                let x = indicator::<S>(c);
                let rows = (0..=self.horizon())
                    .map(|n| g.cond_exp(&x, n))
                    .collect::<Result<Vec<_>>>()?;
                Process::new(rows)
            })
            .collect()
    }

    pub fn shock_azema(&self, sd: &ShockDecomposition) -> Result<ShockAzema<S>> {
        let f = self.f();
        let p = self.p_processes(sd)?;
        let comps = sd
            .shocks
            .iter()
            .map(|t| compensator(t, f))
            .collect::<Result<Vec<_>>>()?;
        let horizon = self.horizon();
        let n_out = self.n_outcomes();
        let mut v = Vec::with_capacity(p.len());
        for (i, pi) in p.iter().enumerate() {
            v.push(bracket_ratio(self, &comps[i], pi, &sd.shocks[i], false)?);
        }
        let d0 = sd.t0.indicator::<S>(horizon);
        let a0_opt = f.dual_optional_projection(&d0)?;
        let a0_pred = f.dual_predictable_projection(&d0)?;
        let az = self.azema()?;
        let mut nhat = Process::<S>::zeros(horizon, n_out);
        let mut intensity = Process::<S>::zeros(horizon, n_out);
        for n in 1..=horizon {
            for w in 0..n_out {
                let mut dn = a0_opt.increment(n, w) - a0_pred.increment(n, w);
                let mut lam = a0_pred.increment(n, w);
                for (i, t) in sd.shocks.iter().enumerate() {
                    let pv = p[i].get(n - 1, w).clone() + v[i].get(n, w).clone();
                    let dni = comps[i].n.increment(n, w);
                    let dp = p[i].increment(n, w);
                    dn = dn + pv.clone() * dni;
                    if t.is(w, n) {
                        dn = dn + dp - v[i].get(n, w).clone();
                    }
                    if t.ge(w, n) {
                        lam = lam + pv * comps[i].hazard.get(n, w).clone();
                    }
                }
                let zp = az.z.get(n - 1, w);
                let lam = if zp.is_zero() { S::zero() } else { lam / zp.clone() };
                nhat.set(n, w, nhat.get(n - 1, w).clone() + dn);
                intensity.set(n, w, lam);
            }
        }
        Ok(ShockAzema {
            comps,
            p,
            v,
            a0_opt,
            a0_pred,
            nhat,
            intensity,
        })
    }

    /// Identities tying the shock description to the directly computed
    /// Azéma data: reassembly of `Z`, the survival identity, the martingale
    /// property of `N̂`, the intensity, and the stopped `p^i`.
    pub fn shock_identities(
        &self,
        az: &AzemaData<S>,
        gc: &GCompensator<S>,
        sd: &ShockDecomposition,
        sa: &ShockAzema<S>,
    ) -> Result<Vec<Check>> {
        let tol = self.f().tol.mart;
        let horizon = self.horizon();
        let one = Process::constant(horizon, self.n_outcomes(), S::one());
        let rebuilt = one.sub(&sa.nhat)?.sub(&az.a_pred)?;
        let mut survival = Process::<S>::zeros(horizon, self.n_outcomes());
        for n in 0..=horizon {
            for w in 0..self.n_outcomes() {
                let mut x = S::one() - sa.a0_opt.get(n, w).clone();
                for (i, t) in sd.shocks.iter().enumerate() {
                    if let Some(ti) = t.value(w).filter(|&ti| ti <= n) {
                        x = x - sa.p[i].get(ti, w).clone();
                    }
                }
                survival.set(n, w, x);
            }
        }
        let mut out = vec![
            Check::processes("azema/reassembly 1-Nhat-a=Z", &rebuilt, &az.z, tol),
            Check::processes("azema/survival identity", &survival, &az.z, tol),
            Check::processes("azema/Z = 1 - A", &one.sub(&az.a_opt)?, &az.z, tol),
            Check::processes("azema/Nhat = A - a", &sa.nhat, &az.a_opt.sub(&az.a_pred)?, tol),
            Check::processes("azema/intensity", &sa.intensity, &gc.hazard, tol),
        ];
        let nm = self.f().martingale_check(&sa.nhat)?;
        out.push(Check::new("azema/Nhat martingale", nm.gap, if S::EXACT { 0.0 } else { tol }, nm.worst));
        out.last_mut().unwrap().pass = nm.holds;
        for (i, t) in sd.shocks.iter().enumerate() {
            let stopped = sa.p[i].stopped(t);
            out.push(Check::processes(format!("azema/p{} stopped", i + 1), &sa.p[i], &stopped, tol));
        }
        Ok(out)
    }

    /// `G`-side attribution of the compensator (requires immersion for the
    /// `F`-compensators of the shocks to compensate in `G`).
    pub fn intensity_data(&self, sd: &ShockDecomposition, sa: &ShockAzema<S>) -> Result<IntensityData<S>> {
        let g = self.g_processes(sd)?;
        let mut u = Vec::with_capacity(g.len());
        for (i, gi) in g.iter().enumerate() {
            u.push(bracket_ratio(self, &sa.comps[i], gi, &sd.shocks[i], true)?);
        }
        let horizon = self.horizon();
        let n_out = self.n_outcomes();
        let lambda0 = self
            .g()
            .dual_predictable_projection(&sd.t0.indicator::<S>(horizon))?;
        let mut assembled = Process::<S>::zeros(horizon, n_out);
        for n in 1..=horizon {
            for w in 0..n_out {
                let mut d = lambda0.increment(n, w);
                for (i, t) in sd.shocks.iter().enumerate() {
                    if t.ge(w, n) {
                        let gu = g[i].get(n - 1, w).clone() + u[i].get(n, w).clone();
                        d = d + gu * sa.comps[i].hazard.get(n, w).clone();
                    }
                }
                assembled.set(n, w, assembled.get(n - 1, w).clone() + d);
            }
        }
        Ok(IntensityData {
            g,
            u,
            lambda0,
            assembled,
        })
    }

    /// Optional projection of `∫ H dM` (left sampling) against `∫ oH dM`,
    /// for `G`-adapted `H` and an `F`-martingale `M`.
    pub fn projection_check_adapted(&self, h: &Process<S>, m: &Process<S>) -> Result<Check> {
        let f = self.f();
        let lhs = f.optional_projection(&stochastic_integral(h, m, IntegrandConvention::Left)?)?;
        let rhs = stochastic_integral(&f.optional_projection(h)?, m, IntegrandConvention::Left)?;
        Ok(Check::processes("projection/adapted integrand", &lhs, &rhs, f.tol.mart))
    }

    /// Optional projection of `∫ H dN` against `∫ H dN̂` for `F`-predictable
    /// `H`, with `N̂ = A^τ - a^τ`.
    pub fn projection_check_predictable(
        &self,
        h: &Process<S>,
        az: &AzemaData<S>,
        gc: &GCompensator<S>,
    ) -> Result<Check> {
        let f = self.f();
        let nhat = az.a_opt.sub(&az.a_pred)?;
        let lhs = f.optional_projection(&stochastic_integral(h, &gc.n, IntegrandConvention::AsWritten)?)?;
        let rhs = stochastic_integral(h, &nhat, IntegrandConvention::AsWritten)?;
        Ok(Check::processes("projection/predictable integrand", &lhs, &rhs, f.tol.mart))
    }
}

/// `E[ΔN_n ΔX_n | ·_{n-1}] / ΔΛ_n` where the hazard is positive, else zero;
/// conditioning is on `G` when `in_g`, on `F` otherwise.
fn bracket_ratio<S: Scalar>(
    es: &EnlargedSpace<S>,
    comp: &Compensator<S>,
    x: &Process<S>,
    t: &crate::kernel::RandomTime,
    in_g: bool,
) -> Result<Process<S>> {
    let horizon = es.horizon();
    let n_out = es.n_outcomes();
    let view = if in_g { es.g() } else { es.f() };
    let mut out = Process::<S>::zeros(horizon, n_out);
    for n in 1..=horizon {
        let prod: Vec<S> = (0..n_out)
            .map(|w| comp.n.increment(n, w) * x.increment(n, w))
            .collect();
        let ce = view.cond_exp_before(&prod, n)?;
        for w in 0..n_out {
            let h = comp.hazard.get(n, w);
            if t.ge(w, n) && !h.is_zero() {
                out.set(n, w, ce[w].clone() / h.clone());
            }
        }
    }
    Ok(out)
}
