use crate::check::Check;
use crate::error::{contract_at, singular, Result};
use crate::kernel::{Filtered, Process};
use crate::scalar::Scalar;

use super::{freeze_after, DefaultModel, DefaultableClaim, DiscountMode, Rates};

/// `E[x | F_{n-1}]` for a vector built outcome by outcome.
pub(crate) fn cond_before<S: Scalar>(
    f: Filtered<'_, S>,
    n: usize,
    n_out: usize,
    x: impl Fn(usize) -> S,
) -> Result<Vec<S>> {
    let v: Vec<S> = (0..n_out).map(x).collect();
    f.cond_exp_before(&v, n)
}

/// Recovery split along the shocks:
/// `C = Ĉ - Σ_i (c^i_{T^i} + κ^i) 1_{T^i ≤ ·}`.
#[derive(Debug, Clone)]
pub struct Recovery<S: Scalar> {
    /// `-ΔC_{T^i}` on `{T^i ≤ N}`, zero elsewhere.
    pub loss: Vec<Vec<S>>,
    /// Predictable expected loss `c^i_k = E[loss 1_{T^i=k} | F_{k-1}] / ΔΛ^i_k`.
    pub c: Vec<Process<S>>,
    /// Mean-zero remainder `κ^i = loss - c^i_{T^i}`.
    pub kappa: Vec<Vec<S>>,
    pub c_hat: Process<S>,
    /// `κ̃^i_k = E[κ^i ϕ^i 1_{T^i=k} | F_{k-1}] / ΔΛ^i_k`.
    pub kappa_tilde: Vec<Process<S>>,
    /// `h^i = c^i + κ̃^i / (p^i_- + v^i)`, or `c^i` where `p^i_- + v^i = 0`.
    pub h: Vec<Process<S>>,
    /// `ϕ^i_k = Δp^i_k - v^i_k` on `{T^i = k}`, zero elsewhere.
    pub p_jump: Vec<Process<S>>,
    /// `C^0_k = E[C_k ΔA^0_k | F_{k-1}] / Δa^0_k`.
    pub c0: Process<S>,
    /// Predictable recovery drift `Y_k`, with `Z_{k-1} Y_k = E[C_k ΔA^τ_k | F_{k-1}]`.
    pub y: Process<S>,
}

pub fn recovery_decomposition<S: Scalar>(
    claim: &DefaultableClaim<S>,
    model: &DefaultModel<S>,
) -> Result<Recovery<S>> {
    claim.validate(&model.space)?;
    let f = model.space.f();
    let horizon = model.horizon();
    let n_out = model.n_outcomes();
    let sd = &model.sd;
    let sa = &model.sa;
    let cr = &claim.recovery;
    let k_sh = sd.n_shocks();

    let mut loss = vec![vec![S::zero(); n_out]; k_sh];
    for (i, t) in sd.shocks.iter().enumerate() {
        for (w, l) in loss[i].iter_mut().enumerate() {
            if let Some(ti) = t.value(w) {
                *l = -cr.increment(ti, w);
            }
        }
    }

    let mut c = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut kappa_tilde = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut h = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut p_jump = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    for (i, t) in sd.shocks.iter().enumerate() {
        let hz = &sa.comps[i].hazard;
        for n in 1..=horizon {
            for w in 0..n_out {
                if t.is(w, n) {
                    let v = sa.p[i].increment(n, w) - sa.v[i].get(n, w).clone();
                    p_jump[i].set(n, w, v);
                }
            }
            let el = cond_before(f, n, n_out, |w| {
                if t.is(w, n) {
                    loss[i][w].clone()
                } else {
                    S::zero()
                }
            })?;
            for w in 0..n_out {
                if !hz.get(n, w).is_zero() {
                    c[i].set(n, w, el[w].clone() / hz.get(n, w).clone());
                }
            }
        }
    }
    let kappa: Vec<Vec<S>> = (0..k_sh)
        .map(|i| {
            (0..n_out)
                .map(|w| match sd.shocks[i].value(w) {
                    Some(ti) => loss[i][w].clone() - c[i].get(ti, w).clone(),
                    None => S::zero(),
                })
                .collect()
        })
        .collect();
    for (i, t) in sd.shocks.iter().enumerate() {
        let hz = &sa.comps[i].hazard;
        for n in 1..=horizon {
            let ek = cond_before(f, n, n_out, |w| {
                if t.is(w, n) {
                    kappa[i][w].clone() * p_jump[i].get(n, w).clone()
                } else {
                    S::zero()
                }
            })?;
            for w in 0..n_out {
                let hzw = hz.get(n, w);
                if hzw.is_zero() {
                    continue;
                }
                let kt = ek[w].clone() / hzw.clone();
                let pv = sa.p[i].get(n - 1, w).clone() + sa.v[i].get(n, w).clone();
                let hv = if pv.is_zero() {
                    c[i].get(n, w).clone()
                } else {
                    c[i].get(n, w).clone() + kt.clone() / pv
                };
                kappa_tilde[i].set(n, w, kt);
                h[i].set(n, w, hv);
            }
        }
    }

    let c_hat = Process::from_fn(horizon, n_out, |n, w| {
        let mut x = cr.get(n, w).clone();
        for (i, t) in sd.shocks.iter().enumerate() {
            if t.le(w, n) {
                x = x + loss[i][w].clone();
            }
        }
        x
    });

    let mut c0 = Process::<S>::zeros(horizon, n_out);
    let mut y = Process::<S>::zeros(horizon, n_out);
    for n in 1..=horizon {
        let num = cond_before(f, n, n_out, |w| cr.get(n, w).clone() * sa.a0_opt.increment(n, w))?;
        for w in 0..n_out {
            let da0 = sa.a0_pred.increment(n, w);
            if !da0.is_zero() {
                c0.set(n, w, num[w].clone() / da0.clone());
            }
            let zp = model.az.z.get(n - 1, w);
            if zp.is_zero() {
                continue;
            }
            let mut acc = c0.get(n, w).clone() * da0;
            for (i, t) in sd.shocks.iter().enumerate() {
                if !t.ge(w, n) {
                    continue;
                }
                let pv = sa.p[i].get(n - 1, w).clone() + sa.v[i].get(n, w).clone();
                let weight = pv * sa.comps[i].hazard.get(n, w).clone();
                acc = acc + (cr.get(n - 1, w).clone() - h[i].get(n, w).clone()) * weight;
            }
            y.set(n, w, acc / zp.clone());
        }
    }

    Ok(Recovery {
        loss,
        c,
        kappa,
        c_hat,
        kappa_tilde,
        h,
        p_jump,
        c0,
        y,
    })
}

impl<S: Scalar> Recovery<S> {
    /// Reassembly of `C`, no jump of `Ĉ` at the shocks, mean-zero `κ^i`
    /// and `ϕ^i`, and the defining identity of `Y`.
    pub fn checks(&self, claim: &DefaultableClaim<S>, model: &DefaultModel<S>) -> Result<Vec<Check>> {
        let f = model.space.f();
        let tol = f.tol.mart;
        let horizon = model.horizon();
        let n_out = model.n_outcomes();
        let sd = &model.sd;
        let mut out = Vec::new();
        let rebuilt = Process::from_fn(horizon, n_out, |n, w| {
            let mut x = self.c_hat.get(n, w).clone();
            for (i, t) in sd.shocks.iter().enumerate() {
                if let Some(ti) = t.value(w).filter(|&ti| ti <= n) {
                    x = x - self.c[i].get(ti, w).clone() - self.kappa[i][w].clone();
                }
            }
            x
        });
        out.push(Check::processes("recovery/reassembly", &rebuilt, &claim.recovery, tol));
        let jumps = Process::from_fn(horizon, n_out, |n, w| {
            if sd.shocks.iter().any(|t| t.is(w, n)) {
                self.c_hat.increment(n, w)
            } else {
                S::zero()
            }
        });
        let zero = Process::<S>::zeros(horizon, n_out);
        out.push(Check::processes("recovery/no jump at shocks", &jumps, &zero, tol));
        for (i, t) in sd.shocks.iter().enumerate() {
            let ki = Process::from_fn(horizon, n_out, |n, w| {
                if t.le(w, n) {
                    self.kappa[i][w].clone()
                } else {
                    S::zero()
                }
            });
            let mc = f.martingale_check(&ki)?;
            let mut ck = Check::new(format!("recovery/kappa{} martingale", i + 1), mc.gap, tol, mc.worst);
            ck.pass = mc.holds;
            out.push(ck);
            let mut cum = Process::<S>::zeros(horizon, n_out);
            for n in 1..=horizon {
                for w in 0..n_out {
                    let v = cum.get(n - 1, w).clone() + self.p_jump[i].get(n, w).clone();
                    cum.set(n, w, v);
                }
            }
            let mc = f.martingale_check(&cum)?;
            let mut ck = Check::new(format!("recovery/p{} jump mean zero", i + 1), mc.gap, tol, mc.worst);
            ck.pass = mc.holds;
            out.push(ck);
        }
        let mut lhs = Process::<S>::zeros(horizon, n_out);
        let mut rhs = Process::<S>::zeros(horizon, n_out);
        for n in 1..=horizon {
            let e = cond_before(f, n, n_out, |w| {
                claim.recovery.get(n, w).clone() * model.az.a_opt.increment(n, w)
            })?;
            for w in 0..n_out {
                lhs.set(n, w, model.az.z.get(n - 1, w).clone() * self.y.get(n, w).clone());
                rhs.set(n, w, e[w].clone());
            }
        }
        out.push(Check::processes("recovery/drift identity", &lhs, &rhs, tol));
        Ok(out)
    }
}

/// Default-adjusted density process and the resulting terminal weights.
#[derive(Debug, Clone)]
pub struct MeasureChange<S: Scalar> {
    pub mode: DiscountMode,
    pub maturity: usize,
    /// `D_n = Z_n / (Z_0 L_n)`, `L` the survival factor of the mode.
    pub d: Process<S>,
    /// Stochastic exponential of `∫ dm / (Z_- - Δa)` (exact) or `∫ dm / Z_-` (continuous).
    pub exponential: Process<S>,
    /// `Q`-weights of the outcomes: `D_T` times the `P`-weights.
    pub weights: Vec<S>,
    pub checks: Vec<Check>,
}

pub fn measure_change<S: Scalar>(
    model: &DefaultModel<S>,
    mode: DiscountMode,
    maturity: usize,
) -> Result<MeasureChange<S>> {
    let horizon = model.horizon();
    let n_out = model.n_outcomes();
    if maturity > horizon {
        return Err(crate::error::Error::Range(format!(
            "maturity {} beyond horizon {}",
            maturity, horizon
        )));
    }
    let f = model.space.f();
    let z = &model.az.z;
    let haz = model.hazard();
    for n in 1..=maturity {
        for w in 0..n_out {
            if haz.get(n, w).clone() == S::one() && !z.get(n - 1, w).is_zero() {
                return Err(singular(n, w, "certain default within one step; no default-adjusted measure"));
            }
        }
    }
    for w in 0..n_out {
        if z.get(0, w).is_zero() {
            return Err(singular(0, w, "Z_0 = 0"));
        }
    }
    let surv = model.survival_factor(mode);
    let d = Process::from_fn(horizon, n_out, |n, w| {
        let l = surv.get(n, w).clone();
        if l.is_zero() {
            S::zero()
        } else {
            z.get(n, w).clone() / (z.get(0, w).clone() * l)
        }
    });
    let mut exponential = Process::<S>::constant(horizon, n_out, S::one());
    for n in 1..=horizon {
        for w in 0..n_out {
            let zp = z.get(n - 1, w).clone();
            let den = match mode {
                DiscountMode::DiscreteExact => zp - model.az.a_pred.increment(n, w),
                DiscountMode::Continuous => zp,
            };
            let step = if den.is_zero() {
                S::zero()
            } else {
                S::one() + model.az.m.increment(n, w) / den
            };
            let v = exponential.get(n - 1, w).clone() * step;
            exponential.set(n, w, v);
        }
    }
    for n in 0..=maturity {
        for w in 0..n_out {
            if *d.get(n, w) < S::zero() {
                return Err(contract_at(n, w, "negative density"));
            }
        }
    }
    let probs = model.space.tree().probs();
    let weights: Vec<S> = (0..n_out)
        .map(|w| d.get(maturity, w).clone() * probs[w].clone())
        .collect();
    let tol = f.tol.mart;
    let mut checks = Vec::new();
    let mc = f.martingale_check(&truncate(&d, maturity))?;
    let mut ck = Check::new("measure/D martingale", mc.gap, tol, mc.worst);
    ck.pass = mc.holds;
    checks.push(ck);
    checks.push(Check::processes(
        "measure/D stochastic exponential",
        &truncate(&d, maturity),
        &truncate(&exponential, maturity),
        tol,
    ));
    let total = crate::scalar::sum(weights.iter().cloned());
    let gap = (total - S::one()).abs().to_f64();
    checks.push(Check::new("measure/weights sum to one", gap, if S::EXACT { 0.0 } else { tol }, None));
    Ok(MeasureChange {
        mode,
        maturity,
        d,
        exponential,
        weights,
        checks,
    })
}

/// The process frozen after `t`.
pub(crate) fn truncate<S: Scalar>(p: &Process<S>, t: usize) -> Process<S> {
    let mut q = p.clone();
    freeze_after(&mut q, t);
    q
}

/// Pre-default price under the default-adjusted measure.
#[derive(Debug, Clone)]
pub struct QtauPrice<S: Scalar> {
    /// Shock-aware formula, including the `h^i` corrections.
    pub price: Process<S>,
    /// The same formula with the `h^i` terms dropped.
    pub naive: Process<S>,
    /// `naive - price`.
    pub h_term: Process<S>,
    pub recovery: Recovery<S>,
    pub measure: MeasureChange<S>,
}

/// `S̃_n = B̃_n E^Q[P B̃_T^{-1} + Σ_{n<k≤T} B_k^{-1} L_{k-1} Y_k | F_n]`
/// with `B̃ = B / L`.
pub fn price_via_qtau<S: Scalar>(
    claim: &DefaultableClaim<S>,
    model: &DefaultModel<S>,
    rates: &Rates<S>,
) -> Result<QtauPrice<S>> {
    claim.validate(&model.space)?;
    rates.validate(&model.space)?;
    let recovery = recovery_decomposition(claim, model)?;
    let t = claim.maturity;
    let measure = measure_change(model, rates.mode, t)?;
    let f = model.space.f();
    let horizon = model.horizon();
    let n_out = model.n_outcomes();
    let b = rates.bank();
    let surv = model.survival_factor(rates.mode);
    let sa = &model.sa;

    // h-part of Z_{k-1} Y_k, divided by Z_{k-1}
    let mut yh = Process::<S>::zeros(horizon, n_out);
    for k in 1..=horizon {
        for w in 0..n_out {
            let zp = model.az.z.get(k - 1, w);
            if zp.is_zero() {
                continue;
            }
            let mut acc = S::zero();
            for (i, ti) in model.sd.shocks.iter().enumerate() {
                if ti.ge(w, k) {
                    let pv = sa.p[i].get(k - 1, w).clone() + sa.v[i].get(k, w).clone();
                    acc = acc + recovery.h[i].get(k, w).clone() * pv * sa.comps[i].hazard.get(k, w).clone();
                }
            }
            yh.set(k, w, acc / zp.clone());
        }
    }

    let d = &measure.d;
    let leg = |n: usize, w: usize, y: &Process<S>| -> S {
        let mut acc = claim.promised[w].clone() * surv.get(t, w).clone() / b.get(t, w).clone();
        for k in n + 1..=t {
            acc = acc + y.get(k, w).clone() * surv.get(k - 1, w).clone() / b.get(k, w).clone();
        }
        d.get(t, w).clone() * acc
    };
    let naive_y = recovery.y.add(&yh)?;
    let mut price = Process::<S>::zeros(horizon, n_out);
    let mut naive = Process::<S>::zeros(horizon, n_out);
    for n in 0..=t {
        let full: Vec<S> = (0..n_out).map(|w| leg(n, w, &recovery.y)).collect();
        let nv: Vec<S> = (0..n_out).map(|w| leg(n, w, &naive_y)).collect();
        let ef = f.cond_exp(&full, n)?;
        let en = f.cond_exp(&nv, n)?;
        for w in 0..n_out {
            let dn = d.get(n, w);
            if dn.is_zero() {
                if n < t {
                    return Err(singular(n, w, "density vanishes before maturity"));
                }
                price.set(n, w, claim.promised[w].clone());
                naive.set(n, w, claim.promised[w].clone());
                continue;
            }
            let scale = b.get(n, w).clone() / (surv.get(n, w).clone() * dn.clone());
            price.set(n, w, scale.clone() * ef[w].clone());
            naive.set(n, w, scale * en[w].clone());
        }
    }
    freeze_after(&mut price, t);
    freeze_after(&mut naive, t);
    let h_term = naive.sub(&price)?;
    Ok(QtauPrice {
        price,
        naive,
        h_term,
        recovery,
        measure,
    })
}
