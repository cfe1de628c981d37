use serde::{Deserialize, Serialize};

use crate::check::Check;
use crate::error::{contract, contract_at, singular, Error, Node, Result};
use crate::kernel::Process;
use crate::scalar::Scalar;

use super::qtau::{cond_before, recovery_decomposition, truncate, Recovery};
use super::{freeze_after, predefault_price, price_brute, DefaultModel, DefaultableClaim, DiscountMode, Rates};

/// `M = Σ_i ∫ f^i dN^i + Σ_i θ^i 1_{T^i ≤ ·} + M̂`.
#[derive(Debug, Clone)]
pub struct Orthogonal<S: Scalar> {
    pub f: Vec<Process<S>>,
    /// `θ^i` recorded at `(T^i, ω)`, zero elsewhere.
    pub theta: Vec<Process<S>>,
    pub m_hat: Process<S>,
    pub checks: Vec<Check>,
}

/// `E[(ΔN^i)^2 | F_{n-1}] = ΔΛ^i (1 - ΔΛ^i)` on `{T^i ≥ n}`.
fn live_hazard<S: Scalar>(model: &DefaultModel<S>, i: usize, n: usize, w: usize) -> S {
    if model.sd.shocks[i].ge(w, n) {
        model.sa.comps[i].hazard.get(n, w).clone()
    } else {
        S::zero()
    }
}

pub fn orthogonal_decomposition<S: Scalar>(m: &Process<S>, model: &DefaultModel<S>) -> Result<Orthogonal<S>> {
    let f = model.space.f();
    if !f.is_martingale(m)? {
        return Err(contract("input is not a martingale"));
    }
    let horizon = model.horizon();
    let n_out = model.n_outcomes();
    let k_sh = model.sd.n_shocks();
    for n in 1..=horizon {
        for w in 0..n_out {
            let active = (0..k_sh).filter(|&i| !live_hazard(model, i, n, w).is_zero()).count();
            if active > 1 {
                return Err(contract_at(
                    n,
                    w,
                    "several shocks are active at one node; their compensated indicators are not orthogonal",
                ));
            }
        }
    }
    let mut fs = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut theta = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut m_hat = Process::<S>::zeros(horizon, n_out);
    for n in 1..=horizon {
        let mut dhat: Vec<S> = (0..n_out).map(|w| m.increment(n, w)).collect();
        for i in 0..k_sh {
            let t = &model.sd.shocks[i];
            let dn = &model.sa.comps[i].n;
            let br = cond_before(f, n, n_out, |w| m.increment(n, w) * dn.increment(n, w))?;
            let on = cond_before(f, n, n_out, |w| if t.is(w, n) { m.increment(n, w) } else { S::zero() })?;
            for w in 0..n_out {
                let hz = live_hazard(model, i, n, w);
                let den = hz.clone() * (S::one() - hz.clone());
                let fi = if den.is_zero() { S::zero() } else { br[w].clone() / den };
                dhat[w] = dhat[w].clone() - fi.clone() * dn.increment(n, w);
                if t.is(w, n) {
                    let th = m.increment(n, w) - on[w].clone() / hz;
                    dhat[w] = dhat[w].clone() - th.clone();
                    theta[i].set(n, w, th);
                }
                fs[i].set(n, w, fi);
            }
        }
        for (w, d) in dhat.into_iter().enumerate() {
            let v = m_hat.get(n - 1, w).clone() + d;
            m_hat.set(n, w, v);
        }
    }
    for w in 0..n_out {
        let start = m.get(0, w).clone();
        for n in 0..=horizon {
            let v = m_hat.get(n, w).clone() + start.clone();
            m_hat.set(n, w, v);
        }
    }
    let tol = f.tol.mart;
    let mut checks = Vec::new();
    let rebuilt = Process::from_fn(horizon, n_out, |n, w| {
        let mut x = m_hat.get(n, w).clone();
        for i in 0..k_sh {
            for k in 1..=n {
                x = x + fs[i].get(k, w).clone() * model.sa.comps[i].n.increment(k, w) + theta[i].get(k, w).clone();
            }
        }
        x
    });
    checks.push(Check::processes("orthogonal/reconstruction", &rebuilt, m, tol));
    let zero = Process::<S>::zeros(horizon, n_out);
    for i in 0..k_sh {
        let mut br = Process::<S>::zeros(horizon, n_out);
        let mut th = Process::<S>::zeros(horizon, n_out);
        let t = &model.sd.shocks[i];
        for n in 1..=horizon {
            let dn = &model.sa.comps[i].n;
            let e = cond_before(f, n, n_out, |w| m_hat.increment(n, w) * dn.increment(n, w))?;
            let et = cond_before(f, n, n_out, |w| theta[i].get(n, w).clone())?;
            for w in 0..n_out {
                br.set(n, w, e[w].clone());
                if t.ge(w, n) {
                    th.set(n, w, et[w].clone());
                }
            }
        }
        checks.push(Check::processes(format!("orthogonal/bracket with N{}", i + 1), &br, &zero, tol));
        checks.push(Check::processes(format!("orthogonal/theta{} mean zero", i + 1), &th, &zero, tol));
    }
    Ok(Orthogonal {
        f: fs,
        theta,
        m_hat,
        checks,
    })
}

/// Prices, premium by both routes, and its attribution.
#[derive(Debug, Clone)]
pub struct PremiumReport<S: Scalar> {
    pub mode: DiscountMode,
    pub maturity: usize,
    /// `S(X)` on `G`.
    pub price: Process<S>,
    /// `S̃(X)` on `F`.
    pub predefault: Process<S>,
    /// Relative drift: `1 + Δν_k = E[S̃_k | F_{k-1}] / S̃_{k-1}`.
    pub nu: Process<S>,
    /// Premium from the drift of `S̃`.
    pub pi: Process<S>,
    /// Premium assembled from the default data.
    pub pi_formula: Process<S>,
    pub idiosyncratic: Process<S>,
    /// One cumulated premium per shock.
    pub shock: Vec<Process<S>>,
    /// Residual martingale `M`, `ΔM_k = (S̃_k - E[S̃_k | F_{k-1}]) / S̃_{k-1}`.
    pub m: Process<S>,
    /// Bracket ratio `E[ΔM ΔN^i | F_-] / (ΔΛ^i (1 - ΔΛ^i))`.
    pub f: Vec<Process<S>>,
    /// `E[ΔM ϕ^i 1_{T^i = ·} | F_-] / ΔΛ^i`.
    pub sigma: Vec<Process<S>>,
    pub varphi: Vec<Process<S>>,
    /// `E[(ΔA^0 - Δa^0) ΔM | F_-] / (g Z_-)`.
    pub iota: Process<S>,
    pub recovery: Recovery<S>,
    /// Largest gap between the two premium routes.
    pub route_gap: f64,
    pub checks: Vec<Check>,
}

impl<S: Scalar> PremiumReport<S> {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Cumulates increments stored at `1..=t` into a process frozen after `t`.
fn cumulate<S: Scalar>(inc: &Process<S>, t: usize) -> Process<S> {
    let mut out = Process::<S>::zeros(inc.horizon(), inc.n_outcomes());
    for n in 1..=t {
        for w in 0..inc.n_outcomes() {
            let v = out.get(n - 1, w).clone() + inc.get(n, w).clone();
            out.set(n, w, v);
        }
    }
    freeze_after(&mut out, t);
    out
}

/// Direct route only: `1 + Δν_k = E[S̃_k | F_{k-1}] / S̃_{k-1}`, and the
/// premium `Δπ = (1 + Δν)/g - 1` (discrete-exact) or `Δν - r Δt` (continuous).
/// Returns `(ν, π, M)`.
pub fn premium_direct<S: Scalar>(
    predefault: &Process<S>,
    maturity: usize,
    model: &DefaultModel<S>,
    rates: &Rates<S>,
) -> Result<(Process<S>, Process<S>, Process<S>)> {
    let f = model.space.f();
    let horizon = model.horizon();
    let n_out = model.n_outcomes();
    let g = rates.growth();
    let mut dnu = Process::<S>::zeros(horizon, n_out);
    let mut dpi = Process::<S>::zeros(horizon, n_out);
    let mut dm = Process::<S>::zeros(horizon, n_out);
    for k in 1..=maturity {
        let es = f.cond_exp_before(predefault.at(k), k)?;
        for w in 0..n_out {
            if model.az.z.get(k - 1, w).is_zero() {
                continue;
            }
            let prev = predefault.get(k - 1, w);
            if prev.is_zero() || *prev < S::zero() {
                return Err(singular(k - 1, w, "pre-default price is not positive"));
            }
            let nu = es[w].clone() / prev.clone() - S::one();
            let pi = match rates.mode {
                DiscountMode::DiscreteExact => (S::one() + nu.clone()) / g.get(k, w).clone() - S::one(),
                DiscountMode::Continuous => nu.clone() - rates.r.get(k, w).clone() * rates.dt.clone(),
            };
            dm.set(k, w, (predefault.get(k, w).clone() - es[w].clone()) / prev.clone());
            dnu.set(k, w, nu);
            dpi.set(k, w, pi);
        }
    }
    Ok((cumulate(&dnu, maturity), cumulate(&dpi, maturity), cumulate(&dm, maturity)))
}

pub fn risk_premium<S: Scalar>(
    claim: &DefaultableClaim<S>,
    model: &DefaultModel<S>,
    rates: &Rates<S>,
) -> Result<PremiumReport<S>> {
    let es = &model.space;
    let t = claim.maturity;
    let price = price_brute(claim, es, rates)?;
    let predefault = predefault_price(claim, es, &model.az, rates)?;
    let (nu, pi, m) = premium_direct(&predefault, t, model, rates)?;
    let recovery = recovery_decomposition(claim, model)?;

    let f = es.f();
    let horizon = model.horizon();
    let n_out = model.n_outcomes();
    let k_sh = model.sd.n_shocks();
    let sa = &model.sa;
    let z = &model.az.z;
    let g = rates.growth();
    let exact = rates.mode == DiscountMode::DiscreteExact;

    let mut fs = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut sigma = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut varphi = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut iota = Process::<S>::zeros(horizon, n_out);
    let mut d_idio = Process::<S>::zeros(horizon, n_out);
    let mut d_shock = vec![Process::<S>::zeros(horizon, n_out); k_sh];
    let mut d_total = Process::<S>::zeros(horizon, n_out);

    for k in 1..=t {
        let dm_k = |w: usize| m.increment(k, w);
        let e_io = cond_before(f, k, n_out, |w| {
            (sa.a0_opt.increment(k, w) - sa.a0_pred.increment(k, w)) * dm_k(w)
        })?;
        let mut brs = Vec::with_capacity(k_sh);
        let mut jms = Vec::with_capacity(k_sh);
        for i in 0..k_sh {
            let ti = &model.sd.shocks[i];
            let dn = &sa.comps[i].n;
            brs.push(cond_before(f, k, n_out, |w| dm_k(w) * dn.increment(k, w))?);
            jms.push(cond_before(f, k, n_out, |w| {
                if ti.is(w, k) {
                    dm_k(w) * recovery.p_jump[i].get(k, w).clone()
                } else {
                    S::zero()
                }
            })?);
        }
        for w in 0..n_out {
            let zp = z.get(k - 1, w).clone();
            if zp.is_zero() {
                continue;
            }
            let gk = if exact { g.get(k, w).clone() } else { S::one() };
            let gs = gk.clone() * predefault.get(k - 1, w).clone();
            let dl = model.hazard().get(k, w).clone();
            let surv = S::one() - dl.clone();
            if exact && surv.is_zero() {
                return Err(singular(k, w, "certain default within one step; premium formula undefined"));
            }
            let norm = |x: S| if exact { x / surv.clone() } else { x };
            let io = e_io[w].clone() / (gk.clone() * zp.clone());
            let da0 = sa.a0_pred.increment(k, w);
            let c0t = recovery.c0.get(k, w).clone() / gs.clone();
            let idio = norm((S::one() - c0t) * da0 / zp.clone() + io.clone());
            iota.set(k, w, io);
            d_idio.set(k, w, idio.clone());
            let mut total = idio;
            let ct = claim.recovery.get(k - 1, w).clone() / gs.clone();
            for i in 0..k_sh {
                let hz = live_hazard(model, i, k, w);
                let den = hz.clone() * (S::one() - hz.clone());
                let fi = if den.is_zero() { S::zero() } else { brs[i][w].clone() / den };
                let si = if hz.is_zero() { S::zero() } else { jms[i][w].clone() / hz.clone() };
                let pv = sa.p[i].get(k - 1, w).clone() + sa.v[i].get(k, w).clone();
                let vp = if pv.is_zero() {
                    fi.clone() * (S::one() - hz.clone())
                } else {
                    fi.clone() * (S::one() - hz.clone()) + si.clone() / pv.clone()
                };
                let ht = recovery.h[i].get(k, w).clone() / gs.clone();
                let part = norm((S::one() - ct.clone() + ht + vp.clone() / gk.clone()) * pv * hz / zp.clone());
                fs[i].set(k, w, fi);
                sigma[i].set(k, w, si);
                varphi[i].set(k, w, vp);
                d_shock[i].set(k, w, part.clone());
                total = total + part;
            }
            d_total.set(k, w, total);
        }
    }
    let pi_formula = cumulate(&d_total, t);
    let idiosyncratic = cumulate(&d_idio, t);
    let shock: Vec<Process<S>> = d_shock.iter().map(|d| cumulate(d, t)).collect();

    let tol = f.tol.mart;
    let mut checks = Vec::new();
    let routes = Check::processes("premium/two routes", &pi, &pi_formula, tol);
    let route_gap = routes.max_error;
    if exact && !routes.pass {
        return Err(Error::Consistency {
            node: routes.worst.unwrap_or(Node { time: 0, outcome: 0 }),
            msg: "direct and formula premium routes disagree".into(),
            gap: route_gap,
        });
    }
    if exact {
        checks.push(routes);
    }
    let mut parts = idiosyncratic.clone();
    for s in &shock {
        parts = parts.add(s)?;
    }
    checks.push(Check::processes("premium/split sums to total", &parts, &pi_formula, tol));
    let mc = f.martingale_check(&truncate(&m, t))?;
    let mut ck = Check::new("premium/residual martingale", mc.gap, tol, mc.worst);
    ck.pass = mc.holds;
    checks.push(ck);
    if exact {
        // ΔS̃/S̃_- = g(1 + Δπ) - 1 + ΔM with the formula premium
        let lhs = Process::from_fn(horizon, n_out, |n, w| {
            if n == 0 || n > t {
                S::zero()
            } else {
                predefault.increment(n, w) / predefault.get(n - 1, w).clone()
            }
        });
        let rhs = Process::from_fn(horizon, n_out, |n, w| {
            if n == 0 || n > t {
                S::zero()
            } else {
                g.get(n, w).clone() * (S::one() + pi_formula.increment(n, w)) - S::one() + m.increment(n, w)
            }
        });
        checks.push(Check::processes("premium/price dynamics", &lhs, &rhs, tol));
    }
    let masked = Process::from_fn(horizon, n_out, |n, w| {
        if es.tau().le(w, n) {
            S::zero()
        } else {
            price.get(n, w).clone() - predefault.get(n, w).clone()
        }
    });
    checks.push(Check::processes(
        "premium/pre-default masking",
        &masked,
        &Process::zeros(horizon, n_out),
        tol,
    ));
    Ok(PremiumReport {
        mode: rates.mode,
        maturity: t,
        price,
        predefault,
        nu,
        pi,
        pi_formula,
        idiosyncratic,
        shock,
        m,
        f: fs,
        sigma,
        varphi,
        iota,
        recovery,
        route_gap,
        checks,
    })
}

/// Premium in closed form for predictable recovery and no charged shocks:
/// `Δπ_k (1 - ΔΛ_k) = (1 - C_k / (g_k S̃_{k-1})) ΔΛ_k` (discrete-exact), or
/// `Δπ_k = (1 - C_k / S̃_{k-1}) ΔΛ_k` (continuous).
pub fn shock_free_premium<S: Scalar>(
    claim: &DefaultableClaim<S>,
    model: &DefaultModel<S>,
    rates: &Rates<S>,
    predefault: &Process<S>,
) -> Result<Process<S>> {
    let es = &model.space;
    let f = es.f();
    if !claim
        .recovery
        .has_level(es.tree().filtration(), crate::kernel::Level::Predictable, 0.0)
    {
        return Err(contract("recovery is not predictable"));
    }
    if model.az.a_opt.first_mismatch(&model.az.a_pred, f.tol.mart).is_some() {
        return Err(contract("dual optional and dual predictable projections differ"));
    }
    let t = claim.maturity;
    let g = rates.growth();
    let exact = rates.mode == DiscountMode::DiscreteExact;
    let mut inc = Process::<S>::zeros(model.horizon(), model.n_outcomes());
    for k in 1..=t {
        for w in 0..model.n_outcomes() {
            let dl = model.hazard().get(k, w).clone();
            let prev = predefault.get(k - 1, w).clone();
            if prev.is_zero() {
                return Err(singular(k - 1, w, "pre-default price is zero"));
            }
            let v = if exact {
                let ct = claim.recovery.get(k, w).clone() / (g.get(k, w).clone() * prev);
                (S::one() - ct) * dl.clone() / (S::one() - dl)
            } else {
                (S::one() - claim.recovery.get(k, w).clone() / prev) * dl
            };
            inc.set(k, w, v);
        }
    }
    Ok(cumulate(&inc, t))
}

/// How a per-step spread is read off the premium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadConvention {
    /// `e^{s Δt} = 1 + Δπ`.
    Exponential,
    /// `1 + s Δt = 1 + Δπ`.
    Multiplicative,
}

#[derive(Debug, Clone)]
pub struct CreditSpread<S: Scalar> {
    pub s: Process<S>,
    /// `S̃_n = E[P Π_{n<k≤T} (g_k (1 + Δπ_k))^{-1} | F_n]`; exact in
    /// discrete-exact mode.
    pub check: Check,
}

pub fn credit_spread<S: Scalar>(
    claim: &DefaultableClaim<S>,
    model: &DefaultModel<S>,
    rates: &Rates<S>,
    convention: SpreadConvention,
) -> Result<CreditSpread<S>> {
    let es = &model.space;
    let t = claim.maturity;
    let predefault = predefault_price(claim, es, &model.az, rates)?;
    let (_, pi, _) = premium_direct(&predefault, t, model, rates)?;
    let horizon = model.horizon();
    let n_out = model.n_outcomes();
    let s = Process::from_fn(horizon, n_out, |n, w| {
        if n == 0 || n > t {
            return S::zero();
        }
        let dp = pi.increment(n, w);
        match convention {
            SpreadConvention::Exponential => (S::one() + dp).ln() / rates.dt.clone(),
            SpreadConvention::Multiplicative => dp / rates.dt.clone(),
        }
    });
    let g = rates.growth();
    let f = es.f();
    let mut rebuilt = Process::<S>::zeros(horizon, n_out);
    for n in 0..=t {
        let x: Vec<S> = (0..n_out)
            .map(|w| {
                let mut disc = S::one();
                for k in n + 1..=t {
                    disc = disc * g.get(k, w).clone() * (S::one() + pi.increment(k, w));
                }
                claim.promised[w].clone() / disc
            })
            .collect();
        let ce = f.cond_exp(&x, n)?;
        for (w, v) in ce.into_iter().enumerate() {
            rebuilt.set(n, w, v);
        }
    }
    freeze_after(&mut rebuilt, t);
    let check = Check::processes("spread/discounting identity", &rebuilt, &predefault, f.tol.mart);
    Ok(CreditSpread { s, check })
}
