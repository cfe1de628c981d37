//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p shockdefault-core --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shockdefault::check::Check;
use shockdefault::construct::{construct_tau, family_construct, ConstructionMode, ConstructionSpec, ThetaGrid};
use shockdefault::enlargement::EnlargedSpace;
use shockdefault::fixtures::{self, coupon_default, predictable_atom, random_tree, Fixture, RandomOptions};
use shockdefault::mc::{estimate, run_fixture, sample_outcomes, McConfig};
use shockdefault::pricing::{
    bond_price, loss_no_predictable_check, predefault_price, price_brute, price_via_qtau, risk_premium,
    shock_free_premium, DefaultModel, DefaultableClaim, DiscountMode, Rates,
};
use shockdefault::stopping::is_predictable;
use shockdefault::{Process, RandomTime, Rational, Scalar, ScenarioTree};

type Q = Rational;
type Outcome = Result<String, String>;

fn q(a: i64, b: i64) -> Q {
    Q::ratio(a, b)
}

fn fail<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> String {
    move |e| format!("{}: {}", ctx, e)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ensure_check(c: &Check, ctx: &str) -> Result<(), String> {
    ensure(c.pass, || format!("{}: {}", ctx, c))
}

fn named_exact(name: &str) -> Result<Fixture<Q>, String> {
    fixtures::named(name, DiscountMode::DiscreteExact).map_err(fail(name))
}

/// Mixed random options: plain, shock-free, predictable, single-shock.
fn options(seed: u64) -> RandomOptions {
    let d = RandomOptions::default();
    match seed % 4 {
        0 => d,
        1 => RandomOptions { shock_free: true, ..d },
        2 => RandomOptions { predictable: true, ..d },
        _ => RandomOptions { max_shocks: 1, horizon: 4, max_branching: 2, ..d },
    }
}

fn random_exact(seed: u64) -> Result<Fixture<Q>, String> {
    fixtures::random(seed, options(seed), DiscountMode::DiscreteExact).map_err(fail(format!("random seed {}", seed)))
}

// ---------------------------------------------------------------- 1

/// `E[Σ_n X_n ΔA_n]` with `ΔA_0 = A_0`.
fn pairing<S: Scalar>(tree: &ScenarioTree<S>, x: &Process<S>, a: &Process<S>) -> S {
    let n_out = tree.n_outcomes();
    let path: Vec<S> = (0..n_out)
        .map(|w| {
            let mut acc = x.get(0, w).clone() * a.get(0, w).clone();
            for n in 1..=a.horizon() {
                acc = acc + x.get(n, w).clone() * a.increment(n, w);
            }
            acc
        })
        .collect();
    tree.expect(&path)
}

/// Largest duality gap over `trees` random trees and `per_tree` raw test
/// processes each; both the optional and predictable pairings.
fn duality_gap<S: Scalar>(trees: u64, per_tree: usize) -> Result<(f64, usize), String> {
    let mut worst = 0.0f64;
    let mut max_atoms = 0;
    for seed in 0..trees {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let horizon = rng.random_range(2..=4);
        let branching = if horizon == 4 { 3 } else { 4 };
        let (base, _) = random_tree::<S>(&mut rng, horizon, branching).map_err(fail("tree"))?;
        let tree = base.extend_with_uniform(2).map_err(fail("extend"))?;
        let n_out = tree.n_outcomes();
        max_atoms = max_atoms.max(n_out);
        let mut a = Process::<S>::zeros(horizon, n_out);
        for w in 0..n_out {
            let mut v = S::ratio(rng.random_range(0..3), 10);
            a.set(0, w, v.clone());
            for n in 1..=horizon {
                v = v + S::ratio(rng.random_range(0..4), 10);
                a.set(n, w, v.clone());
            }
        }
        let f = tree.f();
        let ao = f.dual_optional_projection(&a).map_err(fail("dual optional"))?;
        let ap = f.dual_predictable_projection(&a).map_err(fail("dual predictable"))?;
        for _ in 0..per_tree {
            let x = Process::from_fn(horizon, n_out, |_, _| S::ratio(rng.random_range(-20..=20), 7));
            let ox = f.optional_projection(&x).map_err(fail("optional"))?;
            let px = f.predictable_projection(&x).map_err(fail("predictable"))?;
            for (lhs, rhs) in [
                (pairing(&tree, &ox, &a), pairing(&tree, &x, &ao)),
                (pairing(&tree, &px, &a), pairing(&tree, &x, &ap)),
            ] {
                let d = (lhs.clone() - rhs.clone()).abs();
                if S::EXACT && !d.is_zero() {
                    return Err(format!("tree {}: exact duality broken ({:?} vs {:?})", seed, lhs, rhs));
                }
                worst = worst.max(d.to_f64());
            }
        }
    }
    Ok((worst, max_atoms))
}

fn criterion_1() -> Outcome {
    let (_, atoms) = duality_gap::<Q>(100, 50)?;
    ensure(atoms <= 200, || format!("tree with {} atoms", atoms))?;
    let (gap, _) = duality_gap::<f64>(100, 50)?;
    ensure(gap <= 1e-10, || format!("double-mode gap {:e} > 1e-10", gap))?;
    Ok(format!("100 trees x 50 processes, rational exact, double max error {:.2e}, max atoms {}", gap, atoms))
}

// ---------------------------------------------------------------- 2

fn enlarged_suite() -> Result<Vec<(String, EnlargedSpace<Q>)>, String> {
    let mut out = Vec::new();
    for name in fixtures::NAMES {
        out.push((name.to_string(), named_exact(name)?.model.space));
    }
    for seed in 0..16 {
        let fx = random_exact(seed)?;
        out.push((fx.name.clone(), fx.model.space));
    }
    let tree = ScenarioTree::<Q>::binomial(4, q(1, 2)).map_err(fail("tree"))?;
    out.push(("coupon".into(), coupon_default(&tree, &[2, 4], q(1, 3)).map_err(fail("coupon"))?));
    for seed in 0..3 {
        out.push((format!("atom-{}", seed), predictable_atom(seed).map_err(fail("atom"))?));
    }
    Ok(out)
}

fn criterion_2() -> Outcome {
    let suite = enlarged_suite()?;
    for (name, es) in &suite {
        let az = es.azema().map_err(fail(name))?;
        let gc = es.g_compensator(&az).map_err(fail(name))?;
        let mc = es.g().martingale_check(&gc.n).map_err(fail(name))?;
        ensure(mc.holds && mc.gap == 0.0, || format!("{}: gap {:e} at {:?}", name, mc.gap, mc.worst))?;
    }
    Ok(format!("{} enlarged spaces, zero error", suite.len()))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let mut fx = Vec::new();
    for name in fixtures::NAMES {
        fx.push(named_exact(name)?);
    }
    for seed in 0..40 {
        fx.push(random_exact(seed)?);
    }
    let mut identities = 0;
    let (mut equal, mut unequal) = (0, 0);
    for f in &fx {
        let es = &f.model.space;
        ensure(es.check_immersion().map_err(fail(&f.name))?.holds, || format!("{} not immersed", f.name))?;
        let m = &f.model;
        for c in es.shock_identities(&m.az, &m.gc, &m.sd, &m.sa).map_err(fail(&f.name))? {
            ensure_check(&c, &f.name)?;
            identities += 1;
        }
        let observed = m.az.a_opt == m.az.a_pred;
        let filt = es.tree().filtration();
        let mut predicted = m.sa.a0_opt == m.sa.a0_pred;
        for (i, t) in m.sd.shocks.iter().enumerate() {
            if m.sd.charged(es.tree(), i) && !is_predictable(t, filt).map_err(fail(&f.name))? {
                predicted = false;
            }
        }
        ensure(observed == predicted, || {
            format!("{}: A = a is {} but the shock criterion says {}", f.name, observed, predicted)
        })?;
        if observed {
            equal += 1;
        } else {
            unequal += 1;
        }
    }
    ensure(equal > 0 && unequal > 0, || format!("one-sided suite ({} equal, {} unequal)", equal, unequal))?;
    Ok(format!(
        "{} fixtures, {} identity checks exact; A = a on {} and A != a on {}, all as predicted",
        fx.len(),
        identities,
        equal,
        unequal
    ))
}

// ---------------------------------------------------------------- 4

fn exponential_target(steps: usize) -> Result<(ScenarioTree<f64>, Process<f64>), String> {
    fixtures::exponential_target(steps).map_err(fail("ladder tree"))
}

fn ratios(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| w[0] / w[1]).collect()
}

fn halving(errs: &[f64]) -> bool {
    errs.iter().all(|e| *e > 0.0) && ratios(errs).iter().all(|r| (1.6..=2.4).contains(r))
}

fn criterion_4() -> Outcome {
    let mut exact = 0;
    for name in fixtures::NAMES {
        let f = named_exact(name)?;
        ensure_check(&f.built.law_check(&f.target, 0.0).map_err(fail(name))?, name)?;
        exact += 1;
    }
    for seed in 0..20 {
        let f = random_exact(seed)?;
        ensure_check(&f.built.law_check(&f.target, 0.0).map_err(fail(&f.name))?, &f.name)?;
        exact += 1;
    }
    let mut errs = Vec::new();
    for steps in [8, 16, 32, 64] {
        let (tree, a) = exponential_target(steps)?;
        let spec = ConstructionSpec { tree, a: a.clone(), shocks: vec![] };
        let built = construct_tau(&spec, ConstructionMode::Exponential, &ThetaGrid::Breakpoints)
            .map_err(fail("exponential construction"))?;
        errs.push(built.law_check(&a, 0.0).map_err(fail("exponential law"))?.max_error);
    }
    ensure(halving(&errs), || format!("continuous-time errors {:?}, ratios {:?}", errs, ratios(&errs)))?;
    Ok(format!(
        "{} discrete-exact fixtures with zero error; exponential errors {:.3e} {:.3e} {:.3e} {:.3e}, ratios {:.3?}",
        exact,
        errs[0],
        errs[1],
        errs[2],
        errs[3],
        ratios(&errs)
    ))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let tree = ScenarioTree::<Q>::binomial(2, q(1, 2)).map_err(fail("tree"))?;
    let n_out = tree.n_outcomes();
    let up = |w: usize, i: usize| (tree.coords()[w].base >> i) & 1 == 1;
    let times = vec![RandomTime::constant(n_out, Some(1)), RandomTime::constant(n_out, Some(2))];
    let build = |moving: bool| -> Result<EnlargedSpace<Q>, String> {
        let p1 = Process::from_fn(2, n_out, |n, w| match n {
            0 => q(1, 2),
            1 => if up(w, 0) { q(1, 4) } else { q(3, 4) },
            _ => {
                let base = if up(w, 0) { q(1, 4) } else { q(3, 4) };
                match (moving, up(w, 1)) {
                    (false, _) => base,
                    (true, true) => base - q(1, 8),
                    (true, false) => base + q(1, 8),
                }
            }
        });
        let p2 = p1.map(|_, _, v| Q::one() - v.clone());
        Ok(family_construct(&tree, &times, &[p1, p2]).map_err(fail("family"))?.space)
    };
    let stopped = build(false)?.check_immersion().map_err(fail("stopped"))?;
    ensure(stopped.holds, || format!("stopped construction not immersed: {:?}", stopped.worst))?;
    let moving = build(true)?.check_immersion().map_err(fail("moving"))?;
    ensure(!moving.holds, || "non-stopped construction reported immersed".into())?;
    let node = moving.worst.ok_or("no violating node reported")?;
    Ok(format!(
        "stopped case immersed; non-stopped case violates at time {} outcome {} (gap {:.4})",
        node.time, node.outcome, moving.gap
    ))
}

// ---------------------------------------------------------------- 6

/// `B_n/Z_n E[Σ_i loss_i B_{T^i}^{-1} 1_{τ = T^i ∈ (n, T]} | F_n]` by
/// summing over atoms.
fn loss_leg(fx: &Fixture<Q>) -> Process<Q> {
    let es = &fx.model.space;
    let tree = es.tree();
    let b = fx.rates.bank();
    let t = fx.claim.maturity;
    let n_out = es.n_outcomes();
    let mut out = Process::zeros(es.horizon(), n_out);
    for n in 0..t {
        let leg: Vec<Q> = (0..n_out)
            .map(|w| {
                let mut acc = Q::zero();
                for ti in &fx.model.sd.shocks {
                    if let Some(k) = ti.value(w).filter(|&k| k > n && k <= t && es.tau().value(w) == Some(k)) {
                        acc -= fx.claim.recovery.increment(k, w) / b.get(k, w).clone();
                    }
                }
                acc
            })
            .collect();
        for block in tree.filtration().at(n).blocks() {
            let mass = block.iter().fold(Q::zero(), |s, &w| s + tree.probs()[w].clone());
            let sum = block.iter().fold(Q::zero(), |s, &w| s + tree.probs()[w].clone() * leg[w].clone());
            for &w in block {
                out.set(n, w, b.get(n, w).clone() * sum.clone() / mass.clone() / fx.model.az.z.get(n, w).clone());
            }
        }
    }
    out
}

/// Cox model on the exponential ladder with constant recovery `2/5`,
/// unit promise and rate `1/20` per unit time, priced in continuous mode.
fn continuous_pricing_gap(steps: usize) -> Result<f64, String> {
    let (tree, a) = exponential_target(steps)?;
    let spec = ConstructionSpec { tree, a, shocks: vec![] };
    let built = construct_tau(&spec, ConstructionMode::DiscreteExact, &ThetaGrid::Breakpoints)
        .map_err(fail("ladder construction"))?;
    let sd = built.decomposition().map_err(fail("ladder"))?;
    let model = DefaultModel::new(built.space, sd).map_err(fail("ladder model"))?;
    let n_out = model.n_outcomes();
    let claim = DefaultableClaim {
        maturity: steps,
        promised: vec![1.0; n_out],
        recovery: Process::constant(steps, n_out, 0.4),
    };
    let rates = Rates::constant(0.05, 1.0 / steps as f64, DiscountMode::Continuous, steps, n_out);
    let st = predefault_price(&claim, &model.space, &model.az, &rates).map_err(fail("ladder price"))?;
    let qp = price_via_qtau(&claim, &model, &rates).map_err(fail("ladder qtau"))?;
    qp.price.max_abs_diff(&st).map_err(fail("ladder gap"))
}

fn criterion_6() -> Outcome {
    let mut fx = Vec::new();
    for name in fixtures::NAMES {
        fx.push(named_exact(name)?);
    }
    for seed in 0..12 {
        fx.push(random_exact(seed)?);
    }
    for f in &fx {
        let es = &f.model.space;
        let brute = price_brute(&f.claim, es, &f.rates).map_err(fail(&f.name))?;
        let st = predefault_price(&f.claim, es, &f.model.az, &f.rates).map_err(fail(&f.name))?;
        for n in 0..=es.horizon() {
            for w in 0..es.n_outcomes() {
                if !es.tau().le(w, n) && brute.get(n, w) != st.get(n, w) {
                    return Err(format!("{}: masked prices differ at ({}, {})", f.name, n, w));
                }
            }
        }
        let qp = price_via_qtau(&f.claim, &f.model, &f.rates).map_err(fail(&f.name))?;
        ensure_check(&Check::processes("qtau price", &qp.price, &st, 0.0), &f.name)?;
        ensure_check(&Check::processes("naive gap", &qp.naive.sub(&st).map_err(fail(&f.name))?, &qp.h_term, 0.0), &f.name)?;
        ensure_check(&Check::processes("loss leg", &qp.h_term, &loss_leg(f), 0.0), &f.name)?;
    }
    let jr = &fx[1];
    let qp = price_via_qtau(&jr.claim, &jr.model, &jr.rates).map_err(fail("jump-recovery"))?;
    let gap0 = qp.h_term.get(0, 0).to_f64();
    ensure(gap0 > 0.0, || "naive formula does not misprice the jump-recovery claim".into())?;
    let mut errs = Vec::new();
    for steps in [8, 16, 32, 64] {
        errs.push(continuous_pricing_gap(steps)?);
    }
    ensure(halving(&errs), || format!("continuous pricing errors {:?}, ratios {:?}", errs, ratios(&errs)))?;
    Ok(format!(
        "{} fixtures masked and exact; naive gap on jump-recovery {:.6} at time 0; continuous ratios {:.3?}",
        fx.len(),
        gap0,
        ratios(&errs)
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut fx = Vec::new();
    for name in fixtures::NAMES {
        fx.push(named_exact(name)?);
    }
    for seed in 0..12 {
        fx.push(random_exact(seed)?);
    }
    let (mut multi, mut closed) = (0, 0);
    for f in &fx {
        let rp = risk_premium(&f.claim, &f.model, &f.rates).map_err(fail(&f.name))?;
        for c in &rp.checks {
            ensure_check(c, &f.name)?;
        }
        let mut parts = rp.idiosyncratic.clone();
        for s in &rp.shock {
            parts = parts.add(s).map_err(fail(&f.name))?;
        }
        ensure_check(&Check::processes("parts", &parts, &rp.pi, 0.0), &f.name)?;
        if f.model.sd.n_shocks() > 1 {
            multi += 1;
        }
        if f.shock_free {
            let st = predefault_price(&f.claim, &f.model.space, &f.model.az, &f.rates).map_err(fail(&f.name))?;
            let cf = shock_free_premium(&f.claim, &f.model, &f.rates, &st).map_err(fail(&f.name))?;
            ensure_check(&Check::processes("closed form", &rp.pi, &cf, 0.0), &f.name)?;
            closed += 1;
        }
    }
    ensure(multi > 0 && closed > 0, || format!("{} multi-shock, {} shock-free fixtures", multi, closed))?;
    Ok(format!(
        "{} fixtures, routes agree exactly ({} multi-shock); closed form on {} shock-free fixtures; parts sum to total",
        fx.len(),
        multi,
        closed
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let mut clean = 0;
    let mut seed = 0u64;
    while clean < 50 {
        let opts = RandomOptions { shock_free: false, predictable: false, ..options(seed) };
        let f = fixtures::random::<Q>(seed, opts, DiscountMode::DiscreteExact).map_err(fail(seed))?;
        seed += 1;
        let es = &f.model.space;
        let v = bond_price(es).map_err(fail(&f.name))?;
        let verdict = loss_no_predictable_check(&v, es).map_err(fail(&f.name))?;
        ensure(verdict.loss_holds, || format!("{}: jump not negative at {:?}", f.name, verdict.violations))?;
        ensure(verdict.pass && verdict.predictable_part.is_none(), || format!("{}: predictable part found", f.name))?;
        clean += 1;
    }
    for s in 0..10 {
        let es = predictable_atom::<Q>(s).map_err(fail(s))?;
        let v = bond_price(&es).map_err(fail(s))?;
        let verdict = loss_no_predictable_check(&v, &es).map_err(fail(s))?;
        ensure(!verdict.loss_holds && verdict.predictable_part.is_some(), || {
            format!("atom seed {}: no predictable part found", s)
        })?;
    }
    Ok("50 fixtures without a predictable part; 10 certain-default atoms detected".into())
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let mut lines = Vec::new();
    for (i, name) in ["cox-binomial", "jump-recovery-shock", "trinomial-two-shocks"].iter().enumerate() {
        let f: Fixture<f64> = fixtures::named(name, DiscountMode::DiscreteExact).map_err(fail(name))?;
        let cfg = McConfig {
            paths: 100_000,
            seed: 2024 + i as u64,
            workers: 4,
            batches: 100,
        };
        let rep = run_fixture(&f, &cfg).map_err(fail(name))?;
        ensure(rep.within(3.0), || format!("{}: estimate outside 3 sigma: {:?}", name, rep))?;
        let probs: Vec<f64> = f.model.space.tree().probs().to_vec();
        let one = sample_outcomes(&probs, &McConfig { workers: 1, ..cfg }).map_err(fail(name))?;
        for workers in [4, 16] {
            let other = sample_outcomes(&probs, &McConfig { workers, ..cfg }).map_err(fail(name))?;
            ensure(one == other, || format!("{}: ensemble differs with {} workers", name, workers))?;
            let e1 = estimate(&probs, &McConfig { workers: 1, ..cfg }, |w| w as f64).map_err(fail(name))?;
            let ek = estimate(&probs, &McConfig { workers, ..cfg }, |w| w as f64).map_err(fail(name))?;
            ensure(e1.mean.to_bits() == ek.mean.to_bits() && e1.std_error.to_bits() == ek.std_error.to_bits(), || {
                format!("{}: estimate differs with {} workers", name, workers)
            })?;
        }
        let z = |e: &shockdefault::mc::Estimate| (e.mean - e.exact.unwrap_or(e.mean)).abs() / e.std_error.max(f64::MIN_POSITIVE);
        let worst = rep.default_prob.iter().chain([&rep.price0, &rep.premium_t]).map(z).fold(0.0, f64::max);
        lines.push(format!("{} worst |z| {:.2}", name, worst));
    }
    Ok(format!("n = 1e5, {}; ensembles identical for 1/4/16 workers", lines.join(", ")))
}

// ----------------------------------------------------------------

/// Number, title, time limit in seconds, body.
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "projection duality", 60, criterion_1),
        (2, "compensated default indicator is a G-martingale", 30, criterion_2),
        (3, "shock assembly and A = a criterion", 120, criterion_3),
        (4, "construction law", 120, criterion_4),
        (5, "immersion iff stopped laws", 60, criterion_5),
        (6, "pricing oracle", 120, criterion_6),
        (7, "premium two routes", 120, criterion_7),
        (8, "loss condition harness", 60, criterion_8),
        (9, "Monte Carlo consistency", 180, criterion_9),
    ];
    let mut failed = 0;
    for (k, title, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(msg) if elapsed > Duration::from_secs(limit) => Err(format!("{} (over the {} s limit)", msg, limit)),
            r => r,
        };
        let (verdict, msg) = match result {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("{} criterion {} {}: {} [{:.2} s]", verdict, k, title, msg, elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
