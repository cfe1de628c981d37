#![allow(clippy::needless_range_loop)]

use shockdefault::check::Check;
use shockdefault::fixtures::{self, Fixture};
use shockdefault::pricing::{
    credit_spread, measure_change, orthogonal_decomposition, predefault_price, premium_direct, price_brute,
    price_via_qtau, risk_premium, shock_free_premium, DefaultModel, DefaultableClaim, DiscountMode, Rates,
    SpreadConvention,
};
use shockdefault::enlargement::EnlargedSpace;
use shockdefault::{Process, RandomTime, Rational, Scalar, ScenarioTree};

fn q(a: i64, b: i64) -> Rational {
    Rational::ratio(a, b)
}

/// Conditional expectation by summing over the time-`n` atoms.
fn oracle_cexp(tree: &ScenarioTree<Rational>, x: &[Rational], n: usize) -> Vec<Rational> {
    let part = tree.filtration().at(n);
    let probs = tree.probs();
    let mut out = vec![Rational::zero(); x.len()];
    for block in part.blocks() {
        let mut mass = Rational::zero();
        let mut acc = Rational::zero();
        for &w in block {
            mass += probs[w].clone();
            acc += probs[w].clone() * x[w].clone();
        }
        for &w in block {
            out[w] = acc.clone() / mass.clone();
        }
    }
    out
}

fn exact(name: &str) -> Fixture<Rational> {
    fixtures::named(name, DiscountMode::DiscreteExact).unwrap()
}

fn assert_pass(c: &Check) {
    assert!(c.pass, "{}", c);
}

#[test]
fn geometric_bond_prices() {
    let fx = exact("geometric-zero-recovery");
    let es = &fx.model.space;
    let s = price_brute(&fx.claim, es, &fx.rates).unwrap();
    assert!(s.at(0).iter().all(|v| *v == q(1, 4)));
    let st = predefault_price(&fx.claim, es, &fx.model.az, &fx.rates).unwrap();
    for n in 0..=2 {
        let want = q(1, 1 << (2 - n));
        assert!(st.at(n).iter().all(|v| *v == want), "n = {}", n);
    }
    let mc = measure_change(&fx.model, DiscountMode::DiscreteExact, 2).unwrap();
    assert!(mc.d.rows().iter().flatten().all(|v| *v == Rational::one()));
    for c in &mc.checks {
        assert_pass(c);
    }
}

#[test]
fn geometric_spread_matches_closed_form() {
    let fx: Fixture<f64> = fixtures::named("geometric-zero-recovery", DiscountMode::DiscreteExact).unwrap();
    let sp = credit_spread(&fx.claim, &fx.model, &fx.rates, SpreadConvention::Exponential).unwrap();
    for n in 1..=2 {
        for v in sp.s.at(n) {
            assert!((v - (2.0f64).ln()).abs() < 1e-12);
        }
    }
    assert_pass(&sp.check);
    let sp = credit_spread(&fx.claim, &fx.model, &fx.rates, SpreadConvention::Multiplicative).unwrap();
    assert!(sp.s.at(1).iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn predefault_price_masks_brute_force_price() {
    for name in fixtures::NAMES {
        let fx = exact(name);
        let es = &fx.model.space;
        let s = price_brute(&fx.claim, es, &fx.rates).unwrap();
        let st = predefault_price(&fx.claim, es, &fx.model.az, &fx.rates).unwrap();
        for n in 0..=fx.claim.maturity {
            for w in 0..es.n_outcomes() {
                if !es.tau().le(w, n) {
                    assert_eq!(s.get(n, w), st.get(n, w), "{} at ({}, {})", name, n, w);
                }
            }
        }
    }
}

#[test]
fn brute_price_matches_enumeration() {
    let fx = exact("trinomial-two-shocks");
    let es = &fx.model.space;
    let b = fx.rates.bank();
    let t = fx.claim.maturity;
    let pay: Vec<Rational> = (0..es.n_outcomes())
        .map(|w| match es.tau().value(w) {
            Some(k) if k <= t => fx.claim.recovery.get(k, w).clone() / b.get(k, w).clone(),
            _ => fx.claim.promised[w].clone() / b.get(t, w).clone(),
        })
        .collect();
    let mean: Rational = pay
        .iter()
        .zip(es.tree().probs())
        .fold(Rational::zero(), |acc, (x, p)| acc + x.clone() * p.clone());
    let s = price_brute(&fx.claim, es, &fx.rates).unwrap();
    assert!(s.at(0).iter().all(|v| *v == mean));
}

#[test]
fn shock_aware_formula_is_exact_and_naive_one_misses_the_loss_leg() {
    for name in fixtures::NAMES {
        let fx = exact(name);
        let es = &fx.model.space;
        let st = predefault_price(&fx.claim, es, &fx.model.az, &fx.rates).unwrap();
        let qp = price_via_qtau(&fx.claim, &fx.model, &fx.rates).unwrap();
        assert_pass(&Check::processes(*name, &qp.price, &st, 0.0));
        for c in qp.recovery.checks(&fx.claim, &fx.model).unwrap() {
            assert_pass(&c);
        }
        for c in &qp.measure.checks {
            assert_pass(c);
        }

        // The naive formula also pays the losses at the shocks that carry
        // the default: B_n/Z_n E[Σ loss_i B_{T^i}^{-1} 1_{τ = T^i ∈ (n, T]} | F_n].
        let b = fx.rates.bank();
        let t = fx.claim.maturity;
        let tree = es.tree();
        let sd = &fx.model.sd;
        for n in 0..t {
            let leg: Vec<Rational> = (0..es.n_outcomes())
                .map(|w| {
                    let mut acc = Rational::zero();
                    for ti in &sd.shocks {
                        if let Some(k) = ti.value(w).filter(|&k| k > n && k <= t) {
                            if es.tau().value(w) == Some(k) {
                                let loss = -fx.claim.recovery.increment(k, w);
                                acc += loss / b.get(k, w).clone();
                            }
                        }
                    }
                    acc
                })
                .collect();
            let ce = oracle_cexp(tree, &leg, n);
            for w in 0..es.n_outcomes() {
                let want = b.get(n, w).clone() * ce[w].clone() / fx.model.az.z.get(n, w).clone();
                assert_eq!(*qp.h_term.get(n, w), want, "{} at ({}, {})", name, n, w);
            }
        }
        if *name == "jump-recovery-shock" {
            assert!(qp.h_term.at(0).iter().all(|v| *v > Rational::zero()));
        }
    }
}

#[test]
fn classic_formula_on_shock_free_fixtures() {
    for name in ["geometric-zero-recovery", "cox-binomial"] {
        let fx = exact(name);
        assert!(fx.shock_free);
        let es = &fx.model.space;
        let st = predefault_price(&fx.claim, es, &fx.model.az, &fx.rates).unwrap();
        let cl = shockdefault::pricing::classic_price(&fx.claim, &fx.model, &fx.rates).unwrap();
        assert_pass(&Check::processes(name, &cl, &st, 0.0));
        let rp = risk_premium(&fx.claim, &fx.model, &fx.rates).unwrap();
        let closed = shock_free_premium(&fx.claim, &fx.model, &fx.rates, &st).unwrap();
        assert_pass(&Check::processes(name, &rp.pi, &closed, 0.0));
    }
    let fx = exact("jump-recovery-shock");
    assert!(shockdefault::pricing::classic_price(&fx.claim, &fx.model, &fx.rates).is_err());
}

#[test]
fn premium_routes_agree_on_named_fixtures() {
    for name in fixtures::NAMES {
        let fx = exact(name);
        let rp = risk_premium(&fx.claim, &fx.model, &fx.rates).unwrap();
        for c in &rp.checks {
            assert_pass(c);
        }
        assert_eq!(rp.route_gap, 0.0);
        assert!(rp.pi.at(0).iter().all(|v| v.is_zero()));
    }
}

#[test]
fn geometric_premium_is_one_per_step() {
    let fx = exact("geometric-zero-recovery");
    let rp = risk_premium(&fx.claim, &fx.model, &fx.rates).unwrap();
    assert!(rp.pi.at(1).iter().all(|v| *v == q(1, 1)));
    assert!(rp.pi.at(2).iter().all(|v| *v == q(2, 1)));
}

/// `C_n = 1/2 - L 1_{T^1 ≤ n}` on the jump-recovery model.
fn with_loss(fx: &Fixture<Rational>, loss: Rational) -> DefaultableClaim<Rational> {
    let t1 = &fx.model.sd.shocks[0];
    let mut claim = fx.claim.clone();
    claim.recovery = Process::from_fn(fx.model.horizon(), fx.model.n_outcomes(), |n, w| {
        if t1.le(w, n) {
            q(1, 2) - loss.clone()
        } else {
            q(1, 2)
        }
    });
    claim
}

#[test]
fn shock_premium_grows_with_loss_severity() {
    let fx = exact("jump-recovery-shock");
    let mut last: Option<Process<Rational>> = None;
    for k in 0..=4 {
        let claim = with_loss(&fx, q(k, 10));
        let rp = risk_premium(&claim, &fx.model, &fx.rates).unwrap();
        let cur = rp.shock[0].clone();
        if let Some(prev) = &last {
            for n in 0..=cur.horizon() {
                for w in 0..cur.n_outcomes() {
                    assert!(cur.get(n, w) >= prev.get(n, w), "loss {}/10 at ({}, {})", k, n, w);
                }
            }
        }
        last = Some(cur);
    }
}

#[test]
fn jump_recovery_premium_exceeds_compensator_only_value() {
    let fx = exact("jump-recovery-shock");
    let rp = risk_premium(&fx.claim, &fx.model, &fx.rates).unwrap();
    let sa = &fx.model.sa;
    let g = fx.rates.growth();
    let k = 2;
    let mut strict = false;
    for w in 0..fx.model.n_outcomes() {
        let hz = sa.comps[0].hazard.get(k, w).clone();
        if hz.is_zero() || !fx.model.sd.shocks[0].ge(w, k) {
            continue;
        }
        let zp = fx.model.az.z.get(k - 1, w).clone();
        let pv = sa.p[0].get(k - 1, w).clone() + sa.v[0].get(k, w).clone();
        let ct = fx.claim.recovery.get(k - 1, w).clone() / (g.get(k, w).clone() * rp.predefault.get(k - 1, w).clone());
        let dl = fx.model.hazard().get(k, w).clone();
        let base = (Rational::one() - ct) * pv * hz / zp / (Rational::one() - dl);
        let inc = rp.shock[0].increment(k, w);
        assert!(inc >= base);
        strict |= inc > base;
    }
    assert!(strict);
}

#[test]
fn predictable_default_has_no_premium() {
    let tree = ScenarioTree::<Rational>::trivial(3).unwrap();
    let es = EnlargedSpace::new(tree, RandomTime::constant(1, Some(2))).unwrap();
    let model = DefaultModel::canonical(es).unwrap();
    let claim = DefaultableClaim {
        maturity: 3,
        promised: vec![Rational::one()],
        recovery: Process::constant(3, 1, q(1, 2)),
    };
    let rates = Rates::zero(3, 1, DiscountMode::DiscreteExact);
    let st = predefault_price(&claim, &model.space, &model.az, &rates).unwrap();
    let (_, pi, _) = premium_direct(&st, 3, &model, &rates).unwrap();
    assert!(pi.rows().iter().flatten().all(|v| v.is_zero()));
    assert!(measure_change(&model, DiscountMode::DiscreteExact, 3).is_err());
}

#[test]
fn orthogonal_decomposition_identity_case() {
    let fx = exact("jump-recovery-shock");
    let n1 = fx.model.sa.comps[0].n.clone();
    let od = orthogonal_decomposition(&n1, &fx.model).unwrap();
    for c in &od.checks {
        assert_pass(c);
    }
    let sa = &fx.model.sa;
    for n in 1..=n1.horizon() {
        for w in 0..n1.n_outcomes() {
            let live = fx.model.sd.shocks[0].ge(w, n) && !sa.comps[0].hazard.get(n, w).is_zero();
            let want = if live { Rational::one() } else { Rational::zero() };
            assert_eq!(*od.f[0].get(n, w), want);
        }
    }
    assert!(od.theta[0].rows().iter().flatten().all(|v| v.is_zero()));
    assert!(od.m_hat.rows().iter().flatten().all(|v| v.is_zero()));
}

#[test]
fn orthogonal_decomposition_of_price_residual() {
    let fx = exact("trinomial-two-shocks");
    let rp = risk_premium(&fx.claim, &fx.model, &fx.rates).unwrap();
    let od = orthogonal_decomposition(&rp.m, &fx.model).unwrap();
    for c in &od.checks {
        assert_pass(c);
    }
    assert!(orthogonal_decomposition(&fx.claim.recovery, &fx.model).is_err());
}

#[test]
fn continuous_mode_tracks_exact_prices() {
    let fx: Fixture<f64> = fixtures::named("cox-binomial", DiscountMode::Continuous).unwrap();
    let st = predefault_price(&fx.claim, &fx.model.space, &fx.model.az, &fx.rates).unwrap();
    let qp = price_via_qtau(&fx.claim, &fx.model, &fx.rates).unwrap();
    let gap = qp.price.max_abs_diff(&st).unwrap();
    assert!(gap > 0.0 && gap < 0.1, "gap {}", gap);
}

#[test]
fn random_fixtures_price_and_premium_exactly() {
    use shockdefault::fixtures::RandomOptions;
    for seed in 0..12u64 {
        let opts = RandomOptions {
            shock_free: seed % 4 == 3,
            ..RandomOptions::default()
        };
        let fx: Fixture<Rational> = fixtures::random(seed, opts, DiscountMode::DiscreteExact).unwrap();
        let es = &fx.model.space;
        let st = predefault_price(&fx.claim, es, &fx.model.az, &fx.rates).unwrap();
        let qp = price_via_qtau(&fx.claim, &fx.model, &fx.rates).unwrap();
        assert_pass(&Check::processes(&fx.name, &qp.price, &st, 0.0));
        let rp = risk_premium(&fx.claim, &fx.model, &fx.rates).unwrap();
        for c in &rp.checks {
            assert_pass(c);
        }
        if opts.shock_free {
            assert!(fx.shock_free, "{}", fx.name);
            let closed = shock_free_premium(&fx.claim, &fx.model, &fx.rates, &st).unwrap();
            assert_pass(&Check::processes(&fx.name, &rp.pi, &closed, 0.0));
        }
    }
}
