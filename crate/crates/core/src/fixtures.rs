//! Named and randomly generated models with a claim and rates attached.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::construct::{construct_tau, cox_construct, BuiltTime, ConstructionMode, ConstructionSpec, ThetaGrid};
use crate::error::{Error, Result};
use crate::enlargement::EnlargedSpace;
use crate::kernel::{Coord, Process, RandomTime, ScenarioTree};
use crate::pricing::{DefaultModel, DefaultableClaim, DiscountMode, Rates};
use crate::scalar::Scalar;

/// A model, a claim on it and a rate curve.
#[derive(Debug, Clone)]
pub struct Fixture<S: Scalar> {
    pub name: String,
    pub built: BuiltTime<S>,
    pub model: DefaultModel<S>,
    pub claim: DefaultableClaim<S>,
    pub rates: Rates<S>,
    /// Target `P(τ ≤ n | F_n)` on the root tree.
    pub target: Process<S>,
    /// No shock is charged and the recovery is predictable.
    pub shock_free: bool,
}

pub const NAMES: &[&str] = &[
    "geometric-zero-recovery",
    "jump-recovery-shock",
    "cox-binomial",
    "trinomial-two-shocks",
];

fn q<S: Scalar>(a: i64, b: i64) -> S {
    S::ratio(a, b)
}

/// One-line description of each named fixture.
pub fn describe(name: &str) -> Option<&'static str> {
    Some(match name {
        "geometric-zero-recovery" => "deterministic hazard 1/2 on two steps, unit zero-recovery bond, zero rates",
        "jump-recovery-shock" => "coin tree, one charged shock at step 2 with a recovery drop, positive rates",
        "cox-binomial" => "biased coin tree, predictable hazard, predictable recovery, no shocks",
        "trinomial-two-shocks" => "trinomial tree, two charged shocks with recovery losses, random promise",
        _ => return None,
    })
}

pub fn named<S: Scalar>(name: &str, mode: DiscountMode) -> Result<Fixture<S>> {
    match name {
        "geometric-zero-recovery" => geometric_zero_recovery(mode),
        "jump-recovery-shock" => jump_recovery_shock(mode),
        "cox-binomial" => cox_binomial(mode),
        "trinomial-two-shocks" => trinomial_two_shocks(mode),
        _ => Err(Error::Contract(format!("unknown fixture '{}'", name))),
    }
}

/// Wraps a constructed time into a fixture. `promised` and `recovery` live
/// on the root tree and are lifted; `rate` is a constant per-step rate.
#[allow(clippy::too_many_arguments)]
pub fn assemble<S: Scalar>(
    name: &str,
    built: BuiltTime<S>,
    target: Process<S>,
    maturity: usize,
    promised: Vec<S>,
    recovery: Process<S>,
    rate: S,
    mode: DiscountMode,
) -> Result<Fixture<S>> {
    let tree = built.space.tree();
    let n_out = tree.n_outcomes();
    let horizon = tree.horizon();
    let claim = DefaultableClaim {
        maturity,
        promised: tree.lift_vec(&promised),
        recovery: tree.lift_process(&recovery),
    };
    let rates = Rates::constant(rate, S::one(), mode, horizon, n_out);
    let model = DefaultModel::new(built.space.clone(), built.decomposition()?)?;
    let shock_free = model.az.a_opt.first_mismatch(&model.az.a_pred, 1e-12).is_none()
        && claim
            .recovery
            .has_level(tree.filtration(), crate::kernel::Level::Predictable, 1e-12);
    Ok(Fixture {
        name: name.to_string(),
        built,
        model,
        claim,
        rates,
        target,
        shock_free,
    })
}

/// Deterministic hazard ½ on two steps, unit bond, no recovery, no rates.
fn geometric_zero_recovery<S: Scalar>(mode: DiscountMode) -> Result<Fixture<S>> {
    let tree = ScenarioTree::<S>::trivial(2)?;
    let a = Process::from_fn(2, 1, |n, _| match n {
        0 => S::zero(),
        1 => q(1, 2),
        _ => q(3, 4),
    });
    let built = cox_construct(&tree, &a, &ThetaGrid::Breakpoints)?;
    assemble(
        "geometric-zero-recovery",
        built,
        a,
        2,
        vec![S::one()],
        Process::zeros(2, 1),
        S::zero(),
        mode,
    )
}

fn bit<S: Scalar>(tree: &ScenarioTree<S>, w: usize, i: usize) -> bool {
    (tree.coords()[w].base >> i) & 1 == 1
}

/// Coin tree of depth 3 with one shock at step 2 on the paths whose second
/// move is up; the recovery loses a fixed amount at the shock.
fn jump_recovery_shock<S: Scalar>(mode: DiscountMode) -> Result<Fixture<S>> {
    let tree = ScenarioTree::<S>::binomial(3, q(1, 2))?;
    let n_out = tree.n_outcomes();
    let shock = RandomTime::new((0..n_out).map(|w| bit(&tree, w, 1).then_some(2)).collect());
    let a = Process::from_fn(3, n_out, |n, w| {
        let mut v = S::zero();
        if n >= 2 {
            v = v + if !bit(&tree, w, 1) {
                q(1, 10)
            } else if bit(&tree, w, 0) {
                q(1, 4)
            } else {
                q(1, 8)
            };
        }
        if n >= 3 {
            v = v + if bit(&tree, w, 2) { q(1, 5) } else { q(1, 20) };
        }
        v
    });
    let recovery = Process::from_fn(3, n_out, |n, w| {
        if n >= 2 && bit(&tree, w, 1) {
            q(3, 10)
        } else {
            q(1, 2)
        }
    });
    let spec = ConstructionSpec {
        tree: tree.clone(),
        a: a.clone(),
        shocks: vec![shock],
    };
    let built = construct_tau(&spec, ConstructionMode::DiscreteExact, &ThetaGrid::Breakpoints)?;
    assemble(
        "jump-recovery-shock",
        built,
        a,
        3,
        vec![S::one(); n_out],
        recovery,
        q(1, 50),
        mode,
    )
}

/// Threshold time with a predictable hazard driven by the previous coin,
/// and a predictable recovery.
fn cox_binomial<S: Scalar>(mode: DiscountMode) -> Result<Fixture<S>> {
    let tree = ScenarioTree::<S>::binomial(3, q(2, 5))?;
    let n_out = tree.n_outcomes();
    let hazard = |n: usize, w: usize| -> S {
        if n == 1 {
            q(1, 5)
        } else if bit(&tree, w, n - 2) {
            q(1, 4)
        } else {
            q(1, 8)
        }
    };
    let mut a = Process::<S>::zeros(3, n_out);
    for n in 1..=3 {
        for w in 0..n_out {
            let prev = a.get(n - 1, w).clone();
            a.set(n, w, prev.clone() + (S::one() - prev) * hazard(n, w));
        }
    }
    let built = cox_construct(&tree, &a, &ThetaGrid::Breakpoints)?;
    let recovery = Process::from_fn(3, n_out, |n, w| {
        if n >= 2 && bit(&tree, w, n - 2) {
            q(1, 2)
        } else {
            q(1, 4)
        }
    });
    let promised = (0..n_out)
        .map(|w| if bit(&tree, w, 2) { S::one() } else { q(9, 10) })
        .collect();
    assemble("cox-binomial", built, a, 3, promised, recovery, q(1, 25), mode)
}

/// Three-way tree with a shock at step 1 and one at step 2 whose jump and
/// recovery loss both depend on the move at the shock.
fn trinomial_two_shocks<S: Scalar>(mode: DiscountMode) -> Result<Fixture<S>> {
    let mut paths = Vec::new();
    let w3 = [q::<S>(1, 2), q(1, 3), q(1, 6)];
    for m1 in 0..3u32 {
        for m2 in 0..3u32 {
            for m3 in 0..3u32 {
                let p = w3[m1 as usize].clone() * w3[m2 as usize].clone() * w3[m3 as usize].clone();
                paths.push((vec![m1, m2, m3], p));
            }
        }
    }
    let moves: Vec<Vec<u32>> = paths.iter().map(|(p, _)| p.clone()).collect();
    let tree = ScenarioTree::from_paths(3, paths)?;
    let n_out = tree.n_outcomes();
    let mv = |w: usize, i: usize| moves[tree.coords()[w].base][i];
    let s1 = RandomTime::new((0..n_out).map(|w| (mv(w, 0) == 2).then_some(1)).collect());
    let s2 = RandomTime::new((0..n_out).map(|w| (mv(w, 1) >= 1).then_some(2)).collect());
    let a = Process::from_fn(3, n_out, |n, w| {
        let mut v = S::zero();
        if n >= 1 && mv(w, 0) == 2 {
            v = v + q(1, 3);
        }
        if n >= 2 && mv(w, 1) >= 1 {
            v = v + if mv(w, 1) == 1 { q(1, 4) } else { q(1, 8) };
        }
        if n >= 3 {
            v = v + q(1 + mv(w, 2) as i64, 10);
        }
        v
    });
    let recovery = Process::from_fn(3, n_out, |n, w| {
        let mut c = q::<S>(3, 5);
        if n >= 1 && mv(w, 0) == 2 {
            c = c - q(1, 10);
        }
        if n >= 2 && mv(w, 1) >= 1 {
            c = c - if mv(w, 1) == 1 { q(1, 5) } else { q(1, 10) };
        }
        c
    });
    let spec = ConstructionSpec {
        tree: tree.clone(),
        a: a.clone(),
        shocks: vec![s1, s2],
    };
    let built = construct_tau(&spec, ConstructionMode::DiscreteExact, &ThetaGrid::Breakpoints)?;
    let promised = (0..n_out).map(|w| q(4 + mv(w, 2) as i64, 6)).collect();
    assemble("trinomial-two-shocks", built, a, 3, promised, recovery, q(1, 40), mode)
}

/// Two factor paths told apart at step 1 with hazard rates 1 and 2 per unit
/// time: `A_n = 1 - exp(-λ n/N)` on a grid of `steps` steps over `[0, 1]`.
pub fn exponential_target<S: Scalar>(steps: usize) -> Result<(ScenarioTree<S>, Process<S>)> {
    let half = S::ratio(1, 2);
    let tree = ScenarioTree::from_paths(steps, vec![(vec![0; steps], half.clone()), (vec![1; steps], half)])?;
    let a = Process::from_fn(steps, tree.n_outcomes(), |n, w| {
        if n == 0 {
            return S::zero();
        }
        let lambda = 1.0 + tree.coords()[w].base as f64;
        S::from_f64(1.0 - (-lambda * n as f64 / steps as f64).exp())
    });
    Ok((tree, a))
}

/// Controls for [`random`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomOptions {
    pub horizon: usize,
    pub max_branching: u32,
    /// Shocks are placed at steps `1..=shock_window`.
    pub shock_window: usize,
    pub max_shocks: usize,
    /// No shocks, predictable smooth part and predictable recovery.
    pub shock_free: bool,
    /// Shock events, jump sizes, smooth part and recovery are all known one
    /// step ahead.
    pub predictable: bool,
}

impl Default for RandomOptions {
    fn default() -> Self {
        RandomOptions {
            horizon: 3,
            max_branching: 3,
            shock_window: 2,
            max_shocks: 2,
            shock_free: false,
            predictable: false,
        }
    }
}

/// Random root tree: every node has 1 to `max_branching` children with
/// small-integer weights. Returns the tree and the move list of each path.
pub fn random_tree<S: Scalar>(rng: &mut ChaCha8Rng, horizon: usize, max_branching: u32) -> Result<(ScenarioTree<S>, Vec<Vec<u32>>)> {
    let mut paths: Vec<(Vec<u32>, i64, i64)> = vec![(Vec::new(), 1, 1)];
    for _ in 0..horizon {
        let mut next = Vec::new();
        for (path, num, den) in paths {
            let k = rng.random_range(1..=max_branching.max(1));
            let weights: Vec<i64> = (0..k).map(|_| rng.random_range(1..=4)).collect();
            let total: i64 = weights.iter().sum();
            for (m, wt) in weights.iter().enumerate() {
                let mut p = path.clone();
                p.push(m as u32);
                next.push((p, num * wt, den * total));
            }
        }
        paths = next;
    }
    let moves: Vec<Vec<u32>> = paths.iter().map(|(p, _, _)| p.clone()).collect();
    let tree = ScenarioTree::from_paths(horizon, paths.into_iter().map(|(p, n, d)| (p, S::ratio(n, d))).collect())?;
    Ok((tree, moves))
}

/// Assigns one value per time-`n` atom (path prefix), drawn on first sight.
struct PrefixDraw<'a, R> {
    moves: &'a [Vec<u32>],
    cache: HashMap<Vec<u32>, R>,
}

impl<'a, R: Clone> PrefixDraw<'a, R> {
    fn new(moves: &'a [Vec<u32>]) -> Self {
        PrefixDraw {
            moves,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, w: usize, n: usize, draw: impl FnOnce() -> R) -> R {
        let key = self.moves[w][..n].to_vec();
        self.cache.entry(key).or_insert_with(draw).clone()
    }
}

/// A random immersed model built by the general construction, with a random
/// recovery that loses value at the shocks. Retries internally until the
/// construction succeeds; identical seeds give identical fixtures.
pub fn random<S: Scalar>(seed: u64, opts: RandomOptions, mode: DiscountMode) -> Result<Fixture<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..32 {
        match random_once(&mut rng, seed, opts, mode) {
            Ok(f) => return Ok(f),
            Err(e @ Error::Construction { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn random_once<S: Scalar>(
    rng: &mut ChaCha8Rng,
    seed: u64,
    opts: RandomOptions,
    mode: DiscountMode,
) -> Result<Fixture<S>> {
    let horizon = opts.horizon.max(1);
    let (tree, moves) = random_tree::<S>(rng, horizon, opts.max_branching)?;
    let n_out = tree.n_outcomes();
    let window = opts.shock_window.min(horizon);
    let n_shocks = if opts.shock_free || window == 0 {
        0
    } else {
        rng.random_range(1..=opts.max_shocks.clamp(1, window))
    };
    // distinct shock times keep the shocks non-coincident
    let mut times: Vec<usize> = (1..=window).collect();
    for i in (1..times.len()).rev() {
        let j = rng.random_range(0..=i);
        times.swap(i, j);
    }
    times.truncate(n_shocks);
    times.sort_unstable();

    let lag = usize::from(opts.shock_free || opts.predictable);
    let mut shocks = Vec::new();
    let mut jumps: Vec<Vec<i64>> = Vec::new();
    let mut losses: Vec<Vec<i64>> = Vec::new();
    for &t in &times {
        let mut hit = PrefixDraw::new(&moves);
        let mut size = PrefixDraw::new(&moves);
        let mut loss = PrefixDraw::new(&moves);
        let mut tv = Vec::with_capacity(n_out);
        let mut jv = Vec::with_capacity(n_out);
        let mut lv = Vec::with_capacity(n_out);
        for w in 0..n_out {
            let on = hit.get(w, t - lag, || rng.random_bool(0.5));
            tv.push(on.then_some(t));
            jv.push(size.get(w, t - lag, || rng.random_range(2..=5)));
            lv.push(loss.get(w, t - lag, || rng.random_range(0..=5)));
        }
        shocks.push(RandomTime::new(tv));
        jumps.push(jv);
        losses.push(lv);
    }
    // smooth part starts after the last shock window
    let start = if opts.shock_free { 1 } else { window + 1 };
    let mut smooth = PrefixDraw::new(&moves);
    let mut dac = Process::<S>::zeros(horizon, n_out);
    for n in start..=horizon {
        for w in 0..n_out {
            let k: i64 = smooth.get(w, n - lag, || rng.random_range(0..=3));
            dac.set(n, w, S::ratio(k, 20));
        }
    }
    let a = Process::from_fn(horizon, n_out, |n, w| {
        let mut v = S::zero();
        for (i, t) in shocks.iter().enumerate() {
            if t.le(w, n) {
                v = v + S::ratio(jumps[i][w], 20);
            }
        }
        for k in 1..=n {
            v = v + dac.get(k, w).clone();
        }
        v
    });
    let mut base = PrefixDraw::new(&moves);
    let recovery = Process::from_fn(horizon, n_out, |n, w| {
        let level: i64 = base.get(w, n.saturating_sub(lag), || rng.random_range(10..=20));
        let mut c = S::ratio(level, 20);
        for (i, t) in shocks.iter().enumerate() {
            if t.le(w, n) {
                c = c - S::ratio(losses[i][w], 40);
            }
        }
        c
    });
    let promised: Vec<S> = (0..n_out).map(|_| S::ratio(rng.random_range(14..=20), 20)).collect();
    let rate = S::ratio(rng.random_range(0..=2), 50);
    let built = if shocks.is_empty() {
        cox_construct(&tree, &a, &ThetaGrid::Breakpoints)?
    } else {
        let spec = ConstructionSpec {
            tree: tree.clone(),
            a: a.clone(),
            shocks,
        };
        construct_tau(&spec, ConstructionMode::DiscreteExact, &ThetaGrid::Breakpoints)?
    };
    assemble(
        &format!("random-{}", seed),
        built,
        a,
        horizon,
        promised,
        recovery,
        rate,
        mode,
    )
}

/// Defaults only at coupon dates: at each date an independent coin with
/// success probability `success` decides default, and `τ` is the first
/// successful date. The coin flips are carried by the label coordinate.
pub fn coupon_default<S: Scalar>(tree: &ScenarioTree<S>, dates: &[usize], success: S) -> Result<EnlargedSpace<S>> {
    if dates.windows(2).any(|d| d[0] >= d[1]) || dates.iter().any(|&d| d == 0 || d > tree.horizon()) {
        return Err(Error::Range("coupon dates must be increasing within 1..=horizon".into()));
    }
    let k = dates.len();
    let fail = S::one() - success.clone();
    let ext = tree.extend(|_, c| {
        let mut surv = S::one();
        let mut kids = Vec::with_capacity(k + 1);
        for i in 0..=k {
            let weight = if i < k { surv.clone() * success.clone() } else { surv.clone() };
            kids.push((Coord { label: Some(i), ..*c }, weight));
            surv = surv * fail.clone();
        }
        kids
    })?;
    let tau = RandomTime::new(
        ext.coords()
            .iter()
            .map(|c| dates.get(c.label.expect("label")).copied())
            .collect(),
    );
    EnlargedSpace::new(ext, tau)
}

/// Random enlarged space in which default is certain at step `n` on one
/// `F_{n-1}` atom: `τ` has a predictable part there and the zero-recovery
/// bond does not move at default on that atom.
pub fn predictable_atom<S: Scalar>(seed: u64) -> Result<EnlargedSpace<S>> {
    let fx = random::<S>(seed, RandomOptions::default(), DiscountMode::DiscreteExact)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let tree = fx.model.space.tree().clone();
    let old = fx.model.space.tau();
    let n = rng.random_range(1..=tree.horizon());
    let part = tree.filtration().before(n);
    let live: Vec<usize> = (0..part.n_blocks())
        .filter(|&b| part.blocks()[b].iter().any(|&w| !old.le(w, n - 1)))
        .collect();
    let block = live[rng.random_range(0..live.len())];
    let tau = RandomTime::new(
        (0..tree.n_outcomes())
            .map(|w| {
                if part.block_of(w) == block && !old.le(w, n - 1) {
                    Some(n)
                } else {
                    old.value(w)
                }
            })
            .collect(),
    );
    EnlargedSpace::new(tree, tau)
}
