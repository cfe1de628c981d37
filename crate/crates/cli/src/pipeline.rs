//! Build space, construct τ, enlarge, price, decompose the premium, check.

use std::time::Instant;

use shockdefault::check::Check;
use shockdefault::construct::{construct_tau, ConstructionMode, ConstructionSpec, ThetaGrid};
use shockdefault::fixtures::{self, Fixture};
use shockdefault::mc::{run_fixture, Estimate, McConfig};
use shockdefault::pricing::{
    bond_price, classic_price, credit_spread, loss_no_predictable_check, predefault_price, price_brute,
    price_via_qtau, risk_premium, shock_free_premium, DefaultModel, DefaultableClaim, DiscountMode, QtauPrice,
    Rates,
};
use shockdefault::{Process, RandomTime, Rational, Scalar, ScenarioTree};

use crate::config::{Arithmetic, CheckKind, Config, CustomSpec, LadderSpec, OneOrMany};
use crate::report::{CheckLine, LadderRow, RunReport, SplitRow, Summary, Table};
use crate::CliError;

/// Runs the configured pipeline. `identities_only` drops the tables.
pub fn run(cfg: &Config, identities_only: bool) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut report = match cfg.run.arithmetic {
        Arithmetic::Rational => run_with::<Rational>(cfg, identities_only),
        Arithmetic::Double => run_with::<f64>(cfg, identities_only),
    }?;
    report.timing_ms = start.elapsed().as_millis() as u64;
    Ok(report)
}

pub fn build<S: Scalar>(cfg: &Config) -> Result<Fixture<S>, CliError> {
    let m = &cfg.model;
    if let Some(name) = &m.fixture {
        return Ok(fixtures::named(name, m.discount)?);
    }
    if let Some(r) = &m.random {
        let seed = r.seed.or(cfg.run.seed).expect("validated seed");
        return Ok(fixtures::random(seed, r.options(), m.discount)?);
    }
    custom::<S>(m.custom.as_ref().expect("validated model"), m.discount)
}

fn custom<S: Scalar>(c: &CustomSpec, mode: DiscountMode) -> Result<Fixture<S>, CliError> {
    let cfg_err = |e: String| CliError::Config(format!("model.custom: {}", e));
    let n_out = c.paths.len();
    let mut paths = Vec::with_capacity(n_out);
    for p in &c.paths {
        paths.push((p.moves.clone(), p.prob.to_scalar::<S>().map_err(cfg_err)?));
    }
    let tree = ScenarioTree::from_paths(c.horizon, paths).map_err(|e| cfg_err(e.to_string()))?;
    let by_path = |rows: &Vec<Vec<crate::num::Num>>| -> Result<Process<S>, CliError> {
        let mut p = Process::zeros(c.horizon, n_out);
        for (w, row) in rows.iter().enumerate() {
            for (n, v) in row.iter().enumerate() {
                p.set(n, w, v.to_scalar().map_err(cfg_err)?);
            }
        }
        Ok(p)
    };
    let a = by_path(&c.target)?;
    let shocks = c
        .shocks
        .iter()
        .map(|s| RandomTime::new(s.iter().map(|t| usize::try_from(*t).ok()).collect()))
        .collect();
    let spec = ConstructionSpec { tree, a: a.clone(), shocks };
    let built = construct_tau(&spec, c.construction, &c.grid)?;
    let promised = match &c.claim.promised {
        OneOrMany::One(v) => vec![v.to_scalar().map_err(cfg_err)?; n_out],
        OneOrMany::Many(v) => v.iter().map(|x| x.to_scalar()).collect::<Result<_, _>>().map_err(cfg_err)?,
    };
    let recovery = match &c.claim.recovery {
        Some(rows) => by_path(rows)?,
        None => Process::zeros(c.horizon, n_out),
    };
    let rate = c.claim.rate.to_scalar().map_err(cfg_err)?;
    Ok(fixtures::assemble("custom", built, a, c.claim.maturity, promised, recovery, rate, mode)?)
}

fn tol<S: Scalar>() -> f64 {
    if S::EXACT {
        0.0
    } else {
        1e-9
    }
}

/// Values of an `F`-adapted process on the atoms of each `F_n`.
fn tabulate<S: Scalar>(name: String, p: &Process<S>, tree: &ScenarioTree<S>) -> Table {
    let values = (0..=p.horizon())
        .map(|n| {
            tree.filtration()
                .at(n)
                .blocks()
                .iter()
                .map(|b| p.get(n, b[0]).to_f64())
                .collect()
        })
        .collect();
    Table { name, values }
}

fn mean<S: Scalar>(tree: &ScenarioTree<S>, row: &[S]) -> f64 {
    tree.expect(row).to_f64()
}

fn run_with<S: Scalar>(cfg: &Config, identities_only: bool) -> Result<RunReport, CliError> {
    let fx = build::<S>(cfg)?;
    let (model, claim, rates) = (&fx.model, &fx.claim, &fx.rates);
    let es = &model.space;
    let tree = es.tree();
    let t = claim.maturity;
    let st = predefault_price(claim, es, &model.az, rates)?;
    let rp = risk_premium(claim, model, rates)?;
    let qp = price_via_qtau(claim, model, rates);
    // errors are not Clone: a failed price is recomputed to surface its error
    let qtau = || -> Result<&QtauPrice<S>, CliError> {
        match &qp {
            Ok(q) => Ok(q),
            Err(_) => Err(price_via_qtau(claim, model, rates).expect_err("deterministic failure").into()),
        }
    };

    let mut lines = Vec::new();
    let mut ladder = Vec::new();
    let mut mc = None;
    for kind in cfg.check_list() {
        let name = kind.name();
        let line = match kind {
            CheckKind::Law => CheckLine::from_parts(name, vec![fx.built.law_check(&fx.target, tol::<S>())?], ""),
            CheckKind::Immersion => {
                let im = es.check_immersion()?;
                let mut c = Check::new("immersion", im.gap.max(im.martingale_gap), tol::<S>(), im.worst);
                c.pass = im.holds;
                CheckLine::from_parts(name, vec![c], "")
            }
            CheckKind::GMartingale => {
                let mc = es.g().martingale_check(&model.gc.n)?;
                let mut c = Check::new("compensated default indicator", mc.gap, tol::<S>(), mc.worst);
                c.pass = mc.holds;
                CheckLine::from_parts(name, vec![c], "")
            }
            CheckKind::ShockIdentities => {
                CheckLine::from_parts(name, es.shock_identities(&model.az, &model.gc, &model.sd, &model.sa)?, "")
            }
            CheckKind::Masking => {
                let brute = price_brute(claim, es, rates)?;
                let alive = |p: &Process<S>| {
                    p.map(|n, w, v| if es.tau().le(w, n) { S::zero() } else { v.clone() })
                };
                let c = Check::processes("alive prices", &alive(&brute), &alive(&st), tol::<S>());
                CheckLine::from_parts(name, vec![c], "")
            }
            CheckKind::QtauFormula => {
                let c = Check::processes("shock-aware price", &qtau()?.price, &st, tol::<S>());
                CheckLine::from_parts(name, vec![c], "")
            }
            CheckKind::NaiveFormula => {
                let q = qtau()?;
                let c = Check::processes("compensator-only price", &q.naive, &st, tol::<S>());
                let note = format!("gap at time 0 = {}", crate::num::sig17(q.h_term.get(0, 0).to_f64()));
                CheckLine::from_parts(name, vec![c], note)
            }
            CheckKind::Recovery => {
                CheckLine::from_parts(name, qtau()?.recovery.checks(claim, model)?, "")
            }
            CheckKind::MeasureChange => {
                CheckLine::from_parts(name, qtau()?.measure.checks.clone(), "")
            }
            CheckKind::Premium => CheckLine::from_parts(name, rp.checks.clone(), ""),
            CheckKind::ClosedForm if fx.shock_free => {
                let cf = shock_free_premium(claim, model, rates, &st)?;
                let cl = classic_price(claim, model, rates)?;
                let parts = vec![
                    Check::processes("premium closed form", &rp.pi, &cf, tol::<S>()),
                    Check::processes("classic price", &cl, &st, tol::<S>()),
                ];
                CheckLine::from_parts(name, parts, "")
            }
            CheckKind::ClosedForm => CheckLine::skipped(name, "model is not shock-free"),
            CheckKind::Spread => {
                CheckLine::from_parts(name, vec![credit_spread(claim, model, rates, cfg.run.spread)?.check], "")
            }
            CheckKind::Loss => {
                let v = bond_price(es)?;
                let verdict = loss_no_predictable_check(&v, es)?;
                let parts = vec![
                    Check::flag("negative price jump at default", verdict.loss_holds),
                    Check::flag("no predictable default part", verdict.pass),
                ];
                CheckLine::from_parts(name, parts, "")
            }
            CheckKind::Ladder => {
                let spec = cfg.ladder.clone().unwrap_or_default();
                ladder = run_ladder(&spec)?;
                ladder_line(&ladder)
            }
            CheckKind::Mc => {
                let r = &cfg.run;
                let mcc = McConfig {
                    paths: r.paths,
                    seed: r.seed.expect("validated seed"),
                    workers: r.workers,
                    batches: r.batches,
                };
                let rep = run_fixture(&fx, &mcc)?;
                let z = |e: &Estimate| match e.exact {
                    Some(x) if e.std_error > 0.0 => (e.mean - x).abs() / e.std_error,
                    Some(x) if e.mean != x => f64::INFINITY,
                    _ => 0.0,
                };
                let worst = rep.default_prob.iter().chain([&rep.price0, &rep.premium_t]).map(z).fold(0.0, f64::max);
                let line = CheckLine::from_parts(name, vec![Check::new("estimates within 3 sigma", worst, 3.0, None)], "");
                mc = Some(rep);
                line
            }
        };
        lines.push(line);
    }
    if let (Some(spec), true) = (&cfg.ladder, ladder.is_empty()) {
        ladder = run_ladder(spec)?;
    }

    let mut tables = Vec::new();
    let mut split = Vec::new();
    if !identities_only {
        tables.push(tabulate("azema_z".into(), &model.az.z, tree));
        tables.push(tabulate("hazard".into(), &model.gc.hazard, tree));
        tables.push(tabulate("predefault_price".into(), &st, tree));
        if let Ok(q) = &qp {
            tables.push(tabulate("naive_price".into(), &q.naive, tree));
        }
        tables.push(tabulate("premium".into(), &rp.pi, tree));
        tables.push(tabulate("idiosyncratic_premium".into(), &rp.idiosyncratic, tree));
        for (i, s) in rp.shock.iter().enumerate() {
            tables.push(tabulate(format!("shock_{}_premium", i + 1), s, tree));
        }
        if let Ok(cs) = credit_spread(claim, model, rates, cfg.run.spread) {
            tables.push(tabulate("credit_spread".into(), &cs.s, tree));
        }
        for n in 0..=t {
            let total = mean(tree, rp.pi.at(n));
            let idio = mean(tree, rp.idiosyncratic.at(n));
            if rp.shock.is_empty() {
                split.push(SplitRow { time_index: n, total_premium: total, idiosyncratic: idio, shock_id: None, shock_premium: 0.0 });
            }
            for (i, s) in rp.shock.iter().enumerate() {
                split.push(SplitRow {
                    time_index: n,
                    total_premium: total,
                    idiosyncratic: idio,
                    shock_id: Some(i + 1),
                    shock_premium: mean(tree, s.at(n)),
                });
            }
        }
    }
    let summary = Summary {
        model: fx.name.clone(),
        horizon: es.horizon(),
        maturity: t,
        outcomes: es.n_outcomes(),
        shocks: model.sd.n_shocks(),
        shock_free: fx.shock_free,
        predefault_price_0: st.get(0, 0).to_f64(),
        expected_premium: mean(tree, rp.pi.at(t)),
        naive_gap_0: qp.as_ref().map_or(0.0, |q| q.h_term.get(0, 0).to_f64()),
    };
    Ok(RunReport {
        config: cfg.clone(),
        summary,
        checks: lines,
        tables,
        premium_split: split,
        ladder,
        mc,
        timing_ms: 0,
    })
}

/// Continuous-time construction and pricing errors on the exponential target.
pub fn run_ladder(spec: &LadderSpec) -> Result<Vec<LadderRow>, CliError> {
    let mut rows = Vec::new();
    for &steps in &spec.steps {
        let (tree, a) = fixtures::exponential_target::<f64>(steps)?;
        let cont = ConstructionSpec { tree: tree.clone(), a: a.clone(), shocks: vec![] };
        let built = construct_tau(&cont, ConstructionMode::Exponential, &ThetaGrid::Breakpoints)?;
        let law_error = built.law_check(&a, 0.0)?.max_error;

        let exact = ConstructionSpec { tree, a, shocks: vec![] };
        let built = construct_tau(&exact, ConstructionMode::DiscreteExact, &ThetaGrid::Breakpoints)?;
        let sd = built.decomposition()?;
        let model = DefaultModel::new(built.space, sd)?;
        let n_out = model.n_outcomes();
        let claim = DefaultableClaim {
            maturity: steps,
            promised: vec![1.0; n_out],
            recovery: Process::constant(steps, n_out, spec.recovery),
        };
        let rates = Rates::constant(spec.rate, 1.0 / steps as f64, DiscountMode::Continuous, steps, n_out);
        let st = predefault_price(&claim, &model.space, &model.az, &rates)?;
        let qp = price_via_qtau(&claim, &model, &rates)?;
        rows.push(LadderRow { steps, law_error, price_error: qp.price.max_abs_diff(&st)? });
    }
    Ok(rows)
}

/// First-order convergence: every error ratio across a halving of the
/// step lies in `[1.6, 2.4]`.
fn ladder_line(rows: &[LadderRow]) -> CheckLine {
    let ratio_check = |what: &str, errs: Vec<f64>| {
        let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
        let worst = ratios.iter().map(|r| (r - 2.0).abs()).fold(0.0, f64::max);
        let mut c = Check::new(format!("{} error ratio", what), worst, 0.4, None);
        c.pass = errs.iter().all(|e| *e > 0.0) && ratios.iter().all(|r| (1.6..=2.4).contains(r));
        c
    };
    let parts = vec![
        ratio_check("construction law", rows.iter().map(|r| r.law_error).collect()),
        ratio_check("continuous price", rows.iter().map(|r| r.price_error).collect()),
    ];
    CheckLine::from_parts("ladder", parts, "max_error is the largest |ratio - 2|")
}
