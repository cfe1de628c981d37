use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use shockdefault::fixtures::{self, Fixture, RandomOptions};
use shockdefault::mc::{run_fixture, McConfig};
use shockdefault::pricing::{risk_premium, DiscountMode};
use shockdefault::{Process, Rational, Scalar};

fn fixture<S: Scalar>(horizon: usize) -> Fixture<S> {
    let opts = RandomOptions { horizon, max_branching: 3, ..RandomOptions::default() };
    fixtures::random(3, opts, DiscountMode::DiscreteExact).unwrap()
}

fn raw<S: Scalar>(fx: &Fixture<S>) -> Process<S> {
    let es = &fx.model.space;
    // increasing, as the dual projections require
    Process::from_fn(es.horizon(), es.n_outcomes(), |n, w| S::ratio((n * (1 + (w * 3) % 11)) as i64, 5))
}

fn kernel<S: Scalar>(c: &mut Criterion, label: &str) {
    let mut g = c.benchmark_group(format!("kernel/{}", label));
    for horizon in [3, 5] {
        let fx = fixture::<S>(horizon);
        let es = &fx.model.space;
        let x = raw(&fx);
        let f = es.f();
        let last = x.at(horizon).to_vec();
        g.bench_with_input(BenchmarkId::new("cond_exp", horizon), &horizon, |b, _| {
            b.iter(|| f.cond_exp(black_box(&last), 1).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("dual_predictable", horizon), &horizon, |b, _| {
            b.iter(|| f.dual_predictable_projection(black_box(&x)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("azema", horizon), &horizon, |b, _| b.iter(|| es.azema().unwrap()));
        g.bench_with_input(BenchmarkId::new("risk_premium", horizon), &horizon, |b, _| {
            b.iter(|| risk_premium(&fx.claim, &fx.model, &fx.rates).unwrap())
        });
    }
    g.finish();
}

fn exact(c: &mut Criterion) {
    kernel::<Rational>(c, "rational");
}

fn double(c: &mut Criterion) {
    kernel::<f64>(c, "double");
}

fn monte_carlo(c: &mut Criterion) {
    let fx = fixtures::named::<f64>("trinomial-two-shocks", DiscountMode::DiscreteExact).unwrap();
    let mut g = c.benchmark_group("mc");
    g.sample_size(10);
    for workers in [1, 4] {
        let cfg = McConfig { paths: 20_000, seed: 1, workers, batches: 20 };
        g.bench_with_input(BenchmarkId::new("trinomial", workers), &cfg, |b, cfg| {
            b.iter(|| run_fixture(&fx, cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, exact, double, monte_carlo);
criterion_main!(benches);
