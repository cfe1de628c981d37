//! Monte Carlo over the outcomes of a finite model. Every path owns a
//! ChaCha8 stream keyed by its index, so ensembles do not depend on how
//! many workers draw them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::fixtures::Fixture;
use crate::pricing::risk_premium;
use crate::scalar::Scalar;

const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    pub workers: usize,
    /// Batches for the batch-means error estimate.
    pub batches: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            paths: 100_000,
            seed: 0,
            workers: 1,
            batches: 100,
        }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::Range("at least one worker is required".into()));
        }
        if self.batches < 2 || self.paths < self.batches || !self.paths.is_multiple_of(self.batches) {
            return Err(Error::Range(format!(
                "{} paths cannot be split into {} equal batches",
                self.paths, self.batches
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error from batch means.
    pub std_error: f64,
    pub half_width_99: f64,
    pub exact: Option<f64>,
}

impl Estimate {
    /// `|mean - exact| ≤ k σ`; true when no exact value is known.
    pub fn within(&self, k: f64) -> bool {
        self.exact.is_none_or(|x| (self.mean - x).abs() <= k * self.std_error)
    }
}

/// Cumulative weights used for inverse-transform sampling.
fn cumulative(probs: &[f64]) -> Result<Vec<f64>> {
    if probs.iter().any(|p| p.is_nan() || *p < 0.0) {
        return Err(contract("sampling weights must be nonnegative"));
    }
    let mut acc = 0.0;
    let cum: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if (acc - 1.0).abs() > 1e-9 {
        return Err(contract("sampling weights do not sum to one"));
    }
    Ok(cum)
}

fn draw(cum: &[f64], seed: u64, path: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    let u: f64 = rng.random::<f64>() * cum[cum.len() - 1];
    cum.partition_point(|c| *c <= u).min(cum.len() - 1)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Range(format!("thread pool: {}", e)))
}

/// The sampled outcome of every path, in path order.
pub fn sample_outcomes(probs: &[f64], cfg: &McConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let cum = cumulative(probs)?;
    let seed = cfg.seed;
    Ok(pool(cfg.workers)?.install(|| {
        (0..cfg.paths as u64)
            .into_par_iter()
            .map(|i| draw(&cum, seed, i))
            .collect()
    }))
}

/// Sample mean of `f(outcome)` with a batch-means standard error.
pub fn estimate(probs: &[f64], cfg: &McConfig, f: impl Fn(usize) -> f64 + Sync) -> Result<Estimate> {
    cfg.validate()?;
    let cum = cumulative(probs)?;
    let per = cfg.paths / cfg.batches;
    let seed = cfg.seed;
    let means: Vec<f64> = pool(cfg.workers)?.install(|| {
        (0..cfg.batches)
            .into_par_iter()
            .map(|b| {
                let start = (b * per) as u64;
                (start..start + per as u64).map(|i| f(draw(&cum, seed, i))).sum::<f64>() / per as f64
            })
            .collect()
    });
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let std_error = (var / k).sqrt();
    Ok(Estimate {
        mean,
        std_error,
        half_width_99: Z99 * std_error,
        exact: None,
    })
}

/// Estimates next to exact kernel values for one fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub fixture: String,
    pub config: McConfig,
    /// `P(τ ≤ n)` for `n = 0..=N`.
    pub default_prob: Vec<Estimate>,
    /// Pre-default price at time 0.
    pub price0: Estimate,
    /// `E[π(X)_T]`.
    pub premium_t: Estimate,
}

impl McReport {
    pub fn within(&self, k: f64) -> bool {
        self.default_prob.iter().all(|e| e.within(k)) && self.price0.within(k) && self.premium_t.within(k)
    }
}

pub fn run_fixture<S: Scalar>(fx: &Fixture<S>, cfg: &McConfig) -> Result<McReport> {
    let es = &fx.model.space;
    let tree = es.tree();
    let probs: Vec<f64> = tree.probs().iter().map(|p| p.to_f64()).collect();
    let tau = es.tau();
    let t = fx.claim.maturity;
    let bank = fx.rates.bank().to_f64();
    let payoff: Vec<f64> = (0..es.n_outcomes())
        .map(|w| match tau.value(w) {
            Some(k) if k <= t => fx.claim.recovery.get(k, w).to_f64() / bank.get(k, w),
            _ => fx.claim.promised[w].to_f64() / bank.get(t, w),
        })
        .collect();
    let report = risk_premium(&fx.claim, &fx.model, &fx.rates)?;
    let pi_t: Vec<f64> = report.pi.at(t).iter().map(|x| x.to_f64()).collect();
    let exact_mean = |v: &dyn Fn(usize) -> f64| -> f64 { (0..probs.len()).map(|w| probs[w] * v(w)).sum() };

    let mut default_prob = Vec::with_capacity(es.horizon() + 1);
    for n in 0..=es.horizon() {
        let ind = |w: usize| if tau.le(w, n) { 1.0 } else { 0.0 };
        let mut e = estimate(&probs, cfg, ind)?;
        e.exact = Some(exact_mean(&ind));
        default_prob.push(e);
    }
    // F_0 is trivial on root trees, so S̃_0 = E[payoff] / Z_0
    let z0 = fx.model.az.z.get(0, 0).to_f64();
    let mut price0 = estimate(&probs, cfg, |w| payoff[w] / z0)?;
    price0.exact = Some(report.predefault.get(0, 0).to_f64());
    let mut premium_t = estimate(&probs, cfg, |w| pi_t[w])?;
    premium_t.exact = Some(exact_mean(&|w| pi_t[w]));
    Ok(McReport {
        fixture: fx.name.clone(),
        config: *cfg,
        default_prob,
        price0,
        premium_t,
    })
}
