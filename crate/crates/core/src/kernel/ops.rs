use serde::{Deserialize, Serialize};

use crate::error::{contract_at, Error, Node, Result};
use crate::kernel::process::{Level, Process};
use crate::kernel::tree::{Filtration, ScenarioTree};
use crate::scalar::{Scalar, Tolerances};

/// Which integrand value multiplies the increment `ΔX_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegrandConvention {
    /// `H_{k-1} ΔX_k` (the usual left-point sum).
    Left,
    /// `H_k ΔX_k`, for integrands that are already predictable.
    AsWritten,
}

/// Outcome of a martingale test: the worst node and its defect.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleCheck {
    pub holds: bool,
    pub worst: Option<Node>,
    pub gap: f64,
}

/// A probability vector paired with a filtration on the same outcomes.
#[derive(Debug)]
pub struct Filtered<'a, S: Scalar> {
    pub probs: &'a [S],
    pub filt: &'a Filtration,
    pub tol: Tolerances,
}

impl<S: Scalar> Clone for Filtered<'_, S> {
    fn clone(&self) -> Self {
        *self
    }
}

impl<S: Scalar> Copy for Filtered<'_, S> {}

impl<S: Scalar> ScenarioTree<S> {
    /// The tree viewed with its factor filtration `F`.
    pub fn f(&self) -> Filtered<'_, S> {
        Filtered::new(self.probs(), self.filtration())
    }

    /// The tree's probability with another filtration on the same outcomes.
    pub fn with<'a>(&'a self, filt: &'a Filtration) -> Filtered<'a, S> {
        Filtered::new(self.probs(), filt)
    }
}

impl<'a, S: Scalar> Filtered<'a, S> {
    pub fn new(probs: &'a [S], filt: &'a Filtration) -> Self {
        Filtered {
            probs,
            filt,
            tol: Tolerances::default(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.filt.horizon()
    }

    pub fn n_outcomes(&self) -> usize {
        self.probs.len()
    }

    fn check(&self, x: &Process<S>) -> Result<()> {
        if x.n_outcomes() != self.n_outcomes() {
            return Err(Error::Shape("process does not match outcome count".into()));
        }
        if x.horizon() != self.horizon() {
            return Err(Error::Shape(format!(
                "process horizon {} vs filtration horizon {}",
                x.horizon(),
                self.horizon()
            )));
        }
        Ok(())
    }

    /// `E[x | F_n]`.
    pub fn cond_exp(&self, x: &[S], n: usize) -> Result<Vec<S>> {
        if n > self.horizon() {
            return Err(Error::Range(format!("time {} beyond horizon {}", n, self.horizon())));
        }
        Ok(self.filt.at(n).cond_exp(self.probs, x))
    }

    /// `E[x | F_{n-1}]` (the trivial field at `n = 0`).
    pub fn cond_exp_before(&self, x: &[S], n: usize) -> Result<Vec<S>> {
        if n > self.horizon() {
            return Err(Error::Range(format!("time {} beyond horizon {}", n, self.horizon())));
        }
        Ok(self.filt.before(n).cond_exp(self.probs, x))
    }

    /// `E[x | F_n]` when `x` is an indicator.
    pub fn cond_prob(&self, event: &[bool], n: usize) -> Result<Vec<S>> {
        self.cond_exp(&indicator(event), n)
    }

    pub fn expect(&self, x: &[S]) -> S {
        crate::scalar::sum(self.probs.iter().zip(x).map(|(p, v)| p.clone() * v.clone()))
    }

    /// Optional projection: `(oX)_n = E[X_n | F_n]`.
    pub fn optional_projection(&self, x: &Process<S>) -> Result<Process<S>> {
        self.check(x)?;
        let rows = (0..=self.horizon())
            .map(|n| self.filt.at(n).cond_exp(self.probs, x.at(n)))
            .collect();
        Process::new(rows)
    }

    /// Predictable projection: `(pX)_n = E[X_n | F_{n-1}]`.
    pub fn predictable_projection(&self, x: &Process<S>) -> Result<Process<S>> {
        self.check(x)?;
        let rows = (0..=self.horizon())
            .map(|n| self.filt.before(n).cond_exp(self.probs, x.at(n)))
            .collect();
        Process::new(rows)
    }

    fn check_increasing(&self, a: &Process<S>) -> Result<()> {
        let tol = if S::EXACT { 0.0 } else { self.tol.mart };
        for n in 1..=a.horizon() {
            for w in 0..a.n_outcomes() {
                if a.increment(n, w).to_f64() < -tol {
                    return Err(contract_at(n, w, "process is not increasing"));
                }
            }
        }
        Ok(())
    }

    fn dual(&self, a: &Process<S>, predictable: bool) -> Result<Process<S>> {
        self.check(a)?;
        self.check_increasing(a)?;
        let n_out = self.n_outcomes();
        let mut rows = Vec::with_capacity(self.horizon() + 1);
        let start = if predictable {
            self.filt.before(0).cond_exp(self.probs, a.at(0))
        } else {
            self.filt.at(0).cond_exp(self.probs, a.at(0))
        };
        rows.push(start);
        for n in 1..=self.horizon() {
            let inc: Vec<S> = (0..n_out).map(|w| a.increment(n, w)).collect();
            let part = if predictable {
                self.filt.before(n)
            } else {
                self.filt.at(n)
            };
            let p = part.cond_exp(self.probs, &inc);
            let row = rows[n - 1]
                .iter()
                .zip(p)
                .map(|(prev, d): (&S, S)| prev.clone() + d)
                .collect();
            rows.push(row);
        }
        Process::new(rows)
    }

    /// Dual optional projection: `ΔA^o_n = E[ΔA_n | F_n]`.
    pub fn dual_optional_projection(&self, a: &Process<S>) -> Result<Process<S>> {
        self.dual(a, false)
    }

    /// Dual predictable projection (compensator): `ΔA^p_n = E[ΔA_n | F_{n-1}]`.
    pub fn dual_predictable_projection(&self, a: &Process<S>) -> Result<Process<S>> {
        self.dual(a, true)
    }

    /// Doob-Meyer decomposition of a supermartingale `X = M - A`, with
    /// `ΔA_n = X_{n-1} - E[X_n | F_{n-1}]` predictable and increasing.
    pub fn doob_meyer(&self, x: &Process<S>) -> Result<(Process<S>, Process<S>)> {
        self.check(x)?;
        if !x.has_level(self.filt, Level::Optional, self.tol.mart) {
            return Err(Error::Contract("process is not adapted".into()));
        }
        let n_out = self.n_outcomes();
        let tol = if S::EXACT { 0.0 } else { self.tol.mart };
        let mut a = Process::<S>::zeros(self.horizon(), n_out);
        for n in 1..=self.horizon() {
            let ce = self.filt.before(n).cond_exp(self.probs, x.at(n));
            for w in 0..n_out {
                let d = x.get(n - 1, w).clone() - ce[w].clone();
                if d.to_f64() < -tol {
                    return Err(contract_at(
                        n,
                        w,
                        format!("not a supermartingale (drift {:e})", -d.to_f64()),
                    ));
                }
                let v = a.get(n - 1, w).clone() + d;
                a.set(n, w, v);
            }
        }
        let m = x.add(&a)?;
        Ok((m, a))
    }

    /// Tests `E[X_n | F_{n-1}] = X_{n-1}` at every node.
    pub fn martingale_check(&self, x: &Process<S>) -> Result<MartingaleCheck> {
        self.check(x)?;
        let mut out = MartingaleCheck {
            holds: true,
            worst: None,
            gap: 0.0,
        };
        let tol = if S::EXACT { 0.0 } else { self.tol.mart };
        for n in 1..=self.horizon() {
            let ce = self.filt.before(n).cond_exp(self.probs, x.at(n));
            for w in 0..self.n_outcomes() {
                let g = (ce[w].clone() - x.get(n - 1, w).clone()).abs();
                let exact_miss = S::EXACT && !g.is_zero();
                let gf = g.to_f64();
                if exact_miss || gf > tol {
                    out.holds = false;
                }
                if gf > out.gap || (exact_miss && out.worst.is_none()) {
                    out.gap = gf;
                    out.worst = Some(Node { time: n, outcome: w });
                }
            }
        }
        if !x.has_level(self.filt, Level::Optional, tol) {
            out.holds = false;
        }
        Ok(out)
    }

    pub fn is_martingale(&self, x: &Process<S>) -> Result<bool> {
        Ok(self.martingale_check(x)?.holds)
    }
}

/// `(∫ H dX)_n = Σ_{k≤n} H_· ΔX_k`, starting from zero.
pub fn stochastic_integral<S: Scalar>(
    h: &Process<S>,
    x: &Process<S>,
    conv: IntegrandConvention,
) -> Result<Process<S>> {
    h.same_shape(x)?;
    let mut out = Process::<S>::zeros(x.horizon(), x.n_outcomes());
    for n in 1..=x.horizon() {
        for w in 0..x.n_outcomes() {
            let hv = match conv {
                IntegrandConvention::Left => h.get(n - 1, w),
                IntegrandConvention::AsWritten => h.get(n, w),
            };
            let v = out.get(n - 1, w).clone() + hv.clone() * x.increment(n, w);
            out.set(n, w, v);
        }
    }
    Ok(out)
}

/// Boolean event as a 0/1 vector.
pub fn indicator<S: Scalar>(event: &[bool]) -> Vec<S> {
    event
        .iter()
        .map(|&e| if e { S::one() } else { S::zero() })
        .collect()
}
