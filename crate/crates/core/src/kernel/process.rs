use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::kernel::tree::Filtration;
use crate::scalar::Scalar;

/// Measurability level of a process with respect to a filtration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    /// `X_n` is `F_n`-measurable.
    Optional,
    /// `X_n` is `F_{n-1}`-measurable.
    Predictable,
    /// Only `F_N`-measurable (or not measurable at all w.r.t. `F`).
    Raw,
}

/// A real process indexed by time `0..=N` and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Process<S: Scalar> {
    values: Vec<Vec<S>>,
}

impl<S: Scalar> Process<S> {
    pub fn new(values: Vec<Vec<S>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Shape("process with no time index".into()));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n) {
            return Err(Error::Shape("ragged process".into()));
        }
        Ok(Process { values })
    }

    pub fn from_fn(horizon: usize, n_outcomes: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        Process {
            values: (0..=horizon)
                .map(|n| (0..n_outcomes).map(|w| f(n, w)).collect())
                .collect(),
        }
    }

    pub fn constant(horizon: usize, n_outcomes: usize, c: S) -> Self {
        Self::from_fn(horizon, n_outcomes, |_, _| c.clone())
    }

    pub fn zeros(horizon: usize, n_outcomes: usize) -> Self {
        Self::constant(horizon, n_outcomes, S::zero())
    }

    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn n_outcomes(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, n: usize) -> &[S] {
        &self.values[n]
    }

    pub fn get(&self, n: usize, w: usize) -> &S {
        &self.values[n][w]
    }

    pub fn set(&mut self, n: usize, w: usize, v: S) {
        self.values[n][w] = v;
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.values
    }

    /// `X_n - X_{n-1}`, zero at `n = 0`.
    pub fn increment(&self, n: usize, w: usize) -> S {
        if n == 0 {
            S::zero()
        } else {
            self.values[n][w].clone() - self.values[n - 1][w].clone()
        }
    }

    pub fn map(&self, f: impl Fn(usize, usize, &S) -> S) -> Self {
        Process {
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(n, row)| row.iter().enumerate().map(|(w, x)| f(n, w, x)).collect())
                .collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Process {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.horizon() != other.horizon() || self.n_outcomes() != other.n_outcomes() {
            return Err(Error::Shape("processes on different grids".into()));
        }
        Ok(())
    }

    /// Freezes the process after a random time: `X_{n ∧ T}`.
    pub fn stopped(&self, t: &RandomTime) -> Self {
        self.map(|n, w, _| {
            let m = t.value(w).map_or(n, |tv| tv.min(n));
            self.values[m][w].clone()
        })
    }

    /// Largest absolute node-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.same_shape(other)?;
        let mut worst = 0.0f64;
        for (a, b) in self.values.iter().zip(&other.values) {
            for (x, y) in a.iter().zip(b) {
                let d = (x.clone() - y.clone()).abs().to_f64();
                if d > worst || d.is_nan() {
                    worst = d;
                }
            }
        }
        Ok(worst)
    }

    /// Exact (or tolerance-based for floats) node-wise equality, reporting the
    /// first differing node.
    pub fn first_mismatch(&self, other: &Self, tol: f64) -> Option<(usize, usize)> {
        for (n, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            for (w, (x, y)) in a.iter().zip(b).enumerate() {
                if !x.approx_eq(y, tol) {
                    return Some((n, w));
                }
            }
        }
        None
    }

    /// Is the process measurable at the given level w.r.t. `filt`?
    pub fn has_level(&self, filt: &Filtration, level: Level, tol: f64) -> bool {
        match level {
            Level::Raw => true,
            Level::Optional => (0..=self.horizon()).all(|n| filt.at(n).measures(&self.values[n], tol)),
            Level::Predictable => {
                (0..=self.horizon()).all(|n| filt.before(n).measures(&self.values[n], tol))
            }
        }
    }

    /// Lifts a process defined on root outcomes through base coordinates.
    pub fn lift(&self, base_of: impl Fn(usize) -> usize, n_outcomes: usize) -> Self {
        Process {
            values: self
                .values
                .iter()
                .map(|r| (0..n_outcomes).map(|w| r[base_of(w)].clone()).collect())
                .collect(),
        }
    }

    pub fn to_f64(&self) -> Process<f64> {
        Process {
            values: self
                .values
                .iter()
                .map(|r| r.iter().map(|x| x.to_f64()).collect())
                .collect(),
        }
    }

    pub fn cast<T: Scalar>(&self) -> Process<T> {
        Process {
            values: self
                .values
                .iter()
                .map(|r| r.iter().map(|x| T::from_f64(x.to_f64())).collect())
                .collect(),
        }
    }
}

/// A grid-valued random time; `None` is the beyond-horizon sentinel (∞).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomTime {
    values: Vec<Option<usize>>,
}

impl RandomTime {
    pub fn new(values: Vec<Option<usize>>) -> Self {
        RandomTime { values }
    }

    pub fn constant(n_outcomes: usize, t: Option<usize>) -> Self {
        RandomTime {
            values: vec![t; n_outcomes],
        }
    }

    pub fn never(n_outcomes: usize) -> Self {
        Self::constant(n_outcomes, None)
    }

    pub fn value(&self, w: usize) -> Option<usize> {
        self.values[w]
    }

    pub fn values(&self) -> &[Option<usize>] {
        &self.values
    }

    pub fn n_outcomes(&self) -> usize {
        self.values.len()
    }

    pub fn is(&self, w: usize, n: usize) -> bool {
        self.values[w] == Some(n)
    }

    /// `1_{T <= n}`; false on the sentinel.
    pub fn le(&self, w: usize, n: usize) -> bool {
        matches!(self.values[w], Some(t) if t <= n)
    }

    /// `1_{T >= n}`; true on the sentinel.
    pub fn ge(&self, w: usize, n: usize) -> bool {
        self.values[w].is_none_or(|t| t >= n)
    }

    pub fn is_finite(&self, w: usize) -> bool {
        self.values[w].is_some()
    }

    /// Indicator process `1_{T <= n}`.
    pub fn indicator<S: Scalar>(&self, horizon: usize) -> Process<S> {
        Process::from_fn(horizon, self.n_outcomes(), |n, w| {
            if self.le(w, n) {
                S::one()
            } else {
                S::zero()
            }
        })
    }

    /// The event `{T = n}` as a boolean vector.
    pub fn event_eq(&self, n: usize) -> Vec<bool> {
        (0..self.n_outcomes()).map(|w| self.is(w, n)).collect()
    }

    /// Restriction to an event: `T` on `E`, ∞ off `E`.
    pub fn restrict(&self, event: &[bool]) -> Result<Self> {
        if event.len() != self.n_outcomes() {
            return Err(Error::Shape("event does not match outcome count".into()));
        }
        Ok(RandomTime {
            values: self
                .values
                .iter()
                .zip(event)
                .map(|(t, &e)| if e { *t } else { None })
                .collect(),
        })
    }

    /// Is this a stopping time of `filt`: `{T = n}` a union of time-`n` blocks?
    pub fn is_stopping_time(&self, filt: &Filtration) -> bool {
        let horizon = filt.horizon();
        if self.values.iter().flatten().any(|&t| t > horizon) {
            return false;
        }
        (0..=horizon).all(|n| filt.at(n).measures_event(&self.event_eq(n)))
    }

    pub fn check_stopping_time(&self, filt: &Filtration, what: &str) -> Result<()> {
        if self.is_stopping_time(filt) {
            Ok(())
        } else {
            Err(contract(format!("{} is not a stopping time", what)))
        }
    }

    /// Lifts a time defined on root outcomes through base coordinates.
    pub fn lift(&self, base_of: impl Fn(usize) -> usize, n_outcomes: usize) -> Self {
        RandomTime {
            values: (0..n_outcomes).map(|w| self.values[base_of(w)]).collect(),
        }
    }
}
