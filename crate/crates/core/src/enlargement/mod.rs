//! Progressive enlargement of the factor filtration by a random time, the
//! immersion property, and the Azéma supermartingale apparatus.

mod azema;
mod shocks;

pub use azema::{AzemaData, GCompensator};
pub use shocks::{IntensityData, ShockAzema};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Node, Result};
use crate::kernel::{indicator, Filtered, Filtration, Partition, Process, RandomTime, ScenarioTree};
use crate::scalar::Scalar;

/// A scenario tree together with a random time `τ` and the progressively
/// enlarged filtration `G_n = F_n ∨ σ(τ ∧ n)`.
#[derive(Debug, Clone)]
pub struct EnlargedSpace<S: Scalar> {
    tree: ScenarioTree<S>,
    tau: RandomTime,
    g: Filtration,
}

/// Key of a `G_n` block: the `F_n` block and what is known about `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Known {
    At(usize),
    Alive,
}

impl<S: Scalar> EnlargedSpace<S> {
    pub fn new(tree: ScenarioTree<S>, tau: RandomTime) -> Result<Self> {
        if tau.n_outcomes() != tree.n_outcomes() {
            return Err(contract(format!(
                "random time defined on {} outcomes, tree has {}",
                tau.n_outcomes(),
                tree.n_outcomes()
            )));
        }
        let horizon = tree.horizon();
        if let Some(t) = tau.values().iter().flatten().find(|&&t| t > horizon) {
            return Err(Error::Range(format!(
                "random time value {} beyond horizon {} (use the sentinel)",
                t, horizon
            )));
        }
        let f = tree.filtration();
        let parts = (0..=horizon)
            .map(|n| {
                let fp = f.at(n);
                Partition::from_keys((0..tree.n_outcomes()).map(|w| {
                    let k = match tau.value(w) {
                        Some(t) if t <= n => Known::At(t),
                        _ => Known::Alive,
                    };
                    (fp.block_of(w), k)
                }))
            })
            .collect();
        let g = Filtration::new(parts)?;
        Ok(EnlargedSpace { tree, tau, g })
    }

    pub fn tree(&self) -> &ScenarioTree<S> {
        &self.tree
    }

    pub fn tau(&self) -> &RandomTime {
        &self.tau
    }

    pub fn horizon(&self) -> usize {
        self.tree.horizon()
    }

    pub fn n_outcomes(&self) -> usize {
        self.tree.n_outcomes()
    }

    /// The enlarged filtration `G`.
    pub fn g_filtration(&self) -> &Filtration {
        &self.g
    }

    /// The space seen through `F`.
    pub fn f(&self) -> Filtered<'_, S> {
        self.tree.f()
    }

    /// The space seen through `G`.
    pub fn g(&self) -> Filtered<'_, S> {
        self.tree.with(&self.g)
    }

    /// Default indicator `1_{τ ≤ n}`.
    pub fn default_indicator(&self) -> Process<S> {
        self.tau.indicator(self.horizon())
    }

    /// Tests the immersion property two ways: the conditional law of `τ`
    /// freezes (`P(τ ≤ s | F_n) = P(τ ≤ s | F_N)` for `s ≤ n`), and every
    /// `F`-martingale stays a `G`-martingale (checked on the martingales
    /// `E[1_b | F_n]` of terminal `F` atoms `b`, which span all of them).
    pub fn check_immersion(&self) -> Result<ImmersionCheck> {
        let f = self.f();
        let g = self.g();
        let n_max = self.horizon();
        let tol = if S::EXACT { 0.0 } else { f.tol.mart };
        let mut law = Worst::default();
        for s in 0..=n_max {
            let ev: Vec<bool> = (0..self.n_outcomes()).map(|w| self.tau.le(w, s)).collect();
            let x = indicator::<S>(&ev);
            let terminal = f.cond_exp(&x, n_max)?;
            for n in s..n_max {
                let at_n = f.cond_exp(&x, n)?;
                law.update(n, &at_n, &terminal);
            }
        }
        let mut mart = Worst::default();
        for b in self.tree.filtration().at(n_max).blocks() {
            let mut ev = vec![false; self.n_outcomes()];
            for &w in b {
                ev[w] = true;
            }
            let x = indicator::<S>(&ev);
            for n in 0..n_max {
                let fe = f.cond_exp(&x, n)?;
                let ge = g.cond_exp(&x, n)?;
                mart.update(n, &ge, &fe);
            }
        }
        let by_law = law.holds(tol);
        let by_martingales = mart.holds(tol);
        if by_law != by_martingales {
            return Err(Error::Consistency {
                node: law.node.or(mart.node).unwrap_or(Node { time: 0, outcome: 0 }),
                msg: "immersion tests disagree".into(),
                gap: law.gap.max(mart.gap),
            });
        }
        Ok(ImmersionCheck {
            holds: by_law,
            worst: if by_law { None } else { law.node },
            gap: law.gap,
            martingale_gap: mart.gap,
        })
    }
}

/// Verdict of [`EnlargedSpace::check_immersion`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionCheck {
    pub holds: bool,
    /// Worst violation of the frozen-conditional-law criterion.
    pub worst: Option<Node>,
    pub gap: f64,
    /// Worst violation of the martingale-preservation criterion.
    pub martingale_gap: f64,
}

#[derive(Default)]
struct Worst {
    node: Option<Node>,
    gap: f64,
    exact_miss: bool,
}

impl Worst {
    fn update<S: Scalar>(&mut self, n: usize, a: &[S], b: &[S]) {
        for (w, (x, y)) in a.iter().zip(b).enumerate() {
            let d = (x.clone() - y.clone()).abs();
            let miss = S::EXACT && !d.is_zero();
            let df = d.to_f64();
            if df > self.gap || (miss && !self.exact_miss) {
                self.gap = self.gap.max(df);
                self.node = Some(Node { time: n, outcome: w });
            }
            self.exact_miss |= miss;
        }
    }

    fn holds(&self, tol: f64) -> bool {
        !self.exact_miss && self.gap <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn stopping_time_does_not_refine() {
        let tree = ScenarioTree::binomial(2, Rational::ratio(1, 2)).unwrap();
        // first up-move, a stopping time of F
        let tau = RandomTime::new(
            (0..tree.n_outcomes())
                .map(|w| {
                    let b = tree.coords()[w].base;
                    if b & 1 == 1 {
                        Some(1)
                    } else if b & 2 == 2 {
                        Some(2)
                    } else {
                        None
                    }
                })
                .collect(),
        );
        let es = EnlargedSpace::new(tree, tau).unwrap();
        for n in 0..=2 {
            assert_eq!(es.g_filtration().at(n), es.tree().filtration().at(n));
        }
        assert!(es.check_immersion().unwrap().holds);
    }

    #[test]
    fn independent_time_splits_blocks() {
        let tree = ScenarioTree::binomial(2, 0.5f64)
            .unwrap()
            .extend_with_uniform(4)
            .unwrap();
        let tau = RandomTime::new(
            tree.coords()
                .iter()
                .map(|c| match c.theta.unwrap() {
                    0 => Some(0),
                    1 => Some(1),
                    2 => Some(2),
                    _ => None,
                })
                .collect(),
        );
        let es = EnlargedSpace::new(tree, tau).unwrap();
        // F_n has 2^n blocks; τ∧n takes n+2 values once all are reachable
        assert_eq!(es.g_filtration().at(0).n_blocks(), 2);
        assert_eq!(es.g_filtration().at(1).n_blocks(), 2 * 3);
        assert_eq!(es.g_filtration().at(2).n_blocks(), 4 * 4);
        assert!(es.check_immersion().unwrap().holds);
    }
}
