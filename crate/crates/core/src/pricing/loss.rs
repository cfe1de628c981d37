use crate::error::{contract, Result};
use crate::enlargement::EnlargedSpace;
use crate::kernel::Process;
use crate::scalar::Scalar;
use crate::stopping::has_predictable_part;

use super::{price_brute, DefaultableClaim, DiscountMode, Rates};

/// Zero-recovery unit bond maturing at the horizon, no discounting:
/// `V_n = P(τ > N | G_n)`.
pub fn bond_price<S: Scalar>(es: &EnlargedSpace<S>) -> Result<Process<S>> {
    let n = es.horizon();
    let claim = DefaultableClaim::zero_recovery(n, vec![S::one(); es.n_outcomes()], n);
    let rates = Rates::zero(n, es.n_outcomes(), DiscountMode::DiscreteExact);
    price_brute(&claim, es, &rates)
}

/// Outcomes where the price does not drop at default (`τ = 0` counts as no
/// observable drop). Empty means the loss condition holds.
pub fn loss_violations<S: Scalar>(price: &Process<S>, es: &EnlargedSpace<S>) -> Vec<usize> {
    (0..es.n_outcomes())
        .filter(|&w| match es.tau().value(w) {
            Some(0) => true,
            Some(t) if t <= price.horizon() => price.increment(t, w) >= S::zero(),
            _ => false,
        })
        .collect()
}

pub fn loss_holds<S: Scalar>(price: &Process<S>, es: &EnlargedSpace<S>) -> bool {
    loss_violations(price, es).is_empty()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossVerdict {
    /// Every default comes with a strictly negative price jump.
    pub loss_holds: bool,
    pub violations: Vec<usize>,
    /// Largest event on which `τ` is predictable, if any.
    pub predictable_part: Option<Vec<bool>>,
    /// No predictable part was found.
    pub pass: bool,
}

/// Checks that `price` is a `G`-martingale, tests the loss condition, and
/// searches for a predictable part of `τ`.
pub fn loss_no_predictable_check<S: Scalar>(price: &Process<S>, es: &EnlargedSpace<S>) -> Result<LossVerdict> {
    if !es.g().is_martingale(price)? {
        return Err(contract("price is not a martingale in the enlarged filtration"));
    }
    let violations = loss_violations(price, es);
    let predictable_part = has_predictable_part(es.tau(), es.g_filtration())?;
    Ok(LossVerdict {
        loss_holds: violations.is_empty(),
        violations,
        pass: predictable_part.is_none(),
        predictable_part,
    })
}
