//! Closed-form functionals on pair measures: the reference product measure,
//! the spectral potential, the Kullback action, and the McMillan entropy.
//! All sums run over ordered colour pairs with compensated summation, and
//! 0 * log 0 is 0 throughout.

use crate::numeric::kahan_sum;
use crate::types::{Kernel, PairMeasure, TestFunction, TypeLaw};

/// Reference measure m(a,b) = kernel(a,b) * law(a) * law(b).
pub fn product_measure(kernel: &Kernel, law: &TypeLaw) -> PairMeasure {
    assert_eq!(kernel.k(), law.k(), "kernel and law disagree on k");
    let k = kernel.k();
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| kernel.get(a, b) * law.get(a) * law.get(b))
                .collect()
        })
        .collect();
    PairMeasure::from_rows(&rows).expect("product of valid inputs is a valid measure")
}

/// Spectral potential value; `overflow` is set when e^g exceeded the double
/// range on a cell carrying reference mass, in which case `value` is +inf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralValue {
    pub value: f64,
    pub overflow: bool,
}

/// -1/2 * sum (1 - e^{g(a,b)}) m(a,b), computed as 1/2 * sum expm1(g) * m so
/// small tilts lose no precision. Cells with m(a,b) = 0 contribute nothing
/// whatever g does there.
pub fn spectral_potential(g: &TestFunction, kernel: &Kernel, law: &TypeLaw) -> SpectralValue {
    let m = product_measure(kernel, law);
    assert_eq!(g.k(), m.k(), "test function and kernel disagree on k");
    let mut overflow = false;
    let total = kahan_sum(g.iter().map(|(a, b, gv)| {
        let mv = m.get(a, b);
        if mv == 0.0 {
            return 0.0;
        }
        let term = gv.exp_m1() * mv;
        if term == f64::INFINITY {
            overflow = true;
        }
        term
    }));
    // Compensated summation turns inf - inf into NaN, so the overflow case
    // bypasses the accumulated total.
    SpectralValue {
        value: if overflow { f64::INFINITY } else { 0.5 * total },
        overflow,
    }
}

/// Extended relative entropy between finite measures: the sum over cells of
/// pi log(pi/sigma) - pi + sigma. Each cell term is nonnegative, so the sum
/// has no cancellation; +inf exactly when pi charges a sigma-null cell.
pub fn relative_entropy_extended(pi: &PairMeasure, sigma: &PairMeasure) -> f64 {
    assert_eq!(pi.k(), sigma.k(), "measures disagree on k");
    let mut diverged = false;
    let total = kahan_sum(pi.iter().map(|(a, b, p)| {
        let s = sigma.get(a, b);
        if p == 0.0 {
            s
        } else if s == 0.0 {
            diverged = true;
            0.0
        } else {
            p * (p / s).ln() - p + s
        }
    }));
    if diverged {
        f64::INFINITY
    } else {
        // Rounding can pull a sum of tiny nonnegative cell terms below zero.
        total.max(0.0)
    }
}

/// Rate functional for the empirical pair measure: half the extended
/// relative entropy against the reference product measure. +inf iff pi is
/// not absolutely continuous with respect to it.
pub fn kullback_action(pi: &PairMeasure, kernel: &Kernel, law: &TypeLaw) -> f64 {
    0.5 * relative_entropy_extended(pi, &product_measure(kernel, law))
}

/// Counting exponent 1/2 * (|rho| - |m| - sum rho log(rho / |m|)), where |m|
/// is the total mass of the reference product measure. Note the denominator
/// inside the log is the scalar total mass, not the cell value.
pub fn mcmillan_entropy(rho: &PairMeasure, kernel: &Kernel, law: &TypeLaw) -> f64 {
    let m = product_measure(kernel, law);
    assert_eq!(rho.k(), m.k(), "measure and kernel disagree on k");
    let m_mass = m.total_mass();
    let rho_mass = rho.total_mass();
    let mut diverged = false;
    let entropy_sum = kahan_sum(rho.iter().map(|(_, _, r)| {
        if r == 0.0 {
            0.0
        } else if m_mass == 0.0 {
            diverged = true;
            0.0
        } else {
            r * (r / m_mass).ln()
        }
    }));
    if diverged {
        return f64::NEG_INFINITY;
    }
    0.5 * (rho_mass - m_mass - entropy_sum)
}
