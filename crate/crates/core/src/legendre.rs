//! Legendre duality for the pair-measure rate function. The dual objective
//! g -> 1/2<g,pi> - spectral_potential(g) separates across colour cells, so
//! the supremum is a family of 1-D concave maximizations solved per cell.

use crate::error::{Error, Result};
use crate::measures::{product_measure, spectral_potential};
use crate::numeric::kahan_sum;
use crate::types::{inner_product, Kernel, PairMeasure, TestFunction, TypeLaw};

/// Stand-in for -infinity in a maximizer: the most negative tilt whose
/// exponential is still a strictly positive double. Using it on cells that
/// carry no target mass leaves the attained supremum unchanged to double
/// precision while keeping every downstream exponential finite.
pub const NEG_CAP: f64 = -745.0;

/// Tilts beyond this make e^g useless in doubles; a cell whose objective
/// still slopes upward here is declared divergent.
const POS_CAP: f64 = 700.0;

/// Outcome of the per-cell dual maximization.
#[derive(Debug, Clone)]
pub struct DualSolveReport {
    /// Attained supremum; +inf when diverging.
    pub value: f64,
    pub maximizer: TestFunction,
    /// Largest Newton iteration count over cells.
    pub iterations: u32,
    pub converged: bool,
    /// Some cell objective is unbounded above, so the action is +inf.
    pub diverging: bool,
}

/// Exact maximizer g*(a,b) = log(pi(a,b)/m(a,b)) on the support of pi, and
/// NEG_CAP where pi vanishes. Errors when pi charges an m-null cell.
pub fn optimal_tilt(pi: &PairMeasure, m: &PairMeasure) -> Result<TestFunction> {
    assert_eq!(pi.k(), m.k(), "measures disagree on k");
    let k = pi.k();
    let mut rows = vec![vec![0.0; k]; k];
    for (a, b, p) in pi.iter() {
        let mv = m.get(a, b);
        rows[a][b] = if p == 0.0 {
            NEG_CAP
        } else if mv == 0.0 {
            return Err(Error::NotAbsolutelyContinuous { a: a.min(b), b: a.max(b) });
        } else {
            (p / mv).ln()
        };
    }
    TestFunction::from_rows(&rows)
}

/// 1/2<g,pi> - spectral_potential(g). Equals the Kullback action exactly at
/// g = optimal_tilt; below it everywhere else. Overflow of e^g on a cell
/// with reference mass drives the value to -inf, matching the objective's
/// true behaviour there.
pub fn dual_value(g: &TestFunction, pi: &PairMeasure, kernel: &Kernel, law: &TypeLaw) -> f64 {
    let pairing = 0.5 * inner_product(g, pi);
    let rho = spectral_potential(g, kernel, law);
    pairing - rho.value
}

/// Per-cell contribution to the dual objective, shared by the solver and the
/// truncation gap so that identical tilts produce bitwise identical values.
fn cell_objective(g: f64, p: f64, mv: f64) -> f64 {
    0.5 * (g * p - mv * g.exp_m1())
}

/// Maximizes the dual objective cell by cell: analytic warm start
/// g = log(pi/m), then safeguarded Newton g <- g + expm1(log(pi/m) - g)
/// until the distance to the optimum is at most tol. Cells with pi > 0 and
/// m = 0 (or with pi/m beyond e^700) have objective slope still positive at
/// g = +700 and are declared divergent.
pub fn legendre_sup(
    pi: &PairMeasure,
    kernel: &Kernel,
    law: &TypeLaw,
    tol: f64,
) -> DualSolveReport {
    assert!(tol > 0.0, "solver tolerance must be positive");
    let m = product_measure(kernel, law);
    assert_eq!(pi.k(), m.k(), "measure and kernel disagree on k");
    let k = pi.k();

    let mut rows = vec![vec![0.0; k]; k];
    let mut cell_values = Vec::with_capacity(k * k);
    let mut iterations = 0u32;
    let mut converged = true;
    let mut diverging = false;

    for (a, b, p) in pi.iter() {
        let mv = m.get(a, b);
        if p == 0.0 {
            // Objective 1/2 m (1 - e^g) increases towards g -> -inf; NEG_CAP
            // attains the supremum m/2 to double precision.
            let g = if mv == 0.0 { 0.0 } else { NEG_CAP };
            rows[a][b] = g;
            cell_values.push(cell_objective(g, p, mv));
            continue;
        }
        // Slope at POS_CAP is (p - m e^POS_CAP)/2; still positive means the
        // cell maximum lies beyond any usable tilt.
        if mv == 0.0 || p / mv > POS_CAP.exp() {
            rows[a][b] = POS_CAP;
            cell_values.push(f64::INFINITY);
            diverging = true;
            continue;
        }
        let target = (p / mv).ln();
        let mut g = target;
        let mut iter = 0u32;
        loop {
            let d = target - g;
            if d.abs() <= tol || iter >= 100 {
                converged &= d.abs() <= tol;
                break;
            }
            // Newton for slope = 0; expm1 >= -1 bounds the downward step,
            // and the upward step is capped to stay in exp range.
            g += d.exp_m1().min(60.0);
            iter += 1;
        }
        iterations = iterations.max(iter);
        rows[a][b] = g;
        cell_values.push(cell_objective(g, p, mv));
    }

    let value = if diverging {
        f64::INFINITY
    } else {
        kahan_sum(cell_values.iter().copied())
    };
    DualSolveReport {
        value,
        maximizer: TestFunction::from_rows(&rows).expect("solver grid is symmetric"),
        iterations,
        converged: converged && !diverging,
        diverging,
    }
}

/// Entrywise clip of g to [-t, t]. t must be positive.
pub fn truncate_test_function(g: &TestFunction, t: f64) -> Result<TestFunction> {
    if !(t > 0.0) {
        return Err(Error::Invalid(format!(
            "truncation level must be positive, got {t}"
        )));
    }
    let rows: Vec<Vec<f64>> = g
        .as_rows()
        .iter()
        .map(|row| row.iter().map(|v| v.clamp(-t, t)).collect())
        .collect();
    TestFunction::from_rows(&rows)
}

/// Loss of dual value from clipping the exact maximizer to [-t, t]:
/// kullback_action(pi) - dual_value(clip(optimal_tilt)). Computed as a sum
/// of per-cell differences through one code path, so a cell the clip leaves
/// untouched contributes exactly 0. Mathematically each cell difference is
/// >= 0 (the unclipped tilt is the cell maximum); the max with 0 only trims
/// sub-ulp rounding residue. Decreases to 0 as t grows.
pub fn truncation_gap(pi: &PairMeasure, kernel: &Kernel, law: &TypeLaw, t: f64) -> Result<f64> {
    let m = product_measure(kernel, law);
    let g_star = optimal_tilt(pi, &m)?;
    let g_t = truncate_test_function(&g_star, t)?;
    let diffs = g_star.iter().map(|(a, b, gs)| {
        let gt = g_t.get(a, b);
        let p = pi.get(a, b);
        let mv = m.get(a, b);
        (cell_objective(gs, p, mv) - cell_objective(gt, p, mv)).max(0.0)
    });
    Ok(kahan_sum(diffs))
}

/// Witness of a failed absolute-continuity: the tilt that is -log(eta) on
/// the m-null cells charged by pi and 0 elsewhere. Its dual value grows like
/// -log(eta) * pi(B) / 2 as eta decreases, certifying an infinite action.
/// Errors when pi is absolutely continuous with respect to m.
pub fn divergence_witness(pi: &PairMeasure, m: &PairMeasure, eta: f64) -> Result<TestFunction> {
    assert_eq!(pi.k(), m.k(), "measures disagree on k");
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::Invalid(format!(
            "witness parameter must lie strictly between 0 and 1, got {eta}"
        )));
    }
    let k = pi.k();
    let height = -eta.ln();
    let mut rows = vec![vec![0.0; k]; k];
    let mut found = false;
    for (a, b, p) in pi.iter() {
        if p > 0.0 && m.get(a, b) == 0.0 {
            rows[a][b] = height;
            found = true;
        }
    }
    if !found {
        return Err(Error::NoWitnessSet);
    }
    TestFunction::from_rows(&rows)
}
