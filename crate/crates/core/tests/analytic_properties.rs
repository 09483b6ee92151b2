//! Analytic identities of the rate functionals on randomized instances:
//! convexity, duality in both directions, gradients, and growth bounds.

use rand::Rng;

use graphldp_core::legendre::{dual_value, legendre_sup, optimal_tilt, truncation_gap};
use graphldp_core::measures::{
    kullback_action, mcmillan_entropy, product_measure, relative_entropy_extended,
    spectral_potential,
};
use graphldp_core::rng::substream;
use graphldp_core::types::inner_product;
use graphldp_core::{Kernel, PairMeasure, TestFunction, TypeLaw};

fn rand_in<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn random_kernel<R: Rng>(k: usize, rng: &mut R) -> Kernel {
    let mut rows = vec![vec![0.0f64; k]; k];
    for a in 0..k {
        for b in a..k {
            let v = rand_in(rng, 0.2, 3.0);
            rows[a][b] = v;
            rows[b][a] = v;
        }
    }
    Kernel::from_rows(&rows).unwrap()
}

fn random_law<R: Rng>(k: usize, rng: &mut R) -> TypeLaw {
    let raw: Vec<f64> = (0..k).map(|_| rand_in(rng, 0.2, 1.2)).collect();
    let total: f64 = raw.iter().sum();
    TypeLaw::new(raw.into_iter().map(|w| w / total).collect()).unwrap()
}

fn random_scaled<R: Rng>(m: &PairMeasure, rng: &mut R, lo: f64, hi: f64) -> PairMeasure {
    let k = m.k();
    let mut rows = vec![vec![0.0f64; k]; k];
    for a in 0..k {
        for b in a..k {
            let v = m.get(a, b) * rand_in(rng, lo, hi);
            rows[a][b] = v;
            rows[b][a] = v;
        }
    }
    PairMeasure::from_rows(&rows).unwrap()
}

fn random_test_function<R: Rng>(k: usize, rng: &mut R, span: f64) -> TestFunction {
    let mut rows = vec![vec![0.0f64; k]; k];
    for a in 0..k {
        for b in a..k {
            let v = rand_in(rng, -span, span);
            rows[a][b] = v;
            rows[b][a] = v;
        }
    }
    TestFunction::from_rows(&rows).unwrap()
}

#[test]
fn action_is_convex_along_midpoints() {
    for i in 0..100u64 {
        let mut rng = substream(0xC0F1, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let m = product_measure(&kernel, &law);
        let pi1 = random_scaled(&m, &mut rng, 0.2, 3.0);
        let pi2 = random_scaled(&m, &mut rng, 0.2, 3.0);
        let mid_rows: Vec<Vec<f64>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| 0.5 * (pi1.get(a, b) + pi2.get(a, b)))
                    .collect()
            })
            .collect();
        let mid = PairMeasure::from_rows(&mid_rows).unwrap();
        let lhs = kullback_action(&mid, &kernel, &law);
        let rhs = 0.5 * kullback_action(&pi1, &kernel, &law)
            + 0.5 * kullback_action(&pi2, &kernel, &law);
        assert!(lhs <= rhs + 1e-10, "instance {i}: {lhs} > {rhs}");
    }
}

#[test]
fn spectral_potential_is_convex_and_monotone() {
    for i in 0..100u64 {
        let mut rng = substream(0x59EC, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let g1 = random_test_function(k, &mut rng, 3.0);
        let g2 = random_test_function(k, &mut rng, 3.0);

        let mid_rows: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| 0.5 * (g1.get(a, b) + g2.get(a, b))).collect())
            .collect();
        let mid = TestFunction::from_rows(&mid_rows).unwrap();
        let lhs = spectral_potential(&mid, &kernel, &law).value;
        let rhs = 0.5 * spectral_potential(&g1, &kernel, &law).value
            + 0.5 * spectral_potential(&g2, &kernel, &law).value;
        assert!(lhs <= rhs + 1e-10, "instance {i}: convexity {lhs} > {rhs}");

        // Raising g cellwise raises the potential.
        let up_rows: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| g1.get(a, b) + 0.3).collect())
            .collect();
        let up = TestFunction::from_rows(&up_rows).unwrap();
        assert!(
            spectral_potential(&up, &kernel, &law).value
                >= spectral_potential(&g1, &kernel, &law).value
        );
    }
}

#[test]
fn every_test_function_gives_a_lower_bound_on_the_action() {
    let mut checked = 0u64;
    for i in 0..100u64 {
        let mut rng = substream(0x3EAD, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let m = product_measure(&kernel, &law);
        let pi = random_scaled(&m, &mut rng, 0.2, 3.0);
        let action = kullback_action(&pi, &kernel, &law);
        for _ in 0..10 {
            let g = random_test_function(k, &mut rng, 4.0);
            let lower = dual_value(&g, &pi, &kernel, &law);
            assert!(
                lower <= action + 1e-9,
                "instance {i}: dual value {lower} exceeds action {action}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
}

#[test]
fn dual_maximization_attains_the_action_with_the_analytic_maximizer() {
    for i in 0..100u64 {
        let mut rng = substream(0xD0A2, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let m = product_measure(&kernel, &law);
        let pi = random_scaled(&m, &mut rng, 0.2, 3.0);

        let action = kullback_action(&pi, &kernel, &law);
        let report = legendre_sup(&pi, &kernel, &law, 1e-12);
        assert!(report.converged, "instance {i} did not converge");
        assert!(
            (report.value - action).abs() <= 1e-8,
            "instance {i}: sup {} vs action {action}",
            report.value
        );
        let analytic = optimal_tilt(&pi, &m).unwrap();
        for (a, b, p) in pi.iter() {
            if p > 0.0 {
                assert!(
                    (report.maximizer.get(a, b) - analytic.get(a, b)).abs() <= 1e-6,
                    "instance {i}: maximizer mismatch at ({a},{b})"
                );
            }
        }
    }
}

#[test]
fn spectral_gradient_matches_centered_differences() {
    for i in 0..20u64 {
        let mut rng = substream(0x96AD, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let m = product_measure(&kernel, &law);
        let g = random_test_function(k, &mut rng, 2.0);
        let h = 1e-5;
        for a in 0..k {
            for b in a..k {
                let shift = |delta: f64| {
                    let rows: Vec<Vec<f64>> = (0..k)
                        .map(|r| {
                            (0..k)
                                .map(|c| {
                                    let bump = (r == a && c == b) || (r == b && c == a);
                                    g.get(r, c) + if bump { delta } else { 0.0 }
                                })
                                .collect()
                        })
                        .collect();
                    let gp = TestFunction::from_rows(&rows).unwrap();
                    spectral_potential(&gp, &kernel, &law).value
                };
                let numeric = (shift(h) - shift(-h)) / (2.0 * h);
                // One symmetric cell carries m(a,b) on both orientations off
                // the diagonal and once on it.
                let weight = if a == b { 0.5 } else { 1.0 };
                let analytic = weight * g.get(a, b).exp() * m.get(a, b);
                assert!(
                    (numeric - analytic).abs() <= 1e-6 * (1.0 + analytic.abs()),
                    "instance {i} cell ({a},{b}): {numeric} vs {analytic}"
                );
            }
        }
    }
}

#[test]
fn sublevel_sets_of_the_action_have_bounded_mass() {
    // A finite action pins the total mass: ||pi|| log(||pi||/(e ||m||))
    // <= 2 H + ||m||, the bound behind exponential tightness.
    for i in 0..100u64 {
        let mut rng = substream(0x11C7, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let m = product_measure(&kernel, &law);
        let pi = random_scaled(&m, &mut rng, 0.05, 8.0);
        let action = kullback_action(&pi, &kernel, &law);
        let lhs = pi.total_mass() * (pi.total_mass() / (std::f64::consts::E * m.total_mass())).ln();
        assert!(
            lhs <= 2.0 * action + m.total_mass() + 1e-12,
            "instance {i}: {lhs} vs {}",
            2.0 * action + m.total_mass()
        );
    }
}

#[test]
fn entropy_identities_on_scaled_targets() {
    let kernel = Kernel::constant(2, 1.0).unwrap();
    let law = TypeLaw::uniform(2);
    let m = product_measure(&kernel, &law);

    // H(c m) = (1/2)(c log c - c + 1) ||m||, checked at several c.
    for c in [0.25f64, 0.5, 1.5, 2.0, 3.0] {
        let target = m.scaled(c).unwrap();
        let expected = 0.5 * (c * c.ln() - c + 1.0) * m.total_mass();
        let got = kullback_action(&target, &kernel, &law);
        assert!((got - expected).abs() < 1e-13, "c={c}: {got} vs {expected}");
    }

    // The entropy of the typical measure only sees the total mass.
    assert!((mcmillan_entropy(&m, &kernel, &law) - std::f64::consts::LN_2).abs() < 1e-15);

    // Relative entropy is zero only at equality.
    assert_eq!(relative_entropy_extended(&m, &m), 0.0);
    let off = m.scaled(1.0 + 1e-7).unwrap();
    assert!(relative_entropy_extended(&off, &m) > 0.0);
}

#[test]
fn truncation_gap_vanishes_once_the_cap_clears_the_maximizer() {
    for i in 0..50u64 {
        let mut rng = substream(0x7A7D, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let m = product_measure(&kernel, &law);
        let pi = random_scaled(&m, &mut rng, 0.15, 6.0);
        let reach = optimal_tilt(&pi, &m).unwrap().sup_norm();
        for t in [0.4 * reach + 1e-3, reach + 1.0, reach + 5.0] {
            let gap = truncation_gap(&pi, &kernel, &law, t).unwrap();
            assert!(gap >= 0.0, "instance {i}, t={t}: negative gap {gap}");
            if t >= reach + 1.0 {
                assert!(gap <= 1e-6, "instance {i}, t={t}: gap {gap}");
            }
        }
    }
}

#[test]
fn half_space_events_bound_the_action_from_below_at_their_margin() {
    // At the margin level <g, pi> - eps/2 the optimizing measure pi is in
    // the half-space interior, so the dual bound (1/2)<g, pi> - rho(g) is a
    // certified lower bound for the rate of that event.
    for i in 0..50u64 {
        let mut rng = substream(0x4A1F, i);
        let k = 2 + (i % 3) as usize;
        let kernel = random_kernel(k, &mut rng);
        let law = random_law(k, &mut rng);
        let m = product_measure(&kernel, &law);
        let pi = random_scaled(&m, &mut rng, 0.3, 2.5);
        let g = optimal_tilt(&pi, &m).unwrap();
        let margin = inner_product(&g, &pi) - 0.05;
        let action = kullback_action(&pi, &kernel, &law);
        let bound = 0.5 * margin - spectral_potential(&g, &kernel, &law).value;
        assert!(
            bound <= action + 1e-9,
            "instance {i}: margin bound {bound} exceeds action {action}"
        );
    }
}
