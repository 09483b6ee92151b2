//! Statistical behaviour of the graph process and its samplers at desk
//! scale: laws of large numbers for the pair measure, exact finite-n means,
//! agreement between the two edge samplers, and conditioning contracts.
//! Every check uses a deterministic seed and three-standard-error bands
//! sized so that a correct implementation fails with negligible probability.

use graphldp_core::graph::{
    empirical_pair_measure, empirical_type_measure, pair_scale, sample_graph,
    sample_graph_conditional, sample_graph_direct, sample_tilted_graph,
    tilted_connection_probs, ConnectionSchedule,
};
use graphldp_core::legendre::optimal_tilt;
use graphldp_core::measures::product_measure;
use graphldp_core::rng::substream;
use graphldp_core::types::type_counts_for;
use graphldp_core::{Kernel, TypeLaw};

struct CellStats {
    sums: Vec<f64>,
    sums_sq: Vec<f64>,
    samples: u64,
}

impl CellStats {
    fn new(cells: usize) -> Self {
        CellStats {
            sums: vec![0.0; cells],
            sums_sq: vec![0.0; cells],
            samples: 0,
        }
    }

    fn record(&mut self, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.sums[i] += v;
            self.sums_sq[i] += v * v;
        }
        self.samples += 1;
    }

    fn z_score(&self, i: usize, target: f64) -> f64 {
        let s = self.samples as f64;
        let mean = self.sums[i] / s;
        let var = (self.sums_sq[i] / s - mean * mean).max(0.0);
        (mean - target) / (var / s).sqrt()
    }
}

#[test]
fn tilted_pair_measures_concentrate_on_their_target() {
    // Tilting toward 1.4 m makes 1.4 m the typical measure; at n = 2000 the
    // O(1/n) finite-size bias is under one standard error of a 1e4-sample
    // mean, so a 3 SE band is a sound test.
    let n = 2000u64;
    let samples = 10_000u64;
    let kernel = Kernel::constant(2, 0.25).unwrap();
    let law = TypeLaw::uniform(2);
    let sched = ConnectionSchedule::NearCritical;
    let m = product_measure(&kernel, &law);
    let target = m.scaled(1.4).unwrap();
    let tilt = optimal_tilt(&target, &m).unwrap();

    let mut stats = CellStats::new(3);
    for i in 0..samples {
        let mut rng = substream(0x11A0, i);
        let graph = sample_tilted_graph(n, &law, &kernel, &tilt, &sched, &mut rng).unwrap();
        let w = empirical_pair_measure(&graph, &sched).unwrap();
        stats.record(&[w.get(0, 0), w.get(0, 1), w.get(1, 1)]);
    }
    for (i, (a, b)) in [(0usize, 0usize), (0, 1), (1, 1)].iter().enumerate() {
        let z = stats.z_score(i, target.get(*a, *b));
        assert!(z.abs() <= 3.0, "cell ({a},{b}): z = {z}");
    }
}

#[test]
fn sample_means_match_the_exact_finite_n_expectation() {
    // E L2(a,b) = (n-1) mu_a mu_b p(a,b) exactly, for the tilted sampler at
    // a strong tilt where the asymptotic target alone would be biased by
    // about two standard errors.
    let n = 2000u64;
    let samples = 10_000u64;
    let kernel = Kernel::constant(2, 1.0).unwrap();
    let law = TypeLaw::uniform(2);
    let sched = ConnectionSchedule::NearCritical;
    let m = product_measure(&kernel, &law);
    let target = m.scaled(1.5).unwrap();
    let tilt = optimal_tilt(&target, &m).unwrap();
    let tilted = tilted_connection_probs(&tilt, &kernel, &sched, n).unwrap();

    let mut stats = CellStats::new(3);
    for i in 0..samples {
        let mut rng = substream(0x11A5, i);
        let graph = sample_tilted_graph(n, &law, &kernel, &tilt, &sched, &mut rng).unwrap();
        let w = empirical_pair_measure(&graph, &sched).unwrap();
        stats.record(&[w.get(0, 0), w.get(0, 1), w.get(1, 1)]);
    }
    for (i, (a, b)) in [(0usize, 0usize), (0, 1), (1, 1)].iter().enumerate() {
        let exact = (n - 1) as f64 * law.get(*a) * law.get(*b) * tilted[a * 2 + b];
        let z = stats.z_score(i, exact);
        assert!(z.abs() <= 3.0, "cell ({a},{b}): z = {z}");
    }
}

#[test]
fn skipping_and_direct_samplers_draw_the_same_law() {
    let n = 300u64;
    let samples = 2000u64;
    let kernel = Kernel::from_rows(&[vec![1.4, 0.6], vec![0.6, 2.2]]).unwrap();
    let law = TypeLaw::new(vec![0.35, 0.65]).unwrap();
    let sched = ConnectionSchedule::NearCritical;

    let mut fast = CellStats::new(4);
    let mut slow = CellStats::new(4);
    for i in 0..samples {
        let g1 = sample_graph(n, &law, &kernel, &sched, &mut substream(0x5A01, i)).unwrap();
        let c1 = g1.class_edge_counts();
        fast.record(&[
            c1[0] as f64,
            c1[1] as f64,
            c1[3] as f64,
            g1.edges().len() as f64,
        ]);
        let g2 =
            sample_graph_direct(n, &law, &kernel, &sched, &mut substream(0x5A02, i)).unwrap();
        let c2 = g2.class_edge_counts();
        slow.record(&[
            c2[0] as f64,
            c2[1] as f64,
            c2[3] as f64,
            g2.edges().len() as f64,
        ]);
    }
    // Same law, independent streams: the difference of means is within
    // 4 combined standard errors per statistic.
    let s = samples as f64;
    for i in 0..4 {
        let mean_f = fast.sums[i] / s;
        let mean_s = slow.sums[i] / s;
        let var_f = (fast.sums_sq[i] / s - mean_f * mean_f).max(0.0);
        let var_s = (slow.sums_sq[i] / s - mean_s * mean_s).max(0.0);
        let se = ((var_f + var_s) / s).sqrt();
        assert!(
            (mean_f - mean_s).abs() <= 4.0 * se,
            "statistic {i}: {mean_f} vs {mean_s} (se {se})"
        );
    }
}

#[test]
fn conditional_sampler_hits_the_rounded_counts_every_time() {
    let law = TypeLaw::new(vec![0.3, 0.7]).unwrap();
    let kernel = Kernel::constant(2, 1.0).unwrap();
    let sched = ConnectionSchedule::NearCritical;
    let counts = type_counts_for(&law, 997);
    assert_eq!(counts.iter().sum::<u64>(), 997);
    for i in 0..50u64 {
        let graph =
            sample_graph_conditional(&counts, &kernel, &sched, &mut substream(0xC0, i)).unwrap();
        assert_eq!(graph.colour_counts(), counts);
    }
}

#[test]
fn colour_frequencies_obey_the_law_of_large_numbers() {
    let n = 2000u64;
    let samples = 2000u64;
    let kernel = Kernel::constant(3, 0.8).unwrap();
    let law = TypeLaw::new(vec![0.2, 0.3, 0.5]).unwrap();
    let sched = ConnectionSchedule::NearCritical;
    let mut stats = CellStats::new(3);
    for i in 0..samples {
        let graph = sample_graph(n, &law, &kernel, &sched, &mut substream(0xF0CA, i)).unwrap();
        let freq = empirical_type_measure(&graph);
        stats.record(&[freq.get(0), freq.get(1), freq.get(2)]);
    }
    for c in 0..3 {
        let z = stats.z_score(c, law.get(c));
        assert!(z.abs() <= 3.0, "colour {c}: z = {z}");
    }
}

#[test]
fn pair_measure_mass_counts_every_edge_twice() {
    let kernel = Kernel::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
    let law = TypeLaw::new(vec![0.4, 0.6]).unwrap();
    let sched = ConnectionSchedule::NearCritical;
    for i in 0..20u64 {
        let n = 100 + 173 * i;
        let graph = sample_graph(n, &law, &kernel, &sched, &mut substream(0x2E, i)).unwrap();
        let w = empirical_pair_measure(&graph, &sched).unwrap();
        let lhs = pair_scale(n, &sched).unwrap() * w.total_mass();
        let rhs = 2.0 * graph.edges().len() as f64;
        assert!(
            (lhs - rhs).abs() <= 1e-12 * (1.0 + rhs),
            "n={n}: {lhs} vs {rhs}"
        );
    }
}
