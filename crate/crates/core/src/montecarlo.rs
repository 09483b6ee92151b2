//! Monte Carlo estimators for event probabilities and decay rates, plain
//! and importance-sampled. Every estimator is bit-reproducible for a fixed
//! seed regardless of worker count: sample i always uses RNG substream i,
//! samples are grouped into fixed batches, and batch partials are folded in
//! batch order.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{
    empirical_pair_measure, event_membership, importance_weight, sample_graph,
    sample_graph_conditional, sample_tilted_graph, sample_tilted_graph_conditional,
    ConnectionSchedule, Event,
};
use crate::numeric::KahanAccumulator;
use crate::rng::substream;
use crate::types::{type_counts_for, Kernel, TestFunction, TypeLaw};

/// Samples per scheduling unit. Partials are folded in batch order, so the
/// batch size is part of the reproducibility contract, not a tuning knob.
pub const BATCH_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy)]
pub struct McOptions {
    pub samples: u64,
    pub seed: u64,
    /// Condition on the deterministic colour counts rounded from the law.
    pub conditional: bool,
    /// Worker threads; 0 uses the global pool. The estimate is identical
    /// either way, only wall time changes.
    pub workers: usize,
}

impl McOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            conditional: false,
            workers: 0,
        }
    }

    pub fn conditional(mut self, yes: bool) -> Self {
        self.conditional = yes;
        self
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// A Monte Carlo point estimate with its sampling pedigree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    /// (sum w)^2 / sum w^2; equals the sample count when all weights are 1.
    pub effective_sample_size: f64,
    pub seed: u64,
}

fn run_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn batch_starts(samples: u64) -> Vec<u64> {
    (0..samples).step_by(BATCH_SIZE as usize).collect()
}

/// Direct estimate of P(pair measure in event) by indicator averaging.
pub fn mc_event_probability(
    n: u64,
    event: &Event,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    opts: &McOptions,
) -> Result<Estimate> {
    if opts.samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let counts = opts.conditional.then(|| type_counts_for(law, n));
    let hits: u64 = run_pool(opts.workers, || {
        batch_starts(opts.samples)
            .into_par_iter()
            .map(|start| -> Result<u64> {
                let mut hits = 0u64;
                for i in start..(start + BATCH_SIZE).min(opts.samples) {
                    let mut rng = substream(opts.seed, i);
                    let graph = match &counts {
                        Some(c) => sample_graph_conditional(c, kernel, schedule, &mut rng)?,
                        None => sample_graph(n, law, kernel, schedule, &mut rng)?,
                    };
                    let w = empirical_pair_measure(&graph, schedule)?;
                    hits += event_membership(event, &w) as u64;
                }
                Ok(hits)
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))
    })??;
    let s = opts.samples as f64;
    let p = hits as f64 / s;
    Ok(Estimate {
        value: p,
        std_error: (p * (1.0 - p) / s).sqrt(),
        samples: opts.samples,
        effective_sample_size: s,
        seed: opts.seed,
    })
}

#[derive(Clone, Copy, Default)]
struct WeightedPartial {
    sum_wi: f64,
    sum_wi_sq: f64,
    sum_w: f64,
    sum_w_sq: f64,
}

fn weighted_batches(
    n: u64,
    event: Option<&Event>,
    tilt: &TestFunction,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    opts: &McOptions,
) -> Result<WeightedPartial> {
    let counts = opts.conditional.then(|| type_counts_for(law, n));
    let partials: Vec<WeightedPartial> = run_pool(opts.workers, || {
        batch_starts(opts.samples)
            .into_par_iter()
            .map(|start| -> Result<WeightedPartial> {
                let mut wi = KahanAccumulator::default();
                let mut wi_sq = KahanAccumulator::default();
                let mut w_tot = KahanAccumulator::default();
                let mut w_sq = KahanAccumulator::default();
                for i in start..(start + BATCH_SIZE).min(opts.samples) {
                    let mut rng = substream(opts.seed, i);
                    let graph = match &counts {
                        Some(c) => {
                            sample_tilted_graph_conditional(c, kernel, tilt, schedule, &mut rng)?
                        }
                        None => sample_tilted_graph(n, law, kernel, tilt, schedule, &mut rng)?,
                    };
                    let w = importance_weight(&graph, tilt, kernel, schedule)?.exp();
                    w_tot.add(w);
                    w_sq.add(w * w);
                    let hit = match event {
                        Some(event) => {
                            let measure = empirical_pair_measure(&graph, schedule)?;
                            event_membership(event, &measure)
                        }
                        None => true,
                    };
                    if hit {
                        wi.add(w);
                        wi_sq.add(w * w);
                    }
                }
                Ok(WeightedPartial {
                    sum_wi: wi.value(),
                    sum_wi_sq: wi_sq.value(),
                    sum_w: w_tot.value(),
                    sum_w_sq: w_sq.value(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    // Sequential fold in batch order keeps the result worker-independent.
    let mut wi = KahanAccumulator::default();
    let mut wi_sq = KahanAccumulator::default();
    let mut w_tot = KahanAccumulator::default();
    let mut w_sq = KahanAccumulator::default();
    for p in &partials {
        wi.add(p.sum_wi);
        wi_sq.add(p.sum_wi_sq);
        w_tot.add(p.sum_w);
        w_sq.add(p.sum_w_sq);
    }
    Ok(WeightedPartial {
        sum_wi: wi.value(),
        sum_wi_sq: wi_sq.value(),
        sum_w: w_tot.value(),
        sum_w_sq: w_sq.value(),
    })
}

fn mean_and_error(sum: f64, sum_sq: f64, samples: u64) -> (f64, f64) {
    let s = samples as f64;
    let mean = sum / s;
    let var = (sum_sq / s - mean * mean).max(0.0);
    (mean, (var / s).sqrt())
}

/// Importance-sampled estimate of P(pair measure in event): graphs are
/// drawn from the tilted edge law and reweighted by the exact likelihood
/// ratio, so the estimator is unbiased at every n.
pub fn is_event_probability(
    n: u64,
    event: &Event,
    tilt: &TestFunction,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    opts: &McOptions,
) -> Result<Estimate> {
    if opts.samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let acc = weighted_batches(n, Some(event), tilt, kernel, law, schedule, opts)?;
    let (value, std_error) = mean_and_error(acc.sum_wi, acc.sum_wi_sq, opts.samples);
    let ess = if acc.sum_w_sq > 0.0 {
        acc.sum_w * acc.sum_w / acc.sum_w_sq
    } else {
        0.0
    };
    Ok(Estimate {
        value,
        std_error,
        samples: opts.samples,
        effective_sample_size: ess,
        seed: opts.seed,
    })
}

/// Mean importance weight over tilted samples. Unit mean is an identity of
/// the change of measure, so deviations beyond a few standard errors expose
/// a weight or sampler bug.
pub fn mean_importance_weight(
    n: u64,
    tilt: &TestFunction,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    opts: &McOptions,
) -> Result<Estimate> {
    if opts.samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let acc = weighted_batches(n, None, tilt, kernel, law, schedule, opts)?;
    let (value, std_error) = mean_and_error(acc.sum_w, acc.sum_w_sq, opts.samples);
    let ess = if acc.sum_w_sq > 0.0 {
        acc.sum_w * acc.sum_w / acc.sum_w_sq
    } else {
        0.0
    };
    Ok(Estimate {
        value,
        std_error,
        samples: opts.samples,
        effective_sample_size: ess,
        seed: opts.seed,
    })
}

/// Probability estimate recast on the large-deviation scale.
#[derive(Debug, Clone, Copy)]
pub struct RateEstimate {
    pub n: u64,
    pub probability: Estimate,
    /// -log(p) / n; absent when the estimate is zero.
    pub rate: Option<f64>,
    /// Three-standard-error band mapped through -log(p)/n. The upper end is
    /// infinite when the band reaches zero probability.
    pub rate_interval: Option<(f64, f64)>,
    /// Rule-of-three bound 3/samples, reported only on zero hits.
    pub probability_upper_bound: Option<f64>,
}

/// Rate estimate from direct Monte Carlo (tilt = None) or importance
/// sampling under the given tilt.
pub fn rate_estimate(
    n: u64,
    event: &Event,
    tilt: Option<&TestFunction>,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    opts: &McOptions,
) -> Result<RateEstimate> {
    let probability = match tilt {
        Some(g) => is_event_probability(n, event, g, kernel, law, schedule, opts)?,
        None => mc_event_probability(n, event, kernel, law, schedule, opts)?,
    };
    let nf = n as f64;
    if probability.value <= 0.0 {
        return Ok(RateEstimate {
            n,
            probability,
            rate: None,
            rate_interval: None,
            probability_upper_bound: Some(3.0 / opts.samples as f64),
        });
    }
    let rate = -probability.value.ln() / nf;
    let hi_p = probability.value + 3.0 * probability.std_error;
    let lo_p = probability.value - 3.0 * probability.std_error;
    let rate_lo = (-hi_p.ln() / nf).max(0.0);
    let rate_hi = if lo_p > 0.0 {
        -lo_p.ln() / nf
    } else {
        f64::INFINITY
    };
    Ok(RateEstimate {
        n,
        probability,
        rate: Some(rate),
        rate_interval: Some((rate_lo, rate_hi)),
        probability_upper_bound: None,
    })
}
