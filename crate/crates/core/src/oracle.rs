//! Exact probabilities and exact graph counts through the sufficient
//! statistic (colour counts, per-class edge counts). Conditionally on the
//! colours, class edge counts are independent binomials, so events
//! factorize over the class lattice instead of the 2^C(n,2) edge sets. Ball
//! events reduce to products of binomial interval sums; half-space events
//! enumerate all classes but the widest, which is closed by prefix/suffix
//! sums; arbitrary predicates enumerate the full (budget-guarded) lattice.

use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{
    connection_probs, event_membership, measure_from_class_counts, pair_scale,
    ConnectionSchedule, Event,
};
use crate::measures::{kullback_action, mcmillan_entropy, product_measure};
use crate::numeric::{
    big_choose, big_ln, big_multinomial, ln_binom_pmf, ln_choose, ln_multinomial,
    neville_at_zero, KahanAccumulator, LogSumExp,
};
use crate::types::{type_counts_for, Kernel, PairMeasure, TypeLaw};

/// Cap on lattice visits for one exact-probability query.
pub const DEFAULT_ENUMERATION_BUDGET: f64 = 2e8;

/// Cap on colouring * edge-set visits for the brute-force oracle.
pub const NAIVE_BUDGET: f64 = 1e8;

/// Unordered colour pairs (a, b), a <= b, in lexicographic order. This is
/// the canonical class order used by every per-class vector in the module.
pub fn class_list(k: usize) -> Vec<(usize, usize)> {
    let mut classes = Vec::with_capacity(class_count(k));
    for a in 0..k {
        for b in a..k {
            classes.push((a, b));
        }
    }
    classes
}

pub fn class_count(k: usize) -> usize {
    k * (k + 1) / 2
}

/// Position of class (a, b) in class_list(k). Accepts either orientation.
pub fn class_index(k: usize, a: usize, b: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    a * k - a * (a + 1) / 2 + b
}

/// Number of node pairs a class can link: C(n_a, 2) on the diagonal,
/// n_a * n_b across.
pub fn pair_budget(type_counts: &[u64], a: usize, b: usize) -> u64 {
    if a == b {
        type_counts[a] * type_counts[a].saturating_sub(1) / 2
    } else {
        type_counts[a] * type_counts[b]
    }
}

/// Edge counts per colour class, indexed by class_list order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeCountConfig {
    k: usize,
    counts: Vec<u64>,
}

impl EdgeCountConfig {
    pub fn new(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != class_count(k) {
            return Err(Error::Dimension {
                what: "edge count config",
                expected: class_count(k),
                got: counts.len(),
            });
        }
        Ok(EdgeCountConfig { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, a: usize, b: usize) -> u64 {
        self.counts[class_index(self.k, a, b)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Checks every class count against its pair budget for these colours.
    pub fn validate_against(&self, type_counts: &[u64]) -> Result<()> {
        if type_counts.len() != self.k {
            return Err(Error::Dimension {
                what: "type counts",
                expected: self.k,
                got: type_counts.len(),
            });
        }
        for (idx, &(a, b)) in class_list(self.k).iter().enumerate() {
            let budget = pair_budget(type_counts, a, b);
            if self.counts[idx] > budget {
                return Err(Error::Invalid(format!(
                    "edge count {} for class ({a},{b}) exceeds the {budget} available pairs",
                    self.counts[idx]
                )));
            }
        }
        Ok(())
    }

    /// k*k grid (a <= b filled) for measure construction.
    fn as_grid(&self) -> Vec<u64> {
        let mut grid = vec![0u64; self.k * self.k];
        for (idx, &(a, b)) in class_list(self.k).iter().enumerate() {
            grid[a * self.k + b] = self.counts[idx];
        }
        grid
    }
}

/// The pair measure induced by a (colour counts, edge counts) statistic,
/// through the same rounding path as the empirical measure of a graph.
pub fn config_to_pair_measure(
    type_counts: &[u64],
    config: &EdgeCountConfig,
    schedule: &ConnectionSchedule,
) -> Result<PairMeasure> {
    config.validate_against(type_counts)?;
    let n: u64 = type_counts.iter().sum();
    measure_from_class_counts(n, config.k(), &config.as_grid(), schedule)
}

/// Number of coloured graphs with exactly these colour counts and per-class
/// edge counts: colour arrangements times independent pair choices per
/// class. Exact big-integer arithmetic.
pub fn count_graphs(type_counts: &[u64], config: &EdgeCountConfig) -> Result<BigUint> {
    config.validate_against(type_counts)?;
    let mut total = big_multinomial(type_counts);
    for (idx, &(a, b)) in class_list(config.k()).iter().enumerate() {
        total *= big_choose(pair_budget(type_counts, a, b), config.counts()[idx]);
    }
    Ok(total)
}

/// log count_graphs through log-gamma, bypassing big integers.
pub fn count_graphs_log_gamma(type_counts: &[u64], config: &EdgeCountConfig) -> Result<f64> {
    config.validate_against(type_counts)?;
    let mut total = ln_multinomial(type_counts);
    for (idx, &(a, b)) in class_list(config.k()).iter().enumerate() {
        total += ln_choose(pair_budget(type_counts, a, b), config.counts()[idx]);
    }
    Ok(total)
}

/// log count_graphs: exact big-integer path up to n = 40, log-gamma beyond.
/// The two paths agree to 1e-10 relative on the overlap band.
pub fn count_graphs_log(type_counts: &[u64], config: &EdgeCountConfig) -> Result<f64> {
    let n: u64 = type_counts.iter().sum();
    if n <= 40 {
        Ok(big_ln(&count_graphs(type_counts, config)?))
    } else {
        count_graphs_log_gamma(type_counts, config)
    }
}

/// Log weight of a colour-count vector under iid colours: the multinomial
/// coefficient times the law raised to the counts.
fn colour_log_weight(type_counts: &[u64], law: &TypeLaw) -> f64 {
    let mut lp = ln_multinomial(type_counts);
    for (a, &c) in type_counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let mu = law.get(a);
        if mu == 0.0 {
            return f64::NEG_INFINITY;
        }
        lp += c as f64 * mu.ln();
    }
    lp
}

/// Exact log probability of one (colour counts, edge counts) statistic.
/// Conditional mode drops the colour term and treats the counts as given.
pub fn config_log_probability(
    type_counts: &[u64],
    config: &EdgeCountConfig,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    conditional: bool,
) -> Result<f64> {
    config.validate_against(type_counts)?;
    let n: u64 = type_counts.iter().sum();
    let k = config.k();
    let probs = connection_probs(kernel, schedule, n)?;
    let mut lp = if conditional {
        0.0
    } else {
        colour_log_weight(type_counts, law)
    };
    for (idx, &(a, b)) in class_list(k).iter().enumerate() {
        lp += ln_binom_pmf(
            pair_budget(type_counts, a, b),
            config.counts()[idx],
            probs[a * k + b],
        );
    }
    Ok(lp)
}

/// Per-class data for one colour-count vector: budgets and edge
/// probabilities in class_list order, plus the measure normalizer.
struct Lattice {
    n: u64,
    k: usize,
    classes: Vec<(usize, usize)>,
    budgets: Vec<u64>,
    probs: Vec<f64>,
    scale: f64,
    schedule: ConnectionSchedule,
}

fn lattice_for(
    type_counts: &[u64],
    kernel: &Kernel,
    schedule: &ConnectionSchedule,
) -> Result<Lattice> {
    let k = kernel.k();
    if type_counts.len() != k {
        return Err(Error::Dimension {
            what: "type counts",
            expected: k,
            got: type_counts.len(),
        });
    }
    let n: u64 = type_counts.iter().sum();
    let grid = connection_probs(kernel, schedule, n)?;
    let classes = class_list(k);
    let budgets = classes
        .iter()
        .map(|&(a, b)| pair_budget(type_counts, a, b))
        .collect();
    let probs = classes.iter().map(|&(a, b)| grid[a * k + b]).collect();
    Ok(Lattice {
        n,
        k,
        classes,
        budgets,
        probs,
        scale: pair_scale(n, schedule)?,
        schedule: schedule.clone(),
    })
}

impl Lattice {
    /// Shared membership test for a full per-class edge vector. Uses the
    /// original schedule so the measure is bit-identical to the empirical
    /// measure of a sampled graph with the same statistic.
    fn member(&self, e: &[u64], event: &Event) -> bool {
        let mut grid = vec![0u64; self.k * self.k];
        for (idx, &(a, b)) in self.classes.iter().enumerate() {
            grid[a * self.k + b] = e[idx];
        }
        let m = measure_from_class_counts(self.n, self.k, &grid, &self.schedule)
            .expect("schedule already validated for this n");
        event_membership(event, &m)
    }

    /// The cell value a class produces at edge count e, identical in floats
    /// to the corresponding entry of the empirical pair measure.
    fn cell_value(&self, class: usize, e: u64) -> f64 {
        let (a, b) = self.classes[class];
        if a == b {
            (2.0 * e as f64) / self.scale
        } else {
            (e as f64) / self.scale
        }
    }
}

/// Integer solutions of |cell(e) - center| <= radius for one class, under
/// the exact double predicate. Approximate real bounds are refined by
/// scanning a few lattice points, so boundary counts resolve exactly as the
/// Monte Carlo membership test would resolve them.
fn ball_class_interval(
    lat: &Lattice,
    class: usize,
    center: f64,
    radius: f64,
) -> Option<(u64, u64)> {
    let n_max = lat.budgets[class];
    if radius == f64::INFINITY {
        return Some((0, n_max));
    }
    let (a, b) = lat.classes[class];
    let factor = if a == b { 2.0 } else { 1.0 };
    let ok = |e: u64| (lat.cell_value(class, e) - center).abs() <= radius;

    let to_count = |x: f64| x.clamp(0.0, n_max as f64) as u64;
    let approx_lo = to_count(((center - radius) * lat.scale / factor).ceil());
    let approx_hi = to_count(((center + radius) * lat.scale / factor).floor());

    let lo_start = approx_lo.saturating_sub(4);
    let lo = (lo_start..=(approx_lo + 4).min(n_max)).find(|&e| ok(e))?;
    let hi_end = (approx_hi + 4).min(n_max);
    let hi = (approx_hi.saturating_sub(4)..=hi_end).rev().find(|&e| ok(e))?;
    if hi < lo {
        return None;
    }
    Some((lo, hi))
}

/// All class intervals of a ball, or None when some class admits no count.
fn ball_intervals(lat: &Lattice, center: &PairMeasure, radius: f64) -> Option<Vec<(u64, u64)>> {
    (0..lat.classes.len())
        .map(|c| {
            let (a, b) = lat.classes[c];
            ball_class_interval(lat, c, center.get(a, b), radius)
        })
        .collect()
}

/// log P(ball | colours): the class counts are independent, so the ball
/// probability is the product of per-class binomial interval sums.
fn ball_conditional_lp(lat: &Lattice, center: &PairMeasure, radius: f64) -> f64 {
    let Some(intervals) = ball_intervals(lat, center, radius) else {
        return f64::NEG_INFINITY;
    };
    let mut total = 0.0;
    for (c, &(lo, hi)) in intervals.iter().enumerate() {
        let mut acc = LogSumExp::new();
        for e in lo..=hi {
            acc.add(ln_binom_pmf(lat.budgets[c], e, lat.probs[c]));
        }
        total += acc.value();
    }
    total
}

/// Mode of Binomial(n, p) tilted so the success odds are multiplied by
/// e^{theta * w}.
fn tilted_mode(n_max: u64, p: f64, theta_w: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n_max;
    }
    let log_odds = (p / (1.0 - p)).ln() + theta_w;
    // q' = odds'/(1+odds') evaluated stably on both sides.
    let q = if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let o = log_odds.exp();
        o / (1.0 + o)
    };
    (((n_max + 1) as f64 * q).floor() as u64).min(n_max)
}

/// Contiguous window of counts whose log-pmf stays within slack of the
/// smaller anchor value. Both anchors end up inside the window.
fn window_around(lp: &[f64], anchor1: u64, anchor2: u64, slack: f64) -> (u64, u64) {
    let threshold = lp[anchor1 as usize].min(lp[anchor2 as usize]) - slack;
    let mut lo = anchor1.min(anchor2);
    let mut hi = anchor1.max(anchor2);
    while lo > 0 && lp[lo as usize - 1] >= threshold {
        lo -= 1;
    }
    while (hi as usize) < lp.len() - 1 && lp[hi as usize + 1] >= threshold {
        hi += 1;
    }
    (lo, hi)
}

/// log P(half-space | colours). The membership indicator is monotone in any
/// single class count with a nonzero direction entry, so the widest class is
/// closed in one shot via cumulative sums at the threshold located by binary
/// search on the exact membership predicate; the remaining classes are
/// enumerated over windows that provably carry all but a relatively
/// negligible (< 1e-20) share of the event mass. Windows are anchored both
/// at the unconstrained binomial modes and at a tilted feasible optimum, so
/// deep-tail events stay covered.
fn halfspace_conditional_lp(
    lat: &Lattice,
    event: &Event,
    direction_by_class: &[f64],
    level: f64,
    budget: f64,
) -> Result<f64> {
    let nclasses = lat.classes.len();
    let budgets = &lat.budgets;
    let probs = &lat.probs;

    // Linear form in the counts: <g, measure(e)> = sum_c (2 g_c / scale) e_c.
    // Feasibility screen uses a safety margin and defers near-boundary cases
    // to the exact enumeration below.
    let weights: Vec<f64> = direction_by_class
        .iter()
        .map(|g| 2.0 * g / lat.scale)
        .collect();
    let margin = 1e-9 * (1.0 + level.abs());
    let max_dot: f64 = (0..nclasses)
        .map(|c| if weights[c] > 0.0 { weights[c] * budgets[c] as f64 } else { 0.0 })
        .sum();
    let min_dot: f64 = (0..nclasses)
        .map(|c| if weights[c] < 0.0 { weights[c] * budgets[c] as f64 } else { 0.0 })
        .sum();
    if max_dot <= level - margin {
        return Ok(f64::NEG_INFINITY);
    }
    if min_dot > level + margin {
        return Ok(0.0);
    }

    let lp: Vec<Vec<f64>> = (0..nclasses)
        .map(|c| {
            (0..=budgets[c])
                .map(|e| ln_binom_pmf(budgets[c], e, probs[c]))
                .collect()
        })
        .collect();

    let modes: Vec<u64> = (0..nclasses)
        .map(|c| tilted_mode(budgets[c], probs[c], 0.0))
        .collect();
    let dot =
        |e: &[u64]| -> f64 { e.iter().zip(&weights).map(|(&x, w)| x as f64 * w).sum() };

    // Tilted anchor: smallest exponential tilt along the direction whose
    // per-class modes reach the half-space.
    let anchor = if dot(&modes) > level {
        modes.clone()
    } else {
        let modes_at = |theta: f64| -> Vec<u64> {
            (0..nclasses)
                .map(|c| tilted_mode(budgets[c], probs[c], theta * weights[c]))
                .collect()
        };
        let mut hi = 1.0f64;
        let mut tries = 0;
        while dot(&modes_at(hi)) <= level && tries < 60 {
            hi *= 2.0;
            tries += 1;
        }
        let mut lo = 0.0f64;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if dot(&modes_at(mid)) > level {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        modes_at(hi)
    };

    let windows: Vec<(u64, u64)> = (0..nclasses)
        .map(|c| {
            let slack = 60.0 + ((budgets[c] + 1) as f64).ln();
            window_around(&lp[c], modes[c], anchor[c], slack)
        })
        .collect();

    // Close the widest window by cumulative sums; enumerate the rest.
    let widest = (0..nclasses)
        .max_by_key(|&c| windows[c].1 - windows[c].0)
        .expect("at least one class");
    let enumerated: Vec<usize> = (0..nclasses).filter(|&c| c != widest).collect();

    let combos: f64 = enumerated
        .iter()
        .map(|&c| (windows[c].1 - windows[c].0 + 1) as f64)
        .product();
    if combos > budget {
        return Err(Error::BudgetExceeded {
            required: combos,
            budget,
        });
    }

    // prefix[i] = log sum of pmf over [0, i]; suffix[i] over [i, N].
    let n_w = budgets[widest] as usize;
    let mut prefix = vec![0.0f64; n_w + 1];
    let mut acc = LogSumExp::new();
    for e in 0..=n_w {
        acc.add(lp[widest][e]);
        prefix[e] = acc.value();
    }
    let mut suffix = vec![0.0f64; n_w + 1];
    let mut acc = LogSumExp::new();
    for e in (0..=n_w).rev() {
        acc.add(lp[widest][e]);
        suffix[e] = acc.value();
    }

    let g_w = direction_by_class[widest];
    let solve_combo = |fixed: &[u64]| -> f64 {
        // fixed is indexed like `enumerated`.
        let mut evec = vec![0u64; nclasses];
        for (slot, &c) in enumerated.iter().enumerate() {
            evec[c] = fixed[slot];
        }
        let base: f64 = enumerated
            .iter()
            .enumerate()
            .map(|(slot, &c)| lp[c][fixed[slot] as usize])
            .sum();
        if base == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let member_at = |ew: u64| -> bool {
            let mut e = evec.clone();
            e[widest] = ew;
            lat.member(&e, event)
        };
        let n_max = budgets[widest];
        if g_w == 0.0 {
            // Membership does not depend on the widest class; its pmf sums
            // out to (log) suffix[0].
            return if member_at(0) { base + suffix[0] } else { f64::NEG_INFINITY };
        }
        if g_w > 0.0 {
            // Member iff ew >= t for the threshold t located below.
            if !member_at(n_max) {
                return f64::NEG_INFINITY;
            }
            let mut lo = 0u64;
            let mut hi = n_max;
            if member_at(0) {
                hi = 0;
            }
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if member_at(mid) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            // Guard the cut against sub-ulp non-monotonicity at the boundary.
            let mut t = hi;
            while t > 0 && member_at(t - 1) {
                t -= 1;
            }
            base + suffix[t as usize]
        } else {
            // Member iff ew <= t.
            if !member_at(0) {
                return f64::NEG_INFINITY;
            }
            let mut lo = 0u64;
            let mut hi = n_max;
            if member_at(n_max) {
                lo = n_max;
            }
            while lo < hi {
                let mid = lo + (hi - lo).div_ceil(2);
                if member_at(mid) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            let mut t = lo;
            while t < n_max && member_at(t + 1) {
                t += 1;
            }
            base + prefix[t as usize]
        }
    };

    let total = if enumerated.is_empty() {
        let mut acc = LogSumExp::new();
        acc.add(solve_combo(&[]));
        acc
    } else {
        // Parallelize over the first enumerated class; partials merge in
        // window order, so the result is worker-count independent.
        let first = enumerated[0];
        let rest: Vec<usize> = enumerated[1..].to_vec();
        let partials: Vec<LogSumExp> = (windows[first].0..=windows[first].1)
            .into_par_iter()
            .map(|e0| {
                let mut acc = LogSumExp::new();
                let mut fixed = vec![e0];
                fixed.extend(rest.iter().map(|&c| windows[c].0));
                loop {
                    acc.add(solve_combo(&fixed));
                    // Odometer over the remaining windows.
                    let mut slot = fixed.len();
                    loop {
                        if slot == 1 {
                            return acc;
                        }
                        slot -= 1;
                        let c = enumerated[slot];
                        if fixed[slot] < windows[c].1 {
                            fixed[slot] += 1;
                            for later in slot + 1..fixed.len() {
                                fixed[later] = windows[enumerated[later]].0;
                            }
                            break;
                        }
                        fixed[slot] = windows[c].0;
                    }
                }
            })
            .collect();
        let mut acc = LogSumExp::new();
        for p in &partials {
            acc.merge(p);
        }
        acc
    };
    // Guard against accumulation pushing a probability-one event above 0.
    Ok(total.value().min(0.0))
}

/// log P(predicate event | colours) by full lattice enumeration.
fn predicate_conditional_lp(lat: &Lattice, event: &Event, budget: f64) -> Result<f64> {
    let size: f64 = lat.budgets.iter().map(|&n| (n + 1) as f64).product();
    if size > budget {
        return Err(Error::BudgetExceeded {
            required: size,
            budget,
        });
    }
    let nclasses = lat.classes.len();
    let mut evec = vec![0u64; nclasses];
    let mut acc = LogSumExp::new();
    loop {
        if lat.member(&evec, event) {
            let lp: f64 = (0..nclasses)
                .map(|c| ln_binom_pmf(lat.budgets[c], evec[c], lat.probs[c]))
                .sum();
            acc.add(lp);
        }
        let mut slot = nclasses;
        loop {
            if slot == 0 {
                return Ok(acc.value().min(0.0));
            }
            slot -= 1;
            if evec[slot] < lat.budgets[slot] {
                evec[slot] += 1;
                evec[slot + 1..].iter_mut().for_each(|e| *e = 0);
                break;
            }
        }
    }
}

fn conditional_event_lp(lat: &Lattice, event: &Event, budget: f64) -> Result<f64> {
    match event {
        Event::Ball { center, radius } => {
            if center.k() != lat.k {
                return Err(Error::Dimension {
                    what: "ball center",
                    expected: lat.k,
                    got: center.k(),
                });
            }
            Ok(ball_conditional_lp(lat, center, *radius))
        }
        Event::HalfSpace { direction, level } => {
            if direction.k() != lat.k {
                return Err(Error::Dimension {
                    what: "half-space direction",
                    expected: lat.k,
                    got: direction.k(),
                });
            }
            let by_class: Vec<f64> = lat
                .classes
                .iter()
                .map(|&(a, b)| direction.get(a, b))
                .collect();
            halfspace_conditional_lp(lat, event, &by_class, *level, budget)
        }
        Event::Predicate(_) => predicate_conditional_lp(lat, event, budget),
    }
}

/// All colour-count vectors summing to n.
fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    fn rec(remaining: u64, slots: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=remaining {
            prefix.push(c);
            rec(remaining - c, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

/// Exact log probability that the empirical pair measure lands in the
/// event. Conditional mode fixes the colour counts to the largest-remainder
/// rounding of n * law; unconditional mode sums over every colour count
/// vector weighted by its multinomial probability.
pub fn event_log_probability(
    n: u64,
    event: &Event,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    conditional: bool,
) -> Result<f64> {
    event_log_probability_with_budget(
        n,
        event,
        kernel,
        law,
        schedule,
        conditional,
        DEFAULT_ENUMERATION_BUDGET,
    )
}

pub fn event_log_probability_with_budget(
    n: u64,
    event: &Event,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    conditional: bool,
    budget: f64,
) -> Result<f64> {
    assert_eq!(kernel.k(), law.k(), "kernel and law disagree on k");
    if conditional {
        let counts = type_counts_for(law, n);
        let lat = lattice_for(&counts, kernel, schedule)?;
        return conditional_event_lp(&lat, event, budget);
    }
    let mut total = LogSumExp::new();
    let mut spent = 0.0f64;
    for counts in compositions(n, law.k()) {
        let colour_lp = colour_log_weight(&counts, law);
        if colour_lp == f64::NEG_INFINITY {
            continue;
        }
        let lat = lattice_for(&counts, kernel, schedule)?;
        let size: f64 = lat.budgets.iter().map(|&b| (b + 1) as f64).product();
        spent += size.min(budget);
        if spent > budget {
            return Err(Error::BudgetExceeded {
                required: spent,
                budget,
            });
        }
        total.add(colour_lp + conditional_event_lp(&lat, event, budget)?);
    }
    Ok(total.value().min(0.0))
}

/// Exact decay rates -log P / n along a sequence of sizes, with the
/// polynomial extrapolation of the rates to n = infinity in the 1/n
/// variable. The extrapolation is reported only when every rate is finite.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub n: u64,
    pub log_probability: f64,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct RateSequence {
    pub points: Vec<RatePoint>,
    pub extrapolated: Option<f64>,
}

pub fn rate_sequence(
    ns: &[u64],
    mut event_for: impl FnMut(u64) -> Event,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
    conditional: bool,
) -> Result<RateSequence> {
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let event = event_for(n);
        let lp = event_log_probability(n, &event, kernel, law, schedule, conditional)?;
        points.push(RatePoint {
            n,
            log_probability: lp,
            rate: -lp / n as f64,
        });
    }
    let extrapolated = if points.len() >= 2 && points.iter().all(|p| p.rate.is_finite()) {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (1.0 / p.n as f64, p.rate)).collect();
        Some(neville_at_zero(&pts))
    } else {
        None
    };
    Ok(RateSequence {
        points,
        extrapolated,
    })
}

/// Infimum of the Kullback action over an event, for comparison against
/// measured decay rates. Balls minimize cell by cell on a grid that always
/// includes the interval endpoints and the analytic stationary point, so the
/// mesh only adds redundancy. Half-spaces walk the exponential family
/// m e^{theta g} to the boundary by bisection.
pub fn event_rate_infimum(
    event: &Event,
    kernel: &Kernel,
    law: &TypeLaw,
    mesh: usize,
) -> Result<f64> {
    let m = product_measure(kernel, law);
    match event {
        Event::Ball { center, radius } => {
            let mut total = KahanAccumulator::default();
            for (a, b, c) in center.iter() {
                let mv = m.get(a, b);
                let lo = (c - radius).max(0.0);
                let hi = c + radius;
                let cell = |x: f64| -> f64 {
                    if x == 0.0 {
                        mv
                    } else if mv == 0.0 {
                        f64::INFINITY
                    } else {
                        x * (x / mv).ln() - x + mv
                    }
                };
                let mut best = cell(mv.clamp(lo, hi));
                for i in 0..=mesh + 1 {
                    let x = lo + (hi - lo) * i as f64 / (mesh + 1) as f64;
                    best = best.min(cell(x));
                }
                if best == f64::INFINITY {
                    return Ok(f64::INFINITY);
                }
                total.add(best);
            }
            Ok((0.5 * total.value()).max(0.0))
        }
        Event::HalfSpace { direction, level } => {
            let dot_at = |theta: f64| -> f64 {
                direction
                    .iter()
                    .map(|(a, b, g)| g * m.get(a, b) * (theta * g).exp())
                    .sum()
            };
            if dot_at(0.0) >= *level {
                return Ok(0.0);
            }
            let climbs = direction
                .iter()
                .any(|(a, b, g)| g > 0.0 && m.get(a, b) > 0.0);
            if !climbs {
                return Ok(f64::INFINITY);
            }
            let mut hi = 1.0f64;
            let mut tries = 0;
            while dot_at(hi) < *level {
                hi *= 2.0;
                tries += 1;
                if tries > 200 {
                    return Ok(f64::INFINITY);
                }
            }
            let mut lo = 0.0f64;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if dot_at(mid) >= *level {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let theta = hi;
            let k = m.k();
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|a| {
                    (0..k)
                        .map(|b| m.get(a, b) * (theta * direction.get(a, b)).exp())
                        .collect()
                })
                .collect();
            let tilted = PairMeasure::from_rows(&rows).expect("tilt of symmetric grid");
            Ok(kullback_action(&tilted, kernel, law))
        }
        Event::Predicate(_) => Err(Error::Invalid(
            "rate infimum needs a ball or half-space event".into(),
        )),
    }
}

/// Ground-truth distribution from brute force: every colouring and every
/// edge set visited once. Entries are keyed by (colour counts, per-class
/// edge counts in class_list order).
#[derive(Debug, Clone)]
pub struct NaiveDistribution {
    pub n: u64,
    pub k: usize,
    pub entries: std::collections::BTreeMap<(Vec<u64>, Vec<u64>), NaiveEntry>,
    pub total_graphs: u64,
    pub total_probability: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NaiveEntry {
    pub graphs: u64,
    pub probability: f64,
}

impl NaiveDistribution {
    /// Unconditional log probability of an event, by direct summation.
    pub fn log_probability_of(&self, event: &Event, schedule: &ConnectionSchedule) -> Result<f64> {
        let mut acc = KahanAccumulator::default();
        for ((_, config), entry) in &self.entries {
            let mut grid = vec![0u64; self.k * self.k];
            for (idx, &(a, b)) in class_list(self.k).iter().enumerate() {
                grid[a * self.k + b] = config[idx];
            }
            let m = measure_from_class_counts(self.n, self.k, &grid, schedule)?;
            if event_membership(event, &m) {
                acc.add(entry.probability);
            }
        }
        let p = acc.value();
        Ok(if p <= 0.0 { f64::NEG_INFINITY } else { p.ln() })
    }

    /// Number of graphs across entries whose measure lands in the event.
    pub fn count_in_event(&self, event: &Event, schedule: &ConnectionSchedule) -> Result<u64> {
        let mut total = 0u64;
        for ((_, config), entry) in &self.entries {
            let mut grid = vec![0u64; self.k * self.k];
            for (idx, &(a, b)) in class_list(self.k).iter().enumerate() {
                grid[a * self.k + b] = config[idx];
            }
            let m = measure_from_class_counts(self.n, self.k, &grid, schedule)?;
            if event_membership(event, &m) {
                total += entry.graphs;
            }
        }
        Ok(total)
    }
}

/// Visits all k^n colourings times 2^C(n,2) edge sets. The per-mask class
/// tallies are built incrementally from the parent mask (mask without its
/// lowest bit), so each visit is O(number of classes).
pub fn naive_enumerate(
    n: u64,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
) -> Result<NaiveDistribution> {
    assert_eq!(kernel.k(), law.k(), "kernel and law disagree on k");
    let k = kernel.k();
    let pairs: Vec<(usize, usize)> = (0..n as usize)
        .flat_map(|u| ((u + 1)..n as usize).map(move |v| (u, v)))
        .collect();
    let n_pairs = pairs.len();
    let visits = (k as f64).powi(n as i32) * (n_pairs as f64).exp2();
    if visits > NAIVE_BUDGET {
        return Err(Error::BudgetExceeded {
            required: visits,
            budget: NAIVE_BUDGET,
        });
    }
    let probs = connection_probs(kernel, schedule, n)?;
    let classes = class_list(k);
    let nclasses = classes.len();
    let n_masks = 1usize << n_pairs;

    let mut entries: std::collections::BTreeMap<(Vec<u64>, Vec<u64>), (u64, KahanAccumulator)> =
        Default::default();
    let mut colouring = vec![0usize; n as usize];
    let mut mask_counts = vec![0u8; n_masks * nclasses];
    let mut total_graphs = 0u64;
    let mut total_prob = KahanAccumulator::default();

    loop {
        let mut counts = vec![0u64; k];
        for &c in &colouring {
            counts[c] += 1;
        }
        let colour_prob: f64 = colouring.iter().map(|&c| law.get(c)).product();

        // Class of each node pair under this colouring, and the pairs every
        // class must contain because its connection probability is 1.
        let pair_class: Vec<usize> = pairs
            .iter()
            .map(|&(u, v)| class_index(k, colouring[u], colouring[v]))
            .collect();
        let mut required_mask = 0usize;
        let mut log_base = 0.0f64;
        let mut step = vec![0.0f64; n_pairs];
        for (i, &(u, v)) in pairs.iter().enumerate() {
            let p = probs[colouring[u] * k + colouring[v]];
            if p >= 1.0 {
                required_mask |= 1 << i;
            } else if p <= 0.0 {
                step[i] = f64::NEG_INFINITY;
            } else {
                log_base += (-p).ln_1p();
                step[i] = p.ln() - (-p).ln_1p();
            }
        }

        let mut mask_lp = vec![0.0f64; n_masks];
        mask_lp[0] = log_base;
        for mask in 1..n_masks {
            let lsb = mask.trailing_zeros() as usize;
            let parent = mask & (mask - 1);
            mask_lp[mask] = mask_lp[parent] + step[lsb];
            let (dst, src) = mask_counts.split_at_mut(mask * nclasses);
            let src_row = &dst[parent * nclasses..parent * nclasses + nclasses];
            src[..nclasses].copy_from_slice(src_row);
            src[pair_class[lsb]] += 1;
        }

        for mask in 0..n_masks {
            let config: Vec<u64> = mask_counts[mask * nclasses..(mask + 1) * nclasses]
                .iter()
                .map(|&c| c as u64)
                .collect();
            let prob = if mask & required_mask == required_mask {
                colour_prob * mask_lp[mask].exp()
            } else {
                0.0
            };
            let entry = entries
                .entry((counts.clone(), config))
                .or_insert_with(|| (0, KahanAccumulator::default()));
            entry.0 += 1;
            entry.1.add(prob);
            total_graphs += 1;
            total_prob.add(prob);
        }

        // Next colouring in base-k counter order.
        let mut pos = 0;
        loop {
            if pos == colouring.len() {
                let entries = entries
                    .into_iter()
                    .map(|(key, (graphs, acc))| {
                        (
                            key,
                            NaiveEntry {
                                graphs,
                                probability: acc.value(),
                            },
                        )
                    })
                    .collect();
                return Ok(NaiveDistribution {
                    n,
                    k,
                    entries,
                    total_graphs,
                    total_probability: total_prob.value(),
                });
            }
            colouring[pos] += 1;
            if colouring[pos] < k {
                break;
            }
            colouring[pos] = 0;
            pos += 1;
        }
    }
}

/// Exact count of coloured graphs whose pair measure lies in a ball, next
/// to the entropy scaling n * h(center). The two are reported side by side
/// with their gap; no equality is asserted between them.
#[derive(Debug, Clone)]
pub struct McMillanReport {
    pub n: u64,
    pub log_card: f64,
    pub entropy_term: f64,
    pub gap: f64,
}

pub fn mcmillan_count_report(
    n: u64,
    event: &Event,
    kernel: &Kernel,
    law: &TypeLaw,
    schedule: &ConnectionSchedule,
) -> Result<McMillanReport> {
    let Event::Ball { center, radius } = event else {
        return Err(Error::Invalid(
            "the count report is defined for ball events".into(),
        ));
    };
    let k = kernel.k();
    if center.k() != k {
        return Err(Error::Dimension {
            what: "ball center",
            expected: k,
            got: center.k(),
        });
    }

    let log_card = if n <= 40 {
        // Exact integer count, logged at the end.
        let mut card = BigUint::zero();
        for counts in compositions(n, k) {
            let lat = lattice_for(&counts, kernel, schedule)?;
            let Some(intervals) = ball_intervals(&lat, center, *radius) else {
                continue;
            };
            let mut per_counts = big_multinomial(&counts);
            for (c, &(lo, hi)) in intervals.iter().enumerate() {
                let mut sum = BigUint::zero();
                for e in lo..=hi {
                    sum += big_choose(lat.budgets[c], e);
                }
                per_counts *= sum;
            }
            card += per_counts;
        }
        big_ln(&card)
    } else {
        let mut acc = LogSumExp::new();
        for counts in compositions(n, k) {
            let lat = lattice_for(&counts, kernel, schedule)?;
            let Some(intervals) = ball_intervals(&lat, center, *radius) else {
                continue;
            };
            let mut term = ln_multinomial(&counts);
            for (c, &(lo, hi)) in intervals.iter().enumerate() {
                let mut class_sum = LogSumExp::new();
                for e in lo..=hi {
                    class_sum.add(ln_choose(lat.budgets[c], e));
                }
                term += class_sum.value();
            }
            acc.add(term);
        }
        acc.value()
    };

    let entropy_term = n as f64 * mcmillan_entropy(center, kernel, law);
    Ok(McMillanReport {
        n,
        log_card,
        entropy_term,
        gap: log_card - entropy_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::TestFunction;

    fn half_half() -> TypeLaw {
        TypeLaw::new(vec![0.5, 0.5]).unwrap()
    }

    fn unit_kernel() -> Kernel {
        Kernel::constant(2, 1.0).unwrap()
    }

    fn near() -> ConnectionSchedule {
        ConnectionSchedule::NearCritical
    }

    fn everything(k: usize) -> Event {
        Event::Ball {
            center: PairMeasure::constant(k, 0.0).unwrap(),
            radius: f64::INFINITY,
        }
    }

    #[test]
    fn class_indexing_round_trips() {
        for k in 1..=5 {
            let classes = class_list(k);
            assert_eq!(classes.len(), class_count(k));
            for (idx, &(a, b)) in classes.iter().enumerate() {
                assert_eq!(class_index(k, a, b), idx);
                assert_eq!(class_index(k, b, a), idx);
            }
        }
    }

    #[test]
    fn pair_budgets_count_available_pairs() {
        let counts = [3u64, 4];
        assert_eq!(pair_budget(&counts, 0, 0), 3);
        assert_eq!(pair_budget(&counts, 1, 1), 6);
        assert_eq!(pair_budget(&counts, 0, 1), 12);
    }

    #[test]
    fn config_validation_enforces_budgets() {
        let cfg = EdgeCountConfig::new(2, vec![3, 12, 6]).unwrap();
        assert!(cfg.validate_against(&[3, 4]).is_ok());
        let too_many = EdgeCountConfig::new(2, vec![4, 0, 0]).unwrap();
        assert!(too_many.validate_against(&[3, 4]).is_err());
        assert!(EdgeCountConfig::new(2, vec![1, 2]).is_err());
    }

    #[test]
    fn config_measure_matches_the_graph_convention() {
        let cfg = EdgeCountConfig::new(2, vec![0, 1, 0]).unwrap();
        let m = config_to_pair_measure(&[1, 1], &cfg, &near()).unwrap();
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.get(1, 0), 0.5);

        let mono = EdgeCountConfig::new(2, vec![1, 0, 0]).unwrap();
        let m = config_to_pair_measure(&[2, 0], &mono, &near()).unwrap();
        assert_eq!(m.get(0, 0), 1.0);

        let zero = EdgeCountConfig::new(2, vec![0, 0, 0]).unwrap();
        let m = config_to_pair_measure(&[1, 1], &zero, &near()).unwrap();
        assert_eq!(m.total_mass(), 0.0);
    }

    #[test]
    fn graph_counts_on_tiny_instances() {
        for e in 0..=1u64 {
            let cfg = EdgeCountConfig::new(1, vec![e]).unwrap();
            assert_eq!(count_graphs(&[2], &cfg).unwrap(), BigUint::from(1u32));
        }
        let total: BigUint = (0..=3u64)
            .map(|e| count_graphs(&[3], &EdgeCountConfig::new(1, vec![e]).unwrap()).unwrap())
            .sum();
        assert_eq!(total, BigUint::from(8u32));

        let forced = EdgeCountConfig::new(2, vec![0, 1, 0]).unwrap();
        assert_eq!(count_graphs(&[1, 1], &forced).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn log_count_paths_agree_on_the_overlap_band() {
        for n0 in [30u64, 34, 40] {
            let counts = [n0 / 2, n0 - n0 / 2];
            let cfg = EdgeCountConfig::new(2, vec![3, 7, 2]).unwrap();
            let exact = big_ln(&count_graphs(&counts, &cfg).unwrap());
            let gamma = count_graphs_log_gamma(&counts, &cfg).unwrap();
            assert!((exact - gamma).abs() <= 1e-10 * exact.abs());
            let switching = count_graphs_log(&counts, &cfg).unwrap();
            assert_eq!(switching, exact);
        }
    }

    #[test]
    fn single_bernoulli_probability() {
        let cfg = EdgeCountConfig::new(2, vec![0, 1, 0]).unwrap();
        let lp = config_log_probability(&[1, 1], &cfg, &unit_kernel(), &half_half(), &near(), true)
            .unwrap();
        assert!((lp - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn conditional_config_probabilities_sum_to_one() {
        let counts = [3u64, 2];
        let kernel = Kernel::from_rows(&[vec![1.2, 0.7], vec![0.7, 2.0]]).unwrap();
        let mut acc = LogSumExp::new();
        for e00 in 0..=pair_budget(&counts, 0, 0) {
            for e01 in 0..=pair_budget(&counts, 0, 1) {
                for e11 in 0..=pair_budget(&counts, 1, 1) {
                    let cfg = EdgeCountConfig::new(2, vec![e00, e01, e11]).unwrap();
                    acc.add(
                        config_log_probability(
                            &counts,
                            &cfg,
                            &kernel,
                            &half_half(),
                            &near(),
                            true,
                        )
                        .unwrap(),
                    );
                }
            }
        }
        assert!(acc.value().abs() < 1e-12);
    }

    #[test]
    fn unconditional_probabilities_sum_to_one_over_counts() {
        let n = 4u64;
        let mut acc = LogSumExp::new();
        for counts in compositions(n, 2) {
            for e00 in 0..=pair_budget(&counts, 0, 0) {
                for e01 in 0..=pair_budget(&counts, 0, 1) {
                    for e11 in 0..=pair_budget(&counts, 1, 1) {
                        let cfg = EdgeCountConfig::new(2, vec![e00, e01, e11]).unwrap();
                        acc.add(
                            config_log_probability(
                                &counts,
                                &cfg,
                                &unit_kernel(),
                                &half_half(),
                                &near(),
                                false,
                            )
                            .unwrap(),
                        );
                    }
                }
            }
        }
        assert!(acc.value().abs() < 1e-12);
    }

    #[test]
    fn saturated_class_has_probability_one() {
        // kernel 3 at n=2: p = min(1.5, 1) = 1, so e = N is certain.
        let kernel = Kernel::constant(1, 3.0).unwrap();
        let law = TypeLaw::uniform(1);
        let cfg = EdgeCountConfig::new(1, vec![1]).unwrap();
        let lp = config_log_probability(&[2], &cfg, &kernel, &law, &near(), true).unwrap();
        assert_eq!(lp, 0.0);
    }

    #[test]
    fn whole_space_has_probability_one() {
        for conditional in [true, false] {
            let lp = event_log_probability(
                5,
                &everything(2),
                &unit_kernel(),
                &half_half(),
                &near(),
                conditional,
            )
            .unwrap();
            assert!(lp.abs() < 1e-12, "conditional {conditional}: lp {lp}");
        }
    }

    #[test]
    fn ball_oracle_matches_direct_summation_on_a_small_lattice() {
        let n = 8u64;
        let counts = [4u64, 4];
        let center = PairMeasure::from_rows(&[vec![0.3, 0.2], vec![0.2, 0.35]]).unwrap();
        let event = Event::Ball {
            center: center.clone(),
            radius: 0.22,
        };
        let fast =
            event_log_probability(n, &event, &unit_kernel(), &half_half(), &near(), true).unwrap();

        let mut acc = LogSumExp::new();
        for e00 in 0..=pair_budget(&counts, 0, 0) {
            for e01 in 0..=pair_budget(&counts, 0, 1) {
                for e11 in 0..=pair_budget(&counts, 1, 1) {
                    let cfg = EdgeCountConfig::new(2, vec![e00, e01, e11]).unwrap();
                    let m = config_to_pair_measure(&counts, &cfg, &near()).unwrap();
                    if event_membership(&event, &m) {
                        acc.add(
                            config_log_probability(
                                &counts,
                                &cfg,
                                &unit_kernel(),
                                &half_half(),
                                &near(),
                                true,
                            )
                            .unwrap(),
                        );
                    }
                }
            }
        }
        assert!((fast - acc.value()).abs() < 1e-12);
    }

    #[test]
    fn halfspace_oracle_matches_direct_summation_on_a_small_lattice() {
        let n = 8u64;
        let counts = [4u64, 4];
        let g = TestFunction::from_rows(&[vec![1.0, -0.4], vec![-0.4, 0.6]]).unwrap();
        for level in [-0.2, 0.1, 0.45, 0.9] {
            let event = Event::HalfSpace {
                direction: g.clone(),
                level,
            };
            let fast =
                event_log_probability(n, &event, &unit_kernel(), &half_half(), &near(), true)
                    .unwrap();

            let mut acc = LogSumExp::new();
            for e00 in 0..=pair_budget(&counts, 0, 0) {
                for e01 in 0..=pair_budget(&counts, 0, 1) {
                    for e11 in 0..=pair_budget(&counts, 1, 1) {
                        let cfg = EdgeCountConfig::new(2, vec![e00, e01, e11]).unwrap();
                        let m = config_to_pair_measure(&counts, &cfg, &near()).unwrap();
                        if event_membership(&event, &m) {
                            acc.add(
                                config_log_probability(
                                    &counts,
                                    &cfg,
                                    &unit_kernel(),
                                    &half_half(),
                                    &near(),
                                    true,
                                )
                                .unwrap(),
                            );
                        }
                    }
                }
            }
            let direct = acc.value();
            let tol = 1e-11 * (1.0 + direct.abs());
            assert!(
                (fast - direct).abs() < tol,
                "level {level}: fast {fast} direct {direct}"
            );
        }
    }

    #[test]
    fn predicate_oracle_agrees_with_ball_oracle() {
        let center = PairMeasure::from_rows(&[vec![0.3, 0.2], vec![0.2, 0.35]]).unwrap();
        let ball = Event::Ball {
            center: center.clone(),
            radius: 0.2,
        };
        let center2 = center.clone();
        let pred = Event::Predicate(std::sync::Arc::new(move |w: &PairMeasure| {
            let mut dist = 0.0f64;
            for (a, b, c) in center2.iter() {
                dist = dist.max((w.get(a, b) - c).abs());
            }
            dist <= 0.2
        }));
        let a = event_log_probability(6, &ball, &unit_kernel(), &half_half(), &near(), true)
            .unwrap();
        let b = event_log_probability(6, &pred, &unit_kernel(), &half_half(), &near(), true)
            .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn predicate_budget_is_enforced() {
        let pred = Event::Predicate(std::sync::Arc::new(|_: &PairMeasure| true));
        let err = event_log_probability_with_budget(
            60,
            &pred,
            &unit_kernel(),
            &half_half(),
            &near(),
            true,
            1e4,
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn naive_enumeration_totals_and_cross_checks() {
        let naive = naive_enumerate(3, &unit_kernel(), &half_half(), &near()).unwrap();
        assert_eq!(naive.total_graphs, 64);
        assert!((naive.total_probability - 1.0).abs() < 1e-12);
        for ((counts, config), entry) in &naive.entries {
            let cfg = EdgeCountConfig::new(2, config.clone()).unwrap();
            let exact: u64 = count_graphs(counts, &cfg).unwrap().try_into().unwrap();
            assert_eq!(entry.graphs, exact);
            let lp = config_log_probability(
                counts,
                &cfg,
                &unit_kernel(),
                &half_half(),
                &near(),
                false,
            )
            .unwrap();
            assert!((entry.probability.ln() - lp).abs() < 1e-10);
        }
    }

    #[test]
    fn naive_budget_is_enforced() {
        let err = naive_enumerate(7, &unit_kernel(), &half_half(), &near()).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn rate_sequence_of_the_whole_space_is_flat_zero() {
        let seq = rate_sequence(
            &[4, 6, 8],
            |_| everything(2),
            &unit_kernel(),
            &half_half(),
            &near(),
            true,
        )
        .unwrap();
        for p in &seq.points {
            assert!(p.rate.abs() < 1e-12);
        }
        assert!(seq.extrapolated.unwrap().abs() < 1e-9);
    }

    #[test]
    fn event_probability_is_monotone_in_the_event() {
        let center = PairMeasure::constant(2, 0.375).unwrap();
        let small = Event::Ball {
            center: center.clone(),
            radius: 0.02,
        };
        let large = Event::Ball {
            center,
            radius: 0.05,
        };
        let lp_small =
            event_log_probability(30, &small, &unit_kernel(), &half_half(), &near(), true)
                .unwrap();
        let lp_large =
            event_log_probability(30, &large, &unit_kernel(), &half_half(), &near(), true)
                .unwrap();
        assert!(lp_small <= lp_large);
    }

    #[test]
    fn ball_rate_infimum_has_the_frozen_reference_value() {
        let m = product_measure(&unit_kernel(), &half_half());
        let event = Event::Ball {
            center: m.scaled(1.5).unwrap(),
            radius: 0.02,
        };
        let inf = event_rate_infimum(&event, &unit_kernel(), &half_half(), 1000).unwrap();
        assert!((inf - 0.03896637884535026).abs() < 1e-12);

        let whole = event_rate_infimum(&everything(2), &unit_kernel(), &half_half(), 10).unwrap();
        assert_eq!(whole, 0.0);
    }

    #[test]
    fn halfspace_rate_infimum_walks_to_the_boundary() {
        let g = TestFunction::from_rows(&[vec![1.0, -0.4], vec![-0.4, 0.6]]).unwrap();
        let event = Event::HalfSpace {
            direction: g.clone(),
            level: 0.580576,
        };
        let inf = event_rate_infimum(&event, &unit_kernel(), &half_half(), 0).unwrap();
        assert!((inf - 0.072291).abs() < 5e-6);

        let easy = Event::HalfSpace {
            direction: g,
            level: -10.0,
        };
        assert_eq!(
            event_rate_infimum(&easy, &unit_kernel(), &half_half(), 0).unwrap(),
            0.0
        );
    }

    #[test]
    fn count_report_covers_the_whole_space_exactly() {
        let n = 5u64;
        let report =
            mcmillan_count_report(n, &everything(2), &unit_kernel(), &half_half(), &near())
                .unwrap();
        let expect = (n as f64) * 2.0f64.ln() + 10.0 * 2.0f64.ln();
        assert!((report.log_card - expect).abs() < 1e-12);
        assert!((report.gap - (report.log_card - report.entropy_term)).abs() < 1e-15);
    }

    #[test]
    fn count_report_matches_naive_enumeration_at_tiny_n() {
        let center = PairMeasure::constant(2, 0.3).unwrap();
        let event = Event::Ball {
            center,
            radius: 0.25,
        };
        for n in [4u64, 5, 6] {
            let report =
                mcmillan_count_report(n, &event, &unit_kernel(), &half_half(), &near()).unwrap();
            let naive = naive_enumerate(n, &unit_kernel(), &half_half(), &near()).unwrap();
            let brute = naive.count_in_event(&event, &near()).unwrap();
            assert_eq!(report.log_card, (brute as f64).ln());
        }
    }
}
