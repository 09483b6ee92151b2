//! The coloured random graph process: connection schedules, graph sampling
//! (sparse and direct), empirical type and pair measures, the exponentially
//! tilted edge law with its exact importance weights, and measurable events
//! on the space of pair measures.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{inner_product, Kernel, PairMeasure, TestFunction, TypeLaw};

/// Edge-density schedule a(n). Connection probabilities are
/// p_n(a,b) = min(a(n) * kernel(a,b), 1).
#[derive(Debug, Clone, PartialEq)]
pub enum ConnectionSchedule {
    /// a(n) = 1/n, the near-critical regime where n * a(n) -> 1.
    NearCritical,
    /// a(n) = c/n for a positive constant c.
    Scaled(f64),
    /// Explicit per-n table.
    Explicit(BTreeMap<u64, f64>),
}

impl ConnectionSchedule {
    /// a(n), checked to lie in (0, 1].
    pub fn scale_at(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ScheduleMissing { n });
        }
        let value = match self {
            ConnectionSchedule::NearCritical => 1.0 / n as f64,
            ConnectionSchedule::Scaled(c) => c / n as f64,
            ConnectionSchedule::Explicit(table) => {
                *table.get(&n).ok_or(Error::ScheduleMissing { n })?
            }
        };
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::ScheduleRange { n, value });
        }
        Ok(value)
    }
}

/// Connection probabilities min(a(n) * kernel, 1) as a dense k*k row-major
/// grid. One shared implementation so the sampler, the tilted law, the
/// weights and the exact oracle all round identically.
pub fn connection_probs(kernel: &Kernel, schedule: &ConnectionSchedule, n: u64) -> Result<Vec<f64>> {
    let a = schedule.scale_at(n)?;
    let k = kernel.k();
    let mut probs = vec![0.0; k * k];
    for (x, y, lam) in kernel.iter() {
        probs[x * k + y] = (a * lam).min(1.0);
    }
    Ok(probs)
}

/// A simple undirected graph with coloured nodes. Edges are stored as
/// (u, v) with u < v, sorted, with no duplicates; colours index into a
/// k-element colour set carried by the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColouredGraph {
    k: usize,
    colours: Vec<usize>,
    edges: Vec<(u32, u32)>,
}

impl ColouredGraph {
    pub fn new(k: usize, colours: Vec<usize>, mut edges: Vec<(u32, u32)>) -> Result<Self> {
        if colours.is_empty() {
            return Err(Error::Invalid("graph needs at least one node".into()));
        }
        if colours.len() > u32::MAX as usize {
            return Err(Error::Invalid("node count exceeds u32 range".into()));
        }
        let n = colours.len() as u32;
        for (v, &c) in colours.iter().enumerate() {
            if c >= k {
                return Err(Error::Invalid(format!(
                    "node {v} has colour {c}, but only {k} colours exist"
                )));
            }
        }
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(Error::Invalid(format!("self-loop at node {}", e.0)));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            if e.1 >= n {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) references a node >= n = {n}",
                    e.0, e.1
                )));
            }
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("duplicate edge".into()));
        }
        Ok(ColouredGraph { k, colours, edges })
    }

    pub fn n(&self) -> u64 {
        self.colours.len() as u64
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn colours(&self) -> &[usize] {
        &self.colours
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Nodes of each colour.
    pub fn colour_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.k];
        for &c in &self.colours {
            counts[c] += 1;
        }
        counts
    }

    /// Edge tallies per unordered colour pair, as a k*k grid filled on
    /// a <= b only.
    pub fn class_edge_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.k * self.k];
        for &(u, v) in &self.edges {
            let (a, b) = (self.colours[u as usize], self.colours[v as usize]);
            let (a, b) = (a.min(b), a.max(b));
            counts[a * self.k + b] += 1;
        }
        counts
    }

    /// Text form: header "n k", one line with the n colour indices, then one
    /// "u v" line per edge in sorted order. Round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.colours.len(), self.k));
        let colour_line: Vec<String> = self.colours.iter().map(|c| c.to_string()).collect();
        out.push_str(&colour_line.join(" "));
        out.push('\n');
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::ParseGraph {
            line: 1,
            message: "missing header line".into(),
        })?;
        let mut parts = header.split_whitespace();
        let n: usize = parse_field(&mut parts, 1, "node count")?;
        let k: usize = parse_field(&mut parts, 1, "colour count")?;
        if parts.next().is_some() {
            return Err(Error::ParseGraph {
                line: 1,
                message: "header has trailing tokens".into(),
            });
        }

        let (_, colour_line) = lines.next().ok_or(Error::ParseGraph {
            line: 2,
            message: "missing colour line".into(),
        })?;
        let colours: Vec<usize> = colour_line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|_| Error::ParseGraph {
                    line: 2,
                    message: format!("bad colour index {tok:?}"),
                })
            })
            .collect::<Result<_>>()?;
        if colours.len() != n {
            return Err(Error::ParseGraph {
                line: 2,
                message: format!("expected {n} colour indices, got {}", colours.len()),
            });
        }

        let mut edges = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let u: u32 = parse_field(&mut parts, idx + 1, "edge endpoint")?;
            let v: u32 = parse_field(&mut parts, idx + 1, "edge endpoint")?;
            if parts.next().is_some() {
                return Err(Error::ParseGraph {
                    line: idx + 1,
                    message: "edge line has trailing tokens".into(),
                });
            }
            edges.push((u, v));
        }
        ColouredGraph::new(k, colours, edges)
    }
}

fn parse_field<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    what: &str,
) -> Result<T> {
    let tok = parts.next().ok_or_else(|| Error::ParseGraph {
        line,
        message: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::ParseGraph {
        line,
        message: format!("bad {what} {tok:?}"),
    })
}

fn draw_colour<R: Rng>(law: &TypeLaw, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for a in 0..law.k() {
        acc += law.get(a);
        if u < acc {
            return a;
        }
    }
    law.k() - 1
}

/// Pairs inside one colour class, ordered lexicographically. Maps a rank
/// t in [0, len*(len-1)/2) to local indices (i, j), i < j.
fn unrank_within(len: u64, t: u64) -> (u64, u64) {
    // Ranks before row i: R(i) = i*(len-1) - i*(i-1)/2 = i*(2*len-1-i)/2.
    let before = |i: u64| i * (2 * len - 1 - i) / 2;
    let lf = len as f64;
    let tf = t as f64;
    let mut i = ((2.0 * lf - 1.0 - ((2.0 * lf - 1.0) * (2.0 * lf - 1.0) - 8.0 * tf).sqrt()) / 2.0)
        .floor()
        .max(0.0) as u64;
    // Float solve can be off by one near row boundaries.
    while i + 1 < len && before(i + 1) <= t {
        i += 1;
    }
    while i > 0 && before(i) > t {
        i -= 1;
    }
    let j = i + 1 + (t - before(i));
    (i, j)
}

/// Geometric skipping over a block of `total` pairs with shared edge
/// probability p: the gap to the next edge is floor(ln(U)/ln(1-p)). Visits
/// only the edges actually present, so a sparse block costs O(edges).
fn sample_block<R: Rng>(total: u64, p: f64, rng: &mut R, mut emit: impl FnMut(u64)) {
    if total == 0 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for t in 0..total {
            emit(t);
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let mut pos: u64 = 0;
    loop {
        let u = 1.0 - rng.random::<f64>();
        let gap = u.ln() / log_q;
        if !(gap < (total - pos) as f64) {
            return;
        }
        pos += gap as u64;
        emit(pos);
        pos += 1;
        if pos >= total {
            return;
        }
    }
}

fn edges_for_colours<R: Rng>(
    colours: &[usize],
    k: usize,
    probs: &[f64],
    rng: &mut R,
) -> Vec<(u32, u32)> {
    let mut by_colour: Vec<Vec<u32>> = vec![Vec::new(); k];
    for (v, &c) in colours.iter().enumerate() {
        by_colour[c].push(v as u32);
    }
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a..k {
            let p = probs[a * k + b];
            if a == b {
                let nodes = &by_colour[a];
                let len = nodes.len() as u64;
                let total = len * len.saturating_sub(1) / 2;
                sample_block(total, p, rng, |t| {
                    let (i, j) = unrank_within(len, t);
                    edges.push((nodes[i as usize], nodes[j as usize]));
                });
            } else {
                let (na, nb) = (&by_colour[a], &by_colour[b]);
                let total = na.len() as u64 * nb.len() as u64;
                let width = nb.len() as u64;
                sample_block(total, p, rng, |t| {
                    let u = na[(t / width) as usize];
                    let v = nb[(t % width) as usize];
                    edges.push((u.min(v), u.max(v)));
                });
            }
        }
    }
    edges
}

/// Draws a coloured graph: n colours iid from the law, then each unordered
/// pair linked independently with probability min(a(n) * kernel, 1). Runs in
/// O(n + |E|) via per-class geometric skipping.
pub fn sample_graph<R: Rng>(
    n: u64,
    law: &TypeLaw,
    kernel: &Kernel,
    schedule: &ConnectionSchedule,
    rng: &mut R,
) -> Result<ColouredGraph> {
    assert_eq!(law.k(), kernel.k(), "law and kernel disagree on k");
    if n == 0 {
        return Err(Error::Invalid("graph needs at least one node".into()));
    }
    let probs = connection_probs(kernel, schedule, n)?;
    let colours: Vec<usize> = (0..n).map(|_| draw_colour(law, rng)).collect();
    let edges = edges_for_colours(&colours, kernel.k(), &probs, rng);
    ColouredGraph::new(kernel.k(), colours, edges)
}

/// Same law as sample_graph, realized by one Bernoulli draw per node pair in
/// row order. Quadratic; kept as an independently-coded oracle for the
/// skipping sampler.
pub fn sample_graph_direct<R: Rng>(
    n: u64,
    law: &TypeLaw,
    kernel: &Kernel,
    schedule: &ConnectionSchedule,
    rng: &mut R,
) -> Result<ColouredGraph> {
    assert_eq!(law.k(), kernel.k(), "law and kernel disagree on k");
    if n == 0 {
        return Err(Error::Invalid("graph needs at least one node".into()));
    }
    let k = kernel.k();
    let probs = connection_probs(kernel, schedule, n)?;
    let colours: Vec<usize> = (0..n).map(|_| draw_colour(law, rng)).collect();
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            let p = probs[colours[u as usize] * k + colours[v as usize]];
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    ColouredGraph::new(k, colours, edges)
}

/// Graph conditioned on exact colour counts: the colour sequence is a
/// uniformly random arrangement with the given tallies, edges as in
/// sample_graph.
pub fn sample_graph_conditional<R: Rng>(
    type_counts: &[u64],
    kernel: &Kernel,
    schedule: &ConnectionSchedule,
    rng: &mut R,
) -> Result<ColouredGraph> {
    if type_counts.len() != kernel.k() {
        return Err(Error::Dimension {
            what: "type counts",
            expected: kernel.k(),
            got: type_counts.len(),
        });
    }
    let n: u64 = type_counts.iter().sum();
    if n == 0 {
        return Err(Error::Invalid("graph needs at least one node".into()));
    }
    let probs = connection_probs(kernel, schedule, n)?;
    let mut colours = Vec::with_capacity(n as usize);
    for (c, &count) in type_counts.iter().enumerate() {
        colours.extend(std::iter::repeat(c).take(count as usize));
    }
    // Fisher-Yates; uniform over arrangements given the tallies.
    for i in (1..colours.len()).rev() {
        let j = rng.random_range(0..=i);
        colours.swap(i, j);
    }
    let edges = edges_for_colours(&colours, kernel.k(), &probs, rng);
    ColouredGraph::new(kernel.k(), colours, edges)
}

/// Draws from the exponentially tilted edge law: colours iid from the law,
/// pair (a, b) linked with probability e^g p / (1 - p + e^g p). The tilt
/// leaves the colour marginals untouched.
pub fn sample_tilted_graph<R: Rng>(
    n: u64,
    law: &TypeLaw,
    kernel: &Kernel,
    tilt: &TestFunction,
    schedule: &ConnectionSchedule,
    rng: &mut R,
) -> Result<ColouredGraph> {
    assert_eq!(law.k(), kernel.k(), "law and kernel disagree on k");
    if n == 0 {
        return Err(Error::Invalid("graph needs at least one node".into()));
    }
    let probs = tilted_connection_probs(tilt, kernel, schedule, n)?;
    let colours: Vec<usize> = (0..n).map(|_| draw_colour(law, rng)).collect();
    let edges = edges_for_colours(&colours, kernel.k(), &probs, rng);
    ColouredGraph::new(kernel.k(), colours, edges)
}

/// Tilted edge law conditioned on exact colour counts.
pub fn sample_tilted_graph_conditional<R: Rng>(
    type_counts: &[u64],
    kernel: &Kernel,
    tilt: &TestFunction,
    schedule: &ConnectionSchedule,
    rng: &mut R,
) -> Result<ColouredGraph> {
    if type_counts.len() != kernel.k() {
        return Err(Error::Dimension {
            what: "type counts",
            expected: kernel.k(),
            got: type_counts.len(),
        });
    }
    let n: u64 = type_counts.iter().sum();
    if n == 0 {
        return Err(Error::Invalid("graph needs at least one node".into()));
    }
    let probs = tilted_connection_probs(tilt, kernel, schedule, n)?;
    let mut colours = Vec::with_capacity(n as usize);
    for (c, &count) in type_counts.iter().enumerate() {
        colours.extend(std::iter::repeat(c).take(count as usize));
    }
    for i in (1..colours.len()).rev() {
        let j = rng.random_range(0..=i);
        colours.swap(i, j);
    }
    let edges = edges_for_colours(&colours, kernel.k(), &probs, rng);
    ColouredGraph::new(kernel.k(), colours, edges)
}

/// Fraction of nodes of each colour.
pub fn empirical_type_measure(graph: &ColouredGraph) -> TypeLaw {
    let n = graph.n() as f64;
    let weights: Vec<f64> = graph
        .colour_counts()
        .into_iter()
        .map(|c| c as f64 / n)
        .collect();
    TypeLaw::new(weights).expect("counts over n sum to 1 within tolerance")
}

/// The normalizer a(n) * n^2 of the empirical pair measure. Single shared
/// implementation: sampled measures and oracle-reconstructed measures must
/// round identically for boundary membership to agree.
pub fn pair_scale(n: u64, schedule: &ConnectionSchedule) -> Result<f64> {
    let nf = n as f64;
    Ok(schedule.scale_at(n)? * nf * nf)
}

/// Pair measure induced by per-class edge tallies (k*k grid, a <= b filled):
/// cell (a,b) holds e/(a_n n^2) off the diagonal (each cross edge counted
/// once per orientation) and 2e/(a_n n^2) on it.
pub fn measure_from_class_counts(
    n: u64,
    k: usize,
    counts: &[u64],
    schedule: &ConnectionSchedule,
) -> Result<PairMeasure> {
    let scale = pair_scale(n, schedule)?;
    let mut rows = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a..k {
            let e = counts[a * k + b] as f64;
            if a == b {
                rows[a][a] = (2.0 * e) / scale;
            } else {
                let v = e / scale;
                rows[a][b] = v;
                rows[b][a] = v;
            }
        }
    }
    Ok(PairMeasure::from_rows(&rows).expect("constructed grid is symmetric"))
}

/// Empirical pair measure of a graph. Total mass times a(n) n^2 is twice the
/// edge count.
pub fn empirical_pair_measure(
    graph: &ColouredGraph,
    schedule: &ConnectionSchedule,
) -> Result<PairMeasure> {
    measure_from_class_counts(graph.n(), graph.k(), &graph.class_edge_counts(), schedule)
}

/// Edge probabilities of the tilted law: odds multiplied by e^{g}, i.e.
/// ptilde = e^g p / (1 - p + e^g p). Cells where the base probability is
/// exactly 1 admit no tilt.
pub fn tilted_connection_probs(
    g: &TestFunction,
    kernel: &Kernel,
    schedule: &ConnectionSchedule,
    n: u64,
) -> Result<Vec<f64>> {
    assert_eq!(g.k(), kernel.k(), "tilt and kernel disagree on k");
    let k = kernel.k();
    let probs = connection_probs(kernel, schedule, n)?;
    let mut tilted = vec![0.0; k * k];
    for (a, b, gv) in g.iter() {
        let p = probs[a * k + b];
        if p >= 1.0 && gv != 0.0 {
            return Err(Error::DegenerateTilt {
                a: a.min(b),
                b: a.max(b),
                g: gv,
            });
        }
        tilted[a * k + b] = if p == 0.0 {
            0.0
        } else if gv == 0.0 {
            p
        } else {
            let w = gv.exp();
            (w * p) / (1.0 - p + w * p)
        };
    }
    Ok(tilted)
}

/// Log of the Radon-Nikodym weight dP/dPtilde of a graph under the tilted
/// edge law, given its colours. Per colour class with N pairs, e edges and
/// log-denominator d = ln(1 + p*(e^g - 1)): an edge contributes d - g and a
/// non-edge contributes d, so the class total is N*d - e*g. Exact at every
/// n, not an asymptotic expansion.
pub fn importance_weight(
    graph: &ColouredGraph,
    g: &TestFunction,
    kernel: &Kernel,
    schedule: &ConnectionSchedule,
) -> Result<f64> {
    assert_eq!(g.k(), kernel.k(), "tilt and kernel disagree on k");
    let k = graph.k();
    assert_eq!(k, kernel.k(), "graph and kernel disagree on k");
    let n = graph.n();
    let probs = connection_probs(kernel, schedule, n)?;
    let node_counts = graph.colour_counts();
    let edge_counts = graph.class_edge_counts();
    let mut log_w = 0.0f64;
    for a in 0..k {
        for b in a..k {
            let p = probs[a * k + b];
            let gv = g.get(a, b);
            if p >= 1.0 && gv != 0.0 {
                return Err(Error::DegenerateTilt { a, b, g: gv });
            }
            let e = edge_counts[a * k + b];
            if p == 0.0 {
                if e > 0 {
                    return Err(Error::ImpossibleEdge { a, b });
                }
                continue;
            }
            let pairs = if a == b {
                node_counts[a] * node_counts[a].saturating_sub(1) / 2
            } else {
                node_counts[a] * node_counts[b]
            };
            let log_d = (p * gv.exp_m1()).ln_1p();
            log_w += pairs as f64 * log_d - e as f64 * gv;
        }
    }
    Ok(log_w)
}

/// Measurable set of pair measures.
#[derive(Clone)]
pub enum Event {
    /// Pair measures with <direction, w> strictly above the level.
    HalfSpace { direction: TestFunction, level: f64 },
    /// Max-entry distance from the center at most the radius.
    Ball { center: PairMeasure, radius: f64 },
    /// Arbitrary membership test.
    Predicate(Arc<dyn Fn(&PairMeasure) -> bool + Send + Sync>),
}

impl std::fmt::Debug for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Event::HalfSpace { direction, level } => f
                .debug_struct("HalfSpace")
                .field("direction", direction)
                .field("level", level)
                .finish(),
            Event::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            Event::Predicate(_) => f.write_str("Predicate(..)"),
        }
    }
}

impl Event {
    /// The half-space {w : <g, w> > <g, pi> - epsilon/2}, which contains pi
    /// itself with margin epsilon/2.
    pub fn half_space_margin(direction: TestFunction, pi: &PairMeasure, epsilon: f64) -> Result<Event> {
        if !(epsilon > 0.0) {
            return Err(Error::Invalid(format!(
                "half-space margin must be positive, got {epsilon}"
            )));
        }
        let level = inner_product(&direction, pi) - epsilon / 2.0;
        Ok(Event::HalfSpace { direction, level })
    }
}

/// Shared membership predicate: the Monte Carlo indicators and the exact
/// oracle both call this, so boundary cases resolve identically everywhere.
pub fn event_membership(event: &Event, w: &PairMeasure) -> bool {
    match event {
        Event::HalfSpace { direction, level } => inner_product(direction, w) > *level,
        Event::Ball { center, radius } => {
            let mut dist = 0.0f64;
            for (a, b, c) in center.iter() {
                dist = dist.max((w.get(a, b) - c).abs());
            }
            dist <= *radius
        }
        Event::Predicate(test) => test(w),
    }
}
