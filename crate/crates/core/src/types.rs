//! Shared value types: a law on a finite colour set, a symmetric connection
//! kernel, symmetric pair measures on colour pairs, and symmetric test
//! functions. All matrix-valued types store the full k x k grid and keep it
//! exactly symmetric, so sums over ordered pairs read straight off the grid.

use crate::error::{Error, Result};

/// Two nearly equal off-diagonal entries are averaged; beyond this relative
/// deviation the input is rejected as genuinely asymmetric.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Below this, a probability total is considered exactly 1.
pub const ZERO_TOL: f64 = 1e-12;

fn check_square(what: &'static str, rows: &[Vec<f64>]) -> Result<usize> {
    let k = rows.len();
    if k == 0 {
        return Err(Error::Invalid(format!("{what} must be nonempty")));
    }
    for row in rows {
        if row.len() != k {
            return Err(Error::Dimension {
                what,
                expected: k,
                got: row.len(),
            });
        }
    }
    Ok(k)
}

/// Averages rows[a][b] and rows[b][a]; errors when they differ by more than
/// SYMMETRY_TOL relative to their size.
fn symmetrize(what: &'static str, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = check_square(what, rows)?;
    let mut flat = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let (u, v) = (rows[a][b], rows[b][a]);
            if !u.is_finite() {
                return Err(Error::BadEntry {
                    what,
                    a,
                    b,
                    value: u,
                });
            }
            if !v.is_finite() {
                return Err(Error::BadEntry {
                    what,
                    a: b,
                    b: a,
                    value: v,
                });
            }
            let deviation = (u - v).abs();
            let tolerance = SYMMETRY_TOL * (1.0 + u.abs() + v.abs());
            if deviation > tolerance {
                return Err(Error::Asymmetric {
                    what,
                    a,
                    b,
                    deviation,
                    tolerance,
                });
            }
            let avg = 0.5 * (u + v);
            flat[a * k + b] = avg;
            flat[b * k + a] = avg;
        }
    }
    Ok(flat)
}

/// Probability law on the colour set {0, .., k-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeLaw {
    weights: Vec<f64>,
}

impl TypeLaw {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("type law must be nonempty".into()));
        }
        for (a, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::BadEntry {
                    what: "type law",
                    a,
                    b: a,
                    value: w,
                });
            }
        }
        let total = crate::numeric::kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > ZERO_TOL {
            return Err(Error::NotProbability { total });
        }
        Ok(TypeLaw { weights })
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0);
        TypeLaw {
            weights: vec![1.0 / k as f64; k],
        }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn get(&self, a: usize) -> f64 {
        self.weights[a]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

macro_rules! symmetric_grid {
    ($name:ident, $what:expr, $doc:expr) => {
        #[doc = $doc]
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            k: usize,
            flat: Vec<f64>,
        }

        impl $name {
            /// Builds from full rows, averaging away sub-tolerance asymmetry.
            pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
                let flat = symmetrize($what, rows)?;
                let grid = $name {
                    k: rows.len(),
                    flat,
                };
                grid.validate()?;
                Ok(grid)
            }

            pub fn constant(k: usize, value: f64) -> Result<Self> {
                let rows = vec![vec![value; k]; k];
                Self::from_rows(&rows)
            }

            pub fn k(&self) -> usize {
                self.k
            }

            pub fn get(&self, a: usize, b: usize) -> f64 {
                self.flat[a * self.k + b]
            }

            pub fn as_rows(&self) -> Vec<Vec<f64>> {
                (0..self.k)
                    .map(|a| self.flat[a * self.k..(a + 1) * self.k].to_vec())
                    .collect()
            }

            /// All ordered cells (a, b, value), row-major.
            pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
                let k = self.k;
                self.flat
                    .iter()
                    .enumerate()
                    .map(move |(i, &v)| (i / k, i % k, v))
            }
        }
    };
}

symmetric_grid!(
    Kernel,
    "kernel",
    "Symmetric connection kernel: nonnegative intensity per colour pair."
);
symmetric_grid!(
    PairMeasure,
    "pair measure",
    "Symmetric finite measure on ordered colour pairs."
);
symmetric_grid!(
    TestFunction,
    "test function",
    "Symmetric bounded test function on colour pairs; entries may be negative."
);

impl Kernel {
    fn validate(&self) -> Result<()> {
        let mut any_positive = false;
        for (a, b, v) in self.iter() {
            if v < 0.0 {
                return Err(Error::BadEntry {
                    what: "kernel",
                    a,
                    b,
                    value: v,
                });
            }
            any_positive |= v > 0.0;
        }
        if !any_positive {
            return Err(Error::ZeroKernel);
        }
        Ok(())
    }
}

impl PairMeasure {
    fn validate(&self) -> Result<()> {
        for (a, b, v) in self.iter() {
            if v < 0.0 {
                return Err(Error::BadEntry {
                    what: "pair measure",
                    a,
                    b,
                    value: v,
                });
            }
        }
        Ok(())
    }

    /// Sum over all ordered pairs.
    pub fn total_mass(&self) -> f64 {
        crate::numeric::kahan_sum(self.flat.iter().copied())
    }

    /// Entrywise multiple; factor must be a finite nonnegative number.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(Error::Invalid(format!(
                "scale factor must be finite and >= 0, got {factor}"
            )));
        }
        Ok(PairMeasure {
            k: self.k,
            flat: self.flat.iter().map(|v| v * factor).collect(),
        })
    }
}

impl TestFunction {
    fn validate(&self) -> Result<()> {
        Ok(())
    }

    /// Largest |g(a,b)| over the grid.
    pub fn sup_norm(&self) -> f64 {
        self.flat.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Sum over ordered pairs of g(a,b) * pi(a,b). Panics when shapes differ:
/// mixing grids of different colour counts is a programming error.
pub fn inner_product(g: &TestFunction, pi: &PairMeasure) -> f64 {
    assert_eq!(g.k(), pi.k(), "test function and pair measure disagree on k");
    crate::numeric::kahan_sum(
        g.iter()
            .map(|(a, b, gv)| gv * pi.get(a, b)),
    )
}

/// Deterministic colour counts for n nodes under a law: floors of n * law(a)
/// topped up by largest remainder, ties broken toward the smaller colour.
pub fn type_counts_for(law: &TypeLaw, n: u64) -> Vec<u64> {
    let k = law.k();
    let mut counts: Vec<u64> = Vec::with_capacity(k);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(k);
    let mut assigned = 0u64;
    for a in 0..k {
        let exact = law.get(a) * n as f64;
        let floor = exact.floor();
        counts.push(floor as u64);
        assigned += floor as u64;
        remainders.push((exact - floor, a));
    }
    let mut short = (n - assigned) as usize;
    remainders.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    for &(_, a) in remainders.iter().take(short.min(k)) {
        counts[a] += 1;
        short -= 1;
    }
    debug_assert_eq!(short, 0, "remainders always cover the shortfall");
    counts
}
