//! Experiment configuration: a flat key-value file with `[section]` headers.
//! Matrix-valued settings are written one row per line by repeating the key,
//! so a k x k table is exactly k `*_row` lines. Unknown sections and keys are
//! rejected so a typo cannot silently fall back to a default.

use std::collections::BTreeSet;
use std::path::PathBuf;

use graphldp_core::graph::{ConnectionSchedule, Event};
use graphldp_core::types::{Kernel, PairMeasure, TestFunction, TypeLaw};

/// Which probability estimator the rate-mc command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Exact,
    Mc,
    Is,
}

#[derive(Debug, Clone)]
pub struct RunSettings {
    pub n_list: Vec<u64>,
    pub estimator: Estimator,
    pub samples: u64,
    pub seed: u64,
    pub conditional: bool,
    pub workers: usize,
    /// Grid resolution for the reference rate infimum.
    pub mesh: usize,
    /// Tilt the importance sampler toward this measure; defaults to the ball
    /// center when the event is a ball.
    pub tilt_target: Option<PairMeasure>,
}

#[derive(Debug, Clone)]
pub struct SampleSettings {
    pub count: u64,
    pub n: u64,
    pub conditional: bool,
}

#[derive(Debug, Clone)]
pub struct LegendreSettings {
    pub target: PairMeasure,
    pub t_values: Vec<f64>,
}

/// Everything a command can need, parsed and validated once up front.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub labels: Vec<String>,
    pub law: TypeLaw,
    pub kernel: Kernel,
    pub schedule: ConnectionSchedule,
    pub event: Option<Event>,
    pub run: RunSettings,
    pub sample: Option<SampleSettings>,
    pub measure_inputs: Vec<PathBuf>,
    pub legendre: Option<LegendreSettings>,
}

/// Raw sectioned key-value lines, order preserved within a section so that
/// repeated row keys reassemble into a table top to bottom.
struct RawConfig {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig, String> {
        let mut sections: Vec<(String, Vec<(String, String)>)> = Vec::new();
        let mut current: Option<usize> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            let lineno = idx + 1;
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(format!("line {lineno}: section header has no closing ']'"));
                };
                let name = name.trim().to_string();
                if name.is_empty() {
                    return Err(format!("line {lineno}: section name is empty"));
                }
                current = Some(match sections.iter().position(|(s, _)| *s == name) {
                    Some(i) => i,
                    None => {
                        sections.push((name, Vec::new()));
                        sections.len() - 1
                    }
                });
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "line {lineno}: expected 'key = value' or '[section]', got '{line}'"
                ));
            };
            let Some(section) = current else {
                return Err(format!(
                    "line {lineno}: '{}' appears before any [section] header",
                    key.trim()
                ));
            };
            sections[section]
                .1
                .push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(RawConfig { sections })
    }

    fn entries(&self, section: &str) -> &[(String, String)] {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .map(|(_, e)| e.as_slice())
            .unwrap_or(&[])
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|(s, _)| s == section)
    }

    /// Last occurrence wins for scalar keys.
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries(section)
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// All occurrences in file order, for row-per-line tables.
    fn get_all(&self, section: &str, key: &str) -> Vec<&str> {
        self.entries(section)
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, String> {
        self.get(section, key)
            .ok_or_else(|| format!("[{section}] is missing the '{key}' key"))
    }

    fn check_schema(&self, known: &[(&str, &[&str])]) -> Result<(), String> {
        for (section, entries) in &self.sections {
            let Some((_, keys)) = known.iter().find(|(s, _)| s == section) else {
                let names: Vec<&str> = known.iter().map(|(s, _)| *s).collect();
                return Err(format!(
                    "unknown section [{section}]; expected one of: {}",
                    names.join(", ")
                ));
            };
            let mut seen = BTreeSet::new();
            for (key, _) in entries {
                if !keys.contains(&key.as_str()) {
                    return Err(format!(
                        "unknown key '{key}' in [{section}]; expected one of: {}",
                        keys.join(", ")
                    ));
                }
                // Only table rows and input lists may repeat; a repeated
                // scalar is a likely editing accident and the silent
                // last-wins would hide it.
                let repeatable = key.ends_with("_row") || key == "input";
                if !repeatable && !seen.insert(key.clone()) {
                    return Err(format!("key '{key}' appears twice in [{section}]"));
                }
            }
        }
        Ok(())
    }
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["k", "labels", "mu", "lambda_row", "schedule"]),
    (
        "event",
        &[
            "kind",
            "center_row",
            "radius",
            "direction_row",
            "level",
            "target_row",
            "epsilon",
        ],
    ),
    (
        "run",
        &[
            "n_list",
            "estimator",
            "samples",
            "seed",
            "conditional",
            "workers",
            "mesh",
            "tilt_target_row",
        ],
    ),
    ("sample", &["count", "n", "conditional"]),
    ("measure", &["input"]),
    ("legendre", &["target_row", "t_values"]),
];

fn parse_f64(section: &str, key: &str, raw: &str) -> Result<f64, String> {
    raw.parse::<f64>()
        .map_err(|_| format!("[{section}] {key}: '{raw}' is not a number"))
}

fn parse_u64(section: &str, key: &str, raw: &str) -> Result<u64, String> {
    raw.parse::<u64>()
        .map_err(|_| format!("[{section}] {key}: '{raw}' is not a nonnegative integer"))
}

fn parse_bool(section: &str, key: &str, raw: &str) -> Result<bool, String> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("[{section}] {key}: '{raw}' is not 'true' or 'false'")),
    }
}

fn parse_numbers(section: &str, key: &str, raw: &str) -> Result<Vec<f64>, String> {
    raw.split_whitespace()
        .map(|tok| parse_f64(section, key, tok))
        .collect()
}

/// k rows of k entries each, from repeated `key` lines.
fn parse_rows(raw: &RawConfig, section: &str, key: &str, k: usize) -> Result<Vec<Vec<f64>>, String> {
    let lines = raw.get_all(section, key);
    if lines.is_empty() {
        return Err(format!("[{section}] needs {k} '{key}' lines, found none"));
    }
    if lines.len() != k {
        return Err(format!(
            "[{section}] needs exactly {k} '{key}' lines (one per colour), found {}",
            lines.len()
        ));
    }
    let mut rows = Vec::with_capacity(k);
    for line in lines {
        let row = parse_numbers(section, key, line)?;
        if row.len() != k {
            return Err(format!(
                "[{section}] {key}: each line needs {k} entries, got {} in '{line}'",
                row.len()
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_schedule(raw: &str) -> Result<ConnectionSchedule, String> {
    let mut tokens = raw.split_whitespace();
    match (tokens.next(), tokens.next(), tokens.next()) {
        (Some("near_critical"), None, _) => Ok(ConnectionSchedule::NearCritical),
        (Some("scaled"), Some(c), None) => {
            let c = parse_f64("model", "schedule", c)?;
            if !(c.is_finite() && c > 0.0) {
                return Err(format!(
                    "[model] schedule: the scale constant must be positive, got {c}"
                ));
            }
            Ok(ConnectionSchedule::Scaled(c))
        }
        _ => Err(format!(
            "[model] schedule: '{raw}' is not 'near_critical' or 'scaled C'"
        )),
    }
}

fn parse_event(raw: &RawConfig, k: usize) -> Result<Option<Event>, String> {
    if !raw.has_section("event") {
        return Ok(None);
    }
    let kind = raw.require("event", "kind")?;
    match kind {
        "ball" => {
            let rows = parse_rows(raw, "event", "center_row", k)?;
            let center = PairMeasure::from_rows(&rows)
                .map_err(|e| format!("[event] center: {e}"))?;
            let radius = parse_f64("event", "radius", raw.require("event", "radius")?)?;
            if !(radius >= 0.0) {
                return Err(format!(
                    "[event] radius: must be nonnegative, got {radius}"
                ));
            }
            Ok(Some(Event::Ball { center, radius }))
        }
        "half_space" => {
            let rows = parse_rows(raw, "event", "direction_row", k)?;
            let direction = TestFunction::from_rows(&rows)
                .map_err(|e| format!("[event] direction: {e}"))?;
            if direction.iter().all(|(_, _, v)| v == 0.0) {
                return Err("[event] direction: all entries are zero, the half-space is degenerate".into());
            }
            match (raw.get("event", "level"), raw.get("event", "epsilon")) {
                (Some(level), None) => {
                    let level = parse_f64("event", "level", level)?;
                    if !level.is_finite() {
                        return Err(format!("[event] level: must be finite, got {level}"));
                    }
                    Ok(Some(Event::HalfSpace { direction, level }))
                }
                (None, Some(eps)) => {
                    let epsilon = parse_f64("event", "epsilon", eps)?;
                    let rows = parse_rows(raw, "event", "target_row", k)?;
                    let target = PairMeasure::from_rows(&rows)
                        .map_err(|e| format!("[event] target: {e}"))?;
                    Event::half_space_margin(direction, &target, epsilon)
                        .map(Some)
                        .map_err(|e| format!("[event]: {e}"))
                }
                (Some(_), Some(_)) => {
                    Err("[event]: give either 'level' or 'epsilon' with target rows, not both".into())
                }
                (None, None) => {
                    Err("[event]: a half_space needs 'level', or 'epsilon' plus 'target_row' lines".into())
                }
            }
        }
        other => Err(format!(
            "[event] kind: '{other}' is not 'ball' or 'half_space'"
        )),
    }
}

pub fn parse_experiment(text: &str) -> Result<Experiment, String> {
    let raw = RawConfig::parse(text)?;
    raw.check_schema(SCHEMA)?;
    if !raw.has_section("model") {
        return Err("config has no [model] section".into());
    }

    let mu = parse_numbers("model", "mu", raw.require("model", "mu")?)?;
    let k = mu.len();
    if k == 0 {
        return Err("[model] mu: needs at least one weight".into());
    }
    if let Some(declared) = raw.get("model", "k") {
        let declared = parse_u64("model", "k", declared)? as usize;
        if declared != k {
            return Err(format!(
                "[model] k = {declared} disagrees with the {k} entries of mu"
            ));
        }
    }
    let law = TypeLaw::new(mu).map_err(|e| format!("[model] mu: {e}"))?;

    let labels: Vec<String> = match raw.get("model", "labels") {
        Some(line) => {
            let labels: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if labels.len() != k {
                return Err(format!(
                    "[model] labels: needs {k} names, got {}",
                    labels.len()
                ));
            }
            labels
        }
        None => (0..k).map(|c| format!("c{c}")).collect(),
    };

    let rows = parse_rows(&raw, "model", "lambda_row", k)?;
    let kernel = Kernel::from_rows(&rows).map_err(|e| format!("[model] lambda: {e}"))?;

    let schedule = match raw.get("model", "schedule") {
        Some(value) => parse_schedule(value)?,
        None => ConnectionSchedule::NearCritical,
    };

    let event = parse_event(&raw, k)?;

    let n_list = match raw.get("run", "n_list") {
        Some(line) => {
            let ns: Result<Vec<u64>, String> = line
                .split_whitespace()
                .map(|tok| {
                    let n = parse_u64("run", "n_list", tok)?;
                    if n == 0 {
                        return Err("[run] n_list: sizes must be at least 1".into());
                    }
                    Ok(n)
                })
                .collect();
            ns?
        }
        None => Vec::new(),
    };

    let estimator = match raw.get("run", "estimator").unwrap_or("exact") {
        "exact" => Estimator::Exact,
        "mc" => Estimator::Mc,
        "is" => Estimator::Is,
        other => {
            return Err(format!(
                "[run] estimator: '{other}' is not 'exact', 'mc' or 'is'"
            ))
        }
    };

    let samples = match raw.get("run", "samples") {
        Some(v) => {
            let s = parse_u64("run", "samples", v)?;
            if s == 0 {
                return Err("[run] samples: must be at least 1".into());
            }
            s
        }
        None => 10_000,
    };
    let seed = match raw.get("run", "seed") {
        Some(v) => parse_u64("run", "seed", v)?,
        None => 0,
    };
    let conditional = match raw.get("run", "conditional") {
        Some(v) => parse_bool("run", "conditional", v)?,
        None => false,
    };
    let workers = match raw.get("run", "workers") {
        Some(v) => parse_u64("run", "workers", v)? as usize,
        None => 0,
    };
    let mesh = match raw.get("run", "mesh") {
        Some(v) => {
            let m = parse_u64("run", "mesh", v)? as usize;
            if m == 0 {
                return Err("[run] mesh: must be at least 1".into());
            }
            m
        }
        None => 1000,
    };
    let tilt_target = if raw.get_all("run", "tilt_target_row").is_empty() {
        None
    } else {
        let rows = parse_rows(&raw, "run", "tilt_target_row", k)?;
        Some(PairMeasure::from_rows(&rows).map_err(|e| format!("[run] tilt_target: {e}"))?)
    };

    let sample = if raw.has_section("sample") {
        let n = parse_u64("sample", "n", raw.require("sample", "n")?)?;
        if n == 0 {
            return Err("[sample] n: must be at least 1".into());
        }
        let count = match raw.get("sample", "count") {
            Some(v) => {
                let c = parse_u64("sample", "count", v)?;
                if c == 0 {
                    return Err("[sample] count: must be at least 1".into());
                }
                c
            }
            None => 1,
        };
        let conditional = match raw.get("sample", "conditional") {
            Some(v) => parse_bool("sample", "conditional", v)?,
            None => false,
        };
        Some(SampleSettings {
            count,
            n,
            conditional,
        })
    } else {
        None
    };

    let measure_inputs: Vec<PathBuf> = raw
        .get_all("measure", "input")
        .into_iter()
        .map(PathBuf::from)
        .collect();

    let legendre = if raw.has_section("legendre") {
        let rows = parse_rows(&raw, "legendre", "target_row", k)?;
        let target =
            PairMeasure::from_rows(&rows).map_err(|e| format!("[legendre] target: {e}"))?;
        let t_values = match raw.get("legendre", "t_values") {
            Some(line) => {
                let ts = parse_numbers("legendre", "t_values", line)?;
                for &t in &ts {
                    if !(t > 0.0) {
                        return Err(format!(
                            "[legendre] t_values: truncation levels must be positive, got {t}"
                        ));
                    }
                }
                ts
            }
            None => vec![1.0, 2.0, 4.0, 8.0],
        };
        Some(LegendreSettings { target, t_values })
    } else {
        None
    };

    Ok(Experiment {
        labels,
        law,
        kernel,
        schedule,
        event,
        run: RunSettings {
            n_list,
            estimator,
            samples,
            seed,
            conditional,
            workers,
            mesh,
            tilt_target,
        },
        sample,
        measure_inputs,
        legendre,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[model]
mu = 0.5 0.5
lambda_row = 1.0 1.0
lambda_row = 1.0 1.0
";

    #[test]
    fn a_minimal_model_parses_with_defaults() {
        let exp = parse_experiment(MINIMAL).unwrap();
        assert_eq!(exp.law.k(), 2);
        assert_eq!(exp.labels, vec!["c0", "c1"]);
        assert_eq!(exp.schedule, ConnectionSchedule::NearCritical);
        assert!(exp.event.is_none());
        assert_eq!(exp.run.samples, 10_000);
        assert_eq!(exp.run.estimator, Estimator::Exact);
    }

    #[test]
    fn an_asymmetric_kernel_is_rejected_with_the_offending_cell() {
        let text = "
[model]
mu = 0.5 0.5
lambda_row = 1.0 2.0
lambda_row = 3.0 1.0
";
        let err = parse_experiment(text).unwrap_err();
        assert!(err.contains("symmetric"), "{err}");
        assert!(err.contains("(0,1)"), "{err}");
    }

    #[test]
    fn a_law_that_does_not_normalize_is_rejected() {
        let text = "
[model]
mu = 0.5 0.6
lambda_row = 1.0 1.0
lambda_row = 1.0 1.0
";
        let err = parse_experiment(text).unwrap_err();
        assert!(err.contains("sum to 1"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let err = parse_experiment("[model]\nmu = 1.0\nlambda_row = 1.0\nlambdas = 2\n").unwrap_err();
        assert!(err.contains("unknown key 'lambdas'"), "{err}");
        let err = parse_experiment("[models]\nmu = 1.0\n").unwrap_err();
        assert!(err.contains("unknown section [models]"), "{err}");
    }

    #[test]
    fn repeated_scalar_keys_are_rejected() {
        let text = "
[model]
mu = 1.0
mu = 1.0
lambda_row = 1.0
";
        let err = parse_experiment(text).unwrap_err();
        assert!(err.contains("appears twice"), "{err}");
    }

    #[test]
    fn a_ball_event_parses_center_rows_and_radius() {
        let text = format!(
            "{MINIMAL}
[event]
kind = ball
center_row = 0.375 0.375
center_row = 0.375 0.375
radius = 0.02
"
        );
        let exp = parse_experiment(&text).unwrap();
        match exp.event.unwrap() {
            Event::Ball { center, radius } => {
                assert_eq!(center.get(0, 1), 0.375);
                assert_eq!(radius, 0.02);
            }
            other => panic!("expected a ball, got {other:?}"),
        }
    }

    #[test]
    fn a_half_space_from_margin_form_matches_the_level_form() {
        let margin = format!(
            "{MINIMAL}
[event]
kind = half_space
direction_row = 1.0 -0.4
direction_row = -0.4 0.6
epsilon = 0.01
target_row = 0.5 0.25
target_row = 0.25 0.125
"
        );
        let exp = parse_experiment(&margin).unwrap();
        let Some(Event::HalfSpace { level, .. }) = exp.event else {
            panic!("expected a half-space");
        };
        // <g, pi> = 0.5 - 0.4*0.25*2 + 0.6*0.125 = 0.375, minus eps/2.
        assert!((level - 0.37).abs() < 1e-12, "level = {level}");
    }

    #[test]
    fn a_half_space_with_no_threshold_is_rejected() {
        let text = format!(
            "{MINIMAL}
[event]
kind = half_space
direction_row = 1.0 0.0
direction_row = 0.0 1.0
"
        );
        let err = parse_experiment(&text).unwrap_err();
        assert!(err.contains("level"), "{err}");
    }

    #[test]
    fn the_scaled_schedule_needs_a_positive_constant() {
        let text = "
[model]
mu = 1.0
lambda_row = 1.0
schedule = scaled -2
";
        let err = parse_experiment(text).unwrap_err();
        assert!(err.contains("positive"), "{err}");
        let text = "
[model]
mu = 1.0
lambda_row = 1.0
schedule = scaled 0.5
";
        let exp = parse_experiment(text).unwrap();
        assert_eq!(exp.schedule, ConnectionSchedule::Scaled(0.5));
    }

    #[test]
    fn row_count_mismatches_name_the_expected_shape() {
        let text = "
[model]
mu = 0.5 0.5
lambda_row = 1.0 1.0
";
        let err = parse_experiment(text).unwrap_err();
        assert!(err.contains("exactly 2 'lambda_row' lines"), "{err}");
    }
}
