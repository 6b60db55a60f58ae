//! Run configuration: JSON schema types, parsing with key paths in errors,
//! and validation before any computation.

use serde::{Deserialize, Serialize};

use crate::cocycle::{CocycleSpec, LogModuli, DEFAULT_MAX_CONDITION};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::sft::{ClosingConstants, Point, SftSystem, Symbol};
use crate::snumbers::NormKind;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub system: SystemConfig,
    pub cocycle: CocycleConfig,
    pub analysis: Vec<Command>,
}

fn default_output_dir() -> String {
    "domsplit-out".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub alphabet: usize,
    /// 0/1 transition matrix; the full shift when omitted.
    #[serde(default)]
    pub transitions: Option<Vec<Vec<u8>>>,
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub closing: Option<ClosingConstants>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CocycleConfig {
    pub family: FamilyConfig,
    #[serde(default = "default_norm")]
    pub norm: NormKind,
    #[serde(default)]
    pub injective: Option<bool>,
    #[serde(default)]
    pub holder_alpha: Option<f64>,
}

fn default_norm() -> NormKind {
    NormKind::Euclidean
}

pub type MatrixRows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowEntry {
    pub word: Vec<Symbol>,
    pub matrix: MatrixRows,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilyConfig {
    LocallyConstant {
        radius: usize,
        entries: Vec<WindowEntry>,
    },
    OneStep {
        matrices: Vec<MatrixRows>,
    },
    Constant {
        matrix: MatrixRows,
    },
    ConjugatedDiagonal {
        #[serde(default)]
        log_moduli: Option<Vec<f64>>,
        #[serde(default)]
        log_moduli_per_symbol: Option<Vec<Vec<f64>>>,
        conjugacy_radius: usize,
        conjugacy: Vec<WindowEntry>,
        #[serde(default)]
        max_condition: Option<f64>,
    },
    Diagonal {
        #[serde(default)]
        log_moduli: Option<Vec<f64>>,
        #[serde(default)]
        log_moduli_per_symbol: Option<Vec<Vec<f64>>>,
    },
    WeightedShift {
        dimension: usize,
        scale: Vec<f64>,
        decay: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub points: usize,
    pub n_check: usize,
    #[serde(default = "default_calibration_period")]
    pub calibration_period: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_calibration_period() -> usize {
    6
}

fn default_depth() -> usize {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    EnumeratePeriodic {
        period: usize,
    },
    PeriodicData {
        max_period: usize,
        #[serde(default = "one")]
        k: usize,
        #[serde(default)]
        tol_const: Option<f64>,
    },
    GelfandProfile {
        point: String,
        q_max: usize,
        n_max: usize,
    },
    Spectrum {
        #[serde(default)]
        q_max: Option<usize>,
        n: usize,
        #[serde(default)]
        samples: Option<usize>,
        #[serde(default)]
        points: Option<Vec<String>>,
    },
    Certify {
        k: usize,
        max_period: usize,
        random_samples: usize,
        n_min: usize,
        n_max: usize,
        #[serde(default)]
        tau_accept: Option<f64>,
        #[serde(default)]
        residual_accept: Option<f64>,
        #[serde(default)]
        require_certified: bool,
        #[serde(default)]
        verify: Option<VerifyConfig>,
    },
    Classify {
        narrowness_period: usize,
        certify_period: usize,
        random_samples: usize,
        n_min: usize,
        n_max: usize,
        #[serde(default)]
        zero_tol: Option<f64>,
        #[serde(default)]
        epsilon: Option<f64>,
        #[serde(default)]
        n_check: Option<usize>,
        #[serde(default)]
        verify_points: Option<usize>,
        #[serde(default)]
        calibration_period: Option<usize>,
        #[serde(default)]
        center_n: Option<usize>,
        #[serde(default)]
        center_tol: Option<f64>,
    },
    Shadow {
        point: String,
        n: usize,
    },
    Semicontinuity {
        point: String,
        q: usize,
        periods: Vec<usize>,
    },
    UniformConvergence {
        k: usize,
        max_period: usize,
        n_list: Vec<usize>,
        samples: usize,
    },
}

fn one() -> usize {
    1
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::EnumeratePeriodic { .. } => "enumerate-periodic",
            Command::PeriodicData { .. } => "periodic-data",
            Command::GelfandProfile { .. } => "gelfand-profile",
            Command::Spectrum { .. } => "spectrum",
            Command::Certify { .. } => "certify",
            Command::Classify { .. } => "classify",
            Command::Shadow { .. } => "shadow",
            Command::Semicontinuity { .. } => "semicontinuity",
            Command::UniformConvergence { .. } => "uniform-convergence",
        }
    }

    /// Tolerance-like fields that must be strictly positive.
    fn positive_fields(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        let mut add = |name, v: &Option<f64>| {
            if let Some(v) = v {
                out.push((name, *v));
            }
        };
        match self {
            Command::PeriodicData { tol_const, .. } => add("tol_const", tol_const),
            Command::Certify {
                tau_accept,
                residual_accept,
                ..
            } => {
                add("tau_accept", tau_accept);
                add("residual_accept", residual_accept);
            }
            Command::Classify {
                zero_tol,
                epsilon,
                center_tol,
                ..
            } => {
                add("zero_tol", zero_tol);
                add("epsilon", epsilon);
                add("center_tol", center_tol);
            }
            _ => {}
        }
        out
    }
}

/// Parse configuration text; errors carry the path of the offending key.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path.is_empty() || path == "." { "<root>".to_string() } else { path };
        Error::config(key, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn matrix_from_rows(key: &str, rows: &MatrixRows) -> Result<Matrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::config(key, "matrix must be square and nonempty"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(key, "matrix entries must be finite"));
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn windows(key: &str, entries: &[WindowEntry]) -> Result<Vec<(Vec<Symbol>, Matrix)>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| Ok((e.word.clone(), matrix_from_rows(&format!("{key}[{i}].matrix"), &e.matrix)?)))
        .collect()
}

fn log_moduli(constant: &Option<Vec<f64>>, per_symbol: &Option<Vec<Vec<f64>>>) -> Result<LogModuli> {
    match (constant, per_symbol) {
        (Some(v), None) => Ok(LogModuli::Constant(v.clone())),
        (None, Some(v)) => Ok(LogModuli::PerSymbol(v.clone())),
        _ => Err(Error::config(
            "cocycle.family.log_moduli",
            "give exactly one of log_moduli and log_moduli_per_symbol",
        )),
    }
}

fn parse_point(key: &str, text: &str) -> Result<Point> {
    text.parse::<Point>().map_err(|e| Error::config(key, e.to_string()))
}

/// Attach a key path to library validation errors.
fn at_key<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (i, cmd) in self.analysis.iter().enumerate() {
            for (name, v) in cmd.positive_fields() {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("analysis[{i}].{name}"), format!("must be positive, got {v}")));
                }
            }
        }
        if self.analysis.is_empty() {
            return Err(Error::config("analysis", "at least one command is required"));
        }
        let spec = self.build_spec()?;
        let d = spec.dimension();
        for (i, cmd) in self.analysis.iter().enumerate() {
            let key = |f: &str| format!("analysis[{i}].{f}");
            match cmd {
                Command::PeriodicData { k, .. } | Command::UniformConvergence { k, .. } | Command::Certify { k, .. }
                    if *k == 0 || *k >= d + (matches!(cmd, Command::PeriodicData { .. }) as usize) =>
                {
                    return Err(Error::config(key("k"), format!("index out of range for dimension {d}")));
                }
                Command::Certify { n_min, n_max, .. } | Command::Classify { n_min, n_max, .. } if n_min >= n_max => {
                    return Err(Error::config(key("n_min"), "must be below n_max"));
                }
                Command::GelfandProfile { point, q_max, .. } => {
                    at_key(&key("point"), spec.system().check_point(&parse_point(&key("point"), point)?))?;
                    if *q_max == 0 || *q_max > d {
                        return Err(Error::config(key("q_max"), format!("must lie in 1..={d}")));
                    }
                }
                Command::Shadow { point, .. } => {
                    at_key(&key("point"), spec.system().check_point(&parse_point(&key("point"), point)?))?;
                }
                Command::Semicontinuity { point, q, .. } => {
                    at_key(&key("point"), spec.system().check_point(&parse_point(&key("point"), point)?))?;
                    if *q == 0 || *q > d {
                        return Err(Error::config(key("q"), format!("must lie in 1..={d}")));
                    }
                }
                Command::Spectrum { points: Some(points), .. } => {
                    for (j, p) in points.iter().enumerate() {
                        let k = format!("analysis[{i}].points[{j}]");
                        at_key(&k, spec.system().check_point(&parse_point(&k, p)?))?;
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn build_system(&self) -> Result<SftSystem> {
        let s = &self.system;
        let mut sys = match &s.transitions {
            None => SftSystem::full_shift(s.alphabet),
            Some(t) => {
                if t.len() != s.alphabet {
                    return Err(Error::config("system.transitions", "row count must equal the alphabet size"));
                }
                at_key("system.transitions", SftSystem::new(t.clone()))?
            }
        };
        if let Some(n) = s.n_max {
            sys = sys.with_n_max(n);
        }
        if let Some(c) = s.closing {
            if !(c.c > 0.0 && c.theta > 0.0) {
                return Err(Error::config("system.closing", "constants must be positive"));
            }
            sys = sys.with_closing_constants(c);
        }
        Ok(sys)
    }

    pub fn build_spec(&self) -> Result<CocycleSpec> {
        let sys = self.build_system()?;
        let key = "cocycle.family";
        let spec = match &self.cocycle.family {
            FamilyConfig::LocallyConstant { radius, entries } => {
                at_key(key, CocycleSpec::locally_constant(sys, *radius, windows("cocycle.family.entries", entries)?))?
            }
            FamilyConfig::OneStep { matrices } => {
                let mats = matrices
                    .iter()
                    .enumerate()
                    .map(|(i, m)| matrix_from_rows(&format!("cocycle.family.matrices[{i}]"), m))
                    .collect::<Result<Vec<_>>>()?;
                at_key(key, CocycleSpec::one_step(sys, mats))?
            }
            FamilyConfig::Constant { matrix } => {
                at_key(key, CocycleSpec::constant(sys, matrix_from_rows("cocycle.family.matrix", matrix)?))?
            }
            FamilyConfig::ConjugatedDiagonal {
                log_moduli: lm,
                log_moduli_per_symbol,
                conjugacy_radius,
                conjugacy,
                max_condition,
            } => at_key(
                key,
                CocycleSpec::conjugated_diagonal(
                    sys,
                    log_moduli(lm, log_moduli_per_symbol)?,
                    *conjugacy_radius,
                    windows("cocycle.family.conjugacy", conjugacy)?,
                    max_condition.unwrap_or(DEFAULT_MAX_CONDITION),
                ),
            )?,
            FamilyConfig::Diagonal {
                log_moduli: lm,
                log_moduli_per_symbol,
            } => at_key(key, CocycleSpec::diagonal(sys, log_moduli(lm, log_moduli_per_symbol)?))?,
            FamilyConfig::WeightedShift { dimension, scale, decay } => {
                at_key(key, CocycleSpec::weighted_shift(sys, *dimension, scale.clone(), *decay))?
            }
        };
        let mut spec = spec.with_norm(self.cocycle.norm);
        if let Some(a) = self.cocycle.holder_alpha {
            spec = at_key("cocycle.holder_alpha", spec.with_holder_alpha(a))?;
        }
        if let Some(inj) = self.cocycle.injective {
            spec = at_key("cocycle.injective", spec.with_injective_flag(inj))?;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "seed": 1,
        "system": {"alphabet": 2, "transitions": [[1,1],[1,0]]},
        "cocycle": {"family": {"type": "constant", "matrix": [[2,0],[0,0.5]]}},
        "analysis": [{"command": "enumerate-periodic", "period": 4}]
    }"#;

    fn with_analysis(cmds: &str) -> String {
        BASE.replace(r#"[{"command": "enumerate-periodic", "period": 4}]"#, cmds)
    }

    fn config_key(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn parses_base() {
        let cfg = parse_config(BASE).unwrap();
        assert_eq!(cfg.output_dir, "domsplit-out");
        let spec = cfg.build_spec().unwrap();
        assert_eq!(spec.dimension(), 2);
        assert_eq!(spec.system().trace_power(4), 7);
    }

    #[test]
    fn unknown_keys_are_named() {
        assert_eq!(config_key(&BASE.replace("\"seed\": 1,", "\"seed\": 1, \"colour\": 3,")), "colour");
        let text = with_analysis(r#"[{"command": "enumerate-periodic", "period": 4, "extra": 1}]"#);
        assert!(config_key(&text).starts_with("analysis[0]"));
        let text = BASE.replace(r#""matrix": [[2,0],[0,0.5]]"#, r#""matrix": [[2,0],[0,0.5]], "bogus": 0"#);
        assert!(config_key(&text).starts_with("cocycle.family"));
    }

    #[test]
    fn negative_tolerance_is_named() {
        let text = with_analysis(
            r#"[{"command": "certify", "k": 1, "max_period": 4, "random_samples": 2, "n_min": 1, "n_max": 5, "tau_accept": -0.5}]"#,
        );
        assert_eq!(config_key(&text), "analysis[0].tau_accept");
        let text = with_analysis(
            r#"[{"command": "classify", "narrowness_period": 4, "certify_period": 4, "random_samples": 2, "n_min": 1, "n_max": 5, "zero_tol": -1}]"#,
        );
        assert_eq!(config_key(&text), "analysis[0].zero_tol");
    }

    #[test]
    fn semantic_errors_are_named() {
        let text = with_analysis(r#"[{"command": "shadow", "point": "(0)11(0)", "n": 3}]"#);
        assert_eq!(config_key(&text), "analysis[0].point");
        let text = with_analysis(r#"[{"command": "uniform-convergence", "k": 2, "max_period": 4, "n_list": [4], "samples": 2}]"#);
        assert_eq!(config_key(&text), "analysis[0].k");
        let text = BASE.replace(r#"[[2,0],[0,0.5]]"#, r#"[[2,0],[0]]"#);
        assert_eq!(config_key(&text), "cocycle.family.matrix");
    }
}
