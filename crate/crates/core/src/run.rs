//! Executes a validated [`RunConfig`]: runs the analysis commands in order and
//! assembles the versioned report and CSV series.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::certifier::{
    certify, classify, fit_domination_constant, reconstruct_splitting, sample_points, verify_domination, CertifierOptions,
    CertifyParams, ClassifyOptions, Verdict,
};
use crate::cocycle::CocycleSpec;
use crate::config::{Command, RunConfig};
use crate::error::{Error, Result};
use crate::lyapunov::{random_points, semicontinuity_probe, spectrum_estimate, uniform_convergence_profile, PointSource};
use crate::periodic::{scan_narrowness, scan_narrowness_with};
use crate::report::{to_json_string, to_value, write_file, CsvCell, CsvTable, FORMAT_VERSION};
use crate::sft::Point;
use crate::snumbers::gelfand_profile;

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Value,
    pub csvs: Vec<CsvTable>,
    /// Some command demanded an outcome the analysis did not deliver.
    pub rejected: bool,
}

impl RunOutput {
    pub fn report_text(&self) -> String {
        to_json_string(&self.report)
    }

    /// Write `report.json` and every CSV into `dir`, creating it if needed.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_file(&dir.join("report.json"), &self.report_text())?;
        for t in &self.csvs {
            write_file(&dir.join(format!("{}.csv", t.name)), &t.to_csv_string()?)?;
        }
        Ok(())
    }
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct CommandResult {
    output: Value,
    csvs: Vec<CsvTable>,
    rejected: bool,
}

impl CommandResult {
    fn plain<T: Serialize>(v: &T) -> Result<Self> {
        Ok(CommandResult {
            output: to_value(v)?,
            csvs: Vec::new(),
            rejected: false,
        })
    }
}

fn point(text: &str) -> Result<Point> {
    text.parse()
}

fn int(v: usize) -> CsvCell {
    CsvCell::Int(v as i64)
}

/// Execute every command of `cfg`; `config_bytes` is hashed into the report.
pub fn execute(cfg: &RunConfig, config_bytes: &[u8]) -> Result<RunOutput> {
    let spec = cfg.build_spec()?;
    let mut results = Vec::with_capacity(cfg.analysis.len());
    let mut csvs = Vec::new();
    let mut rejected = false;
    for (i, cmd) in cfg.analysis.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        let mut r = run_command(&spec, cmd, seed)?;
        let mut names = Vec::new();
        for t in &mut r.csvs {
            t.name = format!("{i:02}_{}", t.name);
            names.push(Value::String(format!("{}.csv", t.name)));
        }
        rejected |= r.rejected;
        let mut entry = Map::new();
        entry.insert("command".into(), Value::String(cmd.name().into()));
        entry.insert("index".into(), Value::from(i));
        entry.insert("output".into(), r.output);
        entry.insert("csv".into(), Value::Array(names));
        entry.insert("rejected".into(), Value::Bool(r.rejected));
        results.push(Value::Object(entry));
        csvs.extend(r.csvs);
    }
    let report = json!({
        "format_version": FORMAT_VERSION,
        "library_version": LIBRARY_VERSION,
        "config_hash": config_hash(config_bytes),
        "seed": cfg.seed,
        "rejected": rejected,
        "results": results,
    });
    Ok(RunOutput { report, csvs, rejected })
}

fn run_command(spec: &CocycleSpec, cmd: &Command, seed: u64) -> Result<CommandResult> {
    let sys = spec.system();
    match cmd {
        Command::EnumeratePeriodic { period } => {
            let fixed = sys.enumerate_periodic(*period)?;
            let orbits = sys.enumerate_orbits(*period)?;
            let prime = sys.enumerate_prime_orbits(*period)?;
            CommandResult::plain(&json!({
                "period": period,
                "trace": sys.trace_power(*period).to_string(),
                "fixed_point_count": fixed.len(),
                "fixed_points": fixed.iter().map(|o| o.label()).collect::<Vec<_>>(),
                "orbits": orbits.iter().map(|o| o.label()).collect::<Vec<_>>(),
                "prime_orbits": prime.iter().map(|o| o.label()).collect::<Vec<_>>(),
            }))
        }
        Command::PeriodicData { max_period, k, tol_const } => {
            let report = match tol_const {
                Some(t) => scan_narrowness_with(spec, *k, *max_period, *t)?,
                None => scan_narrowness(spec, *k, *max_period)?,
            };
            let mut fixed = BTreeMap::new();
            for n in 1..=*max_period {
                let pts: Vec<String> = sys.enumerate_periodic(n)?.iter().map(|o| o.label()).collect();
                fixed.insert(n, pts);
            }
            let mut t = CsvTable::new("periodic_data", &["orbit", "n", "q", "value"]);
            for d in &report.data {
                for (q, v) in d.exponents.iter().enumerate() {
                    t.push(vec![CsvCell::Text(d.orbit.clone()), int(d.period), int(q + 1), CsvCell::Float(*v)]);
                }
            }
            Ok(CommandResult {
                output: to_value(&json!({ "fixed_points": fixed, "narrowness": to_value(&report)? }))?,
                csvs: vec![t],
                rejected: false,
            })
        }
        Command::GelfandProfile { point: p, q_max, n_max } => {
            let x = point(p)?;
            let prof = gelfand_profile(spec, &x, *q_max, *n_max)?;
            let mut t = CsvTable::new("gelfand_profile", &["n", "q", "value"]);
            for n in 0..=*n_max {
                for q in 1..=*q_max {
                    t.push(vec![int(n), int(q), CsvCell::Float(prof.log_c(q, n))]);
                }
            }
            Ok(CommandResult {
                output: to_value(&prof)?,
                csvs: vec![t],
                rejected: false,
            })
        }
        Command::Spectrum { q_max, n, samples, points } => {
            let source = match points {
                Some(p) => PointSource::Points(p.iter().map(|s| point(s)).collect::<Result<_>>()?),
                None => PointSource::Random {
                    count: samples.unwrap_or(100),
                },
            };
            let q_max = q_max.unwrap_or(spec.dimension());
            let s = spectrum_estimate(spec, &source, q_max, *n, seed)?;
            let mut t = CsvTable::new("spectrum", &["n", "q", "value"]);
            for (q, z) in s.zeta.iter().enumerate() {
                t.push(vec![int(*n), int(q + 1), CsvCell::Float(*z)]);
            }
            Ok(CommandResult {
                output: to_value(&s)?,
                csvs: vec![t],
                rejected: false,
            })
        }
        Command::Certify {
            k,
            max_period,
            random_samples,
            n_min,
            n_max,
            tau_accept,
            residual_accept,
            require_certified,
            verify,
        } => {
            let defaults = CertifierOptions::default();
            let params = CertifyParams {
                k: *k,
                max_period: *max_period,
                random_samples: *random_samples,
                n_min: *n_min,
                n_max: *n_max,
                seed,
                options: CertifierOptions {
                    tau_accept: tau_accept.unwrap_or(defaults.tau_accept),
                    res_accept: residual_accept.unwrap_or(defaults.res_accept),
                    ..defaults
                },
            };
            let cert = certify(spec, &params)?;
            let mut t = CsvTable::new(format!("certify_k{k}"), &["n", "q", "value"]);
            for e in &cert.envelope {
                t.push(vec![int(e.n), int(*k), CsvCell::Float(e.value)]);
            }
            let verification = match verify {
                Some(v) if cert.verdict == Verdict::Certified => {
                    let calib: Vec<Point> = sample_points(spec, v.calibration_period, 0, seed)?
                        .into_iter()
                        .map(|s| s.point)
                        .collect();
                    let c = fit_domination_constant(spec, &calib, *k, cert.tau_fit, v.n_check)?;
                    let samples = random_points(spec, v.points, seed ^ 0x9e37_79b9)
                        .iter()
                        .map(|x| reconstruct_splitting(spec, x, *k, v.depth))
                        .collect::<Result<Vec<_>>>()?;
                    Some(verify_domination(spec, &samples, c, cert.tau_fit, v.n_check, seed)?)
                }
                _ => None,
            };
            let rejected = *require_certified && cert.verdict != Verdict::Certified;
            Ok(CommandResult {
                output: to_value(&json!({
                    "certificate": to_value(&cert)?,
                    "verification": to_value(&verification)?,
                    "required_certified": require_certified,
                }))?,
                csvs: vec![t],
                rejected,
            })
        }
        Command::Classify {
            narrowness_period,
            certify_period,
            random_samples,
            n_min,
            n_max,
            zero_tol,
            epsilon,
            n_check,
            verify_points,
            calibration_period,
            center_n,
            center_tol,
        } => {
            let d = spec.dimension();
            let narrowness = scan_narrowness(spec, 1, *narrowness_period)?;
            let mut certs = BTreeMap::new();
            for k in 1..d {
                let params = CertifyParams {
                    k,
                    max_period: *certify_period,
                    random_samples: *random_samples,
                    n_min: *n_min,
                    n_max: *n_max,
                    seed,
                    options: CertifierOptions::default(),
                };
                certs.insert(k, vec![certify(spec, &params)?]);
            }
            let defaults = ClassifyOptions::default();
            let opts = ClassifyOptions {
                zero_tol: zero_tol.unwrap_or(defaults.zero_tol),
                epsilon: epsilon.unwrap_or(defaults.epsilon),
                n_check: n_check.unwrap_or(defaults.n_check),
                verify_points: verify_points.unwrap_or(defaults.verify_points),
                calibration_period: calibration_period.unwrap_or(defaults.calibration_period),
                center_n: center_n.unwrap_or(defaults.center_n),
                center_tol: center_tol.unwrap_or(defaults.center_tol),
                seed,
            };
            let cl = classify(spec, &narrowness, &certs, &opts)?;
            let summary: BTreeMap<usize, Value> = certs
                .iter()
                .map(|(k, c)| {
                    (
                        *k,
                        json!({
                            "verdict": to_value(&c[0].verdict).unwrap_or(Value::Null),
                            "tau_fit": to_value(&c[0].tau_fit).unwrap_or(Value::Null),
                            "residual": to_value(&c[0].residual).unwrap_or(Value::Null),
                        }),
                    )
                })
                .collect();
            CommandResult::plain(&json!({
                "classification": to_value(&cl)?,
                "certificates": summary,
            }))
        }
        Command::Shadow { point: p, n } => {
            let x = point(p)?;
            let (orbit, j, report) = sys.close_orbit(&x, *n)?;
            let mut out = to_value(&report)?;
            if let Value::Object(m) = &mut out {
                m.insert("orbit".into(), Value::String(orbit.label()));
                m.insert("period".into(), Value::from(orbit.period));
                m.insert("connector_len".into(), Value::from(j));
            }
            Ok(CommandResult {
                output: out,
                csvs: Vec::new(),
                rejected: false,
            })
        }
        Command::Semicontinuity { point: p, q, periods } => {
            let x = point(p)?;
            let r = semicontinuity_probe(spec, &x, *q, periods)?;
            let mut t = CsvTable::new("semicontinuity", &["n", "q", "value"]);
            for e in &r.entries {
                t.push(vec![int(e.n), int(*q), CsvCell::Float(e.value)]);
            }
            Ok(CommandResult {
                output: to_value(&r)?,
                csvs: vec![t],
                rejected: false,
            })
        }
        Command::UniformConvergence {
            k,
            max_period,
            n_list,
            samples,
        } => {
            let narrowness = scan_narrowness(spec, *k, *max_period)?;
            let prof = uniform_convergence_profile(spec, &narrowness, *k, n_list, *samples, seed)?;
            let mut t = CsvTable::new("uniform_convergence", &["n", "q", "e_n"]);
            for e in &prof.entries {
                t.push(vec![int(e.n), int(*k), CsvCell::Float(e.e_n)]);
            }
            Ok(CommandResult {
                output: to_value(&prof)?,
                csvs: vec![t],
                rejected: false,
            })
        }
    }
}

/// Read, validate and execute a configuration file.
pub fn run_file(path: &Path) -> Result<(RunConfig, RunOutput)> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| Error::config("<root>", format!("not utf-8: {e}")))?;
    let cfg = crate::config::parse_config(text)?;
    let out = execute(&cfg, &bytes)?;
    Ok((cfg, out))
}
