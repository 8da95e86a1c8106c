//! Experiment configuration files: flat key=value lines under
//! [bench], [intermediate], [teacher], [student], [distill], [sweep]
//! sections. Unknown keys are rejected; defaults are materialized so a
//! serialized config always carries the full resolved key set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::SoftLoss;
use crate::pipeline::{LaunderingConfig, SweepAxis};
use crate::synth::CorruptionMode;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolvedConfig {
    pub laundering: LaunderingConfig,
    pub sweep_axis: Option<SweepAxis>,
}

const SECTIONS: [&str; 6] = [
    "bench",
    "intermediate",
    "teacher",
    "student",
    "distill",
    "sweep",
];

impl ResolvedConfig {
    pub fn load(path: &Path) -> Result<ResolvedConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<ResolvedConfig> {
        let mut pairs: BTreeMap<String, (String, usize)> = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if !SECTIONS.contains(&name) {
                    return Err(Error::Config(format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected key=value, got '{line}'"),
                });
            };
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "key '{}' appears before any section header",
                    key.trim()
                )));
            }
            let full = format!("{section}.{}", key.trim());
            if pairs
                .insert(full.clone(), (value.trim().to_string(), lineno + 1))
                .is_some()
            {
                return Err(Error::Config(format!("duplicate key [{full}]")));
            }
        }
        Self::from_pairs(&pairs)
    }

    fn from_pairs(pairs: &BTreeMap<String, (String, usize)>) -> Result<ResolvedConfig> {
        let mut cfg = LaunderingConfig::default();
        let mut axis_name: Option<String> = None;
        let mut axis_values: Option<String> = None;

        for (full_key, (value, _)) in pairs {
            let (section, key) = full_key.split_once('.').expect("qualified key");
            match (section, key) {
                ("bench", "concepts") => {
                    cfg.bench_spec.concept_count = parse_usize_min(full_key, value, 1)?
                }
                ("bench", "attributes") => {
                    cfg.bench_spec.attributes_per_concept = parse_usize_min(full_key, value, 1)?
                }
                ("bench", "noise_pool") => {
                    cfg.bench_spec.noise_token_pool = parse_usize_min(full_key, value, 0)?
                }
                ("bench", "noise_len") => {
                    cfg.bench_spec.question_noise_len = parse_usize_min(full_key, value, 0)?
                }
                ("bench", "templates") => {
                    cfg.bench_spec.template_count = parse_usize_min(full_key, value, 1)?
                }
                ("bench", "choices") => {
                    let n = parse_usize_min(full_key, value, 2)?;
                    cfg.bench_spec.n_choices = n;
                    cfg.teacher_model.n_choices = n;
                    cfg.student_model.n_choices = n;
                }
                ("bench", "size") => cfg.bench_size = parse_usize_min(full_key, value, 1)?,
                ("intermediate", "size") => {
                    cfg.intermediate_size = parse_usize_min(full_key, value, 1)?
                }
                ("intermediate", "rho") => {
                    cfg.align.rho = parse_f64_range(full_key, value, 0.0, 1.0)?
                }
                ("intermediate", "template_overlap") => {
                    cfg.align.template_overlap = parse_f64_range(full_key, value, 0.0, 1.0)?
                }
                ("intermediate", "corruption") => {
                    cfg.corruption = if value == "none" {
                        None
                    } else {
                        Some(CorruptionMode::from_name(value).map_err(|_| {
                            Error::Config(format!(
                                "[{full_key}] must be none or a corruption mode name, got '{value}'"
                            ))
                        })?)
                    }
                }
                ("teacher", "dim") => {
                    cfg.teacher_model.embed_dim = parse_usize_min(full_key, value, 1)?
                }
                ("teacher", "hidden") => {
                    cfg.teacher_model.hidden_dim = parse_usize_min(full_key, value, 1)?
                }
                ("teacher", "epochs") => {
                    cfg.teacher_train.epochs = parse_usize_min(full_key, value, 1)?
                }
                ("teacher", "batch") => {
                    cfg.teacher_train.batch_size = parse_usize_min(full_key, value, 1)?
                }
                ("teacher", "lr") => {
                    cfg.teacher_train.learning_rate =
                        parse_f64_range(full_key, value, 0.0, f64::INFINITY)?
                }
                ("teacher", "wd") => {
                    cfg.teacher_train.weight_decay =
                        parse_f64_range(full_key, value, 0.0, f64::INFINITY)?
                }
                ("student", "dim") => {
                    cfg.student_model.embed_dim = parse_usize_min(full_key, value, 1)?
                }
                ("student", "hidden") => {
                    cfg.student_model.hidden_dim = parse_usize_min(full_key, value, 1)?
                }
                ("distill", "alpha") => {
                    cfg.distill.alpha = parse_f64_range(full_key, value, 0.0, 1.0)?
                }
                ("distill", "temperature") => {
                    let t = parse_f64_range(full_key, value, 0.0, f64::INFINITY)?;
                    if t == 0.0 {
                        return Err(Error::Config(format!("[{full_key}] must be > 0, got {t}")));
                    }
                    cfg.distill.temperature = t;
                }
                ("distill", "loss") => {
                    cfg.distill.soft_loss = SoftLoss::from_name(value)
                        .map_err(|_| Error::Config(format!("[{full_key}] must be mse or kld")))?
                }
                ("distill", "mse_use_temperature") => {
                    cfg.distill.mse_use_temperature = parse_bool(full_key, value)?
                }
                ("distill", "epochs") => cfg.distill.epochs = parse_usize_min(full_key, value, 1)?,
                ("distill", "batch") => {
                    cfg.distill.batch_size = parse_usize_min(full_key, value, 1)?
                }
                ("distill", "lr") => {
                    cfg.distill.learning_rate =
                        parse_f64_range(full_key, value, 0.0, f64::INFINITY)?
                }
                ("distill", "wd") => {
                    cfg.distill.weight_decay = parse_f64_range(full_key, value, 0.0, f64::INFINITY)?
                }
                ("distill", "max_len") => {
                    let m = parse_usize_min(full_key, value, 4)?;
                    cfg.teacher_model.max_len = m;
                    cfg.student_model.max_len = m;
                }
                ("sweep", "seeds") => {
                    cfg.seeds = value
                        .split(',')
                        .map(|s| {
                            s.trim().parse::<u64>().map_err(|_| {
                                Error::Config(format!("[{full_key}] has a bad seed '{s}'"))
                            })
                        })
                        .collect::<Result<Vec<u64>>>()?;
                }
                ("sweep", "axis") => {
                    axis_name = if value == "none" {
                        None
                    } else {
                        Some(value.to_string())
                    }
                }
                ("sweep", "values") => {
                    axis_values = if value == "none" {
                        None
                    } else {
                        Some(value.to_string())
                    }
                }
                _ => return Err(Error::Config(format!("unknown key [{full_key}]"))),
            }
        }

        let sweep_axis = parse_axis(axis_name.as_deref(), axis_values.as_deref())?;
        cfg.validate()?;
        Ok(ResolvedConfig {
            laundering: cfg,
            sweep_axis,
        })
    }

    /// Canonical text with every key materialized; parses back to an
    /// equal config.
    pub fn serialize(&self) -> String {
        let c = &self.laundering;
        let mut s = String::new();
        let _ = writeln!(s, "[bench]");
        let _ = writeln!(s, "concepts = {}", c.bench_spec.concept_count);
        let _ = writeln!(s, "attributes = {}", c.bench_spec.attributes_per_concept);
        let _ = writeln!(s, "noise_pool = {}", c.bench_spec.noise_token_pool);
        let _ = writeln!(s, "noise_len = {}", c.bench_spec.question_noise_len);
        let _ = writeln!(s, "templates = {}", c.bench_spec.template_count);
        let _ = writeln!(s, "choices = {}", c.bench_spec.n_choices);
        let _ = writeln!(s, "size = {}", c.bench_size);
        let _ = writeln!(s, "\n[intermediate]");
        let _ = writeln!(s, "size = {}", c.intermediate_size);
        let _ = writeln!(s, "rho = {}", c.align.rho);
        let _ = writeln!(s, "template_overlap = {}", c.align.template_overlap);
        let _ = writeln!(
            s,
            "corruption = {}",
            c.corruption.as_ref().map_or("none", |m| m.name())
        );
        let _ = writeln!(s, "\n[teacher]");
        let _ = writeln!(s, "dim = {}", c.teacher_model.embed_dim);
        let _ = writeln!(s, "hidden = {}", c.teacher_model.hidden_dim);
        let _ = writeln!(s, "epochs = {}", c.teacher_train.epochs);
        let _ = writeln!(s, "batch = {}", c.teacher_train.batch_size);
        let _ = writeln!(s, "lr = {}", c.teacher_train.learning_rate);
        let _ = writeln!(s, "wd = {}", c.teacher_train.weight_decay);
        let _ = writeln!(s, "\n[student]");
        let _ = writeln!(s, "dim = {}", c.student_model.embed_dim);
        let _ = writeln!(s, "hidden = {}", c.student_model.hidden_dim);
        let _ = writeln!(s, "\n[distill]");
        let _ = writeln!(s, "alpha = {}", c.distill.alpha);
        let _ = writeln!(s, "temperature = {}", c.distill.temperature);
        let _ = writeln!(s, "loss = {}", c.distill.soft_loss);
        let _ = writeln!(s, "mse_use_temperature = {}", c.distill.mse_use_temperature);
        let _ = writeln!(s, "epochs = {}", c.distill.epochs);
        let _ = writeln!(s, "batch = {}", c.distill.batch_size);
        let _ = writeln!(s, "lr = {}", c.distill.learning_rate);
        let _ = writeln!(s, "wd = {}", c.distill.weight_decay);
        let _ = writeln!(s, "max_len = {}", c.student_model.max_len);
        let _ = writeln!(s, "\n[sweep]");
        let _ = writeln!(
            s,
            "seeds = {}",
            c.seeds
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        match &self.sweep_axis {
            None => {
                let _ = writeln!(s, "axis = none");
                let _ = writeln!(s, "values = none");
            }
            Some(SweepAxis::Alpha(v)) => {
                let _ = writeln!(s, "axis = alpha");
                let _ = writeln!(s, "values = {}", join_f64(v));
            }
            Some(SweepAxis::Size(v)) => {
                let _ = writeln!(s, "axis = size");
                let _ = writeln!(
                    s,
                    "values = {}",
                    v.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                );
            }
            Some(SweepAxis::Loss(v)) => {
                let _ = writeln!(s, "axis = loss");
                let _ = writeln!(
                    s,
                    "values = {}",
                    v.iter()
                        .map(|x| x.name().to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                );
            }
        }
        s
    }
}

pub fn parse_axis(axis: Option<&str>, values: Option<&str>) -> Result<Option<SweepAxis>> {
    match (axis, values) {
        (None, None) => Ok(None),
        (Some(_), None) => Err(Error::Config(
            "[sweep].axis set without [sweep].values".into(),
        )),
        (None, Some(_)) => Err(Error::Config(
            "[sweep].values set without [sweep].axis".into(),
        )),
        (Some(axis), Some(values)) => {
            let parts: Vec<&str> = values.split(',').map(str::trim).collect();
            let axis = match axis {
                "alpha" => SweepAxis::Alpha(
                    parts
                        .iter()
                        .map(|p| {
                            p.parse::<f64>().map_err(|_| {
                                Error::Config(format!("[sweep].values has a bad alpha '{p}'"))
                            })
                        })
                        .collect::<Result<_>>()?,
                ),
                "size" => SweepAxis::Size(
                    parts
                        .iter()
                        .map(|p| {
                            p.parse::<usize>().map_err(|_| {
                                Error::Config(format!("[sweep].values has a bad size '{p}'"))
                            })
                        })
                        .collect::<Result<_>>()?,
                ),
                "loss" => SweepAxis::Loss(
                    parts
                        .iter()
                        .map(|p| SoftLoss::from_name(p))
                        .collect::<Result<_>>()?,
                ),
                other => {
                    return Err(Error::Config(format!(
                        "[sweep].axis must be alpha, size, or loss, got '{other}'"
                    )))
                }
            };
            Ok(Some(axis))
        }
    }
}

fn join_f64(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_usize_min(key: &str, value: &str, min: usize) -> Result<usize> {
    let v: usize = value
        .parse()
        .map_err(|_| Error::Config(format!("[{key}] must be an integer, got '{value}'")))?;
    if v < min {
        return Err(Error::Config(format!(
            "[{key}] must be at least {min}, got {v}"
        )));
    }
    Ok(v)
}

fn parse_f64_range(key: &str, value: &str, lo: f64, hi: f64) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| Error::Config(format!("[{key}] must be a number, got '{value}'")))?;
    if !v.is_finite() || v < lo || v > hi {
        let bound = if hi.is_finite() {
            format!("[{lo},{hi}]")
        } else {
            format!("[{lo},inf)")
        };
        return Err(Error::Config(format!(
            "[{key}] must be in {bound}, got {value}"
        )));
    }
    Ok(v)
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "[{key}] must be true or false, got '{value}'"
        ))),
    }
}

/// Snapshot that makes a run exactly reproducible: the resolved config
/// plus artifact paths, tool version, and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: String,
    pub artifacts: BTreeMap<String, String>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

impl RunManifest {
    pub fn new(config: &ResolvedConfig) -> RunManifest {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.serialize(),
            artifacts: BTreeMap::new(),
            started_unix_s: unix_now(),
            finished_unix_s: 0,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix_s = unix_now();
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("bad manifest: {e}")))
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
