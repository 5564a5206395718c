//! Artifact plumbing: headers, stage files, heat-maps, inspection and the
//! end-to-end pipeline.

pub mod heatmap;
pub mod inspect;
pub mod pipeline;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::population::Population;
use crate::rulelang::{evaluate, parse_expression, Arg, Environment, Pos, RuleError, Signature, Value};
use crate::simulation::Sample;

pub use heatmap::Heatmap;
pub use inspect::inspect_person;
pub use pipeline::{run_pipeline, RunConfig, RunOutputs};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{stage}: cannot read {path}")]
    Read { stage: &'static str, path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{stage}: {msg}")]
    Stage { stage: &'static str, msg: String },
    #[error("invalid time `{0}`")]
    Time(String),
    #[error("invalid run config: {0}")]
    Config(String),
}

impl HarnessError {
    pub fn stage(stage: &'static str, msg: impl std::fmt::Display) -> Self {
        HarnessError::Stage { stage, msg: msg.to_string() }
    }
}

/// Provenance recorded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub seed: u64,
    pub version: String,
    /// Input name to sha256 digest.
    pub inputs: BTreeMap<String, String>,
}

impl Header {
    pub fn new(seed: u64) -> Self {
        Header { seed, version: VERSION.to_string(), inputs: BTreeMap::new() }
    }

    pub fn with_input(mut self, name: impl Into<String>, bytes: &[u8]) -> Self {
        self.inputs.insert(name.into(), digest(bytes));
        self
    }

    /// One-line form for comment headers.
    pub fn line(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("seed={} version={} inputs={}", self.seed, self.version, inputs.join(","))
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize, Deserialize)]
struct Wrapped<T> {
    header: Header,
    data: T,
}

pub fn read_file(stage: &'static str, path: &Path) -> Result<Vec<u8>, HarnessError> {
    fs::read(path).map_err(|source| HarnessError::Read { stage, path: path.to_path_buf(), source })
}

pub fn read_text(stage: &'static str, path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Read { stage, path: path.to_path_buf(), source })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| HarnessError::Write { path: path.to_path_buf(), source })?;
    }
    fs::write(path, bytes).map_err(|source| HarnessError::Write { path: path.to_path_buf(), source })
}

/// Serializes `data` under a header.
pub fn json_artifact<T: Serialize>(header: &Header, data: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Wrapped { header: header.clone(), data }).expect("artifact serializes");
    s.push('\n');
    s
}

/// Parses a stage file, with or without a header.
pub fn parse_artifact<T: DeserializeOwned>(stage: &'static str, text: &str) -> Result<(Option<Header>, T), HarnessError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| HarnessError::stage(stage, e))?;
    let wrapped = value.as_object().is_some_and(|o| o.len() == 2 && o.contains_key("header") && o.contains_key("data"));
    if wrapped {
        let w: Wrapped<T> = serde_json::from_value(value).map_err(|e| HarnessError::stage(stage, e))?;
        Ok((Some(w.header), w.data))
    } else {
        let data = serde_json::from_value(value).map_err(|e| HarnessError::stage(stage, e))?;
        Ok((None, data))
    }
}

/// Trajectory stream: a header line, then one sample per line.
pub fn trajectories_jsonl(header: &Header, samples: &[Sample]) -> String {
    let mut out = serde_json::to_string(&serde_json::json!({ "header": header })).unwrap();
    out.push('\n');
    for s in samples {
        out.push_str(&serde_json::to_string(s).unwrap());
        out.push('\n');
    }
    out
}

pub fn parse_trajectories(text: &str) -> Result<Vec<Sample>, HarnessError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.starts_with("{\"header\"")) {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| HarnessError::stage("trajectories", format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

struct Constants;

impl Environment for Constants {
    fn variable(&self, _: &str) -> Option<Value> {
        None
    }

    fn signature(&self, _: &str) -> Option<Signature> {
        None
    }

    fn call(&mut self, name: &str, _: Vec<Arg<'_>>, pos: Pos) -> Result<Value, RuleError> {
        Err(RuleError::UnknownFunction { name: name.to_string(), pos })
    }
}

/// Parses a time of day such as `6h`, `7h + 30m` or `3600`.
pub fn parse_time(text: &str) -> Result<f64, HarnessError> {
    let bad = || HarnessError::Time(text.to_string());
    let e = parse_expression(text).map_err(|_| bad())?;
    match evaluate(&e, &mut Constants) {
        Ok(Value::Number(v)) if v.is_finite() => Ok(v),
        _ => Err(bad()),
    }
}

/// Half-open age range in years.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgeBand {
    pub lo: u32,
    pub hi: u32,
}

impl AgeBand {
    pub fn contains(&self, age: u32) -> bool {
        self.lo <= age && age < self.hi
    }

    /// Parses `lo-hi`.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let bad = || HarnessError::Config(format!("age band `{text}` must look like 18-65"));
        let (a, b) = text.split_once('-').ok_or_else(bad)?;
        let lo = a.trim().parse().map_err(|_| bad())?;
        let hi = b.trim().parse().map_err(|_| bad())?;
        if lo >= hi {
            return Err(bad());
        }
        Ok(AgeBand { lo, hi })
    }
}

/// Samples of persons whose age falls in `band`.
pub fn filter_by_age(samples: &[Sample], population: &Population, band: AgeBand) -> Vec<Sample> {
    samples.iter().filter(|s| population.person(s.person).is_some_and(|p| band.contains(p.age))).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn times_parse() {
        assert_eq!(parse_time("6h").unwrap(), 21600.0);
        assert_eq!(parse_time("7h + 30m").unwrap(), 27000.0);
        assert_eq!(parse_time("90").unwrap(), 90.0);
        assert!(parse_time("noon").is_err());
        assert!(parse_time("\"x\"").is_err());
    }

    #[test]
    fn artifacts_round_trip_with_and_without_header() {
        let h = Header::new(3).with_input("rules", b"abc");
        assert_eq!(h.inputs["rules"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let text = json_artifact(&h, &vec![1, 2, 3]);
        let (got, data): (Option<Header>, Vec<i32>) = parse_artifact("test", &text).unwrap();
        assert_eq!(got, Some(h));
        assert_eq!(data, [1, 2, 3]);
        let (got, data): (Option<Header>, Vec<i32>) = parse_artifact("test", "[4]").unwrap();
        assert!(got.is_none());
        assert_eq!(data, [4]);
        let err = parse_artifact::<Vec<i32>>("population", "{").unwrap_err();
        assert!(err.to_string().starts_with("population:"));
    }

    #[test]
    fn age_bands() {
        let b = AgeBand::parse("18-65").unwrap();
        assert!(b.contains(18) && b.contains(64) && !b.contains(65));
        assert!(AgeBand::parse("65-18").is_err());
        assert!(AgeBand::parse("x").is_err());
    }

    #[test]
    fn trajectory_stream_round_trips() {
        let s = Sample { tick: 4, time: 1.0, person: 2, x: 0.5, y: -1.0, state: "walking".into(), task: "go_to_building".into() };
        let text = trajectories_jsonl(&Header::new(1), std::slice::from_ref(&s));
        assert!(text.lines().nth(1).unwrap().contains("\"personId\":2"));
        assert_eq!(parse_trajectories(&text).unwrap(), [s]);
    }
}
