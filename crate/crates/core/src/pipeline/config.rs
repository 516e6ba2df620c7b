use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::analysis::RegionSelect;
use crate::bnp::HdpHmmHyper;
use crate::codec::TrainConfig;
use crate::domain::{FieldParams, RoiConfig};
use crate::error::{Error, Result};
use crate::ingest::ColumnMap;
use crate::synth::TrafficConfig;

/// Every setting of a pipeline run, loaded from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub io: IoConfig,
    #[serde(default)]
    pub synth: TrafficConfig,
    #[serde(default)]
    pub roi: RoiConfig,
    #[serde(default)]
    pub field: FieldParams,
    #[serde(default)]
    pub codec: CodecConfig,
    #[serde(default)]
    pub bnp: BnpConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    /// Directory receiving every artifact.
    pub out_dir: PathBuf,
    /// Directory of track CSVs; `<out_dir>/tracks` (filled by `synth`) when absent.
    pub tracks_dir: Option<PathBuf>,
    pub columns: ColumnMap,
    /// Half-width of the lane-change region, seconds.
    pub region_buffer_s: f64,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            tracks_dir: None,
            columns: ColumnMap::default(),
            region_buffer_s: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    #[default]
    Cae,
    Linear,
}

/// Encoder choice plus the training settings, all keys at one level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct CodecConfig {
    pub encoder: EncoderKind,
    pub train: TrainConfig,
}

/// Sampler hyperparameters plus the sweep count, all keys at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "Value")]
pub struct BnpConfig {
    pub iterations: usize,
    pub hyper: HdpHmmHyper,
}

impl Default for BnpConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            hyper: HdpHmmHyper::default(),
        }
    }
}

fn take_key<T: serde::de::DeserializeOwned>(
    map: &mut Map<String, Value>,
    section: &str,
    key: &str,
) -> Result<Option<T>, String> {
    map.remove(key)
        .map(|v| serde_json::from_value(v).map_err(|e| format!("{section}.{key}: {e}")))
        .transpose()
}

fn into_object(value: Value, section: &str) -> Result<Map<String, Value>, String> {
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(format!("{section} must be an object")),
    }
}

fn with_key<T: Serialize>(rest: T, key: &str, value: Value) -> Value {
    let mut v = serde_json::to_value(rest).expect("plain struct serializes");
    if let Value::Object(map) = &mut v {
        map.insert(key.to_string(), value);
    }
    v
}

impl TryFrom<Value> for CodecConfig {
    type Error = String;

    fn try_from(value: Value) -> Result<Self, String> {
        let mut map = into_object(value, "codec")?;
        let encoder = take_key(&mut map, "codec", "encoder")?.unwrap_or_default();
        let train = serde_json::from_value(Value::Object(map)).map_err(|e| format!("codec: {e}"))?;
        Ok(Self { encoder, train })
    }
}

impl From<CodecConfig> for Value {
    fn from(c: CodecConfig) -> Self {
        with_key(
            c.train,
            "encoder",
            serde_json::to_value(c.encoder).expect("enum serializes"),
        )
    }
}

impl TryFrom<Value> for BnpConfig {
    type Error = String;

    fn try_from(value: Value) -> Result<Self, String> {
        let mut map = into_object(value, "bnp")?;
        let iterations = take_key(&mut map, "bnp", "iterations")?.unwrap_or(500);
        let hyper = serde_json::from_value(Value::Object(map)).map_err(|e| format!("bnp: {e}"))?;
        Ok(Self { iterations, hyper })
    }
}

impl From<BnpConfig> for Value {
    fn from(c: BnpConfig) -> Self {
        with_key(c.hyper, "iterations", Value::from(c.iterations))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Regions that get transition matrices, each with and without self-transitions.
    pub regions: Vec<RegionSelect>,
    /// Data fractions of the pattern-count curve; empty skips the curve.
    pub fractions: Vec<f64>,
    /// Chain seeds of the pattern-count curve.
    pub seeds: Vec<u64>,
    /// Sweeps per curve chain; `bnp.iterations` when absent.
    pub curve_iterations: Option<usize>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            regions: vec![
                RegionSelect::All,
                RegionSelect::Pre,
                RegionSelect::LaneChange,
                RegionSelect::Post,
            ],
            fractions: vec![0.05, 0.25, 1.0],
            seeds: vec![1, 2, 3, 4, 5],
            curve_iterations: None,
        }
    }
}

impl PipelineConfig {
    /// A config with every default and the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            io: IoConfig::default(),
            synth: TrafficConfig::default(),
            roi: RoiConfig::default(),
            field: FieldParams::default(),
            codec: CodecConfig::default(),
            bnp: BnpConfig::default(),
            analysis: AnalysisConfig::default(),
            seed,
        }
    }

    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("malformed config: {e}")))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        serde_json::from_value(value).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Reads `path` and applies `--set` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::PathNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_json(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.roi.validate()?;
        self.field.validate()?;
        self.io.columns.validate()?;
        self.codec.train.validate()?;
        self.bnp.hyper.validate()?;
        if !(self.io.region_buffer_s > 0.0) {
            return Err(Error::InvalidConfig("io.region_buffer_s must be positive".into()));
        }
        if self.bnp.iterations == 0 || self.analysis.curve_iterations == Some(0) {
            return Err(Error::InvalidConfig("sweep counts must be positive".into()));
        }
        if self.analysis.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::InvalidConfig("analysis.fractions must lie in (0, 1]".into()));
        }
        if !self.analysis.fractions.is_empty() && self.analysis.seeds.is_empty() {
            return Err(Error::InvalidConfig("analysis.seeds must not be empty".into()));
        }
        Ok(())
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Applies one `dotted.path=value` override. The value is parsed as JSON
/// and taken as a plain string when that fails.
pub fn apply_override(config: &mut Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override `{spec}` is not of the form key.path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::InvalidConfig(format!("override `{spec}` has an empty key")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = config;
    for (i, key) in keys.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("`{}` is not a section", keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("keys is nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = PipelineConfig::from_json(r#"{"seed": 3}"#, &[]).unwrap();
        assert_eq!(c, PipelineConfig::with_seed(3));
        c.validate().unwrap();
    }

    #[test]
    fn seed_is_required() {
        assert!(PipelineConfig::from_json("{}", &[]).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{"seed": 1, "extra": 1}"#,
            r#"{"seed": 1, "roi": {"d_up": 1}}"#,
            r#"{"seed": 1, "bnp": {"lambda": 1}}"#,
            r#"{"seed": 1, "codec": {"encoder": "cae", "depth": 3}}"#,
        ] {
            assert!(
                matches!(PipelineConfig::from_json(text, &[]), Err(Error::InvalidConfig(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn overrides_use_dotted_paths() {
        let c = PipelineConfig::from_json(
            r#"{"seed": 1}"#,
            &[
                "bnp.L=30".into(),
                "bnp.iterations=7".into(),
                "codec.encoder=linear".into(),
                "codec.max_iterations=9".into(),
                "io.out_dir=/tmp/x".into(),
                "seed=11".into(),
                "analysis.regions=[\"LANE_CHANGE\"]".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.bnp.hyper.truncation, 30);
        assert_eq!(c.bnp.iterations, 7);
        assert_eq!(c.codec.encoder, EncoderKind::Linear);
        assert_eq!(c.codec.train.max_iterations, 9);
        assert_eq!(c.io.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.seed, 11);
        assert_eq!(c.analysis.regions, vec![RegionSelect::LaneChange]);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        for o in ["bnp.L", "bnp..L=3", "nosuch.key=1", "seed.inner=1", "bnp.L=\"many\""] {
            assert!(PipelineConfig::from_json(r#"{"seed": 1}"#, &[o.into()]).is_err(), "{o}");
        }
    }

    #[test]
    fn round_trips_through_json() {
        let mut c = PipelineConfig::with_seed(5);
        c.codec.encoder = EncoderKind::Linear;
        c.bnp.iterations = 42;
        let back = PipelineConfig::from_json(&serde_json::to_string(&c).unwrap(), &[]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn missing_file_is_path_not_found() {
        assert!(matches!(
            PipelineConfig::load(Path::new("/nonexistent/config.json"), &[]),
            Err(Error::PathNotFound(_))
        ));
    }
}
