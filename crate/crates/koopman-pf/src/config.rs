//! Analysis configuration: the JSON schema consumed by the CLI and the
//! conversions into library types.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::observables::ObservableSpec;
use crate::participation::{InitialDistribution, PfIndexing, PfMethod};

/// Where the trajectory data comes from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputConfig {
    /// Built-in model preset (`canonical`, `canonical-lifted`, `swing4`),
    /// optionally overriding the preset's initial state, step and length.
    Preset {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        steps: Option<usize>,
    },
    /// One or more trajectory CSV files (concatenated without cross-boundary
    /// snapshot pairs). `dt` is required unless the files carry a `t` column.
    Csv {
        paths: Vec<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dt: Option<f64>,
    },
}

/// One dictionary entry in configuration form.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObservableKindConfig {
    /// 1-based state index.
    Identity { index: usize },
    Monomial { exponents: Vec<u32> },
    Sine { index: usize },
    Cosine { index: usize },
    Expression { source: String },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ObservableEntry {
    #[serde(flatten)]
    pub kind: ObservableKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl ObservableEntry {
    pub fn to_spec(&self) -> Result<ObservableSpec> {
        let spec = match &self.kind {
            ObservableKindConfig::Identity { index } => ObservableSpec::identity(*index),
            ObservableKindConfig::Monomial { exponents } => ObservableSpec::monomial(exponents.clone()),
            ObservableKindConfig::Sine { index } => ObservableSpec::sine(*index),
            ObservableKindConfig::Cosine { index } => ObservableSpec::cosine(*index),
            ObservableKindConfig::Expression { source } => ObservableSpec::expression(source)?,
        };
        Ok(match &self.name {
            Some(name) => spec.named(name.clone()),
            None => spec,
        })
    }

    pub fn identity(index: usize) -> ObservableEntry {
        ObservableEntry { kind: ObservableKindConfig::Identity { index }, name: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Top-level analysis configuration (the JSON form accepted by `--config`).
/// Every field except `input` has a usable default; an empty `dictionary`
/// means the identity dictionary of the data's dimension.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputConfig>,
    pub dictionary: Vec<ObservableEntry>,
    pub svd_rtol: f64,
    pub pf_method: PfMethod,
    pub indexing: PfIndexing,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<InitialDistribution>,
    pub output_dir: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for AnalysisConfig {
    fn default() -> AnalysisConfig {
        AnalysisConfig {
            input: None,
            dictionary: Vec::new(),
            svd_rtol: 1e-10,
            pf_method: PfMethod::Simplified,
            indexing: PfIndexing::PaperPrinted,
            distribution: None,
            output_dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

impl AnalysisConfig {
    pub fn from_file(path: &Path) -> Result<AnalysisConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: AnalysisConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.svd_rtol.is_finite() && self.svd_rtol >= 0.0 && self.svd_rtol < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "svd_rtol must lie in [0, 1), got {}",
                self.svd_rtol
            )));
        }
        if self.formats.is_empty() {
            return Err(Error::InvalidConfig("formats must not be empty".into()));
        }
        if let Some(InputConfig::Csv { paths, dt }) = &self.input {
            if paths.is_empty() {
                return Err(Error::InvalidConfig("csv input needs at least one path".into()));
            }
            if let Some(dt) = dt {
                if !(dt.is_finite() && *dt > 0.0) {
                    return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
                }
            }
        }
        if let Some(InputConfig::Preset { dt: Some(dt), .. }) = &self.input {
            if !(dt.is_finite() && *dt > 0.0) {
                return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn wants(&self, format: OutputFormat) -> bool {
        self.formats.contains(&format)
    }

    /// Dictionary entries, defaulting to the identity dictionary of
    /// dimension `n` when the config lists none.
    pub fn dictionary_entries(&self, n: usize) -> Vec<ObservableEntry> {
        if self.dictionary.is_empty() {
            (1..=n).map(ObservableEntry::identity).collect()
        } else {
            self.dictionary.clone()
        }
    }

    /// Distribution for the general participation method, defaulting to the
    /// unit symmetric box with seed 0 and 10⁵ draws.
    pub fn distribution_for(&self, n: usize) -> InitialDistribution {
        self.distribution
            .clone()
            .unwrap_or_else(|| InitialDistribution::symmetric_box(n, 1.0, 0, 100_000))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::build_dictionary;

    #[test]
    fn full_config_round_trips_through_json() {
        let cfg = AnalysisConfig {
            input: Some(InputConfig::Preset {
                name: "canonical".into(),
                x0: Some(vec![-1.0, 2.0]),
                dt: Some(0.01),
                steps: Some(1000),
            }),
            dictionary: vec![
                ObservableEntry::identity(1),
                ObservableEntry::identity(2),
                ObservableEntry {
                    kind: ObservableKindConfig::Monomial { exponents: vec![0, 2] },
                    name: None,
                },
            ],
            svd_rtol: 1e-10,
            pf_method: PfMethod::General,
            indexing: PfIndexing::PaperPrinted,
            distribution: Some(InitialDistribution::symmetric_box(2, 1.0, 7, 5000)),
            output_dir: PathBuf::from("results"),
            formats: vec![OutputFormat::Csv],
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: AnalysisConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg: AnalysisConfig = serde_json::from_str(r#"{}"#).unwrap();
        assert_eq!(cfg, AnalysisConfig::default());
        assert_eq!(cfg.svd_rtol, 1e-10);
        assert_eq!(cfg.pf_method, PfMethod::Simplified);
        assert!(cfg.wants(OutputFormat::Csv) && cfg.wants(OutputFormat::Json));

        let cfg: AnalysisConfig = serde_json::from_str(
            r#"{"input": {"kind": "csv", "paths": ["a.csv", "b.csv"], "dt": 0.02}}"#,
        )
        .unwrap();
        match cfg.input.unwrap() {
            InputConfig::Csv { paths, dt } => {
                assert_eq!(paths.len(), 2);
                assert_eq!(dt, Some(0.02));
            }
            other => panic!("unexpected input {other:?}"),
        }
    }

    #[test]
    fn dictionary_entries_convert_and_default() {
        let cfg: AnalysisConfig = serde_json::from_str(
            r#"{
                "dictionary": [
                    {"kind": "identity", "index": 1},
                    {"kind": "identity", "index": 2},
                    {"kind": "sine", "index": 1},
                    {"kind": "cosine", "index": 2},
                    {"kind": "monomial", "exponents": [1, 1], "name": "xy"},
                    {"kind": "expression", "source": "x1*exp(-x2)"}
                ]
            }"#,
        )
        .unwrap();
        let specs = cfg
            .dictionary_entries(2)
            .iter()
            .map(|e| e.to_spec())
            .collect::<Result<Vec<_>>>()
            .unwrap();
        let dict = build_dictionary(specs, 2).unwrap();
        assert_eq!(dict.q(), 6);
        assert_eq!(dict.names()[4], "xy");

        // No dictionary ⇒ identity observables for every state.
        let cfg = AnalysisConfig::default();
        let specs = cfg
            .dictionary_entries(3)
            .iter()
            .map(|e| e.to_spec())
            .collect::<Result<Vec<_>>>()
            .unwrap();
        let dict = build_dictionary(specs, 3).unwrap();
        assert_eq!(dict.q(), 3);
        assert_eq!(dict.names(), &["x1", "x2", "x3"]);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = AnalysisConfig { svd_rtol: -1.0, ..AnalysisConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.svd_rtol = 1e-10;
        cfg.formats = vec![];
        assert!(cfg.validate().is_err());
        cfg.formats = vec![OutputFormat::Json];
        cfg.input = Some(InputConfig::Csv { paths: vec![], dt: None });
        assert!(cfg.validate().is_err());
        cfg.input = Some(InputConfig::Csv { paths: vec!["x.csv".into()], dt: Some(-0.1) });
        assert!(cfg.validate().is_err());
        cfg.input = Some(InputConfig::Csv { paths: vec!["x.csv".into()], dt: Some(0.1) });
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn bad_expression_surfaces_at_conversion() {
        let entry = ObservableEntry {
            kind: ObservableKindConfig::Expression { source: "x1 +" .into() },
            name: None,
        };
        assert!(entry.to_spec().is_err());
    }
}
