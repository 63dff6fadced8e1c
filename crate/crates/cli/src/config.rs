//! Run configuration: command, manifold, numerical settings and tolerances.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::zoo::ManifoldDescriptor;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Invariants,
    ElCheck,
    FirstVariation,
    Tube,
    Austere,
    ReportAll,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Invariants => "invariants",
            Command::ElCheck => "el-check",
            Command::FirstVariation => "first-variation",
            Command::Tube => "tube",
            Command::Austere => "austere",
            Command::ReportAll => "report-all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Every tolerance a verdict can use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Closed-form reference values, relative to `max(1, |reference|)`.
    pub reference: f64,
    /// Intrinsic/relative binomial relation in space forms.
    pub relation: f64,
    /// General-path `L_2p` against the space-form shortcut.
    pub el_consistency: f64,
    /// `|L_2p|` and the complex identities on complex submanifolds.
    pub el_complex: f64,
    pub first_variation_rel: f64,
    pub first_variation_abs: f64,
    pub tube_rel: f64,
    /// Eigenvalue pairing residual for austerity.
    pub pairing: f64,
    pub minimality_norm: f64,
    pub minimality_derivative: f64,
    /// Allowed negativity of `(−1)^p K^f_2p` on austere patches.
    pub sign: f64,
    /// Allowed `|H^f_odd|` on austere patches.
    pub h_odd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            reference: 1e-6,
            relation: 1e-9,
            el_consistency: 1e-6,
            el_complex: 1e-5,
            first_variation_rel: 1e-3,
            first_variation_abs: 1e-6,
            tube_rel: 1e-3,
            pairing: 1e-6,
            minimality_norm: 1e-5,
            minimality_derivative: 1e-4,
            sign: 1e-8,
            h_odd: 1e-6,
        }
    }
}

impl Tolerances {
    /// Applies `key=value` overrides, keys as in the config file.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), CliError> {
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("tolerance override {item:?} is not key=value")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("tolerance {key} needs a number, got {value:?}")))?;
            let slot = match key.trim().replace('-', "_").as_str() {
                "reference" => &mut self.reference,
                "relation" => &mut self.relation,
                "el_consistency" => &mut self.el_consistency,
                "el_complex" => &mut self.el_complex,
                "first_variation_rel" => &mut self.first_variation_rel,
                "first_variation_abs" => &mut self.first_variation_abs,
                "tube_rel" => &mut self.tube_rel,
                "pairing" => &mut self.pairing,
                "minimality_norm" => &mut self.minimality_norm,
                "minimality_derivative" => &mut self.minimality_derivative,
                "sign" => &mut self.sign,
                "h_odd" => &mut self.h_odd,
                other => return Err(CliError::Usage(format!("unknown tolerance {other}"))),
            };
            *slot = value;
        }
        Ok(())
    }
}

fn default_variations() -> usize {
    5
}

fn default_xi_samples() -> usize {
    16
}

/// A complete run description; also the schema of `--config` files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub manifold: ManifoldDescriptor,
    /// Requested `p` values; all admissible ones when absent.
    #[serde(default)]
    pub p: Option<Vec<usize>>,
    /// Nodes per axis (one value broadcasts); the zoo default when absent.
    #[serde(default)]
    pub resolution: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Number of seeded deformation fields per first-variation case.
    #[serde(default = "default_variations")]
    pub variations: usize,
    /// Random unit normals per node in the austerity check.
    #[serde(default = "default_xi_samples")]
    pub xi_samples: usize,
}

impl RunConfig {
    pub fn new(command: Command, manifold: ManifoldDescriptor) -> Self {
        RunConfig {
            command,
            manifold,
            p: None,
            resolution: None,
            seed: 0,
            out: None,
            format: Format::Json,
            tolerances: Tolerances::default(),
            variations: default_variations(),
            xi_samples: default_xi_samples(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("bad config: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_round_trip() {
        let text = r#"
            command = "el-check"
            p = [0, 1]
            resolution = [8]
            seed = 7
            [manifold]
            name = "sphere"
            params = { r = 1.5 }
            [tolerances]
            el_complex = 1e-4
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.command, Command::ElCheck);
        assert_eq!(cfg.manifold.params["r"], 1.5);
        assert_eq!(cfg.tolerances.el_complex, 1e-4);
        assert_eq!(cfg.tolerances.reference, 1e-6);
        assert_eq!(cfg.variations, 5);
        let again = RunConfig::from_toml_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn overrides_parse_and_reject_unknown_keys() {
        let mut t = Tolerances::default();
        t.apply_overrides(&["tube-rel=1e-2".into(), "sign=0".into()]).unwrap();
        assert_eq!(t.tube_rel, 1e-2);
        assert_eq!(t.sign, 0.0);
        assert!(t.apply_overrides(&["bogus=1".into()]).is_err());
        assert!(t.apply_overrides(&["tube_rel".into()]).is_err());
    }
}
