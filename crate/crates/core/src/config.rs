//! Model files and run metadata.
//!
//! A model file is JSON in one of three forms, each with a vertex count `n`:
//!
//! ```json
//! {"n": 4000, "atoms": [{"k": [90.0, 30.0], "weight": 0.5, "community": 0}, ...]}
//! {"n": 4000, "two_community": {"kappas": [{"kappa": 60, "weight": 0.5}], "theta": 50}}
//! {"n": 3000, "simplex": {"q": 3, "phi": 1.2, "magnitudes": [{"k": 50, "weight": 1}]}}
//! ```
//!
//! `community` defaults to 0. Exactly one of `atoms`, `two_community` and
//! `simplex` must be present; unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{build_model, build_simplex_model, build_two_community_model, ModelSpec, ParamAtom};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<ParamAtom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_community: Option<TwoCommunity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simplex: Option<Simplex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KappaAtom {
    pub kappa: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoCommunity {
    pub kappas: Vec<KappaAtom>,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagnitudeAtom {
    pub k: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simplex {
    pub q: usize,
    pub phi: f64,
    pub magnitudes: Vec<MagnitudeAtom>,
}

impl ModelFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(format!("model file: {e}")))
    }

    pub fn build(&self) -> Result<ModelSpec> {
        self.build_with_n(self.n)
    }

    pub fn build_with_n(&self, n: usize) -> Result<ModelSpec> {
        match (&self.atoms, &self.two_community, &self.simplex) {
            (Some(atoms), None, None) => build_model(atoms.clone(), n),
            (None, Some(tc), None) => {
                let kappas: Vec<(f64, f64)> = tc.kappas.iter().map(|a| (a.kappa, a.weight)).collect();
                build_two_community_model(&kappas, tc.theta, n)
            }
            (None, None, Some(s)) => {
                let mags: Vec<(f64, f64)> = s.magnitudes.iter().map(|a| (a.k, a.weight)).collect();
                build_simplex_model(s.q, s.phi, &mags, n)
            }
            _ => Err(Error::InvalidModel(
                "model file needs exactly one of atoms, two_community, simplex".into(),
            )),
        }
    }

    /// Same file with a different `θ`; only defined for the two-community form.
    pub fn with_theta(&self, theta: f64) -> Result<ModelFile> {
        let tc = self.two_community.as_ref().ok_or_else(|| {
            Error::InvalidArgument("theta sweeps need a two_community model file".into())
        })?;
        Ok(ModelFile {
            two_community: Some(TwoCommunity { theta, ..tc.clone() }),
            ..self.clone()
        })
    }

    /// SHA-256 hex digest of the canonical JSON.
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("model file serializes");
        hash_json(&value)
    }
}

/// Canonical form: object keys sorted, no whitespace.
pub fn canonical_json(value: &serde_json::Value) -> String {
    // serde_json's default map is ordered by key.
    let sorted: serde_json::Value = serde_json::from_str(&value.to_string()).expect("valid JSON");
    sorted.to_string()
}

pub fn hash_json(value: &serde_json::Value) -> String {
    hash_bytes(canonical_json(value).as_bytes())
}

/// SHA-256 hex digest.
pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_model_file(path: &Path) -> Result<ModelFile> {
    ModelFile::from_json(&std::fs::read_to_string(path)?)
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    load_model_file(path)?.build()
}

/// Reproducibility header attached to every output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub command: String,
}

impl RunMeta {
    pub fn new(config_hash: impl Into<String>, seed: u64, command: impl Into<String>) -> Self {
        RunMeta {
            config_hash: config_hash.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = r#"{"n": 4000, "two_community": {"kappas": [{"kappa": 60, "weight": 0.5}, {"kappa": 120, "weight": 0.5}], "theta": 50}}"#;

    #[test]
    fn two_community_form() {
        let m = ModelFile::from_json(FIG1).unwrap().build().unwrap();
        assert_eq!(m.n, 4000);
        assert!((m.c - 90.0).abs() < 1e-12);
        assert_eq!(m.num_atoms(), 4);
    }

    #[test]
    fn atoms_form_defaults_community() {
        let f = ModelFile::from_json(r#"{"n": 10, "atoms": [{"k": [5.0], "weight": 1.0}]}"#).unwrap();
        let m = f.build().unwrap();
        assert_eq!(m.atoms[0].community, 0);
    }

    #[test]
    fn simplex_form() {
        let f = ModelFile::from_json(
            r#"{"n": 300, "simplex": {"q": 3, "phi": 1.0, "magnitudes": [{"k": 40, "weight": 1}]}}"#,
        )
        .unwrap();
        assert_eq!(f.build().unwrap().num_communities(), 3);
    }

    #[test]
    fn rejects_ambiguous_and_unknown() {
        assert!(ModelFile::from_json(r#"{"n": 10}"#).unwrap().build().is_err());
        assert!(ModelFile::from_json(r#"{"n": 10, "atoms": [], "bogus": 1}"#).is_err());
    }

    #[test]
    fn hash_ignores_formatting_and_key_order() {
        let a = ModelFile::from_json(FIG1).unwrap();
        let b = ModelFile::from_json(
            r#"{"two_community":{"theta":50,"kappas":[{"weight":0.5,"kappa":60},{"weight":0.5,"kappa":120}]},"n":4000}"#,
        )
        .unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
        assert_ne!(a.config_hash(), a.with_theta(40.0).unwrap().config_hash());
    }
}
