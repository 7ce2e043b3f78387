//! JSON forms of pre/post-change models and of calibrated partitions.
//!
//! A model file looks like
//!
//! ```json
//! {"p0": 0.5,
//!  "continuous": [{"w": 1.0, "family": "gaussian", "mean": 0.0, "var": 1.0}],
//!  "atoms": [{"theta": -1.0, "p": 0.25}, {"theta": 1.0, "p": 0.25}]}
//! ```
//!
//! with families `gaussian` (`mean`, `var`), `laplace` (`loc`, `scale`) and
//! `uniform` (`lo`, `hi`). `p0` defaults to 1 and `atoms` to none.

use std::fs;
use std::path::Path;

use bgcusum_core::{Atom, BinPartition, Component, GeneralizedPdf};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum FamilySpec {
    Gaussian { mean: f64, var: f64 },
    Laplace { loc: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub w: f64,
    #[serde(flatten)]
    pub family: FamilySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    pub theta: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default = "one")]
    pub p0: f64,
    pub continuous: Vec<ComponentSpec>,
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
}

fn one() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn build(&self) -> Result<GeneralizedPdf> {
        let continuous = self
            .continuous
            .iter()
            .map(|c| {
                let comp = match c.family {
                    FamilySpec::Gaussian { mean, var } => Component::Gaussian { mean, var },
                    FamilySpec::Laplace { loc, scale } => Component::Laplace { loc, scale },
                    FamilySpec::Uniform { lo, hi } => Component::Uniform { lo, hi },
                };
                (c.w, comp)
            })
            .collect();
        let atoms = self.atoms.iter().map(|a| Atom { theta: a.theta, p: a.p }).collect();
        Ok(GeneralizedPdf::new(self.p0, continuous, atoms)?)
    }
}

impl From<&GeneralizedPdf> for ModelSpec {
    fn from(f: &GeneralizedPdf) -> Self {
        let continuous = f
            .continuous()
            .iter()
            .map(|&(w, c)| ComponentSpec {
                w,
                family: match c {
                    Component::Gaussian { mean, var } => FamilySpec::Gaussian { mean, var },
                    Component::Laplace { loc, scale } => FamilySpec::Laplace { loc, scale },
                    Component::Uniform { lo, hi } => FamilySpec::Uniform { lo, hi },
                },
            })
            .collect();
        let atoms = f.atoms().iter().map(|a| AtomSpec { theta: a.theta, p: a.p }).collect();
        ModelSpec {
            p0: f.p0(),
            continuous,
            atoms,
        }
    }
}

/// Serialized [`BinPartition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionArtifact {
    pub n: usize,
    pub boundaries: Vec<f64>,
    pub atoms: Vec<f64>,
    pub f_masses: Vec<f64>,
}

impl PartitionArtifact {
    pub fn build(&self) -> Result<BinPartition> {
        let p = BinPartition::new(self.boundaries.clone(), self.atoms.clone(), self.f_masses.clone())?;
        if p.n_continuous() != self.n {
            return Err(bgcusum_core::Error::InvalidPartition("n disagrees with the boundary count").into());
        }
        Ok(p)
    }
}

impl From<&BinPartition> for PartitionArtifact {
    fn from(p: &BinPartition) -> Self {
        PartitionArtifact {
            n: p.n_continuous(),
            boundaries: p.boundaries().to_vec(),
            atoms: p.atoms().to_vec(),
            f_masses: p.f_masses().to_vec(),
        }
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<GeneralizedPdf> {
    read_json::<ModelSpec>(path)?.build()
}

pub fn load_partition(path: &Path) -> Result<BinPartition> {
    read_json::<PartitionArtifact>(path)?.build()
}

pub fn save_partition(path: &Path, p: &BinPartition) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&PartitionArtifact::from(p)).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
