use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use assembler_core::{
    AssemblyClock, Calibration, Embedding, LatticeKind, LoadingParams, PhysicsParams,
    PlannerOptions,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::InputError;

pub const FIG3: &str = include_str!("../presets/fig3.json");
pub const FIG_S3: &str = include_str!("../presets/figS3.json");

/// Either a generated reservoir (`kind` + `spacing`) or a geometry `file`
/// carrying its own target.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<LatticeKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Embedding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSpec {
    pub embeddings: Vec<Embedding>,
    pub clock: AssemblyClock,
    /// Smallest target size included in the fit.
    pub fit_min_n: usize,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            embeddings: vec![Embedding::Checkerboard, Embedding::Compact],
            clock: AssemblyClock::AllMoves,
            fit_min_n: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub target_sizes: Vec<usize>,
    #[serde(default)]
    pub planner: PlannerOptions,
    #[serde(default)]
    pub loading: LoadingParams,
    #[serde(default)]
    pub physics: PhysicsParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<ScalingSpec>,
    pub n_trials: usize,
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| InputError(format!("bad config: {e}")))?;
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fig3" => Self::from_json(FIG3),
            "figS3" | "figs3" => Self::from_json(FIG_S3),
            _ => {
                Err(InputError(format!("unknown preset '{name}' (available: fig3, figS3)")).into())
            }
        }
    }

    /// Loads a config file; relative geometry paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| InputError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text).with_context(|| format!("in {}", path.display()))?;
        if let (Some(file), Some(dir)) = (cfg.geometry.file.as_mut(), path.parent()) {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        match (&g.file, g.kind) {
            (Some(_), None) => {
                if g.spacing.is_some() || g.embedding.is_some() {
                    return Err(
                        InputError("geometry.file excludes spacing and embedding".into()).into(),
                    );
                }
            }
            (None, Some(_)) => {
                if g.spacing.is_none() {
                    return Err(InputError(
                        "geometry.spacing is required with geometry.kind".into(),
                    )
                    .into());
                }
                if self.target_sizes.is_empty() {
                    return Err(
                        InputError("target_sizes must list at least one size".into()).into(),
                    );
                }
            }
            _ => {
                return Err(
                    InputError("geometry needs exactly one of 'kind' or 'file'".into()).into(),
                )
            }
        }
        if self.target_sizes.contains(&0) {
            return Err(InputError("target sizes must be positive".into()).into());
        }
        if self.n_trials == 0 {
            return Err(InputError("n_trials must be at least 1".into()).into());
        }
        self.planner.validate()?;
        self.loading.validate()?;
        self.physics.validate()?;
        if let Some(cal) = &self.calibration {
            cal.validate()?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for name in ["fig3", "figS3"] {
            let cfg = RunConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.hash().len(), 64);
        }
        assert_eq!(
            RunConfig::preset("fig3").unwrap().target_sizes,
            vec![9, 16, 25, 36, 49]
        );
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = FIG3.replacen("\"n_trials\"", "\"n_trails\": 3, \"n_trials\"", 1);
        assert!(RunConfig::from_json(&text).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::preset("fig3").unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.base_seed += 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn geometry_modes_are_exclusive() {
        let mut cfg = RunConfig::preset("fig3").unwrap();
        cfg.geometry.file = Some("g.json".into());
        assert!(cfg.validate().is_err());
        cfg.geometry = GeometrySpec::default();
        assert!(cfg.validate().is_err());
    }
}
