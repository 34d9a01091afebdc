use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vlcorpus::instruct_eval::DamageConfig;
use vlcorpus::pdf_figures::ExtractPolicy;
use vlcorpus::refine::{EndpointConfig, TemplateId};
use vlcorpus::wiki_harvest::WikiConfig;

use crate::failure::{Failure, Kind};

pub const DEFAULT_QUERY: &str = "What is shown in this image?";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratio: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { ratio: 0.9 }
    }
}

/// Unified pipeline configuration, read from TOML. Every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub output_root: PathBuf,
    /// Seed for every random choice (splits, synthetic data).
    pub seed: u64,
    /// Keyword file; the shipped list when absent.
    pub keywords: Option<PathBuf>,
    /// Query text paired with harvested and extracted images.
    pub query: String,
    pub template: TemplateId,
    /// `whitespace` or a path to a `tokenizer.json`.
    pub tokenizer: String,
    pub bins: usize,
    /// Pixel-hash exclusion list merged into `extract.filter.exclusion`.
    pub exclusion_list: Option<PathBuf>,
    pub split: SplitConfig,
    pub endpoint: EndpointConfig,
    pub wiki: WikiConfig,
    pub extract: ExtractPolicy,
    pub damage: DamageConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_root: PathBuf::from("out"),
            seed: 7,
            keywords: None,
            query: DEFAULT_QUERY.into(),
            template: TemplateId::Wiki,
            tokenizer: "whitespace".into(),
            bins: 50,
            exclusion_list: None,
            split: SplitConfig::default(),
            endpoint: EndpointConfig::default(),
            wiki: WikiConfig::default(),
            extract: ExtractPolicy::default(),
            damage: DamageConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Defaults, overlaid with `path` when given. Relative paths inside the file resolve
    /// against the file's directory.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::new(Kind::Config, format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Failure::new(Kind::Config, format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.output_root);
        cfg.keywords.as_mut().map(rebase);
        cfg.exclusion_list.as_mut().map(rebase);
        if cfg.tokenizer != "whitespace" {
            let mut p = PathBuf::from(&cfg.tokenizer);
            rebase(&mut p);
            cfg.tokenizer = p.to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    /// Checks the invariants: referenced files exist and the split ratio is in (0, 1).
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |m: String| Err(Failure::new(Kind::Config, m));
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return bad(format!("split.ratio must be in (0, 1), got {}", self.split.ratio));
        }
        for p in [&self.keywords, &self.exclusion_list].into_iter().flatten() {
            if !p.is_file() {
                return bad(format!("referenced file does not exist: {}", p.display()));
            }
        }
        if self.tokenizer != "whitespace" && !Path::new(&self.tokenizer).is_file() {
            return bad(format!("tokenizer file does not exist: {}", self.tokenizer));
        }
        if self.bins == 0 {
            return bad("bins must be at least 1".into());
        }
        if self.query.trim().is_empty() {
            return bad("query must not be empty".into());
        }
        self.damage.validate().map_err(|e| Failure::new(Kind::Config, format!("damage: {e}")))
    }

    /// SHA-256 of the canonical JSON form of the effective configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn digest_tracks_semantic_fields() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.split.ratio = 0.8;
        assert_ne!(a.digest(), b.digest());
        let mut c = a.clone();
        c.endpoint.model_name = "other".into();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn toml_overlay_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        std::fs::write(&path, "seed = 11\n[split]\nratio = 0.8\n[endpoint]\nmodel_name = \"m\"\n").unwrap();
        let cfg = PipelineConfig::load(Some(&path)).unwrap();
        assert_eq!((cfg.seed, cfg.split.ratio, cfg.endpoint.model_name.as_str()), (11, 0.8, "m"));
        assert_eq!(cfg.output_root, dir.path().join("out"));

        std::fs::write(&path, "sed = 11\n").unwrap();
        assert_eq!(PipelineConfig::load(Some(&path)).unwrap_err().kind, Kind::Config);
    }

    #[test]
    fn ratio_and_missing_files_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.split.ratio = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = PipelineConfig::default();
        cfg.keywords = Some("/nonexistent/keywords.txt".into());
        assert!(cfg.validate().is_err());
    }
}
