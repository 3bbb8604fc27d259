use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::phantom::AcquisitionProtocol;
use crate::seeds::SeedLedger;
use crate::siamnet::{NetConfig, RmsProp, TrainOptions};
use crate::{MraiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Exp4,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4 => "exp4",
        }
    }
}

/// Settings of the synthetic two-domain experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub margins: Vec<f64>,
    /// Training points per class per domain.
    pub train_per_class: usize,
    /// Held-out points per class per domain.
    pub test_per_class: usize,
    /// Class means in the source domain.
    pub source_means: [[f64; 2]; 2],
    /// Class means in the target domain.
    pub target_means: [[f64; 2]; 2],
    pub spread: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            margins: vec![0.0, 1.0, 10.0],
            train_per_class: 20,
            test_per_class: 100,
            source_means: [[-2.0, 0.0], [2.0, 0.0]],
            target_means: [[-2.0, 3.0], [2.0, 3.0]],
            spread: 0.5,
            epochs: 100,
            batch_size: 64,
            dense1: 16,
            dense2: 8,
            learning_rate: 0.01,
            l2_lambda: 0.001,
        }
    }
}

/// One experiment's full configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: ExperimentId,
    pub source_protocol: String,
    pub target_protocol: String,
    /// Overrides the preset noise level of both protocols when set.
    pub noise_sigma: Option<f64>,
    pub image_size: usize,
    pub n_source_subjects: usize,
    pub n_target_train_subjects: usize,
    pub n_test_subjects: usize,
    pub source_patches_per_tissue: usize,
    pub target_patches_per_tissue: Vec<usize>,
    pub test_patches_per_tissue: usize,
    pub repeats: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_pairs: usize,
    pub margin: f64,
    pub cv_folds: usize,
    pub master_seed: u64,
    pub net_config: NetConfig,
    pub optimizer: RmsProp,
    /// `[k, h1, h2]` triples for the parameter sweep.
    pub sweep: Vec<[usize; 3]>,
    pub synthetic: SyntheticConfig,
    /// Extra protocol definitions, looked up by name before the presets.
    pub protocols: Vec<AcquisitionProtocol>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment_id: ExperimentId::Exp1,
            source_protocol: "Brainweb1.5T".into(),
            target_protocol: "Brainweb3.0T".into(),
            noise_sigma: None,
            image_size: 256,
            n_source_subjects: 4,
            n_target_train_subjects: 1,
            n_test_subjects: 4,
            source_patches_per_tissue: 100,
            target_patches_per_tissue: vec![1],
            test_patches_per_tissue: 50,
            repeats: 10,
            epochs: 320,
            batch_size: 64,
            max_pairs: 18_000,
            margin: 1.0,
            cv_folds: 5,
            master_seed: 0,
            net_config: NetConfig::default(),
            optimizer: RmsProp::default(),
            sweep: vec![[2, 4, 4], [4, 8, 4], [8, 16, 8], [16, 32, 16], [32, 64, 32], [64, 128, 64]],
            synthetic: SyntheticConfig::default(),
            protocols: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults for one experiment.
    pub fn for_experiment(id: ExperimentId) -> Self {
        let base = Self {
            experiment_id: id,
            ..Self::default()
        };
        match id {
            ExperimentId::Exp1 => base,
            ExperimentId::Exp2 => Self {
                target_patches_per_tissue: vec![1, 2, 5, 10, 20, 50, 100],
                ..base
            },
            ExperimentId::Exp3 => Self {
                target_patches_per_tissue: vec![10],
                repeats: 20,
                ..base
            },
            ExperimentId::Exp4 => Self { repeats: 1, ..base },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| MraiError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MraiError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form; the basis of [`Self::hash`].
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn protocol(&self, name: &str) -> Result<AcquisitionProtocol> {
        let found = self
            .protocols
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(name))
            .cloned()
            .or_else(|| AcquisitionProtocol::preset(name))
            .ok_or_else(|| MraiError::Config(format!("unknown protocol {name:?}")))?;
        let p = match self.noise_sigma {
            Some(s) => found.with_noise(s),
            None => found,
        };
        p.validate().map_err(|e| MraiError::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn net(&self) -> NetConfig {
        NetConfig {
            margin: self.margin,
            ..self.net_config.clone()
        }
    }

    pub fn train_options(&self) -> TrainOptions {
        TrainOptions {
            epochs: self.epochs,
            batch_size: self.batch_size,
            optimizer: self.optimizer,
        }
    }

    pub fn ledger(&self) -> SeedLedger {
        SeedLedger::new(self.master_seed)
    }

    /// Subject seeds by role: `(source, target_train, test)`.
    pub fn subject_seeds(&self) -> (Vec<u64>, Vec<u64>, Vec<u64>) {
        let ledger = self.ledger();
        let mut next = 0u64;
        let mut take = |n: usize| {
            (0..n)
                .map(|_| {
                    next += 1;
                    ledger.subject_seed(next - 1)
                })
                .collect::<Vec<_>>()
        };
        let s = take(self.n_source_subjects);
        let t = take(self.n_target_train_subjects);
        let e = take(self.n_test_subjects);
        (s, t, e)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(MraiError::Config(m.to_string()));
        if self.repeats == 0 {
            return bad("repeats must be >= 1");
        }
        if self.n_source_subjects == 0 || self.n_target_train_subjects == 0 || self.n_test_subjects == 0 {
            return bad("subject counts must be >= 1");
        }
        if self.source_patches_per_tissue == 0 || self.test_patches_per_tissue == 0 {
            return bad("patch counts must be >= 1");
        }
        if self.target_patches_per_tissue.is_empty() || self.target_patches_per_tissue.contains(&0) {
            return bad("target_patches_per_tissue must list counts >= 1");
        }
        if self.experiment_id == ExperimentId::Exp2
            && !self.target_patches_per_tissue.windows(2).all(|w| w[0] < w[1])
        {
            return bad("target_patches_per_tissue must be increasing");
        }
        if self.batch_size < 6 {
            return bad("batch_size must be >= 6");
        }
        if self.max_pairs == 0 {
            return bad("max_pairs must be >= 1");
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be >= 2");
        }
        if self.image_size < crate::phantom::MIN_PHANTOM_DIM {
            return bad("image_size must be >= 64");
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad("margin must be finite and >= 0");
        }
        self.net().validate()?;
        if self.net_config.vector_input.is_some() {
            return bad("net_config.vector_input is reserved for the synthetic experiment");
        }
        if self.sweep.iter().flatten().any(|&v| v == 0) {
            return bad("sweep entries must be >= 1");
        }
        let syn = &self.synthetic;
        if syn.train_per_class < 2 || syn.test_per_class < 2 || syn.batch_size < 6 || syn.spread <= 0.0 || !(syn.l2_lambda >= 0.0) {
            return bad("synthetic sizes must be >= 2, batch_size >= 6, spread > 0, l2_lambda >= 0");
        }
        if syn.margins.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return bad("synthetic margins must be finite and >= 0");
        }
        self.protocol(&self.source_protocol)?;
        self.protocol(&self.target_protocol)?;
        let (s, t, e) = self.subject_seeds();
        let train: HashSet<u64> = s.iter().chain(&t).copied().collect();
        if e.iter().any(|seed| train.contains(seed)) || train.len() != s.len() + t.len() {
            return bad("test subjects overlap training subjects");
        }
        Ok(())
    }
}
