use crate::sampling::Patch;
use crate::siamnet::SiameseModel;
use crate::{MraiError, Result};

/// What the integer labels mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSemantics {
    /// 0 = source, 1 = target.
    Domain,
    /// 0 = CSF, 1 = GM, 2 = WM.
    Tissue,
}

/// Labelled feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub vectors: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub semantics: LabelSemantics,
}

impl FeatureSet {
    pub fn new(vectors: Vec<Vec<f64>>, labels: Vec<usize>, semantics: LabelSemantics) -> Result<Self> {
        if vectors.is_empty() {
            return Err(MraiError::InvalidArgument("empty feature set".into()));
        }
        if vectors.len() != labels.len() {
            return Err(MraiError::Shape(format!("{} vectors but {} labels", vectors.len(), labels.len())));
        }
        let d = vectors[0].len();
        if d == 0 || vectors.iter().any(|v| v.len() != d) {
            return Err(MraiError::Shape("feature vectors must share one nonzero dimension".into()));
        }
        if vectors.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MraiError::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self {
            vectors,
            labels,
            semantics,
        })
    }

    /// Source set labelled 0 and target set labelled 1.
    pub fn domains(source: &[Vec<f64>], target: &[Vec<f64>]) -> Result<Self> {
        let vectors = source.iter().chain(target).cloned().collect();
        let labels = std::iter::repeat_n(0, source.len()).chain(std::iter::repeat_n(1, target.len())).collect();
        Self::new(vectors, labels, LabelSemantics::Domain)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            vectors: idx.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            semantics: self.semantics,
        }
    }
}

fn tissue_labels(patches: &[Patch]) -> Result<Vec<usize>> {
    patches
        .iter()
        .map(|p| {
            p.tissue
                .class_index()
                .ok_or_else(|| MraiError::InvalidArgument(format!("{} is not a brain tissue", p.tissue)))
        })
        .collect()
}

/// Raw pixels plus the scanner bit, tissue-labelled.
pub fn raw_features(patches: &[Patch]) -> Result<FeatureSet> {
    FeatureSet::new(
        patches.iter().map(Patch::input_vector).collect(),
        tissue_labels(patches)?,
        LabelSemantics::Tissue,
    )
}

/// Infer-mode embeddings, tissue-labelled.
pub fn embed_features(model: &SiameseModel, patches: &[Patch]) -> Result<FeatureSet> {
    let vectors = patches
        .iter()
        .map(|p| model.forward_patch(p, crate::siamnet::Mode::Infer))
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(vectors, tissue_labels(patches)?, LabelSemantics::Tissue)
}
