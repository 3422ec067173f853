//! Binary OK/NOK classifiers over CPI feature vectors.
//!
//! Every model carries its own feature selection and scaler, so prediction
//! takes a full 30-element [`FeatureVector`] and needs nothing else.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use loopgrade_core::datagen::{Label, LabeledSample};
use loopgrade_core::features::{FeatureVector, FEATURE_COUNT, POPULAR_SUBSET};

pub mod boost;
pub mod eval;
pub mod forest;
pub mod gnb;
pub mod knn;
pub mod lda;
pub mod model;
pub mod scaler;
pub mod search;
pub mod study;
pub mod svm;
pub mod tree;

pub use eval::{evaluate, EvalReport};
pub use model::{predict, train, Model, Prediction};
pub use search::{cross_validate, kfold, random_search, SearchResult};
pub use study::{feature_importance, topk_study};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training set is empty")]
    Empty,
    #[error("feature index {0} out of range")]
    BadFeature(usize),
    #[error("{0} does not expose impurity-based feature importance")]
    NotTreeBased(Kind),
    #[error("unknown classifier kind {0:?}")]
    UnknownKind(String),
    #[error("invalid hyperparameters: {0}")]
    Hyper(String),
    #[error("model file: {0}")]
    Format(String),
}

/// Classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    #[serde(rename = "GNB")]
    Gnb,
    #[serde(rename = "LDA")]
    Lda,
    #[serde(rename = "KNN")]
    Knn,
    DecisionTree,
    RandomForest,
    AdaBoost,
    #[serde(rename = "SVM-RBF")]
    Svm,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Gnb,
        Kind::Lda,
        Kind::Knn,
        Kind::DecisionTree,
        Kind::RandomForest,
        Kind::AdaBoost,
        Kind::Svm,
    ];

    pub fn is_tree_based(self) -> bool {
        matches!(self, Kind::DecisionTree | Kind::RandomForest | Kind::AdaBoost)
    }

    pub fn name(self) -> &'static str {
        match self {
            Kind::Gnb => "GNB",
            Kind::Lda => "LDA",
            Kind::Knn => "KNN",
            Kind::DecisionTree => "DecisionTree",
            Kind::RandomForest => "RandomForest",
            Kind::AdaBoost => "AdaBoost",
            Kind::Svm => "SVM-RBF",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = ClassifyError;
    fn from_str(s: &str) -> Result<Self, ClassifyError> {
        let k = match s.to_ascii_lowercase().as_str() {
            "gnb" => Kind::Gnb,
            "lda" => Kind::Lda,
            "knn" => Kind::Knn,
            "tree" | "dt" | "decisiontree" => Kind::DecisionTree,
            "forest" | "rf" | "randomforest" => Kind::RandomForest,
            "adaboost" | "ada" => Kind::AdaBoost,
            "svm" | "svm-rbf" => Kind::Svm,
            _ => return Err(ClassifyError::UnknownKind(s.to_string())),
        };
        Ok(k)
    }
}

/// Kind-specific settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Hyper {
    #[serde(rename = "GNB")]
    Gnb { var_floor: f64 },
    #[serde(rename = "LDA")]
    Lda { ridge: f64 },
    #[serde(rename = "KNN")]
    Knn { k: usize },
    DecisionTree {
        max_depth: usize,
        min_samples_leaf: usize,
    },
    RandomForest {
        n_estimators: usize,
        max_depth: usize,
        min_samples_leaf: usize,
        /// Bootstrap sample size as a fraction of the training set.
        sampling_rate: f64,
        /// Features tried per split as a fraction of those available;
        /// `None` means `sqrt(d)`.
        feature_fraction: Option<f64>,
    },
    AdaBoost {
        n_estimators: usize,
        max_depth: usize,
        learning_rate: f64,
        sampling_rate: f64,
        feature_fraction: f64,
    },
    #[serde(rename = "SVM-RBF")]
    Svm { c: f64, gamma: f64 },
}

impl Hyper {
    pub fn kind(&self) -> Kind {
        match self {
            Hyper::Gnb { .. } => Kind::Gnb,
            Hyper::Lda { .. } => Kind::Lda,
            Hyper::Knn { .. } => Kind::Knn,
            Hyper::DecisionTree { .. } => Kind::DecisionTree,
            Hyper::RandomForest { .. } => Kind::RandomForest,
            Hyper::AdaBoost { .. } => Kind::AdaBoost,
            Hyper::Svm { .. } => Kind::Svm,
        }
    }

    /// Settings used when no search is run.
    pub fn default_for(kind: Kind) -> Self {
        match kind {
            Kind::Gnb => Hyper::Gnb { var_floor: 1e-9 },
            Kind::Lda => Hyper::Lda { ridge: 1e-6 },
            Kind::Knn => Hyper::Knn { k: 5 },
            Kind::DecisionTree => Hyper::DecisionTree {
                max_depth: 19,
                min_samples_leaf: 4,
            },
            Kind::RandomForest => Hyper::RandomForest {
                n_estimators: 50,
                max_depth: 20,
                min_samples_leaf: 6,
                sampling_rate: 0.7,
                feature_fraction: None,
            },
            Kind::AdaBoost => Hyper::AdaBoost {
                n_estimators: 200,
                max_depth: 6,
                learning_rate: 0.5,
                sampling_rate: 0.7,
                feature_fraction: 0.4,
            },
            Kind::Svm => Hyper::Svm {
                c: 512.0,
                gamma: 0.03125,
            },
        }
    }

    /// Ordering key for tie-breaking: fewer estimators, shallower trees,
    /// smaller k, stronger regularization (smaller C) come first.
    pub fn complexity(&self) -> (usize, usize, usize, f64, f64) {
        match *self {
            Hyper::Gnb { .. } | Hyper::Lda { .. } => (0, 0, 0, 0.0, 0.0),
            Hyper::Knn { k } => (0, 0, k, 0.0, 0.0),
            Hyper::DecisionTree {
                max_depth,
                min_samples_leaf,
            } => (1, max_depth, usize::MAX - min_samples_leaf, 0.0, 0.0),
            Hyper::RandomForest {
                n_estimators,
                max_depth,
                min_samples_leaf,
                ..
            } => (n_estimators, max_depth, usize::MAX - min_samples_leaf, 0.0, 0.0),
            Hyper::AdaBoost {
                n_estimators,
                max_depth,
                learning_rate,
                ..
            } => (n_estimators, max_depth, 0, learning_rate, 0.0),
            Hyper::Svm { c, gamma } => (0, 0, 0, c, gamma),
        }
    }
}

/// Which CPI columns a model sees.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureSet {
    All30,
    Popular12,
    /// Explicit zero-based indices.
    Indices(Vec<usize>),
}

impl FeatureSet {
    pub fn indices(&self) -> Vec<usize> {
        match self {
            FeatureSet::All30 => (0..FEATURE_COUNT).collect(),
            FeatureSet::Popular12 => POPULAR_SUBSET.to_vec(),
            FeatureSet::Indices(v) => v.clone(),
        }
    }
}

/// Design matrix restricted to selected features, with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
    /// Zero-based CPI indices of the columns of `x`.
    pub features: Vec<usize>,
}

impl Samples {
    pub fn from_labeled(samples: &[LabeledSample], features: &[usize]) -> Result<Self, ClassifyError> {
        if let Some(&bad) = features.iter().find(|&&i| i >= FEATURE_COUNT) {
            return Err(ClassifyError::BadFeature(bad));
        }
        Ok(Self {
            x: samples
                .iter()
                .map(|s| features.iter().map(|&i| s.features.values[i]).collect())
                .collect(),
            y: samples.iter().map(|s| s.label).collect(),
            features: features.to_vec(),
        })
    }

    pub fn new(x: Vec<Vec<f64>>, y: Vec<Label>) -> Self {
        let d = x.first().map_or(0, |r| r.len());
        Self {
            x,
            y,
            features: (0..d).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            features: self.features.clone(),
        }
    }

    /// Row of a full feature vector restricted to this set's columns.
    pub fn project(&self, fv: &FeatureVector<f64>) -> Vec<f64> {
        self.features.iter().map(|&i| fv.values[i]).collect()
    }
}

/// `+1` for OK, `-1` for NOK.
pub(crate) fn sign(label: Label) -> f64 {
    match label {
        Label::Ok => 1.0,
        Label::Nok => -1.0,
    }
}

/// Non-negative scores vote OK.
pub(crate) fn label_of(score: f64) -> Label {
    if score >= 0.0 {
        Label::Ok
    } else {
        Label::Nok
    }
}
