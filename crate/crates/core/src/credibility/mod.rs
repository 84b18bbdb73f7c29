//! Page credibility: TF-IDF features, one SVM and one random forest per
//! checklist criterion, cross-validated, then used to score pages.
//!
//! A page's score is the number of criteria predicted satisfied (0..=7) and
//! maps onto three buckets: low (0-2), medium (3-4) and high (5-7).

pub mod cv;
pub mod forest;
pub mod svm;
pub mod tfidf;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cv::{
    cross_validate, cross_validate_with, fold_assignment, CvReport, FoldModels, FoldOutcome,
};
pub use forest::{train_rf, ForestConfig, RandomForest};
pub use svm::{train_svm, LinearSvm, SvmConfig};
pub use tfidf::{tokenize, SparseVector, TfIdfModel};

use crate::error::{Error, Result};
use crate::ingest::{Criteria, LabeledPage, WebPage, NUM_CRITERIA};
use crate::seed;

pub const NUM_ALGORITHMS: usize = 2;
pub const MODEL_FORMAT: &str = "credcomm-credibility-models";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bucket {
    Low,
    Medium,
    High,
}

impl Bucket {
    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Low => "low",
            Bucket::Medium => "medium",
            Bucket::High => "high",
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Bucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Bucket::Low),
            "medium" => Ok(Bucket::Medium),
            "high" => Ok(Bucket::High),
            other => Err(Error::input(format!(
                "unknown credibility bucket {other:?}"
            ))),
        }
    }
}

/// Low for 0-2 satisfied criteria, medium for 3-4, high for 5-7.
pub fn bucket(score: u32) -> Result<Bucket> {
    match score {
        0..=2 => Ok(Bucket::Low),
        3..=4 => Ok(Bucket::Medium),
        5..=7 => Ok(Bucket::High),
        other => Err(Error::ScoreOutOfRange(other)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CredibilityScore {
    pub score: u32,
    pub bucket: Bucket,
    pub per_criterion: Criteria,
}

impl CredibilityScore {
    pub fn from_predictions(per_criterion: Criteria) -> Self {
        let score = per_criterion.sum();
        CredibilityScore {
            score,
            bucket: bucket(score).expect("at most seven criteria"),
            per_criterion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Svm,
    RandomForest,
}

impl Algorithm {
    pub const ALL: [Algorithm; NUM_ALGORITHMS] = [Algorithm::Svm, Algorithm::RandomForest];

    pub fn index(self) -> usize {
        match self {
            Algorithm::Svm => 0,
            Algorithm::RandomForest => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Svm => "svm",
            Algorithm::RandomForest => "rf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CredibilityConfig {
    pub svm: SvmConfig,
    pub forest: ForestConfig,
    pub folds: usize,
    pub seed: u64,
}

impl Default for CredibilityConfig {
    fn default() -> Self {
        CredibilityConfig {
            svm: SvmConfig::default(),
            forest: ForestConfig::default(),
            folds: 10,
            seed: 0,
        }
    }
}

impl CredibilityConfig {
    fn with_forest_seed(&self, index: u64) -> Self {
        let mut cfg = self.clone();
        cfg.forest.seed = seed::derive_index(seed::derive(self.seed, "forest"), index);
        cfg
    }

    pub(crate) fn for_fold(&self, fold: usize) -> Self {
        self.with_forest_seed(fold as u64)
    }

    fn for_final_fit(&self) -> Self {
        self.with_forest_seed(u64::MAX)
    }
}

/// A trained model, or a constant prediction when the training labels for
/// a criterion were all (or all but one) the same.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trained<M> {
    Model { model: M },
    Constant { positive: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionModels {
    pub svm: Vec<Trained<LinearSvm>>,
    pub forest: Vec<Trained<RandomForest>>,
}

impl CriterionModels {
    pub fn predict(&self, algorithm: usize, criterion: usize, x: &SparseVector) -> bool {
        match algorithm {
            0 => match &self.svm[criterion] {
                Trained::Model { model } => model.predict(x),
                Trained::Constant { positive } => *positive,
            },
            _ => match &self.forest[criterion] {
                Trained::Model { model } => model.predict(x),
                Trained::Constant { positive } => *positive,
            },
        }
    }

    fn is_complete(&self) -> bool {
        self.svm.len() == NUM_CRITERIA && self.forest.len() == NUM_CRITERIA
    }
}

/// Train one SVM and one forest per criterion.
pub(crate) fn fit_criterion_models(
    x: &[SparseVector],
    dim: usize,
    labels: &[&LabeledPage],
    cfg: &CredibilityConfig,
) -> Result<CriterionModels> {
    let mut svm = Vec::with_capacity(NUM_CRITERIA);
    let mut forest = Vec::with_capacity(NUM_CRITERIA);
    for c in 0..NUM_CRITERIA {
        let y: Vec<bool> = labels.iter().map(|p| p.criteria.get(c)).collect();
        match train_svm(x, dim, &y, &cfg.svm) {
            Ok(model) => {
                let mut forest_cfg = cfg.forest.clone();
                forest_cfg.seed = seed::derive_index(cfg.forest.seed, c as u64);
                svm.push(Trained::Model { model });
                forest.push(Trained::Model {
                    model: train_rf(x, dim, &y, &forest_cfg)?,
                });
            }
            Err(Error::DegenerateLabels {
                positives,
                negatives,
                ..
            }) => {
                log::warn!(
                    "criterion c{}: only {positives} positive / {negatives} negative labels; using a constant prediction",
                    c + 1
                );
                let positive = positives > negatives;
                svm.push(Trained::Constant { positive });
                forest.push(Trained::Constant { positive });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(CriterionModels { svm, forest })
}

/// The persisted credibility model: vocabulary, both model families, the
/// cross-validation results and which family is authoritative per
/// criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityModelSet {
    pub format: String,
    pub version: u32,
    pub config: CredibilityConfig,
    pub tfidf: TfIdfModel,
    pub models: CriterionModels,
    /// Mean CV accuracy, `[algorithm][criterion]`.
    pub cv_accuracy: [[f64; NUM_CRITERIA]; NUM_ALGORITHMS],
    pub positive_rate: [f64; NUM_CRITERIA],
    pub fold_sizes: Vec<usize>,
    /// Per criterion, the family with the higher CV accuracy (SVM on ties).
    pub selection: [Algorithm; NUM_CRITERIA],
}

impl CredibilityModelSet {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let set: CredibilityModelSet = serde_json::from_str(&text)?;
        if set.format != MODEL_FORMAT || set.version != MODEL_VERSION {
            return Err(Error::input(format!(
                "{}: unsupported model file {} v{}",
                path.display(),
                set.format,
                set.version
            )));
        }
        Ok(set)
    }

    pub fn cv_accuracy_of(&self, algorithm: Algorithm, criterion: usize) -> f64 {
        self.cv_accuracy[algorithm.index()][criterion]
    }
}

/// Cross-validate, then fit the final vocabulary and models on every
/// labelled page.
pub fn train_model_set<S: AsRef<str>>(
    labeled: &[LabeledPage],
    texts: &[S],
    cfg: &CredibilityConfig,
) -> Result<CredibilityModelSet> {
    let report = cross_validate(labeled, texts, cfg)?;
    let tfidf = TfIdfModel::fit(texts)?;
    let x = tfidf.transform_all(texts);
    let refs: Vec<&LabeledPage> = labeled.iter().collect();
    let models = fit_criterion_models(&x, tfidf.dim(), &refs, &cfg.for_final_fit())?;

    let mut selection = [Algorithm::Svm; NUM_CRITERIA];
    for (c, choice) in selection.iter_mut().enumerate() {
        if report.accuracy[1][c] > report.accuracy[0][c] {
            *choice = Algorithm::RandomForest;
        }
        log::info!(
            "criterion c{}: svm {:.3}, rf {:.3} -> {}",
            c + 1,
            report.accuracy[0][c],
            report.accuracy[1][c],
            choice.as_str()
        );
    }
    Ok(CredibilityModelSet {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        config: cfg.clone(),
        tfidf,
        models,
        cv_accuracy: report.accuracy,
        positive_rate: report.positive_rate,
        fold_sizes: report.folds.iter().map(|f| f.test.len()).collect(),
        selection,
    })
}

/// Predict each criterion with its selected model and bucket the count.
pub fn score_page(page: &WebPage, models: &CredibilityModelSet) -> Result<CredibilityScore> {
    score_text(&page.content, models)
}

pub fn score_text(text: &str, models: &CredibilityModelSet) -> Result<CredibilityScore> {
    if !models.models.is_complete() {
        return Err(Error::input(
            "credibility models are untrained or incomplete",
        ));
    }
    let x = models.tfidf.transform(text);
    let mut bits = [false; NUM_CRITERIA];
    for (c, bit) in bits.iter_mut().enumerate() {
        *bit = models.models.predict(models.selection[c].index(), c, &x);
    }
    Ok(CredibilityScore::from_predictions(Criteria(bits)))
}
