use rand::seq::SliceRandom;
use serde::Serialize;

use super::tfidf::TfIdfModel;
use super::{fit_criterion_models, CredibilityConfig, CriterionModels, NUM_ALGORITHMS};
use crate::error::{Error, Result};
use crate::ingest::{LabeledPage, NUM_CRITERIA};
use crate::seed;

/// Split `0..n` into `folds` disjoint test sets after a seeded shuffle.
/// Sizes differ by at most one; each set is returned sorted.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    let mut out = vec![Vec::new(); folds];
    for (pos, idx) in order.into_iter().enumerate() {
        out[pos % folds].push(idx);
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    out
}

/// Everything trained inside one fold, kept only when asked for.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldModels {
    pub tfidf: TfIdfModel,
    pub models: CriterionModels,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldOutcome {
    pub test: Vec<usize>,
    /// `[algorithm][criterion]` accuracy on the held-out examples.
    pub accuracy: [[f64; NUM_CRITERIA]; NUM_ALGORITHMS],
    #[serde(skip)]
    pub models: Option<FoldModels>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub folds: Vec<FoldOutcome>,
    /// Mean over folds, `[algorithm][criterion]`; algorithm 0 is the SVM,
    /// 1 the random forest.
    pub accuracy: [[f64; NUM_CRITERIA]; NUM_ALGORITHMS],
    /// Share of positive labels per criterion over the whole labelled set.
    pub positive_rate: [f64; NUM_CRITERIA],
}

/// k-fold cross-validation of all per-criterion models. TF-IDF is refitted
/// on each training fold, so held-out text never reaches the vocabulary or
/// idf weights.
pub fn cross_validate<S: AsRef<str>>(
    labeled: &[LabeledPage],
    texts: &[S],
    cfg: &CredibilityConfig,
) -> Result<CvReport> {
    cross_validate_with(labeled, texts, cfg, false)
}

/// As [`cross_validate`], optionally keeping each fold's trained models.
pub fn cross_validate_with<S: AsRef<str>>(
    labeled: &[LabeledPage],
    texts: &[S],
    cfg: &CredibilityConfig,
    retain_models: bool,
) -> Result<CvReport> {
    assert_eq!(labeled.len(), texts.len(), "one text per labelled page");
    if cfg.folds < 2 {
        return Err(Error::input("cross-validation needs at least 2 folds"));
    }
    if labeled.len() < cfg.folds {
        return Err(Error::input(format!(
            "cross-validation needs at least {} labelled pages, got {}",
            cfg.folds,
            labeled.len()
        )));
    }
    let folds = fold_assignment(labeled.len(), cfg.folds, seed::derive(cfg.seed, "cv-folds"));
    let mut outcomes = Vec::with_capacity(folds.len());
    for (f, test) in folds.into_iter().enumerate() {
        let mut in_test = vec![false; labeled.len()];
        for &i in &test {
            in_test[i] = true;
        }
        let train: Vec<usize> = (0..labeled.len()).filter(|&i| !in_test[i]).collect();
        let train_texts: Vec<&str> = train.iter().map(|&i| texts[i].as_ref()).collect();
        let train_labels: Vec<&LabeledPage> = train.iter().map(|&i| &labeled[i]).collect();

        let tfidf = TfIdfModel::fit(&train_texts)?;
        let x_train = tfidf.transform_all(&train_texts);
        let fold_cfg = cfg.for_fold(f);
        let models = fit_criterion_models(&x_train, tfidf.dim(), &train_labels, &fold_cfg)?;

        let mut accuracy = [[0.0; NUM_CRITERIA]; NUM_ALGORITHMS];
        for &i in &test {
            let x = tfidf.transform(texts[i].as_ref());
            for c in 0..NUM_CRITERIA {
                let truth = labeled[i].criteria.get(c);
                for (a, row) in accuracy.iter_mut().enumerate() {
                    if models.predict(a, c, &x) == truth {
                        row[c] += 1.0;
                    }
                }
            }
        }
        for row in &mut accuracy {
            for v in row.iter_mut() {
                *v /= test.len() as f64;
            }
        }
        outcomes.push(FoldOutcome {
            test,
            accuracy,
            models: retain_models.then_some(FoldModels { tfidf, models }),
        });
    }

    let mut accuracy = [[0.0; NUM_CRITERIA]; NUM_ALGORITHMS];
    for o in &outcomes {
        for a in 0..NUM_ALGORITHMS {
            for c in 0..NUM_CRITERIA {
                accuracy[a][c] += o.accuracy[a][c] / outcomes.len() as f64;
            }
        }
    }
    let mut positive_rate = [0.0; NUM_CRITERIA];
    for (c, rate) in positive_rate.iter_mut().enumerate() {
        let pos = labeled.iter().filter(|p| p.criteria.get(c)).count();
        *rate = pos as f64 / labeled.len() as f64;
    }
    Ok(CvReport {
        folds: outcomes,
        accuracy,
        positive_rate,
    })
}
