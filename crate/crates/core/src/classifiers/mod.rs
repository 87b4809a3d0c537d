//! Trainable predictors behind one contract: [`train`] and [`predict`].

pub mod forest;
pub mod svm;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::CommandLabel;

pub use forest::{DecisionTree, ForestModel, ForestParams, MaxFeatures};
pub use svm::{Kernel, SvmModel, SvmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    SvmLinear,
    SvmPoly,
    RandomForest,
}

impl ClassifierKind {
    pub fn tag(self) -> &'static str {
        match self {
            ClassifierKind::SvmLinear => "svm-linear",
            ClassifierKind::SvmPoly => "svm-poly",
            ClassifierKind::RandomForest => "rf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainableSpec {
    SvmLinear(SvmParams),
    SvmPoly(SvmParams),
    RandomForest(ForestParams),
}

impl TrainableSpec {
    pub fn svm_linear() -> Self {
        TrainableSpec::SvmLinear(SvmParams::default())
    }

    pub fn svm_poly() -> Self {
        TrainableSpec::SvmPoly(SvmParams::default())
    }

    pub fn random_forest(seed: u64) -> Self {
        TrainableSpec::RandomForest(ForestParams {
            seed,
            ..ForestParams::default()
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            TrainableSpec::SvmLinear(_) => ClassifierKind::SvmLinear,
            TrainableSpec::SvmPoly(_) => ClassifierKind::SvmPoly,
            TrainableSpec::RandomForest(_) => ClassifierKind::RandomForest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrainableSpec::SvmLinear(p) => p.validate(false),
            TrainableSpec::SvmPoly(p) => p.validate(true),
            TrainableSpec::RandomForest(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FittedParams {
    Svm(SvmModel),
    Forest(ForestModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub n_features: usize,
    pub params: FittedParams,
    /// Fraction of the training rows the fitted model labels correctly.
    pub training_accuracy: f64,
}

/// Fits a classifier on the rows of `features`.
pub fn train(
    spec: &TrainableSpec,
    features: ArrayView2<'_, f64>,
    labels: &[CommandLabel],
) -> Result<TrainedModel> {
    spec.validate()?;
    if features.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: features.nrows(),
        });
    }
    if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Degenerate(format!(
            "training data must contain at least 2 classes, found {}",
            classes.len()
        )));
    }
    let params = match spec {
        TrainableSpec::SvmLinear(p) => FittedParams::Svm(SvmModel::fit(
            features,
            labels,
            &classes,
            Kernel::Linear,
            p,
        )?),
        TrainableSpec::SvmPoly(p) => {
            let kernel = Kernel::Polynomial {
                degree: p.degree,
                gamma: p.gamma,
                coef0: p.coef0,
            };
            FittedParams::Svm(SvmModel::fit(features, labels, &classes, kernel, p)?)
        }
        TrainableSpec::RandomForest(p) => {
            FittedParams::Forest(ForestModel::fit(features, labels, &classes, p)?)
        }
    };
    let mut model = TrainedModel {
        kind: spec.kind(),
        n_features: features.ncols(),
        params,
        training_accuracy: 0.0,
    };
    let predicted = predict_batch(&model, features)?;
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    model.training_accuracy = correct as f64 / labels.len() as f64;
    Ok(model)
}

pub fn predict(model: &TrainedModel, features: ArrayView1<'_, f64>) -> Result<CommandLabel> {
    if features.len() != model.n_features {
        return Err(Error::DimensionMismatch {
            expected: model.n_features,
            actual: features.len(),
        });
    }
    Ok(match &model.params {
        FittedParams::Svm(m) => m.predict(features),
        FittedParams::Forest(m) => m.predict(features),
    })
}

pub fn predict_batch(
    model: &TrainedModel,
    features: ArrayView2<'_, f64>,
) -> Result<Vec<CommandLabel>> {
    features
        .rows()
        .into_iter()
        .map(|r| predict(model, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};

    fn labels(v: &[usize]) -> Vec<CommandLabel> {
        v.iter().copied().map(CommandLabel).collect()
    }

    #[test]
    fn rejects_single_class_and_nan() {
        let x = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        assert!(matches!(
            train(&TrainableSpec::svm_linear(), x.view(), &labels(&[1, 1])),
            Err(Error::Degenerate(_))
        ));
        let bad = arr2(&[[0.0, f64::NAN], [1.0, 0.0]]);
        assert!(matches!(
            train(
                &TrainableSpec::random_forest(0),
                bad.view(),
                &labels(&[0, 1])
            ),
            Err(Error::NonFinite(1))
        ));
        assert!(train(&TrainableSpec::svm_linear(), x.view(), &labels(&[0])).is_err());
    }

    #[test]
    fn spec_validation() {
        let bad_c = TrainableSpec::SvmLinear(SvmParams {
            c: 0.0,
            ..SvmParams::default()
        });
        assert!(bad_c.validate().is_err());
        let bad_deg = TrainableSpec::SvmPoly(SvmParams {
            degree: 1,
            ..SvmParams::default()
        });
        assert!(bad_deg.validate().is_err());
        let no_trees = TrainableSpec::RandomForest(ForestParams {
            n_trees: 0,
            ..ForestParams::default()
        });
        assert!(no_trees.validate().is_err());
    }

    #[test]
    fn width_mismatch_on_predict() {
        let x = arr2(&[[1.0, 1.0], [-1.0, -1.0]]);
        let m = train(&TrainableSpec::svm_linear(), x.view(), &labels(&[0, 1])).unwrap();
        assert!(predict(&m, arr1(&[1.0, 2.0, 3.0]).view()).is_err());
        let empty = Array2::<f64>::zeros((0, 2));
        assert!(predict_batch(&m, empty.view()).unwrap().is_empty());
    }
}
