use serde::{Deserialize, Serialize};

use crate::dataset::{CLASS_ORDER_ID, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::jpeg_sim::QualityFactor;
use crate::models::{Inputs, Model, ModelKind};
use crate::nn::argmax;

use super::train::Example;

/// Counts indexed `[true][predicted]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = ConfusionMatrix::default();
        for (t, p) in pairs {
            if t >= NUM_CLASSES || p >= NUM_CLASSES {
                return Err(Error::invalid(format!("class pair ({t}, {p}) out of range")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn row_sum(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn total(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.row_sum(c)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    /// `None` when the class has no samples.
    pub fn tpr(&self, class: usize) -> Option<f64> {
        let n = self.row_sum(class);
        (n > 0).then(|| self.counts[class][class] as f64 / n as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.trace() as f64 / n as f64)
    }
}

/// Test-set performance of one classifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ModelKind,
    pub qf2: QualityFactor,
    /// Per-class true positive rate; `None` for classes absent from the set.
    pub tpr: Vec<Option<f64>>,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub class_order: String,
}

impl EvalReport {
    pub fn from_confusion(kind: ModelKind, qf2: QualityFactor, confusion: ConfusionMatrix) -> Result<Self> {
        let accuracy = confusion
            .accuracy()
            .ok_or_else(|| Error::invalid("cannot evaluate on an empty test set"))?;
        Ok(EvalReport {
            kind,
            qf2,
            tpr: (0..NUM_CLASSES).map(|c| confusion.tpr(c)).collect(),
            accuracy,
            confusion,
            class_order: CLASS_ORDER_ID.to_string(),
        })
    }
}

/// Anything that maps encoded inputs to class probabilities.
pub trait Predictor: Sync {
    fn kind(&self) -> ModelKind;
    fn probabilities(&self, inputs: &[Inputs]) -> Result<Vec<Vec<f32>>>;
}

impl Predictor for Model {
    fn kind(&self) -> ModelKind {
        Model::kind(self)
    }

    fn probabilities(&self, inputs: &[Inputs]) -> Result<Vec<Vec<f32>>> {
        self.predict_batch(inputs)
    }
}

/// Confusion matrix and rates from argmax predictions on `test`.
pub fn evaluate(model: &dyn Predictor, qf2: QualityFactor, test: &[Example]) -> Result<EvalReport> {
    let inputs: Vec<Inputs> = test.iter().map(|e| e.inputs.clone()).collect();
    let probs = model.probabilities(&inputs)?;
    let confusion = ConfusionMatrix::from_pairs(test.iter().zip(&probs).map(|(e, p)| (e.label, argmax(p))))?;
    EvalReport::from_confusion(model.kind(), qf2, confusion)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(usize);

    impl Predictor for Constant {
        fn kind(&self) -> ModelKind {
            ModelKind::Frequency
        }

        fn probabilities(&self, inputs: &[Inputs]) -> Result<Vec<Vec<f32>>> {
            let mut p = vec![0.0; NUM_CLASSES];
            p[self.0] = 1.0;
            Ok(vec![p; inputs.len()])
        }
    }

    struct Oracle;

    impl Predictor for Oracle {
        fn kind(&self) -> ModelKind {
            ModelKind::Spatial
        }

        fn probabilities(&self, inputs: &[Inputs]) -> Result<Vec<Vec<f32>>> {
            Ok(inputs
                .iter()
                .map(|x| {
                    let mut p = vec![0.0; NUM_CLASSES];
                    p[x.histogram[0] as usize] = 1.0;
                    p
                })
                .collect())
        }
    }

    fn balanced(per_class: usize) -> Vec<Example> {
        (0..NUM_CLASSES * per_class)
            .map(|i| Example {
                inputs: Inputs {
                    pixels: vec![],
                    histogram: vec![(i % NUM_CLASSES) as f32],
                },
                label: i % NUM_CLASSES,
            })
            .collect()
    }

    fn q90() -> QualityFactor {
        QualityFactor::new(90).unwrap()
    }

    #[test]
    fn perfect_predictor() {
        let r = evaluate(&Oracle, q90(), &balanced(4)).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.tpr.iter().all(|t| *t == Some(1.0)));
        for t in 0..9 {
            for p in 0..9 {
                assert_eq!(r.confusion.counts[t][p], if t == p { 4 } else { 0 });
            }
        }
    }

    #[test]
    fn constant_predictor() {
        let r = evaluate(&Constant(1), q90(), &balanced(5)).unwrap();
        assert_eq!(r.tpr[1], Some(1.0));
        assert!(r.tpr.iter().enumerate().all(|(c, t)| c == 1 || *t == Some(0.0)));
        assert!((r.accuracy - 1.0 / 9.0).abs() < 1e-12);
        // On a balanced set accuracy is also the mean TPR.
        let mean: f64 = r.tpr.iter().map(|t| t.unwrap()).sum::<f64>() / 9.0;
        assert!((mean - r.accuracy).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_undefined() {
        let c = ConfusionMatrix::from_pairs([(0, 0), (1, 0)]).unwrap();
        assert_eq!(c.tpr(0), Some(1.0));
        assert_eq!(c.tpr(1), Some(0.0));
        assert_eq!(c.tpr(5), None);
        assert!(ConfusionMatrix::from_pairs([(9, 0)]).is_err());
        assert!(EvalReport::from_confusion(ModelKind::Spatial, q90(), ConfusionMatrix::default()).is_err());
    }
}
