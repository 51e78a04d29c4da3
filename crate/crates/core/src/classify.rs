//! Linear one-vs-rest max-margin classifier and the error rate.
//!
//! Each class gets a hinge-loss hyperplane trained by Pegasos-style
//! stochastic subgradient steps (step `1 / (lambda t)`, projection onto the
//! `1 / sqrt(lambda)` ball) and the iterates are averaged. The bias is an
//! extra constant input and is regularised with the rest. Features are
//! z-scored with training statistics before anything else.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::numerics::{Matrix, SeededRng, Vector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierParams {
    /// Regularisation strength.
    pub lambda: f64,
    pub epochs: usize,
    /// Seed of the per-epoch shuffles.
    pub seed: u64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        Self { lambda: 1e-4, epochs: 50, seed: 0 }
    }
}

impl ClassifierParams {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    /// `C x (F + 1)` hyperplanes over standardised features; the last column
    /// is the bias.
    pub weights: Matrix,
    pub mean: Vector,
    pub std: Vector,
    pub params: ClassifierParams,
}

impl LinearClassifier {
    pub fn n_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Class scores, `C x p`, for features laid out one pattern per column.
    pub fn scores(&self, features: &Matrix) -> Result<Matrix> {
        if features.nrows() != self.n_features() {
            return Err(Error::shape("classifier features", self.n_features(), features.nrows()));
        }
        let x = augment(&standardize(features, &self.mean, &self.std));
        Ok(&self.weights * x)
    }

    pub fn predict(&self, features: &Matrix) -> Result<Vec<usize>> {
        Ok(predict_from_scores(&self.scores(features)?))
    }
}

/// Column-wise argmax; ties go to the lowest class id.
pub fn predict_from_scores(scores: &Matrix) -> Vec<usize> {
    scores
        .column_iter()
        .map(|col| {
            let mut best = 0;
            for (c, &v) in col.iter().enumerate() {
                if v > col[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn standardize(features: &Matrix, mean: &Vector, std: &Vector) -> Matrix {
    let mut x = features.clone();
    for (i, mut row) in x.row_iter_mut().enumerate() {
        let (m, s) = (mean[i], std[i]);
        row.apply(|v| *v = (*v - m) / s);
    }
    x
}

fn augment(x: &Matrix) -> Matrix {
    x.clone().insert_row(x.nrows(), 1.0)
}

/// Trains on `features` (`F x p`, one pattern per column) with class ids
/// `labels` in `0..C`; C is the largest id plus one and must be at least 2.
pub fn train_classifier(features: &Matrix, labels: &[usize], params: &ClassifierParams) -> Result<LinearClassifier> {
    params.validate()?;
    let (f, p) = features.shape();
    if labels.len() != p {
        return Err(Error::shape("train_classifier labels", p, labels.len()));
    }
    if f == 0 || p == 0 {
        return Err(Error::shape("train_classifier features", "at least 1x1", format!("{f}x{p}")));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("features contain non-finite values".into()));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let present = (0..n_classes).filter(|c| labels.contains(c)).count();
    if present < 2 {
        return Err(Error::Parameter(format!(
            "classifier needs at least 2 classes in the training labels, got {present}"
        )));
    }

    let mut mean = Vector::zeros(f);
    let mut std = Vector::zeros(f);
    for (i, row) in features.row_iter().enumerate() {
        let m = row.sum() / p as f64;
        let var = row.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / p as f64;
        mean[i] = m;
        std[i] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let x = augment(&standardize(features, &mean, &std));

    // One shuffle sequence shared by every class keeps the result independent
    // of how the per-class jobs are scheduled.
    let mut rng = SeededRng::new(params.seed, "classify/shuffle").rng();
    let mut order: Vec<usize> = (0..p).collect();
    let orders: Vec<Vec<usize>> = (0..params.epochs)
        .map(|_| {
            order.shuffle(&mut rng);
            order.clone()
        })
        .collect();

    let rows: Vec<Vector> =
        (0..n_classes).into_par_iter().map(|c| pegasos(&x, labels, c, params.lambda, &orders)).collect();
    let mut weights = Matrix::zeros(n_classes, f + 1);
    for (c, w) in rows.iter().enumerate() {
        weights.row_mut(c).copy_from(&w.transpose());
    }
    Ok(LinearClassifier { weights, mean, std, params: *params })
}

fn pegasos(x: &Matrix, labels: &[usize], class: usize, lambda: f64, orders: &[Vec<usize>]) -> Vector {
    let dim = x.nrows();
    let radius = 1.0 / lambda.sqrt();
    let mut w = Vector::zeros(dim);
    let mut avg = Vector::zeros(dim);
    let mut t = 0usize;
    for order in orders {
        for &i in order {
            t += 1;
            let xi = x.column(i);
            let y = if labels[i] == class { 1.0 } else { -1.0 };
            let eta = 1.0 / (lambda * t as f64);
            let margin = y * w.dot(&xi);
            w *= 1.0 - eta * lambda;
            if margin < 1.0 {
                w.axpy(eta * y, &xi, 1.0);
            }
            let norm = w.norm();
            if norm > radius {
                w *= radius / norm;
            }
            avg.axpy(1.0 / t as f64, &(&w - &avg), 1.0);
        }
    }
    avg
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub error_rate: f64,
    pub misclassified: usize,
    pub total: usize,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalResult {
    pub fn from_predictions(predicted: &[usize], truth: &[usize], n_classes: usize) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::shape("evaluate", truth.len(), predicted.len()));
        }
        if truth.is_empty() {
            return Err(Error::Parameter("cannot evaluate on zero patterns".into()));
        }
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&p, &t) in predicted.iter().zip(truth) {
            if p >= n_classes || t >= n_classes {
                return Err(Error::Parameter(format!("class id outside 0..{n_classes}")));
            }
            confusion[t][p] += 1;
        }
        let misclassified = predicted.iter().zip(truth).filter(|(p, t)| p != t).count();
        Ok(Self { error_rate: misclassified as f64 / truth.len() as f64, misclassified, total: truth.len(), confusion })
    }

    pub fn accuracy(&self) -> f64 {
        (self.total - self.misclassified) as f64 / self.total as f64
    }
}

/// Error rate of `c` on `features`: misclassified over total.
pub fn evaluate(c: &LinearClassifier, features: &Matrix, labels: &[usize]) -> Result<EvalResult> {
    if features.ncols() != labels.len() {
        return Err(Error::shape("evaluate labels", features.ncols(), labels.len()));
    }
    let n_classes = c.n_classes().max(labels.iter().max().map_or(0, |m| m + 1));
    EvalResult::from_predictions(&c.predict(features)?, labels, n_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(points: &[(f64, f64, usize)]) -> (Matrix, Vec<usize>) {
        let m = Matrix::from_fn(2, points.len(), |i, j| if i == 0 { points[j].0 } else { points[j].1 });
        (m, points.iter().map(|p| p.2).collect())
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let (x, y) = toy(&[(0.0, 0.0, 0), (1.0, 0.2, 0), (0.3, 0.8, 0), (3.0, 3.0, 1), (4.0, 2.5, 1), (2.8, 4.1, 1)]);
        let c = train_classifier(&x, &y, &ClassifierParams::default()).unwrap();
        assert_eq!(evaluate(&c, &x, &y).unwrap().error_rate, 0.0);
    }

    #[test]
    fn xor_cannot_be_separated() {
        let (x, y) = toy(&[(0.0, 0.0, 0), (1.0, 1.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1)]);
        let c = train_classifier(&x, &y, &ClassifierParams::default()).unwrap();
        assert!(evaluate(&c, &x, &y).unwrap().error_rate >= 0.25);
    }

    #[test]
    fn single_class_is_rejected() {
        let (x, y) = toy(&[(0.0, 0.0, 1), (1.0, 1.0, 1)]);
        assert!(matches!(train_classifier(&x, &y, &ClassifierParams::default()), Err(Error::Parameter(_))));
    }

    #[test]
    fn error_rate_is_direct_ratio() {
        let truth = vec![0usize; 100];
        let mut pred = truth.clone();
        pred[..20].fill(1);
        let r = EvalResult::from_predictions(&pred, &truth, 2).unwrap();
        assert_eq!(r.error_rate, 0.2);
        assert_eq!(r.confusion, vec![vec![80, 20], vec![0, 0]]);
        let perfect = EvalResult::from_predictions(&truth, &truth, 2).unwrap();
        assert_eq!(perfect.error_rate, 0.0);
    }

    #[test]
    fn argmax_ties_pick_lowest_class() {
        let s = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 2.0, 0.5, 2.0]);
        assert_eq!(predict_from_scores(&s), vec![0, 1]);
    }
}
