//! Binary RBF-kernel SVM used to refine head proposals and trajectories.

mod platt;
mod smo;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};

pub use smo::SolverStats;

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams<T> {
    pub gamma: T,
    pub c: T,
    pub tol: T,
    pub max_iter: usize,
    /// Kernel row cache budget in bytes.
    pub cache_bytes: usize,
}

impl<T: Real> SvmParams<T> {
    pub fn new(gamma: T, c: T) -> Self {
        Self {
            gamma,
            c,
            tol: T::of(1e-3),
            max_iter: 10_000_000,
            cache_bytes: 256 << 20,
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero() && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(self.c > T::zero() && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// The four classifier slots and their default `(gamma, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelSlot {
    HeadEnter,
    HeadExit,
    TrackEnter,
    TrackExit,
}

impl ModelSlot {
    pub fn default_params<T: Real>(self) -> SvmParams<T> {
        let (g, c) = match self {
            ModelSlot::HeadEnter => (20.2, 16.0),
            ModelSlot::HeadExit => (3.4, 520.0),
            ModelSlot::TrackEnter => (0.111, 368.0),
            ModelSlot::TrackExit => (0.05882, 896.0),
        };
        SvmParams::new(T::of(g), T::of(c))
    }
}

/// Per-component zero-mean, unit-variance scaling fit on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn fit(samples: &[Vec<T>]) -> Self {
        let dim = samples.first().map_or(0, Vec::len);
        let n = T::of_usize(samples.len().max(1));
        let mut mean = vec![T::zero(); dim];
        for s in samples {
            for (m, &v) in mean.iter_mut().zip(s) {
                *m = *m + v;
            }
        }
        mean.iter_mut().for_each(|m| *m = *m / n);
        let mut var = vec![T::zero(); dim];
        for s in samples {
            for ((acc, &v), &m) in var.iter_mut().zip(s).zip(&mean) {
                *acc = *acc + (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .zip(&mean)
            .map(|(v, &m)| {
                let sd = (v / n).sqrt();
                // constant components keep unit scale
                if sd > T::epsilon() * (T::one() + m.abs()) {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            scale: vec![T::one(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector<T> {
    /// Standardized feature vector.
    pub x: Vec<T>,
    /// Signed dual weight `alpha * y`.
    pub coef: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    pub gamma: T,
    pub c: T,
    pub bias: T,
    /// Probability calibration `P = sigmoid(calib_a * margin + calib_b)`.
    pub calib_a: T,
    pub calib_b: T,
    pub standardizer: Standardizer<T>,
    pub support: Vec<SupportVector<T>>,
}

#[inline]
pub fn rbf<T: Real>(gamma: T, a: &[T], b: &[T]) -> T {
    let d2: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl<T: Real> SvmModel<T> {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelFormat(m));
        if !(self.gamma > T::zero() && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.c > T::zero() && self.c.is_finite()) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if !(self.calib_a > T::zero() && self.calib_a.is_finite() && self.calib_b.is_finite()) {
            return bad("calibration slope must be positive and finite".into());
        }
        if !self.bias.is_finite() {
            return bad("bias is not finite".into());
        }
        let dim = self.dim();
        if dim == 0 || self.standardizer.scale.len() != dim {
            return bad("standardization statistics have inconsistent dimension".into());
        }
        if self.standardizer.scale.iter().any(|s| !(*s > T::zero())) {
            return bad("standardization scale must be positive".into());
        }
        if self.support.is_empty() {
            return bad("no support vectors".into());
        }
        let slack = T::one() + T::of(1e-9);
        for (i, sv) in self.support.iter().enumerate() {
            if sv.x.len() != dim {
                return bad(format!("support vector {i} has dimension {}", sv.x.len()));
            }
            if !(sv.coef != T::zero() && sv.coef.abs() <= self.c * slack) || sv.x.iter().any(|v| !v.is_finite()) {
                return bad(format!("support vector {i} weight {} outside (0, C]", sv.coef));
            }
        }
        Ok(())
    }

    fn check_dim(&self, x: &[T]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::FeatureDimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Margin for an already-standardized vector.
    pub fn decision_standardized(&self, z: &[T]) -> T {
        self.support
            .iter()
            .map(|sv| sv.coef * rbf(self.gamma, &sv.x, z))
            .sum::<T>()
            + self.bias
    }

    /// Signed margin of a raw feature vector; positive means the positive class.
    pub fn decision(&self, x: &[T]) -> Result<T> {
        self.check_dim(x)?;
        Ok(self.decision_standardized(&self.standardizer.apply(x)))
    }

    pub fn probability_of_margin(&self, margin: T) -> T {
        sigmoid(self.calib_a * margin + self.calib_b)
    }

    pub fn predict_prob(&self, x: &[T]) -> Result<T> {
        Ok(self.probability_of_margin(self.decision(x)?))
    }

    pub fn predict(&self, x: &[T]) -> Result<bool> {
        Ok(self.decision(x)? > T::zero())
    }
}

/// Trained model together with the solver's dual variables.
#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub model: SvmModel<T>,
    /// Dual variable per training sample, in input order.
    pub alphas: Vec<T>,
    pub stats: SolverStats,
}

fn check_inputs<T: Real>(samples: &[Vec<T>], labels: &[i8]) -> Result<usize> {
    if samples.len() != labels.len() {
        return Err(Error::InvalidParameter(format!(
            "{} samples vs {} labels",
            samples.len(),
            labels.len()
        )));
    }
    let dim = samples.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::InvalidParameter("empty feature vectors".into()));
    }
    for (i, s) in samples.iter().enumerate() {
        if s.len() != dim {
            return Err(Error::FeatureDimension {
                expected: dim,
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    Ok(dim)
}

/// Trains with standardization statistics fit on `samples`.
pub fn train<T: Real>(samples: &[Vec<T>], labels: &[i8], params: &SvmParams<T>) -> Result<SvmModel<T>> {
    Ok(train_detailed(samples, labels, params)?.model)
}

pub fn train_detailed<T: Real>(samples: &[Vec<T>], labels: &[i8], params: &SvmParams<T>) -> Result<Trained<T>> {
    params.validate()?;
    check_inputs(samples, labels)?;
    let standardizer = Standardizer::fit(samples);
    train_with_standardizer(samples, labels, params, standardizer)
}

/// Trains using caller-supplied standardization statistics.
pub fn train_with_standardizer<T: Real>(
    samples: &[Vec<T>],
    labels: &[i8],
    params: &SvmParams<T>,
    standardizer: Standardizer<T>,
) -> Result<Trained<T>> {
    params.validate()?;
    let dim = check_inputs(samples, labels)?;
    if standardizer.dim() != dim {
        return Err(Error::FeatureDimension {
            expected: dim,
            got: standardizer.dim(),
        });
    }
    let z: Vec<Vec<T>> = samples.iter().map(|s| standardizer.apply(s)).collect();
    let sol = smo::solve(&z, labels, params)?;

    let support: Vec<SupportVector<T>> = sol
        .alphas
        .iter()
        .zip(labels)
        .zip(&z)
        .filter(|((&a, _), _)| a > T::zero())
        .map(|((&a, &y), x)| SupportVector {
            x: x.clone(),
            coef: if y > 0 { a } else { -a },
        })
        .collect();

    let mut model = SvmModel {
        gamma: params.gamma,
        c: params.c,
        bias: sol.bias,
        calib_a: T::one(),
        calib_b: T::zero(),
        standardizer,
        support,
    };
    let margins: Vec<T> = z.iter().map(|x| model.decision_standardized(x)).collect();
    let (a, b) = platt::fit(&margins, labels);
    model.calib_a = a;
    model.calib_b = b;
    Ok(Trained {
        model,
        alphas: sol.alphas,
        stats: sol.stats,
    })
}

/// Fold index per sample: each class is shuffled with `seed` and dealt
/// round-robin, so every fold gets a near-equal share of both classes.
pub fn stratified_folds(labels: &[i8], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; labels.len()];
    for class in [1i8, -1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::InvalidParameter(format!(
                "class {class:+} has {} samples for {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            folds[i] = j % k;
        }
    }
    Ok(folds)
}

/// Out-of-fold margins: every sample is scored by a model trained on the
/// other `k - 1` folds. Feeds ROC curves without touching test data.
pub fn cross_val_margins<T: Real>(
    samples: &[Vec<T>],
    labels: &[i8],
    params: &SvmParams<T>,
    k: usize,
    seed: u64,
) -> Result<Vec<T>> {
    check_inputs(samples, labels)?;
    let folds = stratified_folds(labels, k, seed)?;
    let mut margins = vec![T::zero(); samples.len()];
    for f in 0..k {
        let (train_x, train_y): (Vec<Vec<T>>, Vec<i8>) = (0..samples.len())
            .filter(|&i| folds[i] != f)
            .map(|i| (samples[i].clone(), labels[i]))
            .unzip();
        let model = train(&train_x, &train_y, params)?;
        for i in (0..samples.len()).filter(|&i| folds[i] == f) {
            margins[i] = model.decision(&samples[i])?;
        }
    }
    Ok(margins)
}

/// Per-sample KKT violation measured through the model's own decision
/// function: `|y f(x) - 1|` for free vectors, one-sided at the bounds.
pub fn kkt_residuals<T: Real>(model: &SvmModel<T>, samples: &[Vec<T>], labels: &[i8], alphas: &[T]) -> Result<Vec<T>> {
    samples
        .iter()
        .zip(labels)
        .zip(alphas)
        .map(|((x, &y), &a)| {
            let yf = T::of(y as f64) * model.decision(x)?;
            let v = yf - T::one();
            Ok(if a <= T::zero() {
                (-v).max(T::zero())
            } else if a >= model.c {
                v.max(T::zero())
            } else {
                v.abs()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_seeded() {
        let labels: Vec<i8> = (0..31).map(|i| if i % 3 == 0 { 1 } else { -1 }).collect();
        let f = stratified_folds(&labels, 3, 7).unwrap();
        for k in 0..3 {
            let pos = (0..31).filter(|&i| f[i] == k && labels[i] > 0).count();
            let neg = (0..31).filter(|&i| f[i] == k && labels[i] < 0).count();
            assert!(
                (3..=4).contains(&pos) && (6..=7).contains(&neg),
                "fold {k}: {pos}/{neg}"
            );
        }
        assert_eq!(f, stratified_folds(&labels, 3, 7).unwrap());
        assert!(stratified_folds(&labels, 1, 7).is_err());
        assert!(stratified_folds(&[1, -1, -1], 2, 0).is_err());
    }

    #[test]
    fn out_of_fold_margins_separate_blobs() {
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![if i % 2 == 0 { 0.0 } else { 3.0 } + (i as f64) * 0.01])
            .collect();
        let ys: Vec<i8> = (0..40).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let m = cross_val_margins(&xs, &ys, &SvmParams::new(1.0, 10.0), 3, 1).unwrap();
        assert!(m.iter().zip(&ys).all(|(&v, &y)| v * y as f64 > 0.0));
    }

    fn blobs() -> (Vec<Vec<f64>>, Vec<i8>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            let t = i as f64 * 0.3;
            xs.push(vec![t.sin() * 0.1, t.cos() * 0.1]);
            ys.push(1);
            xs.push(vec![3.0 + t.cos() * 0.1, t.sin() * 0.1]);
            ys.push(-1);
        }
        (xs, ys)
    }

    #[test]
    fn separable_blobs_classified() {
        let (xs, ys) = blobs();
        let model = train(&xs, &ys, &SvmParams::new(1.0, 10.0)).unwrap();
        for (x, &y) in xs.iter().zip(&ys) {
            assert_eq!(model.predict(x).unwrap(), y > 0);
        }
        model.validate().unwrap();
    }

    #[test]
    fn single_class_rejected() {
        let (xs, _) = blobs();
        let ys = vec![1; xs.len()];
        assert!(matches!(
            train(&xs, &ys, &SvmParams::new(1.0, 1.0)),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let (mut xs, ys) = blobs();
        xs[3][1] = f64::NAN;
        assert!(matches!(
            train(&xs, &ys, &SvmParams::new(1.0, 1.0)),
            Err(Error::NonFinite(3))
        ));
    }

    #[test]
    fn bad_params_rejected() {
        let (xs, ys) = blobs();
        assert!(train(&xs, &ys, &SvmParams::new(0.0, 1.0)).is_err());
        assert!(train(&xs, &ys, &SvmParams::new(1.0, -1.0)).is_err());
    }

    #[test]
    fn dimension_mismatch_on_decision() {
        let (xs, ys) = blobs();
        let model = train(&xs, &ys, &SvmParams::new(1.0, 1.0)).unwrap();
        assert!(matches!(model.decision(&[1.0]), Err(Error::FeatureDimension { .. })));
    }

    #[test]
    fn probability_midpoint_and_monotone() {
        let (xs, ys) = blobs();
        let mut model = train(&xs, &ys, &SvmParams::new(1.0, 1.0)).unwrap();
        model.calib_a = 1.0;
        model.calib_b = 0.0;
        assert_eq!(model.probability_of_margin(0.0), 0.5);
        let p: Vec<f64> = [-50.0, -1.0, 0.0, 1.0, 50.0]
            .iter()
            .map(|&m| model.probability_of_margin(m))
            .collect();
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert!(p[0] > 0.0 && p[4] < 1.0);
    }

    #[test]
    fn runs_in_f32() {
        let (xs, ys) = blobs();
        let xs: Vec<Vec<f32>> = xs.iter().map(|x| x.iter().map(|&v| v as f32).collect()).collect();
        let model = train(&xs, &ys, &SvmParams::new(1.0f32, 10.0)).unwrap();
        assert!(xs.iter().zip(&ys).all(|(x, &y)| model.predict(x).unwrap() == (y > 0)));
    }

    #[test]
    fn default_slots() {
        let p: SvmParams<f64> = ModelSlot::HeadEnter.default_params();
        assert_eq!((p.gamma, p.c), (20.2, 16.0));
        let p: SvmParams<f64> = ModelSlot::TrackExit.default_params();
        assert_eq!((p.gamma, p.c), (0.05882, 896.0));
    }
}
