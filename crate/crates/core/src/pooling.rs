//! Global pooling variants, multi-label losses and heatmap composition.

use ndarray::{Array2, Array3, Axis};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Clamp applied to scores before taking logarithms.
pub const SCORE_EPS: f64 = 1e-7;

fn check_region<T: Scalar>(values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("pooling region"));
    }
    Ok(())
}

pub fn avg_pool<T: Scalar>(values: &[T]) -> Result<T> {
    check_region(values)?;
    Ok(values.iter().copied().sum::<T>() / T::of_usize(values.len()))
}

pub fn max_pool<T: Scalar>(values: &[T]) -> Result<T> {
    check_region(values)?;
    Ok(values.iter().copied().fold(T::neg_infinity(), T::max))
}

/// Log-sum-exp pooling in the shifted form
/// `x* + (1/r) log[(1/S) Σ exp(r (x - x*))]` with `x* = max |x|`.
///
/// The inner sum is itself accumulated relative to its largest exponent, so
/// regions of large negative activations cannot underflow to `log 0`.
pub fn lse_pool<T: Scalar>(values: &[T], r: T) -> Result<T> {
    if !(r > T::zero()) || !r.is_finite() {
        return Err(Error::NonPositiveR);
    }
    check_region(values)?;
    let shift = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let exps: Vec<T> = values.iter().map(|&v| r * (v - shift)).collect();
    let top = exps.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = exps.iter().map(|&e| (e - top).exp()).sum();
    let log_mean = top + (sum / T::of_usize(values.len())).ln();
    Ok(shift + log_mean / r)
}

/// The unshifted log-sum-exp, `(1/r) log[(1/S) Σ exp(r x)]`. Overflows for
/// large `r x`; kept as a reference form.
pub fn lse_pool_naive<T: Scalar>(values: &[T], r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(Error::NonPositiveR);
    }
    check_region(values)?;
    let sum: T = values.iter().map(|&v| (r * v).exp()).sum();
    Ok((sum / T::of_usize(values.len())).ln() / r)
}

/// One image's 0/1 labels and predicted scores.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelScorePair<T> {
    pub y: Vec<u8>,
    pub f: Vec<T>,
}

impl<T: Scalar> LabelScorePair<T> {
    pub fn new(y: Vec<u8>, f: Vec<T>) -> Result<Self> {
        if y.len() != f.len() {
            return Err(Error::LengthMismatch {
                expected: y.len(),
                got: f.len(),
            });
        }
        if y.iter().any(|&v| v > 1) {
            return Err(Error::DimMismatch("labels must be 0 or 1".into()));
        }
        Ok(Self { y, f })
    }
}

/// Positive/negative balancing weights for a batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Balance<T> {
    pub beta_p: T,
    pub beta_n: T,
}

fn validate<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<(usize, usize)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let (mut pos, mut neg) = (0, 0);
    for pair in batch {
        if pair.y.len() != pair.f.len() {
            return Err(Error::LengthMismatch {
                expected: pair.y.len(),
                got: pair.f.len(),
            });
        }
        if pair.f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        for &y in &pair.y {
            if y == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
        }
    }
    Ok((pos, neg))
}

/// `beta_P = (|P|+|N|)/|P|`, `beta_N = (|P|+|N|)/|N|` over every label in the
/// batch.
pub fn batch_balance<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<Balance<T>> {
    let (pos, neg) = validate(batch)?;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateBatch);
    }
    let total = T::of_usize(pos + neg);
    Ok(Balance {
        beta_p: total / T::of_usize(pos),
        beta_n: total / T::of_usize(neg),
    })
}

fn clamp_score<T: Scalar>(f: T) -> T {
    let eps = T::of(SCORE_EPS);
    f.max(eps).min(T::one() - eps)
}

fn weighted_ce<T: Scalar>(batch: &[LabelScorePair<T>], w: Balance<T>) -> T {
    let mut loss = T::zero();
    for pair in batch {
        for (&y, &f) in pair.y.iter().zip(&pair.f) {
            let f = clamp_score(f);
            loss = loss
                + if y == 1 {
                    -w.beta_p * f.ln()
                } else {
                    -w.beta_n * (T::one() - f).ln()
                };
        }
    }
    loss
}

fn weighted_ce_grad<T: Scalar>(batch: &[LabelScorePair<T>], w: Balance<T>) -> Vec<Vec<T>> {
    batch
        .iter()
        .map(|pair| {
            pair.y
                .iter()
                .zip(&pair.f)
                .map(|(&y, &f)| {
                    let f = clamp_score(f);
                    if y == 1 {
                        -w.beta_p / f
                    } else {
                        w.beta_n / (T::one() - f)
                    }
                })
                .collect()
        })
        .collect()
}

/// Weighted cross-entropy summed over every label of the batch.
pub fn wcel<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<T> {
    let w = batch_balance(batch)?;
    Ok(weighted_ce(batch, w))
}

/// `dL/df` for [`wcel`], shaped like the batch.
pub fn wcel_gradient<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<Vec<Vec<T>>> {
    let w = batch_balance(batch)?;
    Ok(weighted_ce_grad(batch, w))
}

fn unit<T: Scalar>() -> Balance<T> {
    Balance {
        beta_p: T::one(),
        beta_n: T::one(),
    }
}

/// Unweighted cross-entropy.
pub fn cel<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<T> {
    validate(batch)?;
    Ok(weighted_ce(batch, unit()))
}

pub fn cel_gradient<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<Vec<Vec<T>>> {
    validate(batch)?;
    Ok(weighted_ce_grad(batch, unit()))
}

/// `Σ (f - y)^2`.
pub fn euclidean_loss<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<T> {
    validate(batch)?;
    Ok(batch
        .iter()
        .flat_map(|p| p.y.iter().zip(&p.f))
        .map(|(&y, &f)| {
            let d = f - T::of(y as f64);
            d * d
        })
        .sum())
}

/// `Σ max(0, 1 - (2y - 1)(2f - 1))`, i.e. the hinge loss with labels and
/// scores mapped to `[-1, 1]`.
pub fn hinge_loss<T: Scalar>(batch: &[LabelScorePair<T>]) -> Result<T> {
    validate(batch)?;
    let two = T::of(2.0);
    Ok(batch
        .iter()
        .flat_map(|p| p.y.iter().zip(&p.f))
        .map(|(&y, &f)| {
            let sign = two * T::of(y as f64) - T::one();
            (T::one() - sign * (two * f - T::one())).max(T::zero())
        })
        .sum())
}

/// Selects one of the four multi-label losses by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Loss {
    Cel,
    #[default]
    Wcel,
    Euclidean,
    Hinge,
}

impl Loss {
    pub fn evaluate<T: Scalar>(self, batch: &[LabelScorePair<T>]) -> Result<T> {
        match self {
            Loss::Cel => cel(batch),
            Loss::Wcel => wcel(batch),
            Loss::Euclidean => euclidean_loss(batch),
            Loss::Hinge => hinge_loss(batch),
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cel" => Ok(Loss::Cel),
            "wcel" | "w-cel" => Ok(Loss::Wcel),
            "el" | "euclidean" => Ok(Loss::Euclidean),
            "hl" | "hinge" => Ok(Loss::Hinge),
            other => Err(format!("unknown loss `{other}`")),
        }
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Cel => "cel",
            Loss::Wcel => "wcel",
            Loss::Euclidean => "el",
            Loss::Hinge => "hl",
        })
    }
}

/// Transition-layer activations, `S x S x D`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationTensor<T>(pub Array3<T>);

/// Prediction-layer weights, `D x C`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionWeights<T>(pub Array2<T>);

impl<T: Scalar> ActivationTensor<T> {
    pub fn new(data: Array3<T>) -> Result<Self> {
        let (s1, s2, _) = data.dim();
        if s1 != s2 || s1 == 0 {
            return Err(Error::DimMismatch(format!("activation grid must be square, got {s1}x{s2}")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("activation"));
        }
        Ok(Self(data))
    }

    pub fn side(&self) -> usize {
        self.0.dim().0
    }

    pub fn depth(&self) -> usize {
        self.0.dim().2
    }
}

impl<T: Scalar> PredictionWeights<T> {
    pub fn new(data: Array2<T>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction weight"));
        }
        Ok(Self(data))
    }
}

/// `out[i, j, c] = Σ_d act[i, j, d] * w[d, c]`.
pub fn compose_heatmaps<T: Scalar>(
    act: &ActivationTensor<T>,
    w: &PredictionWeights<T>,
) -> Result<Array3<T>> {
    let (s1, s2, d) = act.0.dim();
    let (wd, c) = w.0.dim();
    if d != wd {
        return Err(Error::DimMismatch(format!(
            "activation depth {d} does not match weight rows {wd}"
        )));
    }
    let flat = act
        .0
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((s1 * s2, d))
        .map_err(|e| Error::DimMismatch(e.to_string()))?;
    let out = flat.dot(&w.0);
    out.into_shape_with_order((s1, s2, c))
        .map_err(|e| Error::DimMismatch(e.to_string()))
}

/// Heatmap of class `c` as an `S x S` grid.
pub fn class_map<T: Scalar>(stack: &Array3<T>, c: usize) -> Array2<T> {
    stack.index_axis(Axis(2), c).to_owned()
}
