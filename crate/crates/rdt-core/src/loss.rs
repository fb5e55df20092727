//! Terminal losses on leaf score vectors and the class-prediction rule.
//!
//! Labels are `{-1, +1}` coded: class `c` means coordinate `c` is `+1` and
//! every other coordinate is `-1`. `LabelVector` stores the class index and
//! materializes coordinates on demand.

use crate::error::{RdtError, Result};
use alloc::format;
use alloc::vec::Vec;

/// A one-hot(+1)/rest(-1) label over `num_classes` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelVector {
    class: usize,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(class: usize, num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(RdtError::InvalidParameter(format!(
                "label needs at least 2 classes, got {num_classes}"
            )));
        }
        if class >= num_classes {
            return Err(RdtError::InvalidParameter(format!(
                "class index {class} out of range for {num_classes} classes"
            )));
        }
        Ok(LabelVector { class, num_classes })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Coordinate `c`: `+1` for the labelled class, `-1` elsewhere.
    pub fn value(&self, c: usize) -> f64 {
        if c == self.class {
            1.0
        } else {
            -1.0
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.num_classes).map(|c| self.value(c)).collect()
    }
}

fn check_len(alpha: &[f64], y: &LabelVector) -> Result<()> {
    if alpha.len() != y.num_classes() {
        return Err(RdtError::DimensionMismatch {
            expected: y.num_classes(),
            got: alpha.len(),
        });
    }
    Ok(())
}

/// `sum_c (alpha_c - y_c)^2`.
pub fn square_loss(alpha: &[f64], y: &LabelVector) -> Result<f64> {
    check_len(alpha, y)?;
    let mut total = 0.0;
    for (c, &a) in alpha.iter().enumerate() {
        let d = a - y.value(c);
        total += d * d;
    }
    Ok(total)
}

/// Gradient of the square loss with respect to `alpha`: `2 (alpha - y)`.
pub fn square_loss_grad(alpha: &[f64], y: &LabelVector) -> Result<Vec<f64>> {
    check_len(alpha, y)?;
    Ok(alpha
        .iter()
        .enumerate()
        .map(|(c, &a)| 2.0 * (a - y.value(c)))
        .collect())
}

/// `sum_c max(0, 1 - y_c alpha_c)`.
pub fn hinge_loss(alpha: &[f64], y: &LabelVector) -> Result<f64> {
    check_len(alpha, y)?;
    let mut total = 0.0;
    for (c, &a) in alpha.iter().enumerate() {
        let margin = 1.0 - y.value(c) * a;
        if margin > 0.0 {
            total += margin;
        }
    }
    Ok(total)
}

/// Subgradient of the hinge loss: `-y_c` where the margin is violated, `0`
/// elsewhere (including exactly at the kink).
pub fn hinge_loss_grad(alpha: &[f64], y: &LabelVector) -> Result<Vec<f64>> {
    check_len(alpha, y)?;
    Ok(alpha
        .iter()
        .enumerate()
        .map(|(c, &a)| {
            let yc = y.value(c);
            if yc * a < 1.0 {
                -yc
            } else {
                0.0
            }
        })
        .collect())
}

/// Index of the largest score; ties go to the lowest index.
pub fn predict_class(alpha: &[f64]) -> Result<usize> {
    if alpha.is_empty() {
        return Err(RdtError::InvalidParameter(
            "cannot take the argmax of an empty score vector".into(),
        ));
    }
    let mut best = 0;
    for (c, &a) in alpha.iter().enumerate().skip(1) {
        if a > alpha[best] {
            best = c;
        }
    }
    Ok(best)
}

/// The two supported terminal losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Square,
    Hinge,
}

impl Loss {
    pub fn value(&self, alpha: &[f64], y: &LabelVector) -> Result<f64> {
        match self {
            Loss::Square => square_loss(alpha, y),
            Loss::Hinge => hinge_loss(alpha, y),
        }
    }

    pub fn grad(&self, alpha: &[f64], y: &LabelVector) -> Result<Vec<f64>> {
        match self {
            Loss::Square => square_loss_grad(alpha, y),
            Loss::Hinge => hinge_loss_grad(alpha, y),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::Square => "square",
            Loss::Hinge => "hinge",
        }
    }
}

impl core::str::FromStr for Loss {
    type Err = RdtError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Loss::Square),
            "hinge" => Ok(Loss::Hinge),
            other => Err(RdtError::InvalidParameter(format!(
                "unknown loss {other:?} (expected \"square\" or \"hinge\")"
            ))),
        }
    }
}
