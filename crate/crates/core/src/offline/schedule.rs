use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adversarial weight `lambda` as a function of training progress `p in [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaSchedule {
    /// `2 / (1 + exp(-gamma * p)) - 1`
    DannSigmoid {
        gamma: f64,
    },
    Linear,
    Constant {
        value: f64,
    },
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule::DannSigmoid { gamma: 10.0 }
    }
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LambdaSchedule::DannSigmoid { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::config("sigmoid schedule gamma must be positive"))
            }
            LambdaSchedule::Constant { value } if !(0.0..=1.0).contains(&value) => {
                Err(Error::config("constant lambda must lie in [0, 1]"))
            }
            _ => Ok(()),
        }
    }

    pub fn lambda_at(&self, progress: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&progress) {
            return Err(Error::contract(format!(
                "progress {progress} outside [0, 1]"
            )));
        }
        Ok(match *self {
            LambdaSchedule::DannSigmoid { gamma } => 2.0 / (1.0 + (-gamma * progress).exp()) - 1.0,
            LambdaSchedule::Linear => progress,
            LambdaSchedule::Constant { value } => value,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        let s = LambdaSchedule::DannSigmoid { gamma: 10.0 };
        assert_eq!(s.lambda_at(0.0).unwrap(), 0.0);
        let mid = s.lambda_at(0.5).unwrap();
        assert!((mid - (2.0 / (1.0 + (-5.0f64).exp()) - 1.0)).abs() < 1e-15);
        assert!((mid - 0.9866).abs() < 1e-4);
        assert_eq!(LambdaSchedule::Linear.lambda_at(1.0).unwrap(), 1.0);
        assert_eq!(
            LambdaSchedule::Constant { value: 0.3 }
                .lambda_at(0.0)
                .unwrap(),
            0.3
        );
    }

    #[test]
    fn out_of_range_progress() {
        assert!(matches!(
            LambdaSchedule::Linear.lambda_at(1.5),
            Err(Error::Contract(_))
        ));
        assert!(LambdaSchedule::default().lambda_at(-0.1).is_err());
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(a in 0.0f64..=1.0, b in 0.0f64..=1.0, gamma in 0.1f64..50.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for s in [LambdaSchedule::DannSigmoid { gamma }, LambdaSchedule::Linear] {
                let (x, y) = (s.lambda_at(lo).unwrap(), s.lambda_at(hi).unwrap());
                prop_assert!(x <= y);
                prop_assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y));
            }
        }
    }
}
