use serde::{Deserialize, Serialize};

use crate::autodiff::{Scalar, Tape, Var};
use crate::error::Result;
use crate::network::Network;

use super::sampling::Batch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionTarget {
    /// `(x³ − x) sin(4x)/4 + sin(12x)/(x² + 1)`
    MultiscaleC1,
    /// `sin(4x)` for `x ≤ 0`, `2 + x sin(x)` for `x > 0`
    DiscontinuousC2,
}

impl RegressionTarget {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            RegressionTarget::MultiscaleC1 => {
                (x * x * x - x) * (4.0 * x).sin() / 4.0 + (12.0 * x).sin() / (x * x + 1.0)
            }
            RegressionTarget::DiscontinuousC2 => {
                if x <= 0.0 {
                    (4.0 * x).sin()
                } else {
                    2.0 + x * x.sin()
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// `(1/N) Σ (u_i − y_i)²`
    #[default]
    Mean,
    /// `Σ ½ (y_i − u_i)²`
    HalfSum,
}

/// Supervised fit of a network to labelled points.
#[derive(Clone, Debug)]
pub struct RegressionProblem {
    pub network: Network,
    /// `n × input_dim`
    pub inputs: Vec<f64>,
    pub labels: Vec<f64>,
    pub reduction: Reduction,
    pub target: Option<RegressionTarget>,
}

impl RegressionProblem {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn record<T: Scalar>(&self, tape: &mut Tape<T>, theta: Var, batch: &Batch) -> Result<Var> {
        let x = batch.select(&self.inputs, self.network.input_dim());
        let y = batch.select(&self.labels, 1);
        let u = self.network.record(tape, theta, &x, &[], 0)?;
        let yv = tape.constant(y.len(), 1, &y);
        let d = tape.sub(u.value, yv);
        let sq = tape.square(d);
        Ok(match self.reduction {
            Reduction::Mean => tape.mean(sq),
            Reduction::HalfSum => {
                let s = tape.sum(sq);
                tape.scale(s, 0.5)
            }
        })
    }
}
