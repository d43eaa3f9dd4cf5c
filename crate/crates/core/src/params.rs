use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dilation factor of the representative balls used when none is given.
pub const DEFAULT_RHO: f64 = 8.0;

/// Samples per group: `ceil((1/delta) * ln(1/delta^2))`.
pub fn sample_budget(delta: f64) -> Result<usize> {
    check_unit_open("delta", delta)?;
    let n = (1.0 / delta) * (1.0 / (delta * delta)).ln();
    Ok((n.ceil() as usize).max(1))
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Accuracy `epsilon`, confidence `delta`, group count `gamma` and the
/// representative-ball dilation factor `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub epsilon: f64,
    pub delta: f64,
    pub gamma: usize,
    pub rho: f64,
}

impl Params {
    pub fn new(epsilon: f64, delta: f64, gamma: usize, rho: f64) -> Result<Self> {
        let p = Params {
            epsilon,
            delta,
            gamma,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit_open("epsilon", self.epsilon)?;
        check_unit_open("delta", self.delta)?;
        if self.gamma < 2 {
            return Err(Error::param(format!("gamma must be >= 2, got {}", self.gamma)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::param(format!("rho must be > 0, got {}", self.rho)));
        }
        Ok(())
    }

    pub fn sample_budget(&self) -> usize {
        // delta validated at construction
        sample_budget(self.delta).expect("validated delta")
    }

    /// Radius `rho * epsilon` of the balls `H_x`.
    pub fn ball_radius(&self) -> f64 {
        self.rho * self.epsilon
    }
}
