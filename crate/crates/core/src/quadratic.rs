//! Strongly convex test model `f_i(theta) = ||theta - c_i||^2`.
//!
//! Consensus over a connected graph drives every node to the mean of the
//! targets `c_i`, which makes it a convenient analytic oracle for the engine.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{ConsensusModel, ModelError};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticNode {
    target: Vec<f64>,
    theta: Vec<f64>,
    multiplier: Vec<f64>,
}

impl QuadraticNode {
    pub fn new(target: Vec<f64>, init: Vec<f64>) -> Self {
        assert_eq!(target.len(), init.len(), "target and init must have equal length");
        let dim = target.len();
        QuadraticNode {
            target,
            theta: init,
            multiplier: vec![0.0; dim],
        }
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }
}

impl ConsensusModel for QuadraticNode {
    type Params = Vec<f64>;

    fn params(&self) -> &Vec<f64> {
        &self.theta
    }

    fn objective(&self, params: &Vec<f64>) -> Result<f64, ModelError> {
        Ok(params
            .iter()
            .zip(&self.target)
            .map(|(x, c)| (x - c) * (x - c))
            .sum())
    }

    // argmin ||x - c||^2 + 2 <lambda, x> + sum_j eta_j ||x - (x_i + x_j) / 2||^2
    fn local_step(&mut self, inbox: &[Vec<f64>], etas: &[f64]) -> Result<(), ModelError> {
        let eta_sum: f64 = etas.iter().sum();
        let next = (0..self.theta.len())
            .map(|d| {
                let pull: f64 = inbox
                    .iter()
                    .zip(etas)
                    .map(|(nb, eta)| eta * 0.5 * (self.theta[d] + nb[d]))
                    .sum();
                (self.target[d] - self.multiplier[d] + pull) / (1.0 + eta_sum)
            })
            .collect();
        self.theta = next;
        Ok(())
    }

    fn multiplier_step(&mut self, inbox: &[Vec<f64>], etas: &[f64]) {
        for (d, lambda) in self.multiplier.iter_mut().enumerate() {
            *lambda += 0.5
                * inbox
                    .iter()
                    .zip(etas)
                    .map(|(nb, eta)| eta * (self.theta[d] - nb[d]))
                    .sum::<f64>();
        }
    }

    fn flatten(params: &Vec<f64>, out: &mut Vec<f64>) {
        out.extend_from_slice(params);
    }

    fn midpoint(a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
    }
}
