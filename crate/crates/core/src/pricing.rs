//! Multiplicative edge (or item) prices derived from routed load.
//!
//! Prices are never updated multiplicatively in place. Each resource keeps
//! its accumulated load `f` and its price is evaluated from the closed form
//! `y = exp(eps * B * f / c) / c`, which equals the product of all
//! per-routing factors `exp(eps * B * d / c)` applied to `1 / c`.

use crate::scalar::{log_sum_exp, Scalar};

/// Exponent `eps * B * f / c` of the price of a resource with load `f`.
#[inline]
pub fn weight_exponent<S: Scalar>(load: S, capacity: S, epsilon: S, b: S) -> S {
    epsilon * b * load / capacity
}

/// Price `exp(eps * B * f / c) / c` of a resource with load `f` and capacity `c`.
#[inline]
pub fn edge_weight<S: Scalar>(load: S, capacity: S, epsilon: S, b: S) -> S {
    weight_exponent(load, capacity, epsilon, b).exp() / capacity
}

/// Loads and prices of every capacitated resource during one solver run.
#[derive(Debug, Clone)]
pub struct LoadState<S> {
    capacities: Vec<S>,
    loads: Vec<S>,
    weights: Vec<S>,
    epsilon: S,
    b: S,
}

impl<S: Scalar> LoadState<S> {
    pub fn new(capacities: Vec<S>, epsilon: S, b: S) -> Self {
        let loads = vec![S::zero(); capacities.len()];
        let weights = capacities.iter().map(|&c| edge_weight(S::zero(), c, epsilon, b)).collect();
        LoadState {
            capacities,
            loads,
            weights,
            epsilon,
            b,
        }
    }

    pub fn capacities(&self) -> &[S] {
        &self.capacities
    }

    pub fn loads(&self) -> &[S] {
        &self.loads
    }

    /// Current price of every resource.
    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn epsilon(&self) -> S {
        self.epsilon
    }

    pub fn b(&self) -> S {
        self.b
    }

    /// Adds `demand` to the load of each listed resource.
    pub fn route(&mut self, resources: &[usize], demand: S) {
        for &e in resources {
            self.loads[e] = self.loads[e] + demand;
            self.weights[e] = edge_weight(self.loads[e], self.capacities[e], self.epsilon, self.b);
        }
    }

    /// Whether `demand` more units fit on resource `e`.
    #[inline]
    pub fn fits(&self, e: usize, demand: S) -> bool {
        self.loads[e] + demand <= self.capacities[e]
    }

    /// `ln Σ_e c_e y_e`, i.e. the log of the first dual objective term.
    pub fn log_potential(&self) -> S {
        log_sum_exp(
            self.loads
                .iter()
                .zip(&self.capacities)
                .map(|(&f, &c)| weight_exponent(f, c, self.epsilon, self.b)),
        )
    }

    /// The stopping test `Σ_e c_e y_e <= exp(eps (B - 1))`, in log space.
    pub fn within_threshold(&self) -> bool {
        self.log_potential() <= self.epsilon * (self.b - S::one())
    }

    pub fn is_feasible(&self) -> bool {
        self.loads.iter().zip(&self.capacities).all(|(f, c)| f <= c)
    }
}
