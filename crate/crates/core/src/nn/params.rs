use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::Matrix;
use crate::StimRng;

/// A fixed, ordered set of named parameter matrices.
///
/// Gradients use the same type as the parameters, so optimizers can walk
/// both lists in lockstep.
pub trait ParamStore {
    fn params(&self) -> Vec<(String, &Matrix)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Matrix)>;

    /// Same shapes, all zeros.
    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        for (_, m) in z.params_mut() {
            m.fill(0.0);
        }
        z
    }

    fn num_scalars(&self) -> usize {
        self.params().iter().map(|(_, m)| m.rows() * m.cols()).sum()
    }

    /// Overwrites every parameter from `(name, rows, cols, values)` entries,
    /// which must match names and shapes exactly.
    fn load_flat(&mut self, entries: &[(String, usize, usize, Vec<f64>)]) -> Result<()> {
        let mut params = self.params_mut();
        if params.len() != entries.len() {
            return Err(Error::Shape(alloc::format!(
                "expected {} parameters, found {}",
                params.len(),
                entries.len()
            )));
        }
        for ((name, m), (ename, rows, cols, values)) in params.iter_mut().zip(entries) {
            if name != ename || m.shape() != (*rows, *cols) || values.len() != rows * cols {
                return Err(Error::Shape(alloc::format!(
                    "parameter {ename} {rows}x{cols} does not match {name} {:?}",
                    m.shape()
                )));
            }
            m.as_mut_slice().copy_from_slice(values);
        }
        Ok(())
    }
}

/// Uniform `[−1/√fan_in, 1/√fan_in]` initialization.
pub fn uniform_matrix(rows: usize, cols: usize, fan_in: usize, rng: &mut StimRng) -> Matrix {
    let bound = 1.0 / math::sqrt(fan_in.max(1) as f64);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

/// `θ ← θ − α·∇θ`.
pub fn sgd_step<P: ParamStore>(params: &mut P, grads: &P, lr: f64) {
    let grads = grads.params();
    for ((_, p), (_, g)) in params.params_mut().into_iter().zip(grads) {
        for (pv, gv) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *pv -= lr * gv;
        }
    }
}

/// Parameter update rule.
pub trait Optimizer<P: ParamStore> {
    fn step(&mut self, params: &mut P, grads: &P, lr: f64);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sgd;

impl<P: ParamStore> Optimizer<P> for Sgd {
    fn step(&mut self, params: &mut P, grads: &P, lr: f64) {
        sgd_step(params, grads, lr);
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }
}

impl<P: ParamStore> Optimizer<P> for Adam {
    fn step(&mut self, params: &mut P, grads: &P, lr: f64) {
        let grads = grads.params();
        if self.m.is_empty() {
            self.m = grads.iter().map(|(_, g)| alloc::vec![0.0; g.as_slice().len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for (k, ((_, p), (_, g))) in params.params_mut().into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (idx, (pv, &gv)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                m[idx] = self.beta1 * m[idx] + (1.0 - self.beta1) * gv;
                v[idx] = self.beta2 * v[idx] + (1.0 - self.beta2) * gv * gv;
                let mhat = m[idx] / bc1;
                let vhat = v[idx] / bc2;
                *pv -= lr * mhat / (math::sqrt(vhat) + self.eps);
            }
        }
    }
}
