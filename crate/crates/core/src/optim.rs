//! First-order optimizer with per-parameter adaptive moments and decoupled-ish
//! L2 weight decay folded into the gradient, matching the usual default for
//! this model family.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, weight_decay: f64, shapes: &[(usize, usize)]) -> Self {
        Self {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    /// One descent step. `params` and `grads` must match the construction
    /// order. Pass `ascend = true` to maximize instead.
    pub fn step(&mut self, params: &mut [&mut Array2<f64>], grads: &[Array2<f64>], ascend: bool) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let sign = if ascend { -1.0 } else { 1.0 };
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for ((pe, &ge), (me, ve)) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                let grad = sign * ge + self.weight_decay * *pe;
                *me = self.beta1 * *me + (1.0 - self.beta1) * grad;
                *ve = self.beta2 * *ve + (1.0 - self.beta2) * grad * grad;
                let m_hat = *me / bc1;
                let v_hat = *ve / bc2;
                *pe -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn descends_a_quadratic() {
        // minimize (x - 3)^2
        let mut x = array![[0.0]];
        let mut opt = Adam::new(0.1, 0.0, &[(1, 1)]);
        for _ in 0..500 {
            let g = array![[2.0 * (x[[0, 0]] - 3.0)]];
            opt.step(&mut [&mut x], &[g], false);
        }
        assert!((x[[0, 0]] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn ascends_a_concave_function() {
        // maximize -(x + 1)^2
        let mut x = array![[2.0]];
        let mut opt = Adam::new(0.1, 0.0, &[(1, 1)]);
        for _ in 0..500 {
            let g = array![[-2.0 * (x[[0, 0]] + 1.0)]];
            opt.step(&mut [&mut x], &[g], true);
        }
        assert!((x[[0, 0]] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn weight_decay_pulls_toward_zero() {
        let mut x = array![[5.0]];
        let mut opt = Adam::new(0.05, 0.5, &[(1, 1)]);
        for _ in 0..2000 {
            let g = array![[0.0]];
            opt.step(&mut [&mut x], &[g], false);
        }
        assert!(x[[0, 0]].abs() < 1e-2);
    }
}
