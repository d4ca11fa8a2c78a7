use crate::error::DiffError;
use crate::matrix::Matrix;
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected moment estimates.
///
/// The optimizer owns one pair of moment accumulators per parameter, in the
/// order the parameter shapes were given to [`Adam::new`].
#[derive(Debug, Clone)]
pub struct Adam<T: Real = f64> {
    config: AdamConfig,
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
    step: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (first, second) = shapes
            .into_iter()
            .map(|(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
            .unzip();
        Self {
            config,
            first,
            second,
            step: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. A `None` gradient is treated as all zeros.
    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[Option<&Matrix<T>>]) -> Result<(), DiffError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(DiffError::Contract(format!(
                "adam: {} accumulators, {} params, {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, p) in params.iter().enumerate() {
            p.same_shape(&self.first[k], "adam_step")?;
            if let Some(g) = grads[k] {
                p.same_shape(g, "adam_step")?;
            }
        }

        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let one = T::one();
        let t = self.step as i32;
        let bc1 = T::of(1.0 - c.beta1.powi(t));
        let bc2 = T::of(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::of(c.lr), T::of(c.eps));

        for (k, p) in params.iter_mut().enumerate() {
            let m = self.first[k].data_mut();
            let v = self.second[k].data_mut();
            let pd = p.data_mut();
            for i in 0..pd.len() {
                let g = grads[k].map_or(T::zero(), |g| g.data()[i]);
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                pd[i] = pd[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
