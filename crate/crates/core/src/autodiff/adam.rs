use super::tensor::Tensor;
use crate::error::{geometry, invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    /// Decoder optimizer constants: lr 1e-4, betas (0.9, 0.999), eps 1e-8.
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(invalid(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Moment buffers for one parameter list.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
    step_count: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Result<Self> {
        config.validate()?;
        Ok(AdamState {
            config,
            first_moment: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            step_count: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One bias-corrected Adam update. Gradients are read, not cleared.
pub fn adam_step(params: &mut [Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != state.first_moment.len() {
        return Err(geometry(format!(
            "optimizer tracks {} parameters, got {}",
            state.first_moment.len(),
            params.len()
        )));
    }
    for (i, p) in params.iter().enumerate() {
        if p.grad().is_none() {
            return Err(Error::MissingGrad(format!("#{i} {:?}", p.shape())));
        }
        if p.numel() != state.first_moment[i].len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                left: vec![state.first_moment[i].len()],
                right: p.shape().to_vec(),
            });
        }
    }
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, m), v) in params
        .iter_mut()
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        let g = p.grad().expect("checked above").to_vec();
        for (((x, g), m), v) in p.data_mut().iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *x -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn param(v: Vec<f64>) -> Tensor {
        let n = v.len();
        Tensor::new(vec![n], v).unwrap().requires_grad(true)
    }

    #[test]
    fn zero_grad_is_identity() {
        let mut ps = vec![param(vec![1.0, -2.0, 3.5])];
        ps[0].accumulate_grad(&[0.0, 0.0, 0.0]);
        let mut st = AdamState::new(AdamConfig::default(), &ps).unwrap();
        for _ in 0..10 {
            adam_step(&mut ps, &mut st).unwrap();
        }
        assert_eq!(ps[0].data(), &[1.0, -2.0, 3.5]);
        assert_eq!(st.step_count(), 10);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut ps = vec![param(vec![0.0, 0.0, 0.0])];
        ps[0].accumulate_grad(&[0.5, -3.0, 1e-2]);
        let mut st = AdamState::new(AdamConfig::default(), &ps).unwrap();
        adam_step(&mut ps, &mut st).unwrap();
        for (x, g) in ps[0].data().iter().zip([0.5, -3.0, 1e-2]) {
            assert!((0.999e-4..=1.0e-4).contains(&x.abs()), "{x}");
            assert_eq!(x.signum(), -f64::signum(g));
        }
        // Gradients are left in place.
        assert_eq!(ps[0].grad().unwrap(), &[0.5, -3.0, 1e-2]);
    }

    #[test]
    fn missing_grad_rejected() {
        let mut ps = vec![param(vec![1.0])];
        let mut st = AdamState::new(AdamConfig::default(), &ps).unwrap();
        assert!(matches!(adam_step(&mut ps, &mut st), Err(Error::MissingGrad(_))));
        assert_eq!(st.step_count(), 0);
    }

    #[test]
    fn bad_config_rejected() {
        let bad = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(bad, &[]).is_err());
        let bad = AdamConfig {
            epsilon: 0.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(bad, &[]).is_err());
    }

    fn loss_of(w: &Tensor, target: f64) -> f64 {
        let mut tape = Tape::new();
        let wv = tape.leaf(w);
        let t = tape.constant(vec![1], vec![target]).unwrap();
        let l = tape.mse_loss(wv, t).unwrap();
        tape.value(l)[0]
    }

    #[test]
    fn two_steps_reduce_scalar_mse() {
        let mut ps = vec![param(vec![2.0])];
        let mut st = AdamState::new(
            AdamConfig {
                learning_rate: 0.1,
                ..AdamConfig::default()
            },
            &ps,
        )
        .unwrap();
        let mut losses = vec![loss_of(&ps[0], -1.0)];
        for _ in 0..2 {
            ps[0].clear_grad();
            let mut tape = Tape::new();
            let wv = tape.leaf(&ps[0]);
            let t = tape.constant(vec![1], vec![-1.0]).unwrap();
            let l = tape.mse_loss(wv, t).unwrap();
            tape.backward(l).unwrap().accumulate_into(wv, &mut ps[0]).unwrap();
            adam_step(&mut ps, &mut st).unwrap();
            losses.push(loss_of(&ps[0], -1.0));
        }
        assert!(losses[1] < losses[0] && losses[2] < losses[1], "{losses:?}");
    }
}
