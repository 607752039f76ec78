use crate::error::{Result, UgeError};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment accumulators for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update. Weight decay is coupled: `decay * θ` is
/// added to the gradient before the moment updates.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    learning_rate: f64,
    weight_decay: f64,
) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != params.len() {
        return Err(UgeError::InvalidArgument(format!(
            "adam: {} parameters, {} gradients, state for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(UgeError::NonFinite(format!(
            "gradient entry {i} is {} at step {}",
            grads[i],
            state.t + 1
        )));
    }
    state.t += 1;
    let c1 = 1.0 - BETA1.powi(state.t as i32);
    let c2 = 1.0 - BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i] + weight_decay * params[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= learning_rate * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut s = AdamState::new(3);
        let mut p = vec![0.5, -1.0, 2.0];
        for _ in 0..5 {
            adam_step(&mut s, &mut p, &[0.0; 3], 0.01, 0.0).unwrap();
        }
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(s.steps(), 5);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut s = AdamState::new(1);
        let mut p = vec![1.0];
        adam_step(&mut s, &mut p, &[1.0], 0.01, 0.0).unwrap();
        // m_hat = 1, v_hat = 1
        let expected = 1.0 - 0.01 / (1.0 + EPSILON);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn coupled_decay_shrinks_parameters() {
        let mut s = AdamState::new(2);
        let mut p = vec![1.0, -2.0];
        let mut prev = p.clone();
        for _ in 0..10 {
            adam_step(&mut s, &mut p, &[0.0, 0.0], 0.01, 0.0005).unwrap();
            assert!(p[0] < prev[0] && p[0] > 0.0);
            assert!(p[1] > prev[1] && p[1] < 0.0);
            prev = p.clone();
        }
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut s = AdamState::new(2);
        let mut p = vec![1.0, 1.0];
        let err = adam_step(&mut s, &mut p, &[0.0, f64::NAN], 0.01, 0.0).unwrap_err();
        assert!(matches!(err, UgeError::NonFinite(_)));
        assert_eq!(p, vec![1.0, 1.0]);
    }
}
