use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    pub fn zeros(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

fn check_grads(params: &[f64], grads: &[f64]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::dim("gradient", params.len(), grads.len()));
    }
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {k}")));
    }
    Ok(())
}

/// Bias-corrected Adam update. `t` is the 1-based step count.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
    lr: f64,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    check_grads(params, grads)?;
    if moments.m.len() != params.len() || moments.v.len() != params.len() {
        return Err(Error::dim("adam moments", params.len(), moments.m.len()));
    }
    if t == 0 {
        return Err(Error::validation("adam step count starts at 1"));
    }
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for k in 0..params.len() {
        let g = grads[k];
        moments.m[k] = cfg.beta1 * moments.m[k] + (1.0 - cfg.beta1) * g;
        moments.v[k] = cfg.beta2 * moments.v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = moments.m[k] / c1;
        let v_hat = moments.v[k] / c2;
        params[k] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    check_grads(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
    Ok(())
}

/// Rescale `grads` in place so its L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(Error::validation(format!("unknown optimizer {other:?}"))),
        }
    }
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

/// Optimizer with its running state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    cfg: AdamConfig,
    moments: Moments,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        Optimizer {
            kind,
            cfg: AdamConfig::default(),
            moments: Moments::zeros(if kind == OptimizerKind::Adam { n_params } else { 0 }),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        self.t += 1;
        match self.kind {
            OptimizerKind::Adam => adam_step(params, grads, &mut self.moments, lr, self.t, &self.cfg),
            OptimizerKind::Sgd => sgd_step(params, grads, lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![0.5, -1.0, 2.0];
        let before = p.clone();
        let mut m = Moments::zeros(3);
        for t in 1..=10 {
            adam_step(&mut p, &[0.0; 3], &mut m, 0.01, t, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_steps_approach_lr_sign() {
        let lr = 0.01;
        let grads = [3.0, -0.02, 1e-3];
        let mut p = vec![0.0; 3];
        let mut m = Moments::zeros(3);
        let mut last = p.clone();
        for t in 1..=2000 {
            adam_step(&mut p, &grads, &mut m, lr, t, &AdamConfig::default()).unwrap();
            if t == 2000 {
                for k in 0..3 {
                    let update = p[k] - last[k];
                    let g = grads[k];
                    let closed_form = -lr * g / (g.abs() + 1e-8);
                    assert!((update - closed_form).abs() < 1e-6 * lr, "k={k} update={update}");
                    assert!((update + lr * g.signum()).abs() < 1e-4 * lr);
                }
            }
            last.clone_from(&p);
        }
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p: Vec<f64> = vec![1.0, -2.0];
            let mut m = Moments::zeros(2);
            let mut traj = Vec::new();
            for t in 1..=50 {
                let g = [p[0] * 2.0, (p[1] * 0.3).sin()];
                adam_step(&mut p, &g, &mut m, 0.05, t, &AdamConfig::default()).unwrap();
                traj.push(p.clone());
            }
            traj
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = vec![0.0; 2];
        let mut m = Moments::zeros(2);
        let err = adam_step(&mut p, &[1.0, f64::NAN], &mut m, 0.01, 1, &AdamConfig::default());
        assert!(matches!(err, Err(Error::NonFinite(_))));
        assert!(sgd_step(&mut p, &[f64::INFINITY, 0.0], 0.1).is_err());
        assert!(adam_step(&mut p, &[1.0], &mut m, 0.01, 1, &AdamConfig::default()).is_err());
    }

    #[test]
    fn clipping() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut small = vec![0.3, 0.4];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small, vec![0.3, 0.4]);
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 1);
        let mut p = vec![1.0];
        opt.step(&mut p, &[2.0], 0.1).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15);
        assert_eq!("ADAM".parse::<OptimizerKind>().unwrap(), OptimizerKind::Adam);
        assert!("lbfgs".parse::<OptimizerKind>().is_err());
    }
}
