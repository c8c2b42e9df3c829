use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{clip_global_norm, Optimizer, OptimizerKind};
use crate::profile::{apply_norm, denorm, fit_norm, training_window, LayeredSeries, WindowSpec};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    /// Number of past months fed to the network.
    pub window: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub clip_norm: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            window: 12,
            hidden: 32,
            epochs: 300,
            lr: 0.01,
            optimizer: OptimizerKind::Adam,
            clip_norm: 5.0,
        }
    }
}

/// One tanh hidden layer and a linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub input_len: usize,
    pub hidden: usize,
    /// hidden x input_len, row-major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn init(input_len: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d1 = Uniform::new_inclusive(-1.0 / (input_len as f64).sqrt(), 1.0 / (input_len as f64).sqrt());
        let d2 = Uniform::new_inclusive(-1.0 / (hidden as f64).sqrt(), 1.0 / (hidden as f64).sqrt());
        MlpParams {
            input_len,
            hidden,
            w1: (0..hidden * input_len).map(|_| d1.sample(&mut rng)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| d2.sample(&mut rng)).collect(),
            b2: 0.0,
        }
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|r| {
                let row = &self.w1[r * self.input_len..(r + 1) * self.input_len];
                (row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b1[r]).tanh()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let a = self.hidden_activations(x);
        a.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.hidden + 1);
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, rest) = rest.split_at(self.hidden);
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w2.copy_from_slice(w2);
        self.b2 = rest[0];
    }

    /// MSE over `samples` and its gradient in [`MlpParams::flatten`] order.
    pub fn loss_and_grad(&self, samples: &[(Vec<f64>, f64)]) -> (f64, Vec<f64>) {
        let (l, h) = (self.input_len, self.hidden);
        let mut g = vec![0.0; self.w1.len() + 2 * h + 1];
        let mut loss = 0.0;
        let scale = 1.0 / samples.len() as f64;
        for (x, y) in samples {
            let a = self.hidden_activations(x);
            let pred = a.iter().zip(&self.w2).map(|(a, w)| a * w).sum::<f64>() + self.b2;
            let err = pred - y;
            loss += err * err * scale;
            let dp = 2.0 * err * scale;
            for r in 0..h {
                g[l * h + h + r] += dp * a[r];
                let dz = dp * self.w2[r] * (1.0 - a[r] * a[r]);
                g[l * h + r] += dz;
                for c in 0..l {
                    g[r * l + c] += dz * x[c];
                }
            }
            g[l * h + 2 * h] += dp;
        }
        (loss, g)
    }
}

fn windows(row: &[f64], len: usize) -> Vec<(Vec<f64>, f64)> {
    (0..row.len() - len).map(|i| (row[i..i + len].to_vec(), row[i + len])).collect()
}

/// Fit the sliding-window regressor to one normalized depth row.
pub fn mlp_train_layer(row: &[f64], cfg: &MlpConfig, seed: u64) -> Result<MlpParams> {
    if cfg.window == 0 || cfg.window >= row.len() {
        return Err(Error::validation(format!(
            "MLP window {} must be in 1..{}",
            cfg.window,
            row.len()
        )));
    }
    let samples = windows(row, cfg.window);
    let mut params = MlpParams::init(cfg.window, cfg.hidden, seed);
    let mut flat = params.flatten();
    let mut opt = Optimizer::new(cfg.optimizer, flat.len());
    for _ in 0..cfg.epochs {
        let (loss, mut g) = params.loss_and_grad(&samples);
        if !loss.is_finite() {
            return Err(Error::NonFinite("MLP loss".into()));
        }
        clip_global_norm(&mut g, cfg.clip_norm);
        opt.step(&mut flat, &g, cfg.lr)?;
        params.load_flat(&flat);
    }
    Ok(params)
}

/// Per-depth sliding-window MLP forecast for `w.target`, in m/s.
pub fn mlp_train_predict(
    series: &LayeredSeries,
    w: &WindowSpec,
    cfg: &MlpConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if cfg.hidden == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0) {
        return Err(Error::validation("MLP hidden, epochs and lr must be positive"));
    }
    let t = training_window(series, w)?;
    let norm = fit_norm(&t)?;
    let tn = apply_norm(&t, &norm)?;
    let mut out = Vec::with_capacity(tn.nrows());
    for (j, row) in tn.row_iter().enumerate() {
        let row: Vec<f64> = row.iter().copied().collect();
        let params = mlp_train_layer(&row, cfg, derive_seed(seed, j as u64)).map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence { layer: j, epoch: 0 },
            other => other,
        })?;
        out.push(params.forward(&row[row.len() - cfg.window..]));
    }
    denorm(&out, &norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::Month;
    use crate::profile::DepthSchedule;
    use nalgebra::DMatrix;

    #[test]
    fn gradient_matches_finite_differences() {
        let params = MlpParams::init(4, 5, 3);
        let samples: Vec<(Vec<f64>, f64)> = (0..6)
            .map(|i| ((0..4).map(|k| ((i * 4 + k) as f64 * 0.37).sin()).collect(), (i as f64 * 0.5).cos()))
            .collect();
        let (_, g) = params.loss_and_grad(&samples);
        let base = params.flatten();
        let mut probe = params.clone();
        for k in 0..base.len() {
            let mut f = base.clone();
            f[k] += 1e-6;
            probe.load_flat(&f);
            let plus = probe.loss_and_grad(&samples).0;
            f[k] -= 2e-6;
            probe.load_flat(&f);
            let minus = probe.loss_and_grad(&samples).0;
            let n = (plus - minus) / 2e-6;
            assert!((n - g[k]).abs() / n.abs().max(g[k].abs()).max(1e-8) < 1e-5, "k={k}");
        }
    }

    fn constant_series() -> LayeredSeries {
        let sched = DepthSchedule::custom(vec![0.0, 100.0, 1000.0]).unwrap();
        let values = DMatrix::from_fn(3, 60, |j, _| [1540.0, 1510.0, 1482.0][j]);
        LayeredSeries::new(sched, Month::from_ym(2017, 1), values).unwrap()
    }

    #[test]
    fn constant_series_constant_prediction() {
        let s = constant_series();
        let w = WindowSpec::new(12, 4, Month::from_ym(2021, 1)).unwrap();
        let cfg = MlpConfig { epochs: 50, ..MlpConfig::default() };
        let p = mlp_train_predict(&s, &w, &cfg, 1).unwrap();
        assert_eq!(p.len(), 3);
        for (a, b) in p.iter().zip([1540.0, 1510.0, 1482.0]) {
            assert!((a - b).abs() < 0.1);
        }
    }

    #[test]
    fn deterministic_and_window_checked() {
        let sched = DepthSchedule::custom(vec![0.0, 100.0]).unwrap();
        let values = DMatrix::from_fn(2, 40, |j, i| 1500.0 + (i as f64 * 0.5).sin() * (j + 1) as f64);
        let s = LayeredSeries::new(sched, Month::from_ym(2017, 1), values).unwrap();
        let w = WindowSpec::new(12, 3, Month::from_ym(2020, 1)).unwrap();
        let cfg = MlpConfig { epochs: 40, ..MlpConfig::default() };
        assert_eq!(mlp_train_predict(&s, &w, &cfg, 9).unwrap(), mlp_train_predict(&s, &w, &cfg, 9).unwrap());
        let too_long = MlpConfig { window: 36, ..cfg };
        assert!(mlp_train_predict(&s, &w, &too_long, 9).is_err());
    }
}
