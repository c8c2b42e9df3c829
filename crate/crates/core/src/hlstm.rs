//! The per-depth model bank: one independently trained LSTM per schedule
//! level, one-step and autoregressive forecasting, and the
//! retrain-until-stable loop driven by validation RMSE.

use std::collections::BTreeMap;

use log::{debug, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::rmse;
use crate::nn::{clip_global_norm, Network, Optimizer, OptimizerKind};
use crate::profile::{
    apply_norm, denorm, fit_norm, split_train_validation, training_window, DepthSchedule,
    LayeredSeries, NormParams, RowNorm, WindowSpec,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub hidden_size: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Number of stacked recurrent layers inside each per-depth model.
    pub stack_depth: usize,
    pub optimizer: OptimizerKind,
    /// Global gradient-norm cap; `f64::INFINITY` disables clipping.
    pub clip_norm: f64,
    /// Per-depth learning rates keyed by layer index.
    pub lr_overrides: BTreeMap<usize, f64>,
    /// Per-depth epoch counts keyed by layer index.
    pub epoch_overrides: BTreeMap<usize, usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hidden_size: 128,
            lr: 0.01,
            epochs: 300,
            stack_depth: 1,
            optimizer: OptimizerKind::Adam,
            clip_norm: 5.0,
            lr_overrides: BTreeMap::new(),
            epoch_overrides: BTreeMap::new(),
        }
    }
}

impl Hyperparams {
    pub fn lr_for(&self, layer: usize) -> f64 {
        self.lr_overrides.get(&layer).copied().unwrap_or(self.lr)
    }

    pub fn epochs_for(&self, layer: usize) -> usize {
        self.epoch_overrides.get(&layer).copied().unwrap_or(self.epochs)
    }

    pub fn validate(&self) -> Result<()> {
        let lr_ok = |lr: f64| lr > 0.0 && lr.is_finite();
        if self.hidden_size == 0 || self.epochs == 0 || self.stack_depth == 0 {
            return Err(Error::validation("hidden_size, epochs and stack_depth must be >= 1"));
        }
        if !lr_ok(self.lr) || !self.lr_overrides.values().all(|&v| lr_ok(v)) {
            return Err(Error::validation("learning rates must be positive"));
        }
        if self.epoch_overrides.values().any(|&e| e == 0) {
            return Err(Error::validation("epoch overrides must be >= 1"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::validation("clip_norm must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    pub epochs_run: usize,
    pub final_loss: f64,
}

/// The trained network for one depth level and that level's scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerModel {
    pub depth_index: usize,
    pub network: Network,
    pub norm: RowNorm,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    pub schedule: DepthSchedule,
    pub window: WindowSpec,
    pub hyperparams: Hyperparams,
    pub master_seed: u64,
    pub models: Vec<LayerModel>,
    /// Raw training matrix T (J x nC, m/s) the bank was fitted on.
    pub training: DMatrix<f64>,
}

impl ModelBank {
    pub fn norm_params(&self) -> NormParams {
        NormParams {
            rows: self.models.iter().map(|m| m.norm).collect(),
        }
    }

    pub fn normalized_training(&self) -> Result<DMatrix<f64>> {
        apply_norm(&self.training, &self.norm_params())
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.schedule.len();
        if self.models.len() != j {
            return Err(Error::dim("bank models", j, self.models.len()));
        }
        for (k, m) in self.models.iter().enumerate() {
            if m.depth_index != k {
                return Err(Error::validation(format!(
                    "model {k} carries depth index {}",
                    m.depth_index
                )));
            }
            m.network.validate()?;
        }
        if self.training.nrows() != j {
            return Err(Error::dim("training rows", j, self.training.nrows()));
        }
        Ok(())
    }
}

/// Teacher-forced pairs for one depth level: month i predicts month i+1.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPairs {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

pub fn make_staggered_pairs(t_norm: &DMatrix<f64>) -> Result<Vec<LayerPairs>> {
    let n = t_norm.ncols();
    if n < 2 {
        return Err(Error::validation(format!(
            "staggered pairs need at least 2 training months, got {n}"
        )));
    }
    Ok(t_norm
        .row_iter()
        .map(|row| LayerPairs {
            inputs: row.iter().take(n - 1).copied().collect(),
            targets: row.iter().skip(1).copied().collect(),
        })
        .collect())
}

/// Full-sequence BPTT training of one depth level's network.
pub fn train_layer(
    j: usize,
    pairs: &LayerPairs,
    norm: RowNorm,
    hp: &Hyperparams,
    seed: u64,
) -> Result<LayerModel> {
    let mut net = Network::init(hp.hidden_size, 1, hp.stack_depth, seed);
    let mut flat = net.flatten();
    let mut opt = Optimizer::new(hp.optimizer, flat.len());
    let lr = hp.lr_for(j);
    let epochs = hp.epochs_for(j);
    for epoch in 0..epochs {
        let (_, tapes) = net.forward(&pairs.inputs)?;
        let (loss, grads) = net.backward(&tapes, &pairs.targets)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { layer: j, epoch });
        }
        let mut g = grads.flatten();
        clip_global_norm(&mut g, hp.clip_norm);
        opt.step(&mut flat, &g, lr).map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence { layer: j, epoch },
            other => other,
        })?;
        net.load_flat(&flat)?;
    }
    let final_loss = net
        .loss(&pairs.inputs, &pairs.targets)
        .map_err(|_| Error::Divergence { layer: j, epoch: epochs })?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence { layer: j, epoch: epochs });
    }
    debug!("layer {j}: loss {final_loss:.3e} after {epochs} epochs");
    Ok(LayerModel {
        depth_index: j,
        network: net,
        norm,
        meta: TrainingMeta {
            seed,
            epochs_run: epochs,
            final_loss,
        },
    })
}

/// Seed of depth level `j` under `master`.
pub fn layer_seed(master: u64, j: usize) -> u64 {
    derive_seed(master, j as u64)
}

pub fn train_bank(
    series: &LayeredSeries,
    w: &WindowSpec,
    hp: &Hyperparams,
    seed: u64,
) -> Result<ModelBank> {
    train_bank_with(series, w, hp, seed, 0)
}

/// Train every depth level. `workers == 0` uses the ambient rayon pool,
/// `1` trains sequentially. Output order is schedule order either way.
pub fn train_bank_with(
    series: &LayeredSeries,
    w: &WindowSpec,
    hp: &Hyperparams,
    seed: u64,
    workers: usize,
) -> Result<ModelBank> {
    hp.validate()?;
    let training = training_window(series, w)?;
    let norm = fit_norm(&training)?;
    let t_norm = apply_norm(&training, &norm)?;
    let pairs = make_staggered_pairs(&t_norm)?;

    let train_one = |j: usize| train_layer(j, &pairs[j], norm.rows[j], hp, layer_seed(seed, j));
    let models = match workers {
        1 => (0..pairs.len()).map(train_one).collect::<Result<Vec<_>>>()?,
        0 => (0..pairs.len()).into_par_iter().map(train_one).collect::<Result<Vec<_>>>()?,
        n => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::validation(format!("thread pool: {e}")))?
            .install(|| (0..pairs.len()).into_par_iter().map(train_one).collect::<Result<Vec<_>>>())?,
    };

    Ok(ModelBank {
        schedule: series.schedule().clone(),
        window: *w,
        hyperparams: hp.clone(),
        master_seed: seed,
        models,
        training,
    })
}

/// Forecast for the month after the training window, in m/s.
pub fn predict_one_step(bank: &ModelBank, t_norm: &DMatrix<f64>) -> Result<Vec<f64>> {
    let p = predict_multi_step(bank, t_norm, 1)?;
    Ok(p.column(0).iter().copied().collect())
}

/// Autoregressive forecast of `k` months (J x k, m/s).
///
/// Each level's network first replays its normalized training row to build
/// up recurrent state; the output after the last observed month is the
/// first forecast and every later forecast feeds the previous one back in.
pub fn predict_multi_step(bank: &ModelBank, t_norm: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::validation("prediction horizon must be >= 1"));
    }
    let j = bank.models.len();
    if t_norm.nrows() != j {
        return Err(Error::dim("normalized training rows", j, t_norm.nrows()));
    }
    if t_norm.ncols() == 0 {
        return Err(Error::Empty("normalized training matrix"));
    }
    let mut normalized = DMatrix::zeros(j, k);
    for (layer, model) in bank.models.iter().enumerate() {
        let net = &model.network;
        let mut state = net.zero_state();
        let mut out = 0.0;
        for &x in t_norm.row(layer).iter() {
            out = net.step(&mut state, x)?;
        }
        normalized[(layer, 0)] = out;
        for s in 1..k {
            out = net.step(&mut state, out)?;
            normalized[(layer, s)] = out;
        }
    }
    let norm = bank.norm_params();
    let mut result = DMatrix::zeros(j, k);
    for s in 0..k {
        let col: Vec<f64> = normalized.column(s).iter().copied().collect();
        let restored = denorm(&col, &norm)?;
        for (layer, v) in restored.into_iter().enumerate() {
            result[(layer, s)] = v;
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConfig {
    /// Largest relative RMSE change between consecutive rounds still
    /// counted as stable. Values >= 1 accept the first round.
    pub delta: f64,
    pub max_rounds: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            delta: 0.05,
            max_rounds: 5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Stabilized<T> {
    pub best: T,
    pub best_rmse: f64,
    pub best_round: usize,
    pub rounds: usize,
    pub rmse_history: Vec<f64>,
    /// False when `max_rounds` ran out before the RMSE settled.
    pub stable: bool,
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    if prev == 0.0 {
        if cur == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (cur - prev).abs() / prev
    }
}

/// Run `round` until the validation RMSE stops moving, keeping the best result.
pub fn stabilize<T>(
    cfg: &StabilityConfig,
    mut round: impl FnMut(usize) -> Result<(T, f64)>,
) -> Result<Stabilized<T>> {
    if cfg.max_rounds == 0 || !(cfg.delta >= 0.0) {
        return Err(Error::validation("max_rounds must be >= 1 and delta >= 0"));
    }
    let mut history = Vec::new();
    let mut best: Option<(T, f64, usize)> = None;
    let mut stable = false;
    for r in 0..cfg.max_rounds {
        let (item, score) = round(r)?;
        history.push(score);
        if best.as_ref().map_or(true, |b| score < b.1) {
            best = Some((item, score, r));
        }
        stable = if r == 0 {
            cfg.delta >= 1.0
        } else {
            relative_change(history[r - 1], score) <= cfg.delta
        };
        if stable {
            break;
        }
    }
    if !stable {
        warn!("RMSE did not settle within {} rounds", cfg.max_rounds);
    }
    let (best, best_rmse, best_round) = best.expect("at least one round");
    Ok(Stabilized {
        best,
        best_rmse,
        best_round,
        rounds: history.len(),
        rmse_history: history,
        stable,
    })
}

/// Train, score the one-step forecast against the validation month, and
/// retrain from fresh seeds until the score is stable.
pub fn retrain_until_stable(
    series: &LayeredSeries,
    w: &WindowSpec,
    hp: &Hyperparams,
    seed: u64,
    cfg: &StabilityConfig,
) -> Result<Stabilized<ModelBank>> {
    let (_, validation) = split_train_validation(series, w)?;
    let truth: Vec<f64> = validation.iter().copied().collect();
    stabilize(cfg, |r| {
        let round_seed = if r == 0 { seed } else { derive_seed(seed ^ 0x5EED, r as u64) };
        let bank = train_bank(series, w, hp, round_seed)?;
        let pred = predict_one_step(&bank, &bank.normalized_training()?)?;
        let score = rmse(&pred, &truth)?;
        debug!("round {r}: seed {round_seed} rmse {score:.4}");
        Ok((bank, score))
    })
}
