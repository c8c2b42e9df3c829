//! Bank checkpoints: a directory holding `manifest.txt` and one
//! `layer_NNN.model` file per depth level. Both are flat `key = value`
//! text; floats are written in shortest round-trip form so a save/load
//! cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hlstm::{Hyperparams, LayerModel, ModelBank, TrainingMeta};
use crate::kv::KvMap;
use crate::month::Month;
use crate::nn::Network;
use crate::profile::{DepthSchedule, RowNorm, WindowSpec};

pub const MODEL_FORMAT: &str = "ssp-hlstm-layer";
pub const MANIFEST_FORMAT: &str = "ssp-hlstm-bank";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn model_file_name(j: usize) -> String {
    format!("layer_{j:03}.model")
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn split_floats(s: &str, key: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Checkpoint(format!("{key}: {t:?} is not a number")))
        })
        .collect()
}

fn ck<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Checkpoint(_) => e,
        other => Error::Checkpoint(other.to_string()),
    })
}

fn check_header(kv: &KvMap, format: &str) -> Result<()> {
    let found = kv.get("format").unwrap_or("");
    if found != format {
        return Err(Error::Checkpoint(format!("expected format {format:?}, found {found:?}")));
    }
    let version: u32 = ck(kv.parse_required("version"))?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    Ok(())
}

/// Serialize one depth model together with its raw training row.
pub fn model_to_text(model: &LayerModel, training_row: &[f64]) -> String {
    let net = &model.network;
    let mut kv = KvMap::new();
    kv.insert("format", MODEL_FORMAT);
    kv.insert("version", FORMAT_VERSION);
    kv.insert("depth_index", model.depth_index);
    kv.insert("hidden_size", net.hidden_size());
    kv.insert("input_size", net.input_size());
    kv.insert("stack_depth", net.layers.len());
    kv.insert("norm.min", model.norm.min);
    kv.insert("norm.max", model.norm.max);
    kv.insert("meta.seed", model.meta.seed);
    kv.insert("meta.epochs_run", model.meta.epochs_run);
    kv.insert("meta.final_loss", model.meta.final_loss);
    kv.insert("training", join(training_row));
    for (name, block) in net.blocks() {
        kv.insert(format!("param.{name}"), join(block));
    }
    kv.to_text()
}

pub fn model_from_text(text: &str, path: &Path) -> Result<(LayerModel, Vec<f64>)> {
    let kv = KvMap::parse(text, path)?;
    check_header(&kv, MODEL_FORMAT)?;
    let hidden: usize = ck(kv.parse_required("hidden_size"))?;
    let input: usize = ck(kv.parse_required("input_size"))?;
    let stack: usize = ck(kv.parse_required("stack_depth"))?;
    if hidden == 0 || input == 0 || stack == 0 {
        return Err(Error::Checkpoint("network dimensions must be positive".into()));
    }
    let mut network = Network::init(hidden, input, stack, 0);
    for (name, block) in network.blocks_mut() {
        let key = format!("param.{name}");
        let values = split_floats(ck(kv.require(&key))?, &key)?;
        if values.len() != block.len() {
            return Err(Error::Checkpoint(format!(
                "{key}: expected {} values, found {}",
                block.len(),
                values.len()
            )));
        }
        block.copy_from_slice(&values);
    }
    let model = LayerModel {
        depth_index: ck(kv.parse_required("depth_index"))?,
        network,
        norm: RowNorm {
            min: ck(kv.parse_required("norm.min"))?,
            max: ck(kv.parse_required("norm.max"))?,
        },
        meta: TrainingMeta {
            seed: ck(kv.parse_required("meta.seed"))?,
            epochs_run: ck(kv.parse_required("meta.epochs_run"))?,
            final_loss: ck(kv.parse_required("meta.final_loss"))?,
        },
    };
    let training = split_floats(ck(kv.require("training"))?, "training")?;
    Ok((model, training))
}

fn overrides_text<V: ToString>(m: &BTreeMap<usize, V>) -> String {
    m.iter().map(|(k, v)| format!("{k}:{}", v.to_string())).collect::<Vec<_>>().join(",")
}

pub fn parse_overrides<V: std::str::FromStr>(s: &str) -> Result<BTreeMap<usize, V>> {
    let mut out = BTreeMap::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parsed = item
            .split_once(':')
            .and_then(|(k, v)| Some((k.trim().parse::<usize>().ok()?, v.trim().parse::<V>().ok()?)));
        let (k, v) = parsed.ok_or_else(|| Error::Validation(format!("bad override {item:?}, expected layer:value")))?;
        out.insert(k, v);
    }
    Ok(out)
}

pub fn manifest_to_text(bank: &ModelBank) -> String {
    let hp = &bank.hyperparams;
    let mut kv = KvMap::new();
    kv.insert("format", MANIFEST_FORMAT);
    kv.insert("version", FORMAT_VERSION);
    kv.insert("schedule", join(bank.schedule.levels()));
    kv.insert("layers", bank.models.len());
    kv.insert("window.cycle_length", bank.window.cycle_length);
    kv.insert("window.n_cycles", bank.window.n_cycles);
    kv.insert("window.target", bank.window.target);
    kv.insert("window.first_month", bank.window.first_month());
    kv.insert("master_seed", bank.master_seed);
    kv.insert("hp.hidden_size", hp.hidden_size);
    kv.insert("hp.lr", hp.lr);
    kv.insert("hp.epochs", hp.epochs);
    kv.insert("hp.stack_depth", hp.stack_depth);
    kv.insert("hp.optimizer", hp.optimizer);
    kv.insert("hp.clip_norm", hp.clip_norm);
    kv.insert("hp.lr_overrides", overrides_text(&hp.lr_overrides));
    kv.insert("hp.epoch_overrides", overrides_text(&hp.epoch_overrides));
    for m in &bank.models {
        kv.insert(format!("layer.{:03}.seed", m.depth_index), m.meta.seed);
        kv.insert(format!("layer.{:03}.final_loss", m.depth_index), m.meta.final_loss);
    }
    kv.to_text()
}

/// Write the bank into `dir`, replacing any previous checkpoint there.
/// Files are staged in a sibling directory and moved into place at the
/// end so a failed write leaves no partial checkpoint behind.
pub fn save_bank(bank: &ModelBank, dir: &Path) -> Result<()> {
    bank.validate()?;
    let staging = staging_dir(dir);
    if staging.exists() {
        fs::remove_dir_all(&staging)?;
    }
    let result = (|| -> Result<()> {
        fs::create_dir_all(&staging)?;
        for (j, m) in bank.models.iter().enumerate() {
            let row: Vec<f64> = bank.training.row(j).iter().copied().collect();
            fs::write(staging.join(model_file_name(j)), model_to_text(m, &row))?;
        }
        fs::write(staging.join(MANIFEST_FILE), manifest_to_text(bank))?;
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&staging, dir)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

fn staging_dir(dir: &Path) -> PathBuf {
    let mut name = dir.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    dir.with_file_name(name)
}

pub fn load_bank(dir: &Path) -> Result<ModelBank> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let kv = KvMap::read(&manifest_path)?;
    check_header(&kv, MANIFEST_FORMAT)?;
    let levels = split_floats(ck(kv.require("schedule"))?, "schedule")?;
    let schedule = ck(DepthSchedule::custom(levels))?;
    let layers: usize = ck(kv.parse_required("layers"))?;
    if layers != schedule.len() {
        return Err(Error::Checkpoint(format!(
            "manifest lists {layers} layers for a {}-level schedule",
            schedule.len()
        )));
    }
    let window = ck(WindowSpec::new(
        ck(kv.parse_required("window.cycle_length"))?,
        ck(kv.parse_required("window.n_cycles"))?,
        ck(kv.parse_required::<Month>("window.target"))?,
    ))?;
    let hyperparams = Hyperparams {
        hidden_size: ck(kv.parse_required("hp.hidden_size"))?,
        lr: ck(kv.parse_required("hp.lr"))?,
        epochs: ck(kv.parse_required("hp.epochs"))?,
        stack_depth: ck(kv.parse_required("hp.stack_depth"))?,
        optimizer: ck(kv.parse_required("hp.optimizer"))?,
        clip_norm: ck(kv.parse_required("hp.clip_norm"))?,
        lr_overrides: ck(parse_overrides(kv.get("hp.lr_overrides").unwrap_or("")))?,
        epoch_overrides: ck(parse_overrides(kv.get("hp.epoch_overrides").unwrap_or("")))?,
    };
    let master_seed = ck(kv.parse_required("master_seed"))?;

    let mut models = Vec::with_capacity(layers);
    let mut training = DMatrix::zeros(layers, window.train_len());
    for j in 0..layers {
        let path = dir.join(model_file_name(j));
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        let (model, row) = ck(model_from_text(&text, &path))?;
        if model.depth_index != j {
            return Err(Error::Checkpoint(format!("{} holds layer {}", path.display(), model.depth_index)));
        }
        if model.network.hidden_size() != hyperparams.hidden_size {
            return Err(Error::Checkpoint(format!(
                "{}: hidden size {} disagrees with manifest {}",
                path.display(),
                model.network.hidden_size(),
                hyperparams.hidden_size
            )));
        }
        if row.len() != window.train_len() {
            return Err(Error::Checkpoint(format!(
                "{}: training row has {} months, window needs {}",
                path.display(),
                row.len(),
                window.train_len()
            )));
        }
        training.row_mut(j).copy_from_slice(&row);
        models.push(model);
    }
    let bank = ModelBank {
        schedule,
        window,
        hyperparams,
        master_seed,
        models,
        training,
    };
    ck(bank.validate())?;
    Ok(bank)
}
