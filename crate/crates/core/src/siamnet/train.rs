use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::net::SiameseModel;
use super::objective::{class_loss_grad, pair_loss_grad};
use super::optim::{OptimizerState, RmsProp};
use super::NetConfig;
use crate::sampling::{BatchIterator, PairDataset, PatchPair};
use crate::seeds;
use crate::{MraiError, Result};

/// Epoch/batch schedule and optimizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: RmsProp,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 320,
            batch_size: 64,
            optimizer: RmsProp::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SiameseModel,
    pub history: Vec<EpochLog>,
    /// Parameter updates performed.
    pub steps: u64,
}

struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed_ms(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64() * 1e3
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}

fn run_epochs<B, G>(mut model: SiameseModel, opts: &TrainOptions, run_seed: u64, batches: B, grad: G) -> Result<TrainOutcome>
where
    B: Fn(usize) -> Result<Vec<Vec<usize>>>,
    G: Fn(&SiameseModel, &[usize], u64) -> Result<(f64, Vec<f64>)>,
{
    let mut state = OptimizerState::new(opts.optimizer, model.param_count());
    let mut history = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let clock = Clock::start();
        let plan = batches(epoch)?;
        let mut total = 0.0;
        for (b, members) in plan.iter().enumerate() {
            let dropout_seed = seeds::derive(run_seed, "dropout", &[epoch as u64, b as u64]);
            let (loss, g) = grad(&model, members, dropout_seed)?;
            if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(MraiError::NonFiniteLoss { epoch, batch: b });
            }
            state.step(&mut model.params, &g);
            total += loss;
        }
        let mean_loss = total / plan.len() as f64;
        log::debug!("epoch {epoch}: mean batch loss {mean_loss:.6}");
        history.push(EpochLog {
            epoch,
            mean_loss,
            wall_ms: clock.elapsed_ms(),
        });
    }
    Ok(TrainOutcome {
        model,
        history,
        steps: state.steps,
    })
}

fn dropout_for(model: &SiameseModel, seed: u64) -> Option<u64> {
    (model.config.dropout_rate > 0.0).then_some(seed)
}

/// Train an existing model on similarity-labelled pairs over `inputs`, with
/// stratified batches reshuffled every epoch.
pub fn train_pairs(
    model: SiameseModel,
    inputs: &[Vec<f64>],
    pairs: &[PatchPair],
    opts: &TrainOptions,
    run_seed: u64,
) -> Result<TrainOutcome> {
    if pairs.is_empty() {
        return Err(MraiError::InvalidArgument("empty pair dataset".into()));
    }
    let batches = |epoch: usize| -> Result<Vec<Vec<usize>>> {
        let seed = seeds::derive(run_seed, "epoch", &[epoch as u64]);
        let indexed: Vec<PatchPair> = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| PatchPair { a: i, ..*p })
            .collect();
        Ok(BatchIterator::new(&indexed, opts.batch_size, seed)?
            .map(|b| b.pairs.iter().map(|p| p.a).collect())
            .collect())
    };
    run_epochs(model, opts, run_seed, batches, |m, members, seed| {
        let batch: Vec<PatchPair> = members.iter().map(|&i| pairs[i]).collect();
        pair_loss_grad(m, inputs, &batch, dropout_for(m, seed))
    })
}

/// Initialize from `run_seed` and train on a pair dataset.
pub fn train(config: NetConfig, dataset: &PairDataset, opts: &TrainOptions, run_seed: u64) -> Result<TrainOutcome> {
    let model = SiameseModel::init(config, seeds::derive(run_seed, "init", &[]))?;
    train_pairs(model, &dataset.inputs(), &dataset.pairs, opts, run_seed)
}

/// Supervised baseline: the same network with one output per class, trained
/// with softmax cross-entropy on shuffled mini-batches.
pub fn train_classifier(
    config: NetConfig,
    inputs: &[Vec<f64>],
    labels: &[usize],
    opts: &TrainOptions,
    run_seed: u64,
) -> Result<TrainOutcome> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(MraiError::InvalidArgument("classifier needs one label per input".into()));
    }
    if opts.batch_size == 0 {
        return Err(MraiError::InvalidArgument("batch_size must be >= 1".into()));
    }
    let model = SiameseModel::init(config, seeds::derive(run_seed, "init", &[]))?;
    let batches = |epoch: usize| -> Result<Vec<Vec<usize>>> {
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        order.shuffle(&mut seeds::rng(seeds::derive(run_seed, "epoch", &[epoch as u64])));
        Ok(order.chunks(opts.batch_size).map(<[usize]>::to_vec).collect())
    };
    run_epochs(model, opts, run_seed, batches, |m, members, seed| {
        let samples: Vec<(usize, usize)> = members.iter().map(|&i| (i, labels[i])).collect();
        class_loss_grad(m, inputs, &samples, dropout_for(m, seed))
    })
}

/// Per-epoch loss log as delimited text. Wall time is optional so that
/// deterministic artifacts can omit it.
pub fn write_loss_log<W: Write>(mut w: W, history: &[EpochLog], with_wall: bool) -> Result<()> {
    if with_wall {
        writeln!(w, "epoch,mean_loss,wall_ms")?;
    } else {
        writeln!(w, "epoch,mean_loss")?;
    }
    for e in history {
        if with_wall {
            writeln!(w, "{},{},{:.3}", e.epoch, e.mean_loss, e.wall_ms)?;
        } else {
            writeln!(w, "{},{}", e.epoch, e.mean_loss)?;
        }
    }
    Ok(())
}
