use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::predict;
use super::{ClassifierError, FeatureSet, HeadModel, SubtypeAccuracy};
use crate::nn::{
    softmax_cross_entropy, softmax_cross_entropy_batch, Adam, AdamConfig, Mode, NnError,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 0.001,
            batch_size: 16,
            max_epochs: 200,
            patience: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Wait,
    Stop,
}

/// Tracks the best validation loss. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    best_loss: f64,
    best_epoch: usize,
    waited: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            waited: 0,
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    /// Only a strictly lower loss counts as an improvement.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = epoch;
            self.waited = 0;
            return StopDecision::Improved;
        }
        self.waited += 1;
        if self.waited >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Wait
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss while training.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Last epoch run; 0 when no epoch ran.
    pub stopped_epoch: usize,
    /// Epoch whose parameters were kept; 0 means the initial ones.
    pub best_epoch: usize,
    pub test_accuracy: Option<f64>,
    pub per_class: Option<SubtypeAccuracy>,
}

fn check_set(model: &HeadModel, set: &FeatureSet) -> Result<(), ClassifierError> {
    if set.is_empty() {
        return Err(ClassifierError::EmptySet);
    }
    if set.sample_shape() != model.config.input_shape.as_slice() {
        return Err(ClassifierError::ShapeMismatch {
            expected: model.config.input_shape.clone(),
            found: set.sample_shape().to_vec(),
        });
    }
    let classes = model.config.classes;
    if let Some(&label) = set.labels().iter().find(|&&l| l >= classes) {
        return Err(ClassifierError::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean loss and accuracy at inference.
fn evaluate(model: &HeadModel, set: &FeatureSet) -> Result<(f64, f64), ClassifierError> {
    let logits = model.logits(&set.all()?)?;
    let mut loss = 0.0;
    for (r, &label) in set.labels().iter().enumerate() {
        loss += softmax_cross_entropy(logits.row(r), label)?.0;
    }
    let predicted = predict(model, set)?;
    let right = predicted
        .iter()
        .zip(set.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok((loss / set.len() as f64, right as f64 / set.len() as f64))
}

/// Batches of the shuffled order. A trailing batch of one sample is
/// folded into the one before, since batch norm needs two rows.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().expect("at least one batch") = &order[start..];
    }
    out
}

/// Mini-batch Adam with early stopping on validation loss. The model
/// ends up holding the parameters of the best epoch.
pub fn train_head(
    model: &mut HeadModel,
    train: &FeatureSet,
    validation: &FeatureSet,
    hyper: &TrainHyper,
    seed: u64,
) -> Result<TrainReport, ClassifierError> {
    check_set(model, train)?;
    check_set(model, validation)?;
    if hyper.batch_size == 0 {
        return Err(ClassifierError::ZeroBatch);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Adam::new(AdamConfig {
        lr: hyper.lr,
        ..AdamConfig::default()
    });
    let mut stopper = EarlyStopping::new(hyper.patience);
    let mut best = model.net.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=hyper.max_epochs {
        let diverged = |e: NnError| match e {
            NnError::NonFinite { .. } => ClassifierError::Diverged { epoch },
            other => ClassifierError::Nn(other),
        };
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in batches(&order, hyper.batch_size) {
            let x = train.batch(batch)?;
            let labels: Vec<usize> = batch.iter().map(|&i| train.labels()[i]).collect();
            model.net.zero_grad();
            let logits = model.forward(&x, Mode::Train, &mut rng)?;
            let (loss, grad) = softmax_cross_entropy_batch(&logits, &labels).map_err(diverged)?;
            if !loss.is_finite() {
                return Err(ClassifierError::Diverged { epoch });
            }
            model.net.backward(&grad).map_err(diverged)?;
            opt.step(model.net.params_mut()).map_err(diverged)?;
            loss_sum += loss * batch.len() as f64;
        }
        let (_, train_accuracy) = evaluate(model, train)?;
        let (val_loss, val_accuracy) = evaluate(model, validation)?;
        if !val_loss.is_finite() {
            return Err(ClassifierError::Diverged { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = model.net.clone(),
            StopDecision::Wait => {}
            StopDecision::Stop => break,
        }
    }

    model.net = best;
    model.net.zero_grad();
    model.net.clear_caches();
    Ok(TrainReport {
        stopped_epoch: history.len(),
        best_epoch: stopper.best_epoch(),
        history,
        test_accuracy: None,
        per_class: None,
    })
}
