use rayon::prelude::*;

use super::data::Sample;
use super::model::{Model, ModelSpec};
use crate::error::{Error, Result};
use crate::geometry::{IndexMatrix, KdTree};
use crate::metrics::{chamfer_loss, MetricReport};
use crate::tensor::{adam_step, AdamConfig, AdamState, Tape};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub model: ModelSpec,
    pub steps: usize,
    pub batch_size: usize,
    /// Seeds the weight initialization; the batch order is fixed.
    pub seed: u64,
    pub adam: AdamConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        let a = &self.adam;
        if !(a.lr >= 0.0 && a.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", a.lr)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || !(a.eps > 0.0) {
            return Err(Error::invalid("adam betas must lie in [0, 1) and eps must be positive"));
        }
        Ok(())
    }
}

/// Trained model and the pre-update loss of every step.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    pub losses: Vec<f64>,
}

fn check_sample(ratio: usize, s: &Sample) -> Result<()> {
    if s.gt.len() != ratio * s.input.len() {
        return Err(Error::invalid(format!(
            "sample `{}`: {} ground-truth points for {} inputs at ratio {ratio}",
            s.name,
            s.gt.len(),
            s.input.len()
        )));
    }
    Ok(())
}

struct Prepared<'a> {
    sample: &'a Sample,
    graph: IndexMatrix,
    gt_tree: KdTree,
}

/// Minimizes the Chamfer distance between predictions and ground truth with Adam.
pub fn train(cfg: &TrainConfig, data: &[Sample]) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model = Model::new(cfg.model.clone(), cfg.seed)?;
    train_model(model, cfg, data)
}

/// Continues training an existing model.
pub fn train_model(mut model: Model, cfg: &TrainConfig, data: &[Sample]) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let prepared = data
        .iter()
        .map(|s| {
            check_sample(model.ratio(), s)?;
            Ok(Prepared {
                sample: s,
                graph: model.graph_for(&s.input)?,
                gt_tree: KdTree::new(s.gt.points()),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut state = AdamState::new(model.store());
    let mut losses = Vec::with_capacity(cfg.steps);
    let diverged = |step: usize, loss: f64| Error::Diverged { step, loss };
    for step in 0..cfg.steps {
        let mut tape = Tape::new();
        let mut total: Option<_> = None;
        for b in 0..cfg.batch_size {
            let p = &prepared[(step * cfg.batch_size + b) % prepared.len()];
            let as_divergence = |e| match e {
                Error::NonFinite(_) => diverged(step, f64::NAN),
                other => other,
            };
            let pred = model.forward(&mut tape, &p.sample.input, &p.graph).map_err(as_divergence)?;
            let loss = chamfer_loss(&mut tape, pred, &p.sample.gt, &p.gt_tree).map_err(as_divergence)?;
            total = Some(match total {
                None => loss,
                Some(acc) => tape.add(acc, loss)?,
            });
        }
        let loss = tape.scale(total.expect("batch_size >= 1"), 1.0 / cfg.batch_size as f64);
        let value = tape.value(loss).data()[0];
        if !value.is_finite() {
            return Err(diverged(step, value));
        }
        losses.push(value);
        let grads = tape.backward(loss);
        let grads = tape.param_grads(&grads, model.store());
        adam_step(model.store_mut(), &grads, &mut state, &cfg.adam).map_err(|e| match e {
            Error::NonFinite(_) => diverged(step, value),
            other => other,
        })?;
    }
    Ok(TrainOutcome { model, losses })
}

/// Metrics per sample plus a final `mean` row.
pub fn evaluate(model: &Model, data: &[Sample]) -> Result<Vec<MetricReport>> {
    if data.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    let mut rows = data
        .par_iter()
        .map(|s| {
            check_sample(model.ratio(), s)?;
            let pred = model.upsample(&s.input)?;
            MetricReport::compute(s.name.clone(), &pred, &s.gt, Some(&s.mesh))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = MetricReport::mean("mean", &rows)?;
    rows.push(mean);
    Ok(rows)
}
