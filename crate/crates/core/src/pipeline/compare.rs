use rayon::prelude::*;

use super::data::Sample;
use super::model::{BackboneKind, Model};
use super::train::{evaluate, train, TrainConfig};
use crate::error::{Error, Result};
use crate::units::{IndexMode, RegressionMode, UnitKind};

/// Seed-averaged metrics of one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub backbone: BackboneKind,
    pub unit: UnitKind,
    pub index_mode: IndexMode,
    pub regression_mode: RegressionMode,
    pub cd: f64,
    pub hd: f64,
    pub p2f: f64,
    pub seeds: usize,
    pub steps: usize,
    pub backbone_params: usize,
    pub unit_params: usize,
}

/// Trains every configuration once per seed and reports test-set means,
/// averaged over seeds, in request order.
///
/// All configurations must share the step count and batch size, and those on
/// the same backbone kind must share its parameter count; anything else would
/// not be a like-for-like comparison.
pub fn compare_units(configs: &[TrainConfig], seeds: &[u64], train_set: &[Sample], test_set: &[Sample]) -> Result<Vec<ComparisonRow>> {
    if configs.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("comparison needs at least one config and one seed"));
    }
    let mut counts = Vec::with_capacity(configs.len());
    for c in configs {
        c.validate()?;
        let m = Model::new(c.model.clone(), 0)?;
        counts.push((m.backbone_params(), m.unit_params()));
    }
    let first = &configs[0];
    for (c, &(bb, _)) in configs.iter().zip(&counts) {
        if c.steps != first.steps || c.batch_size != first.batch_size {
            return Err(Error::invalid(format!(
                "mismatched budgets: {} steps x batch {} vs {} steps x batch {}",
                c.steps, c.batch_size, first.steps, first.batch_size
            )));
        }
        let peer = configs.iter().position(|o| o.model.backbone.kind == c.model.backbone.kind).unwrap();
        if bb != counts[peer].0 {
            return Err(Error::invalid(format!(
                "mismatched budgets: {} backbone parameter counts {bb} vs {}",
                c.model.backbone.kind, counts[peer].0
            )));
        }
    }

    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let mut cfg = configs[c].clone();
            cfg.seed = seed;
            let trained = train(&cfg, train_set)?;
            let rows = evaluate(&trained.model, test_set)?;
            Ok(rows.last().cloned().expect("mean row"))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = seeds.len() as f64;
    Ok(configs
        .iter()
        .enumerate()
        .map(|(c, cfg)| {
            let runs = &results[c * seeds.len()..(c + 1) * seeds.len()];
            let unit = &cfg.model.unit;
            ComparisonRow {
                backbone: cfg.model.backbone.kind,
                unit: unit.kind,
                index_mode: unit.index_mode,
                regression_mode: unit.regression_mode,
                cd: runs.iter().map(|r| r.cd).sum::<f64>() / n,
                hd: runs.iter().map(|r| r.hd).sum::<f64>() / n,
                p2f: runs.iter().map(|r| r.p2f.unwrap_or(f64::NAN)).sum::<f64>() / n,
                seeds: seeds.len(),
                steps: cfg.steps,
                backbone_params: counts[c].0,
                unit_params: counts[c].1,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::data::{sample_pair, SyntheticShape};
    use crate::pipeline::model::{BackboneSpec, ModelSpec};
    use crate::tensor::AdamConfig;
    use crate::units::ExpansionSpec;

    fn cfg(kind: UnitKind, steps: usize) -> TrainConfig {
        TrainConfig {
            model: ModelSpec {
                backbone: BackboneSpec {
                    kind: BackboneKind::MlpStack,
                    depth: 1,
                    width: 4,
                },
                unit: ExpansionSpec::new(kind, 2, 4, 3),
            },
            steps,
            batch_size: 1,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }

    fn data() -> Vec<Sample> {
        vec![sample_pair(&SyntheticShape::Sphere { radius: 1.0 }, 12, 2, 4).unwrap()]
    }

    #[test]
    fn rows_follow_request_order_and_repeat_exactly() {
        let configs = [cfg(UnitKind::NodeShuffle, 3), cfg(UnitKind::Branch, 3), cfg(UnitKind::NodeShuffle, 3)];
        let rows = compare_units(&configs, &[1, 2], &data(), &data()).unwrap();
        let units: Vec<_> = rows.iter().map(|r| r.unit).collect();
        assert_eq!(units, vec![UnitKind::NodeShuffle, UnitKind::Branch, UnitKind::NodeShuffle]);
        assert_eq!(rows[0], rows[2]);
        assert!(rows.iter().all(|r| r.seeds == 2 && r.cd.is_finite()));
    }

    #[test]
    fn unequal_budgets_refused() {
        let configs = [cfg(UnitKind::Branch, 3), cfg(UnitKind::Branch, 4)];
        let err = compare_units(&configs, &[1], &data(), &data()).unwrap_err();
        assert!(err.to_string().contains("mismatched budgets"), "{err}");

        let mut deeper = cfg(UnitKind::Branch, 3);
        deeper.model.backbone.depth = 2;
        let err = compare_units(&[cfg(UnitKind::Branch, 3), deeper], &[1], &data(), &data()).unwrap_err();
        assert!(err.to_string().contains("backbone"), "{err}");
    }
}
