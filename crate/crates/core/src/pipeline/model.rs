use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{knn_accelerated, IndexMatrix, PointCloud};
use crate::nn::{coords_to_cloud, EdgeConvLayer, SharedMLP};
use crate::tensor::{ParamStore, Tape, Tensor, Var};
use crate::units::{ExpansionContext, ExpansionSpec, ExpansionUnit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackboneKind {
    MlpStack,
    EdgeConvStack,
}

impl BackboneKind {
    pub const ALL: &'static [BackboneKind] = &[BackboneKind::MlpStack, BackboneKind::EdgeConvStack];

    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::MlpStack => "mlp_stack",
            BackboneKind::EdgeConvStack => "edgeconv_stack",
        }
    }
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp_stack" => Ok(BackboneKind::MlpStack),
            "edgeconv_stack" => Ok(BackboneKind::EdgeConvStack),
            _ => Err(Error::invalid(format!(
                "unknown backbone `{s}` (expected mlp_stack or edgeconv_stack)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackboneSpec {
    pub kind: BackboneKind,
    pub depth: usize,
    pub width: usize,
}

/// Feature extractor: `N x 3` coordinates to `N x C` features.
#[derive(Clone, Debug)]
pub enum Backbone {
    Mlp(SharedMLP),
    EdgeConv(Vec<EdgeConvLayer>),
}

impl Backbone {
    pub fn new(spec: &BackboneSpec, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self> {
        if spec.depth == 0 || spec.width == 0 {
            return Err(Error::invalid("backbone depth and width must be positive"));
        }
        Ok(match spec.kind {
            BackboneKind::MlpStack => {
                let mut widths = vec![3];
                widths.extend(std::iter::repeat(spec.width).take(spec.depth));
                Backbone::Mlp(SharedMLP::new(store, "backbone", &widths, true, rng)?)
            }
            BackboneKind::EdgeConvStack => Backbone::EdgeConv(
                (0..spec.depth)
                    .map(|l| {
                        let c_in = if l == 0 { 3 } else { spec.width };
                        EdgeConvLayer::new(store, &format!("backbone.{l}"), c_in, &[], spec.width, true, rng)
                    })
                    .collect::<Result<_>>()?,
            ),
        })
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, ctx: &ExpansionContext, coords: Var) -> Result<Var> {
        match self {
            Backbone::Mlp(mlp) => mlp.apply(tape, store, coords),
            Backbone::EdgeConv(layers) => {
                let mut x = coords;
                for layer in layers {
                    x = layer.apply(tape, store, x, ctx.base_graph())?;
                }
                Ok(x)
            }
        }
    }
}

/// Backbone plus expansion unit.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub backbone: BackboneSpec,
    pub unit: ExpansionSpec,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.backbone.width != self.unit.width {
            return Err(Error::invalid(format!(
                "backbone width {} differs from unit width {}",
                self.backbone.width, self.unit.width
            )));
        }
        if self.unit.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        self.unit.validate()
    }
}

/// A full upsampling network with its parameters.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    store: ParamStore,
    backbone: Backbone,
    unit: ExpansionUnit,
}

impl Model {
    /// Builds the network with weights drawn from `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let backbone = Backbone::new(&spec.backbone, &mut store, &mut rng)?;
        let unit = ExpansionUnit::new(spec.unit.clone(), &mut store, "unit", &mut rng)?;
        Ok(Self {
            spec,
            store,
            backbone,
            unit,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn ratio(&self) -> usize {
        self.spec.unit.ratio
    }

    pub fn backbone_params(&self) -> usize {
        self.store.count_scalars("backbone.")
    }

    pub fn unit_params(&self) -> usize {
        self.store.count_scalars("unit.")
    }

    /// Base graph for an input cloud.
    pub fn graph_for(&self, cloud: &PointCloud) -> Result<IndexMatrix> {
        if cloud.len() <= self.spec.unit.k {
            return Err(Error::invalid(format!(
                "input has {} points; at least k + 1 = {} are needed",
                cloud.len(),
                self.spec.unit.k + 1
            )));
        }
        knn_accelerated(cloud, self.spec.unit.k)
    }

    /// Records the forward pass; returns `rN x 3` coordinates.
    pub fn forward(&self, tape: &mut Tape, cloud: &PointCloud, graph: &IndexMatrix) -> Result<Var> {
        let ctx = ExpansionContext::new(cloud, graph)?;
        let coords = tape.constant(Tensor::new(&[cloud.len(), 3], cloud.flat())?);
        let features = self.backbone.apply(tape, &self.store, &ctx, coords)?;
        self.unit.forward(tape, &self.store, &ctx, features)
    }

    pub fn upsample(&self, cloud: &PointCloud) -> Result<PointCloud> {
        let graph = self.graph_for(cloud)?;
        self.upsample_with_graph(cloud, &graph)
    }

    pub fn upsample_with_graph(&self, cloud: &PointCloud, graph: &IndexMatrix) -> Result<PointCloud> {
        let mut tape = Tape::new();
        let y = self.forward(&mut tape, cloud, graph)?;
        coords_to_cloud(tape.value(y))
    }
}
