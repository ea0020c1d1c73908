//! Feature-expansion units.
//!
//! Every unit maps `N x C` point features to `rN x C'` features with the
//! children of point `i` at rows `r*i .. r*i + r`, then a regression stage
//! turns the expanded features into `rN` coordinates.
//!
//! | kind             | expansion                                                   |
//! |------------------|-------------------------------------------------------------|
//! | `branch`         | `r` independent per-point MLPs `C -> C1 -> C2`, interleaved  |
//! | `duplicate`      | `log2 r` rounds of (copy with a +-1 code, MLP `C+1 -> C`)    |
//! | `single_mlp`     | one shared layer `C -> rC`, shuffle                          |
//! | `multilayer_mlp` | five shared layers `C -> C`, then `C -> rC`, shuffle         |
//! | `progressive_mlp`| one `C -> C` layer, then `log2 r` rounds of (`C -> 2C`, shuffle) |
//! | `nodeshuffle`    | EdgeConv `C -> rC` on the base graph, shuffle                |
//! | `proedgeshuffle` | `log2 r` rounds of (EdgeConv `C -> 2C`, shuffle, graph update) |
//!
//! Only the last two let a point's children see its neighbors.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{expand_index, knn_features, IndexMatrix, PointCloud};
use crate::nn::{duplicate_with_code, regress_coords, EdgeConvLayer, SharedMLP};
use crate::tensor::{ParamStore, Tape, Var};

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::invalid(format!(
                        "unknown {} `{s}` (expected one of: {})",
                        stringify!($name),
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(UnitKind {
    Branch => "branch",
    Duplicate => "duplicate",
    SingleMlp => "single_mlp",
    MultilayerMlp => "multilayer_mlp",
    ProgressiveMlp => "progressive_mlp",
    NodeShuffle => "nodeshuffle",
    ProEdgeShuffle => "proedgeshuffle",
});

named_enum!(
    /// How the graph for the expanded point set is obtained.
    IndexMode {
        Expand => "expand",
        FeatureKnn => "feature_knn",
    }
);

named_enum!(
    /// How expanded features become coordinates.
    RegressionMode {
        Direct => "direct",
        EdgeConvAfter => "edgeconv_after",
        EdgeConvBefore => "edgeconv_before",
    }
);

impl UnitKind {
    pub fn uses_graph(self) -> bool {
        matches!(self, UnitKind::NodeShuffle | UnitKind::ProEdgeShuffle)
    }

    pub fn default_regression(self) -> RegressionMode {
        match self {
            UnitKind::ProEdgeShuffle => RegressionMode::EdgeConvBefore,
            _ => RegressionMode::Direct,
        }
    }
}

/// Configuration of one expansion unit and its regression stage.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionSpec {
    pub kind: UnitKind,
    pub ratio: usize,
    /// Feature width `C` entering the unit.
    pub width: usize,
    /// Neighbors per point for every graph the unit builds or uses.
    pub k: usize,
    pub index_mode: IndexMode,
    pub regression_mode: RegressionMode,
    /// Hidden and output widths of each branch (`C1`, `C2`).
    pub branch_hidden: usize,
    pub branch_out: usize,
    /// Number of affine layers inside each EdgeConv aggregation function.
    pub edge_depth: usize,
}

impl ExpansionSpec {
    pub fn new(kind: UnitKind, ratio: usize, width: usize, k: usize) -> Self {
        Self {
            kind,
            ratio,
            width,
            k,
            index_mode: IndexMode::Expand,
            regression_mode: kind.default_regression(),
            branch_hidden: width,
            branch_out: width,
            edge_depth: 1,
        }
    }

    /// Width of the features the unit hands to regression.
    pub fn out_width(&self) -> usize {
        match self.kind {
            UnitKind::Branch => self.branch_out,
            _ => self.width,
        }
    }

    /// Number of doubling rounds, when the ratio is a power of two.
    pub fn doublings(&self) -> Option<u32> {
        self.ratio.is_power_of_two().then(|| self.ratio.trailing_zeros())
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratio < 2 {
            return Err(Error::invalid(format!("ratio must be at least 2, got {}", self.ratio)));
        }
        if self.width == 0 || self.branch_hidden == 0 || self.branch_out == 0 {
            return Err(Error::invalid("feature widths must be positive"));
        }
        if self.edge_depth == 0 {
            return Err(Error::invalid("edge_depth must be at least 1"));
        }
        let pow2 = self.ratio.is_power_of_two();
        match self.kind {
            UnitKind::Duplicate | UnitKind::ProgressiveMlp if !pow2 => {
                return Err(Error::invalid(format!(
                    "ratio must be a power of 2 for {}, got {}",
                    self.kind, self.ratio
                )));
            }
            UnitKind::ProEdgeShuffle if !pow2 => {
                return Err(Error::invalid(format!(
                    "ratio must be a power of 2 for proedgeshuffle, got {}",
                    self.ratio
                )));
            }
            UnitKind::ProEdgeShuffle if self.ratio > 16 => {
                return Err(Error::invalid(format!(
                    "proedgeshuffle supports ratios 2, 4, 8 and 16, got {}",
                    self.ratio
                )));
            }
            _ => {}
        }
        let needs_graph =
            self.kind.uses_graph() || self.regression_mode != RegressionMode::Direct;
        if needs_graph && self.k == 0 {
            return Err(Error::invalid("graph-based stages need k >= 1"));
        }
        if self.regression_mode != RegressionMode::Direct
            && self.index_mode == IndexMode::Expand
            && !pow2
        {
            return Err(Error::invalid(format!(
                "{} with index expansion needs a power-of-2 ratio, got {}",
                self.regression_mode, self.ratio
            )));
        }
        Ok(())
    }
}

/// Per-cloud inputs shared by the backbone and the unit.
#[derive(Debug)]
pub struct ExpansionContext<'a> {
    cloud: &'a PointCloud,
    base: &'a IndexMatrix,
    graph_reads: Cell<usize>,
}

impl<'a> ExpansionContext<'a> {
    pub fn new(cloud: &'a PointCloud, base: &'a IndexMatrix) -> Result<Self> {
        if base.rows() != cloud.len() {
            return Err(Error::invalid(format!(
                "graph has {} rows but the cloud has {} points",
                base.rows(),
                cloud.len()
            )));
        }
        Ok(Self {
            cloud,
            base,
            graph_reads: Cell::new(0),
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        self.cloud
    }

    /// The KNN graph of the input cloud. Reads are counted.
    pub fn base_graph(&self) -> &IndexMatrix {
        self.graph_reads.set(self.graph_reads.get() + 1);
        self.base
    }

    pub fn graph_reads(&self) -> usize {
        self.graph_reads.get()
    }
}

/// Output of the expansion stage.
#[derive(Debug)]
pub struct Expanded {
    /// `rN x C'` features, children of point `i` at rows `r*i .. r*i + r`.
    pub features: Var,
    /// Graph over the `rN` rows when the unit built one on the way.
    pub graph: Option<IndexMatrix>,
    /// Row count after each stage, starting with `N`.
    pub row_trace: Vec<usize>,
}

#[derive(Clone, Debug)]
enum Layers {
    Branch(Vec<SharedMLP>),
    Duplicate(Vec<SharedMLP>),
    SingleMlp(SharedMLP),
    MultilayerMlp { body: SharedMLP, expand: SharedMLP },
    ProgressiveMlp { extract: SharedMLP, rounds: Vec<SharedMLP> },
    NodeShuffle(EdgeConvLayer),
    ProEdgeShuffle(Vec<EdgeConvLayer>),
}

/// A configured expansion unit together with its regression stage.
#[derive(Clone, Debug)]
pub struct ExpansionUnit {
    spec: ExpansionSpec,
    layers: Layers,
    refine: Option<EdgeConvLayer>,
    head: SharedMLP,
}

fn edge_hidden(spec: &ExpansionSpec, c_out: usize) -> Vec<usize> {
    vec![c_out; spec.edge_depth - 1]
}

impl ExpansionUnit {
    /// Registers the unit's parameters under `prefix` in `store`.
    pub fn new<R: Rng>(spec: ExpansionSpec, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        Self::build(spec, store, prefix, rng)
    }

    fn build<R: Rng>(spec: ExpansionSpec, store: &mut ParamStore, prefix: &str, rng: &mut R) -> Result<Self> {
        let c = spec.width;
        let r = spec.ratio;
        let rounds = spec.doublings().unwrap_or(0) as usize;
        let layers = match spec.kind {
            UnitKind::Branch => Layers::Branch(
                (0..r)
                    .map(|s| {
                        SharedMLP::new(
                            store,
                            &format!("{prefix}.branch{s}"),
                            &[c, spec.branch_hidden, spec.branch_out],
                            false,
                            rng,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
            UnitKind::Duplicate => Layers::Duplicate(
                (0..rounds)
                    .map(|i| SharedMLP::new(store, &format!("{prefix}.dup{i}"), &[c + 1, c], true, rng))
                    .collect::<Result<_>>()?,
            ),
            UnitKind::SingleMlp => {
                Layers::SingleMlp(SharedMLP::new(store, &format!("{prefix}.expand"), &[c, r * c], false, rng)?)
            }
            UnitKind::MultilayerMlp => Layers::MultilayerMlp {
                body: SharedMLP::new(store, &format!("{prefix}.body"), &[c; 6], true, rng)?,
                expand: SharedMLP::new(store, &format!("{prefix}.expand"), &[c, r * c], false, rng)?,
            },
            UnitKind::ProgressiveMlp => Layers::ProgressiveMlp {
                extract: SharedMLP::new(store, &format!("{prefix}.extract"), &[c, c], true, rng)?,
                rounds: (0..rounds)
                    .map(|i| {
                        SharedMLP::new(
                            store,
                            &format!("{prefix}.round{i}"),
                            &[c, 2 * c],
                            i + 1 < rounds,
                            rng,
                        )
                    })
                    .collect::<Result<_>>()?,
            },
            UnitKind::NodeShuffle => Layers::NodeShuffle(EdgeConvLayer::new(
                store,
                &format!("{prefix}.edge"),
                c,
                &edge_hidden(&spec, r * c),
                r * c,
                true,
                rng,
            )?),
            UnitKind::ProEdgeShuffle => Layers::ProEdgeShuffle(
                (0..rounds)
                    .map(|i| {
                        EdgeConvLayer::new(
                            store,
                            &format!("{prefix}.round{i}"),
                            c,
                            &edge_hidden(&spec, 2 * c),
                            2 * c,
                            true,
                            rng,
                        )
                    })
                    .collect::<Result<_>>()?,
            ),
        };

        let w = spec.out_width();
        let refine = match spec.regression_mode {
            RegressionMode::Direct => None,
            RegressionMode::EdgeConvBefore => Some(EdgeConvLayer::new(
                store,
                &format!("{prefix}.refine"),
                w,
                &edge_hidden(&spec, w),
                w,
                true,
                rng,
            )?),
            // acts on coordinates, so no output activation
            RegressionMode::EdgeConvAfter => Some(EdgeConvLayer::new(
                store,
                &format!("{prefix}.refine"),
                3,
                &edge_hidden(&spec, 3),
                3,
                false,
                rng,
            )?),
        };
        let head = SharedMLP::new(store, &format!("{prefix}.head"), &[w, 3], false, rng)?;
        Ok(Self {
            spec,
            layers,
            refine,
            head,
        })
    }

    pub fn spec(&self) -> &ExpansionSpec {
        &self.spec
    }

    pub fn head(&self) -> &SharedMLP {
        &self.head
    }

    /// Expansion stage only: `N x C -> rN x C'`.
    pub fn expand(&self, tape: &mut Tape, store: &ParamStore, ctx: &ExpansionContext, features: Var) -> Result<Expanded> {
        let shape = tape.shape(features).to_vec();
        if shape.len() != 2 || shape[1] != self.spec.width {
            return Err(Error::Shape {
                op: "expand",
                lhs: shape,
                rhs: vec![ctx.cloud().len(), self.spec.width],
            });
        }
        let n = shape[0];
        if n != ctx.cloud().len() {
            return Err(Error::invalid(format!(
                "{n} feature rows for a cloud of {} points",
                ctx.cloud().len()
            )));
        }
        let r = self.spec.ratio;
        let mut row_trace = vec![n];
        let mut graph = None;
        let features = match &self.layers {
            Layers::Branch(branches) => {
                let mut out: Option<Var> = None;
                for b in branches {
                    let y = b.apply(tape, store, features)?;
                    out = Some(match out {
                        None => y,
                        Some(acc) => tape.concat_last(acc, y)?,
                    });
                }
                let y = tape.shuffle_expand(out.expect("ratio >= 1"), r)?;
                row_trace.push(r * n);
                y
            }
            Layers::Duplicate(rounds) => {
                let mut x = features;
                for mlp in rounds {
                    let d = duplicate_with_code(tape, x)?;
                    x = mlp.apply(tape, store, d)?;
                    row_trace.push(tape.shape(x)[0]);
                }
                x
            }
            Layers::SingleMlp(expand) => {
                let y = expand.apply(tape, store, features)?;
                row_trace.push(r * n);
                tape.shuffle_expand(y, r)?
            }
            Layers::MultilayerMlp { body, expand } => {
                let h = body.apply(tape, store, features)?;
                let y = expand.apply(tape, store, h)?;
                row_trace.push(r * n);
                tape.shuffle_expand(y, r)?
            }
            Layers::ProgressiveMlp { extract, rounds } => {
                let mut x = extract.apply(tape, store, features)?;
                for mlp in rounds {
                    let y = mlp.apply(tape, store, x)?;
                    x = tape.shuffle_expand(y, 2)?;
                    row_trace.push(tape.shape(x)[0]);
                }
                x
            }
            Layers::NodeShuffle(edge) => {
                let y = edge.apply(tape, store, features, ctx.base_graph())?;
                row_trace.push(r * n);
                tape.shuffle_expand(y, r)?
            }
            Layers::ProEdgeShuffle(rounds) => {
                let mut g = ctx.base_graph().clone();
                let mut x = features;
                for edge in rounds {
                    let y = edge.apply(tape, store, x, &g)?;
                    x = tape.shuffle_expand(y, 2)?;
                    g = self.next_graph(tape, x, &g)?;
                    row_trace.push(tape.shape(x)[0]);
                }
                graph = Some(g);
                x
            }
        };
        Ok(Expanded {
            features,
            graph,
            row_trace,
        })
    }

    /// Graph for the doubled rows `x`, given the graph `g` of the parents.
    fn next_graph(&self, tape: &Tape, x: Var, g: &IndexMatrix) -> Result<IndexMatrix> {
        match self.spec.index_mode {
            IndexMode::Expand => Ok(expand_index(g)),
            IndexMode::FeatureKnn => knn_features(tape.value(x), self.spec.k),
        }
    }

    /// Graph over the `rN` expanded rows, built only when a stage needs it.
    fn full_graph(&self, tape: &Tape, ctx: &ExpansionContext, expanded: &Expanded) -> Result<IndexMatrix> {
        if let Some(g) = &expanded.graph {
            return Ok(g.clone());
        }
        match self.spec.index_mode {
            IndexMode::Expand => {
                let rounds = self.spec.doublings().ok_or_else(|| {
                    Error::invalid("no graph for the expanded points: ratio is not a power of 2")
                })?;
                let mut g = ctx.base_graph().clone();
                for _ in 0..rounds {
                    g = expand_index(&g);
                }
                Ok(g)
            }
            IndexMode::FeatureKnn => knn_features(tape.value(expanded.features), self.spec.k),
        }
    }

    /// Regression stage: `rN x C'` features to `rN x 3` coordinates.
    pub fn finalize(&self, tape: &mut Tape, store: &ParamStore, ctx: &ExpansionContext, expanded: &Expanded) -> Result<Var> {
        let rows = tape.shape(expanded.features)[0];
        if rows != self.spec.ratio * ctx.cloud().len() {
            return Err(Error::invalid(format!(
                "expected {} expanded rows, got {rows}",
                self.spec.ratio * ctx.cloud().len()
            )));
        }
        match (self.spec.regression_mode, &self.refine) {
            (RegressionMode::Direct, _) => Ok(regress_coords(tape, store, &self.head, expanded.features)?.0),
            (RegressionMode::EdgeConvBefore, Some(edge)) => {
                let g = self.full_graph(tape, ctx, expanded)?;
                let x = edge.apply(tape, store, expanded.features, &g)?;
                Ok(regress_coords(tape, store, &self.head, x)?.0)
            }
            (RegressionMode::EdgeConvAfter, Some(edge)) => {
                let g = self.full_graph(tape, ctx, expanded)?;
                let (coords, _) = regress_coords(tape, store, &self.head, expanded.features)?;
                edge.apply(tape, store, coords, &g)
            }
            (mode, None) => Err(Error::invalid(format!("{mode} regression has no refinement layer"))),
        }
    }

    /// Expansion followed by regression: `N x C` features to `rN x 3` coordinates.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, ctx: &ExpansionContext, features: Var) -> Result<Var> {
        let expanded = self.expand(tape, store, ctx, features)?;
        self.finalize(tape, store, ctx, &expanded)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::knn_bruteforce;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(2)
    }

    fn set_weights(store: &mut ParamStore, mlp: &SharedMLP, layers: &[&[f64]]) {
        for ((w, b), data) in mlp.layer_params().into_iter().zip(layers) {
            store.set(w, data).unwrap();
            let nb = store.tensor(b).len();
            store.set(b, &vec![0.0; nb]).unwrap();
        }
    }

    fn cloud(n: usize) -> PointCloud {
        let mut r = ChaCha8Rng::seed_from_u64(n as u64);
        PointCloud::new((0..n).map(|_| [r.gen(), r.gen(), r.gen()]).collect()).unwrap()
    }

    fn features(n: usize, c: usize, seed: u64) -> Tensor {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        Tensor::new(&[n, c], (0..n * c).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn run(unit: &ExpansionUnit, store: &ParamStore, pc: &PointCloud, g: &IndexMatrix, x: &Tensor) -> (Tensor, Vec<usize>) {
        let ctx = ExpansionContext::new(pc, g).unwrap();
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let e = unit.expand(&mut tape, store, &ctx, xv).unwrap();
        (tape.value(e.features).clone(), e.row_trace)
    }

    #[test]
    fn parse_and_print_names() {
        for k in UnitKind::ALL {
            assert_eq!(k.as_str().parse::<UnitKind>().unwrap(), *k);
        }
        assert!("pointshuffle".parse::<UnitKind>().is_err());
        assert_eq!("feature_knn".parse::<IndexMode>().unwrap(), IndexMode::FeatureKnn);
        assert_eq!(RegressionMode::EdgeConvBefore.to_string(), "edgeconv_before");
    }

    #[test]
    fn validation_rules() {
        let mut s = ExpansionSpec::new(UnitKind::ProEdgeShuffle, 3, 8, 4);
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("ratio must be a power of 2"), "{err}");
        s.ratio = 32;
        assert!(s.validate().is_err());
        s.ratio = 16;
        s.validate().unwrap();
        assert!(ExpansionSpec::new(UnitKind::Duplicate, 6, 8, 4).validate().is_err());
        ExpansionSpec::new(UnitKind::Branch, 3, 8, 4).validate().unwrap();
        ExpansionSpec::new(UnitKind::NodeShuffle, 3, 8, 4).validate().unwrap();
        assert!(ExpansionSpec::new(UnitKind::Branch, 1, 8, 4).validate().is_err());
    }

    #[test]
    fn branch_ratio_one_identity() {
        let spec = ExpansionSpec::new(UnitKind::Branch, 1, 2, 1);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::build(spec, &mut store, "u", &mut rng()).unwrap();
        let Layers::Branch(b) = &unit.layers else { panic!() };
        let id = [1.0, 0.0, 0.0, 1.0];
        set_weights(&mut store, &b[0], &[&id, &id]);
        let pc = cloud(3);
        let g = knn_bruteforce(&pc, 1).unwrap();
        // nonnegative so the hidden ReLU is the identity too
        let x = Tensor::from_rows(&[[0.5, 1.0], [2.0, 0.0], [0.25, 3.0]]).unwrap();
        assert_eq!(run(&unit, &store, &pc, &g, &x).0, x);
    }

    #[test]
    fn branch_zero_input_gives_zero() {
        let spec = ExpansionSpec::new(UnitKind::Branch, 4, 3, 2);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let pc = cloud(5);
        let g = knn_bruteforce(&pc, 2).unwrap();
        let (y, _) = run(&unit, &store, &pc, &g, &Tensor::zeros(&[5, 3]));
        assert_eq!(y.shape(), &[20, 3]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn branch_hand_case() {
        // r = 2, C = 1. Branch 0: h = relu(2x), y = 3h. Branch 1: h = relu(-x), y = 5h.
        // x = [1, -2] -> point 0: [6, 0], point 1: [0, 10]
        let spec = ExpansionSpec::new(UnitKind::Branch, 2, 1, 1);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let Layers::Branch(b) = &unit.layers else { panic!() };
        set_weights(&mut store, &b[0], &[&[2.0], &[3.0]]);
        set_weights(&mut store, &b[1], &[&[-1.0], &[5.0]]);
        let pc = cloud(2);
        let g = knn_bruteforce(&pc, 1).unwrap();
        let x = Tensor::new(&[2, 1], vec![1.0, -2.0]).unwrap();
        assert_eq!(run(&unit, &store, &pc, &g, &x).0.data(), &[6.0, 0.0, 0.0, 10.0]);
    }

    #[test]
    fn duplicate_round_counts() {
        for (r, trace) in [(2, vec![3, 6]), (4, vec![3, 6, 12])] {
            let spec = ExpansionSpec::new(UnitKind::Duplicate, r, 4, 2);
            let mut store = ParamStore::new();
            let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
            let pc = cloud(3);
            let g = knn_bruteforce(&pc, 2).unwrap();
            let (y, t) = run(&unit, &store, &pc, &g, &features(3, 4, 1));
            assert_eq!(t, trace);
            assert_eq!(y.shape(), &[3 * r, 4]);
        }
    }

    #[test]
    fn single_mlp_stacked_identity_copies_parent() {
        let spec = ExpansionSpec::new(UnitKind::SingleMlp, 2, 2, 1);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let Layers::SingleMlp(m) = &unit.layers else { panic!() };
        // [I | I] as a 2 x 4 matrix
        set_weights(&mut store, m, &[&[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]]);
        let pc = cloud(3);
        let g = knn_bruteforce(&pc, 1).unwrap();
        let x = features(3, 2, 4);
        let (y, _) = run(&unit, &store, &pc, &g, &x);
        for i in 0..3 {
            assert_eq!(y.row(2 * i), x.row(i));
            assert_eq!(y.row(2 * i + 1), x.row(i));
        }
    }

    #[test]
    fn multilayer_with_identity_body_matches_single() {
        let pc = cloud(4);
        let g = knn_bruteforce(&pc, 1).unwrap();
        let mut store_s = ParamStore::new();
        let single = ExpansionUnit::new(ExpansionSpec::new(UnitKind::SingleMlp, 2, 2, 1), &mut store_s, "u", &mut rng()).unwrap();
        let mut store_m = ParamStore::new();
        let multi = ExpansionUnit::new(ExpansionSpec::new(UnitKind::MultilayerMlp, 2, 2, 1), &mut store_m, "u", &mut rng()).unwrap();
        let Layers::SingleMlp(se) = &single.layers else { panic!() };
        let Layers::MultilayerMlp { body, expand } = &multi.layers else { panic!() };
        let w = [0.3, -1.0, 2.0, 0.5, 1.5, 0.2, -0.7, 1.1];
        set_weights(&mut store_s, se, &[&w]);
        set_weights(&mut store_m, expand, &[&w]);
        let id: &[f64] = &[1.0, 0.0, 0.0, 1.0];
        set_weights(&mut store_m, body, &[id; 5]);
        let x = Tensor::from_rows(&[[0.1, 0.2], [1.0, 0.0], [0.0, 3.0], [0.4, 0.4]]).unwrap();
        assert_eq!(run(&single, &store_s, &pc, &g, &x).0, run(&multi, &store_m, &pc, &g, &x).0);
    }

    #[test]
    fn progressive_round_trace() {
        let spec = ExpansionSpec::new(UnitKind::ProgressiveMlp, 4, 3, 1);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let pc = cloud(5);
        let g = knn_bruteforce(&pc, 1).unwrap();
        assert_eq!(run(&unit, &store, &pc, &g, &features(5, 3, 2)).1, vec![5, 10, 20]);
    }

    #[test]
    fn nodeshuffle_hand_case() {
        // N = 3, K = 1, C = 1, r = 2, linear h(a, d) -> (a + d, 2a - d)
        // (weights [[1, 2], [1, -1]]; the ReLU inside the max is inactive on
        // these positive values). idx = [[1],[2],[0]], x = [1, 2, 4]:
        //   i=0: a=1, d=1  -> (2, 1)
        //   i=1: a=2, d=2  -> (4, 2)
        //   i=2: a=4, d=-3 -> (1, 11)
        let spec = ExpansionSpec::new(UnitKind::NodeShuffle, 2, 1, 1);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let Layers::NodeShuffle(e) = &unit.layers else { panic!() };
        set_weights(&mut store, e.mlp(), &[&[1.0, 2.0, 1.0, -1.0]]);
        let pc = cloud(3);
        let g = IndexMatrix::from_rows(&[vec![1], vec![2], vec![0]]).unwrap();
        let x = Tensor::new(&[3, 1], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(run(&unit, &store, &pc, &g, &x).0.data(), &[2.0, 1.0, 4.0, 2.0, 1.0, 11.0]);
    }

    #[test]
    fn proedgeshuffle_traces_and_graph() {
        for (r, trace) in [(2usize, vec![6, 12]), (16, vec![6, 12, 24, 48, 96])] {
            let spec = ExpansionSpec::new(UnitKind::ProEdgeShuffle, r, 2, 2);
            let mut store = ParamStore::new();
            let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
            let Layers::ProEdgeShuffle(rounds) = &unit.layers else { panic!() };
            assert_eq!(rounds.len(), r.trailing_zeros() as usize);
            let pc = cloud(6);
            let g = knn_bruteforce(&pc, 2).unwrap();
            assert_eq!(run(&unit, &store, &pc, &g, &features(6, 2, 3)).1, trace);
        }

        let spec = ExpansionSpec::new(UnitKind::ProEdgeShuffle, 2, 3, 2);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let pc = cloud(4);
        let g = knn_bruteforce(&pc, 2).unwrap();
        let ctx = ExpansionContext::new(&pc, &g).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(features(4, 3, 9));
        let e = unit.expand(&mut tape, &store, &ctx, x).unwrap();
        assert_eq!(e.graph.unwrap(), expand_index(&g));
    }

    #[test]
    fn regression_modes_shapes_and_graph_access() {
        let pc = cloud(6);
        let g = knn_bruteforce(&pc, 2).unwrap();
        for &kind in UnitKind::ALL {
            for &mode in RegressionMode::ALL {
                let mut spec = ExpansionSpec::new(kind, 4, 3, 2);
                spec.regression_mode = mode;
                let mut store = ParamStore::new();
                let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
                let ctx = ExpansionContext::new(&pc, &g).unwrap();
                let mut tape = Tape::new();
                let x = tape.constant(features(6, 3, 5));
                let y = unit.forward(&mut tape, &store, &ctx, x).unwrap();
                assert_eq!(tape.shape(y), &[24, 3], "{kind} {mode}");
                if mode == RegressionMode::Direct && !kind.uses_graph() {
                    assert_eq!(ctx.graph_reads(), 0, "{kind}");
                }
            }
        }
    }

    #[test]
    fn edgeconv_before_on_identical_features_gives_identical_points() {
        let spec = ExpansionSpec::new(UnitKind::ProEdgeShuffle, 4, 3, 2);
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let pc = cloud(5);
        let g = knn_bruteforce(&pc, 2).unwrap();
        let ctx = ExpansionContext::new(&pc, &g).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(features(5, 3, 1));
        let e = unit.expand(&mut tape, &store, &ctx, x).unwrap();
        let same = tape.constant(Tensor::from_rows(&vec![[0.2, 0.9, -0.4]; 20]).unwrap());
        let e = Expanded {
            features: same,
            graph: e.graph,
            row_trace: e.row_trace,
        };
        let y = unit.finalize(&mut tape, &store, &ctx, &e).unwrap();
        let out = tape.value(y);
        for r in 1..20 {
            assert_eq!(out.row(r), out.row(0));
        }
    }

    #[test]
    fn feature_knn_mode_runs() {
        let mut spec = ExpansionSpec::new(UnitKind::ProEdgeShuffle, 4, 3, 2);
        spec.index_mode = IndexMode::FeatureKnn;
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "u", &mut rng()).unwrap();
        let pc = cloud(6);
        let g = knn_bruteforce(&pc, 2).unwrap();
        let ctx = ExpansionContext::new(&pc, &g).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(features(6, 3, 5));
        let e = unit.expand(&mut tape, &store, &ctx, x).unwrap();
        let graph = e.graph.as_ref().unwrap();
        assert_eq!(graph.rows(), 24);
        assert_eq!(graph, &knn_features(tape.value(e.features), 2).unwrap());
    }
}
