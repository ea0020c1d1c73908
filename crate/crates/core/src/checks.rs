//! Property suites run by `pointup gradcheck` / `pointup knncheck` and the
//! acceptance tests.
//!
//! Every case is derived from a suite seed and the case name, so a failure
//! can be replayed on its own from the printed command line.

use std::fmt;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{expand_index, knn_accelerated, knn_bruteforce, IndexMatrix, KdTree, PointCloud};
use crate::metrics::chamfer_loss;
use crate::nn::{duplicate_with_code, EdgeConvLayer, SharedMLP};
use crate::pipeline::{Backbone, BackboneKind, BackboneSpec};
use crate::tensor::{ParamStore, Tape, Tensor, Var};
use crate::units::{ExpansionContext, ExpansionSpec, ExpansionUnit, RegressionMode, UnitKind};

/// Central-difference step.
pub const GRAD_STEP: f64 = 1e-4;
/// Relative tolerance, `|a - n| / max(|a|, |n|, GRAD_FLOOR)`.
pub const GRAD_TOL: f64 = 1e-4;
/// Magnitude below which gradients are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-4;
/// Redraws allowed when a sample sits within one step of a ReLU/max kink.
const MAX_DRAWS: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub case: String,
    pub detail: String,
    /// Command line that reruns just this case.
    pub replay: String,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub cases: usize,
    /// Individual comparisons made (scalars for gradients, rows for graphs).
    pub checks: usize,
    pub failures: Vec<Failure>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.cases > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} cases, {} checks, {} failures, {:.2}s",
            self.suite,
            self.cases,
            self.checks,
            self.failures.len(),
            self.elapsed.as_secs_f64()
        )?;
        for fail in &self.failures {
            writeln!(f, "FAIL {}: {}", fail.case, fail.detail)?;
            writeln!(f, "  replay: {}", fail.replay)?;
        }
        Ok(())
    }
}

/// FNV-1a, used to give every named case its own stream.
fn name_hash(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn case_rng(seed: u64, name: &str, draw: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ name_hash(name) ^ draw.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).expect("valid shape")
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect())
        .expect("finite points")
}

// ---------------------------------------------------------------------------
// gradients

type Forward = Box<dyn Fn(&mut Tape, &ParamStore, &[Var]) -> Result<Var>>;

/// Differentiable function of some leaf tensors and a parameter store.
struct Problem {
    inputs: Vec<Tensor>,
    store: ParamStore,
    forward: Forward,
}

impl Problem {
    fn leaves(inputs: Vec<Tensor>, forward: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static) -> Self {
        Self {
            inputs,
            store: ParamStore::new(),
            forward: Box::new(move |t, _, v| forward(t, v)),
        }
    }

    /// `sum(f(x) * w)` and its branch pattern.
    fn loss(&self, inputs: &[Tensor], store: &ParamStore, w: &Tensor) -> Result<(f64, Vec<usize>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let y = (self.forward)(&mut tape, store, &vars)?;
        let wv = tape.constant(w.clone());
        let prod = tape.mul(y, wv)?;
        let l = tape.sum(prod);
        Ok((tape.value(l).data()[0], tape.branch_pattern()))
    }
}

/// Parameters start from Glorot weights and zero biases; give every bias a
/// small random value so no ReLU input sits exactly at zero.
fn jitter_params(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
    for id in ids {
        if store.get(id).name.ends_with(".bias") {
            let data: Vec<f64> = (0..store.tensor(id).len()).map(|_| rng.gen_range(-0.2..0.2)).collect();
            store.set(id, &data).expect("same length");
        }
    }
}

enum GradOutcome {
    Pass(usize),
    Kink,
    Mismatch(String),
}

fn check_problem(p: &Problem, rng: &mut ChaCha8Rng) -> Result<GradOutcome> {
    // output weights make every output element matter
    let shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = p.inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
        let y = (p.forward)(&mut tape, &p.store, &vars)?;
        tape.shape(y).to_vec()
    };
    let w = uniform(rng, &shape, 1.0);

    let mut tape = Tape::new();
    let vars: Vec<Var> = p.inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let y = (p.forward)(&mut tape, &p.store, &vars)?;
    let wv = tape.constant(w.clone());
    let prod = tape.mul(y, wv)?;
    let l = tape.sum(prod);
    let pattern = tape.branch_pattern();
    let grads = tape.backward(l);
    let param_grads = tape.param_grads(&grads, &p.store);

    let h = GRAD_STEP;
    let mut checked = 0;
    let compare = |what: String, a: f64, plus: (f64, Vec<usize>), minus: (f64, Vec<usize>)| {
        if plus.1 != pattern || minus.1 != pattern {
            return Some(GradOutcome::Kink);
        }
        let n = (plus.0 - minus.0) / (2.0 * h);
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR);
        (rel > GRAD_TOL || !rel.is_finite())
            .then(|| GradOutcome::Mismatch(format!("{what}: analytic {a:.10e}, numeric {n:.10e}, rel err {rel:.3e}")))
    };

    for (i, (t, v)) in p.inputs.iter().zip(&vars).enumerate() {
        let zeros = vec![0.0; t.len()];
        let analytic = grads.get(*v).unwrap_or(&zeros);
        for e in 0..t.len() {
            let mut xs = p.inputs.clone();
            xs[i].data_mut()[e] = t.data()[e] + h;
            let plus = p.loss(&xs, &p.store, &w)?;
            xs[i].data_mut()[e] = t.data()[e] - h;
            let minus = p.loss(&xs, &p.store, &w)?;
            if let Some(out) = compare(format!("input {i} element {e}"), analytic[e], plus, minus) {
                return Ok(out);
            }
            checked += 1;
        }
    }
    for (id, param) in p.store.iter() {
        let base = param.tensor.data();
        for e in 0..base.len() {
            let mut store = p.store.clone();
            let mut data = base.to_vec();
            data[e] = base[e] + h;
            store.set(id, &data)?;
            let plus = p.loss(&p.inputs, &store, &w)?;
            data[e] = base[e] - h;
            store.set(id, &data)?;
            let minus = p.loss(&p.inputs, &store, &w)?;
            if let Some(out) = compare(format!("parameter `{}` element {e}", param.name), param_grads[id.index()][e], plus, minus) {
                return Ok(out);
            }
            checked += 1;
        }
    }
    Ok(GradOutcome::Pass(checked))
}

type Builder = fn(&mut ChaCha8Rng) -> Result<Problem>;

fn unit_problem(kind: UnitKind, regression: Option<RegressionMode>, rng: &mut ChaCha8Rng) -> Result<Problem> {
    let (n, c, r, k) = (8, 4, 4, 3);
    let mut spec = ExpansionSpec::new(kind, r, c, k);
    if let Some(m) = regression {
        spec.regression_mode = m;
    }
    let mut store = ParamStore::new();
    let unit = ExpansionUnit::new(spec, &mut store, "unit", rng)?;
    jitter_params(&mut store, rng);
    let cloud = random_cloud(rng, n);
    let graph = knn_bruteforce(&cloud, k)?;
    Ok(Problem {
        inputs: vec![uniform(rng, &[n, c], 1.0)],
        store,
        forward: Box::new(move |tape, store, v| {
            let ctx = ExpansionContext::new(&cloud, &graph)?;
            unit.forward(tape, store, &ctx, v[0])
        }),
    })
}

fn backbone_problem(kind: BackboneKind, rng: &mut ChaCha8Rng) -> Result<Problem> {
    let n = 8;
    let mut store = ParamStore::new();
    let spec = BackboneSpec { kind, depth: 2, width: 4 };
    let backbone = Backbone::new(&spec, &mut store, rng)?;
    jitter_params(&mut store, rng);
    let cloud = random_cloud(rng, n);
    let graph = knn_bruteforce(&cloud, 3)?;
    Ok(Problem {
        inputs: vec![Tensor::new(&[n, 3], cloud.flat())?],
        store,
        forward: Box::new(move |tape, store, v| {
            let ctx = ExpansionContext::new(&cloud, &graph)?;
            backbone.apply(tape, store, &ctx, v[0])
        }),
    })
}

fn gradient_cases() -> Vec<(&'static str, Builder)> {
    vec![
        ("op.matmul", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0), uniform(r, &[4, 2], 1.0)], |t, v| t.matmul(v[0], v[1])))),
        ("op.add", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0), uniform(r, &[3, 4], 1.0)], |t, v| t.add(v[0], v[1])))),
        ("op.sub", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0), uniform(r, &[3, 4], 1.0)], |t, v| t.sub(v[0], v[1])))),
        ("op.mul", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0), uniform(r, &[3, 4], 1.0)], |t, v| t.mul(v[0], v[1])))),
        ("op.add_bias", |r| Ok(Problem::leaves(vec![uniform(r, &[2, 3, 4], 1.0), uniform(r, &[4], 1.0)], |t, v| t.add_bias(v[0], v[1])))),
        ("op.scale", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0)], |t, v| Ok(t.scale(v[0], -1.7))))),
        ("op.relu", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0)], |t, v| Ok(t.relu(v[0]))))),
        ("op.concat_last", |r| Ok(Problem::leaves(vec![uniform(r, &[2, 3, 2], 1.0), uniform(r, &[2, 3, 1], 1.0)], |t, v| t.concat_last(v[0], v[1])))),
        ("op.select_rows", |r| Ok(Problem::leaves(vec![uniform(r, &[4, 3], 1.0)], |t, v| t.select_rows(v[0], vec![2, 0, 2, 3, 1, 2], &[3, 2, 3])))),
        ("op.gather_rows", |r| {
            let idx = knn_bruteforce(&random_cloud(r, 8), 3)?;
            Ok(Problem::leaves(vec![uniform(r, &[8, 3], 1.0)], move |t, v| t.gather_rows(v[0], &idx)))
        }),
        ("op.max_over_k", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4, 2], 1.0)], |t, v| t.max_over_k(v[0])))),
        ("op.reshape", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0)], |t, v| t.reshape(v[0], &[2, 6])))),
        ("op.shuffle_expand", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 8], 1.0)], |t, v| t.shuffle_expand(v[0], 4)))),
        ("op.shuffle_fold", |r| Ok(Problem::leaves(vec![uniform(r, &[8, 2], 1.0)], |t, v| t.shuffle_fold(v[0], 4)))),
        ("op.sum", |r| Ok(Problem::leaves(vec![uniform(r, &[3, 4], 1.0)], |t, v| Ok(t.sum(v[0]))))),
        ("op.chamfer_loss", |r| {
            let gt = random_cloud(r, 8);
            let tree = KdTree::new(gt.points());
            Ok(Problem::leaves(vec![uniform(r, &[6, 3], 1.0)], move |t, v| chamfer_loss(t, v[0], &gt, &tree)))
        }),
        ("nn.duplicate_with_code", |r| Ok(Problem::leaves(vec![uniform(r, &[4, 3], 1.0)], |t, v| duplicate_with_code(t, v[0])))),
        ("nn.shared_mlp", |r| {
            let mut store = ParamStore::new();
            let mlp = SharedMLP::new(&mut store, "mlp", &[4, 4, 3], false, r)?;
            jitter_params(&mut store, r);
            Ok(Problem {
                inputs: vec![uniform(r, &[8, 4], 1.0)],
                store,
                forward: Box::new(move |t, s, v| mlp.apply(t, s, v[0])),
            })
        }),
        ("nn.edgeconv", |r| {
            let mut store = ParamStore::new();
            let edge = EdgeConvLayer::new(&mut store, "edge", 4, &[4], 3, true, r)?;
            jitter_params(&mut store, r);
            let idx = knn_bruteforce(&random_cloud(r, 8), 3)?;
            Ok(Problem {
                inputs: vec![uniform(r, &[8, 4], 1.0)],
                store,
                forward: Box::new(move |t, s, v| edge.apply(t, s, v[0], &idx)),
            })
        }),
        ("backbone.mlp_stack", |r| backbone_problem(BackboneKind::MlpStack, r)),
        ("backbone.edgeconv_stack", |r| backbone_problem(BackboneKind::EdgeConvStack, r)),
        ("unit.branch", |r| unit_problem(UnitKind::Branch, None, r)),
        ("unit.duplicate", |r| unit_problem(UnitKind::Duplicate, None, r)),
        ("unit.single_mlp", |r| unit_problem(UnitKind::SingleMlp, None, r)),
        ("unit.multilayer_mlp", |r| unit_problem(UnitKind::MultilayerMlp, None, r)),
        ("unit.progressive_mlp", |r| unit_problem(UnitKind::ProgressiveMlp, None, r)),
        ("unit.nodeshuffle", |r| unit_problem(UnitKind::NodeShuffle, None, r)),
        ("unit.proedgeshuffle", |r| unit_problem(UnitKind::ProEdgeShuffle, None, r)),
        ("unit.proedgeshuffle+direct", |r| unit_problem(UnitKind::ProEdgeShuffle, Some(RegressionMode::Direct), r)),
        ("unit.proedgeshuffle+edgeconv_after", |r| unit_problem(UnitKind::ProEdgeShuffle, Some(RegressionMode::EdgeConvAfter), r)),
        ("unit.branch+edgeconv_before", |r| unit_problem(UnitKind::Branch, Some(RegressionMode::EdgeConvBefore), r)),
    ]
}

pub fn gradient_case_names() -> Vec<&'static str> {
    gradient_cases().into_iter().map(|(n, _)| n).collect()
}

/// Analytic vs central-difference gradients for every tape operation, the
/// network layers, both backbones and all expansion units, with respect to
/// every input element and every parameter. `only` restricts to one case.
pub fn run_gradient_suite(seed: u64, only: Option<&str>) -> Result<SuiteReport> {
    let start = Instant::now();
    let cases: Vec<_> = gradient_cases()
        .into_iter()
        .filter(|(name, _)| only.map_or(true, |o| o == *name))
        .collect();
    if cases.is_empty() {
        return Err(Error::invalid(format!(
            "unknown gradient case `{}`; known: {}",
            only.unwrap_or(""),
            gradient_case_names().join(", ")
        )));
    }
    let mut report = SuiteReport {
        suite: "gradcheck",
        cases: cases.len(),
        checks: 0,
        failures: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for (name, build) in cases {
        let replay = format!("pointup gradcheck --seed {seed} --case {name}");
        let mut result = None;
        for draw in 0..MAX_DRAWS {
            let mut rng = case_rng(seed, name, draw);
            let problem = build(&mut rng)?;
            match check_problem(&problem, &mut rng)? {
                GradOutcome::Kink => continue,
                GradOutcome::Pass(n) => {
                    report.checks += n;
                    result = Some(None);
                }
                GradOutcome::Mismatch(detail) => result = Some(Some(format!("draw {draw}: {detail}"))),
            }
            break;
        }
        let detail = match result {
            Some(None) => continue,
            Some(Some(d)) => d,
            None => format!("every one of {MAX_DRAWS} draws lies within one step of a kink"),
        };
        report.failures.push(Failure {
            case: name.to_string(),
            detail,
            replay,
        });
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

// ---------------------------------------------------------------------------
// graphs

pub const KNN_KS: [usize; 3] = [4, 8, 16];

/// The cloud used by KNN case `case`: uniform, planar, or on a coarse
/// integer lattice (many exact ties and duplicates).
pub fn knn_case_cloud(seed: u64, case: usize) -> PointCloud {
    let mut rng = case_rng(seed, "knn", case as u64);
    let n = rng.gen_range(17..=512);
    let pts = (0..n)
        .map(|_| match case % 4 {
            3 => [rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64, rng.gen_range(0..4) as f64],
            2 => [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0],
            _ => [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        })
        .collect();
    PointCloud::new(pts).expect("finite points")
}

/// Accelerated KNN against the exhaustive oracle, exact equality including
/// tie order. `only` restricts to one case index.
pub fn run_knn_suite(seed: u64, clouds: usize, only: Option<usize>) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut report = SuiteReport {
        suite: "knncheck",
        cases: 0,
        checks: 0,
        failures: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for case in (0..clouds).filter(|c| only.map_or(true, |o| o == *c)) {
        let cloud = knn_case_cloud(seed, case);
        let k = KNN_KS[case % KNN_KS.len()];
        let fast = knn_accelerated(&cloud, k)?;
        let slow = knn_bruteforce(&cloud, k)?;
        report.cases += 1;
        report.checks += cloud.len();
        if let Some(row) = (0..cloud.len()).find(|&i| fast.row(i) != slow.row(i)) {
            report.failures.push(Failure {
                case: format!("knn#{case}"),
                detail: format!(
                    "n = {}, k = {k}, row {row}: accelerated {:?}, brute force {:?}",
                    cloud.len(),
                    fast.row(row),
                    slow.row(row)
                ),
                replay: format!("pointup knncheck --seed {seed} --case {case}"),
            });
        }
    }
    report.elapsed = start.elapsed();
    Ok(report)
}

/// A random valid graph: `n` rows, `k` distinct non-self neighbors each.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, k: usize) -> IndexMatrix {
    let entries = (0..n)
        .flat_map(|i| {
            index::sample(rng, n - 1, k)
                .into_iter()
                .map(move |j| if j >= i { j + 1 } else { j })
                .collect::<Vec<_>>()
        })
        .collect();
    IndexMatrix::new(n, k, entries).expect("valid by construction")
}

/// Violated index-expansion laws for one parent graph, if any.
pub fn expand_index_violation(parent: &IndexMatrix) -> Option<String> {
    let child = expand_index(parent);
    let (n, k) = (parent.rows(), parent.k());
    if child.rows() != 2 * n || child.k() != k {
        return Some(format!("shape {}x{}, expected {}x{k}", child.rows(), child.k(), 2 * n));
    }
    if let Some(&e) = child.entries().iter().find(|&&e| e % 2 != 0) {
        return Some(format!("odd entry {e}"));
    }
    if let Some(&e) = child.entries().iter().find(|&&e| e >= 2 * n) {
        return Some(format!("entry {e} out of range for {} rows", 2 * n));
    }
    for i in 0..n {
        let mapped: Vec<usize> = parent.row(i).iter().map(|&j| 2 * j).collect();
        if child.row(2 * i) != mapped.as_slice() || child.row(2 * i + 1) != mapped.as_slice() {
            return Some(format!(
                "children of row {i} are {:?} / {:?}, expected {mapped:?}",
                child.row(2 * i),
                child.row(2 * i + 1)
            ));
        }
    }
    None
}

/// Index-expansion laws on random graphs.
pub fn run_expand_suite(seed: u64, graphs: usize) -> SuiteReport {
    let start = Instant::now();
    let mut report = SuiteReport {
        suite: "expand_index",
        cases: 0,
        checks: 0,
        failures: Vec::new(),
        elapsed: Duration::ZERO,
    };
    for case in 0..graphs {
        let mut rng = case_rng(seed, "expand", case as u64);
        let n = rng.gen_range(2..=64);
        let k = rng.gen_range(1..n.min(17));
        let g = random_graph(&mut rng, n, k);
        report.cases += 1;
        report.checks += 2 * n;
        if let Some(detail) = expand_index_violation(&g) {
            report.failures.push(Failure {
                case: format!("expand#{case}"),
                detail: format!("n = {n}, k = {k}: {detail}"),
                replay: format!("pointup knncheck --seed {seed}"),
            });
        }
    }
    report.elapsed = start.elapsed();
    report
}

// ---------------------------------------------------------------------------
// unit structure

/// A randomly initialized unit with an input cloud, its graph and features.
struct UnitProbe {
    store: ParamStore,
    unit: ExpansionUnit,
    cloud: PointCloud,
    graph: IndexMatrix,
    features: Tensor,
}

impl UnitProbe {
    fn new(kind: UnitKind, regression: Option<RegressionMode>, n: usize, k: usize, seed: u64) -> Result<Self> {
        let mut rng = case_rng(seed, kind.as_str(), 0);
        let mut spec = ExpansionSpec::new(kind, 4, 8, k);
        if let Some(m) = regression {
            spec.regression_mode = m;
        }
        let mut store = ParamStore::new();
        let unit = ExpansionUnit::new(spec, &mut store, "unit", &mut rng)?;
        jitter_params(&mut store, &mut rng);
        let cloud = random_cloud(&mut rng, n);
        let graph = knn_bruteforce(&cloud, k)?;
        let features = uniform(&mut rng, &[n, 8], 1.0);
        Ok(Self { store, unit, cloud, graph, features })
    }

    fn run(&self, cloud: &PointCloud, graph: &IndexMatrix, features: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let ctx = ExpansionContext::new(cloud, graph)?;
        let x = tape.constant(features.clone());
        let y = self.unit.forward(&mut tape, &self.store, &ctx, x)?;
        Ok(tape.value(y).clone())
    }
}

fn block(t: &Tensor, r: usize, i: usize) -> &[f64] {
    let w = t.width();
    &t.data()[r * i * w..r * (i + 1) * w]
}

/// Largest deviation from block-level permutation equivariance: the `r`
/// output rows of point `i` must reappear, unchanged, as the block of its new
/// position after permuting cloud, graph and features together.
pub fn equivariance_gap(kind: UnitKind, regression: Option<RegressionMode>, seed: u64) -> Result<f64> {
    use rand::seq::SliceRandom;
    let probe = UnitProbe::new(kind, regression, 16, 4, seed)?;
    let n = probe.cloud.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut case_rng(seed, "perm", 0));

    let mut pts = vec![[0.0; 3]; n];
    let w = probe.features.width();
    let mut feats = vec![0.0; n * w];
    for i in 0..n {
        pts[perm[i]] = probe.cloud.points()[i];
        feats[perm[i] * w..(perm[i] + 1) * w].copy_from_slice(probe.features.row(i));
    }
    let cloud = PointCloud::new(pts)?;
    let graph = probe.graph.permuted(&perm)?;
    let features = Tensor::new(&[n, w], feats)?;

    let y = probe.run(&probe.cloud, &probe.graph, &probe.features)?;
    let yp = probe.run(&cloud, &graph, &features)?;
    let r = probe.unit.spec().ratio;
    let mut gap = 0.0f64;
    for i in 0..n {
        for (a, b) in block(&y, r, i).iter().zip(block(&yp, r, perm[i])) {
            gap = gap.max((a - b).abs());
        }
    }
    Ok(gap)
}

/// Effect of nudging one point's feature on everybody else's children.
#[derive(Clone, Debug, PartialEq)]
pub struct IsolationProbe {
    pub perturbed: usize,
    /// Points other than `perturbed` whose output block changed at all.
    pub changed: Vec<usize>,
    /// Points that list `perturbed` among their neighbors.
    pub neighbors: Vec<usize>,
}

impl IsolationProbe {
    pub fn neighbors_changed(&self) -> usize {
        self.neighbors.iter().filter(|q| self.changed.contains(q)).count()
    }
}

/// Adds `delta` to every channel of one point's feature (a point that is
/// some other point's neighbor) with `N = 16`, `K = 4`, and compares outputs bitwise.
pub fn isolation_probe(kind: UnitKind, delta: f64, seed: u64) -> Result<IsolationProbe> {
    let probe = UnitProbe::new(kind, None, 16, 4, seed)?;
    let p = probe.graph.row(0)[0];
    let mut features = probe.features.clone();
    let w = features.width();
    for v in &mut features.data_mut()[p * w..(p + 1) * w] {
        *v += delta;
    }
    let y = probe.run(&probe.cloud, &probe.graph, &probe.features)?;
    let yp = probe.run(&probe.cloud, &probe.graph, &features)?;
    let r = probe.unit.spec().ratio;
    let n = probe.cloud.len();
    Ok(IsolationProbe {
        perturbed: p,
        changed: (0..n).filter(|&i| i != p && block(&y, r, i) != block(&yp, r, i)).collect(),
        neighbors: (0..n).filter(|&q| probe.graph.row(q).contains(&p)).collect(),
    })
}
