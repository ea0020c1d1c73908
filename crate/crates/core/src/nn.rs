//! Per-point layers shared by every expansion unit.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{IndexMatrix, PointCloud};
use crate::tensor::{ParamId, ParamStore, Tape, Tensor, Var};

#[derive(Clone, Debug)]
struct Linear {
    weight: ParamId,
    bias: ParamId,
}

/// Stack of affine layers applied identically to every row.
///
/// ReLU follows every hidden layer; the output layer is linear unless
/// `final_activation` is set.
#[derive(Clone, Debug)]
pub struct SharedMLP {
    widths: Vec<usize>,
    layers: Vec<Linear>,
    final_activation: bool,
}

impl SharedMLP {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        widths: &[usize],
        final_activation: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::invalid(format!(
                "{prefix}: an MLP needs at least input and output widths, got {widths:?}"
            )));
        }
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                Ok(Linear {
                    weight: store.add_glorot(format!("{prefix}.{l}.weight"), w[0], w[1], rng)?,
                    bias: store.add_zeros(format!("{prefix}.{l}.bias"), &[w[1]])?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            widths: widths.to_vec(),
            layers,
            final_activation,
        })
    }

    pub fn in_width(&self) -> usize {
        self.widths[0]
    }

    pub fn out_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// `(weight, bias)` ids per layer, for tests and checkpoint tooling.
    pub fn layer_params(&self) -> Vec<(ParamId, ParamId)> {
        self.layers.iter().map(|l| (l.weight, l.bias)).collect()
    }

    fn activates(&self, layer: usize) -> bool {
        layer + 1 < self.layers.len() || self.final_activation
    }

    /// Applies the MLP to an `M x C_in` matrix.
    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        self.apply_from(tape, store, x, 0)
    }

    fn apply_from(&self, tape: &mut Tape, store: &ParamStore, mut x: Var, first: usize) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.widths[first] {
            return Err(Error::Shape {
                op: "shared_mlp",
                lhs: shape,
                rhs: vec![self.widths[first]],
            });
        }
        for l in first..self.layers.len() {
            let w = tape.param(store, self.layers[l].weight);
            let b = tape.param(store, self.layers[l].bias);
            x = tape.matmul(x, w)?;
            x = tape.add_bias(x, b)?;
            if self.activates(l) {
                x = tape.relu(x);
            }
        }
        Ok(x)
    }
}

/// `out[i] = max_k h(concat(x[i], x[idx[i][k]] - x[i]))` with `h` a [`SharedMLP`].
#[derive(Clone, Debug)]
pub struct EdgeConvLayer {
    mlp: SharedMLP,
    c_in: usize,
}

impl EdgeConvLayer {
    /// `hidden` lists the widths between the `2 * c_in` input and `c_out`.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        c_in: usize,
        hidden: &[usize],
        c_out: usize,
        final_activation: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = vec![2 * c_in];
        widths.extend_from_slice(hidden);
        widths.push(c_out);
        Ok(Self {
            mlp: SharedMLP::new(store, prefix, &widths, final_activation, rng)?,
            c_in,
        })
    }

    pub fn mlp(&self) -> &SharedMLP {
        &self.mlp
    }

    pub fn out_width(&self) -> usize {
        self.mlp.out_width()
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var, idx: &IndexMatrix) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 2 || shape[1] != self.c_in || idx.rows() != shape[0] {
            return Err(Error::Shape {
                op: "edgeconv",
                lhs: shape,
                rhs: vec![idx.rows(), idx.k(), self.c_in],
            });
        }
        let (m, k, c) = (shape[0], idx.k(), self.c_in);
        let first = &self.mlp.layers[0];
        let hidden = self.mlp.widths[1];

        // First layer split as W = [W_self; W_diff]:
        //   [x_i, x_j - x_i] W + b = x_i (W_self - W_diff) + b + x_j W_diff
        // so both matmuls run per point instead of per edge.
        let w = tape.param(store, first.weight);
        let b = tape.param(store, first.bias);
        let w_self = tape.select_rows(w, (0..c).collect(), &[c, hidden])?;
        let w_diff = tape.select_rows(w, (c..2 * c).collect(), &[c, hidden])?;
        let w_center = tape.sub(w_self, w_diff)?;
        let center = tape.matmul(x, w_center)?;
        let center = tape.add_bias(center, b)?;
        let neighbor = tape.matmul(x, w_diff)?;

        let edges_nb = tape.gather_rows(neighbor, idx)?;
        let repeat: Vec<usize> = (0..m).flat_map(|i| std::iter::repeat(i).take(k)).collect();
        let edges_center = tape.select_rows(center, repeat, &[m, k, hidden])?;
        let mut e = tape.add(edges_nb, edges_center)?;
        if self.mlp.activates(0) {
            e = tape.relu(e);
        }
        if self.mlp.layers.len() > 1 {
            let flat = tape.reshape(e, &[m * k, hidden])?;
            let out = self.mlp.apply_from(tape, store, flat, 1)?;
            e = tape.reshape(out, &[m, k, self.mlp.out_width()])?;
        }
        tape.max_over_k(e)
    }
}

/// Duplicates every row: rows `2i` and `2i+1` are `x[i]` with a trailing code
/// of `+1` and `-1` respectively.
pub fn duplicate_with_code(tape: &mut Tape, x: Var) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    if shape.len() != 2 {
        return Err(Error::invalid(format!(
            "duplicate_with_code expects N x C, got {shape:?}"
        )));
    }
    let n = shape[0];
    let rows: Vec<usize> = (0..n).flat_map(|i| [i, i]).collect();
    let doubled = tape.select_rows(x, rows, &[2 * n, shape[1]])?;
    let codes = (0..2 * n).map(|r| if r % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let codes = tape.constant(Tensor::new(&[2 * n, 1], codes)?);
    tape.concat_last(doubled, codes)
}

/// Maps `rN x C` features to `rN` points through a head with output width 3.
pub fn regress_coords(
    tape: &mut Tape,
    store: &ParamStore,
    head: &SharedMLP,
    x: Var,
) -> Result<(Var, PointCloud)> {
    if head.out_width() != 3 {
        return Err(Error::invalid(format!(
            "regression head must output 3 channels, got {}",
            head.out_width()
        )));
    }
    let y = head.apply(tape, store, x)?;
    let cloud = coords_to_cloud(tape.value(y))?;
    Ok((y, cloud))
}

pub(crate) fn coords_to_cloud(t: &Tensor) -> Result<PointCloud> {
    if let Some(i) = t.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!(
            "regressed coordinate in row {}",
            i / 3
        )));
    }
    PointCloud::from_flat(t.data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn set_identity(store: &mut ParamStore, mlp: &SharedMLP) {
        for (w, b) in mlp.layer_params() {
            let shape = store.tensor(w).shape().to_vec();
            let mut data = vec![0.0; shape[0] * shape[1]];
            for i in 0..shape[0].min(shape[1]) {
                data[i * shape[1] + i] = 1.0;
            }
            store.set(w, &data).unwrap();
            let nb = store.tensor(b).len();
            store.set(b, &vec![0.0; nb]).unwrap();
        }
    }

    #[test]
    fn identity_mlp_passes_through() {
        let mut store = ParamStore::new();
        let mlp = SharedMLP::new(&mut store, "m", &[3, 3], false, &mut rng()).unwrap();
        set_identity(&mut store, &mlp);
        let mut tape = Tape::new();
        let x = Tensor::from_rows(&[[1.0, -2.0, 3.0], [0.5, 0.0, -7.0]]).unwrap();
        let xv = tape.constant(x.clone());
        let y = mlp.apply(&mut tape, &store, xv).unwrap();
        assert_eq!(tape.value(y), &x);

        let bad = tape.constant(Tensor::zeros(&[2, 4]));
        assert!(mlp.apply(&mut tape, &store, bad).is_err());
    }

    #[test]
    fn mlp_matches_per_row_evaluation() {
        let mut store = ParamStore::new();
        let mlp = SharedMLP::new(&mut store, "m", &[2, 4, 3], false, &mut rng()).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<[f64; 2]> = (0..3).map(|_| [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&rows).unwrap());
        let y = mlp.apply(&mut tape, &store, x).unwrap();

        let [(w0, b0), (w1, b1)] = mlp.layer_params()[..] else { panic!() };
        let (w0, b0, w1, b1) = (store.tensor(w0), store.tensor(b0), store.tensor(w1), store.tensor(b1));
        for (i, row) in rows.iter().enumerate() {
            let mut h = [0.0; 4];
            for o in 0..4 {
                let mut s = b0.data()[o];
                for c in 0..2 {
                    s += row[c] * w0.data()[c * 4 + o];
                }
                h[o] = s.max(0.0);
            }
            for o in 0..3 {
                let mut s = b1.data()[o];
                for c in 0..4 {
                    s += h[c] * w1.data()[c * 3 + o];
                }
                assert!((tape.value(y).row(i)[o] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn edgeconv_hand_case() {
        // C = 1, linear h(a, d) = 2a + 3d + 0.5, K = 1, idx = [[1],[2],[0]]
        // x = [1, 4, -2]:
        //   i=0: a=1, d=4-1=3    -> 2 + 9 + 0.5 = 11.5
        //   i=1: a=4, d=-2-4=-6  -> 8 - 18 + 0.5 = -9.5
        //   i=2: a=-2, d=1+2=3   -> -4 + 9 + 0.5 = 5.5
        let mut store = ParamStore::new();
        let layer = EdgeConvLayer::new(&mut store, "e", 1, &[], 1, false, &mut rng()).unwrap();
        let (w, b) = layer.mlp().layer_params()[0];
        store.set(w, &[2.0, 3.0]).unwrap();
        store.set(b, &[0.5]).unwrap();
        let idx = IndexMatrix::from_rows(&[vec![1], vec![2], vec![0]]).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[3, 1], vec![1.0, 4.0, -2.0]).unwrap());
        let y = layer.apply(&mut tape, &store, x, &idx).unwrap();
        assert_eq!(tape.value(y).data(), &[11.5, -9.5, 5.5]);
    }

    #[test]
    fn edgeconv_identical_points_give_identical_rows() {
        let mut store = ParamStore::new();
        let layer = EdgeConvLayer::new(&mut store, "e", 2, &[5], 3, true, &mut rng()).unwrap();
        let idx = IndexMatrix::from_rows(&[vec![1, 2], vec![2, 0], vec![0, 1]]).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[0.3, -0.7]; 3]).unwrap());
        let y = layer.apply(&mut tape, &store, x, &idx).unwrap();
        let out = tape.value(y);
        assert_eq!(out.row(0), out.row(1));
        assert_eq!(out.row(1), out.row(2));
    }

    #[test]
    fn duplicate_codes() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[1, 1], vec![7.0]).unwrap());
        let y = duplicate_with_code(&mut tape, x).unwrap();
        assert_eq!(tape.value(y).data(), &[7.0, 1.0, 7.0, -1.0]);

        let x = tape.constant(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap());
        let y = duplicate_with_code(&mut tape, x).unwrap();
        let out = tape.value(y);
        assert_eq!(out.shape(), &[6, 3]);
        for r in 0..6 {
            assert_eq!(out.row(r)[2], if r % 2 == 0 { 1.0 } else { -1.0 });
            assert_eq!(&out.row(r)[..2], tape.value(x).row(r / 2));
        }
    }

    #[test]
    fn regression_identity_head() {
        let mut store = ParamStore::new();
        let head = SharedMLP::new(&mut store, "h", &[3, 3], false, &mut rng()).unwrap();
        set_identity(&mut store, &head);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[[1.0, 2.0, 3.0], [-1.0, 0.0, 0.5]]).unwrap());
        let (_, cloud) = regress_coords(&mut tape, &store, &head, x).unwrap();
        assert_eq!(cloud.points(), &[[1.0, 2.0, 3.0], [-1.0, 0.0, 0.5]]);

        let nan = tape.constant(Tensor::from_rows(&[[0.0; 3], [0.0, f64::NAN, 0.0]]).unwrap());
        let err = regress_coords(&mut tape, &store, &head, nan).unwrap_err();
        assert!(err.to_string().contains("row 1"), "{err}");
    }
}
