use std::collections::HashMap;

use super::{shuffle_shape, unshuffle_shape, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::geometry::IndexMatrix;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Concat(Var, Var),
    SelectRows { src: Var, rows: Vec<usize> },
    MaxK { src: Var, argmax: Vec<usize> },
    Reshape(Var),
    Sum(Var),
    /// Scalar whose local gradient w.r.t. `src` was computed in the forward pass.
    Scalar { src: Var, grad: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records one forward pass; `backward` replays it in reverse.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn accumulate(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
    slot.get_or_insert_with(|| vec![0.0; len])
}

/// `a (m x k) * b (k x p)`, i-k-j loop order.
fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        let orow = &mut out[i * p..(i + 1) * p];
        for (t, &aik) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b[t * p..(t + 1) * p];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Records a parameter once per tape; repeated calls return the same var
    /// so gradients from every use accumulate in one place.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.tensor(id).clone(), Op::Param, true);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || tb.rank() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::Shape {
                op: "matmul",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (m, k, p) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let out = matmul_raw(ta.data(), tb.data(), m, k, p);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[m, p], out)?, Op::MatMul(a, b), rg))
    }

    fn zip_with(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape(op_name, ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a length-`P` bias to every row of an `[..., P]` tensor.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tb.rank() != 1 || tx.width() != tb.len() {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: tx.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let w = tb.len();
        let mut data = tx.data().to_vec();
        if w > 0 {
            for row in data.chunks_mut(w) {
                for (o, &b) in row.iter_mut().zip(tb.data()) {
                    *o += b;
                }
            }
        }
        let value = Tensor::new(tx.shape(), data)?;
        let rg = self.rg(x) || self.rg(bias);
        Ok(self.push(value, Op::AddBias(x, bias), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|v| v * s).collect();
        let value = Tensor::new(tx.shape(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Scale(x, s), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let tx = self.value(x);
        let data = tx.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = Tensor::new(tx.shape(), data).expect("same shape");
        let rg = self.rg(x);
        self.push(value, Op::Relu(x), rg)
    }

    /// Concatenates along the last axis; all leading dimensions must agree.
    pub fn concat_last(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::Shape {
                op: "concat_last",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (wa, wb) = (ta.width(), tb.width());
        let rows = ta.rows();
        let mut data = Vec::with_capacity(ta.len() + tb.len());
        for r in 0..rows {
            data.extend_from_slice(&ta.data()[r * wa..(r + 1) * wa]);
            data.extend_from_slice(&tb.data()[r * wb..(r + 1) * wb]);
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = wa + wb;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&shape, data)?, Op::Concat(a, b), rg))
    }

    /// Picks rows (width = last axis) of `x` in the given order and lays them
    /// out with `out_shape`, whose last axis must equal the row width.
    /// The backward pass scatter-adds, so repeated rows accumulate.
    pub fn select_rows(&mut self, x: Var, rows: Vec<usize>, out_shape: &[usize]) -> Result<Var> {
        let tx = self.value(x);
        let (n, w) = (tx.rows(), tx.width());
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        if out_shape.last() != Some(&w) || out_shape.iter().product::<usize>() != rows.len() * w
        {
            return Err(Error::Shape {
                op: "select_rows",
                lhs: tx.shape().to_vec(),
                rhs: out_shape.to_vec(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * w);
        for &r in &rows {
            data.extend_from_slice(&tx.data()[r * w..(r + 1) * w]);
        }
        let value = Tensor::new(out_shape, data)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::SelectRows { src: x, rows }, rg))
    }

    /// `out[m][k] = x[idx[m][k]]`, shape `M x K x C`.
    pub fn gather_rows(&mut self, x: Var, idx: &IndexMatrix) -> Result<Var> {
        let c = self.value(x).width();
        self.select_rows(x, idx.entries().to_vec(), &[idx.rows(), idx.k(), c])
    }

    /// Maximum over the middle axis of an `N x K x C` tensor. Ties route the
    /// gradient to the first maximal entry.
    pub fn max_over_k(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        if tx.rank() != 3 || tx.shape()[1] == 0 {
            return Err(Error::invalid(format!(
                "max_over_k expects N x K x C with K >= 1, got {:?}",
                tx.shape()
            )));
        }
        let (n, k, c) = (tx.shape()[0], tx.shape()[1], tx.shape()[2]);
        let d = tx.data();
        let mut out = Vec::with_capacity(n * c);
        let mut argmax = Vec::with_capacity(n * c);
        for i in 0..n {
            let base = i * k * c;
            for ch in 0..c {
                let mut best = base + ch;
                for j in 1..k {
                    let at = base + j * c + ch;
                    if d[at] > d[best] {
                        best = at;
                    }
                }
                out.push(d[best]);
                argmax.push(best);
            }
        }
        let value = Tensor::new(&[n, c], out)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::MaxK { src: x, argmax }, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// `N x (r*C) -> (r*N) x C`; row `r*i + s` holds channels `[s*C, (s+1)*C)` of row `i`.
    pub fn shuffle_expand(&mut self, x: Var, ratio: usize) -> Result<Var> {
        let shape = shuffle_shape(self.shape(x), ratio)?;
        self.reshape(x, &shape)
    }

    /// Inverse of [`Tape::shuffle_expand`].
    pub fn shuffle_fold(&mut self, x: Var, ratio: usize) -> Result<Var> {
        let shape = unshuffle_shape(self.shape(x), ratio)?;
        self.reshape(x, &shape)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    /// Records a scalar function of `x` whose gradient w.r.t. `x` is supplied
    /// by the caller (used by losses computed outside the tape).
    pub fn scalar_fn(&mut self, x: Var, value: f64, grad: Vec<f64>) -> Result<Var> {
        let tx = self.value(x);
        if grad.len() != tx.len() {
            return Err(Error::Shape {
                op: "scalar_fn",
                lhs: tx.shape().to_vec(),
                rhs: vec![grad.len()],
            });
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(value), Op::Scalar { src: x, grad }, rg))
    }

    /// Reverse pass seeded with ones at `output` (for a scalar loss this is
    /// `d loss / d loss = 1`; otherwise it differentiates the sum of outputs).
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0; self.nodes[output.0].value.len()]);

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k, p) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if wants(*a) {
                    // dA = dC * B^T
                    let ga = accumulate(&mut grads[a.0], m * k);
                    let bd = tb.data();
                    for i in 0..m {
                        let grow = &g[i * p..(i + 1) * p];
                        for t in 0..k {
                            let brow = &bd[t * p..(t + 1) * p];
                            let mut s = 0.0;
                            for j in 0..p {
                                s += grow[j] * brow[j];
                            }
                            ga[i * k + t] += s;
                        }
                    }
                }
                if wants(*b) {
                    // dB = A^T * dC
                    let gb = accumulate(&mut grads[b.0], k * p);
                    let ad = ta.data();
                    for i in 0..m {
                        let grow = &g[i * p..(i + 1) * p];
                        for t in 0..k {
                            let a_it = ad[i * k + t];
                            if a_it == 0.0 {
                                continue;
                            }
                            let brow = &mut gb[t * p..(t + 1) * p];
                            for j in 0..p {
                                brow[j] += a_it * grow[j];
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if wants(*a) {
                    let ga = accumulate(&mut grads[a.0], g.len());
                    ga.iter_mut().zip(g).for_each(|(o, &x)| *o += x);
                }
                if wants(*b) {
                    let gb = accumulate(&mut grads[b.0], g.len());
                    gb.iter_mut().zip(g).for_each(|(o, &x)| *o += sign * x);
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    let other = val(*b).data();
                    let ga = accumulate(&mut grads[a.0], g.len());
                    for j in 0..g.len() {
                        ga[j] += g[j] * other[j];
                    }
                }
                if wants(*b) {
                    let other = val(*a).data();
                    let gb = accumulate(&mut grads[b.0], g.len());
                    for j in 0..g.len() {
                        gb[j] += g[j] * other[j];
                    }
                }
            }
            Op::AddBias(x, b) => {
                if wants(*x) {
                    let gx = accumulate(&mut grads[x.0], g.len());
                    gx.iter_mut().zip(g).for_each(|(o, &v)| *o += v);
                }
                if wants(*b) {
                    let w = val(*b).len();
                    let gb = accumulate(&mut grads[b.0], w);
                    if w > 0 {
                        for row in g.chunks(w) {
                            gb.iter_mut().zip(row).for_each(|(o, &v)| *o += v);
                        }
                    }
                }
            }
            Op::Scale(x, s) => {
                if wants(*x) {
                    let gx = accumulate(&mut grads[x.0], g.len());
                    gx.iter_mut().zip(g).for_each(|(o, &v)| *o += s * v);
                }
            }
            Op::Relu(x) => {
                if wants(*x) {
                    let xd = val(*x).data();
                    let gx = accumulate(&mut grads[x.0], g.len());
                    for j in 0..g.len() {
                        if xd[j] > 0.0 {
                            gx[j] += g[j];
                        }
                    }
                }
            }
            Op::Concat(a, b) => {
                let (wa, wb) = (val(*a).width(), val(*b).width());
                let rows = val(*a).rows();
                let w = wa + wb;
                if wants(*a) {
                    let ga = accumulate(&mut grads[a.0], rows * wa);
                    for r in 0..rows {
                        for c in 0..wa {
                            ga[r * wa + c] += g[r * w + c];
                        }
                    }
                }
                if wants(*b) {
                    let gb = accumulate(&mut grads[b.0], rows * wb);
                    for r in 0..rows {
                        for c in 0..wb {
                            gb[r * wb + c] += g[r * w + wa + c];
                        }
                    }
                }
            }
            Op::SelectRows { src, rows } => {
                if wants(*src) {
                    let t = val(*src);
                    let w = t.width();
                    let gs = accumulate(&mut grads[src.0], t.len());
                    for (o, &r) in rows.iter().enumerate() {
                        for c in 0..w {
                            gs[r * w + c] += g[o * w + c];
                        }
                    }
                }
            }
            Op::MaxK { src, argmax } => {
                if wants(*src) {
                    let gs = accumulate(&mut grads[src.0], val(*src).len());
                    for (o, &at) in argmax.iter().enumerate() {
                        gs[at] += g[o];
                    }
                }
            }
            Op::Reshape(x) => {
                if wants(*x) {
                    let gx = accumulate(&mut grads[x.0], g.len());
                    gx.iter_mut().zip(g).for_each(|(o, &v)| *o += v);
                }
            }
            Op::Sum(x) => {
                if wants(*x) {
                    let n = val(*x).len();
                    let gx = accumulate(&mut grads[x.0], n);
                    gx.iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::Scalar { src, grad } => {
                if wants(*src) {
                    let gs = accumulate(&mut grads[src.0], grad.len());
                    gs.iter_mut().zip(grad).for_each(|(o, &v)| *o += g[0] * v);
                }
            }
        }
    }

    /// Every discrete choice made in the forward pass: the sign of each ReLU
    /// input and each max-over-K winner. Two evaluations with equal patterns
    /// lie on the same smooth piece, which finite-difference checks rely on.
    pub fn branch_pattern(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) => out.extend(self.value(*x).data().iter().map(|&v| (v > 0.0) as usize)),
                Op::MaxK { argmax, .. } => out.extend_from_slice(argmax),
                _ => {}
            }
        }
        out
    }

    /// Collects parameter gradients into per-parameter buffers matching `store`.
    /// Parameters not used on this tape get zeros.
    pub fn param_grads(&self, grads: &Gradients, store: &ParamStore) -> Vec<Vec<f64>> {
        let mut out = store.zero_grads();
        self.add_param_grads(grads, &mut out);
        out
    }

    /// Adds this tape's parameter gradients into `out`.
    pub fn add_param_grads(&self, grads: &Gradients, out: &mut [Vec<f64>]) {
        for (id, var) in &self.params {
            if let Some(g) = grads.get(*var) {
                out[id.index()]
                    .iter_mut()
                    .zip(g)
                    .for_each(|(o, &v)| *o += v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let mut tape = Tape::new();
        let i = tape.constant(mat(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let b = tape.constant(mat(&[&[5.0, 6.0], &[7.0, 8.0]]));
        let out = tape.matmul(i, b).unwrap();
        assert_eq!(tape.value(out), &mat(&[&[5.0, 6.0], &[7.0, 8.0]]));

        let a = tape.constant(mat(&[&[1.0, 2.0]]));
        let c = tape.constant(mat(&[&[3.0], &[4.0]]));
        let out = tape.matmul(a, c).unwrap();
        assert_eq!(tape.value(out).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3] vs [2, 3]"), "{err}");
    }

    #[test]
    fn relu_forward() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[3], vec![-1.0, 0.0, 2.0]).unwrap());
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0, 2.0]);
        let x = tape.constant(Tensor::new(&[2], vec![-3.0, -0.5]).unwrap());
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 0.0]);
    }

    #[test]
    fn concat_cases() {
        let mut tape = Tape::new();
        let a = tape.leaf(mat(&[&[1.0], &[2.0]]), true);
        let b = tape.leaf(mat(&[&[3.0], &[4.0]]), true);
        let c = tape.concat_last(a, b).unwrap();
        assert_eq!(tape.value(c), &mat(&[&[1.0, 3.0], &[2.0, 4.0]]));

        let s = tape.sum(c);
        let g = tape.backward(s);
        assert_eq!(g.get(a).unwrap(), &[1.0, 1.0]);
        assert_eq!(g.get(b).unwrap(), &[1.0, 1.0]);

        let empty = tape.constant(Tensor::zeros(&[2, 0]));
        let same = tape.concat_last(a, empty).unwrap();
        assert_eq!(tape.value(same), tape.value(a));

        let bad = tape.constant(Tensor::zeros(&[3, 1]));
        assert!(tape.concat_last(a, bad).is_err());
    }

    #[test]
    fn gather_cases() {
        let mut tape = Tape::new();
        let x = tape.leaf(mat(&[&[1.0, 1.0], &[2.0, 2.0], &[3.0, 3.0]]), true);
        let idx = IndexMatrix::new_unchecked(3, 1, vec![2, 0, 1]);
        let y = tape.gather_rows(x, &idx).unwrap();
        assert_eq!(tape.shape(y), &[3, 1, 2]);
        assert_eq!(tape.value(y).data(), &[3.0, 3.0, 1.0, 1.0, 2.0, 2.0]);

        let zeros = tape.select_rows(x, vec![0, 0, 0], &[3, 1, 2]).unwrap();
        assert_eq!(tape.value(zeros).data(), &[1.0; 6]);

        let err = tape.select_rows(x, vec![0, 7], &[2, 2]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { index: 7, len: 3 }));
    }

    #[test]
    fn gather_backward_counts_references() {
        // Rows referenced: 0 three times, 1 once, 2 never.
        let mut tape = Tape::new();
        let x = tape.leaf(mat(&[&[1.0], &[2.0], &[3.0]]), true);
        let y = tape.select_rows(x, vec![0, 1, 0, 0], &[2, 2, 1]).unwrap();
        let s = tape.sum(y);
        let g = tape.backward(s);
        assert_eq!(g.get(x).unwrap(), &[3.0, 1.0, 0.0]);
    }

    #[test]
    fn max_over_k_cases() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(&[1, 2, 2], vec![1.0, 5.0, 3.0, 2.0]).unwrap(), true);
        let y = tape.max_over_k(x).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 5.0]);

        let single = tape.constant(Tensor::new(&[2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y1 = tape.max_over_k(single).unwrap();
        assert_eq!(tape.value(y1).data(), &[1.0, 2.0, 3.0, 4.0]);

        let tie = tape.leaf(Tensor::new(&[1, 2, 1], vec![2.0, 2.0]).unwrap(), true);
        let yt = tape.max_over_k(tie).unwrap();
        let s = tape.sum(yt);
        let g = tape.backward(s);
        assert_eq!(g.get(tie).unwrap(), &[1.0, 0.0]);

        let empty = tape.constant(Tensor::zeros(&[2, 0, 3]));
        assert!(tape.max_over_k(empty).is_err());
    }

    #[test]
    fn shuffle_layout_and_inverse() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let y = tape.shuffle_expand(x, 2).unwrap();
        assert_eq!(tape.value(y), &mat(&[&[1.0, 2.0], &[3.0, 4.0]]));
        let same = tape.shuffle_expand(x, 1).unwrap();
        assert_eq!(tape.value(same), tape.value(x));
        let back = tape.shuffle_fold(y, 2).unwrap();
        assert_eq!(tape.value(back), tape.value(x));
        let odd = tape.constant(Tensor::zeros(&[2, 3]));
        assert!(tape.shuffle_expand(odd, 2).is_err());
    }

    #[test]
    fn params_are_recorded_once() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::scalar(3.0)).unwrap();
        let mut tape = Tape::new();
        let a = tape.param(&store, id);
        let b = tape.param(&store, id);
        assert_eq!(a, b);
        let y = tape.mul(a, b).unwrap();
        let g = tape.backward(y);
        assert_eq!(tape.param_grads(&g, &store), vec![vec![6.0]]);
    }
}
