use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

use super::AdError;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

pub type Index = Arc<[usize]>;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    ConcatCols(Var, Var),
    Gather(Var, Index),
    ScatterSum(Var, Index),
    MulColumn(Var, Var),
    SegmentMean(Var, Index, Arc<[f64]>),
    SegmentSoftmax(Var, Index),
    SliceRows(Var, usize),
    L2NormalizeRows(Var, Array2<f64>),
    Mse(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    grad: Option<Array2<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Guard for row normalization of near-zero rows.
const NORM_EPS: f64 = 1e-12;

/// Records dense matrix operations in execution order for a single
/// reverse-mode sweep. Node order is a valid topological order.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.leaf(value, true)
    }

    /// Detached leaf; its gradient is never accumulated.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Accumulated gradient, zeros if nothing flowed into `v`.
    pub fn grad(&self, v: Var) -> Array2<f64> {
        let node = &self.nodes[v.0];
        node.grad
            .clone()
            .unwrap_or_else(|| Array2::zeros(node.value.dim()))
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> AdError {
        AdError::ShapeMismatch {
            op,
            lhs: self.shape(a),
            rhs: self.shape(b),
        }
    }

    fn check_index(&self, op: &'static str, index: &[usize], bound: usize) -> Result<(), AdError> {
        match index.iter().find(|&&i| i >= bound) {
            Some(&i) => Err(AdError::IndexOutOfRange {
                op,
                index: i,
                bound,
            }),
            None => Ok(()),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        if self.shape(a).1 != self.shape(b).0 {
            return Err(self.mismatch("matmul", a, b));
        }
        let value = self.value(a).dot(self.value(b));
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        if self.shape(a) != self.shape(b) {
            return Err(self.mismatch("add", a, b));
        }
        let value = self.value(a) + self.value(b);
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    /// Adds a 1 x c row vector to every row of an n x c matrix.
    pub fn add_row_broadcast(&mut self, a: Var, row: Var) -> Result<Var, AdError> {
        let (_, c) = self.shape(a);
        if self.shape(row) != (1, c) {
            return Err(self.mismatch("add_row_broadcast", a, row));
        }
        let value = self.value(a) + self.value(row);
        Ok(self.push(value, Op::AddRow(a, row), &[a, row]))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(value, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, AdError> {
        if self.shape(a).0 != self.shape(b).0 {
            return Err(self.mismatch("concat_cols", a, b));
        }
        let value = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("row counts checked");
        Ok(self.push(value, Op::ConcatCols(a, b), &[a, b]))
    }

    /// Row k of the output is row `index[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: Index) -> Result<Var, AdError> {
        self.check_index("gather_rows", &index, self.shape(a).0)?;
        let value = self.value(a).select(Axis(0), &index);
        Ok(self.push(value, Op::Gather(a, index), &[a]))
    }

    /// Sums row k of `a` into output row `target[k]`; the output has
    /// `n_out` rows (rows receiving nothing are zero).
    pub fn scatter_sum(&mut self, a: Var, target: Index, n_out: usize) -> Result<Var, AdError> {
        let (rows, cols) = self.shape(a);
        if target.len() != rows {
            return Err(AdError::LengthMismatch {
                op: "scatter_sum",
                expected: rows,
                got: target.len(),
            });
        }
        self.check_index("scatter_sum", &target, n_out)?;
        let mut value = Array2::zeros((n_out, cols));
        let src = self.value(a);
        for (k, &t) in target.iter().enumerate() {
            let mut out = value.row_mut(t);
            out += &src.row(k);
        }
        Ok(self.push(value, Op::ScatterSum(a, target), &[a]))
    }

    /// Scales row i of `a` by the scalar `s[i, 0]`.
    pub fn mul_column(&mut self, a: Var, s: Var) -> Result<Var, AdError> {
        let (n, _) = self.shape(a);
        if self.shape(s) != (n, 1) {
            return Err(self.mismatch("mul_column", a, s));
        }
        let value = self.value(a) * self.value(s);
        Ok(self.push(value, Op::MulColumn(a, s), &[a, s]))
    }

    /// Mean of the rows of `a` sharing a segment id.
    pub fn segment_mean(
        &mut self,
        a: Var,
        segment_ids: Index,
        n_segments: usize,
    ) -> Result<Var, AdError> {
        let (rows, cols) = self.shape(a);
        if segment_ids.len() != rows {
            return Err(AdError::LengthMismatch {
                op: "segment_mean",
                expected: rows,
                got: segment_ids.len(),
            });
        }
        self.check_index("segment_mean", &segment_ids, n_segments)?;
        let mut counts = vec![0.0; n_segments];
        for &g in segment_ids.iter() {
            counts[g] += 1.0;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0.0) {
            return Err(AdError::EmptySegment { segment: empty });
        }
        let mut value = Array2::zeros((n_segments, cols));
        let src = self.value(a);
        for (i, &g) in segment_ids.iter().enumerate() {
            let mut out = value.row_mut(g);
            out.scaled_add(1.0 / counts[g], &src.row(i));
        }
        Ok(self.push(value, Op::SegmentMean(a, segment_ids, counts.into()), &[a]))
    }

    /// Column-wise softmax over the rows of each segment.
    pub fn segment_softmax(
        &mut self,
        scores: Var,
        segment_ids: Index,
        n_segments: usize,
    ) -> Result<Var, AdError> {
        let (rows, cols) = self.shape(scores);
        if segment_ids.len() != rows {
            return Err(AdError::LengthMismatch {
                op: "segment_softmax",
                expected: rows,
                got: segment_ids.len(),
            });
        }
        self.check_index("segment_softmax", &segment_ids, n_segments)?;
        let s = self.value(scores);
        let mut max = Array2::from_elem((n_segments, cols), f64::NEG_INFINITY);
        for (i, &g) in segment_ids.iter().enumerate() {
            for j in 0..cols {
                max[[g, j]] = max[[g, j]].max(s[[i, j]]);
            }
        }
        let mut value = Array2::zeros((rows, cols));
        let mut denom = Array2::<f64>::zeros((n_segments, cols));
        for (i, &g) in segment_ids.iter().enumerate() {
            for j in 0..cols {
                let e = (s[[i, j]] - max[[g, j]]).exp();
                value[[i, j]] = e;
                denom[[g, j]] += e;
            }
        }
        for (i, &g) in segment_ids.iter().enumerate() {
            for j in 0..cols {
                value[[i, j]] /= denom[[g, j]];
            }
        }
        Ok(self.push(value, Op::SegmentSoftmax(scores, segment_ids), &[scores]))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, AdError> {
        let (rows, _) = self.shape(a);
        if start + len > rows {
            return Err(AdError::IndexOutOfRange {
                op: "slice_rows",
                index: start + len,
                bound: rows + 1,
            });
        }
        let value = self.value(a).slice(s![start..start + len, ..]).to_owned();
        Ok(self.push(value, Op::SliceRows(a, start), &[a]))
    }

    /// Divides every row by its Euclidean norm.
    pub fn l2_normalize_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let norms = x.map_axis(Axis(1), |r| r.dot(&r).sqrt().max(NORM_EPS));
        let norms = norms.insert_axis(Axis(1));
        let value = x / &norms;
        self.push(value, Op::L2NormalizeRows(a, norms), &[a])
    }

    /// Mean of squared differences over every entry.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, AdError> {
        if self.shape(pred) != self.shape(target) {
            return Err(self.mismatch("mse", pred, target));
        }
        let diff = self.value(pred) - self.value(target);
        let n = diff.len().max(1) as f64;
        let loss = diff.mapv(|d| d * d).sum() / n;
        Ok(self.push(
            Array2::from_elem((1, 1), loss),
            Op::Mse(pred, target),
            &[pred, target],
        ))
    }

    fn accumulate(&mut self, v: Var, delta: Array2<f64>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match node.grad.as_mut() {
            Some(g) => *g += &delta,
            None => node.grad = Some(delta),
        }
    }

    /// Reverse sweep from a 1 x 1 loss. Gradients accumulate into every
    /// node that depends on a trainable leaf.
    pub fn backward(&mut self, loss: Var) -> Result<(), AdError> {
        if self.shape(loss) != (1, 1) {
            return Err(AdError::NonScalarLoss {
                shape: self.shape(loss),
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(Array2::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let Some(upstream) = self.nodes[idx].grad.clone() else {
                continue;
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let op = self.nodes[idx].op.clone();
            self.propagate(idx, op, upstream);
        }
        Ok(())
    }

    fn propagate(&mut self, idx: usize, op: Op, g: Array2<f64>) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    let da = g.dot(&self.value(b).t());
                    self.accumulate(a, da);
                }
                if self.nodes[b.0].requires_grad {
                    let db = self.value(a).t().dot(&g);
                    self.accumulate(b, db);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g);
            }
            Op::AddRow(a, row) => {
                let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                self.accumulate(a, g);
                self.accumulate(row, db);
            }
            Op::Relu(a) => {
                let mut d = g;
                Zip::from(&mut d).and(self.value(a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                self.accumulate(a, d);
            }
            Op::LeakyRelu(a, slope) => {
                let mut d = g;
                Zip::from(&mut d).and(self.value(a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d *= slope
                    }
                });
                self.accumulate(a, d);
            }
            Op::ConcatCols(a, b) => {
                let ca = self.shape(a).1;
                let da = g.slice(s![.., ..ca]).to_owned();
                let db = g.slice(s![.., ca..]).to_owned();
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::Gather(a, index) => {
                let mut d = Array2::zeros(self.shape(a));
                for (k, &i) in index.iter().enumerate() {
                    let mut row = d.row_mut(i);
                    row += &g.row(k);
                }
                self.accumulate(a, d);
            }
            Op::ScatterSum(a, target) => {
                let d = g.select(Axis(0), &target);
                self.accumulate(a, d);
            }
            Op::MulColumn(a, s) => {
                let da = &g * self.value(s);
                let ds = (&g * self.value(a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                self.accumulate(a, da);
                self.accumulate(s, ds);
            }
            Op::SegmentMean(a, ids, counts) => {
                let mut d = Array2::zeros(self.shape(a));
                for (i, &seg) in ids.iter().enumerate() {
                    let mut row = d.row_mut(i);
                    row.scaled_add(1.0 / counts[seg], &g.row(seg));
                }
                self.accumulate(a, d);
            }
            Op::SegmentSoftmax(scores, ids) => {
                let y = &self.nodes[idx].value;
                let (rows, cols) = y.dim();
                let n_seg = ids.iter().copied().max().map_or(0, |m| m + 1);
                let mut dot = Array2::<f64>::zeros((n_seg, cols));
                for (i, &seg) in ids.iter().enumerate() {
                    for j in 0..cols {
                        dot[[seg, j]] += y[[i, j]] * g[[i, j]];
                    }
                }
                let mut d = Array2::zeros((rows, cols));
                for (i, &seg) in ids.iter().enumerate() {
                    for j in 0..cols {
                        d[[i, j]] = y[[i, j]] * (g[[i, j]] - dot[[seg, j]]);
                    }
                }
                self.accumulate(scores, d);
            }
            Op::SliceRows(a, start) => {
                let mut d = Array2::zeros(self.shape(a));
                let len = g.nrows();
                d.slice_mut(s![start..start + len, ..]).assign(&g);
                self.accumulate(a, d);
            }
            Op::L2NormalizeRows(a, norms) => {
                let y = &self.nodes[idx].value;
                let proj = (y * &g).sum_axis(Axis(1)).insert_axis(Axis(1));
                let d = (&g - &(y * &proj)) / &norms;
                self.accumulate(a, d);
            }
            Op::Mse(pred, target) => {
                let diff = self.value(pred) - self.value(target);
                let scale = 2.0 * g[[0, 0]] / diff.len().max(1) as f64;
                let dp = diff.mapv(|x| x * scale);
                let dt = dp.mapv(|x| -x);
                self.accumulate(pred, dp);
                self.accumulate(target, dt);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn arc(v: &[usize]) -> Index {
        v.to_vec().into()
    }

    #[test]
    fn forward_examples() {
        let mut t = Tape::new();
        let a = t.constant(array![[-1.0, 2.0]]);
        let r = t.relu(a);
        assert_eq!(t.value(r), &array![[0.0, 2.0]]);

        let x = t.constant(array![[2.0], [4.0], [6.0]]);
        let m = t.segment_mean(x, arc(&[0, 0, 1]), 2).unwrap();
        assert_eq!(t.value(m), &array![[3.0], [6.0]]);

        let p = t.constant(array![[1.0], [2.0]]);
        let q = t.constant(array![[1.0], [2.0]]);
        let l = t.mse(p, q).unwrap();
        assert_eq!(t.value(l)[[0, 0]], 0.0);

        let z = t.constant(array![[0.0], [0.0]]);
        let sm = t.segment_softmax(z, arc(&[0, 0]), 1).unwrap();
        assert_eq!(t.value(sm), &array![[0.5], [0.5]]);
    }

    #[test]
    fn shape_errors_name_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Array2::zeros((2, 3)));
        let b = t.constant(Array2::zeros((2, 3)));
        assert_eq!(
            t.matmul(a, b),
            Err(AdError::ShapeMismatch {
                op: "matmul",
                lhs: (2, 3),
                rhs: (2, 3)
            })
        );
        let c = t.constant(Array2::zeros((3, 3)));
        assert!(matches!(t.add(a, c), Err(AdError::ShapeMismatch { .. })));
        assert!(matches!(
            t.gather_rows(a, arc(&[5])),
            Err(AdError::IndexOutOfRange {
                index: 5,
                bound: 2,
                ..
            })
        ));
        assert!(matches!(
            t.segment_mean(a, arc(&[1, 1]), 2),
            Err(AdError::EmptySegment { segment: 0 })
        ));
    }

    #[test]
    fn linear_least_squares_gradient() {
        // loss = mean((W x - y)^2) over n outputs; dW = 2 (W x - y) x^T / n.
        let mut t = Tape::new();
        let w = t.param(array![[1.0, 2.0], [0.5, -1.0], [0.0, 3.0]]);
        let x = t.constant(array![[0.3], [-0.7]]);
        let y = t.constant(array![[1.0], [0.0], [2.0]]);
        let wx = t.matmul(w, x).unwrap();
        let loss = t.mse(wx, y).unwrap();
        t.backward(loss).unwrap();
        let resid = t.value(wx) - t.value(y);
        let expected = resid.dot(&t.value(x).t()) * (2.0 / 3.0);
        let got = t.grad(w);
        for (a, b) in got.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn reused_node_accumulates() {
        let mut t = Tape::new();
        let x = t.param(array![[1.5]]);
        let y = t.add(x, x).unwrap();
        let zero = t.constant(array![[0.0]]);
        let loss = t.mse(y, zero).unwrap();
        t.backward(loss).unwrap();
        // loss = (2x)^2, dloss/dx = 8x
        assert!((t.grad(x)[[0, 0]] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn detached_and_unused_nodes_have_zero_grad() {
        let mut t = Tape::new();
        let x = t.param(array![[1.0, 2.0]]);
        let c = t.constant(array![[3.0, 4.0]]);
        let unused = t.param(array![[7.0]]);
        let s = t.add(x, c).unwrap();
        let target = t.constant(array![[0.0, 0.0]]);
        let loss = t.mse(s, target).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(c), array![[0.0, 0.0]]);
        assert_eq!(t.grad(unused), array![[0.0]]);
        assert!(t.grad(x).iter().all(|&g| g != 0.0));
    }

    #[test]
    fn backward_needs_scalar() {
        let mut t = Tape::new();
        let x = t.param(array![[1.0, 2.0]]);
        assert_eq!(t.backward(x), Err(AdError::NonScalarLoss { shape: (1, 2) }));
    }

    #[test]
    fn softmax_sums_to_one_per_segment() {
        let mut t = Tape::new();
        let s = t.constant(array![[1.0], [-3.0], [2.5], [0.1], [40.0]]);
        let y = t.segment_softmax(s, arc(&[0, 1, 0, 1, 2]), 3).unwrap();
        let v = t.value(y);
        assert!((v[[0, 0]] + v[[2, 0]] - 1.0).abs() < 1e-12);
        assert!((v[[1, 0]] + v[[3, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(v[[4, 0]], 1.0);
        assert!(v.iter().all(|&p| p > 0.0));
    }
}
