//! Reverse-mode differentiation over dense rank-2 `f64` arrays.
//!
//! Every operation appends a node to the tape; nodes only reference earlier
//! nodes, so walking the tape backwards is a valid reverse topological
//! order. Gradients of a value used several times are summed.

use std::rc::Rc;

use ndarray::{s, Array2, ArrayView2, Axis, Zip};

pub type Mat = Array2<f64>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Index lists shared between forward and backward.
pub type Idx = Rc<Vec<u32>>;

/// Sparse `(dst, src)` pairs with optional constant weights, sorted by `dst`.
#[derive(Debug, Clone, Default)]
pub struct Pairs {
    pub dst: Vec<u32>,
    pub src: Vec<u32>,
    pub weight: Option<Vec<f64>>,
}

impl Pairs {
    pub fn len(&self) -> usize {
        self.dst.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dst.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    /// `a + row`, the `1 x d` row broadcast over rows of `a`.
    AddRow(Var, Var),
    Scale(Var, f64),
    /// `a * s[0, j]`.
    ScaleBy(Var, Var, usize),
    /// Each row `i` scaled by a constant `c[i]`.
    ScaleRows(Var, Rc<Vec<f64>>),
    Mul(Var, Var),
    MulConst(Var, Rc<Mat>),
    Relu(Var),
    TruncatedRelu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    SoftmaxRows(Var),
    /// Saved normalized input and per-column `gamma / sqrt(var + eps)`.
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Mat,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    SegmentSum(Var, Idx),
    NeighborSum(Var, Rc<Pairs>),
    /// `out[dst] += w[e] * x[src]`, `w` an `m x 1` tape value.
    EdgeWeightedSum(Var, Var, Rc<Pairs>),
    SegmentSoftmax(Var, Idx, usize),
    Gather(Var, Idx),
    SliceRows(Var, usize),
    ConcatRows(Vec<Var>),
    Transpose(Var),
    /// Entries of a `1 x m` vector laid out by an index matrix.
    GatherScalar(Var, Rc<Vec<u32>>),
    SumAll(Var),
    /// Mean of per-row cross-entropy; saved softmax probabilities.
    CrossEntropy(Var, Rc<Vec<usize>>, Mat),
    Mse(Var, Rc<Mat>),
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
}

/// Per-column batch statistics returned by [`Tape::batch_norm`].
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn check(cond: bool, msg: impl FnOnce() -> String) {
    assert!(cond, "{}", msg());
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

    fn push(&mut self, value: Mat, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Scalar value of a `1 x 1` result.
    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        check(m.dim() == (1, 1), || format!("expected 1x1, got {:?}", m.dim()));
        m[[0, 0]]
    }

    pub fn leaf(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        check(va.ncols() == vb.nrows(), || {
            format!("matmul shape mismatch {:?} x {:?}", va.dim(), vb.dim())
        });
        let out = va.dot(vb);
        self.push(out, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        check(va.dim() == vb.dim(), || {
            format!("add shape mismatch {:?} + {:?}", va.dim(), vb.dim())
        });
        let out = va + vb;
        self.push(out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        check(va.dim() == vb.dim(), || {
            format!("sub shape mismatch {:?} - {:?}", va.dim(), vb.dim())
        });
        let out = va - vb;
        self.push(out, Op::Sub(a, b))
    }

    /// Sum of several same-shape values.
    pub fn add_all(&mut self, vars: &[Var]) -> Var {
        let mut acc = vars[0];
        for &v in &vars[1..] {
            acc = self.add(acc, v);
        }
        acc
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        check(vr.nrows() == 1 && vr.ncols() == va.ncols(), || {
            format!("row broadcast mismatch {:?} + {:?}", va.dim(), vr.dim())
        });
        let out = va + vr;
        self.push(out, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a) * c;
        self.push(out, Op::Scale(a, c))
    }

    /// Multiplies `a` by the tape scalar `s[0, j]`.
    pub fn scale_by(&mut self, a: Var, s: Var, j: usize) -> Var {
        let c = self.value(s)[[0, j]];
        let out = self.value(a) * c;
        self.push(out, Op::ScaleBy(a, s, j))
    }

    pub fn scale_rows(&mut self, a: Var, c: Rc<Vec<f64>>) -> Var {
        let va = self.value(a);
        check(c.len() == va.nrows(), || "scale_rows length mismatch".to_string());
        let mut out = va.clone();
        for (mut row, &f) in out.axis_iter_mut(Axis(0)).zip(c.iter()) {
            row *= f;
        }
        self.push(out, Op::ScaleRows(a, c))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        check(va.dim() == vb.dim(), || "mul shape mismatch".to_string());
        let out = va * vb;
        self.push(out, Op::Mul(a, b))
    }

    /// Elementwise product with a constant, e.g. a dropout mask.
    pub fn mul_const(&mut self, a: Var, m: Rc<Mat>) -> Var {
        let out = self.value(a) * &*m;
        self.push(out, Op::MulConst(a, m))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.max(0.0));
        self.push(out, Op::Relu(a))
    }

    /// Clamp to `[0, 1]`.
    pub fn truncated_relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| x.clamp(0.0, 1.0));
        self.push(out, Op::TruncatedRelu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(f64::tanh);
        self.push(out, Op::Tanh(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for mut row in out.axis_iter_mut(Axis(0)) {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let z = row.sum();
            row /= z;
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    /// Per-column normalization. With `running = None` the batch statistics
    /// are used and returned; otherwise the given statistics are constants.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running: Option<&BatchStats>,
        eps: f64,
    ) -> (Var, Option<BatchStats>) {
        let vx = self.value(x);
        let (n, d) = vx.dim();
        let (mean, var, batch_stats) = match running {
            Some(r) => (r.mean.clone(), r.var.clone(), false),
            None => {
                check(n > 0, || "batch norm over zero rows".to_string());
                let mean: Vec<f64> = vx.mean_axis(Axis(0)).expect("rows").to_vec();
                let var: Vec<f64> = (0..d)
                    .map(|j| vx.column(j).iter().map(|&v| (v - mean[j]).powi(2)).sum::<f64>() / n as f64)
                    .collect();
                (mean, var, true)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = vx.clone();
        for mut row in xhat.axis_iter_mut(Axis(0)) {
            for j in 0..d {
                row[j] = (row[j] - mean[j]) * inv_std[j];
            }
        }
        let (g, b) = (self.value(gamma), self.value(beta));
        check(g.dim() == (1, d) && b.dim() == (1, d), || "batch norm parameter shape".to_string());
        let out = &xhat * g + b;
        let stats = batch_stats.then_some(BatchStats { mean, var });
        let v = self.push(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
        );
        (v, stats)
    }

    /// Row `s` of the result sums the rows of `x` whose segment id is `s`.
    pub fn segment_sum(&mut self, x: Var, segments: Idx, n_segments: usize) -> Var {
        let vx = self.value(x);
        check(segments.len() == vx.nrows(), || "segment id count mismatch".to_string());
        let mut out = Mat::zeros((n_segments, vx.ncols()));
        for (i, &s) in segments.iter().enumerate() {
            check((s as usize) < n_segments, || format!("segment id {s} out of range {n_segments}"));
            let mut row = out.row_mut(s as usize);
            row += &vx.row(i);
        }
        self.push(out, Op::SegmentSum(x, segments))
    }

    /// `out[dst] += w * x[src]` over all pairs; `out` has `n_out` rows.
    pub fn neighbor_sum(&mut self, x: Var, pairs: Rc<Pairs>, n_out: usize) -> Var {
        let vx = self.value(x);
        let d = vx.ncols();
        let mut out = Mat::zeros((n_out, d));
        scatter_pairs(&mut out, vx.view(), &pairs.dst, &pairs.src, pairs.weight.as_deref());
        self.push(out, Op::NeighborSum(x, pairs))
    }

    /// Like [`Tape::neighbor_sum`] with per-pair weights taken from an
    /// `m x 1` tape value.
    pub fn edge_weighted_sum(&mut self, x: Var, w: Var, pairs: Rc<Pairs>, n_out: usize) -> Var {
        let (vx, vw) = (self.value(x), self.value(w));
        check(vw.dim() == (pairs.len(), 1), || "edge weight shape mismatch".to_string());
        let weights: Vec<f64> = vw.column(0).to_vec();
        let mut out = Mat::zeros((n_out, vx.ncols()));
        scatter_pairs(&mut out, vx.view(), &pairs.dst, &pairs.src, Some(&weights));
        self.push(out, Op::EdgeWeightedSum(x, w, pairs))
    }

    /// Softmax of an `m x 1` score column within each segment.
    pub fn segment_softmax(&mut self, scores: Var, segments: Idx, n_segments: usize) -> Var {
        let vs = self.value(scores);
        check(vs.ncols() == 1 && vs.nrows() == segments.len(), || {
            "segment softmax expects an m x 1 column".to_string()
        });
        let mut max = vec![f64::NEG_INFINITY; n_segments];
        for (i, &s) in segments.iter().enumerate() {
            max[s as usize] = max[s as usize].max(vs[[i, 0]]);
        }
        let mut out = Mat::zeros(vs.dim());
        let mut z = vec![0.0; n_segments];
        for (i, &s) in segments.iter().enumerate() {
            let e = (vs[[i, 0]] - max[s as usize]).exp();
            out[[i, 0]] = e;
            z[s as usize] += e;
        }
        for (i, &s) in segments.iter().enumerate() {
            out[[i, 0]] /= z[s as usize];
        }
        self.push(out, Op::SegmentSoftmax(scores, segments, n_segments))
    }

    /// Rows of `x` selected by `idx`, repeats allowed.
    pub fn gather(&mut self, x: Var, idx: Idx) -> Var {
        let vx = self.value(x);
        let mut out = Mat::zeros((idx.len(), vx.ncols()));
        for (i, &j) in idx.iter().enumerate() {
            check((j as usize) < vx.nrows(), || format!("gather index {j} out of range"));
            out.row_mut(i).assign(&vx.row(j as usize));
        }
        self.push(out, Op::Gather(x, idx))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.value(x).slice(s![start..start + len, ..]).to_owned();
        self.push(out, Op::SliceRows(x, start))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let out = self.value(x).t().to_owned();
        self.push(out, Op::Transpose(x))
    }

    /// `out[r][c] = v[0, idx[r * cols + c]]` for a `1 x m` vector `v`.
    pub fn gather_scalar(&mut self, v: Var, idx: Rc<Vec<u32>>, rows: usize, cols: usize) -> Var {
        let vv = self.value(v);
        check(vv.nrows() == 1 && idx.len() == rows * cols, || "gather_scalar shape".to_string());
        let out = Mat::from_shape_fn((rows, cols), |(r, c)| vv[[0, idx[r * cols + c] as usize]]);
        self.push(out, Op::GatherScalar(v, idx))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let out = Mat::from_elem((1, 1), self.value(x).sum());
        self.push(out, Op::SumAll(x))
    }

    /// Mean cross-entropy of row logits against class ids.
    pub fn cross_entropy(&mut self, logits: Var, targets: Rc<Vec<usize>>) -> Var {
        let vl = self.value(logits);
        check(vl.nrows() == targets.len(), || "cross entropy target count".to_string());
        let mut probs = vl.clone();
        let mut loss = 0.0;
        for (mut row, &t) in probs.axis_iter_mut(Axis(0)).zip(targets.iter()) {
            check(t < row.len(), || format!("class {t} out of range"));
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
            loss += lse - row[t];
            row.mapv_inplace(|x| (x - lse).exp());
        }
        let n = targets.len().max(1) as f64;
        let out = Mat::from_elem((1, 1), loss / n);
        self.push(out, Op::CrossEntropy(logits, targets, probs))
    }

    /// Mean squared error over all entries.
    pub fn mse(&mut self, pred: Var, target: Rc<Mat>) -> Var {
        let vp = self.value(pred);
        check(vp.dim() == target.dim(), || "mse shape mismatch".to_string());
        let n = vp.len().max(1) as f64;
        let loss = Zip::from(vp).and(&*target).fold(0.0, |acc, &p, &t| acc + (p - t).powi(2)) / n;
        let out = Mat::from_elem((1, 1), loss);
        self.push(out, Op::Mse(pred, target))
    }

    /// Gradients of a `1 x 1` output with respect to every recorded value.
    pub fn backward(&self, output: Var) -> Gradients {
        let (r, c) = self.shape(output);
        check((r, c) == (1, 1), || format!("backward needs a 1x1 output, got {r}x{c}"));
        self.backward_with(output, Mat::from_elem((1, 1), 1.0))
    }

    /// Reverse pass seeded with an arbitrary cotangent for `output`.
    pub fn backward_with(&self, output: Var, seed: Mat) -> Gradients {
        check(seed.dim() == self.shape(output), || "seed shape mismatch".to_string());
        let mut grads: Vec<Option<Mat>> = vec![None; output.0 + 1];
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, i: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                accumulate(grads, *a, g.dot(&val(*b).t()));
                accumulate(grads, *b, val(*a).t().dot(g));
            }
            Op::Add(a, b) => {
                accumulate_ref(grads, *a, g);
                accumulate_ref(grads, *b, g);
            }
            Op::Sub(a, b) => {
                accumulate_ref(grads, *a, g);
                accumulate(grads, *b, -g);
            }
            Op::AddRow(a, row) => {
                accumulate_ref(grads, *a, g);
                accumulate(grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Scale(a, c) => accumulate(grads, *a, g * *c),
            Op::ScaleBy(a, s, j) => {
                let c = val(*s)[[0, *j]];
                accumulate(grads, *a, g * c);
                let dot = Zip::from(g).and(val(*a)).fold(0.0, |acc, &x, &y| acc + x * y);
                let mut gs = Mat::zeros(val(*s).dim());
                gs[[0, *j]] = dot;
                accumulate(grads, *s, gs);
            }
            Op::ScaleRows(a, c) => {
                let mut ga = g.clone();
                for (mut row, &f) in ga.axis_iter_mut(Axis(0)).zip(c.iter()) {
                    row *= f;
                }
                accumulate(grads, *a, ga);
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, g * val(*b));
                accumulate(grads, *b, g * val(*a));
            }
            Op::MulConst(a, m) => accumulate(grads, *a, g * &**m),
            Op::Relu(a) => {
                let mut ga = g.clone();
                Zip::from(&mut ga).and(val(*a)).for_each(|x, &v| {
                    if v <= 0.0 {
                        *x = 0.0
                    }
                });
                accumulate(grads, *a, ga);
            }
            Op::TruncatedRelu(a) => {
                let mut ga = g.clone();
                Zip::from(&mut ga).and(val(*a)).for_each(|x, &v| {
                    if v <= 0.0 || v >= 1.0 {
                        *x = 0.0
                    }
                });
                accumulate(grads, *a, ga);
            }
            Op::LeakyRelu(a, slope) => {
                let mut ga = g.clone();
                Zip::from(&mut ga).and(val(*a)).for_each(|x, &v| {
                    if v <= 0.0 {
                        *x *= slope
                    }
                });
                accumulate(grads, *a, ga);
            }
            Op::Tanh(a) => {
                let mut ga = g.clone();
                Zip::from(&mut ga).and(&node.value).for_each(|x, &y| *x *= 1.0 - y * y);
                accumulate(grads, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let mut ga = g * y;
                for (mut row, yrow) in ga.axis_iter_mut(Axis(0)).zip(y.axis_iter(Axis(0))) {
                    let s = row.sum();
                    Zip::from(&mut row).and(&yrow).for_each(|x, &yy| *x -= yy * s);
                }
                accumulate(grads, *a, ga);
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let gv = val(*gamma);
                let n = xhat.nrows() as f64;
                accumulate(grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                let gxhat_sum = (g * xhat).sum_axis(Axis(0));
                accumulate(grads, *gamma, gxhat_sum.clone().insert_axis(Axis(0)));
                let mut gx = g.clone();
                if *batch_stats {
                    let gsum = g.sum_axis(Axis(0));
                    for (mut row, xrow) in gx.axis_iter_mut(Axis(0)).zip(xhat.axis_iter(Axis(0))) {
                        for j in 0..row.len() {
                            let k = gv[[0, j]] * inv_std[j];
                            row[j] = k * (row[j] - gsum[j] / n - xrow[j] * gxhat_sum[j] / n);
                        }
                    }
                } else {
                    for mut row in gx.axis_iter_mut(Axis(0)) {
                        for j in 0..row.len() {
                            row[j] *= gv[[0, j]] * inv_std[j];
                        }
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::SegmentSum(x, seg) => {
                let mut gx = Mat::zeros(val(*x).dim());
                for (i, &s) in seg.iter().enumerate() {
                    gx.row_mut(i).assign(&g.row(s as usize));
                }
                accumulate(grads, *x, gx);
            }
            Op::NeighborSum(x, pairs) => {
                let mut gx = Mat::zeros(val(*x).dim());
                scatter_pairs(&mut gx, g.view(), &pairs.src, &pairs.dst, pairs.weight.as_deref());
                accumulate(grads, *x, gx);
            }
            Op::EdgeWeightedSum(x, w, pairs) => {
                let (vx, vw) = (val(*x), val(*w));
                let weights: Vec<f64> = vw.column(0).to_vec();
                let mut gx = Mat::zeros(vx.dim());
                scatter_pairs(&mut gx, g.view(), &pairs.src, &pairs.dst, Some(&weights));
                accumulate(grads, *x, gx);
                let mut gw = Mat::zeros(vw.dim());
                for e in 0..pairs.len() {
                    let (d, s) = (pairs.dst[e] as usize, pairs.src[e] as usize);
                    gw[[e, 0]] = g.row(d).dot(&vx.row(s));
                }
                accumulate(grads, *w, gw);
            }
            Op::SegmentSoftmax(scores, seg, n_segments) => {
                let y = &node.value;
                let mut dot = vec![0.0; *n_segments];
                for (i, &s) in seg.iter().enumerate() {
                    dot[s as usize] += g[[i, 0]] * y[[i, 0]];
                }
                let mut gs = Mat::zeros(y.dim());
                for (i, &s) in seg.iter().enumerate() {
                    gs[[i, 0]] = y[[i, 0]] * (g[[i, 0]] - dot[s as usize]);
                }
                accumulate(grads, *scores, gs);
            }
            Op::Gather(x, idx) => {
                let mut gx = Mat::zeros(val(*x).dim());
                for (i, &j) in idx.iter().enumerate() {
                    let mut row = gx.row_mut(j as usize);
                    row += &g.row(i);
                }
                accumulate(grads, *x, gx);
            }
            Op::SliceRows(x, start) => {
                let mut gx = Mat::zeros(val(*x).dim());
                gx.slice_mut(s![*start..*start + g.nrows(), ..]).assign(g);
                accumulate(grads, *x, gx);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = val(p).nrows();
                    accumulate(grads, p, g.slice(s![offset..offset + rows, ..]).to_owned());
                    offset += rows;
                }
            }
            Op::Transpose(x) => accumulate(grads, *x, g.t().to_owned()),
            Op::GatherScalar(v, idx) => {
                let mut gv = Mat::zeros(val(*v).dim());
                for (flat, &j) in idx.iter().enumerate() {
                    let cols = g.ncols();
                    gv[[0, j as usize]] += g[[flat / cols, flat % cols]];
                }
                accumulate(grads, *v, gv);
            }
            Op::SumAll(x) => {
                let c = g[[0, 0]];
                accumulate(grads, *x, Mat::from_elem(val(*x).dim(), c));
            }
            Op::CrossEntropy(logits, targets, probs) => {
                let c = g[[0, 0]] / targets.len().max(1) as f64;
                let mut gl = probs.clone();
                for (i, &t) in targets.iter().enumerate() {
                    gl[[i, t]] -= 1.0;
                }
                gl *= c;
                accumulate(grads, *logits, gl);
            }
            Op::Mse(pred, target) => {
                let vp = val(*pred);
                let c = 2.0 * g[[0, 0]] / vp.len().max(1) as f64;
                accumulate(grads, *pred, (vp - &**target) * c);
            }
        }
    }
}

/// `out[to[e]] += w[e] * x[from[e]]`.
fn scatter_pairs(out: &mut Mat, x: ArrayView2<f64>, to: &[u32], from: &[u32], w: Option<&[f64]>) {
    let d = x.ncols();
    check(out.ncols() == d, || "pair scatter width mismatch".to_string());
    let n_out = out.nrows();
    let n_in = x.nrows();
    match (out.as_slice_mut(), x.as_slice()) {
        (Some(o), Some(xs)) => {
            for e in 0..to.len() {
                let (t, f) = (to[e] as usize, from[e] as usize);
                check(t < n_out && f < n_in, || format!("pair ({t}, {f}) out of range"));
                let src = &xs[f * d..(f + 1) * d];
                let dst = &mut o[t * d..(t + 1) * d];
                match w {
                    Some(w) => {
                        let c = w[e];
                        for (a, b) in dst.iter_mut().zip(src) {
                            *a += c * b;
                        }
                    }
                    None => {
                        for (a, b) in dst.iter_mut().zip(src) {
                            *a += b;
                        }
                    }
                }
            }
        }
        _ => {
            for e in 0..to.len() {
                let (t, f) = (to[e] as usize, from[e] as usize);
                let c = w.map_or(1.0, |w| w[e]);
                let mut row = out.row_mut(t);
                row.scaled_add(c, &x.row(f));
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Mat>], v: Var, g: Mat) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

fn accumulate_ref(grads: &mut [Option<Mat>], v: Var, g: &Mat) {
    match &mut grads[v.0] {
        Some(existing) => *existing += g,
        slot @ None => *slot = Some(g.clone()),
    }
}

/// Result of a reverse pass.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    /// Gradient with respect to `v`, or `None` if `v` does not influence the
    /// output.
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zero-filled when absent.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Mat {
        self.get(v).cloned().unwrap_or_else(|| Mat::zeros(shape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn segment_sum_values() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0], [2.0], [3.0]]);
        let y = t.segment_sum(x, Rc::new(vec![0, 0, 1]), 2);
        assert_eq!(t.value(y), &array![[3.0], [3.0]]);
        let s = t.sum_all(y);
        let g = t.backward(s);
        assert_eq!(g.get(x).unwrap(), &array![[1.0], [1.0], [1.0]]);
    }

    #[test]
    fn empty_segment_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
        let y = t.segment_sum(x, Rc::new(vec![0, 0]), 2);
        assert_eq!(t.value(y).row(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn segment_id_out_of_range() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0]]);
        t.segment_sum(x, Rc::new(vec![3]), 2);
    }

    #[test]
    fn truncated_relu_values_and_grad() {
        let mut t = Tape::new();
        let x = t.leaf(array![[-1.0, 0.5, 2.0]]);
        let y = t.truncated_relu(x);
        assert_eq!(t.value(y), &array![[0.0, 0.5, 1.0]]);
        let z = t.truncated_relu(y);
        assert_eq!(t.value(z), t.value(y));
        let s = t.sum_all(y);
        let g = t.backward(s);
        assert_eq!(g.get(x).unwrap(), &array![[0.0, 1.0, 0.0]]);
    }

    #[test]
    fn fan_out_accumulates() {
        let mut t = Tape::new();
        let x = t.leaf(array![[3.0]]);
        let y = t.mul(x, x);
        let z = t.add(y, x);
        let g = t.backward(z);
        assert_eq!(g.get(x).unwrap()[[0, 0]], 7.0);
    }

    #[test]
    fn cross_entropy_of_uniform_logits() {
        let mut t = Tape::new();
        let x = t.leaf(Mat::zeros((2, 4)));
        let l = t.cross_entropy(x, Rc::new(vec![1, 3]));
        assert!((t.scalar(l) - 4f64.ln()).abs() < 1e-12);
    }
}
