//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records operations eagerly; [`Tape::backward`] walks the record
//! in reverse and accumulates gradients for every node. The op set is exactly
//! what the message-passing models and fairness losses need: dense linear
//! algebra, elementwise nonlinearities, row gathering, sparse products,
//! Laplacian quadratic forms, and per-node softmax over incoming edges.
//!
//! Scalars are represented as 1×1 matrices. Binary elementwise ops broadcast a
//! right operand of shape 1×1 or 1×m against an n×m left operand.

use std::rc::Rc;

use ndarray::{Array2, Axis};

use crate::sparse::SparseMatrix;

/// Directed edge structure for attention layers. Edges are grouped by
/// destination: edges of node `v` occupy `seg_ptr[v]..seg_ptr[v+1]`.
#[derive(Debug, Clone)]
pub struct EdgeStructure {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub seg_ptr: Vec<usize>,
    pub n_nodes: usize,
}

impl EdgeStructure {
    /// Build from a symmetric adjacency matrix, adding a self-edge per node so
    /// every attention segment is nonempty.
    pub fn from_adjacency_with_self_loops(adj: &SparseMatrix) -> Self {
        let n = adj.n();
        let mut src = Vec::new();
        let mut dst = Vec::new();
        let mut seg_ptr = Vec::with_capacity(n + 1);
        seg_ptr.push(0);
        for v in 0..n {
            src.push(v);
            dst.push(v);
            let (cols, _) = adj.row(v);
            for &u in cols {
                src.push(u);
                dst.push(v);
            }
            seg_ptr.push(src.len());
        }
        Self {
            src,
            dst,
            seg_ptr,
            n_nodes: n,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.src.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Scale(usize, f64),
    AddConst(usize),
    Neg(usize),
    Sigmoid(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Elu(usize),
    Ln(usize),
    Clamp(usize, f64, f64),
    Abs(usize),
    Sum(usize),
    Mean(usize),
    GatherRows(usize, Rc<Vec<usize>>),
    SliceCols(usize, usize, usize),
    ConcatCols(Vec<usize>),
    SpMm(Rc<SparseMatrix>, usize),
    QuadForm(Rc<SparseMatrix>, usize),
    SegmentSoftmax(usize, Rc<EdgeStructure>),
    EdgeAggregate(usize, usize, Rc<EdgeStructure>),
    MulMask(usize, Rc<Array2<f64>>),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of a leaf, zero-filled when the node was never reached.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        match self.grads[v.0].as_ref() {
            Some(g) => g.clone(),
            None => Array2::zeros(shape),
        }
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
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

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.dim(), (1, 1), "scalar() on non-scalar node");
        val[[0, 0]]
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Var {
        self.leaf(Array2::from_elem((1, 1), value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_binary(self.value(a), self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_binary(self.value(a), self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = broadcast_binary(self.value(a), self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a.0, b.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).mapv(|x| x * c);
        self.push(value, Op::Scale(a.0, c))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).mapv(|x| x + c);
        self.push(value, Op::AddConst(a.0))
    }

    /// `1 - a` elementwise.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.neg(a);
        self.add_const(neg, 1.0)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| -x);
        self.push(value, Op::Neg(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(stable_sigmoid);
        self.push(value, Op::Sigmoid(a.0))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(value, Op::Relu(a.0))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(value, Op::LeakyRelu(a.0, slope))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| if x > 0.0 { x } else { x.exp() - 1.0 });
        self.push(value, Op::Elu(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::ln);
        self.push(value, Op::Ln(a.0))
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(value, Op::Clamp(a.0, lo, hi))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::abs);
        self.push(value, Op::Abs(a.0))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(value, Op::Sum(a.0))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let len = self.value(a).len() as f64;
        let value = Array2::from_elem((1, 1), self.value(a).sum() / len);
        self.push(value, Op::Mean(a.0))
    }

    pub fn gather_rows(&mut self, a: Var, rows: Rc<Vec<usize>>) -> Var {
        let src = self.value(a);
        let m = src.ncols();
        let mut value = Array2::zeros((rows.len(), m));
        for (out_i, &r) in rows.iter().enumerate() {
            for c in 0..m {
                value[[out_i, c]] = src[[r, c]];
            }
        }
        self.push(value, Op::GatherRows(a.0, rows))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self
            .value(a)
            .slice(ndarray::s![.., start..end])
            .to_owned();
        self.push(value, Op::SliceCols(a.0, start, end))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols shape mismatch");
        self.push(value, Op::ConcatCols(parts.iter().map(|v| v.0).collect()))
    }

    /// `s · a` for a constant sparse matrix `s`.
    pub fn spmm(&mut self, s: Rc<SparseMatrix>, a: Var) -> Var {
        let value = s.matmul_dense(self.value(a));
        self.push(value, Op::SpMm(s, a.0))
    }

    /// `Tr(aᵀ · s · a)` for a constant symmetric sparse matrix `s`.
    pub fn quad_form(&mut self, s: Rc<SparseMatrix>, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), s.quad_form(self.value(a)));
        self.push(value, Op::QuadForm(s, a.0))
    }

    /// Softmax of per-edge scores within each destination segment.
    pub fn segment_softmax(&mut self, scores: Var, edges: Rc<EdgeStructure>) -> Var {
        let e = self.value(scores);
        debug_assert_eq!(e.dim(), (edges.n_edges(), 1));
        let mut value = Array2::zeros((edges.n_edges(), 1));
        for v in 0..edges.n_nodes {
            let lo = edges.seg_ptr[v];
            let hi = edges.seg_ptr[v + 1];
            if lo == hi {
                continue;
            }
            let mut max = f64::NEG_INFINITY;
            for k in lo..hi {
                max = max.max(e[[k, 0]]);
            }
            let mut denom = 0.0;
            for k in lo..hi {
                let ex = (e[[k, 0]] - max).exp();
                value[[k, 0]] = ex;
                denom += ex;
            }
            for k in lo..hi {
                value[[k, 0]] /= denom;
            }
        }
        self.push(value, Op::SegmentSoftmax(scores.0, edges))
    }

    /// `out[v] = Σ_{e: dst(e)=v} alpha[e] · h[src(e)]`.
    pub fn edge_aggregate(&mut self, alpha: Var, h: Var, edges: Rc<EdgeStructure>) -> Var {
        let a = self.value(alpha);
        let hm = self.value(h);
        debug_assert_eq!(a.dim(), (edges.n_edges(), 1));
        let d = hm.ncols();
        let mut value = Array2::zeros((edges.n_nodes, d));
        for e in 0..edges.n_edges() {
            let (u, v, w) = (edges.src[e], edges.dst[e], a[[e, 0]]);
            for c in 0..d {
                value[[v, c]] += w * hm[[u, c]];
            }
        }
        self.push(value, Op::EdgeAggregate(alpha.0, h.0, edges))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mul_mask(&mut self, a: Var, mask: Rc<Array2<f64>>) -> Var {
        let value = self.value(a) * &*mask;
        self.push(value, Op::MulMask(a.0, mask))
    }

    /// Reverse pass from a scalar node.
    pub fn backward(&self, target: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        debug_assert_eq!(self.nodes[target.0].value.dim(), (1, 1));
        grads[target.0] = Some(Array2::from_elem((1, 1), 1.0));

        for idx in (0..=target.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &self.nodes[idx].op {
                Op::Leaf => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, reduce_to_shape(&g, self.nodes[*b].value.dim()));
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    let gneg = g.mapv(|x| -x);
                    accumulate(&mut grads, *b, reduce_to_shape(&gneg, self.nodes[*b].value.dim()));
                }
                Op::Mul(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let ga = broadcast_binary(&g, bv, |x, y| x * y);
                    let gb_full = &g * av;
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, reduce_to_shape(&gb_full, bv.dim()));
                }
                Op::MatMul(a, b) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    accumulate(&mut grads, *a, g.dot(&bv.t()));
                    accumulate(&mut grads, *b, av.t().dot(&g));
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.mapv(|x| x * c)),
                Op::AddConst(a) => accumulate(&mut grads, *a, g),
                Op::Neg(a) => accumulate(&mut grads, *a, g.mapv(|x| -x)),
                Op::Sigmoid(a) => {
                    let y = &self.nodes[idx].value;
                    accumulate(&mut grads, *a, &g * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::Relu(a) => {
                    let x = &self.nodes[*a].value;
                    accumulate(&mut grads, *a, &g * &x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }));
                }
                Op::LeakyRelu(a, slope) => {
                    let x = &self.nodes[*a].value;
                    let s = *slope;
                    accumulate(&mut grads, *a, &g * &x.mapv(|v| if v > 0.0 { 1.0 } else { s }));
                }
                Op::Elu(a) => {
                    let x = &self.nodes[*a].value;
                    accumulate(&mut grads, *a, &g * &x.mapv(|v| if v > 0.0 { 1.0 } else { v.exp() }));
                }
                Op::Ln(a) => {
                    let x = &self.nodes[*a].value;
                    accumulate(&mut grads, *a, &g / x);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = &self.nodes[*a].value;
                    let (lo, hi) = (*lo, *hi);
                    let pass = x.mapv(|v| if v >= lo && v <= hi { 1.0 } else { 0.0 });
                    accumulate(&mut grads, *a, &g * &pass);
                }
                Op::Abs(a) => {
                    let x = &self.nodes[*a].value;
                    accumulate(&mut grads, *a, &g * &x.mapv(f64::signum));
                }
                Op::Sum(a) => {
                    let shape = self.nodes[*a].value.dim();
                    accumulate(&mut grads, *a, Array2::from_elem(shape, g[[0, 0]]));
                }
                Op::Mean(a) => {
                    let shape = self.nodes[*a].value.dim();
                    let len = (shape.0 * shape.1) as f64;
                    accumulate(&mut grads, *a, Array2::from_elem(shape, g[[0, 0]] / len));
                }
                Op::GatherRows(a, rows) => {
                    let shape = self.nodes[*a].value.dim();
                    let mut ga = Array2::zeros(shape);
                    for (out_i, &r) in rows.iter().enumerate() {
                        for c in 0..shape.1 {
                            ga[[r, c]] += g[[out_i, c]];
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SliceCols(a, start, _end) => {
                    let shape = self.nodes[*a].value.dim();
                    let mut ga = Array2::zeros(shape);
                    for r in 0..g.nrows() {
                        for c in 0..g.ncols() {
                            ga[[r, start + c]] = g[[r, c]];
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.ncols();
                        let gp = g.slice(ndarray::s![.., offset..offset + w]).to_owned();
                        accumulate(&mut grads, p, gp);
                        offset += w;
                    }
                }
                Op::SpMm(s, a) => {
                    // d/dA (S·A) pulled back: Sᵀ·G; S is symmetric here but use
                    // the transpose product for correctness either way.
                    let mut ga = Array2::zeros(self.nodes[*a].value.dim());
                    for (i, j, v) in s.iter() {
                        for c in 0..g.ncols() {
                            ga[[j, c]] += v * g[[i, c]];
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::QuadForm(s, a) => {
                    // d Tr(AᵀSA) / dA = (S + Sᵀ)A = 2SA for symmetric S.
                    let av = &self.nodes[*a].value;
                    let sa = s.matmul_dense(av);
                    let mut sta = Array2::<f64>::zeros(av.dim());
                    for (i, j, v) in s.iter() {
                        for c in 0..av.ncols() {
                            sta[[j, c]] += v * av[[i, c]];
                        }
                    }
                    let ga = (&sa + &sta).mapv(|x| x * g[[0, 0]]);
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSoftmax(a, edges) => {
                    let alpha = &self.nodes[idx].value;
                    let mut ga = Array2::zeros(alpha.dim());
                    for v in 0..edges.n_nodes {
                        let lo = edges.seg_ptr[v];
                        let hi = edges.seg_ptr[v + 1];
                        if lo == hi {
                            continue;
                        }
                        let mut dot = 0.0;
                        for k in lo..hi {
                            dot += alpha[[k, 0]] * g[[k, 0]];
                        }
                        for k in lo..hi {
                            ga[[k, 0]] = alpha[[k, 0]] * (g[[k, 0]] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::EdgeAggregate(alpha, h, edges) => {
                    let av = &self.nodes[*alpha].value;
                    let hv = &self.nodes[*h].value;
                    let d = hv.ncols();
                    let mut g_alpha = Array2::zeros(av.dim());
                    let mut g_h = Array2::zeros(hv.dim());
                    for e in 0..edges.n_edges() {
                        let (u, v) = (edges.src[e], edges.dst[e]);
                        let mut dot = 0.0;
                        for c in 0..d {
                            dot += g[[v, c]] * hv[[u, c]];
                            g_h[[u, c]] += av[[e, 0]] * g[[v, c]];
                        }
                        g_alpha[[e, 0]] = dot;
                    }
                    accumulate(&mut grads, *alpha, g_alpha);
                    accumulate(&mut grads, *h, g_h);
                }
                Op::MulMask(a, mask) => {
                    accumulate(&mut grads, *a, &g * &**mask);
                }
            }
        }
        Gradients { grads }
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], idx: usize, g: Array2<f64>) {
    match &mut grads[idx] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

/// Sum a full-shape gradient down to the (possibly broadcast) shape of the
/// operand it belongs to.
fn reduce_to_shape(g: &Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    if g.dim() == shape {
        return g.clone();
    }
    if shape == (1, 1) {
        return Array2::from_elem((1, 1), g.sum());
    }
    if shape.0 == 1 && shape.1 == g.ncols() {
        let summed = g.sum_axis(Axis(0));
        return summed.insert_axis(Axis(0));
    }
    panic!("cannot reduce gradient of shape {:?} to {:?}", g.dim(), shape);
}

fn broadcast_binary(
    a: &Array2<f64>,
    b: &Array2<f64>,
    f: impl Fn(f64, f64) -> f64,
) -> Array2<f64> {
    if a.dim() == b.dim() {
        let mut out = a.clone();
        out.zip_mut_with(b, |x, &y| *x = f(*x, y));
        return out;
    }
    let (n, m) = a.dim();
    if b.dim() == (1, 1) {
        let s = b[[0, 0]];
        return a.mapv(|x| f(x, s));
    }
    if b.dim() == (1, m) {
        let mut out = Array2::zeros((n, m));
        for r in 0..n {
            for c in 0..m {
                out[[r, c]] = f(a[[r, c]], b[[0, c]]);
            }
        }
        return out;
    }
    panic!(
        "incompatible broadcast shapes {:?} and {:?}",
        a.dim(),
        b.dim()
    );
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
