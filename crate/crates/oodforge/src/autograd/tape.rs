use std::collections::BTreeMap;

use super::linalg;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub type NodeId = usize;

/// Primitive operations the tape can record. Shapes are fixed when a node is
/// pushed, so every structural error surfaces at graph-construction time with
/// the offending node named in the panic message.
#[derive(Clone, Debug)]
enum Op {
    /// Named input slot; its value is supplied through [`Bindings`] at
    /// forward time.
    Leaf { name: String },
    /// Value baked into the graph (label masks and the like). Not a leaf:
    /// it cannot be rebound and never receives a gradient.
    Const(Tensor),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// `(N x K) + (1 x K)` broadcast over rows.
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Relu(NodeId),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    Exp(NodeId),
    Ln(NodeId),
    /// Log-softmax over the last axis, computed with max subtraction.
    LogSoftmax(NodeId),
    Neg(NodeId),
    Square(NodeId),
    AddScalar(NodeId, f64),
    MulScalar(NodeId, f64),
    Clamp(NodeId, f64, f64),
    SumAll(NodeId),
    MeanAll(NodeId),
    /// `(N x K) -> (N x 1)` sum over the last axis.
    RowSum(NodeId),
    Transpose(NodeId),
}

impl Op {
    fn kind(&self) -> &'static str {
        match self {
            Op::Leaf { .. } => "leaf",
            Op::Const(_) => "const",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::AddRow(..) => "add_row",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Relu(_) => "relu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::Exp(_) => "exp",
            Op::Ln(_) => "ln",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Neg(_) => "neg",
            Op::Square(_) => "square",
            Op::AddScalar(..) => "add_scalar",
            Op::MulScalar(..) => "mul_scalar",
            Op::Clamp(..) => "clamp",
            Op::SumAll(_) => "sum_all",
            Op::MeanAll(_) => "mean_all",
            Op::RowSum(_) => "row_sum",
            Op::Transpose(_) => "transpose",
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
}

/// Reverse-mode gradient flavor. `GuidedRelu` applies the guided
/// backpropagation rule at ReLU nodes: the gradient passes only where both
/// the activation and the incoming gradient are positive. All other node
/// kinds backpropagate as usual.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackwardMode {
    Standard,
    GuidedRelu,
}

/// Leaf-name to tensor map used to run a recorded tape.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    map: BTreeMap<String, Tensor>,
}

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn set(&mut self, name: impl Into<String>, value: Tensor) -> &mut Self {
        self.map.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }
}

/// Cached forward outputs, one per node. Produced by [`Tape::forward`] and
/// consumed immutably by [`Tape::backward`], so several backward passes
/// (standard and guided) can reuse one forward.
#[derive(Clone, Debug)]
pub struct Values {
    outputs: Vec<Tensor>,
}

impl Values {
    pub fn output(&self, id: NodeId) -> &Tensor {
        &self.outputs[id]
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Gradients of a scalar root with respect to requested leaves, keyed by
/// leaf name. A leaf that does not influence the root gets an explicit zero
/// tensor, so every requested leaf appears exactly once.
#[derive(Clone, Debug)]
pub struct Gradients {
    map: BTreeMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> &Tensor {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("gradient for leaf '{name}' was not requested"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// A recorded computation graph over the primitive set.
///
/// Nodes are appended in topological order (operands always precede
/// consumers). The tape itself is immutable once built: `forward` returns the
/// cached outputs as a separate [`Values`] object instead of mutating the
/// tape, which keeps a tape shareable across threads over immutable
/// parameter snapshots.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    leaves: BTreeMap<String, NodeId>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_shape(&self, id: NodeId) -> (usize, usize) {
        (self.nodes[id].rows, self.nodes[id].cols)
    }

    pub fn leaf_id(&self, name: &str) -> Option<NodeId> {
        self.leaves.get(name).copied()
    }

    pub fn leaf_names(&self) -> impl Iterator<Item = &str> {
        self.leaves.keys().map(String::as_str)
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node { op, rows, cols });
        id
    }

    fn shape_of(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id];
        (n.rows, n.cols)
    }

    /// Declare a named input slot of fixed shape. Names must be unique.
    pub fn leaf(&mut self, name: &str, rows: usize, cols: usize) -> NodeId {
        assert!(
            !self.leaves.contains_key(name),
            "leaf '{name}' declared twice on the same tape"
        );
        let id = self.push(Op::Leaf { name: name.to_string() }, rows, cols);
        self.leaves.insert(name.to_string(), id);
        id
    }

    /// Embed a fixed tensor (e.g. a one-hot label mask) into the graph.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        let (rows, cols) = value.shape();
        self.push(Op::Const(value), rows, cols)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        let (k2, m) = self.shape_of(b);
        assert!(
            k == k2,
            "node {} (matmul): inner dims differ, {n}x{k} * {k2}x{m}",
            self.nodes.len()
        );
        self.push(Op::MatMul(a, b), n, m)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.require_same_shape("add", a, b);
        self.push(Op::Add(a, b), shape.0, shape.1)
    }

    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        let (br, bk) = self.shape_of(b);
        assert!(
            br == 1 && bk == k,
            "node {} (add_row): cannot broadcast {br}x{bk} onto {n}x{k}",
            self.nodes.len()
        );
        self.push(Op::AddRow(a, b), n, k)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.require_same_shape("mul", a, b);
        self.push(Op::Mul(a, b), shape.0, shape.1)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let shape = self.require_same_shape("div", a, b);
        self.push(Op::Div(a, b), shape.0, shape.1)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::Relu(a), n, k)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::LeakyRelu(a, slope), n, k)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::Sigmoid(a), n, k)
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::Exp(a), n, k)
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::Ln(a), n, k)
    }

    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        assert!(k >= 1, "node {} (log_softmax): empty rows", self.nodes.len());
        self.push(Op::LogSoftmax(a), n, k)
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::Neg(a), n, k)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::Square(a), n, k)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::AddScalar(a, c), n, k)
    }

    pub fn mul_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::MulScalar(a, c), n, k)
    }

    /// Clamp to `[lo, hi]`; backward passes the gradient only strictly
    /// inside the interval.
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        assert!(lo < hi, "node {} (clamp): lo {lo} >= hi {hi}", self.nodes.len());
        let (n, k) = self.shape_of(a);
        self.push(Op::Clamp(a, lo, hi), n, k)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        self.require_non_empty("sum_all", a);
        self.push(Op::SumAll(a), 1, 1)
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        self.require_non_empty("mean_all", a);
        self.push(Op::MeanAll(a), 1, 1)
    }

    pub fn row_sum(&mut self, a: NodeId) -> NodeId {
        let (n, _) = self.shape_of(a);
        self.require_non_empty("row_sum", a);
        self.push(Op::RowSum(a), n, 1)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let (n, k) = self.shape_of(a);
        self.push(Op::Transpose(a), k, n)
    }

    fn require_same_shape(&self, what: &str, a: NodeId, b: NodeId) -> (usize, usize) {
        let sa = self.shape_of(a);
        let sb = self.shape_of(b);
        assert!(
            sa == sb,
            "node {} ({what}): shape {}x{} vs {}x{}",
            self.nodes.len(),
            sa.0,
            sa.1,
            sb.0,
            sb.1
        );
        sa
    }

    fn require_non_empty(&self, what: &str, a: NodeId) {
        let (n, k) = self.shape_of(a);
        assert!(
            n * k > 0,
            "node {} ({what}): reduction over empty {n}x{k} operand",
            self.nodes.len()
        );
    }

    /// Run the graph. Every leaf must be bound with a tensor of its declared
    /// shape; the result caches one output tensor per node.
    pub fn forward(&self, bindings: &Bindings) -> Result<Values> {
        let mut outputs: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for (id, node) in self.nodes.iter().enumerate() {
            let out = match &node.op {
                Op::Leaf { name } => {
                    let t = bindings.get(name).ok_or_else(|| {
                        Error::Config(format!("unbound leaf '{name}' (node {id})"))
                    })?;
                    if t.shape() != (node.rows, node.cols) {
                        return Err(Error::Config(format!(
                            "leaf '{name}' (node {id}) declared {}x{} but bound {}x{}",
                            node.rows,
                            node.cols,
                            t.rows(),
                            t.cols()
                        )));
                    }
                    t.clone()
                }
                Op::Const(t) => t.clone(),
                Op::MatMul(a, b) => {
                    let (n, k) = outputs[*a].shape();
                    let m = outputs[*b].cols();
                    let mut out = vec![0.0; n * m];
                    linalg::mat_mul(outputs[*a].values(), outputs[*b].values(), n, k, m, &mut out);
                    Tensor::from_raw(n, m, out)
                }
                Op::Add(a, b) => zip_map(&outputs[*a], &outputs[*b], |x, y| x + y),
                Op::AddRow(a, b) => {
                    let t = &outputs[*a];
                    let row = outputs[*b].values();
                    let k = t.cols();
                    let vals = t
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(i, v)| v + row[i % k])
                        .collect();
                    Tensor::from_raw(t.rows(), t.cols(), vals)
                }
                Op::Mul(a, b) => zip_map(&outputs[*a], &outputs[*b], |x, y| x * y),
                Op::Div(a, b) => zip_map(&outputs[*a], &outputs[*b], |x, y| x / y),
                Op::Relu(a) => map(&outputs[*a], |x| x.max(0.0)),
                Op::LeakyRelu(a, s) => {
                    let s = *s;
                    map(&outputs[*a], move |x| if x > 0.0 { x } else { s * x })
                }
                Op::Sigmoid(a) => map(&outputs[*a], sigmoid),
                Op::Exp(a) => map(&outputs[*a], f64::exp),
                Op::Ln(a) => map(&outputs[*a], f64::ln),
                Op::LogSoftmax(a) => log_softmax_forward(&outputs[*a]),
                Op::Neg(a) => map(&outputs[*a], |x| -x),
                Op::Square(a) => map(&outputs[*a], |x| x * x),
                Op::AddScalar(a, c) => {
                    let c = *c;
                    map(&outputs[*a], move |x| x + c)
                }
                Op::MulScalar(a, c) => {
                    let c = *c;
                    map(&outputs[*a], move |x| x * c)
                }
                Op::Clamp(a, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    map(&outputs[*a], move |x| x.clamp(lo, hi))
                }
                Op::SumAll(a) => Tensor::scalar(outputs[*a].values().iter().sum()),
                Op::MeanAll(a) => {
                    let t = &outputs[*a];
                    Tensor::scalar(t.values().iter().sum::<f64>() / t.len() as f64)
                }
                Op::RowSum(a) => {
                    let t = &outputs[*a];
                    let vals = (0..t.rows())
                        .map(|r| t.row_slice(r).iter().sum())
                        .collect();
                    Tensor::from_raw(t.rows(), 1, vals)
                }
                Op::Transpose(a) => outputs[*a].transposed(),
            };
            outputs.push(out);
        }
        Ok(Values { outputs })
    }

    /// Reverse-mode gradients of the scalar node `root` with respect to the
    /// named leaves. `values` must come from a forward pass over this tape.
    pub fn backward(
        &self,
        values: &Values,
        root: NodeId,
        leaves: &[&str],
        mode: BackwardMode,
    ) -> Result<Gradients> {
        assert_eq!(
            values.len(),
            self.nodes.len(),
            "values do not match this tape (forward another graph?)"
        );
        let root_node = &self.nodes[root];
        if root_node.rows * root_node.cols != 1 {
            return Err(Error::Config(format!(
                "backward root must be scalar; node {root} ({}) is {}x{}",
                root_node.op.kind(),
                root_node.rows,
                root_node.cols
            )));
        }
        for name in leaves {
            if !self.leaves.contains_key(*name) {
                return Err(Error::Config(format!("unknown leaf '{name}' requested")));
            }
        }

        let mut adjoints: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        adjoints[root] = Some(vec![1.0]);

        for id in (0..=root).rev() {
            let grad = match adjoints[id].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf { name } => {
                    // Keep the accumulated gradient for extraction below.
                    adjoints[id] = Some(grad);
                    let _ = name;
                    continue;
                }
                Op::Const(_) => continue,
                Op::MatMul(a, b) => {
                    let (n, k) = values.output(*a).shape();
                    let m = values.output(*b).cols();
                    {
                        let da = ensure(&mut adjoints, *a, n * k);
                        linalg::mat_mul_nt_acc(&grad, values.output(*b).values(), n, m, k, da);
                    }
                    let db = ensure(&mut adjoints, *b, k * m);
                    linalg::mat_mul_tn_acc(values.output(*a).values(), &grad, n, k, m, db);
                }
                Op::Add(a, b) => {
                    acc(&mut adjoints, *a, grad.iter().copied());
                    acc(&mut adjoints, *b, grad.iter().copied());
                }
                Op::AddRow(a, b) => {
                    let k = self.nodes[*b].cols;
                    acc(&mut adjoints, *a, grad.iter().copied());
                    let db = ensure(&mut adjoints, *b, k);
                    for (i, g) in grad.iter().enumerate() {
                        db[i % k] += g;
                    }
                }
                Op::Mul(a, b) => {
                    let av = values.output(*a).values();
                    let bv = values.output(*b).values();
                    acc(&mut adjoints, *a, grad.iter().zip(bv).map(|(g, y)| g * y));
                    acc(&mut adjoints, *b, grad.iter().zip(av).map(|(g, x)| g * x));
                }
                Op::Div(a, b) => {
                    let bv = values.output(*b).values();
                    let yv = values.output(id).values();
                    acc(&mut adjoints, *a, grad.iter().zip(bv).map(|(g, y)| g / y));
                    acc(
                        &mut adjoints,
                        *b,
                        grad.iter()
                            .zip(yv.iter().zip(bv))
                            .map(|(g, (q, y))| -g * q / y),
                    );
                }
                Op::Relu(a) => {
                    let xv = values.output(*a).values();
                    match mode {
                        BackwardMode::Standard => acc(
                            &mut adjoints,
                            *a,
                            grad.iter()
                                .zip(xv)
                                .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 }),
                        ),
                        // Guided rule: pass only where activation AND incoming
                        // gradient are positive.
                        BackwardMode::GuidedRelu => acc(
                            &mut adjoints,
                            *a,
                            grad.iter()
                                .zip(xv)
                                .map(|(g, x)| if *x > 0.0 && *g > 0.0 { *g } else { 0.0 }),
                        ),
                    }
                }
                Op::LeakyRelu(a, s) => {
                    let s = *s;
                    let xv = values.output(*a).values();
                    acc(
                        &mut adjoints,
                        *a,
                        grad.iter()
                            .zip(xv)
                            .map(move |(g, x)| if *x > 0.0 { *g } else { s * g }),
                    );
                }
                Op::Sigmoid(a) => {
                    let yv = values.output(id).values();
                    acc(
                        &mut adjoints,
                        *a,
                        grad.iter().zip(yv).map(|(g, y)| g * y * (1.0 - y)),
                    );
                }
                Op::Exp(a) => {
                    let yv = values.output(id).values();
                    acc(&mut adjoints, *a, grad.iter().zip(yv).map(|(g, y)| g * y));
                }
                Op::Ln(a) => {
                    let xv = values.output(*a).values();
                    acc(&mut adjoints, *a, grad.iter().zip(xv).map(|(g, x)| g / x));
                }
                Op::LogSoftmax(a) => {
                    let y = values.output(id);
                    let (n, k) = y.shape();
                    let da = ensure(&mut adjoints, *a, n * k);
                    for r in 0..n {
                        let g_row = &grad[r * k..(r + 1) * k];
                        let y_row = y.row_slice(r);
                        let g_sum: f64 = g_row.iter().sum();
                        let d_row = &mut da[r * k..(r + 1) * k];
                        for ((d, g), y) in d_row.iter_mut().zip(g_row).zip(y_row) {
                            *d += g - y.exp() * g_sum;
                        }
                    }
                }
                Op::Neg(a) => acc(&mut adjoints, *a, grad.iter().map(|g| -g)),
                Op::Square(a) => {
                    let xv = values.output(*a).values();
                    acc(
                        &mut adjoints,
                        *a,
                        grad.iter().zip(xv).map(|(g, x)| 2.0 * x * g),
                    );
                }
                Op::AddScalar(a, _) => acc(&mut adjoints, *a, grad.iter().copied()),
                Op::MulScalar(a, c) => {
                    let c = *c;
                    acc(&mut adjoints, *a, grad.iter().map(move |g| c * g));
                }
                Op::Clamp(a, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    let xv = values.output(*a).values();
                    acc(
                        &mut adjoints,
                        *a,
                        grad.iter()
                            .zip(xv)
                            .map(move |(g, x)| if *x > lo && *x < hi { *g } else { 0.0 }),
                    );
                }
                Op::SumAll(a) => {
                    let len = values.output(*a).len();
                    let g = grad[0];
                    acc(&mut adjoints, *a, std::iter::repeat(g).take(len));
                }
                Op::MeanAll(a) => {
                    let len = values.output(*a).len();
                    let g = grad[0] / len as f64;
                    acc(&mut adjoints, *a, std::iter::repeat(g).take(len));
                }
                Op::RowSum(a) => {
                    let (n, k) = values.output(*a).shape();
                    let da = ensure(&mut adjoints, *a, n * k);
                    for r in 0..n {
                        let g = grad[r];
                        for d in &mut da[r * k..(r + 1) * k] {
                            *d += g;
                        }
                    }
                }
                Op::Transpose(a) => {
                    let (n, k) = values.output(*a).shape();
                    // grad has shape (k, n); transpose it back.
                    let da = ensure(&mut adjoints, *a, n * k);
                    for r in 0..k {
                        for c in 0..n {
                            da[c * k + r] += grad[r * n + c];
                        }
                    }
                }
            }
        }

        let mut map = BTreeMap::new();
        for name in leaves {
            let id = self.leaves[*name];
            let (rows, cols) = self.shape_of(id);
            let tensor = match adjoints[id].take() {
                Some(v) => Tensor::from_raw(rows, cols, v),
                None => Tensor::zeros(rows, cols),
            };
            map.insert((*name).to_string(), tensor);
        }
        Ok(Gradients { map })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_raw(t.rows(), t.cols(), t.values().iter().map(|&x| f(x)).collect())
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let vals = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Tensor::from_raw(a.rows(), a.cols(), vals)
}

/// Log probabilities over the last axis with max subtraction, so rows stay
/// finite for logits up to magnitudes far beyond anything training produces.
fn log_softmax_forward(t: &Tensor) -> Tensor {
    let (n, k) = t.shape();
    let mut out = vec![0.0; n * k];
    for r in 0..n {
        let row = t.row_slice(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (o, v) in out[r * k..(r + 1) * k].iter_mut().zip(row) {
            *o = v - max - log_sum;
        }
    }
    Tensor::from_raw(n, k, out)
}

fn ensure(adjoints: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    adjoints[id].get_or_insert_with(|| vec![0.0; len])
}

fn acc(adjoints: &mut [Option<Vec<f64>>], id: NodeId, contrib: impl Iterator<Item = f64>) {
    match &mut adjoints[id] {
        Some(existing) => {
            for (e, c) in existing.iter_mut().zip(contrib) {
                *e += c;
            }
        }
        slot => {
            *slot = Some(contrib.collect());
        }
    }
}
