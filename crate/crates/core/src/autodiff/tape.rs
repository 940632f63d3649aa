//! Reverse-mode tape over small dense row-major matrices.
//!
//! Nodes are appended in evaluation order, so every node's parents precede it
//! and a single backward pass in reverse index order is a valid topological
//! sweep. The tape is generic over the element type: with `f64` a sweep gives
//! gradients, with [`Tangent`](super::Tangent) leaves it additionally gives the
//! directional derivative of the gradient (a Hessian-vector product).

use super::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Const,
    Slice { src: usize, offset: usize },
    /// `a · bᵀ` with `a: r×k`, `b: c×k`.
    MatMulT { a: usize, b: usize },
    /// `a + 1·biasᵀ`, bias broadcast over rows.
    AddRow { a: usize, bias: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    Scale { a: usize, c: f64 },
    Offset { a: usize },
    Square { a: usize },
    Tanh { a: usize },
    Sin { a: usize },
    Cos { a: usize },
    Relu { a: usize },
    /// `a` where `of > 0`, zero elsewhere. `of` is not differentiated.
    MaskPositive { a: usize, of: usize },
    Sum { a: usize },
    Mean { a: usize },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Const => "const",
            Op::Slice { .. } => "slice",
            Op::MatMulT { .. } => "matmul",
            Op::AddRow { .. } => "add_row",
            Op::Add { .. } => "add",
            Op::Sub { .. } => "sub",
            Op::Mul { .. } => "mul",
            Op::Scale { .. } => "scale",
            Op::Offset { .. } => "offset",
            Op::Square { .. } => "square",
            Op::Tanh { .. } => "tanh",
            Op::Sin { .. } => "sin",
            Op::Cos { .. } => "cos",
            Op::Relu { .. } => "relu",
            Op::MaskPositive { .. } => "mask",
            Op::Sum { .. } => "sum",
            Op::Mean { .. } => "mean",
        }
    }
}

struct Node<T> {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<T>,
    /// Depends on a leaf.
    active: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<T>, active: bool) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
            active,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node<T> {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    /// Primal value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let n = self.node(v);
        assert_eq!(n.value.len(), 1, "scalar() on a {}x{} node", n.rows, n.cols);
        n.value[0].value()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = self.node(v);
        (n.rows, n.cols)
    }

    pub fn is_active(&self, v: Var) -> bool {
        self.node(v).active
    }

    /// Differentiable leaf, stored as a column.
    pub fn leaf(&mut self, values: Vec<T>) -> Var {
        let n = values.len();
        self.push(Op::Leaf, n, 1, values, true)
    }

    pub fn constant(&mut self, rows: usize, cols: usize, data: &[f64]) -> Var {
        assert_eq!(data.len(), rows * cols);
        let value = data.iter().map(|&x| T::from_f64(x)).collect();
        self.push(Op::Const, rows, cols, value, false)
    }

    /// Contiguous elements of `src` reshaped to `rows × cols`.
    pub fn slice(&mut self, src: Var, offset: usize, rows: usize, cols: usize) -> Var {
        let s = self.node(src);
        assert!(offset + rows * cols <= s.value.len(), "slice out of range");
        let value = s.value[offset..offset + rows * cols].to_vec();
        let active = s.active;
        self.push(Op::Slice { src: src.0, offset }, rows, cols, value, active)
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (na, nb) = (self.node(a), self.node(b));
        assert_eq!(na.cols, nb.cols, "matmul inner dimension");
        let (r, k, c) = (na.rows, na.cols, nb.rows);
        let mut value = vec![T::zero(); r * c];
        for i in 0..r {
            let arow = &na.value[i * k..(i + 1) * k];
            for j in 0..c {
                let brow = &nb.value[j * k..(j + 1) * k];
                let mut acc = T::zero();
                for l in 0..k {
                    acc += arow[l] * brow[l];
                }
                value[i * c + j] = acc;
            }
        }
        let active = na.active || nb.active;
        self.push(Op::MatMulT { a: a.0, b: b.0 }, r, c, value, active)
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Var {
        let (na, nb) = (self.node(a), self.node(bias));
        assert_eq!(nb.value.len(), na.cols, "bias length");
        let c = na.cols;
        let value = na
            .value
            .iter()
            .enumerate()
            .map(|(i, &x)| x + nb.value[i % c])
            .collect();
        let (r, active) = (na.rows, na.active || nb.active);
        self.push(Op::AddRow { a: a.0, bias: bias.0 }, r, c, value, active)
    }

    fn binary(&mut self, op: Op, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Var {
        let (na, nb) = (self.node(a), self.node(b));
        assert_eq!(
            (na.rows, na.cols),
            (nb.rows, nb.cols),
            "elementwise {} shape mismatch",
            op.name()
        );
        let value = na.value.iter().zip(&nb.value).map(|(&x, &y)| f(x, y)).collect();
        let (r, c, active) = (na.rows, na.cols, na.active || nb.active);
        self.push(op, r, c, value, active)
    }

    fn unary(&mut self, op: Op, a: Var, f: impl Fn(T) -> T) -> Var {
        let na = self.node(a);
        let value = na.value.iter().map(|&x| f(x)).collect();
        let (r, c, active) = (na.rows, na.cols, na.active);
        self.push(op, r, c, value, active)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Add { a: a.0, b: b.0 }, a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Sub { a: a.0, b: b.0 }, a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Mul { a: a.0, b: b.0 }, a, b, |x, y| x * y)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.unary(Op::Scale { a: a.0, c }, a, |x| x.scale(c))
    }

    /// `a + c`
    pub fn offset(&mut self, a: Var, c: f64) -> Var {
        self.unary(Op::Offset { a: a.0 }, a, |x| x + T::from_f64(c))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(Op::Square { a: a.0 }, a, |x| x * x)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Op::Tanh { a: a.0 }, a, T::tanh)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(Op::Sin { a: a.0 }, a, T::sin)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(Op::Cos { a: a.0 }, a, T::cos)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Op::Relu { a: a.0 }, a, T::relu)
    }

    pub fn mask_positive(&mut self, a: Var, of: Var) -> Var {
        let (na, nm) = (self.node(a), self.node(of));
        assert_eq!(na.value.len(), nm.value.len(), "mask shape");
        let value = na
            .value
            .iter()
            .zip(&nm.value)
            .map(|(&x, &m)| if m.value() > 0.0 { x } else { T::zero() })
            .collect();
        let (r, c, active) = (na.rows, na.cols, na.active);
        self.push(Op::MaskPositive { a: a.0, of: of.0 }, r, c, value, active)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let na = self.node(a);
        let mut acc = T::zero();
        for &x in &na.value {
            acc += x;
        }
        let active = na.active;
        self.push(Op::Sum { a: a.0 }, 1, 1, vec![acc], active)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let na = self.node(a);
        let n = na.value.len();
        assert!(n > 0, "mean of empty node");
        let mut acc = T::zero();
        for &x in &na.value {
            acc += x;
        }
        let active = na.active;
        self.push(Op::Mean { a: a.0 }, 1, 1, vec![acc.scale(1.0 / n as f64)], active)
    }

    /// First node (in evaluation order) holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<(usize, &'static str)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| n.value.iter().any(|x| !x.is_finite()))
            .map(|(i, n)| (i, n.op.name()))
    }

    /// Reverse sweep from a 1×1 `output`; returns ∂output/∂`wrt`.
    pub fn gradient(&self, output: Var, wrt: Var) -> Vec<T> {
        assert_eq!(self.node(output).value.len(), 1, "output must be scalar");
        let n = output.0 + 1;
        let mut adj: Vec<Option<Vec<T>>> = (0..n).map(|_| None).collect();
        adj[output.0] = Some(vec![T::from_f64(1.0)]);
        let mut result = None;

        for i in (0..n).rev() {
            let Some(g) = adj[i].take() else { continue };
            if i == wrt.0 {
                result = Some(g);
                break;
            }
            let node = &self.nodes[i];
            match node.op {
                Op::Leaf | Op::Const => {}
                Op::Slice { src, offset } => {
                    if let Some(d) = self.adjoint(&mut adj, src) {
                        for (d, &g) in d[offset..offset + g.len()].iter_mut().zip(&g) {
                            *d += g;
                        }
                    }
                }
                Op::MatMulT { a, b } => {
                    let (na, nb) = (&self.nodes[a], &self.nodes[b]);
                    let (r, k, c) = (na.rows, na.cols, nb.rows);
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for i in 0..r {
                            let drow = &mut da[i * k..(i + 1) * k];
                            for j in 0..c {
                                let gij = g[i * c + j];
                                let brow = &nb.value[j * k..(j + 1) * k];
                                for l in 0..k {
                                    drow[l] += gij * brow[l];
                                }
                            }
                        }
                    }
                    if let Some(db) = self.adjoint(&mut adj, b) {
                        for i in 0..r {
                            let arow = &na.value[i * k..(i + 1) * k];
                            for j in 0..c {
                                let gij = g[i * c + j];
                                let drow = &mut db[j * k..(j + 1) * k];
                                for l in 0..k {
                                    drow[l] += gij * arow[l];
                                }
                            }
                        }
                    }
                }
                Op::AddRow { a, bias } => {
                    let c = node.cols;
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        add_into(da, &g);
                    }
                    if let Some(db) = self.adjoint(&mut adj, bias) {
                        for (idx, &x) in g.iter().enumerate() {
                            db[idx % c] += x;
                        }
                    }
                }
                Op::Add { a, b } => {
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        add_into(da, &g);
                    }
                    if let Some(db) = self.adjoint(&mut adj, b) {
                        add_into(db, &g);
                    }
                }
                Op::Sub { a, b } => {
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        add_into(da, &g);
                    }
                    if let Some(db) = self.adjoint(&mut adj, b) {
                        for (d, &x) in db.iter_mut().zip(&g) {
                            *d -= x;
                        }
                    }
                }
                Op::Mul { a, b } => {
                    let (va, vb) = (&self.nodes[a].value, &self.nodes[b].value);
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for ((d, &x), &y) in da.iter_mut().zip(&g).zip(vb) {
                            *d += x * y;
                        }
                    }
                    if let Some(db) = self.adjoint(&mut adj, b) {
                        for ((d, &x), &y) in db.iter_mut().zip(&g).zip(va) {
                            *d += x * y;
                        }
                    }
                }
                Op::Scale { a, c } => {
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for (d, &x) in da.iter_mut().zip(&g) {
                            *d += x.scale(c);
                        }
                    }
                }
                Op::Offset { a, .. } => {
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        add_into(da, &g);
                    }
                }
                Op::Square { a } => {
                    let va = &self.nodes[a].value;
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for ((d, &x), &y) in da.iter_mut().zip(&g).zip(va) {
                            *d += (x * y).scale(2.0);
                        }
                    }
                }
                Op::Tanh { a } => {
                    let y = &node.value;
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        let one = T::from_f64(1.0);
                        for ((d, &x), &y) in da.iter_mut().zip(&g).zip(y) {
                            *d += x * (one - y * y);
                        }
                    }
                }
                Op::Sin { a } => {
                    let va = &self.nodes[a].value;
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for ((d, &x), &y) in da.iter_mut().zip(&g).zip(va) {
                            *d += x * y.cos();
                        }
                    }
                }
                Op::Cos { a } => {
                    let va = &self.nodes[a].value;
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for ((d, &x), &y) in da.iter_mut().zip(&g).zip(va) {
                            *d -= x * y.sin();
                        }
                    }
                }
                Op::Relu { a } => {
                    let va = &self.nodes[a].value;
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for ((d, &x), &y) in da.iter_mut().zip(&g).zip(va) {
                            if y.value() > 0.0 {
                                *d += x;
                            }
                        }
                    }
                }
                Op::MaskPositive { a, of } => {
                    let vm = &self.nodes[of].value;
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for ((d, &x), &m) in da.iter_mut().zip(&g).zip(vm) {
                            if m.value() > 0.0 {
                                *d += x;
                            }
                        }
                    }
                }
                Op::Sum { a } => {
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for d in da.iter_mut() {
                            *d += g[0];
                        }
                    }
                }
                Op::Mean { a } => {
                    let len = self.nodes[a].value.len();
                    let s = g[0].scale(1.0 / len as f64);
                    if let Some(da) = self.adjoint(&mut adj, a) {
                        for d in da.iter_mut() {
                            *d += s;
                        }
                    }
                }
            }
        }
        result.unwrap_or_else(|| vec![T::zero(); self.nodes[wrt.0].value.len()])
    }

    fn adjoint<'a>(&self, adj: &'a mut [Option<Vec<T>>], idx: usize) -> Option<&'a mut Vec<T>> {
        let node = &self.nodes[idx];
        if !node.active {
            return None;
        }
        Some(adj[idx].get_or_insert_with(|| vec![T::zero(); node.value.len()]))
    }
}

#[inline]
fn add_into<T: Scalar>(d: &mut [T], g: &[T]) {
    for (d, &x) in d.iter_mut().zip(g) {
        *d += x;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parents_precede_children() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(vec![1.0, 2.0]);
        let y = t.square(x);
        let s = t.sum(y);
        assert!(x.index() < y.index() && y.index() < s.index());
    }

    #[test]
    fn matmul_gradient_matches_hand_calculation() {
        // f = sum(A·Bᵀ) with A = leaf (2×3), B const (2×3) -> df/dA_il = Σ_j B_jl
        let mut t = Tape::<f64>::new();
        let a = t.leaf(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let a = t.slice(a, 0, 2, 3);
        let b = t.constant(2, 3, &[1.0, 0.5, -1.0, 2.0, 0.0, 3.0]);
        let p = t.matmul_t(a, b);
        assert_eq!(t.value(p), &[1.0 + 1.0 - 3.0, 2.0 + 9.0, 4.0 + 2.5 - 6.0, 8.0 + 18.0]);
        let s = t.sum(p);
        let g = t.gradient(s, Var(0));
        assert_eq!(g, vec![3.0, 0.5, 2.0, 3.0, 0.5, 2.0]);
    }

    #[test]
    fn inactive_branches_get_no_adjoint() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(vec![3.0]);
        let c = t.constant(1, 1, &[2.0]);
        let cc = t.square(c);
        assert!(!t.is_active(cc));
        let y = t.mul(x, cc);
        let g = t.gradient(y, x);
        assert_eq!(g, vec![4.0]);
    }

    #[test]
    fn reports_first_non_finite_node() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(vec![1.0]);
        let y = t.scale(x, f64::INFINITY);
        let _ = t.sub(y, y);
        assert_eq!(t.first_non_finite(), Some((1, "scale")));
    }
}
