//! Taped second-order Taylor jets with respect to network inputs.
//!
//! A [`Jet`] carries, for a batch of points, the value of a hidden layer and
//! its first and second derivatives along a set of input axes. Every component
//! is a tape node, so PDE residuals assembled from a jet stay differentiable
//! with respect to the parameters. This is the tape-level counterpart of
//! [`DualScalar`](super::DualScalar), with one `(d1, d2)` pair per axis.

use super::scalar::Scalar;
use super::tape::{Tape, Var};

#[derive(Clone, Debug)]
pub struct Jet {
    /// `rows × width`
    pub value: Var,
    /// `∂/∂x_a` per requested axis.
    pub d1: Vec<Var>,
    /// `∂²/∂x_a²` per requested axis; `None` is identically zero.
    pub d2: Vec<Option<Var>>,
}

impl Jet {
    /// Seeds the independent variables: `x` is `rows × dim`, row-major.
    pub fn input<T: Scalar>(tape: &mut Tape<T>, x: &[f64], dim: usize, axes: &[usize]) -> Self {
        let rows = x.len() / dim;
        let value = tape.constant(rows, dim, x);
        let d1 = axes
            .iter()
            .map(|&a| {
                let mut e = vec![0.0; rows * dim];
                for r in 0..rows {
                    e[r * dim + a] = 1.0;
                }
                tape.constant(rows, dim, &e)
            })
            .collect();
        Self {
            value,
            d1,
            d2: vec![None; axes.len()],
        }
    }

    pub fn axes(&self) -> usize {
        self.d1.len()
    }

    /// `x·Wᵀ (+ b)`; derivative parts are transformed linearly, without bias.
    pub fn affine<T: Scalar>(&self, tape: &mut Tape<T>, w: Var, b: Option<Var>) -> Self {
        let mut value = tape.matmul_t(self.value, w);
        if let Some(b) = b {
            value = tape.add_row(value, b);
        }
        let d1 = self.d1.iter().map(|&d| tape.matmul_t(d, w)).collect();
        let d2 = self
            .d2
            .iter()
            .map(|d| d.map(|d| tape.matmul_t(d, w)))
            .collect();
        Self { value, d1, d2 }
    }

    pub fn scale<T: Scalar>(&self, tape: &mut Tape<T>, c: f64) -> Self {
        Self {
            value: tape.scale(self.value, c),
            d1: self.d1.iter().map(|&d| tape.scale(d, c)).collect(),
            d2: self.d2.iter().map(|d| d.map(|d| tape.scale(d, c))).collect(),
        }
    }

    /// `t = tanh(z)`, `t' = s·z'`, `t'' = s·z'' − 2·t·s·z'²` with `s = 1 − t²`.
    pub fn tanh<T: Scalar>(&self, tape: &mut Tape<T>, order: usize) -> Self {
        let t = tape.tanh(self.value);
        let t2 = tape.square(t);
        let neg = tape.scale(t2, -1.0);
        let s = tape.offset(neg, 1.0);
        let ts = if order >= 2 { Some(tape.mul(t, s)) } else { None };
        let mut d1 = Vec::with_capacity(self.axes());
        let mut d2 = Vec::with_capacity(self.axes());
        for (&zd1, &zd2) in self.d1.iter().zip(&self.d2) {
            d1.push(tape.mul(s, zd1));
            if let Some(ts) = ts {
                let sq = tape.square(zd1);
                let curv = tape.mul(ts, sq);
                let curv = tape.scale(curv, -2.0);
                d2.push(Some(match zd2 {
                    Some(zd2) => {
                        let lin = tape.mul(s, zd2);
                        tape.add(lin, curv)
                    }
                    None => curv,
                }));
            } else {
                d2.push(None);
            }
        }
        Self { value: t, d1, d2 }
    }

    /// First-order only; ReLU has no second derivative.
    pub fn relu<T: Scalar>(&self, tape: &mut Tape<T>) -> Self {
        let value = tape.relu(self.value);
        let d1 = self
            .d1
            .iter()
            .map(|&d| tape.mask_positive(d, self.value))
            .collect();
        Self {
            value,
            d1,
            d2: vec![None; self.axes()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::DualScalar;

    #[test]
    fn two_layer_jet_matches_dual_scalars() {
        // u(x, y) = v·tanh(W·(x, y) + b) with hand-picked weights
        let w = [0.7, -1.3, 0.4, 0.9, -0.2, 1.1];
        let b = [0.1, -0.3, 0.25];
        let v = [1.5, -0.6, 0.8];
        let pts = [0.3, -0.4, 1.2, 0.5];

        let mut tape = Tape::<f64>::new();
        let wv = tape.constant(3, 2, &w);
        let bv = tape.constant(1, 3, &b);
        let vv = tape.constant(1, 3, &v);
        let jet = Jet::input(&mut tape, &pts, 2, &[0, 1]);
        let h = jet.affine(&mut tape, wv, Some(bv)).tanh(&mut tape, 2);
        let u = h.affine(&mut tape, vv, None);

        for axis in 0..2 {
            for p in 0..2 {
                let mut x = [DualScalar::constant(pts[2 * p]), DualScalar::constant(pts[2 * p + 1])];
                x[axis] = DualScalar::variable(pts[2 * p + axis]);
                let mut out = DualScalar::constant(0.0);
                for r in 0..3 {
                    let z = x[0].scale(w[2 * r]) + x[1].scale(w[2 * r + 1]) + DualScalar::constant(b[r]);
                    out += z.tanh().scale(v[r]);
                }
                assert!((tape.value(u.value)[p] - out.value).abs() < 1e-15);
                assert!((tape.value(u.d1[axis])[p] - out.d1).abs() < 1e-14);
                let d2 = tape.value(u.d2[axis].unwrap())[p];
                assert!((d2 - out.d2).abs() < 1e-14, "{d2} vs {}", out.d2);
            }
        }
    }
}
