//! Exact derivatives in double precision: reverse-mode gradients, taped
//! input-derivative jets and forward-over-reverse Hessian-vector products.

mod jet;
mod param;
mod scalar;
mod tape;

pub use jet::Jet;
pub use param::{Block, BlockKind, Layout, ParamVector};
pub use scalar::{DualScalar, Scalar, Tangent};
pub use tape::{Tape, Var};

pub(crate) use param::dot;

use crate::error::{Error, Result};

/// A scalar function of the parameters that can record itself on a tape.
///
/// `theta` is a leaf column holding the full parameter vector.
pub trait ScalarLoss {
    fn record<T: Scalar>(&self, tape: &mut Tape<T>, theta: Var) -> Result<Var>;
}

fn check_tape<T: Scalar>(tape: &Tape<T>) -> Result<()> {
    match tape.first_non_finite() {
        Some((node, op)) => Err(Error::NonFinite { node, op }),
        None => Ok(()),
    }
}

/// `L(θ)` without a backward sweep.
pub fn value<L: ScalarLoss + ?Sized>(loss: &L, theta: &ParamVector) -> Result<f64> {
    let mut tape = Tape::<f64>::new();
    let th = tape.leaf(theta.as_slice().to_vec());
    let out = loss.record(&mut tape, th)?;
    check_tape(&tape)?;
    Ok(tape.scalar(out))
}

/// `(L(θ), ∇L(θ))`.
pub fn grad<L: ScalarLoss + ?Sized>(loss: &L, theta: &ParamVector) -> Result<(f64, ParamVector)> {
    let mut tape = Tape::<f64>::new();
    let th = tape.leaf(theta.as_slice().to_vec());
    let out = loss.record(&mut tape, th)?;
    check_tape(&tape)?;
    let g = tape.gradient(out, th);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            node: th.index(),
            op: "gradient",
        });
    }
    Ok((tape.scalar(out), theta.with_data(g)?))
}

/// `∇²L(θ)·v`, the derivative of the gradient along `v`.
pub fn hvp<L: ScalarLoss + ?Sized>(
    loss: &L,
    theta: &ParamVector,
    v: &ParamVector,
) -> Result<ParamVector> {
    theta.check_layout(v)?;
    let mut tape = Tape::<Tangent>::new();
    let seed = theta
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(&x, &t)| Tangent::new(x, t))
        .collect();
    let th = tape.leaf(seed);
    let out = loss.record(&mut tape, th)?;
    check_tape(&tape)?;
    let g = tape.gradient(out, th);
    let hv: Vec<f64> = g.iter().map(|x| x.t).collect();
    if hv.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            node: th.index(),
            op: "hvp",
        });
    }
    theta.with_data(hv)
}
