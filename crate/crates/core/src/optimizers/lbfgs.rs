use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::autodiff::{dot, ParamVector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LbfgsOptions {
    pub history: usize,
    pub max_iters: usize,
    /// Stop when `‖∇f‖ < tolerance`.
    pub tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            history: 10,
            max_iters: 100,
            tolerance: 1e-10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsReport {
    /// The converged point, else the best point seen.
    pub theta: ParamVector,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub line_search_failed: bool,
}

/// One evaluated point.
#[derive(Clone, Debug)]
pub struct Point {
    pub x: ParamVector,
    pub f: f64,
    pub g: ParamVector,
}

/// L-BFGS direction memory and strong-Wolfe line search, usable one
/// iteration at a time.
#[derive(Clone, Debug)]
pub struct Lbfgs {
    pub opts: LbfgsOptions,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    pub evaluations: usize,
}

/// Evaluations that produce non-finite values count as `+∞` during line
/// search instead of aborting it.
fn eval_point<F>(f: &mut F, x: ParamVector, evals: &mut usize) -> Result<Point>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    *evals += 1;
    match f(&x) {
        Ok((fx, g)) if fx.is_finite() && g.is_finite() => Ok(Point { x, f: fx, g }),
        Ok(_) | Err(Error::NonFinite { .. }) | Err(Error::NonFiniteGradient { .. }) => {
            let g = x.scaled(f64::NAN);
            Ok(Point {
                x,
                f: f64::INFINITY,
                g,
            })
        }
        Err(e) => Err(e),
    }
}

fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 || !disc.is_finite() {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

impl Lbfgs {
    pub fn new(opts: LbfgsOptions) -> Self {
        Self {
            opts,
            pairs: VecDeque::new(),
            evaluations: 0,
        }
    }

    pub fn evaluate<F>(&mut self, f: &mut F, x: ParamVector) -> Result<Point>
    where
        F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
    {
        eval_point(f, x, &mut self.evaluations)
    }

    /// `−H·g` by the two-loop recursion.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|x| *x *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q
    }

    /// One iteration from an evaluated `p`. Returns the accepted point, or
    /// `None` when the line search fails.
    pub fn iterate<F>(&mut self, f: &mut F, p: &Point) -> Result<Option<Point>>
    where
        F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
    {
        let g = p.g.as_slice();
        let mut d = self.direction(g);
        let mut slope = dot(g, &d);
        if !(slope < 0.0) {
            self.pairs.clear();
            d = g.iter().map(|x| -x).collect();
            slope = dot(g, &d);
        }
        let t0 = if self.pairs.is_empty() {
            (1.0 / dot(g, g).sqrt()).min(1.0)
        } else {
            1.0
        };
        let dir = p.x.with_data(d)?;
        let Some(next) = self.line_search(f, p, &dir, slope, t0)? else {
            return Ok(None);
        };
        let s: Vec<f64> = next.x.as_slice().iter().zip(p.x.as_slice()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.as_slice().iter().zip(g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 && sy.is_finite() {
            if self.pairs.len() == self.opts.history {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
        Ok(Some(next))
    }

    fn line_search<F>(
        &mut self,
        f: &mut F,
        p: &Point,
        dir: &ParamVector,
        slope0: f64,
        t_init: f64,
    ) -> Result<Option<Point>>
    where
        F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
    {
        let (c1, c2) = (self.opts.c1, self.opts.c2);
        let f0 = p.f;
        // Approximate Wolfe test for when f has stopped resolving the decrease:
        // f within roundoff of f0, the slope flattened, and strong curvature.
        let approx = |f: f64, d: f64| {
            f <= f0 + 1e-12 * f0.abs() && d <= (2.0 * c1 - 1.0) * slope0 && d.abs() <= -c2 * slope0
        };
        let at = |this: &mut Self, f: &mut F, t: f64| -> Result<(Point, f64)> {
            let pt = eval_point(f, p.x.axpy(t, dir)?, &mut this.evaluations)?;
            let d = if pt.f.is_finite() {
                dot(pt.g.as_slice(), dir.as_slice())
            } else {
                f64::NAN
            };
            Ok((pt, d))
        };

        // bracketing phase
        let (mut t_lo, mut f_lo, mut d_lo, mut p_lo) = (0.0, f0, slope0, None::<Point>);
        let mut t = t_init;
        let mut bracket = None;
        for i in 0..self.opts.max_line_search {
            let (pt, dt) = at(self, f, t)?;
            if approx(pt.f, dt) {
                return Ok(Some(pt));
            }
            if pt.f > f0 + c1 * t * slope0 || (i > 0 && pt.f >= f_lo) || !pt.f.is_finite() {
                bracket = Some((t, pt.f, dt));
                break;
            }
            if dt.abs() <= -c2 * slope0 {
                return Ok(Some(pt));
            }
            if dt >= 0.0 {
                // the minimum lies between t and the previous point
                let prev = (t_lo, f_lo, d_lo);
                t_lo = t;
                f_lo = pt.f;
                d_lo = dt;
                p_lo = Some(pt);
                bracket = Some(prev);
                break;
            }
            t_lo = t;
            f_lo = pt.f;
            d_lo = dt;
            p_lo = Some(pt);
            t *= 2.0;
        }
        let Some((mut t_hi, mut f_hi, mut d_hi)) = bracket else {
            return Ok(p_lo.filter(|q| q.f < f0));
        };

        // zoom
        for _ in 0..self.opts.max_line_search {
            let (a, b) = (t_lo.min(t_hi), t_lo.max(t_hi));
            let width = b - a;
            if width <= 1e-16 * b.max(1e-300) {
                break;
            }
            let mut tj = if f_hi.is_finite() && d_hi.is_finite() {
                cubic_min(t_lo, f_lo, d_lo, t_hi, f_hi, d_hi).unwrap_or(0.5 * (a + b))
            } else {
                0.5 * (a + b)
            };
            if !(tj > a + 0.1 * width && tj < b - 0.1 * width) {
                tj = 0.5 * (a + b);
            }
            let (pt, dt) = at(self, f, tj)?;
            if approx(pt.f, dt) {
                return Ok(Some(pt));
            }
            if pt.f > f0 + c1 * tj * slope0 || pt.f >= f_lo || !pt.f.is_finite() {
                t_hi = tj;
                f_hi = pt.f;
                d_hi = dt;
            } else {
                if dt.abs() <= -c2 * slope0 {
                    return Ok(Some(pt));
                }
                if dt * (t_hi - t_lo) >= 0.0 {
                    t_hi = t_lo;
                    f_hi = f_lo;
                    d_hi = d_lo;
                }
                t_lo = tj;
                f_lo = pt.f;
                d_lo = dt;
                p_lo = Some(pt);
            }
        }
        // Wolfe conditions not met; accept a sufficient-decrease point if any
        Ok(p_lo.filter(|q| q.f <= f0 + c1 * t_lo * slope0 && q.f < f0))
    }
}

/// Minimises `f` from `theta0`, returning the best point seen.
pub fn lbfgs_minimize<F>(mut f: F, theta0: &ParamVector, opts: &LbfgsOptions) -> Result<LbfgsReport>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    let mut solver = Lbfgs::new(*opts);
    let mut p = solver.evaluate(&mut f, theta0.clone())?;
    if !p.f.is_finite() {
        return Err(Error::NonFinite {
            node: 0,
            op: "initial point",
        });
    }
    let mut best = p.clone();
    let mut converged = p.g.norm() < opts.tolerance;
    let mut line_search_failed = false;
    let mut iterations = 0;
    while !converged && iterations < opts.max_iters {
        match solver.iterate(&mut f, &p)? {
            Some(next) => p = next,
            None => {
                line_search_failed = true;
                break;
            }
        }
        iterations += 1;
        if p.f < best.f {
            best = p.clone();
        }
        converged = p.g.norm() < opts.tolerance;
    }
    if converged {
        best = p;
    }
    Ok(LbfgsReport {
        grad_norm: best.g.norm(),
        loss: best.f,
        theta: best.x,
        iterations,
        evaluations: solver.evaluations,
        converged,
        line_search_failed,
    })
}
