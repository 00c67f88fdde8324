//! Minimal reverse-mode automatic differentiation on a recording tape.
//!
//! A forward pass evaluates an expression eagerly in `f64` while appending
//! one node per operation to a [`Tape`]; each node stores its (at most two)
//! parent indices and the local partial derivatives, precomputed at forward
//! time. A single backward sweep then yields the gradient with respect to
//! every input — the right trade for this crate, where log-joints map up to
//! `N + 4` (hundreds of) parameters to one scalar.
//!
//! Code meant to run both in plain arithmetic and under differentiation is
//! written against the [`Scalar`] trait, implemented by `f64` and by
//! [`Var`]:
//!
//! ```
//! use bcm_core::autodiff::{Scalar, Tape};
//!
//! fn softplus<S: Scalar>(x: S) -> S {
//!     (x.exp() + 1.0).ln()
//! }
//!
//! let tape = Tape::new();
//! let x = tape.input(0.5);
//! let y = softplus(x);
//! let grad = tape.gradient(y).unwrap();
//! assert!((y.value() - softplus(0.5f64)).abs() < 1e-15);
//! assert!((grad[0] - 0.5f64.exp() / (1.0 + 0.5f64.exp())).abs() < 1e-12);
//! ```
//!
//! Subgradient conventions (tested): `abs` takes 0 at the kink; `max`/`min`
//! route the gradient to the first argument on ties. Tapes are single-use:
//! one forward pass, one gradient call. They are not `Sync`; use one tape
//! per thread.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::CoreError;
use crate::Result;

/// Supported primitives, fixed at recording time by the `Scalar` surface:
/// add, sub, mul, div, neg, exp, log, sigmoid, log-sigmoid, abs, min, max,
/// sum, dot. Anything else simply does not type-check against the trait,
/// so no runtime "unsupported primitive" path exists.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    /// Plain numeric value.
    fn value(self) -> f64;
    /// A constant carried on the same tape (or a plain number for `f64`).
    fn constant_like(self, c: f64) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sigmoid(self) -> Self;
    /// `ln(sigmoid(x))`, evaluated in the numerically stable softplus form.
    fn log_sigmoid(self) -> Self;
    /// Absolute value; subgradient 0 at the kink.
    fn abs(self) -> Self;
    /// Larger argument; ties go to `self`.
    fn max(self, other: Self) -> Self;
    /// Smaller argument; ties go to `self`.
    fn min(self, other: Self) -> Self;
}

/// Numerically stable logistic function.
pub fn sigmoid_f64(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(sigmoid(z))`; never -inf for finite input.
pub fn log_sigmoid_f64(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

impl Scalar for f64 {
    fn value(self) -> f64 {
        self
    }
    fn constant_like(self, c: f64) -> Self {
        c
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sigmoid(self) -> Self {
        sigmoid_f64(self)
    }
    fn log_sigmoid(self) -> Self {
        log_sigmoid_f64(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }
}

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    weights: [f64; 2],
    value: f64,
}

/// Append-only record of one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    n_inputs: RefCell<usize>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-allocate for roughly `n` nodes.
    pub fn with_capacity(n: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(n)),
            n_inputs: RefCell::new(0),
        }
    }

    /// Register a differentiable input. Inputs must be created before any
    /// operation nodes; `gradient` reports with respect to them, in order.
    pub fn input(&self, value: f64) -> Var<'_> {
        let idx = self.push(0, 0, 0.0, 0.0, value);
        let mut n = self.n_inputs.borrow_mut();
        assert_eq!(
            *n as u32, idx,
            "tape inputs must be registered before any operation"
        );
        *n += 1;
        Var {
            tape: self,
            idx,
            value,
        }
    }

    /// Register all entries of `values` as inputs.
    pub fn inputs(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.input(v)).collect()
    }

    /// A non-differentiated constant node.
    pub fn constant(&self, value: f64) -> Var<'_> {
        let idx = self.push(0, 0, 0.0, 0.0, value);
        Var {
            tape: self,
            idx,
            value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, p0: u32, p1: u32, w0: f64, w1: f64, value: f64) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(Node {
            parents: [p0, p1],
            weights: [w0, w1],
            value,
        });
        idx
    }

    /// Reverse sweep from `output`; returns ∂output/∂input for every
    /// registered input, in registration order.
    ///
    /// A non-finite value anywhere in the live part of the graph poisons
    /// the gradient; the error carries the index of the first offending
    /// node so the caller can map it back to a source term.
    pub fn gradient(&self, output: Var<'_>) -> Result<Vec<f64>> {
        assert!(std::ptr::eq(output.tape, self), "output from foreign tape");
        let nodes = self.nodes.borrow();
        let n_inputs = *self.n_inputs.borrow();
        let mut adjoint = vec![0.0f64; nodes.len()];
        adjoint[output.idx as usize] = 1.0;
        for i in (n_inputs..nodes.len()).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            adjoint[node.parents[0] as usize] += node.weights[0] * a;
            adjoint[node.parents[1] as usize] += node.weights[1] * a;
        }
        let grad: Vec<f64> = adjoint[..n_inputs].to_vec();
        if !output.value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            let node = nodes
                .iter()
                .position(|n| !n.value.is_finite() || !n.weights[0].is_finite() || !n.weights[1].is_finite())
                .unwrap_or(output.idx as usize);
            return Err(CoreError::NonFiniteGradient { node });
        }
        Ok(grad)
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    value: f64,
}

impl<'t> Var<'t> {
    fn unary(self, w: f64, value: f64) -> Self {
        let idx = self.tape.push(self.idx, self.idx, w, 0.0, value);
        Var {
            tape: self.tape,
            idx,
            value,
        }
    }

    fn binary(self, other: Var<'t>, w0: f64, w1: f64, value: f64) -> Self {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "mixed tapes");
        let idx = self.tape.push(self.idx, other.idx, w0, w1, value);
        Var {
            tape: self.tape,
            idx,
            value,
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, 1.0, 1.0, self.value + rhs.value)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, 1.0, -1.0, self.value - rhs.value)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, rhs.value, self.value, self.value * rhs.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        let v = self.value / rhs.value;
        self.binary(rhs, 1.0 / rhs.value, -v / rhs.value, v)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-1.0, -self.value)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.unary(1.0, self.value + rhs)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: f64) -> Var<'t> {
        self.unary(1.0, self.value - rhs)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.unary(rhs, self.value * rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: f64) -> Var<'t> {
        self.unary(1.0 / rhs, self.value / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(-1.0, self - rhs.value)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(self) -> f64 {
        self.value
    }

    fn constant_like(self, c: f64) -> Self {
        self.tape.constant(c)
    }

    fn exp(self) -> Self {
        let v = self.value.exp();
        self.unary(v, v)
    }

    fn ln(self) -> Self {
        self.unary(1.0 / self.value, self.value.ln())
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.value);
        self.unary(s * (1.0 - s), s)
    }

    fn log_sigmoid(self) -> Self {
        // d/dz ln σ(z) = σ(-z)
        self.unary(sigmoid_f64(-self.value), log_sigmoid_f64(self.value))
    }

    fn abs(self) -> Self {
        let w = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(w, self.value.abs())
    }

    fn max(self, other: Self) -> Self {
        if self.value >= other.value {
            self.binary(other, 1.0, 0.0, self.value)
        } else {
            self.binary(other, 0.0, 1.0, other.value)
        }
    }

    fn min(self, other: Self) -> Self {
        if self.value <= other.value {
            self.binary(other, 1.0, 0.0, self.value)
        } else {
            self.binary(other, 0.0, 1.0, other.value)
        }
    }
}

/// Sum of a non-empty slice.
pub fn sum<S: Scalar>(xs: &[S]) -> S {
    assert!(!xs.is_empty(), "sum of empty slice");
    xs.iter().skip(1).fold(xs[0], |acc, &x| acc + x)
}

/// Dot product of equal-length, non-empty slices.
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    assert_eq!(a.len(), b.len(), "dot length mismatch");
    assert!(!a.is_empty(), "dot of empty slices");
    let mut acc = a[0] * b[0];
    for i in 1..a.len() {
        acc = acc + a[i] * b[i];
    }
    acc
}

/// `ln Σ exp(xᵢ)` of a non-empty slice, max-shifted for stability.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    assert!(!xs.is_empty(), "log_sum_exp of empty slice");
    if xs.len() == 1 {
        return xs[0];
    }
    let mut m = xs[0];
    for &x in &xs[1..] {
        m = m.max(x);
    }
    let mut acc = (xs[0] - m).exp();
    for &x in &xs[1..] {
        acc = acc + (x - m).exp();
    }
    m + acc.ln()
}

/// Two-term [`log_sum_exp`].
pub fn log_add_exp<S: Scalar>(a: S, b: S) -> S {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// A differentiable scalar field over ℝ^dim. The one abstraction shared by
/// SVI, HMC, and the finite-difference oracles.
pub trait LogDensity {
    fn dim(&self) -> usize;

    fn log_density<S: Scalar>(&self, theta: &[S]) -> S;

    /// Evaluate and differentiate in one tape pass.
    fn value_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let tape = Tape::new();
        let vars = tape.inputs(theta);
        let out = self.log_density(&vars);
        let grad = tape.gradient(out)?;
        Ok((out.value(), grad))
    }
}

/// Outcome of [`record`]: the forward value plus the tape that produced it.
pub struct Recorded {
    tape: Tape,
    output_idx: u32,
    output_value: f64,
}

impl Recorded {
    pub fn value(&self) -> f64 {
        self.output_value
    }
}

/// Record a differentiable program at `input`, returning its value and the
/// tape for a later [`gradient`] call.
pub fn record<F>(f: F, input: &[f64]) -> Recorded
where
    F: for<'t> Fn(&[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars = tape.inputs(input);
    let out = f(&vars);
    Recorded {
        output_idx: out.idx,
        output_value: out.value,
        tape,
    }
}

/// Gradient of a recorded program with respect to its inputs.
pub fn gradient(rec: &Recorded) -> Result<Vec<f64>> {
    let out = Var {
        tape: &rec.tape,
        idx: rec.output_idx,
        value: rec.output_value,
    };
    rec.tape.gradient(out)
}

/// Central finite differences, the independent oracle used by the tests
/// and the acceptance suite to check tape gradients.
pub fn central_difference<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_matches_plain_arithmetic() {
        // f(x) = x
        let rec = record(|v| v[0], &[1.75]);
        assert_eq!(rec.value(), 1.75);

        // f(x) = σ(x) at 0
        let rec = record(|v| v[0].sigmoid(), &[0.0]);
        assert!((rec.value() - 0.5).abs() < 1e-15);

        // f(x) = ln σ(32(0.25 − x)) at 0.15; reference by stable softplus.
        let rec = record(|v| ((0.25 - v[0]) * 32.0).log_sigmoid(), &[0.15]);
        let reference = -(-3.2f64).exp().ln_1p();
        assert!((rec.value() - reference).abs() <= 1e-12 * reference.abs());
        assert!((rec.value() - (-0.03995333316243035)).abs() < 1e-12);
    }

    #[test]
    fn gradient_basics() {
        // f(x) = x² at 3 → 6
        let rec = record(|v| v[0] * v[0], &[3.0]);
        assert!((gradient(&rec).unwrap()[0] - 6.0).abs() < 1e-12);

        // σ'(0) = 0.25
        let rec = record(|v| v[0].sigmoid(), &[0.0]);
        assert!((gradient(&rec).unwrap()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences_on_composite() {
        let f_plain = |x: &[f64]| -> f64 {
            let a = (x[0] * x[1]).sigmoid().ln();
            let b = (x[0] - x[2]).abs() * 0.5;
            let c = (x[1] / (x[2] + 2.0)).exp();
            a + b + c
        };
        let x = [0.3, -0.7, 1.1];
        let rec = record(
            |v| {
                let a = (v[0] * v[1]).sigmoid().ln();
                let b = (v[0] - v[2]).abs() * 0.5;
                let c = (v[1] / (v[2] + 2.0)).exp();
                a + b + c
            },
            &x,
        );
        let grad = gradient(&rec).unwrap();
        let fd = central_difference(f_plain, &x, 1e-5);
        for i in 0..3 {
            let tol = 1e-4 * (1.0 + grad[i].abs());
            assert!((grad[i] - fd[i]).abs() < tol, "coord {i}: {} vs {}", grad[i], fd[i]);
        }
    }

    #[test]
    fn linearity_of_gradients() {
        // grad(a·f + b·g) == a·grad f + b·grad g
        let x = [0.4, -1.3];
        let (a, b) = (2.5, -0.75);
        let grad_f = gradient(&record(|v| (v[0] * v[1]).sigmoid(), &x)).unwrap();
        let grad_g = gradient(&record(|v| (v[0] - v[1]).abs(), &x)).unwrap();
        let grad_combo = gradient(&record(
            |v| (v[0] * v[1]).sigmoid() * a + (v[0] - v[1]).abs() * b,
            &x,
        ))
        .unwrap();
        for i in 0..2 {
            let expect = a * grad_f[i] + b * grad_g[i];
            assert!((grad_combo[i] - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn subgradient_conventions() {
        // abs at the kink → 0
        let rec = record(|v| v[0].abs(), &[0.0]);
        assert_eq!(gradient(&rec).unwrap()[0], 0.0);

        // max tie → first argument
        let rec = record(|v| v[0].max(v[1]), &[2.0, 2.0]);
        assert_eq!(gradient(&rec).unwrap(), vec![1.0, 0.0]);

        // min tie → first argument
        let rec = record(|v| v[0].min(v[1]), &[2.0, 2.0]);
        assert_eq!(gradient(&rec).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn non_finite_values_poison_the_gradient() {
        let rec = record(|v| v[0].ln(), &[-1.0]); // NaN value
        match gradient(&rec) {
            Err(CoreError::NonFiniteGradient { .. }) => {}
            other => panic!("expected NonFiniteGradient, got {other:?}"),
        }
        // 1/0 → infinite value poisons downstream gradient
        let rec = record(|v| v[0] / (v[1] - 1.0) + v[0], &[2.0, 1.0]);
        assert!(gradient(&rec).is_err());
    }

    #[test]
    fn log_sum_exp_is_stable_and_correct() {
        let rec = record(|v| log_sum_exp(&[v[0], v[1], v[2]]), &[-1000.0, -1001.0, -999.0]);
        // Reference via shifted plain arithmetic.
        let m: f64 = -999.0;
        let expect = m + ((-1000.0f64 - m).exp() + (-1001.0f64 - m).exp() + 1.0).ln();
        assert!((rec.value() - expect).abs() < 1e-12);
        let grad = gradient(&rec).unwrap();
        let total: f64 = grad.iter().sum();
        assert!((total - 1.0).abs() < 1e-12); // softmax weights sum to 1
    }

    #[test]
    fn sum_and_dot() {
        let rec = record(|v| sum(v), &[1.0, 2.0, 3.5]);
        assert_eq!(rec.value(), 6.5);
        let rec = record(|v| dot(&v[..2], &v[2..]), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(rec.value(), 11.0);
        assert_eq!(gradient(&rec).unwrap(), vec![3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn value_and_grad_via_log_density_trait() {
        struct Quadratic;
        impl LogDensity for Quadratic {
            fn dim(&self) -> usize {
                2
            }
            fn log_density<S: Scalar>(&self, theta: &[S]) -> S {
                -(theta[0] * theta[0] + theta[1] * theta[1]) * 0.5
            }
        }
        let (v, g) = Quadratic.value_and_grad(&[1.0, -2.0]).unwrap();
        assert!((v + 2.5).abs() < 1e-15);
        assert!((g[0] + 1.0).abs() < 1e-15);
        assert!((g[1] - 2.0).abs() < 1e-15);
    }
}
