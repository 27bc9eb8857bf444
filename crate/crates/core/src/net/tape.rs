//! Minimal reverse-mode tape over scalar nodes.
//!
//! Node values are generic over [`Scalar`]. With plain `f64` a reverse sweep
//! gives gradients; with [`Dual`] values seeded along a tangent the same sweep
//! also carries the derivative of every adjoint along that tangent, which is a
//! Hessian-vector product (forward-over-reverse).

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use super::Activation;

pub trait Scalar:
    Copy + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn cst(v: f64) -> Self;
    fn act(self, a: Activation) -> Self;
    /// Derivative of the activation evaluated at `self`.
    fn act_d1(self, a: Activation) -> Self;
    fn real(self) -> f64;
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn act(self, a: Activation) -> Self {
        a.apply(self)
    }
    fn act_d1(self, a: Activation) -> Self {
        a.d1(self)
    }
    fn real(self) -> f64 {
        self
    }
}

/// First-order dual number `v + d ε`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn new(v: f64, d: f64) -> Self {
        Self { v, d }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual::new(self.v + o.v, self.d + o.d)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self.v - o.v, self.d - o.d)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual::new(self.v * o.v, self.v * o.d + self.d * o.v)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.v, -self.d)
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual::new(v, 0.0)
    }
    fn act(self, a: Activation) -> Self {
        Dual::new(a.apply(self.v), a.d1(self.v) * self.d)
    }
    fn act_d1(self, a: Activation) -> Self {
        Dual::new(a.d1(self.v), a.d2(self.v) * self.d)
    }
    fn real(self) -> f64 {
        self.v
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
struct Node<T> {
    value: T,
    parents: Vec<(usize, T)>,
}

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
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

    fn push(&mut self, value: T, parents: Vec<(usize, T)>) -> Var {
        self.nodes.push(Node { value, parents });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: T) -> Var {
        self.push(value, Vec::new())
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(T::cst(value), Vec::new())
    }

    pub fn value(&self, v: Var) -> T {
        self.nodes[v.0].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, vec![(a.0, T::cst(1.0)), (b.0, T::cst(1.0))])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, vec![(a.0, T::cst(1.0)), (b.0, T::cst(-1.0))])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        self.push(va * vb, vec![(a.0, vb), (b.0, va)])
    }

    /// `1 - a`
    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = T::cst(1.0) - self.value(a);
        self.push(value, vec![(a.0, T::cst(-1.0))])
    }

    pub fn act(&mut self, a: Var, f: Activation) -> Var {
        let x = self.value(a);
        self.push(x.act(f), vec![(a.0, x.act_d1(f))])
    }

    /// `bias + Σ w_j x_j` as a single node.
    pub fn affine(&mut self, weights: impl IntoIterator<Item = f64>, xs: &[Var], bias: f64) -> Var {
        let mut value = T::cst(bias);
        let mut parents = Vec::with_capacity(xs.len());
        for (w, x) in weights.into_iter().zip(xs) {
            value = value + T::cst(w) * self.value(*x);
            parents.push((x.0, T::cst(w)));
        }
        self.push(value, parents)
    }

    /// Adjoints of every node with respect to `output`.
    pub fn reverse(&self, output: Var) -> Vec<T> {
        let mut adj = vec![T::cst(0.0); output.0 + 1];
        adj[output.0] = T::cst(1.0);
        for idx in (0..=output.0).rev() {
            let a = adj[idx];
            for &(p, partial) in &self.nodes[idx].parents {
                adj[p] = adj[p] + a * partial;
            }
        }
        adj
    }

    pub fn adjoint_of(adjoints: &[T], v: Var) -> T {
        adjoints.get(v.0).copied().unwrap_or(T::cst(0.0))
    }
}
