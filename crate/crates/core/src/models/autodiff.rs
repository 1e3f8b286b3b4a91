//! Minimal reverse-mode differentiation over f64 scalars and vectors.
//!
//! Each scoring function is written once as a tape expression; the forward
//! pass is the score and the backward pass yields exact sparse gradients for
//! every parameter row the triple touches. The primitive set is exactly what
//! the scoring functions in this crate need — nothing more.

use super::table::{ParamRef, SparseGrad};

pub(crate) type Id = usize;

#[derive(Debug, Clone)]
pub(crate) enum Val {
    S(f64),
    V(Vec<f64>),
}

impl Val {
    fn s(&self) -> f64 {
        match self {
            Val::S(x) => *x,
            Val::V(_) => panic!("expected scalar"),
        }
    }

    fn v(&self) -> &[f64] {
        match self {
            Val::V(x) => x,
            Val::S(_) => panic!("expected vector"),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf(Option<ParamRef>),
    // vector -> vector
    AddV(Id, Id),
    SubV(Id, Id),
    NegV(Id),
    Scale(Id, Id), // vector * scalar node
    Mul(Id, Id),   // elementwise
    SqrtV(Id),
    SinV(Id),
    CosV(Id),
    Slice(Id, usize, usize),
    MatVec { m: Id, v: Id, rows: usize, cols: usize },
    Rot { angles: Id, x: Id },
    Refl { angles: Id, x: Id },
    // vector -> scalar
    Dot(Id, Id),
    SqNorm(Id),
    Norm1(Id),
    Sum(Id),
    // scalar -> scalar
    AddS(Id, Id),
    SubS(Id, Id),
    MulS(Id, Id),
    DivS(Id, Id),
    NegS(Id),
    SqrtS(Id),
    Softplus(Id),
    Sigmoid(Id),
    TanhcSqrt(Id),   // tanh(sqrt z)/sqrt z
    ArtanhcSqrt(Id), // artanh(sqrt z)/sqrt z
    Atanh2(Id),      // artanh(sqrt z)^2, clamped just below z = 1
}

const ATANH2_CLAMP: f64 = 1.0 - 1e-12;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) struct Tape {
    ops: Vec<Op>,
    vals: Vec<Val>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { ops: Vec::with_capacity(64), vals: Vec::with_capacity(64) }
    }

    fn push(&mut self, op: Op, val: Val) -> Id {
        self.ops.push(op);
        self.vals.push(val);
        self.vals.len() - 1
    }

    pub fn value(&self, id: Id) -> f64 {
        self.vals[id].s()
    }

    // ---- leaves ----

    pub fn vec_param(&mut self, data: &[f64], param: ParamRef) -> Id {
        self.push(Op::Leaf(Some(param)), Val::V(data.to_vec()))
    }

    pub fn scalar_param(&mut self, x: f64, param: ParamRef) -> Id {
        self.push(Op::Leaf(Some(param)), Val::S(x))
    }

    pub fn scalar_const(&mut self, x: f64) -> Id {
        self.push(Op::Leaf(None), Val::S(x))
    }

    // ---- vector ops ----

    pub fn add(&mut self, a: Id, b: Id) -> Id {
        let v = self.vals[a].v().iter().zip(self.vals[b].v()).map(|(x, y)| x + y).collect();
        self.push(Op::AddV(a, b), Val::V(v))
    }

    pub fn sub(&mut self, a: Id, b: Id) -> Id {
        let v = self.vals[a].v().iter().zip(self.vals[b].v()).map(|(x, y)| x - y).collect();
        self.push(Op::SubV(a, b), Val::V(v))
    }

    pub fn neg(&mut self, a: Id) -> Id {
        let v = self.vals[a].v().iter().map(|x| -x).collect();
        self.push(Op::NegV(a), Val::V(v))
    }

    pub fn scale(&mut self, v: Id, s: Id) -> Id {
        let sv = self.vals[s].s();
        let out = self.vals[v].v().iter().map(|x| x * sv).collect();
        self.push(Op::Scale(v, s), Val::V(out))
    }

    pub fn mul(&mut self, a: Id, b: Id) -> Id {
        let v = self.vals[a].v().iter().zip(self.vals[b].v()).map(|(x, y)| x * y).collect();
        self.push(Op::Mul(a, b), Val::V(v))
    }

    pub fn sqrt_v(&mut self, a: Id) -> Id {
        let v = self.vals[a].v().iter().map(|x| x.sqrt()).collect();
        self.push(Op::SqrtV(a), Val::V(v))
    }

    pub fn sin_v(&mut self, a: Id) -> Id {
        let v = self.vals[a].v().iter().map(|x| x.sin()).collect();
        self.push(Op::SinV(a), Val::V(v))
    }

    pub fn cos_v(&mut self, a: Id) -> Id {
        let v = self.vals[a].v().iter().map(|x| x.cos()).collect();
        self.push(Op::CosV(a), Val::V(v))
    }

    pub fn slice(&mut self, a: Id, offset: usize, len: usize) -> Id {
        let v = self.vals[a].v()[offset..offset + len].to_vec();
        self.push(Op::Slice(a, offset, len), Val::V(v))
    }

    pub fn matvec(&mut self, m: Id, v: Id, rows: usize, cols: usize) -> Id {
        let mv = self.vals[m].v();
        let vv = self.vals[v].v();
        let mut out = vec![0.0; rows];
        for i in 0..rows {
            let mut acc = 0.0;
            for j in 0..cols {
                acc += mv[i * cols + j] * vv[j];
            }
            out[i] = acc;
        }
        self.push(Op::MatVec { m, v, rows, cols }, Val::V(out))
    }

    pub fn givens_rotate(&mut self, angles: Id, x: Id) -> Id {
        let th = self.vals[angles].v();
        let xv = self.vals[x].v();
        let mut out = xv.to_vec();
        for (i, &a) in th.iter().enumerate() {
            let (s, c) = a.sin_cos();
            let (p, q) = (xv[2 * i], xv[2 * i + 1]);
            out[2 * i] = c * p - s * q;
            out[2 * i + 1] = s * p + c * q;
        }
        self.push(Op::Rot { angles, x }, Val::V(out))
    }

    pub fn givens_reflect(&mut self, angles: Id, x: Id) -> Id {
        let th = self.vals[angles].v();
        let xv = self.vals[x].v();
        let mut out = xv.to_vec();
        for (i, &a) in th.iter().enumerate() {
            let (s, c) = a.sin_cos();
            let (p, q) = (xv[2 * i], xv[2 * i + 1]);
            out[2 * i] = c * p + s * q;
            out[2 * i + 1] = s * p - c * q;
        }
        self.push(Op::Refl { angles, x }, Val::V(out))
    }

    // ---- reductions ----

    pub fn dot(&mut self, a: Id, b: Id) -> Id {
        let s = self.vals[a].v().iter().zip(self.vals[b].v()).map(|(x, y)| x * y).sum();
        self.push(Op::Dot(a, b), Val::S(s))
    }

    pub fn sqnorm(&mut self, a: Id) -> Id {
        let s = self.vals[a].v().iter().map(|x| x * x).sum();
        self.push(Op::SqNorm(a), Val::S(s))
    }

    pub fn norm1(&mut self, a: Id) -> Id {
        let s = self.vals[a].v().iter().map(|x| x.abs()).sum();
        self.push(Op::Norm1(a), Val::S(s))
    }

    pub fn sum(&mut self, a: Id) -> Id {
        let s = self.vals[a].v().iter().sum();
        self.push(Op::Sum(a), Val::S(s))
    }

    // ---- scalar ops ----

    pub fn add_s(&mut self, a: Id, b: Id) -> Id {
        let s = self.vals[a].s() + self.vals[b].s();
        self.push(Op::AddS(a, b), Val::S(s))
    }

    pub fn sub_s(&mut self, a: Id, b: Id) -> Id {
        let s = self.vals[a].s() - self.vals[b].s();
        self.push(Op::SubS(a, b), Val::S(s))
    }

    pub fn mul_s(&mut self, a: Id, b: Id) -> Id {
        let s = self.vals[a].s() * self.vals[b].s();
        self.push(Op::MulS(a, b), Val::S(s))
    }

    pub fn div_s(&mut self, a: Id, b: Id) -> Id {
        let s = self.vals[a].s() / self.vals[b].s();
        self.push(Op::DivS(a, b), Val::S(s))
    }

    pub fn neg_s(&mut self, a: Id) -> Id {
        let s = -self.vals[a].s();
        self.push(Op::NegS(a), Val::S(s))
    }

    pub fn sqrt_s(&mut self, a: Id) -> Id {
        let s = self.vals[a].s().sqrt();
        self.push(Op::SqrtS(a), Val::S(s))
    }

    pub fn softplus(&mut self, a: Id) -> Id {
        let x = self.vals[a].s();
        let s = x.max(0.0) + (-x.abs()).exp().ln_1p();
        self.push(Op::Softplus(a), Val::S(s))
    }

    pub fn sigmoid_s(&mut self, a: Id) -> Id {
        let s = sigmoid(self.vals[a].s());
        self.push(Op::Sigmoid(a), Val::S(s))
    }

    pub fn tanhc_sqrt(&mut self, a: Id) -> Id {
        let s = crate::geometry::tanhc_sqrt(self.vals[a].s());
        self.push(Op::TanhcSqrt(a), Val::S(s))
    }

    pub fn artanhc_sqrt(&mut self, a: Id) -> Id {
        let s = crate::geometry::artanhc_sqrt(self.vals[a].s());
        self.push(Op::ArtanhcSqrt(a), Val::S(s))
    }

    pub fn atanh2(&mut self, a: Id) -> Id {
        let z = self.vals[a].s().min(ATANH2_CLAMP);
        let s = if z <= 0.0 { 0.0 } else { z.sqrt().atanh().powi(2) };
        self.push(Op::Atanh2(a), Val::S(s))
    }

    // ---- composites ----

    /// Mobius addition on the curvature-`c` ball (`c` is a scalar node).
    pub fn mobius_add(&mut self, c: Id, x: Id, y: Id) -> Id {
        let one = self.scalar_const(1.0);
        let two = self.scalar_const(2.0);
        let xy = self.dot(x, y);
        let x2 = self.sqnorm(x);
        let y2 = self.sqnorm(y);
        let cxy2 = {
            let t = self.mul_s(c, xy);
            self.mul_s(two, t)
        };
        let a = {
            let cy2 = self.mul_s(c, y2);
            let t = self.add_s(one, cxy2);
            self.add_s(t, cy2)
        };
        let b = {
            let cx2 = self.mul_s(c, x2);
            self.sub_s(one, cx2)
        };
        let den = {
            let cc = self.mul_s(c, c);
            let x2y2 = self.mul_s(x2, y2);
            let t = self.mul_s(cc, x2y2);
            let u = self.add_s(one, cxy2);
            self.add_s(u, t)
        };
        let fa = self.div_s(a, den);
        let fb = self.div_s(b, den);
        let xa = self.scale(x, fa);
        let yb = self.scale(y, fb);
        self.add(xa, yb)
    }

    /// `exp_0^c(v) = tanhc(sqrt(c)|v|) v` via the smooth tanhc-of-sqrt form.
    pub fn exp_zero(&mut self, c: Id, v: Id) -> Id {
        let n2 = self.sqnorm(v);
        let z = self.mul_s(c, n2);
        let f = self.tanhc_sqrt(z);
        self.scale(v, f)
    }

    /// `log_0^c(p) = artanhc(sqrt(c)|p|) p`.
    pub fn log_zero(&mut self, c: Id, p: Id) -> Id {
        let n2 = self.sqnorm(p);
        let z = self.mul_s(c, n2);
        let f = self.artanhc_sqrt(z);
        self.scale(p, f)
    }

    /// Squared geodesic distance `(4/c) artanh(sqrt(c)|(-x)(+)y|)^2`.
    pub fn sq_hyp_dist(&mut self, c: Id, x: Id, y: Id) -> Id {
        let nx = self.neg(x);
        let m = self.mobius_add(c, nx, y);
        let m2 = self.sqnorm(m);
        let z = self.mul_s(c, m2);
        let a2 = self.atanh2(z);
        let four = self.scalar_const(4.0);
        let f = self.div_s(four, c);
        self.mul_s(f, a2)
    }

    // ---- backward ----

    /// Reverse pass from scalar node `root`, scaled by `upstream`. Returns
    /// the gradient for every parameter leaf reached.
    pub fn backward(&self, root: Id, upstream: f64) -> SparseGrad {
        let mut adj: Vec<Option<Val>> = vec![None; self.vals.len()];
        adj[root] = Some(Val::S(upstream));

        macro_rules! add_s {
            ($i:expr, $g:expr) => {{
                let g = $g;
                match &mut adj[$i] {
                    Some(Val::S(a)) => *a += g,
                    None => adj[$i] = Some(Val::S(g)),
                    _ => unreachable!(),
                }
            }};
        }

        for id in (0..self.ops.len()).rev() {
            let Some(a) = adj[id].take() else { continue };
            // put it back for leaves; other nodes no longer need it
            match (&self.ops[id], &a) {
                (Op::Leaf(_), _) => {
                    adj[id] = Some(a);
                    continue;
                }
                (Op::AddV(x, y), Val::V(g)) => {
                    add_vec(&mut adj, *x, g, 1.0);
                    add_vec(&mut adj, *y, g, 1.0);
                }
                (Op::SubV(x, y), Val::V(g)) => {
                    add_vec(&mut adj, *x, g, 1.0);
                    add_vec(&mut adj, *y, g, -1.0);
                }
                (Op::NegV(x), Val::V(g)) => add_vec(&mut adj, *x, g, -1.0),
                (Op::Scale(v, s), Val::V(g)) => {
                    let sv = self.vals[*s].s();
                    add_vec(&mut adj, *v, g, sv);
                    let d: f64 = g.iter().zip(self.vals[*v].v()).map(|(gi, vi)| gi * vi).sum();
                    add_s!(*s, d);
                }
                (Op::Mul(x, y), Val::V(g)) => {
                    let gx: Vec<f64> = g.iter().zip(self.vals[*y].v()).map(|(gi, yi)| gi * yi).collect();
                    let gy: Vec<f64> = g.iter().zip(self.vals[*x].v()).map(|(gi, xi)| gi * xi).collect();
                    add_vec(&mut adj, *x, &gx, 1.0);
                    add_vec(&mut adj, *y, &gy, 1.0);
                }
                (Op::SqrtV(x), Val::V(g)) => {
                    let gx: Vec<f64> = g
                        .iter()
                        .zip(self.vals[id].v())
                        .map(|(gi, yi)| if *yi == 0.0 { 0.0 } else { gi / (2.0 * yi) })
                        .collect();
                    add_vec(&mut adj, *x, &gx, 1.0);
                }
                (Op::SinV(x), Val::V(g)) => {
                    let gx: Vec<f64> = g.iter().zip(self.vals[*x].v()).map(|(gi, xi)| gi * xi.cos()).collect();
                    add_vec(&mut adj, *x, &gx, 1.0);
                }
                (Op::CosV(x), Val::V(g)) => {
                    let gx: Vec<f64> = g.iter().zip(self.vals[*x].v()).map(|(gi, xi)| -gi * xi.sin()).collect();
                    add_vec(&mut adj, *x, &gx, 1.0);
                }
                (Op::Slice(src, offset, len), Val::V(g)) => {
                    let width = self.vals[*src].v().len();
                    let mut full = vec![0.0; width];
                    full[*offset..offset + len].copy_from_slice(g);
                    add_vec(&mut adj, *src, &full, 1.0);
                }
                (Op::MatVec { m, v, rows, cols }, Val::V(g)) => {
                    let mv = self.vals[*m].v();
                    let vv = self.vals[*v].v();
                    let mut gm = vec![0.0; rows * cols];
                    let mut gv = vec![0.0; *cols];
                    for i in 0..*rows {
                        for j in 0..*cols {
                            gm[i * cols + j] = g[i] * vv[j];
                            gv[j] += mv[i * cols + j] * g[i];
                        }
                    }
                    add_vec(&mut adj, *m, &gm, 1.0);
                    add_vec(&mut adj, *v, &gv, 1.0);
                }
                (Op::Rot { angles, x }, Val::V(g)) => {
                    let th = self.vals[*angles].v();
                    let xv = self.vals[*x].v();
                    let mut gx = g.to_vec();
                    let mut gth = vec![0.0; th.len()];
                    for (i, &a) in th.iter().enumerate() {
                        let (s, c) = a.sin_cos();
                        let (p, q) = (xv[2 * i], xv[2 * i + 1]);
                        let (g0, g1) = (g[2 * i], g[2 * i + 1]);
                        gx[2 * i] = c * g0 + s * g1;
                        gx[2 * i + 1] = -s * g0 + c * g1;
                        gth[i] = g0 * (-s * p - c * q) + g1 * (c * p - s * q);
                    }
                    add_vec(&mut adj, *x, &gx, 1.0);
                    add_vec(&mut adj, *angles, &gth, 1.0);
                }
                (Op::Refl { angles, x }, Val::V(g)) => {
                    let th = self.vals[*angles].v();
                    let xv = self.vals[*x].v();
                    let mut gx = g.to_vec();
                    let mut gth = vec![0.0; th.len()];
                    for (i, &a) in th.iter().enumerate() {
                        let (s, c) = a.sin_cos();
                        let (p, q) = (xv[2 * i], xv[2 * i + 1]);
                        let (g0, g1) = (g[2 * i], g[2 * i + 1]);
                        gx[2 * i] = c * g0 + s * g1;
                        gx[2 * i + 1] = s * g0 - c * g1;
                        gth[i] = g0 * (-s * p + c * q) + g1 * (c * p + s * q);
                    }
                    add_vec(&mut adj, *x, &gx, 1.0);
                    add_vec(&mut adj, *angles, &gth, 1.0);
                }
                (Op::Dot(x, y), Val::S(g)) => {
                    add_vec(&mut adj, *x, self.vals[*y].v(), *g);
                    add_vec(&mut adj, *y, self.vals[*x].v(), *g);
                }
                (Op::SqNorm(x), Val::S(g)) => add_vec(&mut adj, *x, self.vals[*x].v(), 2.0 * g),
                (Op::Norm1(x), Val::S(g)) => {
                    let gx: Vec<f64> = self.vals[*x].v().iter().map(|v| g * sign(*v)).collect();
                    add_vec(&mut adj, *x, &gx, 1.0);
                }
                (Op::Sum(x), Val::S(g)) => {
                    let n = self.vals[*x].v().len();
                    add_vec(&mut adj, *x, &vec![1.0; n], *g);
                }
                (Op::AddS(x, y), Val::S(g)) => {
                    add_s!(*x, *g);
                    add_s!(*y, *g);
                }
                (Op::SubS(x, y), Val::S(g)) => {
                    add_s!(*x, *g);
                    add_s!(*y, -*g);
                }
                (Op::MulS(x, y), Val::S(g)) => {
                    add_s!(*x, g * self.vals[*y].s());
                    add_s!(*y, g * self.vals[*x].s());
                }
                (Op::DivS(x, y), Val::S(g)) => {
                    let yv = self.vals[*y].s();
                    add_s!(*x, g / yv);
                    add_s!(*y, -g * self.vals[*x].s() / (yv * yv));
                }
                (Op::NegS(x), Val::S(g)) => add_s!(*x, -*g),
                (Op::SqrtS(x), Val::S(g)) => add_s!(*x, g / (2.0 * self.vals[id].s())),
                (Op::Softplus(x), Val::S(g)) => add_s!(*x, g * sigmoid(self.vals[*x].s())),
                (Op::Sigmoid(x), Val::S(g)) => {
                    let y = self.vals[id].s();
                    add_s!(*x, g * y * (1.0 - y));
                }
                (Op::TanhcSqrt(x), Val::S(g)) => add_s!(*x, g * d_tanhc_sqrt(self.vals[*x].s())),
                (Op::ArtanhcSqrt(x), Val::S(g)) => add_s!(*x, g * d_artanhc_sqrt(self.vals[*x].s())),
                (Op::Atanh2(x), Val::S(g)) => {
                    let z = self.vals[*x].s();
                    let d = if z >= ATANH2_CLAMP {
                        0.0
                    } else {
                        crate::geometry::artanhc_sqrt(z.max(0.0)) / (1.0 - z)
                    };
                    add_s!(*x, g * d);
                }
                (op, _) => unreachable!("adjoint shape mismatch for {op:?}"),
            }
        }

        let mut grads = SparseGrad::new();
        for (id, op) in self.ops.iter().enumerate() {
            if let Op::Leaf(Some(p)) = op {
                if let Some(a) = &adj[id] {
                    match a {
                        Val::S(x) => grads.accumulate(*p, &[*x]),
                        Val::V(v) => grads.accumulate(*p, v),
                    }
                }
            }
        }
        grads
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn add_vec(adj: &mut [Option<Val>], id: Id, g: &[f64], factor: f64) {
    match &mut adj[id] {
        Some(Val::V(a)) => {
            for (ai, gi) in a.iter_mut().zip(g) {
                *ai += factor * gi;
            }
        }
        None => {
            adj[id] = Some(Val::V(g.iter().map(|gi| factor * gi).collect()));
        }
        _ => unreachable!(),
    }
}

/// d/dz tanh(sqrt z)/sqrt z.
fn d_tanhc_sqrt(z: f64) -> f64 {
    if z < 1e-10 {
        -1.0 / 3.0 + 4.0 * z / 15.0
    } else {
        let s = z.sqrt();
        let t = s.tanh();
        ((1.0 - t * t) * s - t) / (2.0 * s * s * s)
    }
}

/// d/dz artanh(sqrt z)/sqrt z.
fn d_artanhc_sqrt(z: f64) -> f64 {
    if z < 1e-10 {
        1.0 / 3.0 + 2.0 * z / 5.0
    } else {
        let s = z.sqrt();
        (s / (1.0 - z) - s.atanh()) / (2.0 * s * s * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;
    use crate::models::table::ParamBlock;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn pref(row: usize) -> ParamRef {
        ParamRef::new(ParamBlock::Entity, row)
    }

    /// Central finite difference of `f` at `x` in coordinate `i`.
    fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize, eps: f64) -> f64 {
        let mut hi = x.to_vec();
        let mut lo = x.to_vec();
        hi[i] += eps;
        lo[i] -= eps;
        (f(&hi) - f(&lo)) / (2.0 * eps)
    }

    fn check_grad(f: &dyn Fn(&[f64]) -> f64, g: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) {
        let analytic = g(x);
        for i in 0..x.len() {
            let fd = central_diff(f, x, i, 1e-6);
            let a = analytic[i];
            let denom = 1.0f64.max(a.abs()).max(fd.abs());
            assert!(
                (a - fd).abs() / denom < 1e-4,
                "coord {i}: analytic {a} vs fd {fd}"
            );
        }
    }

    #[test]
    fn smooth_scalar_primitives_match_fd() {
        for &z in &[1e-6, 1e-4, 0.01, 0.3, 0.9] {
            let h = z * 1e-4;
            let fd = (geometry::tanhc_sqrt(z + h) - geometry::tanhc_sqrt(z - h)) / (2.0 * h);
            assert!((d_tanhc_sqrt(z) - fd).abs() < 1e-4 * fd.abs().max(1.0), "tanhc at {z}");
            let fd = (geometry::artanhc_sqrt(z + h) - geometry::artanhc_sqrt(z - h)) / (2.0 * h);
            assert!((d_artanhc_sqrt(z) - fd).abs() < 1e-4 * fd.abs().max(1.0), "artanhc at {z}");
        }
        // series limits at the origin
        assert!((d_tanhc_sqrt(0.0) + 1.0 / 3.0).abs() < 1e-12);
        assert!((d_artanhc_sqrt(0.0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mobius_composite_matches_geometry_and_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| (rng.random::<f64>() - 0.5) * 0.8).collect();
            let y: Vec<f64> = (0..4).map(|_| (rng.random::<f64>() - 0.5) * 0.8).collect();
            let c = 0.5 + rng.random::<f64>();

            // forward agrees with the plain geometry kernel
            let mut tape = Tape::new();
            let cx = tape.scalar_const(c);
            let xi = tape.vec_param(&x, pref(0));
            let yi = tape.vec_param(&y, pref(1));
            let m = tape.mobius_add(cx, xi, yi);
            let expected = geometry::mobius_add(c, &x, &y);
            for (got, want) in tape.vals[m].v().iter().zip(&expected) {
                assert!((got - want).abs() < 1e-12);
            }

            // gradient of |mobius(x, y)|^2 wrt x matches FD
            let score = |xv: &[f64]| {
                let mut t = Tape::new();
                let c = t.scalar_const(c);
                let a = t.vec_param(xv, pref(0));
                let b = t.vec_param(&y, pref(1));
                let m = t.mobius_add(c, a, b);
                let s = t.sqnorm(m);
                t.value(s)
            };
            let grad = |xv: &[f64]| {
                let mut t = Tape::new();
                let c = t.scalar_const(c);
                let a = t.vec_param(xv, pref(0));
                let b = t.vec_param(&y, pref(1));
                let m = t.mobius_add(c, a, b);
                let s = t.sqnorm(m);
                t.backward(s, 1.0).get(&pref(0)).unwrap().to_vec()
            };
            check_grad(&score, &grad, &x);
        }
    }

    #[test]
    fn sq_hyp_dist_grad_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| (rng.random::<f64>() - 0.5) * 0.7).collect();
            let y: Vec<f64> = (0..3).map(|_| (rng.random::<f64>() - 0.5) * 0.7).collect();
            let c = 0.7 + rng.random::<f64>();
            let score = |xv: &[f64]| {
                let mut t = Tape::new();
                let c = t.scalar_const(c);
                let a = t.vec_param(xv, pref(0));
                let b = t.vec_param(&y, pref(1));
                let d2 = t.sq_hyp_dist(c, a, b);
                t.value(d2)
            };
            let grad = |xv: &[f64]| {
                let mut t = Tape::new();
                let c = t.scalar_const(c);
                let a = t.vec_param(xv, pref(0));
                let b = t.vec_param(&y, pref(1));
                let d2 = t.sq_hyp_dist(c, a, b);
                t.backward(d2, 1.0).get(&pref(0)).unwrap().to_vec()
            };
            check_grad(&score, &grad, &x);

            // forward equals the squared geometry distance
            let d = geometry::hyp_distance(c, &x, &y);
            assert!((score(&x) - d * d).abs() < 1e-9);
        }
    }

    #[test]
    fn givens_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>() - 0.5).collect();
        let th: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 3.0).collect();
        for refl in [false, true] {
            // wrt angles
            let score = |tv: &[f64]| {
                let mut t = Tape::new();
                let a = t.vec_param(tv, pref(0));
                let xv = t.vec_param(&x, pref(1));
                let y = if refl { t.givens_reflect(a, xv) } else { t.givens_rotate(a, xv) };
                let probe: Vec<f64> = (1..=6).map(|i| i as f64 / 3.0).collect();
                let p = t.vec_param(&probe, pref(2));
                let s = t.dot(y, p);
                t.value(s)
            };
            let grad = |tv: &[f64]| {
                let mut t = Tape::new();
                let a = t.vec_param(tv, pref(0));
                let xv = t.vec_param(&x, pref(1));
                let y = if refl { t.givens_reflect(a, xv) } else { t.givens_rotate(a, xv) };
                let probe: Vec<f64> = (1..=6).map(|i| i as f64 / 3.0).collect();
                let p = t.vec_param(&probe, pref(2));
                let s = t.dot(y, p);
                t.backward(s, 1.0).get(&pref(0)).unwrap().to_vec()
            };
            check_grad(&score, &grad, &th);
        }
    }

    #[test]
    fn exp_log_composites_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let v: Vec<f64> = (0..4).map(|_| (rng.random::<f64>() - 0.5) * 2.0).collect();
            let c = 0.5 + rng.random::<f64>();
            let mut t = Tape::new();
            let cn = t.scalar_const(c);
            let vi = t.vec_param(&v, pref(0));
            let p = t.exp_zero(cn, vi);
            let back = t.log_zero(cn, p);
            for (a, b) in t.vals[back].v().iter().zip(&v) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_upstream_zeroes_gradient() {
        let mut t = Tape::new();
        let a = t.vec_param(&[1.0, 2.0], pref(0));
        let s = t.sqnorm(a);
        let g = t.backward(s, 0.0);
        assert_eq!(g.get(&pref(0)).unwrap(), &[0.0, 0.0]);
    }
}
