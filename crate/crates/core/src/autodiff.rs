//! Minimal vector autodiff.
//!
//! Network code is written once against [`Backend`]. [`Eval`] runs it on
//! plain vectors; [`Tape`] records every operation into an arena so that
//! [`Tape::backward`] can produce exact reverse-mode gradients.

/// Vector operations shared by the plain evaluator and the recording tape.
///
/// Matrices are row-major with `rows = out.len()` and
/// `cols = x.len()`.
pub trait Backend {
    type V: Clone;

    fn constant(&mut self, data: &[f64]) -> Self::V;
    fn val<'a>(&'a self, v: &'a Self::V) -> &'a [f64];

    /// `w · x + b`, with `w` of shape `b.len() × x.len()`.
    fn affine(&mut self, w: &Self::V, b: &Self::V, x: &Self::V) -> Self::V;
    /// `w · x` for `w` of shape `rows × x.len()`.
    fn matvec(&mut self, w: &Self::V, rows: usize, x: &Self::V) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn sub(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn scale(&mut self, a: &Self::V, c: f64) -> Self::V;
    fn offset(&mut self, a: &Self::V, c: f64) -> Self::V;
    fn tanh(&mut self, a: &Self::V) -> Self::V;
    fn sigmoid(&mut self, a: &Self::V) -> Self::V;
    fn exp(&mut self, a: &Self::V) -> Self::V;
    fn square(&mut self, a: &Self::V) -> Self::V;
    /// Clamps elementwise; the gradient is zero where the bound is active.
    fn clamp(&mut self, a: &Self::V, lo: f64, hi: f64) -> Self::V;
    fn concat(&mut self, parts: &[Self::V]) -> Self::V;
    /// Elementwise sum of equal-length vectors. `parts` must be non-empty.
    fn sum_n(&mut self, parts: &[Self::V]) -> Self::V;
    /// Sum of all entries, as a length-1 vector.
    fn sum(&mut self, a: &Self::V) -> Self::V;
    /// Repeats a length-1 vector `n` times.
    fn broadcast(&mut self, a: &Self::V, n: usize) -> Self::V;

    fn zeros(&mut self, n: usize) -> Self::V {
        self.constant(&vec![0.0; n])
    }

    fn mean_n(&mut self, parts: &[Self::V]) -> Self::V {
        let s = self.sum_n(parts);
        self.scale(&s, 1.0 / parts.len() as f64)
    }

    fn scalar(&self, v: &Self::V) -> f64 {
        self.val(v)[0]
    }
}

/// Direct evaluation on owned vectors.
#[derive(Debug, Default, Clone, Copy)]
pub struct Eval;

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

impl Backend for Eval {
    type V = Vec<f64>;

    fn constant(&mut self, data: &[f64]) -> Vec<f64> {
        data.to_vec()
    }

    fn val<'a>(&'a self, v: &'a Vec<f64>) -> &'a [f64] {
        v
    }

    fn affine(&mut self, w: &Vec<f64>, b: &Vec<f64>, x: &Vec<f64>) -> Vec<f64> {
        let cols = x.len();
        debug_assert_eq!(w.len(), b.len() * cols);
        b.iter()
            .enumerate()
            .map(|(r, &bias)| bias + dot(&w[r * cols..(r + 1) * cols], x))
            .collect()
    }

    fn matvec(&mut self, w: &Vec<f64>, rows: usize, x: &Vec<f64>) -> Vec<f64> {
        let cols = x.len();
        debug_assert_eq!(w.len(), rows * cols);
        (0..rows).map(|r| dot(&w[r * cols..(r + 1) * cols], x)).collect()
    }

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        zip_map(a, b, |x, y| x + y)
    }

    fn sub(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        zip_map(a, b, |x, y| x - y)
    }

    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        zip_map(a, b, |x, y| x * y)
    }

    fn scale(&mut self, a: &Vec<f64>, c: f64) -> Vec<f64> {
        a.iter().map(|x| x * c).collect()
    }

    fn offset(&mut self, a: &Vec<f64>, c: f64) -> Vec<f64> {
        a.iter().map(|x| x + c).collect()
    }

    fn tanh(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| x.tanh()).collect()
    }

    fn sigmoid(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|&x| sigmoid(x)).collect()
    }

    fn exp(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| x.exp()).collect()
    }

    fn square(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| x * x).collect()
    }

    fn clamp(&mut self, a: &Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
        a.iter().map(|x| x.clamp(lo, hi)).collect()
    }

    fn concat(&mut self, parts: &[Vec<f64>]) -> Vec<f64> {
        parts.concat()
    }

    fn sum_n(&mut self, parts: &[Vec<f64>]) -> Vec<f64> {
        let mut out = parts[0].clone();
        for p in &parts[1..] {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        out
    }

    fn sum(&mut self, a: &Vec<f64>) -> Vec<f64> {
        vec![a.iter().sum()]
    }

    fn broadcast(&mut self, a: &Vec<f64>, n: usize) -> Vec<f64> {
        vec![a[0]; n]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent partial sums let the compiler vectorize.
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Handle to a recorded value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

impl Var {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    Affine { w: Var, b: Var, x: Var },
    MatVec { w: Var, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Concat { start: u32, count: u32 },
    SumN { start: u32, count: u32 },
    Sum(Var),
    Broadcast(Var),
}

#[derive(Debug, Clone, Copy)]
struct Record {
    op: Op,
    off: usize,
    len: usize,
    needs_grad: bool,
}

/// Recording backend. Values live in one arena; [`Tape::clear`] drops the
/// recorded graph but keeps the peak-size counter.
#[derive(Debug, Default)]
pub struct Tape {
    records: Vec<Record>,
    values: Vec<f64>,
    lists: Vec<Var>,
    peak_floats: usize,
}

/// Gradients for every recorded value, indexed by [`Var`].
pub struct Gradients {
    records: Vec<Record>,
    grads: Vec<f64>,
}

impl Gradients {
    pub fn of(&self, v: Var) -> &[f64] {
        let r = &self.records[v.idx()];
        &self.grads[r.off..r.off + r.len]
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Drops every recorded value.
    pub fn clear(&mut self) {
        self.records.clear();
        self.values.clear();
        self.lists.clear();
    }

    /// Number of floats currently recorded.
    pub fn recorded_floats(&self) -> usize {
        self.values.len()
    }

    /// Largest recorded size seen since construction.
    pub fn peak_floats(&self) -> usize {
        self.peak_floats.max(self.values.len())
    }

    /// A leaf that receives a gradient.
    pub fn param(&mut self, data: &[f64]) -> Var {
        self.push_values(Op::Leaf, data, true)
    }

    fn push_values(&mut self, op: Op, data: &[f64], needs_grad: bool) -> Var {
        let off = self.values.len();
        self.values.extend_from_slice(data);
        self.push_record(op, off, data.len(), needs_grad)
    }

    fn push_record(&mut self, op: Op, off: usize, len: usize, needs_grad: bool) -> Var {
        let id = Var(self.records.len() as u32);
        self.records.push(Record { op, off, len, needs_grad });
        self.peak_floats = self.peak_floats.max(self.values.len());
        id
    }

    fn rec(&self, v: Var) -> Record {
        self.records[v.idx()]
    }

    fn slice(&self, v: Var) -> &[f64] {
        let r = self.rec(v);
        &self.values[r.off..r.off + r.len]
    }

    fn ng(&self, vars: &[Var]) -> bool {
        vars.iter().any(|&v| self.records[v.idx()].needs_grad)
    }

    /// Appends `len` values produced by `f` (which may read earlier values).
    fn emit(&mut self, op: Op, inputs: &[Var], len: usize, f: impl FnOnce(&[f64], &mut [f64])) -> Var {
        let needs = self.ng(inputs);
        let off = self.values.len();
        self.values.resize(off + len, 0.0);
        let (before, out) = self.values.split_at_mut(off);
        f(before, out);
        self.push_record(op, off, len, needs)
    }

    fn unary(&mut self, op: Op, a: Var, f: impl Fn(f64) -> f64) -> Var {
        let ra = self.rec(a);
        self.emit(op, &[a], ra.len, |vals, out| {
            for (o, &x) in out.iter_mut().zip(&vals[ra.off..ra.off + ra.len]) {
                *o = f(x);
            }
        })
    }

    fn binary(&mut self, op: Op, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Var {
        let (ra, rb) = (self.rec(a), self.rec(b));
        assert_eq!(ra.len, rb.len, "length mismatch in elementwise op");
        self.emit(op, &[a, b], ra.len, |vals, out| {
            let xs = &vals[ra.off..ra.off + ra.len];
            let ys = &vals[rb.off..rb.off + rb.len];
            for ((o, &x), &y) in out.iter_mut().zip(xs).zip(ys) {
                *o = f(x, y);
            }
        })
    }

    fn push_list(&mut self, parts: &[Var]) -> (u32, u32) {
        let start = self.lists.len() as u32;
        self.lists.extend_from_slice(parts);
        (start, parts.len() as u32)
    }

    /// Reverse pass from the scalar `out`.
    pub fn backward(&self, out: Var) -> Gradients {
        let mut g = vec![0.0; self.values.len()];
        let ro = self.rec(out);
        assert_eq!(ro.len, 1, "backward needs a scalar output");
        g[ro.off] = 1.0;
        let vals = &self.values;
        for i in (0..=out.idx()).rev() {
            let r = self.records[i];
            if !r.needs_grad {
                continue;
            }
            let go: Vec<f64> = g[r.off..r.off + r.len].to_vec();
            if go.iter().all(|&x| x == 0.0) {
                continue;
            }
            let out_vals = &vals[r.off..r.off + r.len];
            match r.op {
                Op::Leaf => {}
                Op::Affine { w, b, x } => {
                    let (rw, rb, rx) = (self.rec(w), self.rec(b), self.rec(x));
                    let cols = rx.len;
                    if rb.needs_grad {
                        for (k, gv) in go.iter().enumerate() {
                            g[rb.off + k] += gv;
                        }
                    }
                    matvec_backward(&mut g, vals, rw, rx, cols, &go);
                }
                Op::MatVec { w, x } => {
                    let (rw, rx) = (self.rec(w), self.rec(x));
                    matvec_backward(&mut g, vals, rw, rx, rx.len, &go);
                }
                Op::Add(a, b) => {
                    accumulate(&mut g, self.rec(a), &go, |_, gv| gv);
                    accumulate(&mut g, self.rec(b), &go, |_, gv| gv);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut g, self.rec(a), &go, |_, gv| gv);
                    accumulate(&mut g, self.rec(b), &go, |_, gv| -gv);
                }
                Op::Mul(a, b) => {
                    let (ra, rb) = (self.rec(a), self.rec(b));
                    let av = vals[ra.off..ra.off + ra.len].to_vec();
                    let bv = &vals[rb.off..rb.off + rb.len];
                    accumulate(&mut g, ra, &go, |k, gv| gv * bv[k]);
                    accumulate(&mut g, rb, &go, |k, gv| gv * av[k]);
                }
                Op::Scale(a, c) => accumulate(&mut g, self.rec(a), &go, |_, gv| gv * c),
                Op::Offset(a) => accumulate(&mut g, self.rec(a), &go, |_, gv| gv),
                Op::Tanh(a) => {
                    accumulate(&mut g, self.rec(a), &go, |k, gv| gv * (1.0 - out_vals[k] * out_vals[k]))
                }
                Op::Sigmoid(a) => {
                    accumulate(&mut g, self.rec(a), &go, |k, gv| gv * out_vals[k] * (1.0 - out_vals[k]))
                }
                Op::Exp(a) => accumulate(&mut g, self.rec(a), &go, |k, gv| gv * out_vals[k]),
                Op::Square(a) => {
                    let ra = self.rec(a);
                    let av = &vals[ra.off..ra.off + ra.len];
                    accumulate(&mut g, ra, &go, |k, gv| 2.0 * gv * av[k])
                }
                Op::Clamp(a, lo, hi) => {
                    let ra = self.rec(a);
                    let av = &vals[ra.off..ra.off + ra.len];
                    accumulate(&mut g, ra, &go, |k, gv| {
                        if av[k] > lo && av[k] < hi {
                            gv
                        } else {
                            0.0
                        }
                    })
                }
                Op::Concat { start, count } => {
                    let mut pos = 0;
                    for &p in &self.lists[start as usize..(start + count) as usize] {
                        let rp = self.rec(p);
                        if rp.needs_grad {
                            for k in 0..rp.len {
                                g[rp.off + k] += go[pos + k];
                            }
                        }
                        pos += rp.len;
                    }
                }
                Op::SumN { start, count } => {
                    for &p in &self.lists[start as usize..(start + count) as usize] {
                        accumulate(&mut g, self.rec(p), &go, |_, gv| gv);
                    }
                }
                Op::Sum(a) => {
                    let gv = go[0];
                    accumulate(&mut g, self.rec(a), &[], |_, _| gv);
                }
                Op::Broadcast(a) => {
                    let total: f64 = go.iter().sum();
                    let ra = self.rec(a);
                    if ra.needs_grad {
                        g[ra.off] += total;
                    }
                }
            }
        }
        Gradients { records: self.records.clone(), grads: g }
    }
}

fn accumulate(g: &mut [f64], r: Record, go: &[f64], f: impl Fn(usize, f64) -> f64) {
    if !r.needs_grad {
        return;
    }
    for k in 0..r.len {
        let gv = if go.is_empty() { 0.0 } else { go[k] };
        g[r.off + k] += f(k, gv);
    }
}

fn matvec_backward(g: &mut [f64], vals: &[f64], rw: Record, rx: Record, cols: usize, go: &[f64]) {
    let x = &vals[rx.off..rx.off + cols];
    let w = &vals[rw.off..rw.off + rw.len];
    let mut gx = vec![0.0; cols];
    for (r, &gr) in go.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        let wr = &w[r * cols..(r + 1) * cols];
        if rw.needs_grad {
            let row = &mut g[rw.off + r * cols..rw.off + (r + 1) * cols];
            for (gw, &xv) in row.iter_mut().zip(x) {
                *gw += gr * xv;
            }
        }
        for (gxk, &wv) in gx.iter_mut().zip(wr) {
            *gxk += gr * wv;
        }
    }
    if rx.needs_grad {
        for (k, v) in gx.into_iter().enumerate() {
            g[rx.off + k] += v;
        }
    }
}

impl Backend for Tape {
    type V = Var;

    fn constant(&mut self, data: &[f64]) -> Var {
        self.push_values(Op::Leaf, data, false)
    }

    fn val<'a>(&'a self, v: &'a Var) -> &'a [f64] {
        self.slice(*v)
    }

    fn affine(&mut self, w: &Var, b: &Var, x: &Var) -> Var {
        let (rw, rb, rx) = (self.rec(*w), self.rec(*b), self.rec(*x));
        let cols = rx.len;
        assert_eq!(rw.len, rb.len * cols, "affine shape mismatch");
        self.emit(Op::Affine { w: *w, b: *b, x: *x }, &[*w, *b, *x], rb.len, |vals, out| {
            let xs = &vals[rx.off..rx.off + cols];
            for (r, o) in out.iter_mut().enumerate() {
                *o = vals[rb.off + r] + dot(&vals[rw.off + r * cols..rw.off + (r + 1) * cols], xs);
            }
        })
    }

    fn matvec(&mut self, w: &Var, rows: usize, x: &Var) -> Var {
        let (rw, rx) = (self.rec(*w), self.rec(*x));
        let cols = rx.len;
        assert_eq!(rw.len, rows * cols, "matvec shape mismatch");
        self.emit(Op::MatVec { w: *w, x: *x }, &[*w, *x], rows, |vals, out| {
            let xs = &vals[rx.off..rx.off + cols];
            for (r, o) in out.iter_mut().enumerate() {
                *o = dot(&vals[rw.off + r * cols..rw.off + (r + 1) * cols], xs);
            }
        })
    }

    fn add(&mut self, a: &Var, b: &Var) -> Var {
        self.binary(Op::Add(*a, *b), *a, *b, |x, y| x + y)
    }

    fn sub(&mut self, a: &Var, b: &Var) -> Var {
        self.binary(Op::Sub(*a, *b), *a, *b, |x, y| x - y)
    }

    fn mul(&mut self, a: &Var, b: &Var) -> Var {
        self.binary(Op::Mul(*a, *b), *a, *b, |x, y| x * y)
    }

    fn scale(&mut self, a: &Var, c: f64) -> Var {
        self.unary(Op::Scale(*a, c), *a, |x| x * c)
    }

    fn offset(&mut self, a: &Var, c: f64) -> Var {
        self.unary(Op::Offset(*a), *a, |x| x + c)
    }

    fn tanh(&mut self, a: &Var) -> Var {
        self.unary(Op::Tanh(*a), *a, f64::tanh)
    }

    fn sigmoid(&mut self, a: &Var) -> Var {
        self.unary(Op::Sigmoid(*a), *a, sigmoid)
    }

    fn exp(&mut self, a: &Var) -> Var {
        self.unary(Op::Exp(*a), *a, f64::exp)
    }

    fn square(&mut self, a: &Var) -> Var {
        self.unary(Op::Square(*a), *a, |x| x * x)
    }

    fn clamp(&mut self, a: &Var, lo: f64, hi: f64) -> Var {
        self.unary(Op::Clamp(*a, lo, hi), *a, |x| x.clamp(lo, hi))
    }

    fn concat(&mut self, parts: &[Var]) -> Var {
        let recs: Vec<Record> = parts.iter().map(|&p| self.rec(p)).collect();
        let len = recs.iter().map(|r| r.len).sum();
        let (start, count) = self.push_list(parts);
        self.emit(Op::Concat { start, count }, parts, len, |vals, out| {
            let mut pos = 0;
            for r in &recs {
                out[pos..pos + r.len].copy_from_slice(&vals[r.off..r.off + r.len]);
                pos += r.len;
            }
        })
    }

    fn sum_n(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "sum_n of nothing");
        let recs: Vec<Record> = parts.iter().map(|&p| self.rec(p)).collect();
        let len = recs[0].len;
        assert!(recs.iter().all(|r| r.len == len), "sum_n length mismatch");
        let (start, count) = self.push_list(parts);
        self.emit(Op::SumN { start, count }, parts, len, |vals, out| {
            for r in &recs {
                for (o, &x) in out.iter_mut().zip(&vals[r.off..r.off + len]) {
                    *o += x;
                }
            }
        })
    }

    fn sum(&mut self, a: &Var) -> Var {
        let ra = self.rec(*a);
        self.emit(Op::Sum(*a), &[*a], 1, |vals, out| {
            out[0] = vals[ra.off..ra.off + ra.len].iter().sum();
        })
    }

    fn broadcast(&mut self, a: &Var, n: usize) -> Var {
        let ra = self.rec(*a);
        assert_eq!(ra.len, 1, "broadcast needs a scalar");
        self.emit(Op::Broadcast(*a), &[*a], n, |vals, out| out.fill(vals[ra.off]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// f(w, b, x) written once, evaluated on both backends.
    fn toy<B: Backend>(be: &mut B, w: &B::V, b: &B::V, x: &B::V) -> B::V {
        let h = be.affine(w, b, x);
        let t = be.tanh(&h);
        let s = be.sigmoid(&h);
        let p = be.mul(&t, &s);
        let e = be.exp(&p);
        let q = be.square(&e);
        let c = be.clamp(&q, -10.0, 1.3);
        let cat = be.concat(&[c.clone(), t.clone()]);
        let d = be.sub(&cat, &cat.clone());
        let d2 = be.add(&d, &cat);
        let z = be.sum_n(&[d2.clone(), d2.clone(), cat]);
        let m = be.matvec(w, 2, x);
        let mm = be.offset(&m, 0.3);
        let mm = be.scale(&mm, -0.7);
        let total = be.sum(&z);
        let tb = be.broadcast(&total, 2);
        let out = be.mul(&tb, &mm);
        be.sum(&out)
    }

    #[test]
    fn tape_matches_eval_and_finite_differences() {
        let w0 = vec![0.3, -0.2, 0.5, 0.1, 0.7, -0.4];
        let b0 = vec![0.05, -0.1];
        let x0 = vec![0.2, -0.3, 0.9];

        let f = |w: &[f64], b: &[f64], x: &[f64]| {
            let mut e = Eval;
            let (w, b, x) = (w.to_vec(), b.to_vec(), x.to_vec());
            let v = toy(&mut e, &w, &b, &x);
            e.scalar(&v)
        };

        let mut tape = Tape::new();
        let w = tape.param(&w0);
        let b = tape.param(&b0);
        let x = tape.param(&x0);
        let out = toy(&mut tape, &w, &b, &x);
        assert!((tape.scalar(&out) - f(&w0, &b0, &x0)).abs() < 1e-14);
        let grads = tape.backward(out);

        let h = 1e-6;
        let check = |analytic: &[f64], which: usize| {
            for k in 0..analytic.len() {
                let mut args = [w0.clone(), b0.clone(), x0.clone()];
                args[which][k] += h;
                let up = f(&args[0], &args[1], &args[2]);
                args[which][k] -= 2.0 * h;
                let down = f(&args[0], &args[1], &args[2]);
                let fd = (up - down) / (2.0 * h);
                assert!((fd - analytic[k]).abs() < 1e-6, "arg {which}[{k}]: {fd} vs {}", analytic[k]);
            }
        };
        check(grads.of(w), 0);
        check(grads.of(b), 1);
        check(grads.of(x), 2);
    }

    #[test]
    fn constants_receive_no_gradient_work() {
        let mut tape = Tape::new();
        let c = tape.constant(&[1.0, 2.0]);
        let p = tape.param(&[3.0, 4.0]);
        let y = tape.mul(&c, &p);
        let s = tape.sum(&y);
        let g = tape.backward(s);
        assert_eq!(g.of(p), &[1.0, 2.0]);
        assert_eq!(g.of(c), &[0.0, 0.0]);
    }

    #[test]
    fn peak_counter_survives_clear() {
        let mut tape = Tape::new();
        tape.param(&[0.0; 100]);
        tape.clear();
        tape.param(&[0.0; 10]);
        assert_eq!(tape.recorded_floats(), 10);
        assert_eq!(tape.peak_floats(), 100);
    }
}
