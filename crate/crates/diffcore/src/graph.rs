//! Reverse-mode differentiation tape.

use crate::error::DiffError;
use crate::matrix::Matrix;
use crate::real::Real;

/// Handle to a node on a [`Graph`]. Only valid for the graph that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddConst(Var),
    MulConst(Var, Matrix<T>),
    Scale(Var, T),
    AddScalar(Var),
    Relu(Var),
    Exp(Var),
    Ln(Var),
    XLogX(Var),
    Square(Var),
    SoftmaxRows(Var),
    NormalizeRows(Var, T),
    NormalizeCols(Var, T),
    Sum(Var),
    RowSum(Var),
    ColMean(Var),
    Diag(Var),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    tracked: bool,
}

/// Records operations on matrices so gradients can be propagated back to
/// the parameters.
#[derive(Debug, Clone, Default)]
pub struct Graph<T: Real = f64> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient of the root with respect to `var`, or `None` when `var`
    /// does not influence the root through any parameter path.
    pub fn get(&self, var: Var) -> Option<&Matrix<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var) -> Option<Matrix<T>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Matrix<T> {
        &self.nodes[var.0].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, var: Var) -> T {
        self.nodes[var.0].value.data()[0]
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push_raw(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push_raw(value, Op::Leaf, false)
    }

    fn push_raw(&mut self, value: Matrix<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Matrix<T>, op: Op<T>, parents: &[Var]) -> Result<Var, DiffError> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: name });
        }
        let tracked = parents.iter().any(|p| self.nodes[p.0].tracked);
        Ok(self.push_raw(value, op, tracked))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b), &[a, b])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).transpose();
        self.push("transpose", v, Op::Transpose(x), &[x])
    }

    /// Adds a `1×n` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var, DiffError> {
        let mut v = self.value(x).clone();
        v.add_row_inplace(self.value(row))?;
        self.push("add_row", v, Op::AddRow(x, row), &[x, row])
    }

    /// `x · W + b`.
    pub fn linear(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var, DiffError> {
        let xw = self.matmul(x, weight)?;
        self.add_row(xw, bias)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let v = self.value(a).add(self.value(b))?;
        self.push("add", v, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let v = self.value(a).sub(self.value(b))?;
        self.push("sub", v, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let v = self.value(a).hadamard(self.value(b))?;
        self.push("mul", v, Op::Mul(a, b), &[a, b])
    }

    /// Adds a constant matrix; the gradient flows to `x` only.
    pub fn add_const(&mut self, x: Var, c: &Matrix<T>) -> Result<Var, DiffError> {
        let v = self.value(x).add(c)?;
        self.push("add_const", v, Op::AddConst(x), &[x])
    }

    /// Elementwise product with a constant matrix (e.g. a mask).
    pub fn mul_const(&mut self, x: Var, c: Matrix<T>) -> Result<Var, DiffError> {
        let v = self.value(x).hadamard(&c)?;
        self.push("mul_const", v, Op::MulConst(x, c), &[x])
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var, DiffError> {
        let v = self.value(x).scale(s);
        self.push("scale", v, Op::Scale(x, s), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, s: T) -> Result<Var, DiffError> {
        let v = self.value(x).map(|a| a + s);
        self.push("add_scalar", v, Op::AddScalar(x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).relu();
        self.push("relu", v, Op::Relu(x), &[x])
    }

    pub fn exp(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).map(T::exp);
        self.push("exp", v, Op::Exp(x), &[x])
    }

    pub fn ln(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).map(T::ln);
        self.push("ln", v, Op::Ln(x), &[x])
    }

    /// Elementwise `x·ln x` with `0·ln 0 = 0`. Inputs must be non-negative.
    pub fn xlogx(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).map(|a| if a == T::zero() { T::zero() } else { a * a.ln() });
        self.push("xlogx", v, Op::XLogX(x), &[x])
    }

    pub fn square(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).map(|a| a * a);
        self.push("square", v, Op::Square(x), &[x])
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).softmax_rows();
        self.push("softmax_rows", v, Op::SoftmaxRows(x), &[x])
    }

    pub fn l2_normalize_rows(&mut self, x: Var, eps: T) -> Result<Var, DiffError> {
        let v = self.value(x).l2_normalize_rows(eps);
        self.push("l2_normalize_rows", v, Op::NormalizeRows(x, eps), &[x])
    }

    pub fn l2_normalize_cols(&mut self, x: Var, eps: T) -> Result<Var, DiffError> {
        let v = self.value(x).l2_normalize_cols(eps);
        self.push("l2_normalize_cols", v, Op::NormalizeCols(x, eps), &[x])
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = Matrix::scalar(self.value(x).sum());
        self.push("sum", v, Op::Sum(x), &[x])
    }

    /// `n×k → n×1`.
    pub fn row_sum(&mut self, x: Var) -> Result<Var, DiffError> {
        let m = self.value(x);
        let v = Matrix::from_fn(m.rows(), 1, |i, _| m.row(i).iter().copied().sum());
        self.push("row_sum", v, Op::RowSum(x), &[x])
    }

    /// `n×k → 1×k`.
    pub fn col_mean(&mut self, x: Var) -> Result<Var, DiffError> {
        let v = self.value(x).col_mean();
        self.push("col_mean", v, Op::ColMean(x), &[x])
    }

    /// Diagonal of a square matrix as an `n×1` column.
    pub fn diag(&mut self, x: Var) -> Result<Var, DiffError> {
        let m = self.value(x);
        if m.rows() != m.cols() {
            return Err(DiffError::shape("diag", m.shape(), (m.cols(), m.rows())));
        }
        let v = Matrix::from_fn(m.rows(), 1, |i, _| m.get(i, i));
        self.push("diag", v, Op::Diag(x), &[x])
    }

    /// Sum of a list of same-shaped nodes.
    pub fn add_all(&mut self, xs: &[Var]) -> Result<Var, DiffError> {
        let (&first, rest) = xs
            .split_first()
            .ok_or_else(|| DiffError::Contract("add_all needs at least one term".into()))?;
        rest.iter().try_fold(first, |acc, &x| self.add(acc, x))
    }

    /// Propagates gradients from the 1×1 node `root` to every node that
    /// depends on a parameter.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>, DiffError> {
        let (rows, cols) = self.value(root).shape();
        if (rows, cols) != (1, 1) {
            return Err(DiffError::NonScalarRoot { rows, cols });
        }
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; root.0 + 1];
        if !self.nodes[root.0].tracked {
            return Ok(Gradients { grads });
        }
        grads[root.0] = Some(Matrix::scalar(T::one()));

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.tracked || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &Matrix<T>, grads: &mut [Option<Matrix<T>>]) -> Result<(), DiffError> {
        let zero = T::zero();
        let one = T::one();
        let mut send = |var: Var, delta: Matrix<T>| -> Result<(), DiffError> {
            if !self.nodes[var.0].tracked {
                return Ok(());
            }
            match &mut grads[var.0] {
                Some(acc) => acc.add_assign(&delta),
                slot @ None => {
                    *slot = Some(delta);
                    Ok(())
                }
            }
        };
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].tracked {
                    send(*a, g.matmul_nt(self.value(*b))?)?;
                }
                if self.nodes[b.0].tracked {
                    send(*b, self.value(*a).matmul_tn(g)?)?;
                }
            }
            Op::Transpose(x) => send(*x, g.transpose())?,
            Op::AddRow(x, row) => {
                send(*x, g.clone())?;
                if self.nodes[row.0].tracked {
                    let sums = g.col_mean().scale(T::of(g.rows() as f64));
                    send(*row, sums)?;
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.clone())?;
            }
            Op::Sub(a, b) => {
                send(*a, g.clone())?;
                send(*b, g.scale(-one))?;
            }
            Op::Mul(a, b) => {
                send(*a, g.hadamard(self.value(*b))?)?;
                send(*b, g.hadamard(self.value(*a))?)?;
            }
            Op::AddConst(x) | Op::AddScalar(x) => send(*x, g.clone())?,
            Op::MulConst(x, c) => send(*x, g.hadamard(c)?)?,
            Op::Scale(x, s) => send(*x, g.scale(*s))?,
            Op::Relu(x) => {
                let d = g.zip_map(self.value(*x), "relu_grad", |gi, xi| if xi > zero { gi } else { zero })?;
                send(*x, d)?;
            }
            Op::Exp(x) => send(*x, g.hadamard(y)?)?,
            Op::Ln(x) => send(*x, g.zip_map(self.value(*x), "ln_grad", |gi, xi| gi / xi)?)?,
            Op::XLogX(x) => {
                let d = g.zip_map(self.value(*x), "xlogx_grad", |gi, xi| {
                    if xi == zero {
                        zero
                    } else {
                        gi * (xi.ln() + one)
                    }
                })?;
                send(*x, d)?;
            }
            Op::Square(x) => {
                let two = T::of(2.0);
                send(*x, g.zip_map(self.value(*x), "square_grad", |gi, xi| two * xi * gi)?)?;
            }
            Op::SoftmaxRows(x) => {
                let mut d = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                    for ((o, &yi), &gi) in d.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = yi * (gi - dot);
                    }
                }
                send(*x, d)?;
            }
            Op::NormalizeRows(x, eps) => {
                let xv = self.value(*x);
                let mut d = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let n = xv.row(i).iter().map(|&a| a * a).sum::<T>().sqrt();
                    let (yr, gr) = (y.row(i), g.row(i));
                    if n >= *eps {
                        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for ((o, &yi), &gi) in d.row_mut(i).iter_mut().zip(yr).zip(gr) {
                            *o = (gi - yi * dot) / n;
                        }
                    } else {
                        for (o, &gi) in d.row_mut(i).iter_mut().zip(gr) {
                            *o = gi / *eps;
                        }
                    }
                }
                send(*x, d)?;
            }
            Op::NormalizeCols(x, eps) => {
                let norms = self.value(*x).col_norms();
                let mut dots = vec![zero; y.cols()];
                for i in 0..y.rows() {
                    for ((acc, &yi), &gi) in dots.iter_mut().zip(y.row(i)).zip(g.row(i)) {
                        *acc = *acc + yi * gi;
                    }
                }
                let mut d = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    for (j, o) in d.row_mut(i).iter_mut().enumerate() {
                        let n = norms[j];
                        *o = if n >= *eps { (gr[j] - yr[j] * dots[j]) / n } else { gr[j] / *eps };
                    }
                }
                send(*x, d)?;
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                send(*x, Matrix::filled(r, c, g.data()[0]))?;
            }
            Op::RowSum(x) => {
                let (r, c) = self.value(*x).shape();
                send(*x, Matrix::from_fn(r, c, |i, _| g.data()[i]))?;
            }
            Op::ColMean(x) => {
                let (r, c) = self.value(*x).shape();
                let n = T::of(r as f64);
                send(*x, Matrix::from_fn(r, c, |_, j| g.data()[j] / n))?;
            }
            Op::Diag(x) => {
                let n = self.value(*x).rows();
                send(*x, Matrix::from_fn(n, n, |i, j| if i == j { g.data()[i] } else { zero }))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    /// Central finite differences of `f` with respect to every entry of `x`.
    fn numeric_grad(x: &Matrix<f64>, f: &dyn Fn(&Matrix<f64>) -> f64) -> Matrix<f64> {
        let h = 1e-5;
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for k in 0..x.len() {
            let mut plus = x.clone();
            plus.data_mut()[k] += h;
            let mut minus = x.clone();
            minus.data_mut()[k] -= h;
            out.data_mut()[k] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
        out
    }

    fn assert_close(analytic: &Matrix<f64>, numeric: &Matrix<f64>) {
        for (a, n) in analytic.data().iter().zip(numeric.data()) {
            let denom = a.abs().max(n.abs()).max(1e-6);
            assert!((a - n).abs() / denom <= 1e-4, "analytic {a} vs numeric {n}");
        }
    }

    /// Checks a unary op composed with a random linear readout so the
    /// upstream gradient is not all ones.
    fn check_unary(rows: usize, cols: usize, seed: u64, op: impl Fn(&mut Graph<f64>, Var) -> Var) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = random(rows, cols, &mut rng);
        let eval = |x: &Matrix<f64>, keep: bool| -> (f64, Option<Matrix<f64>>) {
            let mut g = Graph::new();
            let xv = g.param(x.clone());
            let y = op(&mut g, xv);
            let (yr, yc) = g.value(y).shape();
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let w = g.constant(random(yr, yc, &mut r));
            let prod = g.mul(y, w).unwrap();
            let loss = g.sum(prod).unwrap();
            let grad = keep.then(|| g.backward(loss).unwrap().get(xv).unwrap().clone());
            (g.scalar(loss), grad)
        };
        let analytic = eval(&x0, true).1.unwrap();
        let numeric = numeric_grad(&x0, &|x| eval(x, false).0);
        assert_close(&analytic, &numeric);
    }

    #[test]
    fn sum_gives_ones() {
        let mut g = Graph::new();
        let w = g.param(Matrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64));
        let s = g.sum(w).unwrap();
        let grads = g.backward(s).unwrap();
        assert!(grads.get(w).unwrap().data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn squared_norm_gives_twice_x() {
        let mut g = Graph::new();
        let x0 = Matrix::from_rows(&[vec![0.5, -2.0, 3.0]]).unwrap();
        let x = g.param(x0.clone());
        let sq = g.square(x).unwrap();
        let s = g.sum(sq).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap(), &x0.scale(2.0));
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut g = Graph::<f64>::new();
        let x = g.param(Matrix::zeros(2, 2));
        assert_eq!(g.backward(x).unwrap_err(), DiffError::NonScalarRoot { rows: 2, cols: 2 });
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::new();
        let c = g.constant(Matrix::filled(1, 2, 1.0));
        let p = g.param(Matrix::filled(1, 2, 2.0));
        let m = g.mul(c, p).unwrap();
        let s = g.sum(m).unwrap();
        let grads = g.backward(s).unwrap();
        assert!(grads.get(c).is_none());
        assert_eq!(grads.get(p).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn non_finite_is_reported() {
        let mut g = Graph::new();
        let x = g.param(Matrix::scalar(0.0));
        assert_eq!(g.ln(x).unwrap_err(), DiffError::NonFinite { op: "ln" });
    }

    #[test]
    fn linear_grad_all_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (x0, w0, b0) = (random(3, 4, &mut rng), random(4, 2, &mut rng), random(1, 2, &mut rng));
        let f = |x: &Matrix<f64>, w: &Matrix<f64>, b: &Matrix<f64>| {
            x.linear(w, b).unwrap().map(|v| v * v).sum()
        };
        let mut g = Graph::new();
        let (x, w, b) = (g.param(x0.clone()), g.param(w0.clone()), g.param(b0.clone()));
        let y = g.linear(x, w, b).unwrap();
        let sq = g.square(y).unwrap();
        let loss = g.sum(sq).unwrap();
        let grads = g.backward(loss).unwrap();
        assert_close(grads.get(x).unwrap(), &numeric_grad(&x0, &|m| f(m, &w0, &b0)));
        assert_close(grads.get(w).unwrap(), &numeric_grad(&w0, &|m| f(&x0, m, &b0)));
        assert_close(grads.get(b).unwrap(), &numeric_grad(&b0, &|m| f(&x0, &w0, m)));
    }

    #[test]
    fn unary_ops_match_finite_differences() {
        for seed in 0..5 {
            check_unary(3, 4, seed, |g, x| g.relu(x).unwrap());
            check_unary(3, 4, seed, |g, x| g.exp(x).unwrap());
            check_unary(3, 4, seed, |g, x| g.square(x).unwrap());
            check_unary(3, 4, seed, |g, x| g.transpose(x).unwrap());
            check_unary(3, 4, seed, |g, x| g.softmax_rows(x).unwrap());
            check_unary(3, 4, seed, |g, x| g.l2_normalize_rows(x, 1e-12).unwrap());
            check_unary(5, 3, seed, |g, x| g.l2_normalize_cols(x, 1e-12).unwrap());
            check_unary(3, 4, seed, |g, x| g.row_sum(x).unwrap());
            check_unary(3, 4, seed, |g, x| g.col_mean(x).unwrap());
            check_unary(4, 4, seed, |g, x| g.diag(x).unwrap());
            check_unary(3, 4, seed, |g, x| g.scale(x, -1.7).unwrap());
            check_unary(3, 4, seed, |g, x| g.add_scalar(x, 0.3).unwrap());
            check_unary(3, 4, seed, |g, x| {
                let e = g.exp(x).unwrap();
                g.ln(e).unwrap()
            });
            check_unary(3, 4, seed, |g, x| {
                let p = g.softmax_rows(x).unwrap();
                g.xlogx(p).unwrap()
            });
            check_unary(3, 4, seed, |g, x| {
                let xt = g.transpose(x).unwrap();
                g.matmul(x, xt).unwrap()
            });
            check_unary(3, 4, seed, |g, x| {
                let m = Matrix::from_fn(3, 4, |i, j| (i + j) as f64 * 0.5);
                let a = g.mul_const(x, m.clone()).unwrap();
                let b = g.add_const(x, &m).unwrap();
                let c = g.mul(a, b).unwrap();
                g.sub(c, x).unwrap()
            });
        }
    }

    #[test]
    fn guarded_normalization_gradient() {
        // a zero column sits below eps and is divided by eps instead
        let mut g = Graph::new();
        let x = g.param(Matrix::<f64>::from_rows(&[vec![0.0, 3.0], vec![0.0, 4.0]]).unwrap());
        let y = g.l2_normalize_cols(x, 1e-12).unwrap();
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        let d = grads.get(x).unwrap();
        assert_eq!(d.get(0, 0), 1e12);
        assert!((d.get(0, 1) - (1.0 - 0.6 * 1.4) / 5.0).abs() < 1e-15);
    }
}
