//! L2-regularized logistic regression fitted by full-batch gradient descent
//! with backtracking line search.
//!
//! Objective, for rows `x_i`, labels `y_i ∈ {0,1}` and margins `z_i = x_i·w + b`:
//!
//! ```text
//! f(w, b) = (1/n) Σ_i [softplus(z_i) − y_i z_i] + (λ/2) ‖w‖²
//! ```
//!
//! The bias is not regularized.

use crate::error::{Error, Result};
use crate::scalar::{Probability, Real};
use crate::walk::FeatureMatrix;

pub const DEFAULT_L2: f64 = 0.1;
pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Row access the optimizer needs from a design matrix.
pub trait Design<T> {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out[i] = x_i · w`
    fn dot_rows(&self, w: &[T], out: &mut [T]);
    /// `out[j] += Σ_i coef[i] · x_ij`
    fn accumulate(&self, coef: &[T], out: &mut [T]);
    /// Position of the first non-finite entry, if any.
    fn first_non_finite(&self) -> Option<(usize, usize)>;
}

impl<T: Real> Design<T> for FeatureMatrix<T> {
    fn rows(&self) -> usize {
        FeatureMatrix::rows(self)
    }

    fn cols(&self) -> usize {
        FeatureMatrix::cols(self)
    }

    fn dot_rows(&self, w: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).iter().zip(w).map(|(&x, &wj)| x * wj).sum();
        }
    }

    fn accumulate(&self, coef: &[T], out: &mut [T]) {
        for (i, &c) in coef.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o = *o + c * x;
            }
        }
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        (0..FeatureMatrix::rows(self)).find_map(|i| self.row(i).iter().position(|v| !v.is_finite()).map(|j| (i, j)))
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Probability> SparseMatrix<T> {
    pub fn new(cols: usize) -> Self {
        Self { cols, indptr: vec![0], indices: Vec::new(), values: Vec::new() }
    }

    /// Appends a row of `(column, value)` entries.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, T)>) {
        for (j, v) in entries {
            assert!(j < self.cols, "column {j} out of range");
            self.indices.push(j);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &T)> {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()].iter().copied().zip(&self.values[span])
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

impl<T: Real> Design<T> for SparseMatrix<T> {
    fn rows(&self) -> usize {
        self.indptr.len() - 1
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn dot_rows(&self, w: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, &x)| x * w[j]).sum();
        }
    }

    fn accumulate(&self, coef: &[T], out: &mut [T]) {
        for (i, &c) in coef.iter().enumerate() {
            for (j, &x) in self.row(i) {
                out[j] = out[j] + c * x;
            }
        }
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        (0..Design::<T>::rows(self)).find_map(|i| self.row(i).find(|(_, v)| !v.is_finite()).map(|(j, _)| (i, j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub l2: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { l2: DEFAULT_L2, max_iters: DEFAULT_MAX_ITERS, tolerance: DEFAULT_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the final gradient, bias included.
    pub gradient_norm: T,
}

impl<T: Real> LogisticFit<T> {
    pub fn predict_margin<D: Design<T>>(&self, x: &D) -> Vec<T> {
        let mut z = vec![T::zero(); x.rows()];
        x.dot_rows(&self.weights, &mut z);
        z.iter_mut().for_each(|v| *v = *v + self.bias);
        z
    }

    pub fn predict_proba<D: Design<T>>(&self, x: &D) -> Vec<T> {
        self.predict_margin(x).into_iter().map(sigmoid).collect()
    }
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (-z.abs()).exp().ln_1p()
}

/// Objective value plus gradient `(∂w, ∂b)` at `(w, b)`.
pub fn objective_and_gradient<T: Real, D: Design<T>>(
    x: &D,
    labels: &[bool],
    l2: T,
    w: &[T],
    b: T,
) -> (T, Vec<T>, T) {
    let n = T::from_usize(labels.len()).expect("row count fits the scalar");
    let mut z = vec![T::zero(); x.rows()];
    x.dot_rows(w, &mut z);
    let mut loss = T::zero();
    let mut residual = vec![T::zero(); z.len()];
    for ((zi, &yi), ri) in z.iter().zip(labels).zip(residual.iter_mut()) {
        let zi = *zi + b;
        let y = if yi { T::one() } else { T::zero() };
        loss = loss + softplus(zi) - y * zi;
        *ri = (sigmoid(zi) - y) / n;
    }
    let half = T::of(0.5);
    let reg = half * l2 * w.iter().map(|&v| v * v).sum::<T>();
    let mut grad: Vec<T> = w.iter().map(|&v| l2 * v).collect();
    x.accumulate(&residual, &mut grad);
    let db = residual.iter().copied().sum();
    (loss / n + reg, grad, db)
}

pub fn objective<T: Real, D: Design<T>>(x: &D, labels: &[bool], l2: T, w: &[T], b: T) -> T {
    let n = T::from_usize(labels.len()).expect("row count fits the scalar");
    let mut z = vec![T::zero(); x.rows()];
    x.dot_rows(w, &mut z);
    let loss: T = z
        .iter()
        .zip(labels)
        .map(|(&zi, &yi)| {
            let zi = zi + b;
            softplus(zi) - if yi { zi } else { T::zero() }
        })
        .sum();
    loss / n + T::of(0.5) * l2 * w.iter().map(|&v| v * v).sum::<T>()
}

fn validate<T: Real, D: Design<T>>(x: &D, labels: &[bool], cfg: &LogisticConfig) -> Result<()> {
    if x.rows() != labels.len() {
        return Err(Error::InvalidArgument(format!("{} rows but {} labels", x.rows(), labels.len())));
    }
    if labels.len() < 2 {
        return Err(Error::InvalidArgument("need at least two training rows".into()));
    }
    if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
        return Err(Error::SingleClass);
    }
    if !(cfg.l2 >= 0.0 && cfg.l2.is_finite()) {
        return Err(Error::InvalidArgument(format!("l2 must be a finite non-negative number, got {}", cfg.l2)));
    }
    if let Some((row, col)) = x.first_non_finite() {
        return Err(Error::NonFinite { row, col });
    }
    Ok(())
}

fn max_abs<T: Real>(g: &[T], db: T) -> T {
    g.iter().fold(db.abs(), |m, &v| m.max(v.abs()))
}

/// Minimizes the regularized objective from the origin.
pub fn fit<T: Real, D: Design<T>>(x: &D, labels: &[bool], cfg: &LogisticConfig) -> Result<LogisticFit<T>> {
    validate(x, labels, cfg)?;
    let l2 = T::of(cfg.l2);
    let tol = T::of(cfg.tolerance);
    let armijo = T::of(1e-4);
    let half = T::of(0.5);
    let min_step = T::of(1e-20);

    let mut w = vec![T::zero(); x.cols()];
    let mut b = T::zero();
    let (mut f, mut g, mut db) = objective_and_gradient(x, labels, l2, &w, b);
    let mut step = T::one();
    let mut iterations = 0;
    let mut converged = max_abs(&g, db) < tol;

    while !converged && iterations < cfg.max_iters {
        let sq: T = g.iter().map(|&v| v * v).sum::<T>() + db * db;
        let mut accepted = None;
        while step > min_step {
            let w_new: Vec<T> = w.iter().zip(&g).map(|(&wi, &gi)| wi - step * gi).collect();
            let b_new = b - step * db;
            let f_new = objective(x, labels, l2, &w_new, b_new);
            if f_new <= f - armijo * step * sq {
                accepted = Some((w_new, b_new));
                break;
            }
            step = step * half;
        }
        let Some((w_new, b_new)) = accepted else {
            break;
        };
        w = w_new;
        b = b_new;
        (f, g, db) = objective_and_gradient(x, labels, l2, &w, b);
        iterations += 1;
        converged = max_abs(&g, db) < tol;
        step = step + step;
    }

    let gradient_norm = max_abs(&g, db);
    Ok(LogisticFit { weights: w, bias: b, objective: f, iterations, converged, gradient_norm })
}
