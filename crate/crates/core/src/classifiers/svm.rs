//! Kernel SVM trained in the dual with SMO.
//!
//! Working-set selection uses second-order information (the LIBSVM WSS
//! rule); the solver stops once the maximal KKT violation drops below
//! `tolerance` or after `max_iter` pair updates. Multiclass problems are
//! decomposed one-vs-rest; all heads share one precomputed kernel matrix.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::CommandLabel;

const TAU: f64 = 1e-12;

/// Two decision values closer than this (relative) are treated as a tie.
pub(crate) const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `(gamma * x.y + coef0)^degree`
    Polynomial {
        degree: u32,
        gamma: f64,
        coef0: f64,
    },
}

impl Kernel {
    pub fn eval(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        let dot = a.dot(&b);
        match *self {
            Kernel::Linear => dot,
            Kernel::Polynomial {
                degree,
                gamma,
                coef0,
            } => (gamma * dot + coef0).powi(degree as i32),
        }
    }

    fn gram(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let n = x.nrows();
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v = self.eval(x.row(i), x.row(j));
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub c: f64,
    pub degree: u32,
    pub gamma: f64,
    pub coef0: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            degree: 3,
            gamma: 1.0,
            coef0: 1.0,
            tolerance: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvmParams {
    pub(crate) fn validate(&self, poly: bool) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!(
                "SVM C must be positive, got {}",
                self.c
            )));
        }
        if poly && self.degree < 2 {
            return Err(Error::invalid(format!(
                "polynomial degree must be at least 2, got {}",
                self.degree
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("SVM tolerance must be positive"));
        }
        Ok(())
    }
}

/// Outcome of one binary dual solve.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub max_violation: f64,
    pub converged: bool,
}

/// Solves `min 1/2 a'Qa - e'a` s.t. `y'a = 0`, `0 <= a <= C`, with
/// `Q_ij = y_i y_j K_ij`. `y` entries must be `+1.0` or `-1.0`.
pub fn solve_dual(
    kernel: &Array2<f64>,
    y: &[f64],
    c: f64,
    tolerance: f64,
    max_iter: usize,
) -> DualSolution {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[[i, j]];
    let at_upper = |a: f64| a >= c;
    let at_lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut max_violation = f64::INFINITY;
    let mut converged = false;
    while iterations < max_iter {
        // i: maximal violating index from the "up" set
        let mut g_max = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if y[t] > 0.0 {
                if !at_upper(alpha[t]) && -grad[t] >= g_max {
                    g_max = -grad[t];
                    i_sel = t;
                }
            } else if !at_lower(alpha[t]) && grad[t] >= g_max {
                g_max = grad[t];
                i_sel = t;
            }
        }
        // j: second-order choice from the "low" set
        let mut g_max2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        if i_sel != usize::MAX {
            let i = i_sel;
            for t in 0..n {
                if y[t] > 0.0 {
                    if !at_lower(alpha[t]) {
                        let diff = g_max + grad[t];
                        g_max2 = g_max2.max(grad[t]);
                        if diff > 0.0 {
                            let quad = kernel[[i, i]] + kernel[[t, t]] - 2.0 * y[i] * q(i, t);
                            let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                            if obj <= obj_min {
                                obj_min = obj;
                                j_sel = t;
                            }
                        }
                    }
                } else if !at_upper(alpha[t]) {
                    let diff = g_max - grad[t];
                    g_max2 = g_max2.max(-grad[t]);
                    if diff > 0.0 {
                        let quad = kernel[[i, i]] + kernel[[t, t]] + 2.0 * y[i] * q(i, t);
                        let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                        if obj <= obj_min {
                            obj_min = obj;
                            j_sel = t;
                        }
                    }
                }
            }
        }
        max_violation = g_max + g_max2;
        if i_sel == usize::MAX || j_sel == usize::MAX || max_violation < tolerance {
            converged = true;
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = kernel[[i, i]] + kernel[[j, j]] + 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = kernel[[i, i]] + kernel[[j, j]] - 2.0 * q(i, j);
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (k, g) in grad.iter_mut().enumerate() {
            *g += q(i, k) * di + q(j, k) * dj;
        }
        iterations += 1;
    }

    // rho from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if at_upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        rho,
        iterations,
        max_violation,
        converged,
    }
}

/// One binary head: `f(x) = sum_i coef_i K(sv_i, x) - rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmHead {
    /// `alpha_i * y_i` over the model's shared support-vector table.
    pub coef: Vec<f64>,
    pub rho: f64,
    /// Primal weights, present for the linear kernel.
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub classes: Vec<CommandLabel>,
    pub support_vectors: Array2<f64>,
    pub heads: Vec<SvmHead>,
}

impl SvmModel {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        labels: &[CommandLabel],
        classes: &[CommandLabel],
        kernel: Kernel,
        params: &SvmParams,
    ) -> Result<SvmModel> {
        let n = x.nrows();
        let gram = kernel.gram(x);
        let mut solutions = Vec::with_capacity(classes.len());
        for &class in classes {
            let y: Vec<f64> = labels
                .iter()
                .map(|&l| if l == class { 1.0 } else { -1.0 })
                .collect();
            let sol = solve_dual(&gram, &y, params.c, params.tolerance, params.max_iter);
            if !sol.converged {
                log::warn!(
                    "SVM head for class {class} stopped after {} iterations with KKT violation {:.3e}",
                    sol.iterations,
                    sol.max_violation
                );
            }
            solutions.push((y, sol));
        }

        // shared table of rows that are support vectors for any head
        let used: Vec<usize> = (0..n)
            .filter(|&i| solutions.iter().any(|(_, s)| s.alpha[i] > 0.0))
            .collect();
        let support_vectors = x.select(ndarray::Axis(0), &used);
        let heads = solutions
            .iter()
            .map(|(y, s)| {
                let coef: Vec<f64> = used.iter().map(|&i| s.alpha[i] * y[i]).collect();
                let weights = matches!(kernel, Kernel::Linear).then(|| {
                    support_vectors
                        .t()
                        .dot(&Array1::from(coef.clone()))
                        .to_vec()
                });
                SvmHead {
                    coef,
                    rho: s.rho,
                    weights,
                }
            })
            .collect();
        Ok(SvmModel {
            kernel,
            classes: classes.to_vec(),
            support_vectors,
            heads,
        })
    }

    pub fn n_features(&self) -> usize {
        self.support_vectors.ncols()
    }

    pub fn decision_values(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let kernel_row: Option<Vec<f64>> = match self.kernel {
            Kernel::Linear => None,
            _ => Some(
                self.support_vectors
                    .rows()
                    .into_iter()
                    .map(|sv| self.kernel.eval(sv, x))
                    .collect(),
            ),
        };
        self.heads
            .iter()
            .map(|h| match (&h.weights, &kernel_row) {
                (Some(w), _) => ArrayView1::from(w.as_slice()).dot(&x) - h.rho,
                (None, Some(k)) => h.coef.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() - h.rho,
                (None, None) => unreachable!("non-linear head without kernel row"),
            })
            .collect()
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> CommandLabel {
        let values = self.decision_values(x);
        self.classes[argmax_lowest(&values)]
    }
}

/// Index of the maximum; near-ties resolve to the lowest index.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_EPS * max.abs().max(1.0);
    values.iter().position(|&v| v >= max - tol).unwrap_or(0)
}
