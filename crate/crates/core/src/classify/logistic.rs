//! L2-regularized logistic regression fitted by batch gradient descent
//! with Armijo backtracking.
//!
//! Loss: `(1/n) Σ [softplus(z_i) - y_i z_i] + (λ/2) ||w||²`, with
//! `z_i = w·x_i + b` and the bias left unpenalized.

/// Sparse row over a dense local index space.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn dot(&self, w: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| w[i as usize] * v)
            .sum()
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub struct Problem<'a> {
    pub rows: &'a [SparseRow],
    pub labels: &'a [bool],
    pub dim: usize,
    pub lambda: f64,
}

impl Problem<'_> {
    pub fn loss(&self, w: &[f64], b: f64) -> f64 {
        let n = self.rows.len() as f64;
        let data: f64 = self
            .rows
            .iter()
            .zip(self.labels)
            .map(|(x, &y)| {
                let z = x.dot(w) + b;
                softplus(z) - if y { z } else { 0.0 }
            })
            .sum();
        data / n + 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>()
    }

    /// Loss together with its gradient in `w` and `b`.
    pub fn loss_grad(&self, w: &[f64], b: f64) -> (f64, Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut grad: Vec<f64> = w.iter().map(|v| self.lambda * v).collect();
        let mut grad_b = 0.0;
        let mut data = 0.0;
        for (x, &y) in self.rows.iter().zip(self.labels) {
            let z = x.dot(w) + b;
            data += softplus(z) - if y { z } else { 0.0 };
            let r = (sigmoid(z) - if y { 1.0 } else { 0.0 }) / n;
            for (&i, &v) in x.indices.iter().zip(&x.values) {
                grad[i as usize] += r * v;
            }
            grad_b += r;
        }
        let loss = data / n + 0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>();
        (loss, grad, grad_b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop once the gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step improves the loss by less than this
    /// fraction.
    pub rel_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iter: 400,
            grad_tol: 1e-8,
            rel_tol: 1e-10,
        }
    }
}

pub fn fit(problem: &Problem<'_>, opts: &DescentOptions) -> (Vec<f64>, f64) {
    let mut w = vec![0.0; problem.dim];
    let mut b = 0.0;
    let mut step = 1.0;
    let (mut loss, mut grad, mut grad_b) = problem.loss_grad(&w, b);
    for _ in 0..opts.max_iter {
        let g2: f64 = grad.iter().map(|g| g * g).sum::<f64>() + grad_b * grad_b;
        if g2.sqrt() < opts.grad_tol {
            break;
        }
        step *= 2.0;
        let mut accepted = None;
        while step > 1e-16 {
            let cand: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let cand_b = b - step * grad_b;
            let cand_loss = problem.loss(&cand, cand_b);
            if cand_loss <= loss - 0.5 * step * g2 {
                accepted = Some((cand, cand_b, cand_loss));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cand_b, cand_loss)) = accepted else {
            break;
        };
        let improvement = loss - cand_loss;
        w = cand;
        b = cand_b;
        if improvement < opts.rel_tol * loss.abs().max(1e-300) {
            break;
        }
        (loss, grad, grad_b) = problem.loss_grad(&w, b);
    }
    (w, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<SparseRow>, Vec<bool>) {
        let rows = (0..n)
            .map(|_| {
                let mut idx: Vec<u32> = (0..dim as u32).filter(|_| rng.gen_bool(0.4)).collect();
                if idx.is_empty() {
                    idx.push(0);
                }
                let values = idx.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
                SparseRow { indices: idx, values }
            })
            .collect();
        let labels = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        (rows, labels)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (rows, labels) = random_problem(&mut rng, 12, 6);
            let p = Problem { rows: &rows, labels: &labels, dim: 6, lambda: rng.gen_range(1e-3..1.0) };
            let w: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b = rng.gen_range(-1.0..1.0);
            let (_, g, gb) = p.loss_grad(&w, b);
            let h = 1e-5;
            for j in 0..6 {
                let (mut up, mut dn) = (w.clone(), w.clone());
                up[j] += h;
                dn[j] -= h;
                let fd = (p.loss(&up, b) - p.loss(&dn, b)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= 1e-6 * fd.abs().max(1e-3));
            }
            let fd = (p.loss(&w, b + h) - p.loss(&w, b - h)) / (2.0 * h);
            assert!((fd - gb).abs() <= 1e-6 * fd.abs().max(1e-3));
        }
    }

    #[test]
    fn separable_data_is_fit() {
        let rows: Vec<SparseRow> = (0..20)
            .map(|i| SparseRow { indices: vec![(i % 2) as u32], values: vec![1.0] })
            .collect();
        let labels: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let p = Problem { rows: &rows, labels: &labels, dim: 2, lambda: 1e-3 };
        let (w, b) = fit(&p, &DescentOptions::default());
        for (x, &y) in rows.iter().zip(&labels) {
            assert_eq!(sigmoid(x.dot(&w) + b) >= 0.5, y);
        }
        assert!(p.loss(&w, b) < p.loss(&[0.0, 0.0], 0.0));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(softplus(800.0).is_finite() && softplus(-800.0) >= 0.0);
    }
}
