//! Sparse quadratic expressions. Every constraint of the stowing problem is
//! affine or bilinear in the flat variable vector, so one representation
//! (constant + linear + quadratic terms) covers the whole constraint set and
//! gives exact analytic first derivatives.

use std::collections::HashMap;

/// `value(y) = constant + Σ lin_k·y_k + Σ quad_(a,b)·y_a·y_b` with `a ≤ b`.
#[derive(Debug, Clone, Default)]
pub struct QuadExpr {
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    /// Coefficient of the monomial `y_a·y_b` (stored once per unordered pair).
    pub quad: Vec<(usize, usize, f64)>,
}

impl QuadExpr {
    pub fn constant(c: f64) -> Self {
        QuadExpr {
            constant: c,
            ..Default::default()
        }
    }

    pub fn lin(mut self, idx: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.linear.push((idx, coef));
        }
        self
    }

    pub fn quad(mut self, a: usize, b: usize, coef: f64) -> Self {
        if coef != 0.0 {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            self.quad.push((a, b, coef));
        }
        self
    }

    pub fn is_affine(&self) -> bool {
        self.quad.is_empty()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(k, c) in &self.linear {
            v += c * y[k];
        }
        for &(a, b, c) in &self.quad {
            v += c * y[a] * y[b];
        }
        v
    }

    /// Accumulate the gradient into a dense buffer (must be zeroed by the
    /// caller if a fresh gradient is wanted).
    pub fn add_grad(&self, y: &[f64], scale: f64, grad: &mut [f64]) {
        for &(k, c) in &self.linear {
            grad[k] += scale * c;
        }
        for &(a, b, c) in &self.quad {
            if a == b {
                grad[a] += scale * 2.0 * c * y[a];
            } else {
                grad[a] += scale * c * y[b];
                grad[b] += scale * c * y[a];
            }
        }
    }

    /// Sparse gradient as (index, value) pairs, duplicates merged.
    pub fn grad_sparse(&self, y: &[f64]) -> Vec<(usize, f64)> {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for &(k, c) in &self.linear {
            *acc.entry(k).or_insert(0.0) += c;
        }
        for &(a, b, c) in &self.quad {
            if a == b {
                *acc.entry(a).or_insert(0.0) += 2.0 * c * y[a];
            } else {
                *acc.entry(a).or_insert(0.0) += c * y[b];
                *acc.entry(b).or_insert(0.0) += c * y[a];
            }
        }
        let mut out: Vec<(usize, f64)> = acc.into_iter().filter(|&(_, v)| v != 0.0).collect();
        out.sort_unstable_by_key(|&(k, _)| k);
        out
    }

    /// Indices of every variable the expression references.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self
            .linear
            .iter()
            .map(|&(k, _)| k)
            .chain(self.quad.iter().flat_map(|&(a, b, _)| [a, b]))
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_grad_of_mixed_expr() {
        // g = 2 + 3 y0 + y1^2 + 4 y0 y2
        let e = QuadExpr::constant(2.0).lin(0, 3.0).quad(1, 1, 1.0).quad(0, 2, 4.0);
        let y = [1.0, 2.0, -1.0];
        assert_eq!(e.eval(&y), 2.0 + 3.0 + 4.0 - 4.0);
        let mut g = [0.0; 3];
        e.add_grad(&y, 1.0, &mut g);
        assert_eq!(g, [3.0 - 4.0, 4.0, 4.0]);
        let gs = e.grad_sparse(&y);
        assert_eq!(gs, vec![(0, -1.0), (1, 4.0), (2, 4.0)]);
    }
}
