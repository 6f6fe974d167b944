use super::Coefficients;
use crate::error::{invalid, Result};

/// Deliberately non-commutative diffusion on the first two modes:
/// `B(v)ẽ_1 = ⟨v, e_2⟩ e_1`, `B(v)ẽ_2 = e_2`, all other columns zero, no drift.
///
/// `B'(v)(w)u = u_1 ⟨w, e_2⟩ e_1`, so `B'B(2, 1) = e_1` while `B'B(1, 2) = 0`
/// at every state.
#[derive(Debug, Clone)]
pub struct NonCommutativeModel {
    n: usize,
    k: usize,
}

impl NonCommutativeModel {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 || k < 2 {
            return Err(invalid("N, K", "the counterexample needs at least two modes"));
        }
        Ok(Self { n, k })
    }
}

impl Coefficients for NonCommutativeModel {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.k)
    }

    fn drift(&self, _v: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.n])
    }

    fn diffusion(&self, v: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n];
        out[0] = u[0] * v[1];
        out[1] = u[1];
        Ok(out)
    }

    fn bprime_b(&self, _v: &[f64], i: usize, j: usize, _galerkin: bool) -> Option<Result<Vec<f64>>> {
        let mut out = vec![0.0; self.n];
        // B'(v)(w) only reads ⟨w, e_2⟩, which is 1 for w = B(v)ẽ_2 and 0 for w = B(v)ẽ_1
        if i == 1 && j == 0 {
            out[0] = 1.0;
        }
        Some(Ok(out))
    }
}
