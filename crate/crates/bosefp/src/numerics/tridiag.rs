//! Tridiagonal linear solves (Thomas algorithm) with reusable workspace.

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Default)]
pub struct TridiagWorkspace {
    cp: Vec<f64>,
    dp: Vec<f64>,
}

impl TridiagWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solve in place into `x`. Returns false when a pivot vanishes.
    pub fn solve(
        &mut self,
        lower: &[f64],
        diag: &[f64],
        upper: &[f64],
        rhs: &[f64],
        x: &mut [f64],
    ) -> bool {
        let n = diag.len();
        debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n && x.len() == n);
        self.cp.resize(n, 0.0);
        self.dp.resize(n, 0.0);
        if diag[0] == 0.0 {
            return false;
        }
        self.cp[0] = upper[0] / diag[0];
        self.dp[0] = rhs[0] / diag[0];
        for i in 1..n {
            let m = diag[i] - lower[i] * self.cp[i - 1];
            if m == 0.0 {
                return false;
            }
            self.cp[i] = upper[i] / m;
            self.dp[i] = (rhs[i] - lower[i] * self.dp[i - 1]) / m;
        }
        x[n - 1] = self.dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = self.dp[i] - self.cp[i] * x[i + 1];
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_poisson_like_system() {
        let n = 64;
        let lower = vec![-1.0; n];
        let diag = vec![2.5; n];
        let upper = vec![-1.0; n];
        // manufactured solution
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = 2.5 * xs[i];
            if i > 0 {
                rhs[i] -= xs[i - 1];
            }
            if i + 1 < n {
                rhs[i] -= xs[i + 1];
            }
        }
        let mut ws = TridiagWorkspace::new();
        let mut x = vec![0.0; n];
        assert!(ws.solve(&lower, &diag, &upper, &rhs, &mut x));
        for i in 0..n {
            assert_relative_eq!(x[i], xs[i], max_relative = 1e-12, epsilon = 1e-12);
        }
    }
}
