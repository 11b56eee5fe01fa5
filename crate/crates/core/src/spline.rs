//! Natural cubic spline.

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl CubicSpline {
    /// Builds the interpolant. Callers guarantee `xs` strictly increasing and
    /// at least two knots.
    pub fn natural(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        debug_assert!(n >= 2 && n == ys.len());
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let mut c_prime = vec![0.0; n];
            let mut d_prime = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let c = h1 / 6.0;
                let d = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
                let denom = b - a * c_prime[i - 1];
                c_prime[i] = c / denom;
                d_prime[i] = (d - a * d_prime[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d_prime[i] - c_prime[i] * m[i + 1];
            }
        }
        Self { xs, ys, m }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Value, first and second derivative at `x` (inside the knot range).
    pub fn eval_derivs(&self, x: f64) -> [f64; 3] {
        let i = self.segment(x);
        if x == self.xs[i] {
            // exact at knots
            let h = self.xs[i + 1] - self.xs[i];
            let d1 =
                (self.ys[i + 1] - self.ys[i]) / h - h * (2.0 * self.m[i] + self.m[i + 1]) / 6.0;
            return [self.ys[i], d1, self.m[i]];
        }
        if x == self.xs[i + 1] {
            let h = self.xs[i + 1] - self.xs[i];
            let d1 =
                (self.ys[i + 1] - self.ys[i]) / h + h * (self.m[i] + 2.0 * self.m[i + 1]) / 6.0;
            return [self.ys[i + 1], d1, self.m[i + 1]];
        }
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (y0, y1, m0, m1) = (self.ys[i], self.ys[i + 1], self.m[i], self.m[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 =
            (y1 - y0) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        [value, d1, d2]
    }

    #[cfg(test)]
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_derivs(x)[0]
    }
}
