use crate::scalar::Scalar;

/// Scratch buffers for repeated natural cubic spline fits.
#[derive(Debug, Default)]
pub(crate) struct SplineWorkspace<T> {
    h: Vec<T>,
    c_prime: Vec<T>,
    d_prime: Vec<T>,
    m: Vec<T>,
}

impl<T: Scalar> SplineWorkspace<T> {
    pub(crate) fn new() -> Self {
        SplineWorkspace { h: Vec::new(), c_prime: Vec::new(), d_prime: Vec::new(), m: Vec::new() }
    }

    /// Fits a natural cubic spline through `(xs, ys)` and evaluates it at the
    /// sample positions `0, 1, .., out.len() - 1`.
    ///
    /// `xs` must be strictly increasing with at least two knots. Positions
    /// outside the knot span are extrapolated from the end segments.
    pub(crate) fn eval_on_grid(&mut self, xs: &[T], ys: &[T], out: &mut [T]) {
        let n = xs.len();
        debug_assert!(n >= 2 && n == ys.len());
        let two = T::of(2.0);
        let six = T::of(6.0);

        self.h.clear();
        self.h.extend(xs.windows(2).map(|w| w[1] - w[0]));

        // Second derivatives M with M[0] = M[n-1] = 0, tridiagonal solve over
        // the interior knots (Thomas algorithm).
        self.m.clear();
        self.m.resize(n, T::zero());
        if n > 2 {
            let interior = n - 2;
            self.c_prime.clear();
            self.c_prime.resize(interior, T::zero());
            self.d_prime.clear();
            self.d_prime.resize(interior, T::zero());
            for k in 0..interior {
                let i = k + 1;
                let (h0, h1) = (self.h[i - 1], self.h[i]);
                let a = h0;
                let b = two * (h0 + h1);
                let c = h1;
                let d = six * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
                if k == 0 {
                    self.c_prime[0] = c / b;
                    self.d_prime[0] = d / b;
                } else {
                    let denom = b - a * self.c_prime[k - 1];
                    self.c_prime[k] = c / denom;
                    self.d_prime[k] = (d - a * self.d_prime[k - 1]) / denom;
                }
            }
            self.m[interior] = self.d_prime[interior - 1];
            for k in (0..interior - 1).rev() {
                self.m[k + 1] = self.d_prime[k] - self.c_prime[k] * self.m[k + 2];
            }
        }

        let mut seg = 0usize;
        for (pos, slot) in out.iter_mut().enumerate() {
            let x = T::of_usize(pos);
            while seg + 2 < n && x > xs[seg + 1] {
                seg += 1;
            }
            let h = self.h[seg];
            let left = xs[seg + 1] - x;
            let right = x - xs[seg];
            let (m0, m1) = (self.m[seg], self.m[seg + 1]);
            *slot = m0 * left * left * left / (six * h)
                + m1 * right * right * right / (six * h)
                + (ys[seg] / h - m0 * h / six) * left
                + (ys[seg + 1] / h - m1 * h / six) * right;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_knots_is_linear() {
        let mut ws = SplineWorkspace::<f64>::new();
        let mut out = vec![0.0; 5];
        ws.eval_on_grid(&[0.0, 4.0], &[1.0, 3.0], &mut out);
        assert_eq!(out, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn interpolates_knots_and_reproduces_lines() {
        let mut ws = SplineWorkspace::<f64>::new();
        let xs = [-3.0, 2.0, 5.0, 9.0, 14.0];
        let line: Vec<f64> = xs.iter().map(|x| 0.5 * x - 1.0).collect();
        let mut out = vec![0.0; 12];
        ws.eval_on_grid(&xs, &line, &mut out);
        for (i, v) in out.iter().enumerate() {
            assert!((v - (0.5 * i as f64 - 1.0)).abs() < 1e-12);
        }

        let ys = [0.3, -1.0, 2.0, 0.5, 1.0];
        ws.eval_on_grid(&xs, &ys, &mut out);
        assert!((out[2] - -1.0).abs() < 1e-12);
        assert!((out[5] - 2.0).abs() < 1e-12);
        assert!((out[9] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn natural_spline_matches_hand_solution() {
        // Knots (0,0), (1,1), (2,0): M1 = -3, so S(0.5) = 0.6875.
        let mut ws = SplineWorkspace::<f64>::new();
        let mut out = vec![0.0; 3];
        ws.eval_on_grid(&[-1.0, 1.0, 3.0], &[0.0, 1.0, 0.0], &mut out);
        // Scaled version of the same shape with h = 2: S(0) = 0.6875.
        assert!((out[0] - 0.6875).abs() < 1e-12, "{}", out[0]);
        assert!((out[1] - 1.0).abs() < 1e-12);
        assert!((out[2] - 0.6875).abs() < 1e-12);
    }
}
