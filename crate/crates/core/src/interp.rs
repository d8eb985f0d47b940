//! One-dimensional interpolation on increasing nodes.

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson).
///
/// Monotone data gives a monotone interpolant, so a strictly increasing
/// profile stays strictly increasing between nodes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Panics unless `x` is strictly increasing with at least two nodes and
    /// `y` has the same length.
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len());
        assert!(x.windows(2).all(|w| w[0] < w[1]), "nodes must increase");
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { x: x.to_vec(), y: y.to_vec(), d }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let k = match self.x.binary_search_by(|p| p.total_cmp(&t)) {
            Ok(k) => return self.y[k],
            Err(0) => 0,
            Err(k) if k >= n => n - 2,
            Err(k) => k - 1,
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h * h10 * self.d[k] + h01 * self.y[k + 1] + h * h11 * self.d[k + 1]
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

/// Four-point Lagrange weights for evaluating at `t` from nodes `xs`.
pub fn lagrange4_weights(xs: [f64; 4], t: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for (k, wk) in w.iter_mut().enumerate() {
        for (m, &xm) in xs.iter().enumerate() {
            if m != k {
                *wk *= (t - xm) / (xs[k] - xm);
            }
        }
    }
    w
}

/// Index of the first node of a 4-point stencil around `t` within `0..n`.
pub fn stencil_start(nodes: &[f64], t: f64) -> usize {
    let n = nodes.len();
    assert!(n >= 4);
    let k = nodes.partition_point(|&p| p <= t);
    k.saturating_sub(2).min(n - 4)
}
