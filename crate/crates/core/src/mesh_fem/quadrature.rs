/// Gauss–Legendre rule on `[0, 1]`: `(points, weights)`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut pts = vec![0.0; n];
    let mut wts = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map from [-1, 1] to [0, 1]
        pts[i] = 0.5 * (1.0 - x);
        pts[n - 1 - i] = 0.5 * (1.0 + x);
        wts[i] = 0.5 * w;
        wts[n - 1 - i] = 0.5 * w;
    }
    (pts, wts)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Tensor-product rule on the reference cell `[0,1]^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub dim: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly per coordinate.
    pub exactness: usize,
}

impl Quadrature {
    pub fn tensor(dim: usize, n: usize) -> Self {
        let (p, w) = gauss_legendre(n);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        if dim == 1 {
            for i in 0..n {
                points.push([p[i], 0.0]);
                weights.push(w[i]);
            }
        } else {
            for j in 0..n {
                for i in 0..n {
                    points.push([p[i], p[j]]);
                    weights.push(w[i] * w[j]);
                }
            }
        }
        Quadrature {
            dim,
            points,
            weights,
            exactness: 2 * n - 1,
        }
    }

    /// Default rule for degree-`k` elements: `k + 3` points per axis, exact
    /// to degree `2k + 5` per axis.
    pub fn for_degree(dim: usize, k: usize) -> Self {
        Self::tensor(dim, k + 3)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomials_are_exact() {
        for n in 1..=8 {
            let (p, w) = gauss_legendre(n);
            for deg in 0..=(2 * n - 1) {
                let approx: f64 = p.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((approx - exact).abs() <= 1e-14 * exact, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn tensor_rule_in_two_dimensions() {
        let q = Quadrature::tensor(2, 3);
        assert_eq!(q.exactness, 5);
        for a in 0..=5 {
            for b in 0..=5 {
                let approx: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(x, w)| w * x[0].powi(a) * x[1].powi(b))
                    .sum();
                let exact = 1.0 / ((a + 1) * (b + 1)) as f64;
                assert!((approx - exact).abs() <= 1e-14 * exact);
            }
        }
    }
}
