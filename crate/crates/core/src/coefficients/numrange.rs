//! Numerical range of small complex matrices via support functions.
//!
//! For a direction `e^{iφ}` the support function of `W(M)` is the largest
//! eigenvalue of the Hermitian part of `e^{-iφ}M`. The set of directions with
//! nonpositive support is the normal cone of `cone(W(M))`, from which the
//! extreme arguments follow.

use std::f64::consts::PI;

use faer::c64;

pub type Mat3 = [[c64; 3]; 3];

pub const DEFAULT_ANGLES: usize = 2048;
const BISECTION_TOL: f64 = 1e-10;

pub fn zero3() -> Mat3 {
    [[c64::new(0.0, 0.0); 3]; 3]
}

pub fn adjoint3(m: &Mat3) -> Mat3 {
    let mut out = zero3();
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i].conj();
        }
    }
    out
}

/// `(M + Mᴴ)/2` and `(M − Mᴴ)/(2i)`, both Hermitian.
pub fn hermitian_parts(m: &Mat3) -> (Mat3, Mat3) {
    let mut h = zero3();
    let mut k = zero3();
    for i in 0..3 {
        for j in 0..3 {
            let a = m[i][j];
            let b = m[j][i].conj();
            h[i][j] = (a + b) * 0.5;
            let d = (a - b) * 0.5;
            // d / i
            k[i][j] = c64::new(d.im, -d.re);
        }
    }
    (h, k)
}

/// Eigenvalues of a Hermitian 3×3 matrix in ascending order (cyclic Jacobi).
pub fn hermitian_eigenvalues(m: &Mat3) -> [f64; 3] {
    let mut a = *m;
    for i in 0..3 {
        a[i][i] = c64::new(a[i][i].re, 0.0);
    }
    let scale: f64 = a.iter().flatten().map(|z| z.norm_sqr()).sum();
    if scale == 0.0 {
        return [0.0; 3];
    }
    for _sweep in 0..32 {
        let off = a[0][1].norm_sqr() + a[0][2].norm_sqr() + a[1][2].norm_sqr();
        if off <= 1e-36 * scale {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let r = a[p][q].norm();
            if r == 0.0 {
                continue;
            }
            // Unitary diagonal scaling makes a[p][q] real and positive.
            let phase = a[p][q] / r;
            for k in 0..3 {
                if k != q {
                    a[q][k] *= phase;
                    a[k][q] *= phase.conj();
                }
            }
            a[p][q] = c64::new(r, 0.0);
            a[q][p] = c64::new(r, 0.0);

            let app = a[p][p].re;
            let aqq = a[q][q].re;
            let tau = (aqq - app) / (2.0 * r);
            let t = if tau >= 0.0 {
                1.0 / (tau + (1.0 + tau * tau).sqrt())
            } else {
                -1.0 / (-tau + (1.0 + tau * tau).sqrt())
            };
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            a[p][p] = c64::new(app - t * r, 0.0);
            a[q][q] = c64::new(aqq + t * r, 0.0);
            a[p][q] = c64::new(0.0, 0.0);
            a[q][p] = c64::new(0.0, 0.0);
            for k in 0..3 {
                if k != p && k != q {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = akp * c - akq * s;
                    a[k][q] = akp * s + akq * c;
                    a[p][k] = a[k][p].conj();
                    a[q][k] = a[k][q].conj();
                }
            }
        }
    }
    let mut ev = [a[0][0].re, a[1][1].re, a[2][2].re];
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

pub fn lambda_min_hermitian_part(m: &Mat3) -> f64 {
    hermitian_eigenvalues(&hermitian_parts(m).0)[0]
}

struct Support {
    h: Mat3,
    k: Mat3,
}

impl Support {
    fn new(m: &Mat3) -> Self {
        let (h, k) = hermitian_parts(m);
        Support { h, k }
    }

    /// `max Re(e^{-iφ} z)` over `z ∈ W(M)`.
    fn eval(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        let mut a = zero3();
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = self.h[i][j] * c + self.k[i][j] * s;
            }
        }
        hermitian_eigenvalues(&a)[2]
    }
}

fn wrap(a: f64) -> f64 {
    // into (−π, π]
    let mut t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Boundary of `{h ≤ tol}` between an inside angle and an outside angle.
fn bisect(sup: &Support, mut inside: f64, mut outside: f64, tol: f64) -> f64 {
    while (outside - inside).abs() > BISECTION_TOL {
        let mid = 0.5 * (inside + outside);
        if sup.eval(mid) <= tol {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

/// Golden-section minimum of the support function on `[a, b]`.
fn local_min(sup: &Support, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = sup.eval(x1);
    let mut f2 = sup.eval(x2);
    while b - a > 1e-12 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = sup.eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = sup.eval(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `sup { |arg z| : z ∈ W(M), z ≠ 0 }` with `arg ∈ (−π, π]`, using the default
/// angle grid.
pub fn sector_angle(m: &Mat3) -> f64 {
    sector_angle_with(m, DEFAULT_ANGLES)
}

pub fn sector_angle_with(m: &Mat3, n_angles: usize) -> f64 {
    let n = n_angles.max(8);
    let radius: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if radius == 0.0 {
        return 0.0;
    }
    let sup = Support::new(m);
    let tol = 1e-14 * radius;
    let step = 2.0 * PI / n as f64;
    let angles: Vec<f64> = (0..n).map(|k| -PI + step * k as f64).collect();
    let values: Vec<f64> = angles.iter().map(|&a| sup.eval(a)).collect();

    // Entries (angle, inside) in circular order; narrow dips between two
    // outside samples are located by a local minimisation. The support
    // function satisfies h'' ≥ −h ≥ −radius, so it can dip at most
    // radius·step²/8 below the chord.
    let dip = radius * step * step / 8.0;
    let mut entries: Vec<(f64, bool)> = Vec::with_capacity(n + 8);
    for k in 0..n {
        let inside = values[k] <= tol;
        entries.push((angles[k], inside));
        let next = (k + 1) % n;
        if !inside && values[next] > tol && values[k].min(values[next]) <= dip + tol {
            let a = angles[k];
            let (x, f) = local_min(&sup, a, a + step);
            if f <= tol {
                entries.push((x, true));
            }
        }
    }

    let count_inside = entries.iter().filter(|e| e.1).count();
    if count_inside == 0 {
        // 0 lies in the interior of W(M).
        return PI;
    }
    if count_inside == entries.len() {
        // Nothing strictly positive anywhere: W(M) ⊂ {0} up to tolerance.
        return 0.0;
    }

    // Locate the runs of inside entries on the circle.
    let len = entries.len();
    let starts: Vec<usize> = (0..len)
        .filter(|&i| entries[i].1 && !entries[(i + len - 1) % len].1)
        .collect();
    if starts.len() > 1 {
        // The normal cone is disconnected only when 0 ∈ W(M) on a flat piece
        // of the boundary; then W(M) reaches both sides of the origin.
        return PI;
    }
    let start = starts[0];
    let mut end = start;
    while entries[(end + 1) % len].1 {
        end = (end + 1) % len;
    }
    let unwrap = |from: f64, to: f64| -> f64 {
        // smallest representative of `to` that is >= from
        let mut t = to;
        while t < from {
            t += 2.0 * PI;
        }
        t
    };
    let first_in = entries[start].0;
    let before = entries[(start + len - 1) % len].0;
    let before = if before > first_in { before - 2.0 * PI } else { before };
    let last_in = unwrap(first_in, entries[end].0);
    let after = unwrap(last_in, entries[(end + 1) % len].0);
    let after = if after <= last_in { after + 2.0 * PI } else { after };

    let phi1 = bisect(&sup, first_in, before, tol);
    let phi2 = bisect(&sup, last_in, after, tol);

    // cone(W) spans the arguments [φ2 + π/2, φ1 + 3π/2].
    let s = phi2 + 0.5 * PI;
    let e = (phi1 + 1.5 * PI).max(s);
    let k = ((s - PI) / (2.0 * PI)).ceil();
    if PI + 2.0 * PI * k <= e {
        return PI;
    }
    wrap(s).abs().max(wrap(e).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use faer::{Mat, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(d: [c64; 3]) -> Mat3 {
        let mut m = zero3();
        for i in 0..3 {
            m[i][i] = d[i];
        }
        m
    }

    fn random_matrix(rng: &mut ChaCha8Rng) -> Mat3 {
        let mut m = zero3();
        for row in m.iter_mut() {
            for z in row.iter_mut() {
                *z = c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        m
    }

    #[test]
    fn jacobi_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let (h, _) = hermitian_parts(&random_matrix(&mut rng));
            let ours = hermitian_eigenvalues(&h);
            let dense = Mat::<c64>::from_fn(3, 3, |i, j| h[i][j]);
            let mut reference = dense.self_adjoint_eigenvalues(Side::Lower).unwrap();
            reference.sort_by(|a, b| a.total_cmp(b));
            for i in 0..3 {
                assert!((ours[i] - reference[i]).abs() < 1e-13, "{ours:?} vs {reference:?}");
            }
        }
    }

    #[test]
    fn simple_sectors() {
        let one = c64::new(1.0, 0.0);
        let i = c64::new(0.0, 1.0);
        assert_eq!(sector_angle(&diag([one; 3])), 0.0);
        assert!((sector_angle(&diag([i; 3])) - PI / 2.0).abs() < 1e-9);
        assert!((sector_angle(&diag([-i; 3])) - PI / 2.0).abs() < 1e-9);
        assert_eq!(sector_angle(&diag([-one; 3])), PI);
        assert_eq!(sector_angle(&zero3()), 0.0);
        let z = c64::new(-1.0, 1.0);
        assert!((sector_angle(&diag([z; 3])) - 0.75 * PI).abs() < 1e-9);
    }

    #[test]
    fn segment_through_origin_is_pi() {
        let m = diag([c64::new(1.0, 0.0), c64::new(-1.0, 0.0), c64::new(0.0, 0.0)]);
        assert_eq!(sector_angle(&m), PI);
    }

    #[test]
    fn thin_segment_near_origin() {
        // W = segment from 1+εi to −1+εi: arguments span (0, π).
        let eps = 1e-6;
        let m = diag([c64::new(1.0, eps), c64::new(-1.0, eps), c64::new(0.0, eps)]);
        let got = sector_angle(&m);
        let expected = PI - eps.atan2(1.0);
        assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
    }

    #[test]
    fn scaling_and_conjugation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_matrix(&mut rng);
            let base = sector_angle(&m);
            let mut scaled = m;
            let mut conj = m;
            for i in 0..3 {
                for j in 0..3 {
                    scaled[i][j] *= 3.7;
                    conj[i][j] = m[i][j].conj();
                }
            }
            assert!((sector_angle(&scaled) - base).abs() < 1e-9);
            assert!((sector_angle(&conj) - base).abs() < 1e-9);
        }
    }
}
