//! Pointwise coefficient matrices `q`, `Λ` and `M`.

use faer::c64;

use super::config::ProblemConfig;
use super::field::Point;
use super::numrange::{zero3, Mat3};
use crate::error::Result;

/// `q = c⁻² ρ⁻¹ ∇p`.
pub fn compute_q(cfg: &ProblemConfig, x: &Point) -> Result<[f64; 3]> {
    let g = cfg.p.grad(x)?;
    let c = cfg.c.eval(x);
    let s = 1.0 / (c * c * cfg.rho.eval(x));
    Ok([s * g[0], s * g[1], s * g[2]])
}

/// Skew matrix of `v ×`.
pub fn cross_matrix(v: &[f64; 3]) -> [[f64; 3]; 3] {
    [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
}

/// `ρ (ωI + iΩ×)ᴴ (ωI + iΩ×)`.
pub fn rotation_term(rho: f64, omega: f64, angvel: &[f64; 3]) -> Mat3 {
    let w = cross_matrix(angvel);
    let mut l = zero3();
    for i in 0..3 {
        for j in 0..3 {
            l[i][j] = c64::new(if i == j { omega } else { 0.0 }, w[i][j]);
        }
    }
    let mut out = zero3();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = c64::new(0.0, 0.0);
            for k in 0..3 {
                s += l[k][i].conj() * l[k][j];
            }
            out[i][j] = s * rho;
        }
    }
    out
}

/// `M = iωγρ I − Hess p + ρ Hess φ + c⁻²ρ⁻¹ ∇p ∇pᵀ`.
pub fn compute_matkl(cfg: &ProblemConfig, x: &Point) -> Result<Mat3> {
    let rho = cfg.rho.eval(x);
    let c = cfg.c.eval(x);
    let gamma = cfg.gamma.eval(x);
    let hp = cfg.p.hess(x)?;
    let hphi = cfg.phi.hess(x)?;
    let gp = cfg.p.grad(x)?;
    let s = 1.0 / (c * c * rho);
    let mut m = zero3();
    for i in 0..3 {
        for j in 0..3 {
            let re = -hp[i][j] + rho * hphi[i][j] + s * gp[i] * gp[j];
            let im = if i == j { cfg.omega * gamma * rho } else { 0.0 };
            m[i][j] = c64::new(re, im);
        }
    }
    Ok(m)
}

/// `Λ = ρ(ωI + iΩ×)ᴴ(ωI + iΩ×) + M`.
pub fn compute_lambda(cfg: &ProblemConfig, x: &Point) -> Result<Mat3> {
    let rot = rotation_term(cfg.rho.eval(x), cfg.omega, &cfg.angvel);
    let mut m = compute_matkl(cfg, x)?;
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] += rot[i][j];
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::config::ProblemConfig;

    fn config(fields: &str, omega: f64, angvel: [f64; 3]) -> ProblemConfig {
        let text = format!(
            r#"
[problem]
omega = {omega:?}
angvel = [{:?}, {:?}, {:?}]
[fields]
{fields}
[fields.bounds]
rho = [0.1, 10.0]
c = [0.1, 10.0]
gamma = [0.01, 10.0]
[domain]
kind = "rect"
x = [0.0, 1.0]
y = [0.0, 1.0]
cells = [2, 2]
"#,
            angvel[0], angvel[1], angvel[2]
        );
        ProblemConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn q_formula() {
        let cfg = config("rho = 0.5\nc = 2.0\ngamma = 1.0\np = \"x\"\np_x = 1.0", 1.0, [0.0; 3]);
        assert_eq!(compute_q(&cfg, &[0.3, 0.2, 0.0]).unwrap(), [0.5, 0.0, 0.0]);
        let flat = config("rho = 0.5\nc = 2.0\ngamma = 1.0\np = 3.0", 1.0, [0.0; 3]);
        assert_eq!(compute_q(&flat, &[0.3, 0.2, 0.0]).unwrap(), [0.0; 3]);
    }

    #[test]
    fn lambda_without_rotation_or_gradients() {
        let cfg = config("rho = 1.0\nc = 1.0\ngamma = 0.0", 3.0, [0.0; 3]);
        let l = compute_lambda(&cfg, &[0.5, 0.5, 0.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 9.0 } else { 0.0 };
                assert_eq!(l[i][j], c64::new(expected, 0.0));
            }
        }
    }

    #[test]
    fn lambda_with_rotation_by_hand() {
        // (I + iΩ×)ᴴ(I + iΩ×) for Ω = e_z: (Ω×) = [[0,-1,0],[1,0,0],[0,0,0]],
        // I + iΩ× = [[1,-i,0],[i,1,0],[0,0,1]], its adjoint equals itself,
        // square = [[2,-2i,0],[2i,2,0],[0,0,1]].
        let cfg = config("rho = 1.0\nc = 1.0\ngamma = 0.0", 1.0, [0.0, 0.0, 1.0]);
        let l = compute_lambda(&cfg, &[0.5, 0.5, 0.0]).unwrap();
        let i = c64::new(0.0, 1.0);
        let expected = [
            [c64::new(2.0, 0.0), -i * 2.0, c64::new(0.0, 0.0)],
            [i * 2.0, c64::new(2.0, 0.0), c64::new(0.0, 0.0)],
            [c64::new(0.0, 0.0), c64::new(0.0, 0.0), c64::new(1.0, 0.0)],
        ];
        assert_eq!(l, expected);
    }

    #[test]
    fn matkl_formula() {
        let cfg = config(
            "rho = 1.0\nc = 1.0\ngamma = 1.0\np = \"0.5*(x^2+y^2+z^2)\"\np_x = \"x\"\np_y = \"y\"\np_z = \"z\"\np_xx = 1.0\np_yy = 1.0\np_zz = 1.0\np_xy = 0.0\np_xz = 0.0\np_yz = 0.0",
            1.0,
            [0.0; 3],
        );
        // at the origin ∇p = 0
        let m = compute_matkl(&cfg, &[0.0; 3]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { c64::new(-1.0, 1.0) } else { c64::new(0.0, 0.0) };
                assert_eq!(m[i][j], expected);
            }
        }
    }
}
