//! Numerical checks of the identities and stability claims behind the
//! formulation: the damping identity, self-adjointness of the convective
//! term, the zero-order representation, inf-sup constants, the
//! regularity constant and the sonic sweep.

use faer::{c64, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_blocks, assemble_cowling, assemble_representation, SystemBlocks};
use crate::coefficients::config::{ConfigFile, FieldSpec};
use crate::coefficients::{validate_level, ProblemConfig, ValidatedProblem};
use crate::error::{Error, Result};
use crate::helmholtz::{decompose, random_vector, Decomposition, DEFAULT_CUTOFF};
use crate::linalg::{
    cholesky_lower, dot, lower_solve, norm2, singular_values, symmetric_eigen, SparseLu, SparseMatrix,
};
use crate::mesh_fem::{FESpace, SpaceKind};

/// `max_x |Im(xᴴAx) + ω xᴴDx| / (|ω| xᴴDx)` over random `x`.
pub fn imag_identity_residual(blocks: &SystemBlocks, trials: usize, seed: u64) -> f64 {
    let a = assemble_cowling(blocks);
    let omega = blocks.omega;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let x = random_vector(&mut rng, a.ncols);
            let damp = blocks.damp.quad_form(&x).re;
            (a.quad_form(&x).im + omega * damp).abs() / (omega.abs() * damp)
        })
        .fold(0.0, f64::max)
}

/// `‖S − Sᴴ‖_F / ‖S‖_F` for the convective block, zero when `S = 0`.
pub fn selfadjointness_residual(blocks: &SystemBlocks) -> f64 {
    let s = &blocks.convective;
    let n = s.frobenius();
    if n == 0.0 {
        0.0
    } else {
        s.hermitian_residual() / n
    }
}

/// Relative Frobenius distance between the Cowling matrix and its
/// zero-order representation.
pub fn representation_identity_residual(vp: &ValidatedProblem, degree: usize) -> Result<f64> {
    if !vp.cfg.b.is_zero() {
        return Err(Error::PreconditionViolated("the zero-order representation needs b = 0".into()));
    }
    let vs = FESpace::new(&vp.mesh, degree, SpaceKind::VectorNormal)?;
    let a = assemble_cowling(&assemble_blocks(vp, &vs, None)?);
    let rep = assemble_representation(vp, &vs)?;
    Ok(a.distance(&rep) / a.frobenius())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfSupMethod {
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfSupReport {
    pub beta: f64,
    pub level: Option<usize>,
    pub ndofs: usize,
    pub method: InfSupMethod,
    /// Whether `A` was premultiplied by `Tᴴ`.
    pub transformed: bool,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfSupOptions {
    /// Largest size handled by the dense SVD.
    pub dense_limit: usize,
    pub lanczos_steps: usize,
    pub seed: u64,
}

impl Default for InfSupOptions {
    fn default() -> Self {
        InfSupOptions {
            dense_limit: 4000,
            lanczos_steps: 80,
            seed: 0,
        }
    }
}

/// `Tᴴ A` as a dense matrix.
fn transformed_dense(a: &SparseMatrix, d: Option<&Decomposition>) -> Mat<c64> {
    let mut m = a.to_dense();
    if let Some(d) = d {
        let w = Mat::<c64>::from_fn(d.w.nrows(), d.w.ncols(), |i, j| c64::new(d.w[(i, j)], 0.0));
        let wwa = &w * (w.transpose() * &m);
        // G (W Wᵀ A), column by column
        for j in 0..m.ncols() {
            let col: Vec<c64> = (0..wwa.nrows()).map(|i| wwa[(i, j)]).collect();
            for (i, v) in d.gram.matvec(&col).into_iter().enumerate() {
                m[(i, j)] -= v * 2.0;
            }
        }
    }
    m
}

/// Whitened singular values of `Tᴴ A` (or `A`), descending: the singular
/// values of `L⁻¹ Tᴴ A L⁻ᴴ` for `G = L Lᴴ`.
pub fn whitened_singular_values(a: &SparseMatrix, d: Option<&Decomposition>, gram: &SparseMatrix) -> Result<Vec<f64>> {
    check_sizes(a, gram)?;
    let l = cholesky_lower(&gram.to_dense())?;
    let mut m = transformed_dense(a, d);
    lower_solve(&l, &mut m);
    let mut mh = m.adjoint().to_owned();
    lower_solve(&l, &mut mh);
    singular_values(&mh)
}

fn check_sizes(a: &SparseMatrix, gram: &SparseMatrix) -> Result<()> {
    if a.nrows != a.ncols || a.nrows != gram.nrows || gram.nrows != gram.ncols {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but the Gram matrix is {}x{}",
            a.nrows, a.ncols, gram.nrows, gram.ncols
        )));
    }
    Ok(())
}

/// Smallest singular value of `Tᴴ A` in the `G` geometry.
pub fn inf_sup(a: &SparseMatrix, d: Option<&Decomposition>, gram: &SparseMatrix, opts: &InfSupOptions) -> Result<InfSupReport> {
    check_sizes(a, gram)?;
    let start = std::time::Instant::now();
    let n = a.nrows;
    let (beta, method) = if n <= opts.dense_limit {
        let s = whitened_singular_values(a, d, gram)?;
        (s.last().copied().unwrap_or(0.0), InfSupMethod::Dense)
    } else {
        (lanczos_beta(a, d, gram, opts)?, InfSupMethod::Lanczos)
    };
    Ok(InfSupReport {
        beta,
        level: None,
        ndofs: n,
        method,
        transformed: d.is_some(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// `1/β²` is the largest eigenvalue of `K = B⁻¹ G B⁻ᴴ G` with `B = Tᴴ A`,
/// which is self-adjoint in the `G` inner product. Lanczos in that inner
/// product with full reorthogonalization.
fn lanczos_beta(a: &SparseMatrix, d: Option<&Decomposition>, gram: &SparseMatrix, opts: &InfSupOptions) -> Result<f64> {
    let lu = SparseLu::new(a)?;
    let n = a.nrows;
    // B⁻¹ = A⁻¹ Tᴴ and B⁻ᴴ = T A⁻ᴴ, since T and Tᴴ are involutions
    let apply = |x: &[c64]| -> Vec<c64> {
        let y = lu.solve_adjoint_raw(&gram.matvec(x));
        let y = match d {
            Some(d) => d.apply_t(&y),
            None => y,
        };
        let z = gram.matvec(&y);
        let z = match d {
            Some(d) => d.apply_t_adjoint(&z),
            None => z,
        };
        lu.solve_raw(&z)
    };
    let ip = |x: &[c64], y: &[c64]| dot(x, &gram.matvec(y));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = random_vector(&mut rng, n);
    let nv = ip(&v, &v).re.sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis: Vec<Vec<c64>> = vec![v];
    let mut alpha = Vec::new();
    let mut beta_off: Vec<f64> = Vec::new();
    let mut estimate = 0.0;
    for k in 0..opts.lanczos_steps.min(n) {
        let mut w = apply(&basis[k]);
        if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SolverBreakdown("nonfinite iterate in the inf-sup iteration".into()));
        }
        alpha.push(ip(&basis[k], &w).re);
        for _ in 0..2 {
            for q in &basis {
                let c = ip(q, &w);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = ip(&w, &w).re.max(0.0).sqrt();
        let t = tridiagonal(&alpha, &beta_off);
        let (ev, _) = symmetric_eigen(&t)?;
        let top = ev[ev.len() - 1];
        let converged = (top - estimate).abs() <= 1e-12 * top.abs();
        estimate = top;
        if converged || b <= 1e-14 * top.abs() {
            break;
        }
        beta_off.push(b);
        basis.push(w.into_iter().map(|z| z / b).collect());
    }
    if !(estimate > 0.0) {
        return Err(Error::SolverBreakdown("inf-sup iteration did not produce a positive estimate".into()));
    }
    Ok(1.0 / estimate.sqrt())
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> Mat<f64> {
    let k = alpha.len();
    Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    })
}

/// Regularity-constant estimate on one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CregLevel {
    pub level: usize,
    pub ndofs: usize,
    pub dim_v: usize,
    pub creg_sq: f64,
    pub creg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CregReport {
    pub levels: Vec<CregLevel>,
    /// True when the estimates never increase with the level.
    pub nonincreasing: bool,
}

/// `min_{v ∈ V_h} (‖div v‖² + ‖v‖²) / (‖∇v‖² + ‖v‖²)` as the smallest
/// generalized eigenvalue on a basis of `V_h`.
pub fn creg_on_level(vp: &ValidatedProblem, level: usize) -> Result<CregLevel> {
    let (d, setup) = decompose(vp, DEFAULT_CUTOFF, true)?;
    let v = d.v.as_ref().expect("V basis was requested");
    if v.ncols() == 0 {
        return Err(Error::EmptySubspace);
    }
    let b = &setup.blocks;
    let num = v.transpose() * ((b.divdiv.to_dense_real() + b.mass.to_dense_real()) * v);
    let den = v.transpose() * ((b.gradgrad.to_dense_real() + b.mass.to_dense_real()) * v);
    let l = cholesky_lower(&den)?;
    let mut m = num;
    lower_solve(&l, &mut m);
    let mut mt = m.transpose().to_owned();
    lower_solve(&l, &mut mt);
    let sym = Mat::from_fn(mt.nrows(), mt.ncols(), |i, j| 0.5 * (mt[(i, j)] + mt[(j, i)]));
    let (ev, _) = symmetric_eigen(&sym)?;
    let creg_sq = ev[0].clamp(0.0, 1.0);
    Ok(CregLevel {
        level,
        ndofs: d.ndofs(),
        dim_v: v.ncols(),
        creg_sq,
        creg: creg_sq.sqrt(),
    })
}

pub fn estimate_creg(cfg: &ProblemConfig, levels: &[usize]) -> Result<CregReport> {
    let out: Vec<CregLevel> = levels
        .iter()
        .map(|&l| creg_on_level(&validate_level(cfg, l)?, l))
        .collect::<Result<_>>()?;
    // allow for roundoff when consecutive values coincide
    let nonincreasing = out.windows(2).all(|w| w[1].creg_sq <= w[0].creg_sq * (1.0 + 1e-12));
    Ok(CregReport { levels: out, nonincreasing })
}

/// Description of the flow profile used by the sweep.
pub const BUMP_DESCRIPTION: &str =
    "chi(x) = f(2 - 4|x|) / (f(2 - 4|x|) + f(4|x| - 1)), f(u) = exp(-1/u) for u > 0 and 0 otherwise; \
     chi = 1 on |x| <= 1/4 and 0 on |x| >= 1/2";

fn pos(e: &str) -> String {
    format!("((({e}) + abs({e}))/2)")
}

fn bump_f(e: &str) -> String {
    format!("exp(-1/{})", pos(e))
}

/// `f'(u) = f(u)/u²`; the tiny shift keeps `u = 0` at `0/ε` instead of `0/0`.
fn bump_df(e: &str) -> String {
    let p = pos(e);
    format!("exp(-1/{p})/({p}^2 + 1e-300)")
}

/// Expressions for `m·χ(x)` and its derivative.
pub fn bump_expressions(m: f64) -> (String, String) {
    let a = "2 - 4*abs(x)";
    let b = "4*abs(x) - 1";
    let (fa, fb) = (bump_f(a), bump_f(b));
    let chi = format!("{m:e}*{fa}/({fa} + {fb})");
    let sign = "x/(abs(x) + 1e-300)";
    let dchi = format!(
        "{m:e}*(-4)*{sign}*({}*{fb} + {fa}*{})/({fa} + {fb})^2",
        bump_df(a),
        bump_df(b)
    );
    (chi, dchi)
}

/// Template configuration with the flow replaced by `m·χ`. Needs a 1D
/// template with constant `ρ`.
pub fn sonic_config(template: &ConfigFile, m: f64) -> Result<ProblemConfig> {
    let mut file = template.clone();
    let rho = file.fields.rho.clone().unwrap_or(FieldSpec::Number(1.0));
    let rho = match rho {
        FieldSpec::Number(v) => v,
        _ => return Err(Error::PreconditionViolated("the sonic sweep needs a constant rho".into())),
    };
    let (chi, dchi) = bump_expressions(m);
    file.fields.b = Some(vec![FieldSpec::Text(chi)]);
    file.fields.divrhob = Some(FieldSpec::Text(format!("{rho:e}*{dchi}")));
    let cfg = ProblemConfig::from_file(file)?;
    if cfg.dim() != 1 {
        return Err(Error::PreconditionViolated("the sonic sweep needs a 1D template".into()));
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mach: f64,
    pub level: usize,
    pub ndofs: usize,
    pub beta: f64,
    pub near_kernel: usize,
    /// Smallest sampled value of `ρc²(1 − c⁻²|b|²)`.
    pub principal_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub threshold: f64,
    pub bump: String,
}

impl SweepReport {
    /// gnuplot-ready table: `mach level ndofs beta near_kernel principal_min`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mach,level,ndofs,beta,near_kernel,principal_min\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:e},{},{:e}\n",
                r.mach, r.level, r.ndofs, r.beta, r.near_kernel, r.principal_min
            ));
        }
        out
    }

    pub fn rows_for(&self, mach: f64) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.mach == mach).collect()
    }
}

fn sweep_point(template: &ConfigFile, m: f64, level: usize, threshold: f64) -> Result<SweepRow> {
    let cfg = sonic_config(template, m)?;
    let vp = validate_level(&cfg, level)?;
    let vs = FESpace::new(&vp.mesh, cfg.degree, SpaceKind::VectorNormal)?;
    let blocks = assemble_blocks(&vp, &vs, None)?;
    let a = assemble_cowling(&blocks);
    let s = whitened_singular_values(&a, None, &blocks.gramx)?;
    let principal_min = vp
        .quad_points
        .iter()
        .map(|x| {
            let (rho, c, b) = (cfg.rho.eval(x), cfg.c.eval(x), cfg.b.eval(x));
            let b2 = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
            rho * c * c * (1.0 - b2 / (c * c))
        })
        .fold(f64::INFINITY, f64::min);
    Ok(SweepRow {
        mach: m,
        level,
        ndofs: vs.ndofs(),
        beta: s.last().copied().unwrap_or(0.0),
        near_kernel: s.iter().filter(|&&v| v < threshold).count(),
        principal_min,
    })
}

/// Runs every `(mach, level)` pair in parallel; rows are sorted by
/// `(mach, level)`.
pub fn sonic_sweep(template: &ConfigFile, machs: &[f64], levels: &[usize], threshold: f64) -> Result<SweepReport> {
    let jobs: Vec<(f64, usize)> = machs.iter().flat_map(|&m| levels.iter().map(move |&l| (m, l))).collect();
    let mut rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(m, l)| sweep_point(template, m, l, threshold))
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.mach.total_cmp(&b.mach).then(a.level.cmp(&b.level)));
    Ok(SweepReport {
        rows,
        threshold,
        bump: BUMP_DESCRIPTION.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub level: usize,
    pub h: f64,
    pub ndofs: usize,
    pub l2_error: f64,
    pub x_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub levels: Vec<ConvergenceLevel>,
    pub l2_order: Option<f64>,
    pub x_order: Option<f64>,
}

/// Least-squares slope of `log e` against `log h`; `None` when fewer than
/// two positive errors exist.
pub fn fitted_order(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(_, &e)| e > 0.0)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Euclidean norm, re-exported for callers comparing solution vectors.
pub fn vector_norm(x: &[c64]) -> f64 {
    norm2(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cz;

    fn problem(extra: &str, domain: &str, omega: f64) -> ValidatedProblem {
        let text = format!(
            "[problem]\nomega = {omega}\n[fields]\nrho = 1.0\nc = 1.0\ngamma = 1.0\n{extra}\n\
             [fields.bounds]\nrho = [0.5, 2.0]\nc = [0.5, 2.0]\ngamma = [0.5, 2.0]\n{domain}"
        );
        validate_level(&ProblemConfig::from_toml(&text).unwrap(), 0).unwrap()
    }

    const LINE: &str = "[domain]\nkind = \"interval\"\nx = [-1.0, 1.0]\ncells = [16]";

    #[test]
    fn gram_matrix_has_unit_inf_sup() {
        let vp = problem("", LINE, 1.0);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorNormal).unwrap();
        let b = assemble_blocks(&vp, &vs, None).unwrap();
        let rep = inf_sup(&b.gramx, None, &b.gramx, &InfSupOptions::default()).unwrap();
        assert!((rep.beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        let vp = problem("", LINE, 2.0);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorNormal).unwrap();
        let b = assemble_blocks(&vp, &vs, None).unwrap();
        let a = assemble_cowling(&b);
        let dense = inf_sup(&a, None, &b.gramx, &InfSupOptions::default()).unwrap();
        let opts = InfSupOptions {
            dense_limit: 0,
            ..Default::default()
        };
        let sparse = inf_sup(&a, None, &b.gramx, &opts).unwrap();
        assert_eq!(sparse.method, InfSupMethod::Lanczos);
        assert!((dense.beta - sparse.beta).abs() <= 1e-8 * dense.beta, "{} {}", dense.beta, sparse.beta);
    }

    #[test]
    fn order_fit_recovers_power_law() {
        let h = [0.1, 0.05, 0.025];
        let e: Vec<f64> = h.iter().map(|h: &f64| 3.0 * h.powi(2)).collect();
        assert!((fitted_order(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert!(fitted_order(&h, &[0.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn bump_is_a_plateau() {
        let (chi, dchi) = bump_expressions(1.0);
        let f = crate::coefficients::ScalarField::parse(&chi).unwrap();
        let df = crate::coefficients::ScalarField::parse(&dchi).unwrap();
        for (x, v) in [(0.0, 1.0), (0.2, 1.0), (-0.25, 1.0), (0.5, 0.0), (-0.9, 0.0)] {
            assert!((f.eval(&[x, 0.0, 0.0]) - v).abs() < 1e-15, "{x}");
            assert_eq!(df.eval(&[x, 0.0, 0.0]), 0.0);
        }
        let mid = f.eval(&[0.375, 0.0, 0.0]);
        assert!((mid - 0.5).abs() < 1e-12);
        let h = 1e-6;
        let fd = (f.eval(&[0.3 + h, 0.0, 0.0]) - f.eval(&[0.3 - h, 0.0, 0.0])) / (2.0 * h);
        assert!((fd - df.eval(&[0.3, 0.0, 0.0])).abs() < 1e-6);
        assert!(df.eval(&[-0.3, 0.0, 0.0]) > 0.0);
    }

    #[test]
    fn damping_identity_and_scale_invariance() {
        let vp = problem("", LINE, 1.5);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorNormal).unwrap();
        let b = assemble_blocks(&vp, &vs, None).unwrap();
        assert!(imag_identity_residual(&b, 20, 1) < 1e-12);
        let _ = cz(0.0);
    }
}
