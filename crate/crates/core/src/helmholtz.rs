//! Discrete generalized Helmholtz decomposition `X_h = V_h ⊕ W_h ⊕ Z_h`.
//!
//! `W_h` is the kernel of `R_h`, `Z_h` collects the directions that `R_h`
//! maps into `ran(B)^⊥`, and `V_h` is the remaining `X`-orthogonal
//! complement. All bases are orthonormal in the `X` inner product, so the
//! projectors are `P = U Uᵀ G` and the sign switch is `T = I − 2 P_W`.
//! The operators involved are real, so everything here runs in real
//! arithmetic.

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_aux, assemble_blocks, SystemBlocks};
use crate::coefficients::ValidatedProblem;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, lower_adjoint_solve, lower_solve, real_svd, symmetric_eigen, SparseMatrix};
use crate::mesh_fem::{FESpace, SpaceKind};

pub const DEFAULT_CUTOFF: f64 = 1e-10;
pub const MIN_GAP_RATIO: f64 = 10.0;
/// Above this many vector dofs the dense construction is slow; it still runs
/// but the report carries a warning.
pub const DENSE_LIMIT: usize = 4000;
const MAX_CONDITION: f64 = 1e8;
const TAIL_LEN: usize = 8;

/// Result of one rank decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankInfo {
    /// Absolute cutoff applied to the singular values.
    pub cutoff: f64,
    pub rank: usize,
    /// Ratio of the singular values on either side of the cutoff.
    pub gap_ratio: f64,
    /// Singular values closest to the cutoff, descending.
    pub tail: Vec<f64>,
}

/// Rank of a descending spectrum with a relative cutoff against `scale`,
/// rejecting spectra without a clear gap.
fn decide_rank(s: &[f64], rel_cutoff: f64, scale: f64) -> Result<RankInfo> {
    let cutoff = rel_cutoff * scale;
    let rank = s.iter().take_while(|&&v| v > cutoff).count();
    let floor = f64::EPSILON * scale;
    let gap_ratio = match (rank.checked_sub(1).map(|i| s[i]), s.get(rank)) {
        (Some(above), Some(&below)) => above / below.max(floor),
        _ => f64::INFINITY,
    };
    let lo = rank.saturating_sub(TAIL_LEN / 2);
    let tail = s[lo..(lo + TAIL_LEN).min(s.len())].to_vec();
    if scale > 0.0 && gap_ratio < MIN_GAP_RATIO {
        return Err(Error::CutoffAmbiguous {
            cutoff,
            gap_ratio,
            tail: tail.clone(),
        });
    }
    Ok(RankInfo {
        cutoff,
        rank,
        gap_ratio,
        tail,
    })
}

/// Columns `range` of `m` as an owned matrix.
fn columns(m: &Mat<f64>, range: std::ops::Range<usize>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), range.len(), |i, j| m[(i, range.start + j)])
}

/// `L⁻ᵀ Y`: maps whitened coordinates back to dof vectors.
fn unwhiten(l: &Mat<f64>, y: &Mat<f64>) -> Mat<f64> {
    let mut out = y.clone();
    lower_adjoint_solve(l, &mut out);
    out
}

/// Whitened operator `R L⁻ᵀ` for `G = L Lᵀ`.
fn whiten_columns(r: &Mat<f64>, l: &Mat<f64>) -> Mat<f64> {
    let mut rt = r.transpose().to_owned();
    lower_solve(l, &mut rt);
    rt.transpose().to_owned()
}

/// Kernel of `R` in the `X` geometry.
#[derive(Debug, Clone)]
pub struct KernelBasis {
    /// `G`-orthonormal basis of `ker R`, as dof vectors.
    pub basis: Mat<f64>,
    /// The same basis in whitened coordinates.
    pub whitened: Mat<f64>,
    /// Orthonormal complement of `whitened`: the row space of `R L⁻ᵀ`.
    pub corange: Mat<f64>,
    /// Largest singular value of `R L⁻ᵀ`.
    pub sigma_max: f64,
    pub info: RankInfo,
}

/// `G`-orthonormal basis of `ker R` via SVD of `R L⁻ᵀ`.
pub fn build_w(r: &Mat<f64>, gram_x_chol: &Mat<f64>, rel_cutoff: f64) -> Result<KernelBasis> {
    let n = gram_x_chol.nrows();
    if r.ncols() != n {
        return Err(Error::DimensionMismatch(format!("R has {} columns but X has {n} dofs", r.ncols())));
    }
    let rhat = whiten_columns(r, gram_x_chol);
    let svd = real_svd(&rhat)?;
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    let info = decide_rank(&svd.s, rel_cutoff, sigma_max)?;
    let whitened = columns(&svd.v, info.rank..n);
    let corange = columns(&svd.v, 0..info.rank);
    Ok(KernelBasis {
        basis: unwhiten(gram_x_chol, &whitened),
        whitened,
        corange,
        sigma_max,
        info,
    })
}

/// The finite-dimensional correction space.
#[derive(Debug, Clone)]
pub struct CorrectionBasis {
    pub basis: Mat<f64>,
    pub whitened: Mat<f64>,
    /// Dimension of `ran(B)^⊥`.
    pub coker_b: usize,
    pub b_info: RankInfo,
    pub info: RankInfo,
}

/// Basis of `Z_h`: right singular vectors of `Nᵀ R L⁻ᵀ` above the cutoff,
/// where `N` is an `H¹`-orthonormal basis of `ran(B)^⊥ = ker Bᵀ`.
pub fn build_z(
    r: &Mat<f64>,
    b: &Mat<f64>,
    gram_h1: &Mat<f64>,
    gram_x_chol: &Mat<f64>,
    sigma_max_r: f64,
    rel_cutoff: f64,
) -> Result<CorrectionBasis> {
    let m = cholesky_lower(gram_h1)?;
    let ns = m.nrows();
    if b.nrows() != ns || b.ncols() != ns || r.nrows() != ns {
        return Err(Error::DimensionMismatch("R, B and the H1 Gram matrix disagree in size".into()));
    }
    // B̂ = M⁻¹ B M⁻ᵀ; left singular vectors of its null space give N = M⁻ᵀ U₀
    let mut bh = b.clone();
    lower_solve(&m, &mut bh);
    let bh = whiten_columns(&bh, &m);
    let bsvd = real_svd(&bh)?;
    let b_info = decide_rank(&bsvd.s, rel_cutoff, bsvd.s.first().copied().unwrap_or(0.0))?;
    let u0 = columns(&bsvd.u, b_info.rank..ns);
    let n_basis = unwhiten(&m, &u0);

    let product = n_basis.transpose() * whiten_columns(r, gram_x_chol);
    let psvd = real_svd(&product)?;
    let info = decide_rank(&psvd.s, rel_cutoff, sigma_max_r)?;
    let whitened = columns(&psvd.v, 0..info.rank);
    Ok(CorrectionBasis {
        basis: unwhiten(gram_x_chol, &whitened),
        whitened,
        coker_b: ns - b_info.rank,
        b_info,
        info,
    })
}

/// The three subspaces with their `G`-orthogonal projectors.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub w: Mat<f64>,
    pub z: Mat<f64>,
    /// Basis of `V_h`, empty unless requested.
    pub v: Option<Mat<f64>>,
    pub gram: SparseMatrix,
    pub w_info: RankInfo,
    pub z_info: RankInfo,
    pub b_info: RankInfo,
    pub warnings: Vec<String>,
}

/// `Uᵀ y` for real `U` and complex `y`.
fn project_coeffs(u: &Mat<f64>, y: &[c64]) -> Vec<c64> {
    (0..u.ncols())
        .map(|j| {
            let mut acc = c64::new(0.0, 0.0);
            for (i, yi) in y.iter().enumerate() {
                acc += yi * u[(i, j)];
            }
            acc
        })
        .collect()
}

/// `U c` for real `U` and complex `c`.
fn expand(u: &Mat<f64>, c: &[c64]) -> Vec<c64> {
    let mut out = vec![c64::new(0.0, 0.0); u.nrows()];
    for (j, cj) in c.iter().enumerate() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += cj * u[(i, j)];
        }
    }
    out
}

impl Decomposition {
    pub fn ndofs(&self) -> usize {
        self.gram.nrows
    }

    pub fn dim_w(&self) -> usize {
        self.w.ncols()
    }

    pub fn dim_z(&self) -> usize {
        self.z.ncols()
    }

    pub fn dim_v(&self) -> usize {
        self.ndofs() - self.dim_w() - self.dim_z()
    }

    pub fn apply_pw(&self, x: &[c64]) -> Vec<c64> {
        expand(&self.w, &project_coeffs(&self.w, &self.gram.matvec(x)))
    }

    pub fn apply_pz(&self, x: &[c64]) -> Vec<c64> {
        expand(&self.z, &project_coeffs(&self.z, &self.gram.matvec(x)))
    }

    pub fn apply_pv(&self, x: &[c64]) -> Vec<c64> {
        let pw = self.apply_pw(x);
        let pz = self.apply_pz(x);
        x.iter().zip(pw.iter().zip(&pz)).map(|(a, (b, c))| a - b - c).collect()
    }

    /// `T x = P_V x − P_W x + P_Z x`.
    pub fn apply_t(&self, x: &[c64]) -> Vec<c64> {
        let pw = self.apply_pw(x);
        x.iter().zip(&pw).map(|(a, b)| a - b * 2.0).collect()
    }

    /// `Tᴴ y = y − 2 G W Wᵀ y`.
    pub fn apply_t_adjoint(&self, y: &[c64]) -> Vec<c64> {
        let gw = self.gram.matvec(&expand(&self.w, &project_coeffs(&self.w, y)));
        y.iter().zip(&gw).map(|(a, b)| a - b * 2.0).collect()
    }

    /// Dense `T`, for small problems and tests.
    pub fn t_dense(&self) -> Mat<c64> {
        let n = self.ndofs();
        let mut t = Mat::<c64>::zeros(n, n);
        for j in 0..n {
            let mut e = vec![c64::new(0.0, 0.0); n];
            e[j] = c64::new(1.0, 0.0);
            for (i, v) in self.apply_t(&e).into_iter().enumerate() {
                t[(i, j)] = v;
            }
        }
        t
    }
}

/// Builds the decomposition from assembled operators. `with_v` also
/// computes an explicit basis of `V_h`.
pub fn decompose_operators(
    r: &SparseMatrix,
    b: &SparseMatrix,
    gram_x: &SparseMatrix,
    gram_h1: &SparseMatrix,
    rel_cutoff: f64,
    with_v: bool,
) -> Result<Decomposition> {
    let n = gram_x.nrows;
    let mut warnings = Vec::new();
    if n > DENSE_LIMIT {
        warnings.push(format!("dense decomposition with {n} dofs exceeds the {DENSE_LIMIT}-dof guideline"));
    }
    let r = r.to_dense_real();
    let l = cholesky_lower(&gram_x.to_dense_real())?;
    let kernel = build_w(&r, &l, rel_cutoff)?;
    let corr = build_z(&r, &b.to_dense_real(), &gram_h1.to_dense_real(), &l, kernel.sigma_max, rel_cutoff)?;

    // joint independence of W and Z in the X geometry
    let joint = Mat::from_fn(n, kernel.whitened.ncols() + corr.whitened.ncols(), |i, j| {
        if j < kernel.whitened.ncols() {
            kernel.whitened[(i, j)]
        } else {
            corr.whitened[(i, j - kernel.whitened.ncols())]
        }
    });
    if joint.ncols() > 0 {
        let (ev, _) = symmetric_eigen(&(joint.transpose() * &joint))?;
        let cond = ev[ev.len() - 1] / ev[0].max(f64::MIN_POSITIVE);
        if !(cond < MAX_CONDITION) {
            return Err(Error::IllConditionedBases(cond));
        }
    }

    // Z̃ lies in the row space Y of R L⁻ᵀ; projecting onto Y removes the
    // rounding-level W component that small singular values amplify
    let y = &kernel.corange;
    let z_white = if corr.whitened.ncols() == 0 {
        corr.whitened.clone()
    } else {
        let zsvd = real_svd(&(y * (y.transpose() * &corr.whitened)))?;
        columns(&zsvd.u, 0..corr.whitened.ncols())
    };

    let v = if with_v {
        // complement of Z̃ inside Y
        let v_white = if corr.whitened.ncols() == 0 {
            y.clone()
        } else {
            let c = y.transpose() * &z_white;
            let csvd = real_svd(&c)?;
            let dz = z_white.ncols();
            y * columns(&csvd.u, dz..c.nrows())
        };
        Some(unwhiten(&l, &v_white))
    } else {
        None
    };

    Ok(Decomposition {
        w: kernel.basis,
        z: unwhiten(&l, &z_white),
        v,
        gram: gram_x.clone(),
        w_info: kernel.info,
        z_info: corr.info,
        b_info: corr.b_info,
        warnings,
    })
}

/// Spaces and operators for a decomposition of one validated problem.
pub struct DecompositionSetup {
    pub vector_space: FESpace,
    pub scalar_space: FESpace,
    pub blocks: SystemBlocks,
    pub r: SparseMatrix,
}

/// Assembles `R`, `B` and the Gram matrices on `vp` and decomposes.
pub fn decompose(vp: &ValidatedProblem, rel_cutoff: f64, with_v: bool) -> Result<(Decomposition, DecompositionSetup)> {
    let k = vp.cfg.degree;
    let vs = FESpace::new(&vp.mesh, k, SpaceKind::VectorNormal)?;
    let ss = FESpace::new(&vp.mesh, k, SpaceKind::Scalar)?;
    let blocks = assemble_blocks(vp, &vs, None)?;
    let aux = assemble_aux(vp, &vs, &ss)?;
    let d = decompose_operators(&aux.r, &aux.b, &blocks.gramx, &aux.gram_h1, rel_cutoff, with_v)?;
    Ok((
        d,
        DecompositionSetup {
            vector_space: vs,
            scalar_space: ss,
            blocks,
            r: aux.r,
        },
    ))
}

/// Checks of the projector algebra and of the kernel property of `W_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub ndofs: usize,
    pub dim_v: usize,
    pub dim_w: usize,
    pub dim_z: usize,
    pub partition_residual: f64,
    pub idempotency_residual: f64,
    pub annihilation_residual: f64,
    pub involution_residual: f64,
    pub isometry_residual: f64,
    /// `max_w ‖R w‖` in the dual `H¹` norm over the `W` basis.
    pub w_residual: f64,
    /// Smallest `‖v‖_{L²}/‖v‖_X` over `V_h`, when a `V` basis exists.
    pub v_l2_ratio_min: Option<f64>,
    pub w_rank: RankInfo,
    pub z_rank: RankInfo,
    pub b_rank: RankInfo,
    pub tolerance: f64,
    pub trials: usize,
    pub pass: bool,
    pub warnings: Vec<String>,
}

impl DecompositionReport {
    pub fn max_algebra_residual(&self) -> f64 {
        [
            self.partition_residual,
            self.idempotency_residual,
            self.annihilation_residual,
            self.involution_residual,
            self.isometry_residual,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn gnorm(g: &SparseMatrix, x: &[c64]) -> f64 {
    g.quad_form(x).re.max(0.0).sqrt()
}

fn diff(a: &[c64], b: &[c64]) -> Vec<c64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<c64> {
    (0..n)
        .map(|_| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Residuals of the decomposition on `trials` random vectors, measured in
/// the `X` norm relative to `‖x‖_X`.
pub fn verify_decomposition(
    d: &Decomposition,
    r: &SparseMatrix,
    gram_h1: &SparseMatrix,
    mass: Option<&SparseMatrix>,
    tol: f64,
    trials: usize,
    seed: u64,
) -> Result<DecompositionReport> {
    let g = &d.gram;
    let n = d.ndofs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut part, mut idem, mut ann, mut inv, mut iso) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..trials {
        let x = random_vector(&mut rng, n);
        let nx = gnorm(g, &x);
        let (pv, pw, pz) = (d.apply_pv(&x), d.apply_pw(&x), d.apply_pz(&x));
        let sum: Vec<c64> = (0..n).map(|i| pv[i] + pw[i] + pz[i]).collect();
        part = part.max(gnorm(g, &diff(&sum, &x)) / nx);
        idem = idem
            .max(gnorm(g, &diff(&d.apply_pv(&pv), &pv)) / nx)
            .max(gnorm(g, &diff(&d.apply_pw(&pw), &pw)) / nx)
            .max(gnorm(g, &diff(&d.apply_pz(&pz), &pz)) / nx);
        for (p, q) in [(&pv, 1), (&pv, 2), (&pw, 0), (&pw, 2), (&pz, 0), (&pz, 1)] {
            let y = match q {
                0 => d.apply_pv(p),
                1 => d.apply_pw(p),
                _ => d.apply_pz(p),
            };
            ann = ann.max(gnorm(g, &y) / nx);
        }
        let tx = d.apply_t(&x);
        inv = inv.max(gnorm(g, &diff(&d.apply_t(&tx), &x)) / nx);
        iso = iso.max((gnorm(g, &tx) - nx).abs() / nx);
    }

    // dual H¹ norm of R w: ‖M⁻¹ R w‖ for H = M Mᵀ
    let m = cholesky_lower(&gram_h1.to_dense_real())?;
    let mut rw = r.to_dense_real() * &d.w;
    lower_solve(&m, &mut rw);
    let w_residual = (0..rw.ncols())
        .map(|j| (0..rw.nrows()).map(|i| rw[(i, j)].powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);

    let v_l2_ratio_min = match (&d.v, mass) {
        (Some(v), Some(mass)) if v.ncols() > 0 => {
            let mv = v.transpose() * (mass.to_dense_real() * v);
            let (ev, _) = symmetric_eigen(&mv)?;
            Some(ev[0].max(0.0).sqrt())
        }
        _ => None,
    };

    let mut report = DecompositionReport {
        ndofs: n,
        dim_v: d.dim_v(),
        dim_w: d.dim_w(),
        dim_z: d.dim_z(),
        partition_residual: part,
        idempotency_residual: idem,
        annihilation_residual: ann,
        involution_residual: inv,
        isometry_residual: iso,
        w_residual,
        v_l2_ratio_min,
        w_rank: d.w_info.clone(),
        z_rank: d.z_info.clone(),
        b_rank: d.b_info.clone(),
        tolerance: tol,
        trials,
        pass: false,
        warnings: d.warnings.clone(),
    };
    report.pass = report.max_algebra_residual() <= tol && report.w_residual <= tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{validate_level, ProblemConfig};

    fn problem(fields: &str, domain: &str) -> ValidatedProblem {
        let text = format!(
            "[problem]\nomega = 1.0\n[fields]\nrho = 1.0\nc = 1.0\ngamma = 1.0\n{fields}\n\
             [fields.bounds]\nrho = [0.5, 2.0]\nc = [0.5, 2.0]\ngamma = [0.5, 2.0]\n{domain}"
        );
        validate_level(&ProblemConfig::from_toml(&text).unwrap(), 0).unwrap()
    }

    const SQUARE: &str = "[domain]\nkind = \"rect\"\nx = [0.0, 1.0]\ny = [0.0, 1.0]\ncells = [4, 4]";

    #[test]
    fn gap_detection() {
        assert_eq!(decide_rank(&[1.0, 0.5, 1e-15], 1e-10, 1.0).unwrap().rank, 2);
        assert!(matches!(
            decide_rank(&[1.0, 2e-10, 5e-11], 1e-10, 1.0),
            Err(Error::CutoffAmbiguous { .. })
        ));
        assert_eq!(decide_rank(&[], 1e-10, 0.0).unwrap().rank, 0);
    }

    #[test]
    fn one_dimensional_p1_has_trivial_kernel() {
        let vp = problem("", "[domain]\nkind = \"interval\"\nx = [-1.0, 1.0]\ncells = [2]");
        let (d, _) = decompose(&vp, DEFAULT_CUTOFF, true).unwrap();
        assert_eq!(d.ndofs(), 1);
        assert_eq!(d.dim_w(), 0);
        assert_eq!(d.dim_z(), 0);
    }

    #[test]
    fn square_without_q_has_no_correction_space() {
        let vp = problem("", SQUARE);
        let (d, setup) = decompose(&vp, DEFAULT_CUTOFF, true).unwrap();
        assert_eq!(d.dim_z(), 0);
        assert_eq!(d.dim_w() + d.w_info.rank, d.ndofs());
        // constants are always invisible to R
        assert!(d.w_info.rank < setup.scalar_space.ndofs());
        let ss = &setup.scalar_space;
        let aux = assemble_aux(&vp, &setup.vector_space, ss).unwrap();
        let rep = verify_decomposition(&d, &setup.r, &aux.gram_h1, Some(&setup.blocks.mass), 1e-10, 10, 0).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.dim_v, d.v.as_ref().unwrap().ncols());
    }

    #[test]
    fn corrupted_basis_is_flagged() {
        let vp = problem("", SQUARE);
        let (mut d, setup) = decompose(&vp, DEFAULT_CUTOFF, false).unwrap();
        let aux = assemble_aux(&vp, &setup.vector_space, &setup.scalar_space).unwrap();
        d.w[(3, 0)] += 0.1;
        let rep = verify_decomposition(&d, &setup.r, &aux.gram_h1, None, 1e-10, 5, 0).unwrap();
        assert!(!rep.pass);
    }

    #[test]
    fn transformation_is_an_isometric_involution() {
        let vp = problem(
            "p = \"0.3*x + 0.2*y\"\np_x = 0.3\np_y = 0.2\np_xx = 0.0\np_xy = 0.0\np_yy = 0.0",
            SQUARE,
        );
        let (d, _) = decompose(&vp, DEFAULT_CUTOFF, false).unwrap();
        let t = d.t_dense();
        let g = d.gram.to_dense();
        let tt = &t * &t;
        let err = (&tt - Mat::<c64>::identity(d.ndofs(), d.ndofs())).norm_l2();
        assert!(err < 1e-9, "{err}");
        let iso = (t.adjoint() * &g * &t - &g).norm_l2() / g.norm_l2();
        assert!(iso < 1e-10);
    }
}
