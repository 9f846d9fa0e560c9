//! Direct solves of the Cowling and gravity-coupled systems, and the
//! manufactured-solution convergence study.

use faer::{c64, Mat};
use rand::SeedableRng;
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_blocks, assemble_cowling, assemble_full, assemble_rhs, gravity_blocks, SystemBlocks};
use crate::coefficients::validate::boundary_points;
use crate::coefficients::{validate_level, ProblemConfig, ValidatedProblem, VectorField};
use crate::diagnostics::{fitted_order, ConvergenceLevel, ConvergenceReport};
use crate::error::{Error, Result};
use crate::helmholtz::random_vector;
use crate::linalg::{cz, dense_solve, norm2, sub, SparseLu, SparseMatrix};
use crate::mesh_fem::{FESpace, SpaceKind};

/// Largest accepted relative residual `‖Ax − b‖/‖b‖`.
pub const MAX_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverPath {
    /// Sparse LU of the Cowling matrix alone.
    Cowling,
    /// Sparse LU of the coupled displacement/potential system.
    DirectCoupled,
    /// Elimination of the potential through its Schur complement.
    Schur,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub xi: Vec<c64>,
    pub psi: Option<Vec<c64>>,
    /// Relative residual of the system that was solved; for the Schur path
    /// it is measured on the coupled system.
    pub residual: f64,
    pub path: SolverPath,
    pub wall_time: f64,
}

/// Spaces and matrices of one validated problem.
pub struct Discretization {
    pub vp: ValidatedProblem,
    pub vector_space: FESpace,
    /// Dirichlet scalar space of the truncated gravity problem.
    pub gravity_space: Option<FESpace>,
    pub blocks: SystemBlocks,
}

impl Discretization {
    pub fn new(vp: ValidatedProblem, with_gravity: bool) -> Result<Discretization> {
        let k = vp.cfg.degree;
        let vs = FESpace::new(&vp.mesh, k, SpaceKind::VectorNormal)?;
        let gs = if with_gravity {
            Some(FESpace::new(&vp.mesh, k, SpaceKind::ScalarDirichlet)?)
        } else {
            None
        };
        let blocks = assemble_blocks(&vp, &vs, gs.as_ref())?;
        Ok(Discretization {
            vp,
            vector_space: vs,
            gravity_space: gs,
            blocks,
        })
    }

    pub fn rhs(&self, f: &VectorField) -> Vec<c64> {
        assemble_rhs(f, &self.vector_space)
    }

    pub fn cowling(&self) -> SparseMatrix {
        assemble_cowling(&self.blocks)
    }
}

fn check_omega(cfg: &ProblemConfig) -> Result<()> {
    if cfg.omega == 0.0 {
        return Err(Error::PreconditionViolated("solves need omega != 0".into()));
    }
    Ok(())
}

fn check_rhs(n: usize, rhs: &[c64]) -> Result<()> {
    if rhs.len() != n {
        return Err(Error::DimensionMismatch(format!("right-hand side has {} entries, system has {n}", rhs.len())));
    }
    Ok(())
}

/// Solves `A_cow x = rhs`.
pub fn solve_cowling(disc: &Discretization, rhs: &[c64]) -> Result<SolveResult> {
    check_omega(&disc.vp.cfg)?;
    let start = std::time::Instant::now();
    let a = disc.cowling();
    check_rhs(a.nrows, rhs)?;
    let (xi, residual) = SparseLu::new(&a)?.solve(rhs, MAX_RESIDUAL)?;
    Ok(SolveResult {
        xi,
        psi: None,
        residual,
        path: SolverPath::Cowling,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Solves the coupled system for `(ξ, ψ)` with right-hand side `(rhs, 0)`.
pub fn solve_full(disc: &Discretization, rhs: &[c64], path: SolverPath) -> Result<SolveResult> {
    check_omega(&disc.vp.cfg)?;
    let start = std::time::Instant::now();
    let g = disc.vp.cfg.grav_const;
    let full = assemble_full(&disc.blocks, g)?;
    let n = disc.vector_space.ndofs();
    check_rhs(n, rhs)?;
    let mut b = rhs.to_vec();
    b.resize(full.nrows, c64::new(0.0, 0.0));
    let sol = match path {
        SolverPath::DirectCoupled => SparseLu::new(&full)?.solve(&b, MAX_RESIDUAL)?.0,
        SolverPath::Schur => schur_solve(&disc.blocks, g, rhs)?,
        SolverPath::Cowling => {
            return Err(Error::PreconditionViolated("the coupled solve needs a coupled path".into()));
        }
    };
    let bn = norm2(&b);
    let residual = if bn == 0.0 { 0.0 } else { norm2(&sub(&full.matvec(&sol), &b)) / bn };
    if !(residual <= MAX_RESIDUAL) {
        return Err(Error::SingularMatrix(format!("relative residual {residual:e} of the coupled system")));
    }
    Ok(SolveResult {
        xi: sol[..n].to_vec(),
        psi: Some(sol[n..].to_vec()),
        residual,
        path,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Dense `a_add = Cᴴ S⁻¹ C` with `S = (4πG)⁻¹ GRAVS`, and the factor of `S`.
pub fn gravity_correction(blocks: &SystemBlocks, grav_const: f64) -> Result<(Mat<c64>, SparseLu)> {
    let (c, s) = gravity_blocks(blocks)?;
    let s = s.scale(cz(1.0 / (4.0 * std::f64::consts::PI * grav_const)));
    let lu = SparseLu::new(&s).map_err(|e| Error::SingularGravityBlock(e.to_string()))?;
    let n = c.ncols;
    let mut sc = Mat::<c64>::zeros(c.nrows, n);
    let cd = c.to_dense();
    for j in 0..n {
        let col: Vec<c64> = (0..c.nrows).map(|i| cd[(i, j)]).collect();
        for (i, v) in lu.solve_raw(&col).into_iter().enumerate() {
            sc[(i, j)] = v;
        }
    }
    Ok((cd.adjoint() * sc, lu))
}

/// Hermitian residual and smallest sampled Rayleigh quotient of `a_add`,
/// relative to its norm.
pub fn correction_psd_check(a_add: &Mat<c64>, probes: usize, seed: u64) -> (f64, f64) {
    let norm = a_add.norm_l2().max(f64::MIN_POSITIVE);
    let herm = (a_add - a_add.adjoint()).norm_l2() / norm;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..probes {
        let x = random_vector(&mut rng, a_add.ncols());
        let ax = a_add * crate::linalg::vec_to_col(&x);
        let q: c64 = x.iter().enumerate().map(|(i, xi)| xi.conj() * ax[(i, 0)]).sum();
        worst = worst.min(q.re / (norm * norm2(&x).powi(2)));
    }
    (herm, worst)
}

fn schur_solve(blocks: &SystemBlocks, g: f64, rhs: &[c64]) -> Result<Vec<c64>> {
    let (a_add, lu) = gravity_correction(blocks, g)?;
    let (herm, worst) = correction_psd_check(&a_add, 8, 0);
    if herm > 1e-10 || worst < -1e-12 {
        return Err(Error::SolverBreakdown(format!(
            "gravity correction is not Hermitian positive semidefinite (asymmetry {herm:e}, min quotient {worst:e})"
        )));
    }
    let a = assemble_cowling(blocks).to_dense() - &a_add;
    let xi = dense_solve(&a, rhs);
    if xi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularMatrix("Schur complement is singular".into()));
    }
    let (c, _) = gravity_blocks(blocks)?;
    let psi = lu.solve_raw(&c.matvec(&xi));
    Ok(xi.into_iter().chain(psi).collect())
}

/// Node table of a vector solution: coordinates, then real and imaginary
/// part of each component.
pub fn solution_csv(space: &FESpace, xi: &[c64]) -> String {
    let d = space.dim();
    let mut out = String::from(if d == 1 { "x" } else { "x,y" });
    for c in 0..space.ncomp {
        out.push_str(&format!(",re_{c},im_{c}"));
    }
    out.push('\n');
    for (node, vals) in space.node_values(xi).iter().enumerate() {
        let p = space.node_point(node);
        out.push_str(&format!("{:e}", p[0]));
        if d == 2 {
            out.push_str(&format!(",{:e}", p[1]));
        }
        for v in vals {
            out.push_str(&format!(",{:e},{:e}", v.re, v.im));
        }
        out.push('\n');
    }
    out
}

/// Manufactured-solution study. Level `l` solves on the base mesh refined
/// `l` times; the load is the weak residual `a(I ξ*, φ_i)` of the degree-2
/// interpolant `I ξ*` on the finest mesh (one refinement further for
/// degree-2 studies), and errors are measured against that interpolant. The
/// meshes are nested, so every level's space embeds in the reference space.
pub fn mms_convergence(cfg: &ProblemConfig, exact: &VectorField, levels: usize) -> Result<ConvergenceReport> {
    check_omega(cfg)?;
    if levels < 3 {
        return Err(Error::Config("a convergence study needs at least 3 levels".into()));
    }
    let fine_level = if cfg.degree == 1 { levels - 1 } else { levels };
    let fine_vp = validate_level(cfg, fine_level)?;
    let bnd = boundary_points(&fine_vp.mesh, 2);
    let scale = fine_vp
        .quad_points
        .iter()
        .map(|x| exact.eval(x).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0f64, f64::max);
    for (x, n) in &bnd {
        let v = exact.eval(x);
        let nv = n[0] * v[0] + n[1] * v[1] + n[2] * v[2];
        if nv.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::PreconditionViolated(format!(
                "exact solution has n.xi = {nv:e} at boundary point {x:?}"
            )));
        }
    }
    let fine_space = FESpace::new(&fine_vp.mesh, 2, SpaceKind::VectorNormal)?;
    let fine_blocks = assemble_blocks(&fine_vp, &fine_space, None)?;
    let fine_a = assemble_cowling(&fine_blocks);
    let fine_x: Vec<c64> = fine_space.interpolate_vector(|x| exact.eval(x))?.into_iter().map(cz).collect();
    let fine_ax = fine_a.matvec(&fine_x);

    let rows = (0..levels)
        .into_par_iter()
        .map(|level| {
        let vp = validate_level(cfg, level)?;
        let disc = Discretization::new(vp, false)?;
        let p = disc.vector_space.prolongation(&fine_space)?;
        let rhs = p.adjoint_matvec(&fine_ax);
        let sol = solve_cowling(&disc, &rhs)?;
        let err = sub(&p.matvec(&sol.xi), &fine_x);
        Ok(ConvergenceLevel {
            level,
            h: disc.vp.mesh.h_max(),
            ndofs: disc.vector_space.ndofs(),
            l2_error: fine_blocks.mass.quad_form(&err).re.max(0.0).sqrt(),
            x_error: fine_blocks.gramx.quad_form(&err).re.max(0.0).sqrt(),
        })
        })
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let l2: Vec<f64> = rows.iter().map(|r| r.l2_error).collect();
    let xe: Vec<f64> = rows.iter().map(|r| r.x_error).collect();
    Ok(ConvergenceReport {
        l2_order: fitted_order(&h, &l2),
        x_order: fitted_order(&h, &xe),
        levels: rows,
    })
}
