//! Galerkin matrices of the sesquilinear form and its auxiliary operators.
//!
//! Entries follow `A[i][j] = a(φ_j, φ_i)`: rows are test functions, columns
//! trial functions. Vector basis functions are `N_a e_c` with real Lagrange
//! `N_a`, embedded in three dimensions.

use faer::c64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::config::ProblemConfig;
use crate::coefficients::field::{Point, VectorField};
use crate::coefficients::pointwise::{compute_lambda, compute_q, cross_matrix};
use crate::coefficients::validate::ValidatedProblem;
use crate::error::{Error, Result};
use crate::linalg::{cz, SparseMatrix};
use crate::mesh_fem::{FESpace, Quadrature};

type Triplets = Vec<(usize, usize, c64)>;

/// Basis data at one physical quadrature point.
pub struct QpData {
    pub x: Point,
    pub w: f64,
    pub vals: Vec<f64>,
    /// Physical gradients, padded to three components.
    pub grads: Vec<[f64; 3]>,
}

/// Quadrature data of one cell for a given space.
pub fn cell_data(space: &FESpace, quad: &Quadrature, cell: usize) -> Vec<QpData> {
    let mesh = &space.mesh;
    let o = mesh.cell_origin(cell);
    let [hx, hy] = mesh.h();
    let det = mesh.cell_measure(cell);
    quad.points
        .iter()
        .zip(&quad.weights)
        .map(|(s, &w)| {
            let (vals, rg) = space.ref_basis(s);
            let x = if mesh.dim == 1 {
                [o[0] + hx * s[0], 0.0, 0.0]
            } else {
                [o[0] + hx * s[0], o[1] + hy * s[1], 0.0]
            };
            let grads = rg
                .iter()
                .map(|g| if mesh.dim == 1 { [g[0] / hx, 0.0, 0.0] } else { [g[0] / hx, g[1] / hy, 0.0] })
                .collect();
            QpData { x, w: w * det, vals, grads }
        })
        .collect()
}

/// Local (dof, node-local index, component) list of a cell.
fn local_dofs(space: &FESpace, cell: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (a, &node) in space.cell_nodes(cell).iter().enumerate() {
        for comp in 0..space.ncomp {
            if let Some(d) = space.dof(node, comp) {
                out.push((d, a, comp));
            }
        }
    }
    out
}

/// Runs `kernel` on every cell in parallel and merges the per-cell triplets
/// in cell order, so the result does not depend on the thread count.
fn assemble_cells<F>(ncells: usize, nblocks: usize, kernel: F) -> Result<Vec<Triplets>>
where
    F: Fn(usize, &mut [Triplets]) -> Result<()> + Sync,
{
    let per_cell: Vec<Result<Vec<Triplets>>> = (0..ncells)
        .into_par_iter()
        .map(|cell| {
            let mut local = vec![Vec::new(); nblocks];
            kernel(cell, &mut local)?;
            Ok(local)
        })
        .collect();
    let mut out = vec![Vec::new(); nblocks];
    for local in per_cell {
        for (o, l) in out.iter_mut().zip(local?) {
            o.extend(l);
        }
    }
    Ok(out)
}

/// Coefficients needed by the vector blocks at one point.
struct PointCoeffs {
    rho: f64,
    c2rho: f64,
    gamma_rho: f64,
    grad_p: [f64; 3],
    /// Hess p − ρ Hess φ
    hess: [[f64; 3]; 3],
    b: [f64; 3],
    divrhob: f64,
}

fn point_coeffs(cfg: &ProblemConfig, x: &Point) -> Result<PointCoeffs> {
    let rho = cfg.rho.eval(x);
    let c = cfg.c.eval(x);
    let hp = cfg.p.hess(x)?;
    let hphi = cfg.phi.hess(x)?;
    let mut hess = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            hess[i][j] = hp[i][j] - rho * hphi[i][j];
        }
    }
    Ok(PointCoeffs {
        rho,
        c2rho: c * c * rho,
        gamma_rho: cfg.gamma.eval(x) * rho,
        grad_p: cfg.p.grad(x)?,
        hess,
        b: cfg.b.eval(x),
        divrhob: cfg.divrhob.eval(x),
    })
}

/// Every vector-vector term of the form plus Gram matrices; the gravity
/// blocks are present when a Dirichlet scalar space was supplied.
#[derive(Debug, Clone)]
pub struct SystemBlocks {
    /// `⟨c²ρ div ξ, div ξ'⟩`
    pub div: SparseMatrix,
    /// `⟨div ξ, ∇p·ξ'⟩`
    pub pc1: SparseMatrix,
    /// `⟨∇p·ξ, div ξ'⟩`
    pub pc2: SparseMatrix,
    /// `⟨(Hess p − ρ Hess φ) ξ, ξ'⟩`
    pub hess: SparseMatrix,
    /// `⟨ρ L L ξ, ξ'⟩` with `L = ω + i∂_b + iΩ×`, written as
    /// `⟨ρ Lξ, Lξ'⟩ − i⟨div(ρb) Lξ, ξ'⟩`.
    pub adv: SparseMatrix,
    /// `⟨γρ ξ, ξ'⟩`
    pub damp: SparseMatrix,
    /// `⟨ξ, ξ'⟩`
    pub mass: SparseMatrix,
    /// `⟨ρ ξ, ξ'⟩`
    pub rho_mass: SparseMatrix,
    /// `⟨ρ i∂_b ξ, ξ'⟩`
    pub convective: SparseMatrix,
    /// `⟨div ξ, div ξ'⟩`
    pub divdiv: SparseMatrix,
    /// `⟨∂_b ξ, ∂_b ξ'⟩`
    pub flow: SparseMatrix,
    /// `⟨∇ξ, ∇ξ'⟩` (Frobenius)
    pub gradgrad: SparseMatrix,
    /// X inner product: `divdiv + flow + mass`.
    pub gramx: SparseMatrix,
    /// `⟨ρ ξ, ∇ψ'⟩`, scalar rows × vector columns.
    pub gravc: Option<SparseMatrix>,
    /// `⟨∇ψ, ∇ψ'⟩`
    pub gravs: Option<SparseMatrix>,
    pub omega: f64,
}

const NB: usize = 12;

pub fn assemble_blocks(vp: &ValidatedProblem, vs: &FESpace, gravity: Option<&FESpace>) -> Result<SystemBlocks> {
    let cfg = &vp.cfg;
    if !vs.kind.is_vector() {
        return Err(Error::DimensionMismatch("assemble_blocks needs a vector space".into()));
    }
    if vs.mesh != vp.mesh {
        return Err(Error::DimensionMismatch("space and validated problem use different meshes".into()));
    }
    let quad = Quadrature::for_degree(vs.dim(), vs.degree);
    let omega = cfg.omega;
    let w = cross_matrix(&cfg.angvel);
    let ncells = vs.mesh.num_cells();

    let blocks = assemble_cells(ncells, NB, |cell, out| {
        let qps = cell_data(vs, &quad, cell);
        let dofs = local_dofs(vs, cell);
        for q in &qps {
            let pc = point_coeffs(cfg, &q.x)?;
            let d = vs.dim();
            // per local dof: value vector, divergence, b·∇N, ∇ row, L φ
            let info: Vec<_> = dofs
                .iter()
                .map(|&(_, a, comp)| {
                    let n = q.vals[a];
                    let g = q.grads[a];
                    let bgrad: f64 = (0..d).map(|k| pc.b[k] * g[k]).sum();
                    let mut lphi = [c64::new(0.0, 0.0); 3];
                    lphi[comp] += c64::new(omega * n, bgrad);
                    for r in 0..3 {
                        lphi[r] += c64::new(0.0, n * w[r][comp]);
                    }
                    (n, g[comp], bgrad, g, lphi, comp)
                })
                .collect();
            for (i, &(di, _, _)) in dofs.iter().enumerate() {
                let (ni, divi, bgi, gi, li, ci) = info[i];
                for (j, &(dj, _, _)) in dofs.iter().enumerate() {
                    let (nj, divj, bgj, gj, lj, cj) = info[j];
                    let wq = q.w;
                    let same = ci == cj;
                    let mut vals = [c64::new(0.0, 0.0); NB];
                    vals[0] = cz(wq * pc.c2rho * divj * divi);
                    vals[1] = cz(wq * divj * pc.grad_p[ci] * ni);
                    vals[2] = cz(wq * pc.grad_p[cj] * nj * divi);
                    vals[3] = cz(wq * pc.hess[ci][cj] * nj * ni);
                    let mut adv = c64::new(0.0, 0.0);
                    for r in 0..3 {
                        adv += lj[r] * li[r].conj();
                    }
                    let corr = lj[ci] * ni;
                    vals[4] = adv * (wq * pc.rho) - c64::new(0.0, wq * pc.divrhob) * corr;
                    if same {
                        vals[5] = cz(wq * pc.gamma_rho * nj * ni);
                        vals[6] = cz(wq * nj * ni);
                        vals[7] = cz(wq * pc.rho * nj * ni);
                        vals[8] = c64::new(0.0, wq * pc.rho * bgj * ni);
                        vals[10] = cz(wq * bgj * bgi);
                        vals[11] = cz(wq * (gj[0] * gi[0] + gj[1] * gi[1] + gj[2] * gi[2]));
                    }
                    vals[9] = cz(wq * divj * divi);
                    for (k, v) in vals.iter().enumerate() {
                        if *v != c64::new(0.0, 0.0) {
                            out[k].push((di, dj, *v));
                        }
                    }
                }
            }
        }
        Ok(())
    })?;
    let n = vs.ndofs();
    let mut mats: Vec<SparseMatrix> = blocks.into_iter().map(|t| SparseMatrix::from_triplets(n, n, t)).collect();
    let gradgrad = mats.pop().unwrap();
    let flow = mats.pop().unwrap();
    let divdiv = mats.pop().unwrap();
    let convective = mats.pop().unwrap();
    let rho_mass = mats.pop().unwrap();
    let mass = mats.pop().unwrap();
    let damp = mats.pop().unwrap();
    let adv = mats.pop().unwrap();
    let hess = mats.pop().unwrap();
    let pc2 = mats.pop().unwrap();
    let pc1 = mats.pop().unwrap();
    let div = mats.pop().unwrap();
    let gramx = SparseMatrix::lin_comb(&[(cz(1.0), &divdiv), (cz(1.0), &flow), (cz(1.0), &mass)]);

    let (gravc, gravs) = match gravity {
        Some(ss) => {
            let (c, s) = assemble_gravity(cfg, vs, ss)?;
            (Some(c), Some(s))
        }
        None => (None, None),
    };
    Ok(SystemBlocks {
        div,
        pc1,
        pc2,
        hess,
        adv,
        damp,
        mass,
        rho_mass,
        convective,
        divdiv,
        flow,
        gradgrad,
        gramx,
        gravc,
        gravs,
        omega,
    })
}

/// `A_cow = DIV + PC1 + PC2 + HESS − ADV − iω DAMP`.
pub fn assemble_cowling(blocks: &SystemBlocks) -> SparseMatrix {
    SparseMatrix::lin_comb(&[
        (cz(1.0), &blocks.div),
        (cz(1.0), &blocks.pc1),
        (cz(1.0), &blocks.pc2),
        (cz(1.0), &blocks.hess),
        (cz(-1.0), &blocks.adv),
        (c64::new(0.0, -blocks.omega), &blocks.damp),
    ])
}

/// Coupled matrix `[[A_cow, −GRAVCᴴ], [−GRAVC, (4πG)⁻¹ GRAVS]]`.
pub fn assemble_full(blocks: &SystemBlocks, grav_const: f64) -> Result<SparseMatrix> {
    let (c, s) = gravity_blocks(blocks)?;
    let a = assemble_cowling(blocks);
    let scale = 1.0 / (4.0 * std::f64::consts::PI * grav_const);
    Ok(SparseMatrix::block2(&a, &c.adjoint().scale(cz(-1.0)), &c.scale(cz(-1.0)), &s.scale(cz(scale))))
}

pub fn gravity_blocks(blocks: &SystemBlocks) -> Result<(&SparseMatrix, &SparseMatrix)> {
    match (&blocks.gravc, &blocks.gravs) {
        (Some(c), Some(s)) => Ok((c, s)),
        _ => Err(Error::PreconditionViolated("gravity blocks were not assembled".into())),
    }
}

fn check_same_mesh(a: &FESpace, b: &FESpace) -> Result<()> {
    if a.mesh != b.mesh {
        return Err(Error::DimensionMismatch("vector and scalar spaces live on different meshes".into()));
    }
    Ok(())
}

fn assemble_gravity(cfg: &ProblemConfig, vs: &FESpace, ss: &FESpace) -> Result<(SparseMatrix, SparseMatrix)> {
    check_same_mesh(vs, ss)?;
    let k = vs.degree.max(ss.degree);
    let quad = Quadrature::for_degree(vs.dim(), k);
    let ncells = vs.mesh.num_cells();
    let blocks = assemble_cells(ncells, 2, |cell, out| {
        let qv = cell_data(vs, &quad, cell);
        let qs = cell_data(ss, &quad, cell);
        let vd = local_dofs(vs, cell);
        let sd = local_dofs(ss, cell);
        for (pv, ps) in qv.iter().zip(&qs) {
            let rho = cfg.rho.eval(&pv.x);
            for &(i, a, _) in &sd {
                let gi = ps.grads[a];
                for &(j, b, comp) in &vd {
                    let v = pv.w * rho * pv.vals[b] * gi[comp];
                    if v != 0.0 {
                        out[0].push((i, j, cz(v)));
                    }
                }
                for &(j, b, _) in &sd {
                    let gj = ps.grads[b];
                    let v = ps.w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    if v != 0.0 {
                        out[1].push((i, j, cz(v)));
                    }
                }
            }
        }
        Ok(())
    })?;
    let mut it = blocks.into_iter();
    let c = SparseMatrix::from_triplets(ss.ndofs(), vs.ndofs(), it.next().unwrap());
    let s = SparseMatrix::from_triplets(ss.ndofs(), ss.ndofs(), it.next().unwrap());
    Ok((c, s))
}

/// `R[i][j] = ⟨φ_j, ∇v_i⟩ − ⟨q·φ_j, v_i⟩`.
pub fn assemble_r(vp: &ValidatedProblem, vs: &FESpace, ss: &FESpace) -> Result<SparseMatrix> {
    check_same_mesh(vs, ss)?;
    let cfg = &vp.cfg;
    cfg.p.check_grad()?;
    let quad = Quadrature::for_degree(vs.dim(), vs.degree.max(ss.degree));
    let t = assemble_cells(vs.mesh.num_cells(), 1, |cell, out| {
        let qv = cell_data(vs, &quad, cell);
        let qs = cell_data(ss, &quad, cell);
        let vd = local_dofs(vs, cell);
        let sd = local_dofs(ss, cell);
        for (pv, ps) in qv.iter().zip(&qs) {
            let q = compute_q(cfg, &pv.x)?;
            for &(i, a, _) in &sd {
                for &(j, b, comp) in &vd {
                    let v = pv.w * pv.vals[b] * (ps.grads[a][comp] - q[comp] * ps.vals[a]);
                    if v != 0.0 {
                        out[0].push((i, j, cz(v)));
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(SparseMatrix::from_triplets(ss.ndofs(), vs.ndofs(), t.into_iter().next().unwrap()))
}

/// `B[i][j] = ⟨∇v_j, ∇v_i⟩ − ⟨q·∇v_j, v_i⟩`.
pub fn assemble_b(vp: &ValidatedProblem, ss: &FESpace) -> Result<SparseMatrix> {
    let cfg = &vp.cfg;
    cfg.p.check_grad()?;
    let quad = Quadrature::for_degree(ss.dim(), ss.degree);
    let t = assemble_cells(ss.mesh.num_cells(), 1, |cell, out| {
        let qs = cell_data(ss, &quad, cell);
        let sd = local_dofs(ss, cell);
        for p in &qs {
            let q = compute_q(cfg, &p.x)?;
            for &(i, a, _) in &sd {
                for &(j, b, _) in &sd {
                    let gi = p.grads[a];
                    let gj = p.grads[b];
                    let qg = q[0] * gj[0] + q[1] * gj[1] + q[2] * gj[2];
                    let v = p.w * (gi[0] * gj[0] + gi[1] * gj[1] - qg * p.vals[a]);
                    if v != 0.0 {
                        out[0].push((i, j, cz(v)));
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(SparseMatrix::from_triplets(ss.ndofs(), ss.ndofs(), t.into_iter().next().unwrap()))
}

/// Scalar `H¹` Gram matrix `⟨∇v, ∇v'⟩ + ⟨v, v'⟩`.
pub fn assemble_gram_h1(ss: &FESpace) -> SparseMatrix {
    let quad = Quadrature::for_degree(ss.dim(), ss.degree);
    let t = assemble_cells(ss.mesh.num_cells(), 1, |cell, out| {
        let qs = cell_data(ss, &quad, cell);
        let sd = local_dofs(ss, cell);
        for p in &qs {
            for &(i, a, _) in &sd {
                for &(j, b, _) in &sd {
                    let gi = p.grads[a];
                    let gj = p.grads[b];
                    let v = p.w * (gi[0] * gj[0] + gi[1] * gj[1] + p.vals[a] * p.vals[b]);
                    out[0].push((i, j, cz(v)));
                }
            }
        }
        Ok(())
    })
    .expect("kernel cannot fail");
    SparseMatrix::from_triplets(ss.ndofs(), ss.ndofs(), t.into_iter().next().unwrap())
}

/// Load vector `⟨f, φ_i⟩`.
pub fn assemble_rhs(f: &VectorField, vs: &FESpace) -> Vec<c64> {
    let quad = Quadrature::for_degree(vs.dim(), vs.degree);
    let t = assemble_cells(vs.mesh.num_cells(), 1, |cell, out| {
        let qs = cell_data(vs, &quad, cell);
        let vd = local_dofs(vs, cell);
        for p in &qs {
            let fx = f.eval(&p.x);
            for &(i, a, comp) in &vd {
                out[0].push((i, 0, cz(p.w * fx[comp] * p.vals[a])));
            }
        }
        Ok(())
    })
    .expect("kernel cannot fail");
    let mut rhs = vec![c64::new(0.0, 0.0); vs.ndofs()];
    for (i, _, v) in t.into_iter().next().unwrap() {
        rhs[i] += v;
    }
    rhs
}

/// Zero-order form of the Cowling matrix for `b = 0`:
/// `⟨c²ρ(div ξ + q·ξ), div ξ' + q·ξ'⟩ − ⟨Λξ, ξ'⟩`.
pub fn assemble_representation(vp: &ValidatedProblem, vs: &FESpace) -> Result<SparseMatrix> {
    let cfg = &vp.cfg;
    if !cfg.b.is_zero() {
        return Err(Error::PreconditionViolated("the zero-order representation needs b = 0".into()));
    }
    let quad = Quadrature::for_degree(vs.dim(), vs.degree);
    let ncells = vs.mesh.num_cells();
    let t = assemble_cells(ncells, 1, |cell, out| {
        let qps = cell_data(vs, &quad, cell);
        let dofs = local_dofs(vs, cell);
        for p in &qps {
            let rho = cfg.rho.eval(&p.x);
            let c = cfg.c.eval(&p.x);
            let q = compute_q(cfg, &p.x)?;
            let lam = compute_lambda(cfg, &p.x)?;
            // div φ + q·φ for each local dof
            let tr: Vec<f64> = dofs.iter().map(|&(_, a, comp)| p.grads[a][comp] + q[comp] * p.vals[a]).collect();
            for (i, &(di, a, ci)) in dofs.iter().enumerate() {
                for (j, &(dj, b, cj)) in dofs.iter().enumerate() {
                    let v = cz(p.w * c * c * rho * tr[j] * tr[i]) - lam[ci][cj] * (p.w * p.vals[b] * p.vals[a]);
                    out[0].push((di, dj, v));
                }
            }
        }
        Ok(())
    })?;
    let n = vs.ndofs();
    Ok(SparseMatrix::from_triplets(n, n, t.into_iter().next().unwrap()))
}

/// Dimensions and names of assembled blocks, written next to Matrix Market
/// exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockManifest {
    pub blocks: Vec<BlockEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub name: String,
    pub file: String,
    pub rows: usize,
    pub cols: usize,
    pub nnz: usize,
}

impl SystemBlocks {
    pub fn named(&self) -> Vec<(&'static str, &SparseMatrix)> {
        let mut v = vec![
            ("DIV", &self.div),
            ("PC1", &self.pc1),
            ("PC2", &self.pc2),
            ("HESS", &self.hess),
            ("ADV", &self.adv),
            ("DAMP", &self.damp),
            ("MASS", &self.mass),
            ("GRAMX", &self.gramx),
        ];
        if let (Some(c), Some(s)) = (&self.gravc, &self.gravs) {
            v.push(("GRAVC", c));
            v.push(("GRAVS", s));
        }
        v
    }

    /// Writes one `.mtx` file per block and `manifest.json` into `dir`.
    pub fn export(&self, dir: &std::path::Path, extra: &[(&str, &SparseMatrix)]) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        let mut paths = Vec::new();
        for (name, m) in self.named().into_iter().chain(extra.iter().copied()) {
            let file = format!("{name}.mtx");
            let path = dir.join(&file);
            std::fs::write(&path, m.to_matrix_market())?;
            paths.push(path);
            entries.push(BlockEntry {
                name: name.to_string(),
                file,
                rows: m.nrows,
                cols: m.ncols,
                nnz: m.nnz(),
            });
        }
        let manifest = BlockManifest { blocks: entries };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("manifest serialises"))?;
        paths.push(path);
        Ok(paths)
    }
}

/// `R`, `B` and the scalar `H¹` Gram matrix on a Neumann scalar space.
#[derive(Debug, Clone)]
pub struct AuxOperators {
    pub r: SparseMatrix,
    pub b: SparseMatrix,
    pub gram_h1: SparseMatrix,
}

pub fn assemble_aux(vp: &ValidatedProblem, vs: &FESpace, ss: &FESpace) -> Result<AuxOperators> {
    Ok(AuxOperators {
        r: assemble_r(vp, vs, ss)?,
        b: assemble_b(vp, ss)?,
        gram_h1: assemble_gram_h1(ss),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{validate_level, ProblemConfig};
    use crate::mesh_fem::SpaceKind;

    const BOUNDS: &str = "[fields.bounds]\nrho = [0.1, 10.0]\nc = [0.1, 10.0]\ngamma = [0.01, 10.0]\n";

    fn problem(fields: &str, domain: &str, omega: f64) -> ValidatedProblem {
        let text = format!("[problem]\nomega = {omega}\n[fields]\n{fields}\n{BOUNDS}\n{domain}");
        let cfg = ProblemConfig::from_toml(&text).unwrap();
        validate_level(&cfg, 0).unwrap()
    }

    fn unit_square(n: usize) -> String {
        format!("[domain]\nkind = \"rect\"\nx = [0.0, 1.0]\ny = [0.0, 1.0]\ncells = [{n}, {n}]\n")
    }

    fn blocks_of(vp: &ValidatedProblem, degree: usize) -> (FESpace, SystemBlocks) {
        let vs = FESpace::new(&vp.mesh, degree, SpaceKind::VectorNormal).unwrap();
        let b = assemble_blocks(vp, &vs, None).unwrap();
        (vs, b)
    }

    #[test]
    fn single_cell_element_matrices() {
        let h = 0.5;
        let vp = problem("rho = 1.0\nc = 1.0\ngamma = 1.0", &format!("[domain]\nkind = \"interval\"\nx = [0.0, {h}]\ncells = [1]"), 1.0);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorFree).unwrap();
        let b = assemble_blocks(&vp, &vs, None).unwrap();
        let div = [[1.0 / h, -1.0 / h], [-1.0 / h, 1.0 / h]];
        let mass = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((b.div.get(i, j) - cz(div[i][j])).norm() < 1e-14);
                assert!((b.mass.get(i, j) - cz(mass[i][j])).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn advection_without_flow_is_weighted_mass() {
        let vp = problem("rho = \"1 + x*y\"\nc = 1.0\ngamma = 1.0", &unit_square(3), 1.7);
        let (_, b) = blocks_of(&vp, 1);
        let expect = b.rho_mass.scale(cz(1.7 * 1.7));
        assert!(b.adv.distance(&expect) <= 1e-14 * expect.frobenius());
        assert!(b.adv.hermitian_residual() <= 1e-15);
    }

    #[test]
    fn pressure_coupling_blocks_are_adjoint() {
        let vp = problem(
            "rho = 1.0\nc = 1.0\ngamma = 1.0\np = \"x^2*y\"\np_x = \"2*x*y\"\np_y = \"x^2\"\np_xx = \"2*y\"\np_xy = \"2*x\"\np_yy = 0.0",
            &unit_square(3),
            1.0,
        );
        let (_, b) = blocks_of(&vp, 2);
        assert!(b.pc2.distance(&b.pc1.adjoint()) <= 1e-12 * b.pc1.frobenius());
        for m in [&b.div, &b.damp, &b.mass, &b.gramx, &b.hess] {
            assert!(m.hermitian_residual() <= 1e-12 * m.frobenius());
        }
    }

    const BUBBLE_FLOW: &str = "b = [\"x^2*(1-x)^2*(2*y - 6*y^2 + 4*y^3)\", \"-(2*x - 6*x^2 + 4*x^3)*y^2*(1-y)^2\"]\ndivrhob = 0.0";

    #[test]
    fn convective_block_is_hermitian_for_solenoidal_flow() {
        let vp = problem(&format!("rho = 1.0\nc = 1.0\ngamma = 1.0\n{BUBBLE_FLOW}"), &unit_square(3), 1.0);
        let (_, b) = blocks_of(&vp, 1);
        assert!(b.convective.frobenius() > 1e-6);
        assert!(b.convective.hermitian_residual() <= 1e-11 * b.convective.frobenius());
    }

    #[test]
    fn imaginary_part_is_damping() {
        let vp = problem(
            &format!("rho = 1.0\nc = \"1 + x\"\ngamma = \"1 + y\"\n{BUBBLE_FLOW}"),
            &unit_square(2),
            1.3,
        );
        let (vs, b) = blocks_of(&vp, 1);
        let a = assemble_cowling(&b);
        let x: Vec<c64> = (0..vs.ndofs()).map(|i| c64::new((i as f64).sin(), (2.0 * i as f64).cos())).collect();
        let im = a.quad_form(&x).im;
        let damp = b.damp.quad_form(&x).re;
        assert!((im + 1.3 * damp).abs() <= 1e-11 * 1.3 * damp);
    }

    #[test]
    fn neumann_operators_without_q() {
        let vp = problem("rho = 1.0\nc = 1.0\ngamma = 1.0", &unit_square(3), 1.0);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorNormal).unwrap();
        let ss = FESpace::new(&vp.mesh, 1, SpaceKind::Scalar).unwrap();
        let aux = assemble_aux(&vp, &vs, &ss).unwrap();
        let ones = vec![cz(1.0); ss.ndofs()];
        assert!(crate::linalg::norm2(&aux.b.matvec(&ones)) < 1e-13);
        // constants test against ∇1 = 0
        assert!(crate::linalg::norm2(&aux.r.adjoint_matvec(&ones)) < 1e-13);
    }

    #[test]
    fn constant_q_row_of_r() {
        let vp = problem(
            "rho = 1.0\nc = 1.0\ngamma = 1.0\np = \"0.5*x\"\np_x = 0.5\np_xx = 0.0",
            "[domain]\nkind = \"interval\"\nx = [-1.0, 1.0]\ncells = [4]",
            1.0,
        );
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorNormal).unwrap();
        let ss = FESpace::new(&vp.mesh, 1, SpaceKind::Scalar).unwrap();
        let r = assemble_r(&vp, &vs, &ss).unwrap();
        let ones = vec![cz(1.0); ss.ndofs()];
        let row = r.adjoint_matvec(&ones);
        let mass_row = assemble_rhs(&VectorField::parse(&["1"]).unwrap(), &vs);
        for (a, m) in row.iter().zip(&mass_row) {
            assert!((a + m * 0.5).norm() < 1e-14);
        }
    }

    #[test]
    fn load_vector_of_a_linear_field_is_mass_times_interpolant() {
        let vp = problem("rho = 1.0\nc = 1.0\ngamma = 1.0", "[domain]\nkind = \"interval\"\nx = [0.0, 1.0]\ncells = [4]", 1.0);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorFree).unwrap();
        let b = assemble_blocks(&vp, &vs, None).unwrap();
        let rhs = assemble_rhs(&VectorField::parse(&["x"]).unwrap(), &vs);
        let interp: Vec<c64> = (0..5).map(|i| cz(i as f64 / 4.0)).collect();
        for (a, m) in rhs.iter().zip(&b.mass.matvec(&interp)) {
            assert!((a - m).norm() < 1e-15);
        }
        assert!(assemble_rhs(&VectorField::zero(), &vs).iter().all(|v| *v == cz(0.0)));
    }

    #[test]
    fn gravity_blocks_have_expected_shape() {
        let vp = problem("rho = 1.0\nc = 1.0\ngamma = 1.0", &unit_square(2), 1.0);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorNormal).unwrap();
        let ss = FESpace::new(&vp.mesh, 1, SpaceKind::ScalarDirichlet).unwrap();
        let b = assemble_blocks(&vp, &vs, Some(&ss)).unwrap();
        let full = assemble_full(&b, 1.0).unwrap();
        assert_eq!(full.nrows, vs.ndofs() + ss.ndofs());
        let s = b.gravs.as_ref().unwrap();
        assert!(s.hermitian_residual() <= 1e-14 * s.frobenius());
    }

    #[test]
    fn assembly_is_bit_stable_across_thread_counts() {
        let flow = BUBBLE_FLOW.replace("divrhob = 0.0", "divrhob = \"x^2*(1-x)^2*(2*y - 6*y^2 + 4*y^3)\"");
        let vp = problem(&format!("rho = \"1 + x\"\nc = 1.0\ngamma = 1.0\n{flow}"), &unit_square(4), 1.0);
        let vs = FESpace::new(&vp.mesh, 1, SpaceKind::VectorNormal).unwrap();
        let run = |n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            pool.install(|| assemble_cowling(&assemble_blocks(&vp, &vs, None).unwrap()))
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.values, b.values);
        assert_eq!(a.row_idx, b.row_idx);
    }
}
