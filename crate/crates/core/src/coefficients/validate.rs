//! Assumption audit of a configuration on a concrete mesh.

use super::config::{BoxBound, ProblemConfig};
use super::field::{DiffField, Point, ScalarField};
use crate::error::{Error, Result};
use crate::mesh_fem::{Mesh, Quadrature};

const MAX_FD_POINTS: usize = 64;

/// A configuration that passed every check on `mesh`, with the quadrature
/// points used for sampling.
#[derive(Debug, Clone)]
pub struct ValidatedProblem {
    pub cfg: ProblemConfig,
    pub mesh: Mesh,
    pub quad_points: Vec<Point>,
}

/// Physical quadrature points of the default rule for degree `k`.
pub fn quadrature_points(mesh: &Mesh, k: usize) -> Vec<Point> {
    let q = Quadrature::for_degree(mesh.dim, k);
    let [hx, hy] = mesh.h();
    let mut out = Vec::with_capacity(mesh.num_cells() * q.len());
    for cell in 0..mesh.num_cells() {
        let o = mesh.cell_origin(cell);
        for s in &q.points {
            if mesh.dim == 1 {
                out.push([o[0] + hx * s[0], 0.0, 0.0]);
            } else {
                out.push([o[0] + hx * s[0], o[1] + hy * s[1], 0.0]);
            }
        }
    }
    out
}

/// Boundary quadrature points with their outward normals.
pub fn boundary_points(mesh: &Mesh, k: usize) -> Vec<(Point, [f64; 3])> {
    let mut out = Vec::new();
    if mesh.dim == 1 {
        for f in &mesh.boundary {
            let x = mesh.vertices[f.vertices[0]];
            out.push(([x[0], 0.0, 0.0], [f.normal[0], 0.0, 0.0]));
        }
        return out;
    }
    let q = Quadrature::tensor(1, k + 3);
    for f in &mesh.boundary {
        let a = mesh.vertices[f.vertices[0]];
        let b = mesh.vertices[f.vertices[1]];
        for s in &q.points {
            let t = s[0];
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), 0.0];
            out.push((x, [f.normal[0], f.normal[1], 0.0]));
        }
    }
    out
}

fn check_bounds(name: &str, f: &ScalarField, bounds: &BoxBound, points: &[Point]) -> Result<()> {
    for x in points {
        let v = f.eval(x);
        if !(v >= bounds.lo && v <= bounds.hi) {
            return Err(Error::ConstraintViolation {
                field: name.to_string(),
                point: *x,
                value: v,
                lo: bounds.lo,
                hi: bounds.hi,
            });
        }
    }
    Ok(())
}

struct FdCheck {
    h: f64,
    tol: f64,
}

/// One declared derivative value next to its difference estimate.
struct FdSample {
    name: String,
    x: Point,
    declared: f64,
    estimate: f64,
    /// Magnitude of the terms summed into `estimate`.
    scale: f64,
    noise: f64,
}

impl FdSample {
    fn magnitude(&self) -> f64 {
        self.declared.abs().max(self.estimate.abs()).max(self.scale)
    }
}

/// Accepts a sample when it agrees to `tol` relative to the largest
/// magnitude of the same derivative over all samples, plus roundoff.
fn judge(tol: f64, samples: &[FdSample]) -> Result<()> {
    let mut global = std::collections::HashMap::<&str, f64>::new();
    for s in samples {
        let g = global.entry(&s.name).or_insert(0.0);
        *g = g.max(s.magnitude());
    }
    for s in samples {
        let allowed = tol * global[s.name.as_str()] + s.noise;
        if !((s.declared - s.estimate).abs() <= allowed) {
            return Err(Error::InconsistentDerivative {
                field: s.name.clone(),
                point: s.x,
                declared: s.declared,
                estimate: s.estimate,
            });
        }
    }
    Ok(())
}

impl FdCheck {
    /// Central difference of `f` along `axis`, with its roundoff floor.
    fn first(&self, f: &dyn Fn(&Point) -> f64, x: &Point, axis: usize) -> (f64, f64) {
        let mut xp = *x;
        let mut xm = *x;
        xp[axis] += self.h;
        xm[axis] -= self.h;
        let (fp, fm) = (f(&xp), f(&xm));
        let mag = fp.abs().max(fm.abs()).max(f(x).abs());
        ((fp - fm) / (2.0 * self.h), 16.0 * f64::EPSILON * mag / self.h)
    }

    /// Second difference of `f` with the wider step `sqrt(h)`.
    fn second(&self, f: &dyn Fn(&Point) -> f64, x: &Point, i: usize, j: usize) -> (f64, f64) {
        let h = self.h.sqrt() * 0.1;
        let at = |di: f64, dj: f64| {
            let mut y = *x;
            y[i] += di;
            y[j] += dj;
            f(&y)
        };
        let mag = f(x).abs().max(at(h, h).abs()).max(at(-h, -h).abs());
        let est = if i == j {
            let mut yp = *x;
            let mut ym = *x;
            yp[i] += h;
            ym[i] -= h;
            (f(&yp) - 2.0 * f(x) + f(&ym)) / (h * h)
        } else {
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
        };
        // roundoff plus an O(h²) truncation allowance
        (est, 64.0 * f64::EPSILON * mag / (h * h) + 1e-2 * h * h * mag.max(1.0))
    }
}

fn is_grid(f: &ScalarField) -> bool {
    matches!(f, ScalarField::Grid(_))
}

const AXIS: [&str; 3] = ["x", "y", "z"];

fn check_diff_field(fd: &FdCheck, field: &DiffField, dim: usize, points: &[Point], with_grad: bool) -> Result<()> {
    if is_grid(&field.value) {
        return Ok(());
    }
    let mut samples = Vec::new();
    let mut push = |name: String, x: &Point, declared: f64, (estimate, noise): (f64, f64)| {
        samples.push(FdSample {
            name,
            x: *x,
            declared,
            estimate,
            scale: 0.0,
            noise,
        })
    };
    let value = |y: &Point| field.value.eval(y);
    for x in points {
        if with_grad {
            let g = field.grad(x)?;
            for a in 0..dim {
                if field.declared_grad(a).is_some_and(is_grid) {
                    continue;
                }
                push(format!("{}_{}", field.name, AXIS[a]), x, g[a], fd.first(&value, x, a));
            }
        }
        let hess = field.hess(x)?;
        for i in 0..dim {
            for j in i..dim {
                // Prefer differencing a declared gradient component.
                let est = match field.declared_grad(j) {
                    Some(gj) if !is_grid(gj) => fd.first(&|y: &Point| gj.eval(y), x, i),
                    Some(_) => continue,
                    None => fd.second(&value, x, i, j),
                };
                push(format!("{}_{}{}", field.name, AXIS[i], AXIS[j]), x, hess[i][j], est);
            }
        }
    }
    judge(fd.tol, &samples)
}

/// Evenly spread subset of interior sample points for the difference checks.
fn spot_points(points: &[Point]) -> Vec<Point> {
    let stride = points.len().div_ceil(MAX_FD_POINTS).max(1);
    points.iter().step_by(stride).copied().collect()
}

pub fn validate_config(cfg: &ProblemConfig, mesh: &Mesh) -> Result<ValidatedProblem> {
    if mesh.dim != cfg.dim() {
        return Err(Error::DimensionMismatch(format!(
            "configuration is {}D but the mesh is {}D",
            cfg.dim(),
            mesh.dim
        )));
    }
    cfg.p.check_grad()?;
    cfg.p.check_hess()?;
    cfg.phi.check_hess()?;

    let quad_points = quadrature_points(mesh, cfg.degree);
    let boundary = boundary_points(mesh, cfg.degree);
    let boundary_x: Vec<Point> = boundary.iter().map(|(x, _)| *x).collect();
    for pts in [&quad_points, &boundary_x] {
        check_bounds("rho", &cfg.rho, &cfg.rho_bounds, pts)?;
        check_bounds("c", &cfg.c, &cfg.c_bounds, pts)?;
        check_bounds("gamma", &cfg.gamma, &cfg.gamma_bounds, pts)?;
    }

    let b_inf = quad_points
        .iter()
        .chain(&boundary_x)
        .map(|x| {
            let b = cfg.b.eval(x);
            (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt()
        })
        .fold(0.0f64, f64::max);
    for (x, n) in &boundary {
        let b = cfg.b.eval(x);
        let nb = n[0] * b[0] + n[1] * b[1] + n[2] * b[2];
        if !(nb.abs() <= 1e-12 * b_inf) {
            return Err(Error::BoundaryFlowViolation { point: *x, value: nb });
        }
    }

    let fd = FdCheck {
        h: cfg.options.fd_step,
        tol: cfg.options.fd_tol,
    };
    let spots = spot_points(&quad_points);
    let dim = mesh.dim;
    check_diff_field(&fd, &cfg.p, dim, &spots, true)?;
    check_diff_field(&fd, &cfg.phi, dim, &spots, false)?;

    let any_grid = is_grid(&cfg.rho) || is_grid(&cfg.divrhob) || cfg.b.0.iter().any(is_grid);
    if !any_grid {
        let mut samples = Vec::new();
        for x in &spots {
            let mut est = 0.0;
            let mut scale = 0.0;
            let mut noise = 0.0;
            for a in 0..3 {
                let flux = |y: &Point| cfg.rho.eval(y) * cfg.b.eval(y)[a];
                let (e, n) = fd.first(&flux, x, a);
                est += e;
                scale += e.abs();
                noise += n;
            }
            samples.push(FdSample {
                name: "divrhob".into(),
                x: *x,
                declared: cfg.divrhob.eval(x),
                estimate: est,
                scale,
                noise,
            });
        }
        judge(fd.tol, &samples)?;
    }

    Ok(ValidatedProblem {
        cfg: cfg.clone(),
        mesh: mesh.clone(),
        quad_points,
    })
}

/// Validates `cfg` on its base mesh refined `level` times.
pub fn validate_level(cfg: &ProblemConfig, level: usize) -> Result<ValidatedProblem> {
    validate_config(cfg, &base_mesh(cfg)?.refined(level))
}

/// Mesh of the coarsest configured level.
pub fn base_mesh(cfg: &ProblemConfig) -> Result<Mesh> {
    let d = &cfg.domain;
    match d.dim() {
        1 => Mesh::interval(d.x[0], d.x[1], d.cells[0]),
        _ => {
            let y = d.y.ok_or_else(|| Error::Config("rect domain needs `y`".into()))?;
            Mesh::rect(d.x, y, d.cells[0], d.cells[1])
        }
    }
}
