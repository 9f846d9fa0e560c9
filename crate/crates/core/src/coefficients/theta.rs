use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ProblemConfig;
use super::field::Point;
use super::numrange::{lambda_min_hermitian_part, sector_angle_with};
use super::pointwise::compute_matkl;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub theta: f64,
    pub worst_point: Point,
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_point_angles: Option<Vec<f64>>,
}

/// Excess of the sector angle of `M(x)` over `π/2`, clamped at zero.
///
/// When the Hermitian part of `M(x)` is positive semidefinite the numerical
/// range lies in the closed right half plane and the excess is exactly zero.
pub fn point_excess(cfg: &ProblemConfig, x: &Point) -> Result<f64> {
    let m = compute_matkl(cfg, x)?;
    if lambda_min_hermitian_part(&m) >= 0.0 {
        return Ok(0.0);
    }
    Ok((sector_angle_with(&m, cfg.options.sector_angles) - FRAC_PI_2).max(0.0))
}

pub fn compute_theta(cfg: &ProblemConfig, points: &[Point], keep_table: bool) -> Result<SectorReport> {
    if points.is_empty() {
        return Err(Error::PreconditionViolated("no sample points for theta".into()));
    }
    cfg.p.check_grad()?;
    cfg.p.check_hess()?;
    cfg.phi.check_hess()?;
    let angles: Vec<f64> = points
        .par_iter()
        .map(|x| point_excess(cfg, x))
        .collect::<Result<_>>()?;
    // first index attaining the maximum, independent of scheduling
    let mut worst = 0;
    for (i, &a) in angles.iter().enumerate() {
        if a > angles[worst] {
            worst = i;
        }
    }
    Ok(SectorReport {
        theta: angles[worst],
        worst_point: points[worst],
        samples: points.len(),
        per_point_angles: keep_table.then_some(angles),
    })
}
