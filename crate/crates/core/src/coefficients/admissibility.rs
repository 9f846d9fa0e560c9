//! Sufficient conditions for weak T-coercivity of the Cowling and full forms.

use serde::{Deserialize, Serialize};

use super::config::{DomainClass, Flags, ProblemConfig};
use super::field::Point;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConditionName {
    #[serde(rename = "Thm3.5")]
    Thm35,
    #[serde(rename = "Thm3.10")]
    Thm310,
    #[serde(rename = "Thm3.11")]
    Thm311,
    #[serde(rename = "App-a")]
    AppA,
    #[serde(rename = "App-b")]
    AppB,
    #[serde(rename = "App-c")]
    AppC,
    #[serde(rename = "App-d")]
    AppD,
    #[serde(rename = "App-e")]
    AppE,
}

impl ConditionName {
    pub const ALL: [ConditionName; 8] = [
        ConditionName::Thm35,
        ConditionName::Thm310,
        ConditionName::Thm311,
        ConditionName::AppA,
        ConditionName::AppB,
        ConditionName::AppC,
        ConditionName::AppD,
        ConditionName::AppE,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConditionName::Thm35 => "Thm3.5",
            ConditionName::Thm310 => "Thm3.10",
            ConditionName::Thm311 => "Thm3.11",
            ConditionName::AppA => "App-a",
            ConditionName::AppB => "App-b",
            ConditionName::AppC => "App-c",
            ConditionName::AppD => "App-d",
            ConditionName::AppE => "App-e",
        }
    }
}

/// Everything the inequalities depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityInputs {
    pub theta: f64,
    /// Sampled `‖c⁻¹b‖∞`.
    pub mach_inf: f64,
    /// Sampled `‖b‖∞`.
    pub b_inf: f64,
    pub c_lo: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub creg: Option<f64>,
    pub flags: Flags,
    pub p_phi_constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: ConditionName,
    pub lhs: f64,
    pub threshold: f64,
    pub margin: f64,
    pub pass: bool,
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub mach_inf: f64,
    pub b_inf: f64,
    pub theta: f64,
    pub conditions: Vec<Condition>,
    pub creg_used: Option<f64>,
}

impl AdmissibilityReport {
    pub fn get(&self, name: ConditionName) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn applicable(name: ConditionName, inp: &AdmissibilityInputs) -> bool {
    let f = inp.flags;
    let regular = f.domain_class.is_regular();
    match name {
        ConditionName::Thm35 => regular && f.c_w1inf && f.rho_w1inf && inp.p_phi_constant,
        ConditionName::Thm310 | ConditionName::Thm311 => regular && f.c_w1inf && f.rho_w1inf,
        ConditionName::AppA => f.domain_class.is_convex() && inp.creg.is_some(),
        ConditionName::AppB => regular,
        ConditionName::AppC => regular && f.c_w1inf,
        ConditionName::AppD => regular && f.rho_w1inf,
        ConditionName::AppE => regular && f.c_w1inf && f.rho_w1inf,
    }
}

/// Evaluates the requested conditions. `None` selects every condition, with
/// App-a included only when `creg` is known.
pub fn evaluate_conditions(
    inp: &AdmissibilityInputs,
    requested: Option<&[ConditionName]>,
) -> Result<Vec<Condition>> {
    let names: Vec<ConditionName> = match requested {
        Some(list) => {
            if list.contains(&ConditionName::AppA) && inp.creg.is_none() {
                return Err(Error::MissingCreg);
            }
            list.to_vec()
        }
        None => ConditionName::ALL
            .into_iter()
            .filter(|&n| n != ConditionName::AppA || inp.creg.is_some())
            .collect(),
    };
    let t = inp.theta.tan();
    let amp = 1.0 + t * t;
    let m2 = inp.mach_inf * inp.mach_inf;
    let b2 = inp.b_inf * inp.b_inf;
    let c2 = inp.c_lo * inp.c_lo;
    Ok(names
        .into_iter()
        .map(|name| {
            let (lhs, threshold) = match name {
                ConditionName::Thm35 => (m2, 1.0),
                ConditionName::Thm310 | ConditionName::Thm311 => (m2, 1.0 / amp),
                ConditionName::AppA => {
                    let cr = inp.creg.unwrap_or(0.0);
                    (amp * inp.rho_hi * b2, cr * cr * c2 * inp.rho_lo)
                }
                ConditionName::AppB => (amp * inp.rho_hi * b2, c2 * inp.rho_lo),
                ConditionName::AppC => (amp * inp.rho_hi * m2, inp.rho_lo),
                ConditionName::AppD => (amp * b2, c2),
                ConditionName::AppE => (amp * m2, 1.0),
            };
            let margin = threshold - lhs;
            Condition {
                name,
                lhs,
                threshold,
                margin,
                pass: margin > 0.0,
                applicable: applicable(name, inp),
            }
        })
        .collect())
}

/// Sampled `(‖c⁻¹b‖∞, ‖b‖∞)` times the configured safety factor.
pub fn sampled_flow_norms(cfg: &ProblemConfig, points: &[Point]) -> (f64, f64) {
    let mut mach: f64 = 0.0;
    let mut bmax: f64 = 0.0;
    for x in points {
        let b = cfg.b.eval(x);
        let nb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        bmax = bmax.max(nb);
        mach = mach.max(nb / cfg.c.eval(x).abs());
    }
    let s = cfg.options.safety_factor;
    (s * mach, s * bmax)
}

pub fn check_admissibility(
    cfg: &ProblemConfig,
    theta: f64,
    creg: Option<f64>,
    points: &[Point],
    requested: Option<&[ConditionName]>,
) -> Result<AdmissibilityReport> {
    if let Some(c) = creg {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Config(format!("C_reg must lie in (0, 1], got {c}")));
        }
    }
    let (mach_inf, b_inf) = sampled_flow_norms(cfg, points);
    let inputs = AdmissibilityInputs {
        theta,
        mach_inf,
        b_inf,
        c_lo: cfg.c_bounds.lo,
        rho_lo: cfg.rho_bounds.lo,
        rho_hi: cfg.rho_bounds.hi,
        creg,
        flags: cfg.flags,
        p_phi_constant: cfg.p_phi_constant(),
    };
    Ok(AdmissibilityReport {
        mach_inf,
        b_inf,
        theta,
        conditions: evaluate_conditions(&inputs, requested)?,
        creg_used: creg,
    })
}

/// Regularity flags from a domain class with both coefficients in `W^{1,∞}`.
pub fn smooth_flags(domain_class: DomainClass) -> Flags {
    Flags {
        c_w1inf: true,
        rho_w1inf: true,
        domain_class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn inputs(theta: f64, mach: f64, b: f64) -> AdmissibilityInputs {
        AdmissibilityInputs {
            theta,
            mach_inf: mach,
            b_inf: b,
            c_lo: 1.0,
            rho_lo: 1.0,
            rho_hi: 4.0,
            creg: None,
            flags: smooth_flags(DomainClass::ConvexPiecewiseC11),
            p_phi_constant: true,
        }
    }

    fn find(list: &[Condition], name: ConditionName) -> &Condition {
        list.iter().find(|c| c.name == name).unwrap()
    }

    #[test]
    fn subsonic_without_sector() {
        let out = evaluate_conditions(&inputs(0.0, 0.9, 0.9), None).unwrap();
        let c = find(&out, ConditionName::Thm310);
        assert!((c.margin - 0.19).abs() < 1e-15);
        assert!(c.pass);
        assert!(out.iter().all(|c| c.name != ConditionName::AppA));
    }

    #[test]
    fn sector_tightens_the_bound() {
        let out = evaluate_conditions(&inputs(FRAC_PI_4, 0.6f64.sqrt(), 1.0), None).unwrap();
        let c = find(&out, ConditionName::Thm310);
        assert!((c.threshold - 0.5).abs() < 1e-15);
        assert!(!c.pass);
    }

    #[test]
    fn density_contrast_trade_off() {
        let out = evaluate_conditions(&inputs(0.0, 0.6, 0.6), None).unwrap();
        assert!((find(&out, ConditionName::AppB).margin + 0.44).abs() < 1e-15);
        assert!((find(&out, ConditionName::AppE).margin - 0.64).abs() < 1e-15);
    }

    #[test]
    fn app_a_needs_creg() {
        let inp = inputs(0.0, 0.5, 0.5);
        assert_eq!(
            evaluate_conditions(&inp, Some(&[ConditionName::AppA])),
            Err(Error::MissingCreg)
        );
        let with = AdmissibilityInputs { creg: Some(0.5), ..inp };
        let out = evaluate_conditions(&with, Some(&[ConditionName::AppA])).unwrap();
        // 0.25·1·1 − 4·0.25
        assert!((out[0].margin + 0.75).abs() < 1e-15);
        assert!(out[0].applicable);
    }

    #[test]
    fn applicability_follows_flags() {
        let mut inp = inputs(0.0, 0.5, 0.5);
        inp.flags.c_w1inf = false;
        inp.creg = Some(0.9);
        let out = evaluate_conditions(&inp, None).unwrap();
        assert!(!find(&out, ConditionName::Thm310).applicable);
        assert!(find(&out, ConditionName::AppB).applicable);
        assert!(!find(&out, ConditionName::AppC).applicable);
        assert!(find(&out, ConditionName::AppD).applicable);
        assert!(!find(&out, ConditionName::AppE).applicable);
        inp.flags.domain_class = DomainClass::C11;
        let out = evaluate_conditions(&inp, None).unwrap();
        assert!(!find(&out, ConditionName::AppA).applicable);
    }
}
