//! TOML problem description (strict schema) and its resolved form.

use serde::{Deserialize, Serialize};

use super::field::{DiffField, GridSamples, ScalarField, VectorField};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

/// A coefficient entry: a number, an expression string or a sample grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Text(String),
    Grid { grid: GridSamples },
}

impl FieldSpec {
    pub fn to_field(&self) -> Result<ScalarField> {
        match self {
            FieldSpec::Number(v) => Ok(ScalarField::constant(*v)),
            FieldSpec::Text(s) => ScalarField::parse(s),
            FieldSpec::Grid { grid } => ScalarField::grid(grid.clone()),
        }
    }

    fn is_grid(&self) -> bool {
        matches!(self, FieldSpec::Grid { .. })
    }
}

impl From<f64> for FieldSpec {
    fn from(v: f64) -> Self {
        FieldSpec::Number(v)
    }
}

impl From<&str> for FieldSpec {
    fn from(s: &str) -> Self {
        FieldSpec::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub omega: f64,
    #[serde(default)]
    pub angvel: [f64; 3],
    #[serde(rename = "G", default = "default_g")]
    pub grav_const: f64,
}

fn default_g() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub rho: [f64; 2],
    pub c: [f64; 2],
    pub gamma: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    pub rho: Option<FieldSpec>,
    pub c: Option<FieldSpec>,
    pub gamma: Option<FieldSpec>,
    pub p: Option<FieldSpec>,
    pub phi: Option<FieldSpec>,
    pub b: Option<Vec<FieldSpec>>,
    pub divrhob: Option<FieldSpec>,
    pub p_x: Option<FieldSpec>,
    pub p_y: Option<FieldSpec>,
    pub p_z: Option<FieldSpec>,
    pub p_xx: Option<FieldSpec>,
    pub p_xy: Option<FieldSpec>,
    pub p_xz: Option<FieldSpec>,
    pub p_yy: Option<FieldSpec>,
    pub p_yz: Option<FieldSpec>,
    pub p_zz: Option<FieldSpec>,
    pub phi_xx: Option<FieldSpec>,
    pub phi_xy: Option<FieldSpec>,
    pub phi_xz: Option<FieldSpec>,
    pub phi_yy: Option<FieldSpec>,
    pub phi_yz: Option<FieldSpec>,
    pub phi_zz: Option<FieldSpec>,
    pub bounds: Option<Bounds>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: DomainKind,
    pub x: [f64; 2],
    pub y: Option<[f64; 2]>,
    /// Cell counts of the coarsest level, one per axis.
    pub cells: Vec<usize>,
}

impl DomainSection {
    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval => 1,
            DomainKind::Rect => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_degree() -> usize {
    1
}
fn default_levels() -> usize {
    3
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        DiscretizationSection {
            degree: default_degree(),
            levels: default_levels(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainClass {
    #[serde(rename = "convex")]
    Convex,
    #[serde(rename = "convex-piecewise-c11")]
    ConvexPiecewiseC11,
    #[serde(rename = "c11")]
    C11,
    #[serde(rename = "lipschitz")]
    Lipschitz,
}

impl DomainClass {
    pub fn is_convex(self) -> bool {
        matches!(self, DomainClass::Convex | DomainClass::ConvexPiecewiseC11)
    }

    /// `C^{1,1}`, or convex and piecewise `C^{1,1}`.
    pub fn is_regular(self) -> bool {
        matches!(self, DomainClass::C11 | DomainClass::ConvexPiecewiseC11)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[serde(default = "yes")]
    pub c_w1inf: bool,
    #[serde(default = "yes")]
    pub rho_w1inf: bool,
    #[serde(default = "default_class")]
    pub domain_class: DomainClass,
}

fn yes() -> bool {
    true
}
fn default_class() -> DomainClass {
    DomainClass::ConvexPiecewiseC11
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            c_w1inf: true,
            rho_w1inf: true,
            domain_class: default_class(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSection {
    /// Multiplier applied to sampled sup-norms.
    #[serde(default = "one")]
    pub safety_factor: f64,
    #[serde(default = "fd_default")]
    pub fd_step: f64,
    #[serde(default = "fd_default")]
    pub fd_tol: f64,
    /// Whitened singular values below this count as near-kernel.
    #[serde(default = "kernel_default")]
    pub kernel_threshold: f64,
    /// Rotation grid of the sector-angle computation.
    #[serde(default = "angles_default")]
    pub sector_angles: usize,
}

fn one() -> f64 {
    1.0
}
fn fd_default() -> f64 {
    1e-5
}
fn kernel_default() -> f64 {
    1e-6
}
fn angles_default() -> usize {
    super::numrange::DEFAULT_ANGLES
}

impl Default for OptionsSection {
    fn default() -> Self {
        OptionsSection {
            safety_factor: 1.0,
            fd_step: 1e-5,
            fd_tol: 1e-5,
            kernel_threshold: 1e-6,
            sector_angles: angles_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// Volume force `f` of the variational equation.
    pub f: Option<Vec<FieldSpec>>,
    /// Exact displacement used by manufactured-solution studies.
    pub exact: Option<Vec<FieldSpec>>,
}

/// The configuration file exactly as written (plus defaults).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: ProblemSection,
    pub fields: FieldsSection,
    pub domain: DomainSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub options: OptionsSection,
    #[serde(default)]
    pub source: SourceSection,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Canonical JSON of the resolved configuration, used for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxBound {
    pub lo: f64,
    pub hi: f64,
}

/// Parsed coefficient fields, ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub omega: f64,
    pub angvel: [f64; 3],
    pub grav_const: f64,
    pub rho: ScalarField,
    pub c: ScalarField,
    pub gamma: ScalarField,
    pub rho_bounds: BoxBound,
    pub c_bounds: BoxBound,
    pub gamma_bounds: BoxBound,
    pub p: DiffField,
    pub phi: DiffField,
    pub b: VectorField,
    pub divrhob: ScalarField,
    pub domain: DomainSection,
    pub degree: usize,
    pub levels: usize,
    pub flags: Flags,
    pub options: OptionsSection,
    pub force: Option<VectorField>,
    pub exact: Option<VectorField>,
    /// True when some coefficient is grid-sampled (finite-difference
    /// consistency checks are skipped for those).
    pub has_grid_fields: bool,
    pub file: ConfigFile,
}

fn required(spec: &Option<FieldSpec>, name: &str) -> Result<ScalarField> {
    spec.as_ref()
        .ok_or_else(|| Error::Config(format!("missing field `{name}`")))?
        .to_field()
}

fn optional(spec: &Option<FieldSpec>, default: f64) -> Result<ScalarField> {
    spec.as_ref().map_or(Ok(ScalarField::constant(default)), FieldSpec::to_field)
}

fn vector(specs: &[FieldSpec], what: &str) -> Result<VectorField> {
    if specs.is_empty() || specs.len() > 3 {
        return Err(Error::Config(format!(
            "`{what}` needs 1 to 3 components, got {}",
            specs.len()
        )));
    }
    let mut out = VectorField::zero();
    for (slot, spec) in out.0.iter_mut().zip(specs) {
        *slot = spec.to_field()?;
    }
    Ok(out)
}

fn bound(pair: [f64; 2], name: &str) -> Result<BoxBound> {
    let [lo, hi] = pair;
    if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
        return Err(Error::Config(format!(
            "bounds for `{name}` must satisfy 0 < lo <= hi < inf, got [{lo}, {hi}]"
        )));
    }
    Ok(BoxBound { lo, hi })
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_file(ConfigFile::from_toml(text)?)
    }

    pub fn from_file(file: ConfigFile) -> Result<Self> {
        let f = &file.fields;
        let bounds = f
            .bounds
            .as_ref()
            .ok_or_else(|| Error::Config("missing table `fields.bounds`".into()))?;

        let mut p = DiffField::new("p", optional(&f.p, 0.0)?);
        for (axis, spec) in [&f.p_x, &f.p_y, &f.p_z].into_iter().enumerate() {
            if let Some(s) = spec {
                p = p.with_grad(axis, s.to_field()?);
            }
        }
        let hess_keys = |xx, xy, xz, yy, yz, zz| [(0, 0, xx), (0, 1, xy), (0, 2, xz), (1, 1, yy), (1, 2, yz), (2, 2, zz)];
        for (i, j, spec) in hess_keys(&f.p_xx, &f.p_xy, &f.p_xz, &f.p_yy, &f.p_yz, &f.p_zz) {
            if let Some(s) = spec {
                p = p.with_hess(i, j, s.to_field()?);
            }
        }
        let mut phi = DiffField::new("phi", optional(&f.phi, 0.0)?);
        for (i, j, spec) in hess_keys(&f.phi_xx, &f.phi_xy, &f.phi_xz, &f.phi_yy, &f.phi_yz, &f.phi_zz) {
            if let Some(s) = spec {
                phi = phi.with_hess(i, j, s.to_field()?);
            }
        }
        let b = match &f.b {
            Some(specs) => vector(specs, "b")?,
            None => VectorField::zero(),
        };
        let divrhob = match &f.divrhob {
            Some(s) => s.to_field()?,
            None if b.is_zero() => ScalarField::constant(0.0),
            None => {
                return Err(Error::MissingDerivative {
                    field: "b".into(),
                    derivative: "divrhob".into(),
                })
            }
        };

        let d = &file.domain;
        match d.kind {
            DomainKind::Interval if d.cells.len() != 1 || d.y.is_some() => {
                return Err(Error::Config("interval domain takes `x` and one cell count".into()))
            }
            DomainKind::Rect if d.cells.len() != 2 || d.y.is_none() => {
                return Err(Error::Config("rect domain takes `x`, `y` and two cell counts".into()))
            }
            _ => {}
        }
        let o = &file.options;
        if !(o.safety_factor >= 1.0) || !(o.fd_step > 0.0) || !(o.fd_tol > 0.0) || !(o.kernel_threshold > 0.0) {
            return Err(Error::Config(
                "options need safety_factor >= 1 and positive fd_step, fd_tol, kernel_threshold".into(),
            ));
        }
        if !(file.problem.grav_const > 0.0) {
            return Err(Error::Config("G must be positive".into()));
        }

        let all_specs = [&f.rho, &f.c, &f.gamma, &f.p, &f.phi, &f.divrhob];
        let has_grid_fields = all_specs.iter().any(|s| s.as_ref().is_some_and(FieldSpec::is_grid))
            || f.b.iter().flatten().any(FieldSpec::is_grid);

        Ok(ProblemConfig {
            omega: file.problem.omega,
            angvel: file.problem.angvel,
            grav_const: file.problem.grav_const,
            rho: required(&f.rho, "rho")?,
            c: required(&f.c, "c")?,
            gamma: required(&f.gamma, "gamma")?,
            rho_bounds: bound(bounds.rho, "rho")?,
            c_bounds: bound(bounds.c, "c")?,
            gamma_bounds: bound(bounds.gamma, "gamma")?,
            p,
            phi,
            b,
            divrhob,
            domain: d.clone(),
            degree: file.discretization.degree,
            levels: file.discretization.levels,
            flags: file.flags,
            options: file.options.clone(),
            force: file.source.f.as_deref().map(|s| vector(s, "source.f")).transpose()?,
            exact: file.source.exact.as_deref().map(|s| vector(s, "source.exact")).transpose()?,
            has_grid_fields,
            file,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `p` and `φ` provably constant.
    pub fn p_phi_constant(&self) -> bool {
        self.p.is_constant() && self.phi.is_constant()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[problem]
omega = 2.0
angvel = [0.0, 0.0, 1.0]

[fields]
rho = 1.0
c = "1 + 0.1*x"
gamma = 0.5
p = "exp(-x^2)"
p_x = "-2*x*exp(-x^2)"
p_xx = "(4*x^2 - 2)*exp(-x^2)"
b = ["0.3*(1 - x^2)"]
divrhob = "-0.6*x"

[fields.bounds]
rho = [0.5, 2.0]
c = [0.8, 1.2]
gamma = [0.1, 1.0]

[domain]
kind = "interval"
x = [-1.0, 1.0]
cells = [8]
"#;

    #[test]
    fn parses_and_fills_defaults() {
        let cfg = ProblemConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.omega, 2.0);
        assert_eq!(cfg.grav_const, 1.0);
        assert_eq!(cfg.degree, 1);
        assert_eq!(cfg.levels, 3);
        assert_eq!(cfg.flags.domain_class, DomainClass::ConvexPiecewiseC11);
        assert!(cfg.phi.is_constant());
        assert!(!cfg.p.is_constant());
        assert!((cfg.c.eval(&[1.0, 0.0, 0.0]) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = BASIC.replace("p_xx", "p_xxx");
        assert!(matches!(ProblemConfig::from_toml(&typo), Err(Error::Config(_))));
        let section = format!("{BASIC}\n[extra]\nfoo = 1\n");
        assert!(matches!(ProblemConfig::from_toml(&section), Err(Error::Config(_))));
    }

    #[test]
    fn flow_needs_divergence_field() {
        let text = BASIC.replace("divrhob = \"-0.6*x\"", "");
        assert!(matches!(
            ProblemConfig::from_toml(&text),
            Err(Error::MissingDerivative { .. })
        ));
    }

    #[test]
    fn bad_bounds() {
        let text = BASIC.replace("gamma = [0.1, 1.0]", "gamma = [0.0, 1.0]");
        assert!(ProblemConfig::from_toml(&text).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let file = ConfigFile::from_toml(BASIC).unwrap();
        let again = ConfigFile::from_toml(&file.to_toml()).unwrap();
        assert_eq!(file, again);
    }
}
