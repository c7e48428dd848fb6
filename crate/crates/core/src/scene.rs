//! Scene files: a TOML description of a space, a test particle, an
//! integration recipe, a sampling box and output preferences.

use crate::dynamics::Method;
use crate::error::Error;
use crate::expr::{point, Expr, ParseError, ScalarField, Var};
use crate::geometry::{self, Signature, SpaceDef};
use crate::linalg::Vec4;
use crate::sampling::{self, Sampling};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Relative tolerance for the load-time homogeneity check.
pub const HOMOGENEITY_TOL: f64 = 1e-10;
const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 3.7];
const HOMOGENEITY_POINTS: usize = 16;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("in [space] {field}: {source}")]
    Expression { field: &'static str, source: ParseError },
    #[error("{field} is not 1-homogeneous in y: residual {residual:.3e} (apparent degree {degree:.3})")]
    HomogeneityViolation {
        field: &'static str,
        residual: f64,
        degree: f64,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Space(#[from] Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    #[serde(rename = "F")]
    pub finsler: String,
    #[serde(rename = "L1", default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    /// Anisotropic part of L₁, scaled by `kappa`.
    #[serde(rename = "L1_aniso", default, skip_serializing_if = "Option::is_none")]
    pub potential_aniso: Option<String>,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub q: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(rename = "H", default = "one")]
    pub unit_scale: f64,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "lorentz")]
    pub signature: String,
}

fn one() -> f64 {
    1.0
}

fn lorentz() -> String {
    Signature::LORENTZ.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Particle {
    pub x0: Vec4,
    pub y0: Vec4,
}

impl Default for Particle {
    fn default() -> Self {
        Particle {
            x0: [0.0; 4],
            y0: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrate {
    pub method: MethodName,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_abs_tol")]
    pub abs_tol: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_abs_tol() -> f64 {
    1e-9
}
fn default_rel_tol() -> f64 {
    1e-8
}

impl Default for Integrate {
    fn default() -> Self {
        Integrate {
            method: MethodName::Rk4,
            dt: default_dt(),
            t_end: 1.0,
            abs_tol: default_abs_tol(),
            rel_tol: default_rel_tol(),
        }
    }
}

impl Integrate {
    pub fn method(&self) -> Method {
        match self.method {
            MethodName::Rk4 => Method::Rk4Fixed { dt: self.dt },
            MethodName::Rk45 => Method::Rk45Adaptive {
                abs_tol: self.abs_tol,
                rel_tol: self.rel_tol,
                initial_dt: self.dt,
                max_rejections: 50,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

/// The on-disk form of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub space: SpaceSection,
    #[serde(default)]
    pub particle: Particle,
    #[serde(default)]
    pub integrate: Integrate,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub output: Output,
}

/// A loaded, checked scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub file: SceneFile,
    pub space: SpaceDef,
}

fn line_column(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn field(name: &'static str, src: &str) -> Result<ScalarField, SceneError> {
    ScalarField::parse(src).map_err(|source| SceneError::Expression { field: name, source })
}

impl Scene {
    pub fn load(path: &Path) -> Result<Scene, SceneError> {
        let src = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Scene::parse(&src)
    }

    pub fn parse(src: &str) -> Result<Scene, SceneError> {
        let file: SceneFile = toml::from_str(src).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(src, s.start));
            SceneError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        Scene::from_file(file)
    }

    /// Build and check the space: expressions parse, F and L₁ are
    /// 1-homogeneous in y, and the metric has the declared signature.
    pub fn from_file(file: SceneFile) -> Result<Scene, SceneError> {
        let s = &file.space;
        let finsler = field("F", &s.finsler)?;
        let base = match &s.potential {
            Some(src) => Some(field("L1", src)?),
            None => None,
        };
        let aniso = match &s.potential_aniso {
            Some(src) => Some(field("L1_aniso", src)?),
            None => None,
        };
        let potential = combine(base.as_ref(), aniso.as_ref(), s.kappa);
        let signature: Signature = s.signature.parse().map_err(|e| SceneError::Invalid(format!("{e}")))?;
        if !(s.c > 0.0 && s.unit_scale > 0.0) {
            return Err(SceneError::Invalid("c and H must be positive".into()));
        }
        if s.coupling == 0.0 {
            return Err(SceneError::Invalid("coupling must be nonzero".into()));
        }
        let declared = SpaceDef {
            finsler,
            potential,
            charge: s.q,
            light_speed: s.c,
            unit_scale: s.unit_scale,
            coupling: s.coupling,
            signature,
        };
        let space = declared.in_fibre_units();
        check_homogeneity(&space, &file.sampling)?;
        check_signature(&space, &file)?;
        Ok(Scene { file, space })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("scene serializes")
    }

    /// The same scene with the anisotropy amplitude replaced.
    pub fn with_kappa(&self, kappa: f64) -> Result<Scene, SceneError> {
        let mut file = self.file.clone();
        file.space.kappa = kappa;
        Scene::from_file(file)
    }

    /// L₁ replaced by its isotropic truncation A_i(x, y_ref) y^i.
    pub fn isotropic_truncation(&self, y_ref: &Vec4) -> Scene {
        let l1 = &self.space.potential;
        let terms: Vec<Expr> = (0..4)
            .map(|i| {
                let a = l1.derivative(Var::y(i));
                let frozen = a.substitute(&|v: Var| v.is_direction().then(|| Expr::num(y_ref[v.slot() - 4])));
                Expr::mul(frozen.expr().clone(), Expr::var(Var::y(i)))
            })
            .collect();
        let potential = ScalarField::from_expr(terms.into_iter().reduce(Expr::add).expect("four terms"));
        Scene {
            file: self.file.clone(),
            space: self.space.clone().with_potential(potential),
        }
    }
}

fn combine(base: Option<&ScalarField>, aniso: Option<&ScalarField>, kappa: f64) -> ScalarField {
    match (base, aniso) {
        (None, None) => ScalarField::zero(),
        (Some(b), None) => b.clone(),
        (None, Some(a)) => ScalarField::from_expr(Expr::mul(Expr::num(kappa), a.expr().clone())),
        (Some(b), Some(a)) => ScalarField::from_expr(Expr::add(
            b.expr().clone(),
            Expr::mul(Expr::num(kappa), a.expr().clone()),
        )),
    }
}

fn check_homogeneity(space: &SpaceDef, sampling: &Sampling) -> Result<(), SceneError> {
    let fields = [("F", &space.finsler), ("L1", &space.potential)];
    let samples = sampling::raw_samples(sampling, HOMOGENEITY_POINTS);
    for (name, f) in fields {
        for (x, y) in &samples {
            let p = point(x, y);
            let Ok(v) = f.eval(&p) else { continue };
            for lambda in HOMOGENEITY_SCALES {
                let Ok(residual) = f.check_homogeneity(1.0, &p, lambda) else {
                    continue;
                };
                let Ok(scaled) = f.eval(&point(x, &y.map(|c| c * lambda))) else {
                    continue;
                };
                if residual > HOMOGENEITY_TOL * scaled.abs().max(v.abs()).max(1.0) {
                    let degree = if v != 0.0 && scaled / v > 0.0 {
                        (scaled / v).ln() / lambda.ln()
                    } else {
                        f64::NAN
                    };
                    return Err(SceneError::HomogeneityViolation {
                        field: name,
                        residual,
                        degree,
                    });
                }
            }
        }
    }
    Ok(())
}

fn check_signature(space: &SpaceDef, file: &SceneFile) -> Result<(), SceneError> {
    let mut probes = sampling::admissible_samples(
        space,
        &Sampling {
            count: 4,
            ..file.sampling
        },
    );
    probes.push((file.particle.x0, file.particle.y0));
    for (x, y) in probes {
        if !sampling::is_admissible(space, &x, &y) {
            continue;
        }
        match geometry::metric(space, &x, &y) {
            Err(e @ Error::SignatureMismatch { .. }) => return Err(e.into()),
            _ => continue,
        }
    }
    Ok(())
}

/// Parse one `min:max:count` axis of a grid specification.
pub fn parse_axis(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || format!("grid axis `{spec}` is not min:max:count");
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 {
        return Err(bad());
    }
    Ok(if n == 1 {
        vec![lo]
    } else {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    })
}

/// Parse a grid of eight comma-separated axes (x0..x3, y0..y3) into points,
/// in row-major order with y3 varying fastest.
pub fn parse_grid(spec: &str) -> Result<Vec<(Vec4, Vec4)>, String> {
    let axes = spec.split(',').map(parse_axis).collect::<Result<Vec<_>, _>>()?;
    if axes.len() != 8 {
        return Err(format!("grid needs 8 axes (x0..x3, y0..y3), got {}", axes.len()));
    }
    let mut points: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in &axes {
        points = points
            .iter()
            .flat_map(|p| {
                axis.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    Ok(points
        .iter()
        .map(|p| (std::array::from_fn(|i| p[i]), std::array::from_fn(|i| p[4 + i])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[space]
F = "sqrt(y0^2 - y1^2 - y2^2 - y3^2)"
L1 = "0.1*x1*y0"
"#;

    #[test]
    fn defaults_and_round_trip() {
        let s = Scene::parse(BASIC).unwrap();
        assert_eq!(s.space.charge, 1.0);
        assert_eq!(s.space.signature, Signature::LORENTZ);
        let again = Scene::parse(&s.to_toml()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn missing_potential_is_zero() {
        let s = Scene::parse("[space]\nF = \"sqrt(y0^2 - y1^2 - y2^2 - y3^2)\"\n").unwrap();
        assert!(s.space.potential.is_zero());
    }

    #[test]
    fn wrong_degree_is_rejected() {
        let src = "[space]\nF = \"sqrt(y0^2 - y1^2 - y2^2 - y3^2)\"\nL1 = \"x1*y0^2\"\n";
        match Scene::parse(src).unwrap_err() {
            SceneError::HomogeneityViolation { field, degree, .. } => {
                assert_eq!(field, "L1");
                assert!((degree - 2.0).abs() < 1e-9);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn parse_errors_have_positions() {
        match Scene::parse("[space]\nF = \"y0\"\nq = oops\n").unwrap_err() {
            SceneError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            Scene::parse("[space]\nF = \"sqrt(y0^2 - \"\n").unwrap_err(),
            SceneError::Expression { field: "F", .. }
        ));
    }

    #[test]
    fn signature_mismatch_at_load() {
        let src = format!("{BASIC}signature = \"++--\"\n");
        assert!(matches!(
            Scene::parse(&src).unwrap_err(),
            SceneError::Space(Error::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn kappa_and_truncation() {
        let src = r#"
[space]
F = "sqrt(y0^2 - y1^2 - y2^2 - y3^2)"
L1 = "0.1*x1*y0"
L1_aniso = "cos(x0)*y1^2/sqrt(y0^2 - y1^2 - y2^2 - y3^2)"
kappa = 0.3
"#;
        let s = Scene::parse(src).unwrap();
        let p = point(&[0.0; 4], &[1.0, 0.2, 0.0, 0.0]);
        let want = 0.3 * 0.04 / 0.96f64.sqrt();
        assert!((s.space.potential.eval(&p).unwrap() - want).abs() < 1e-14);
        let iso = s.isotropic_truncation(&[1.0, 0.2, 0.0, 0.0]);
        // the truncation agrees with L₁ at the reference direction
        assert!((iso.space.potential.eval(&p).unwrap() - want).abs() < 1e-14);
        assert!(!iso.space.potential.derivative(Var::y(1)).depends_on_direction());
        assert_eq!(s.with_kappa(0.0).unwrap().space.potential.eval(&p).unwrap(), 0.0);
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:2,0:0:1,0:0:1,0:0:1,1:1:1,0:0.2:3,0:0:1,0:0:1").unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], ([0.0; 4], [1.0, 0.0, 0.0, 0.0]));
        assert_eq!(g[1], ([0.0; 4], [1.0, 0.1, 0.0, 0.0]));
        assert_eq!(g[5], ([1.0, 0.0, 0.0, 0.0], [1.0, 0.2, 0.0, 0.0]));
        assert!(parse_grid("0:1:2").is_err());
        assert!(parse_axis("0:1").is_err());
    }
}
