//! Command-line front end: `validate`, `trajectory`, `currents`, `compare`.
//!
//! Exit codes: 0 pass, 1 identity failure (or a failed run), 2 load error.

use crate::dynamics::{integrate, Trajectory};
use crate::linalg::Vec4;
use crate::maxwell;
use crate::sampling::{admissible_samples, Sampling};
use crate::scene::{parse_grid, Format, Scene};
use crate::validate::validate;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_LOAD: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "finsler-em",
    version,
    about = "Electromagnetism with direction-dependent potentials on pseudo-Finsler spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check every structural identity at seeded random admissible points.
    Validate {
        scene: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Also report the (expensive) continuity residual as a diagnostic.
        #[arg(long)]
        continuity: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the scene's particle and write one row per accepted step.
    Trajectory {
        scene: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Evaluate currents and div J on a grid of (x, y) points.
    Currents {
        scene: PathBuf,
        /// Eight comma-separated `min:max:count` axes for x0..x3, y0..y3.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Largest acceptable |div J|.
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Compare the scene with its isotropic truncation.
    Compare {
        scene: PathBuf,
        /// Anisotropy amplitudes to sweep, e.g. `0.1,0.2,0.3`.
        #[arg(long, value_delimiter = ',')]
        kappa_sweep: Vec<f64>,
        /// Reference direction for the truncation (default: particle y0).
        #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
        reference_y: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

/// 17 significant digits, enough to round-trip any f64.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn load(path: &Path, err: &mut dyn Write) -> Option<Scene> {
    match Scene::load(path) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            None
        }
    }
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write, err: &mut dyn Write) -> bool {
    match out {
        Some(p) => match std::fs::write(p, text) {
            Ok(()) => true,
            Err(e) => {
                let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
                false
            }
        },
        None => stdout.write_all(text.as_bytes()).is_ok(),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Validate {
            scene,
            samples,
            seed,
            tol,
            format,
            continuity,
            out,
        } => {
            let Some(scene) = load(&scene, stderr) else {
                return EXIT_LOAD;
            };
            let sampling = Sampling {
                count: samples.unwrap_or(scene.file.sampling.count),
                seed: seed.unwrap_or(scene.file.sampling.seed),
                ..scene.file.sampling
            };
            let points = admissible_samples(&scene.space, &sampling);
            let report = validate(&scene.space, &points, tol, continuity);
            let text = match format.unwrap_or(scene.file.output.format) {
                Format::Csv => report.to_csv(),
                Format::Json => json(&report),
            };
            if !emit(&text, out.as_deref(), stdout, stderr) {
                return EXIT_FAIL;
            }
            for e in &report.errors {
                let _ = writeln!(stderr, "sample error: {e}");
            }
            let failed: Vec<_> = report.identities.iter().filter(|i| !i.pass).map(|i| i.name).collect();
            let _ = writeln!(
                stderr,
                "{}: {} of {} requested samples evaluated, {} errors{}",
                if report.pass() { "PASS" } else { "FAIL" },
                report.evaluated,
                sampling.count,
                report.errors.len(),
                if failed.is_empty() {
                    String::new()
                } else {
                    format!(", failing: {}", failed.join(", "))
                }
            );
            if report.pass() {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Command::Trajectory { scene, out, format } => {
            let Some(scene) = load(&scene, stderr) else {
                return EXIT_LOAD;
            };
            let p = &scene.file.particle;
            let tr = match integrate(
                &scene.space,
                &p.x0,
                &p.y0,
                scene.file.integrate.t_end,
                scene.file.integrate.method(),
            ) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    return EXIT_FAIL;
                }
            };
            let text = match format.unwrap_or(scene.file.output.format) {
                Format::Csv => trajectory_csv(&tr),
                Format::Json => json(&tr),
            };
            let out = out.or(scene.file.output.path.clone());
            if !emit(&text, out.as_deref(), stdout, stderr) {
                return EXIT_FAIL;
            }
            let (of, oft, om) = tr.worst_monitors();
            let _ = writeln!(
                stderr,
                "{} states to t = {}; max |ortho_F| = {of:.3e}, max |ortho_Ftilde| = {oft:.3e}, max 2-form residual = {om:.3e}",
                tr.states.len(),
                tr.last().t
            );
            EXIT_PASS
        }
        Command::Currents {
            scene,
            grid,
            out,
            format,
            tol,
        } => {
            let Some(scene) = load(&scene, stderr) else {
                return EXIT_LOAD;
            };
            let points = match parse_grid(&grid) {
                Ok(p) => p,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    return EXIT_LOAD;
                }
            };
            let rows = current_rows(&scene, &points);
            let text = match format.unwrap_or(scene.file.output.format) {
                Format::Csv => currents_csv(&rows),
                Format::Json => json(&rows),
            };
            let out = out.or(scene.file.output.path.clone());
            if !emit(&text, out.as_deref(), stdout, stderr) {
                return EXIT_FAIL;
            }
            let max_div = rows.iter().filter_map(|r| r.div_j).fold(0.0f64, |m, v| m.max(v.abs()));
            let errors = rows.iter().filter(|r| r.error.is_some()).count();
            let _ = writeln!(
                stderr,
                "max |divJ| = {max_div:.3e} over {} points ({errors} flagged)",
                rows.len()
            );
            if max_div <= tol {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Command::Compare {
            scene,
            kappa_sweep,
            reference_y,
            out,
            format,
        } => {
            let Some(scene) = load(&scene, stderr) else {
                return EXIT_LOAD;
            };
            let y_ref: Vec4 = match reference_y.as_deref() {
                None => scene.file.particle.y0,
                Some([a, b, c, d]) => [*a, *b, *c, *d],
                Some(v) => {
                    let _ = writeln!(stderr, "error: --reference-y needs 4 components, got {}", v.len());
                    return EXIT_LOAD;
                }
            };
            let kappas = if kappa_sweep.is_empty() {
                vec![scene.file.space.kappa]
            } else {
                kappa_sweep
            };
            let mut rows = Vec::new();
            for kappa in kappas {
                let scene_k = match scene.with_kappa(kappa) {
                    Ok(s) => s,
                    Err(e) => {
                        let _ = writeln!(stderr, "error: kappa = {kappa}: {e}");
                        return EXIT_LOAD;
                    }
                };
                match compare(&scene_k, &y_ref) {
                    Ok(mut row) => {
                        row.kappa = kappa;
                        rows.push(row);
                    }
                    Err(e) => {
                        let _ = writeln!(stderr, "error: kappa = {kappa}: {e}");
                        return EXIT_FAIL;
                    }
                }
            }
            let text = match format.unwrap_or(scene.file.output.format) {
                Format::Csv => compare_csv(&rows),
                Format::Json => json(&rows),
            };
            if emit(&text, out.as_deref(), stdout, stderr) {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
    }
}

pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut s = String::from("t,x0,x1,x2,x3,y0,y1,y2,y3,dy0,dy1,dy2,dy3,F,ortho_F,ortho_Ftilde,omega_residual\n");
    for st in &tr.states {
        let m = &st.monitors;
        let cols: Vec<String> = std::iter::once(st.t)
            .chain(st.x)
            .chain(st.y)
            .chain(st.delta_y_dt)
            .chain([m.f_value, m.ortho_f, m.ortho_ftilde, m.omega_residual])
            .map(num)
            .collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurrentRow {
    pub x: Vec4,
    pub y: Vec4,
    pub j_h: Option<Vec4>,
    pub j_v: Option<Vec4>,
    pub zeta: Option<Vec4>,
    pub div_j: Option<f64>,
    pub error: Option<String>,
}

pub fn current_rows(scene: &Scene, points: &[(Vec4, Vec4)]) -> Vec<CurrentRow> {
    points
        .par_iter()
        .map(|(x, y)| match maxwell::current_sample(&scene.space, x, y) {
            Ok(c) => CurrentRow {
                x: *x,
                y: *y,
                j_h: Some(c.j_h),
                j_v: Some(c.j_v),
                zeta: Some(c.zeta),
                div_j: Some(c.continuity),
                error: None,
            },
            Err(e) => CurrentRow {
                x: *x,
                y: *y,
                j_h: None,
                j_v: None,
                zeta: None,
                div_j: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub fn currents_csv(rows: &[CurrentRow]) -> String {
    let mut s =
        String::from("x0,x1,x2,x3,y0,y1,y2,y3,J0,J1,J2,J3,Jv0,Jv1,Jv2,Jv3,zeta0,zeta1,zeta2,zeta3,divJ,status\n");
    let nan = [f64::NAN; 4];
    for r in rows {
        let cols: Vec<String> =
            r.x.into_iter()
                .chain(r.y)
                .chain(r.j_h.unwrap_or(nan))
                .chain(r.j_v.unwrap_or(nan))
                .chain(r.zeta.unwrap_or(nan))
                .chain([r.div_j.unwrap_or(f64::NAN)])
                .map(num)
                .collect();
        let status = match &r.error {
            None => "ok".to_string(),
            Some(e) => format!("\"error: {}\"", e.replace('"', "'")),
        };
        s.push_str(&cols.join(","));
        s.push(',');
        s.push_str(&status);
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompareRow {
    pub kappa: f64,
    /// |x_end − x_end(isotropic)|
    pub endpoint_dx: f64,
    /// |y_end − y_end(isotropic)|
    pub endpoint_dy: f64,
    /// Largest |J^i − J^i(isotropic)| over the scene's sample points.
    pub max_dj_h: f64,
    /// Largest |J̃^a − J̃^a(isotropic)|.
    pub max_dj_v: f64,
    /// Largest |ζ| of the full scene.
    pub max_zeta: f64,
}

fn dist(a: &Vec4, b: &Vec4) -> f64 {
    (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

/// Trajectory and current differences between a scene and its isotropic
/// truncation at `y_ref`.
pub fn compare(scene: &Scene, y_ref: &Vec4) -> crate::error::Result<CompareRow> {
    let iso = scene.isotropic_truncation(y_ref);
    let p = &scene.file.particle;
    let (t_end, method) = (scene.file.integrate.t_end, scene.file.integrate.method());
    let full = integrate(&scene.space, &p.x0, &p.y0, t_end, method)?;
    let trunc = integrate(&iso.space, &p.x0, &p.y0, t_end, method)?;
    let points = admissible_samples(
        &scene.space,
        &Sampling {
            count: scene.file.sampling.count.min(20),
            ..scene.file.sampling
        },
    );
    let deltas: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|(x, y)| -> crate::error::Result<(f64, f64, f64)> {
            let a = maxwell::currents(&scene.space, x, y)?;
            let b = maxwell::currents(&iso.space, x, y)?;
            let d = |u: &Vec4, v: &Vec4| (0..4).map(|i| (u[i] - v[i]).abs()).fold(0.0, f64::max);
            Ok((
                d(&a.j_h, &b.j_h),
                d(&a.j_v, &b.j_v),
                crate::linalg::max_abs_vec(&a.zeta),
            ))
        })
        .collect::<crate::error::Result<_>>()?;
    let fold = |f: fn(&(f64, f64, f64)) -> f64| deltas.iter().map(f).fold(0.0, f64::max);
    Ok(CompareRow {
        kappa: scene.file.space.kappa,
        endpoint_dx: dist(&full.last().x, &trunc.last().x),
        endpoint_dy: dist(&full.last().y, &trunc.last().y),
        max_dj_h: fold(|d| d.0),
        max_dj_v: fold(|d| d.1),
        max_zeta: fold(|d| d.2),
    })
}

pub fn compare_csv(rows: &[CompareRow]) -> String {
    let mut s = String::from("kappa,endpoint_dx,endpoint_dy,max_dJ,max_dJv,max_zeta\n");
    for r in rows {
        let cols: Vec<String> = [
            r.kappa,
            r.endpoint_dx,
            r.endpoint_dy,
            r.max_dj_h,
            r.max_dj_v,
            r.max_zeta,
        ]
        .into_iter()
        .map(num)
        .collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s
}
