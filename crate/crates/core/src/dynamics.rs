//! Charged-particle worldlines under the Finslerian Lorentz force.

use crate::em::{EmSample, EmTower};
use crate::error::{Error, Result};
use crate::geometry::{SpaceDef, Tower};
use crate::linalg::{self, Vec4, IDENTITY};
use serde::{Deserialize, Serialize};

pub const FORCE_DET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Monitors {
    pub f_value: f64,
    /// g_ij F^i y^j with F^i = F^i_h y^h
    pub ortho_f: f64,
    /// g_ij F̃^i y^j with F̃^i = F̃^i_a δy^a/dt
    pub ortho_ftilde: f64,
    /// max_i |ω_ij y^j + ω̃_ia δy^a/dt|
    pub omega_residual: f64,
}

/// Force evaluation at one phase-space point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Force {
    /// δy/dt
    pub delta_y_dt: Vec4,
    /// dy/dt = δy/dt − 2G
    pub coord_accel: Vec4,
    pub monitors: Monitors,
}

pub fn force(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Force> {
    let geo = Tower::build(space, x, y, 0)?;
    let em = EmTower::build(space, &geo)?;
    let s = EmSample::from_towers(space, &geo, &em);
    let g = linalg::values(&geo.g);
    let qc = space.charge_ratio();

    // (I − (q/c) F̃^i_a) a = (q/c) F^i_h y^h
    let lorentz = linalg::mat_vec(&s.f_mixed, y);
    let m: linalg::Mat4 = std::array::from_fn(|i| std::array::from_fn(|a| IDENTITY[i][a] - qc * s.f_hv_mixed[i][a]));
    let rhs = lorentz.map(|v| qc * v);
    let (a, _) = linalg::solve(&m, &rhs, FORCE_DET_FLOOR).ok_or(Error::SingularForceMatrix { det: linalg::det(&m) })?;

    let correction = linalg::mat_vec(&s.f_hv_mixed, &a);
    let gy = linalg::mat_vec(&g, y);
    let residual = (0..4)
        .map(|i| {
            let hh: f64 = (0..4).map(|j| s.omega_hh[i][j] * y[j]).sum();
            let hv: f64 = (0..4).map(|b| s.omega_hv[i][b] * a[b]).sum();
            (hh + hv).abs()
        })
        .fold(0.0, f64::max);
    let spray = linalg::vec_values(&geo.spray);
    Ok(Force {
        delta_y_dt: a,
        coord_accel: std::array::from_fn(|i| a[i] - 2.0 * spray[i]),
        monitors: Monitors {
            f_value: geo.f.value(),
            ortho_f: linalg::dot(&lorentz, &gy),
            ortho_ftilde: linalg::dot(&correction, &gy),
            omega_residual: residual,
        },
    })
}

/// δy/dt from the implicit force law.
pub fn lorentz_acceleration(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Vec4> {
    Ok(force(space, x, y)?.delta_y_dt)
}

/// Rescale `y` so that F(x, y) = 1.
pub fn unit_speed(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Vec4> {
    let f = space.finsler.eval(&crate::expr::point(x, y))?;
    if !(f > 0.0) {
        return Err(Error::Domain(crate::expr::DomainError {
            subexpr: space.finsler.to_string(),
            reason: format!("F = {f} is not positive; cannot normalise"),
        }));
    }
    Ok(y.map(|v| v / f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum Method {
    Rk4Fixed {
        dt: f64,
    },
    Rk45Adaptive {
        abs_tol: f64,
        rel_tol: f64,
        initial_dt: f64,
        max_rejections: usize,
    },
}

impl Method {
    pub fn rk45() -> Method {
        Method::Rk45Adaptive {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            initial_dt: 1e-2,
            max_rejections: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryState {
    pub t: f64,
    pub x: Vec4,
    pub y: Vec4,
    pub delta_y_dt: Vec4,
    pub monitors: Monitors,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub method: Method,
    pub states: Vec<TrajectoryState>,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryState {
        self.states.last().expect("trajectory has an initial state")
    }

    /// Largest |ortho_F|, |ortho_F̃| and ω residual over all states.
    pub fn worst_monitors(&self) -> (f64, f64, f64) {
        self.states.iter().fold((0.0, 0.0, 0.0), |(a, b, c), s| {
            (
                a.max(s.monitors.ortho_f.abs()),
                b.max(s.monitors.ortho_ftilde.abs()),
                c.max(s.monitors.omega_residual),
            )
        })
    }
}

type State = [f64; 8];

fn split(s: &State) -> (Vec4, Vec4) {
    (std::array::from_fn(|i| s[i]), std::array::from_fn(|i| s[4 + i]))
}

fn rhs(space: &SpaceDef, t: f64, s: &State) -> Result<(State, Force)> {
    let (x, y) = split(s);
    let f = force(space, &x, &y).map_err(|e| Error::Integration { t, source: Box::new(e) })?;
    Ok((
        std::array::from_fn(|i| if i < 4 { y[i] } else { f.coord_accel[i - 4] }),
        f,
    ))
}

fn axpy(s: &State, h: f64, terms: &[(f64, &State)]) -> State {
    std::array::from_fn(|i| s[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

fn record(t: f64, s: &State, f: &Force) -> TrajectoryState {
    let (x, y) = split(s);
    TrajectoryState {
        t,
        x,
        y,
        delta_y_dt: f.delta_y_dt,
        monitors: f.monitors,
    }
}

pub fn integrate(space: &SpaceDef, x0: &Vec4, y0: &Vec4, t_end: f64, method: Method) -> Result<Trajectory> {
    let s0: State = std::array::from_fn(|i| if i < 4 { x0[i] } else { y0[i - 4] });
    let states = match method {
        Method::Rk4Fixed { dt } => rk4(space, s0, t_end, dt)?,
        Method::Rk45Adaptive {
            abs_tol,
            rel_tol,
            initial_dt,
            max_rejections,
        } => dopri5(space, s0, t_end, abs_tol, rel_tol, initial_dt, max_rejections)?,
    };
    Ok(Trajectory { method, states })
}

fn rk4(space: &SpaceDef, s0: State, t_end: f64, dt: f64) -> Result<Vec<TrajectoryState>> {
    assert!(dt > 0.0, "step must be positive");
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let (mut k1, mut f) = rhs(space, 0.0, &s0)?;
    let mut s = s0;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(record(0.0, &s, &f));
    for n in 0..steps {
        let t = n as f64 * dt;
        let t_next = ((n + 1) as f64 * dt).min(t_end);
        let h = t_next - t;
        let (k2, _) = rhs(space, t + 0.5 * h, &axpy(&s, 0.5 * h, &[(1.0, &k1)]))?;
        let (k3, _) = rhs(space, t + 0.5 * h, &axpy(&s, 0.5 * h, &[(1.0, &k2)]))?;
        let (k4, _) = rhs(space, t + h, &axpy(&s, h, &[(1.0, &k3)]))?;
        s = axpy(&s, h / 6.0, &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)]);
        (k1, f) = rhs(space, t_next, &s)?;
        out.push(record(t_next, &s, &f));
    }
    Ok(out)
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [&[f64]; 7] = [
    &[],
    &[1.0 / 5.0],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
    ],
    &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B_LOW: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri5(
    space: &SpaceDef,
    s0: State,
    t_end: f64,
    abs_tol: f64,
    rel_tol: f64,
    initial_dt: f64,
    max_rejections: usize,
) -> Result<Vec<TrajectoryState>> {
    let (mut k_first, f0) = rhs(space, 0.0, &s0)?;
    let mut out = vec![record(0.0, &s0, &f0)];
    let (mut t, mut s, mut h) = (0.0, s0, initial_dt.min(t_end));
    let mut rejections = 0;
    while t < t_end {
        h = h.min(t_end - t);
        let mut k: Vec<State> = vec![k_first];
        let mut last_force = f0;
        let mut failed = None;
        for stage in 1..7 {
            let terms: Vec<(f64, &State)> = A[stage].iter().zip(&k).map(|(c, kk)| (*c, kk)).collect();
            match rhs(space, t + C[stage] * h, &axpy(&s, h, &terms)) {
                Ok((ks, f)) => {
                    k.push(ks);
                    last_force = f;
                }
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        let err = match failed {
            // a stage left the domain: treat as a rejected step
            Some(e) => {
                rejections += 1;
                if rejections > max_rejections {
                    return Err(e);
                }
                f64::INFINITY
            }
            None => {
                let s7 = axpy(&s, h, &A[6].iter().zip(&k).map(|(c, kk)| (*c, kk)).collect::<Vec<_>>());
                let sum: f64 = (0..8)
                    .map(|i| {
                        let e: f64 = h
                            * (0..7)
                                .map(|j| (A[6].get(j).copied().unwrap_or(0.0) - B_LOW[j]) * k[j][i])
                                .sum::<f64>();
                        let scale = abs_tol + rel_tol * s[i].abs().max(s7[i].abs());
                        (e / scale).powi(2)
                    })
                    .sum();
                let err = (sum / 8.0).sqrt();
                if err <= 1.0 {
                    t = if t_end - (t + h) < 1e-12 * t_end.max(1.0) {
                        t_end
                    } else {
                        t + h
                    };
                    s = s7;
                    // FSAL: the seventh stage is the derivative at the new state
                    k_first = k[6];
                    out.push(record(t, &s, &last_force));
                    rejections = 0;
                } else {
                    rejections += 1;
                }
                err
            }
        };
        if err > 1.0 && rejections > max_rejections {
            return Err(Error::StepRejectionLimit { t, rejections });
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        if h < 1e-14 * t_end.max(1.0) {
            return Err(Error::StepRejectionLimit { t, rejections });
        }
    }
    Ok(out)
}
