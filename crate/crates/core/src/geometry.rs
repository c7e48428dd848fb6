//! Metric, spray, Cartan nonlinear connection, Chern connection, curvature
//! and divergence on the slit tangent bundle, sampled at a point (x, y).
//!
//! Everything is derived from jets of F² so that one evaluation of F yields
//! every quantity together with as many exact derivatives as the caller
//! needs; see [`Tower`].

use crate::error::{Error, Result};
use crate::expr::{point, Expr, Jet, ScalarField, Var};
use crate::linalg::{self, JetMat, JetVec, Mat4, Vec4};
use std::fmt;
use std::str::FromStr;

pub const DET_FLOOR: f64 = 1e-12;

/// Expected metric signature, compared by eigenvalue counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub positive: usize,
    pub negative: usize,
}

impl Signature {
    pub const LORENTZ: Signature = Signature {
        positive: 1,
        negative: 3,
    };
}

impl Default for Signature {
    fn default() -> Self {
        Signature::LORENTZ
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", "+".repeat(self.positive), "-".repeat(self.negative))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("signature must be four characters from {{+, -}}, got `{0}`")]
pub struct BadSignature(pub String);

impl FromStr for Signature {
    type Err = BadSignature;

    fn from_str(s: &str) -> Result<Self, BadSignature> {
        let mut sig = Signature {
            positive: 0,
            negative: 0,
        };
        for ch in s.trim().chars() {
            match ch {
                '+' => sig.positive += 1,
                '-' | '−' => sig.negative += 1,
                _ => return Err(BadSignature(s.to_string())),
            }
        }
        if sig.positive + sig.negative != 4 {
            return Err(BadSignature(s.to_string()));
        }
        Ok(sig)
    }
}

/// A scene's geometry and field content: the Finsler function F, the
/// potential generator L₁ and the particle/coupling constants.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceDef {
    pub finsler: ScalarField,
    pub potential: ScalarField,
    pub charge: f64,
    pub light_speed: f64,
    /// Unit-matching constant between position and direction coordinates.
    pub unit_scale: f64,
    /// β/4α in the field equations.
    pub coupling: f64,
    pub signature: Signature,
}

impl SpaceDef {
    pub fn new(finsler: ScalarField, potential: ScalarField) -> SpaceDef {
        SpaceDef {
            finsler,
            potential,
            charge: 1.0,
            light_speed: 1.0,
            unit_scale: 1.0,
            coupling: 1.0,
            signature: Signature::LORENTZ,
        }
    }

    /// Convenience constructor from expression sources; panics on bad input.
    pub fn from_sources(finsler: &str, potential: &str) -> SpaceDef {
        let p = |s: &str| ScalarField::parse(s).unwrap_or_else(|e| panic!("bad expression `{s}`: {e}"));
        SpaceDef::new(
            p(finsler),
            if potential.trim().is_empty() {
                ScalarField::zero()
            } else {
                p(potential)
            },
        )
    }

    pub fn with_charge(mut self, q: f64, c: f64) -> SpaceDef {
        self.charge = q;
        self.light_speed = c;
        self
    }

    pub fn with_coupling(mut self, coupling: f64) -> SpaceDef {
        self.coupling = coupling;
        self
    }

    pub fn with_potential(mut self, potential: ScalarField) -> SpaceDef {
        self.potential = potential;
        self
    }

    /// q/c
    pub fn charge_ratio(&self) -> f64 {
        self.charge / self.light_speed
    }

    /// Rewrite F and L₁ in fibre units y ↦ H·y and reset H to 1, so that all
    /// sampling downstream works in natural units.
    pub fn in_fibre_units(&self) -> SpaceDef {
        if self.unit_scale == 1.0 {
            return self.clone();
        }
        let h = self.unit_scale;
        let scale = |v: Var| v.is_direction().then(|| Expr::mul(Expr::num(h), Expr::var(v)));
        SpaceDef {
            finsler: self.finsler.substitute(&scale),
            potential: self.potential.substitute(&scale),
            unit_scale: 1.0,
            ..self.clone()
        }
    }
}

pub(crate) fn check_signature(space: &SpaceDef, g: &Mat4) -> Result<()> {
    let (positive, negative) = linalg::inertia(g);
    let found = Signature { positive, negative };
    if found != space.signature {
        let zero = 4 - positive - negative;
        return Err(Error::SignatureMismatch {
            expected: space.signature,
            found: format!("{found}{}", "0".repeat(zero)),
        });
    }
    Ok(())
}

pub(crate) fn invert(g: &Mat4) -> Result<(Mat4, f64)> {
    linalg::inverse(g, DET_FLOOR).ok_or_else(|| Error::DegenerateMetric { det: linalg::det(g) })
}

/// Metric values at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub g: Mat4,
    pub g_inv: Mat4,
    pub det: f64,
    pub f_value: f64,
}

/// g_ij = ½ ∂²F²/∂y^i∂y^j with its inverse.
pub fn metric(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Metric> {
    let f = space.finsler.eval_jet(&point(x, y), 2)?;
    let f2 = &f * &f;
    let g: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * f2.d(&[4 + i, 4 + j])));
    let (g_inv, det) = invert(&g)?;
    check_signature(space, &g)?;
    Ok(Metric {
        g,
        g_inv,
        det,
        f_value: f.value(),
    })
}

/// Jets of every geometric object at one point. With `extra = 0` the
/// connection coefficients are plain values (order 0); each extra level
/// carries one more order of exact derivatives through the whole chain:
///
/// | object        | order     |
/// |---------------|-----------|
/// | F, F²         | 3 + extra |
/// | g, g⁻¹, det g | 1 + extra |
/// | G             | 1 + extra |
/// | N, L          | extra     |
pub(crate) struct Tower {
    pub extra: usize,
    pub x: Vec4,
    pub y: Vec4,
    pub f: Jet,
    pub g: JetMat,
    pub g_inv: JetMat,
    pub det: Jet,
    pub spray: JetVec,
    pub n: JetMat,
    /// chern[i][j][k] = L^i_jk
    pub chern: Vec<JetMat>,
}

/// δ_i f = ∂_i f − N^a_i ∂_a f, truncated to the lower of the two orders.
pub(crate) fn delta(f: &Jet, i: usize, n: &JetMat) -> Jet {
    let mut out = f.derivative(i);
    for a in 0..4 {
        out = out - &n[a][i] * &f.derivative(4 + a);
    }
    out
}

impl Tower {
    pub fn build(space: &SpaceDef, x: &Vec4, y: &Vec4, extra: usize) -> Result<Tower> {
        let top = 3 + extra;
        let f = space.finsler.eval_jet(&point(x, y), top)?;
        let f2 = &f * &f;

        let dy_f2: Vec<Jet> = (0..4).map(|l| f2.derivative(4 + l)).collect();
        let mut g: JetMat = std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(0)));
        for i in 0..4 {
            for j in i..4 {
                let gij = dy_f2[i].derivative(4 + j).scale(0.5);
                g[j][i] = gij.clone();
                g[i][j] = gij;
            }
        }
        let g0 = linalg::values(&g);
        let (g0_inv, _) = invert(&g0)?;
        check_signature(space, &g0)?;
        let g_inv = linalg::jet_inverse(&g, &g0_inv);
        let det = linalg::jet_det(&g);

        // G^i = ¼ g^{il} ((F²)_{·l,k} y^k − (F²)_{,l})
        let order = 1 + extra;
        let yk: Vec<Jet> = (0..4).map(|k| Jet::variable(4 + k, y[k], order)).collect();
        let t: Vec<Jet> = (0..4)
            .map(|l| {
                let mut acc = -f2.derivative(l).truncate(order);
                for k in 0..4 {
                    acc.add_product(&yk[k], &dy_f2[l].derivative(k));
                }
                acc
            })
            .collect();
        let spray: JetVec = std::array::from_fn(|i| {
            let mut acc = Jet::zero(order);
            for l in 0..4 {
                acc.add_product(&g_inv[i][l], &t[l]);
            }
            acc.scale(0.25)
        });

        let n: JetMat = std::array::from_fn(|i| std::array::from_fn(|j| spray[i].derivative(4 + j)));

        // L^i_jk = ½ g^{ih} (δ_k g_hj + δ_j g_hk − δ_h g_jk)
        let dg: Vec<Vec<Vec<Jet>>> = (0..4)
            .map(|h| {
                (0..4)
                    .map(|j| (0..4).map(|k| delta(&g[h][j], k, &n)).collect())
                    .collect()
            })
            .collect();
        let mut chern: Vec<JetMat> = (0..4)
            .map(|_| std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(extra))))
            .collect();
        for j in 0..4 {
            for k in j..4 {
                let lower: Vec<Jet> = (0..4).map(|h| &(&dg[h][j][k] + &dg[h][k][j]) - &dg[j][k][h]).collect();
                for (i, gamma) in chern.iter_mut().enumerate() {
                    let mut acc = Jet::zero(extra);
                    for h in 0..4 {
                        acc.add_product(&g_inv[i][h], &lower[h]);
                    }
                    let acc = acc.scale(0.5);
                    gamma[k][j] = acc.clone();
                    gamma[j][k] = acc;
                }
            }
        }

        Ok(Tower {
            extra,
            x: *x,
            y: *y,
            f,
            g,
            g_inv,
            det,
            spray,
            n,
            chern,
        })
    }

    /// √G = |det g| as a jet of order 1 + extra.
    pub fn sqrt_g(&self) -> Jet {
        if self.det.value() < 0.0 {
            -&self.det
        } else {
            self.det.clone()
        }
    }

    /// N^a_{j·a}; needs `extra ≥ 1`, result has order extra − 1.
    pub fn n_trace_dot(&self) -> JetVec {
        std::array::from_fn(|j| {
            let mut acc = self.n[0][j].derivative(4);
            for a in 1..4 {
                acc = acc + self.n[a][j].derivative(4 + a);
            }
            acc
        })
    }

    /// R^a_jk = δ_k N^a_j − δ_j N^a_k; needs `extra ≥ 1`.
    pub fn curvature(&self) -> Vec<JetMat> {
        (0..4)
            .map(|a| {
                std::array::from_fn(|j| {
                    std::array::from_fn(|k| delta(&self.n[a][j], k, &self.n) - delta(&self.n[a][k], j, &self.n))
                })
            })
            .collect()
    }
}

pub type Tensor3 = [[[f64; 4]; 4]; 4];

fn tensor_values(t: &[JetMat]) -> Tensor3 {
    std::array::from_fn(|i| linalg::values(&t[i]))
}

/// Geometric data at one point of the slit tangent bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometrySample {
    pub x: Vec4,
    pub y: Vec4,
    pub g: Mat4,
    pub g_inv: Mat4,
    pub f_value: f64,
    /// G^i
    pub spray: Vec4,
    /// N^i_j, stored as `n[i][j]`
    pub n: Mat4,
    /// L^i_jk, stored as `chern[i][j][k]`
    pub chern: Tensor3,
    /// R^a_jk, stored as `curvature[a][j][k]`
    pub curvature: Tensor3,
    pub sqrt_g: f64,
    /// N^a_{j·a}
    pub n_trace_dot: Vec4,
}

impl GeometrySample {
    pub(crate) fn from_tower(t: &Tower) -> GeometrySample {
        assert!(t.extra >= 1);
        let trace = t.n_trace_dot();
        GeometrySample {
            x: t.x,
            y: t.y,
            g: linalg::values(&t.g),
            g_inv: linalg::values(&t.g_inv),
            f_value: t.f.value(),
            spray: linalg::vec_values(&t.spray),
            n: linalg::values(&t.n),
            chern: tensor_values(&t.chern),
            curvature: tensor_values(&t.curvature()),
            sqrt_g: t.det.value().abs(),
            n_trace_dot: linalg::vec_values(&trace),
        }
    }
}

/// All geometric quantities at (x, y).
pub fn sample(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<GeometrySample> {
    Ok(GeometrySample::from_tower(&Tower::build(space, x, y, 1)?))
}

/// Spray coefficients G^i.
pub fn spray(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Vec4> {
    Ok(linalg::vec_values(&Tower::build(space, x, y, 0)?.spray))
}

/// Cartan nonlinear connection N^i_j together with N^a_{j·a}.
pub fn nonlinear_connection(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<(Mat4, Vec4)> {
    let t = Tower::build(space, x, y, 1)?;
    Ok((linalg::values(&t.n), linalg::vec_values(&t.n_trace_dot())))
}

/// Chern connection coefficients L^i_jk.
pub fn chern(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Tensor3> {
    Ok(tensor_values(&Tower::build(space, x, y, 0)?.chern))
}

/// Curvature R^a_jk of the nonlinear connection.
pub fn curvature(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Tensor3> {
    Ok(tensor_values(&Tower::build(space, x, y, 1)?.curvature()))
}

/// δ_i f for a scalar field on TM.
pub fn adapted_derivative(space: &SpaceDef, f: &ScalarField, x: &Vec4, y: &Vec4) -> Result<Vec4> {
    let t = Tower::build(space, x, y, 0)?;
    let fj = f.eval_jet(&point(x, y), 1)?;
    Ok(std::array::from_fn(|i| delta(&fj, i, &t.n).value()))
}

/// A vector field on TM, split in the adapted frame as V^i δ_i + Ṽ^a ∂_a.
#[derive(Debug, Clone)]
pub struct TmField {
    pub horizontal: [ScalarField; 4],
    pub vertical: [ScalarField; 4],
}

/// div V = (1/√G) δ_i(V^i √G) − N^a_{i·a} V^i + (1/√G) ∂_a(Ṽ^a √G).
pub fn divergence(space: &SpaceDef, v: &TmField, x: &Vec4, y: &Vec4) -> Result<f64> {
    let t = Tower::build(space, x, y, 1)?;
    let p = point(x, y);
    let root = t.sqrt_g().truncate(1);
    let trace = t.n_trace_dot();
    let mut total = 0.0;
    for i in 0..4 {
        let vi = v.horizontal[i].eval_jet(&p, 1)?;
        total += delta(&(&vi * &root), i, &t.n).value() / root.value();
        total -= trace[i].value() * vi.value();
        let va = v.vertical[i].eval_jet(&p, 1)?;
        total += (&va * &root).d(&[4 + i]) / root.value();
    }
    Ok(total)
}

/// Divergence of a field known only through point samples `(V^i, Ṽ^a)`;
/// first derivatives of V√G by central differences with the given step.
pub fn divergence_sampled<E>(
    space: &SpaceDef,
    x: &Vec4,
    y: &Vec4,
    step: f64,
    field: impl Fn(&Vec4, &Vec4) -> Result<[f64; 8], E>,
) -> Result<f64, E>
where
    E: From<Error>,
{
    let t = Tower::build(space, x, y, 1)?;
    let n = linalg::values(&t.n);
    let trace = linalg::vec_values(&t.n_trace_dot());
    let root0 = t.det.value().abs();
    let weighted = |p: &[f64; 8]| -> Result<[f64; 8], E> {
        let (xs, ys) = crate::expr::split(p);
        let m = metric(space, &xs, &ys)?;
        let v = field(&xs, &ys)?;
        Ok(v.map(|c| c * m.det.abs()))
    };
    // grad[s][c] = ∂_s (V√G)^c
    let centre = point(x, y);
    let mut grad = [[0.0; 8]; 8];
    for (s, row) in grad.iter_mut().enumerate() {
        let mut plus = centre;
        let mut minus = centre;
        plus[s] += step;
        minus[s] -= step;
        let (wp, wm) = (weighted(&plus)?, weighted(&minus)?);
        for c in 0..8 {
            row[c] = (wp[c] - wm[c]) / (2.0 * step);
        }
    }
    let v = field(x, y)?;
    let mut total = 0.0;
    for i in 0..4 {
        let mut d = grad[i][i];
        for a in 0..4 {
            d -= n[a][i] * grad[4 + a][i];
        }
        total += d / root0;
        total -= trace[i] * v[i];
        total += grad[4 + i][4 + i] / root0;
    }
    Ok(total)
}
