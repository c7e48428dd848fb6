//! Homogeneous field-equation residuals, the horizontal and vertical
//! currents, the anisotropy current ζ and the continuity residual.

use crate::em::EmTower;
use crate::error::{Error, Result};
use crate::expr::Jet;
use crate::geometry::{delta, divergence_sampled, SpaceDef, Tensor3, Tower};
use crate::linalg::{JetMat, Vec4};

/// Outer finite-difference step for the continuity residual.
pub const CONTINUITY_STEP: f64 = 1e-3;

/// Residuals of the three component sets of dF = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellResiduals {
    /// hhh[i][j][k]: δ_k F_ij + δ_j F_ki + δ_i F_jk + R^b_jk F̃_ib + R^b_ki F̃_jb + R^b_ij F̃_kb
    pub hhh: Tensor3,
    /// hhv[j][k][a]: ∂_a F_jk + δ_j F̃_ka − δ_k F̃_ja + F̃_jb N^b_{k·a} − F̃_kb N^b_{j·a}
    pub hhv: Tensor3,
    /// hvv[k][a][b]: ∂_b F̃_ka − ∂_a F̃_kb
    pub hvv: Tensor3,
    pub max_abs: f64,
}

/// The residuals for field blocks `f` (F_ij) and `ft` (F̃_ia), each of
/// order ≥ 1, over a tower with `extra ≥ 1`.
pub(crate) fn residuals_of(geo: &Tower, f: &JetMat, ft: &JetMat) -> MaxwellResiduals {
    let n = &geo.n;
    let r = geo.curvature();
    // Berwald coefficients N^b_{k·a}, which carry the vertical index
    let berwald: Vec<[[f64; 4]; 4]> = (0..4)
        .map(|b| std::array::from_fn(|k| std::array::from_fn(|a| n[b][k].d(&[4 + a]))))
        .collect();
    let df: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|j| (0..4).map(|k| delta(&f[i][j], k, n).value()).collect())
                .collect()
        })
        .collect();
    let dft: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|i| {
            (0..4)
                .map(|a| (0..4).map(|k| delta(&ft[i][a], k, n).value()).collect())
                .collect()
        })
        .collect();
    let ftv = crate::linalg::values(ft);
    let rv = |b: usize, j: usize, k: usize| r[b][j][k].value();

    let mut hhh = [[[0.0; 4]; 4]; 4];
    let mut hhv = [[[0.0; 4]; 4]; 4];
    let mut hvv = [[[0.0; 4]; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                let mut s = df[i][j][k] + df[k][i][j] + df[j][k][i];
                for b in 0..4 {
                    s += rv(b, j, k) * ftv[i][b] + rv(b, k, i) * ftv[j][b] + rv(b, i, j) * ftv[k][b];
                }
                hhh[i][j][k] = s;

                // (j, k, a) = (i, j, k)
                let (jj, kk, a) = (i, j, k);
                let mut s = f[jj][kk].d(&[4 + a]) + dft[kk][a][jj] - dft[jj][a][kk];
                for b in 0..4 {
                    s += ftv[jj][b] * berwald[b][kk][a] - ftv[kk][b] * berwald[b][jj][a];
                }
                hhv[jj][kk][a] = s;

                // (k, a, b) = (i, j, k)
                hvv[i][j][k] = ft[i][j].d(&[4 + k]) - ft[i][k].d(&[4 + j]);
            }
        }
    }
    let max_abs = [hhh, hhv, hvv]
        .iter()
        .flatten()
        .flatten()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    MaxwellResiduals { hhh, hhv, hvv, max_abs }
}

pub fn homogeneous_residuals(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<MaxwellResiduals> {
    let geo = Tower::build(space, x, y, 1)?;
    let em = EmTower::build(space, &geo)?;
    Ok(residuals_of(&geo, &em.f, &em.ft))
}

/// Current densities at one point (no continuity residual).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Currents {
    /// J^i
    pub j_h: Vec4,
    /// J̃^a
    pub j_v: Vec4,
    /// ζ^i = (1/√G) ∂_a(F̃^{ia} √G)
    pub zeta: Vec4,
    /// The isotropic part of the horizontal left-hand side, so that
    /// coupling · J^i = classical^i + ζ^i.
    pub classical: Vec4,
}

/// Currents together with div J at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSample {
    pub x: Vec4,
    pub y: Vec4,
    pub j_h: Vec4,
    pub j_v: Vec4,
    pub zeta: Vec4,
    pub classical: Vec4,
    pub continuity: f64,
}

fn raise_both(g_inv: &JetMat, m: &JetMat) -> JetMat {
    let order = m[0][0].order();
    let half: JetMat = std::array::from_fn(|i| {
        std::array::from_fn(|l| {
            let mut acc = Jet::zero(order);
            for k in 0..4 {
                acc.add_product(&g_inv[i][k], &m[k][l]);
            }
            acc
        })
    });
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut acc = Jet::zero(order);
            for l in 0..4 {
                acc.add_product(&half[i][l], &g_inv[j][l]);
            }
            acc
        })
    })
}

/// J^i, J̃^a and ζ^i from exact jets: the outer derivatives of F^{ij}√G need
/// F² to order 4, which the `extra = 1` tower provides.
pub fn currents(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Currents> {
    if space.coupling == 0.0 {
        return Err(Error::Domain(crate::expr::DomainError {
            subexpr: "coupling".into(),
            reason: "coupling constant must be nonzero".into(),
        }));
    }
    let geo = Tower::build(space, x, y, 1)?;
    let em = EmTower::build(space, &geo)?;
    let root = geo.sqrt_g().truncate(1);
    let inv_root = 1.0 / root.value();
    let f_up = raise_both(&geo.g_inv, &em.f);
    let ft_up = raise_both(&geo.g_inv, &em.ft);
    let trace = geo.n_trace_dot();
    let n = &geo.n;

    let mut classical = [0.0; 4];
    let mut zeta = [0.0; 4];
    let mut j_v = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            classical[i] += inv_root * delta(&(&f_up[i][j] * &root), j, n).value();
            classical[i] -= f_up[i][j].value() * trace[j].value();
            zeta[i] += inv_root * (&ft_up[i][j] * &root).d(&[4 + j]);
            // F̃^{ai} = −F̃^{ia}
            j_v[i] -= inv_root * delta(&(&ft_up[j][i] * &root), j, n).value();
        }
    }
    let k = 1.0 / space.coupling;
    Ok(Currents {
        j_h: std::array::from_fn(|i| k * (classical[i] + zeta[i])),
        j_v: j_v.map(|v| k * v),
        zeta,
        classical,
    })
}

pub fn horizontal_current(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<(Vec4, Vec4)> {
    let c = currents(space, x, y)?;
    Ok((c.j_h, c.zeta))
}

pub fn vertical_current(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<Vec4> {
    Ok(currents(space, x, y)?.j_v)
}

/// div J of the field (J^i, J̃^a), differencing the sampled currents with `step`.
pub fn continuity_residual_with_step(space: &SpaceDef, x: &Vec4, y: &Vec4, step: f64) -> Result<f64> {
    divergence_sampled(space, x, y, step, |xs, ys| -> Result<[f64; 8]> {
        let c = currents(space, xs, ys)?;
        Ok(std::array::from_fn(|s| if s < 4 { c.j_h[s] } else { c.j_v[s - 4] }))
    })
}

pub fn continuity_residual(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<f64> {
    continuity_residual_with_step(space, x, y, CONTINUITY_STEP)
}

pub fn current_sample(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<CurrentSample> {
    let c = currents(space, x, y)?;
    Ok(CurrentSample {
        x: *x,
        y: *y,
        j_h: c.j_h,
        j_v: c.j_v,
        zeta: c.zeta,
        classical: c.classical,
        continuity: continuity_residual(space, x, y)?,
    })
}
