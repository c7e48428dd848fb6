//! Direction-dependent potential A_i = ∂L₁/∂y^i, the two blocks of the
//! electromagnetic tensor, the gravito-electromagnetic 2-form and gauge
//! shifts.

use crate::error::{Error, Result};
use crate::expr::{point, Expr, Jet, ScalarField, Var};
use crate::geometry::{delta, SpaceDef, Tower};
use crate::linalg::{self, JetMat, JetVec, Mat4, Vec4};

/// Potential-side jets on top of a geometry [`Tower`] of the same `extra`:
/// L₁ at order 2 + extra, A at 1 + extra, the field blocks at `extra`.
pub(crate) struct EmTower {
    pub a: JetVec,
    /// a_v[i][b] = A_{i·b}
    pub a_v: JetMat,
    /// f[i][j] = F_ij
    pub f: JetMat,
    /// ft[i][a] = F̃_ia
    pub ft: JetMat,
}

impl EmTower {
    pub fn build(space: &SpaceDef, geo: &Tower) -> Result<EmTower> {
        let extra = geo.extra;
        let l1 = space.potential.eval_jet(&point(&geo.x, &geo.y), 2 + extra)?;
        let a: JetVec = std::array::from_fn(|i| l1.derivative(4 + i));
        let a_v: JetMat = std::array::from_fn(|i| std::array::from_fn(|b| a[i].derivative(4 + b)));
        // A_{j|i} − A_{i|j} = δ_i A_j − δ_j A_i because L^h_ij is symmetric.
        let da: Vec<Vec<Jet>> = (0..4)
            .map(|j| (0..4).map(|i| delta(&a[j], i, &geo.n)).collect())
            .collect();
        let mut f: JetMat = std::array::from_fn(|_| std::array::from_fn(|_| Jet::zero(extra)));
        for i in 0..4 {
            for j in i + 1..4 {
                let fij = &da[j][i] - &da[i][j];
                f[j][i] = -&fij;
                f[i][j] = fij;
            }
        }
        let ft: JetMat = std::array::from_fn(|i| std::array::from_fn(|b| -&a_v[i][b]));
        Ok(EmTower { a, a_v, f, ft })
    }
}

/// Electromagnetic data at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EmSample {
    pub x: Vec4,
    pub y: Vec4,
    /// A_i
    pub a: Vec4,
    /// a_hderiv[j][i] = A_{j|i}
    pub a_hderiv: Mat4,
    /// a_vderiv[i][b] = A_{i·b}
    pub a_vderiv: Mat4,
    /// F_ij
    pub f_hh: Mat4,
    /// F̃_ia
    pub f_hv: Mat4,
    /// F^i_h = g^{ik} F_kh
    pub f_mixed: Mat4,
    /// F̃^i_a = g^{ik} F̃_ka
    pub f_hv_mixed: Mat4,
    /// F^{ij}
    pub f_up: Mat4,
    /// F̃^{ia}
    pub f_hv_up: Mat4,
    pub omega_hh: Mat4,
    pub omega_hv: Mat4,
}

fn raise_first(g_inv: &Mat4, m: &Mat4) -> Mat4 {
    linalg::mat_mul(g_inv, m)
}

fn raise_both(g_inv: &Mat4, m: &Mat4) -> Mat4 {
    // g^{ik} m_kl g^{lj}, g⁻¹ symmetric
    linalg::mat_mul(&linalg::mat_mul(g_inv, m), g_inv)
}

impl EmSample {
    pub(crate) fn from_towers(space: &SpaceDef, geo: &Tower, em: &EmTower) -> EmSample {
        let g = linalg::values(&geo.g);
        let g_inv = linalg::values(&geo.g_inv);
        let a = linalg::vec_values(&em.a);
        let a_hderiv: Mat4 = std::array::from_fn(|j| {
            std::array::from_fn(|i| {
                let mut v = delta(&em.a[j], i, &geo.n).value();
                for h in 0..4 {
                    v -= geo.chern[h][j][i].value() * a[h];
                }
                v
            })
        });
        let f_hh = linalg::values(&em.f);
        let f_hv = linalg::values(&em.ft);
        let qc = space.charge_ratio();
        EmSample {
            x: geo.x,
            y: geo.y,
            a,
            a_hderiv,
            a_vderiv: linalg::values(&em.a_v),
            f_mixed: raise_first(&g_inv, &f_hh),
            f_hv_mixed: raise_first(&g_inv, &f_hv),
            f_up: raise_both(&g_inv, &f_hh),
            f_hv_up: raise_both(&g_inv, &f_hv),
            omega_hh: f_hh.map(|r| r.map(|v| qc * v)),
            omega_hv: std::array::from_fn(|i| std::array::from_fn(|b| qc * f_hv[i][b] - g[i][b])),
            f_hh,
            f_hv,
        }
    }
}

/// A_i and A_{i·b} at (x, y).
pub fn potential(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<(Vec4, Mat4)> {
    let l1 = space.potential.eval_jet(&point(x, y), 2)?;
    let a: Vec4 = std::array::from_fn(|i| l1.d(&[4 + i]));
    let a_v: Mat4 = std::array::from_fn(|i| std::array::from_fn(|b| l1.d(&[4 + i, 4 + b])));
    Ok((a, a_v))
}

/// Both field blocks with their raised variants and the 2-form ω.
pub fn em_tensor(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<EmSample> {
    let geo = Tower::build(space, x, y, 0)?;
    let em = EmTower::build(space, &geo)?;
    Ok(EmSample::from_towers(space, &geo, &em))
}

/// ω_hh = (q/c) F_ij and ω_hv = (q/c) F̃_ia − g_ia.
pub fn gravito_em_form(space: &SpaceDef, x: &Vec4, y: &Vec4) -> Result<(Mat4, Mat4)> {
    let s = em_tensor(space, x, y)?;
    Ok((s.omega_hh, s.omega_hv))
}

/// The space with L₁ replaced by L₁ + (∂_i λ) y^i for a position-only λ.
pub fn gauge_shift(space: &SpaceDef, lambda: &ScalarField) -> Result<SpaceDef> {
    if lambda.depends_on_direction() {
        return Err(Error::GaugeNotPositional(lambda.to_string()));
    }
    let terms: Vec<Expr> = (0..4)
        .filter_map(|i| {
            let d = lambda.derivative(Var::x(i));
            (d.expr().as_constant() != Some(0.0)).then(|| Expr::mul(d.expr().clone(), Expr::var(Var::y(i))))
        })
        .collect();
    if terms.is_empty() {
        return Ok(space.clone());
    }
    let shift = terms.into_iter().reduce(Expr::add).expect("nonempty");
    let potential = if space.potential.is_zero() {
        shift
    } else {
        Expr::add(space.potential.expr().clone(), shift)
    };
    Ok(space.clone().with_potential(ScalarField::from_expr(potential)))
}
