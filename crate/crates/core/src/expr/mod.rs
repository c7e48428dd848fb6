//! Closed-form scalar fields over the tangent-bundle coordinates
//! `(x0..x3, y0..y3)`, with exact derivative jets and a finite-difference
//! oracle.

mod ast;
mod eval;
mod jet;
mod parser;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

pub use ast::{derivative, Expr, Func, Var};
pub use eval::DomainError;
pub use jet::{coefficient_count, Jet, MultiIndex, MAX_ORDER, NVARS};
pub use parser::ParseError;

/// A point of the tangent bundle, `[x0, x1, x2, x3, y0, y1, y2, y3]`.
pub type Point = [f64; NVARS];

pub fn point(x: &[f64; 4], y: &[f64; 4]) -> Point {
    [x[0], x[1], x[2], x[3], y[0], y[1], y[2], y[3]]
}

pub fn split(p: &Point) -> ([f64; 4], [f64; 4]) {
    ([p[0], p[1], p[2], p[3]], [p[4], p[5], p[6], p[7]])
}

/// A parsed scalar expression in the eight bundle coordinates.
///
/// Immutable once built and safe to evaluate from many threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    expr: Expr,
}

impl ScalarField {
    pub fn parse(source: &str) -> Result<ScalarField, ParseError> {
        parser::parse_expr(source).map(|expr| ScalarField { expr })
    }

    pub fn from_expr(expr: Expr) -> ScalarField {
        ScalarField { expr }
    }

    pub fn zero() -> ScalarField {
        ScalarField { expr: Expr::Num(0.0) }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.expr, Expr::Num(v) if v == 0.0)
    }

    pub fn eval(&self, p: &Point) -> Result<f64, DomainError> {
        eval::eval_node::<f64>(&self.expr, p, 0)
    }

    /// Exact partial derivatives up to total order `order` (≤ 4).
    pub fn eval_jet(&self, p: &Point, order: usize) -> Result<Jet, DomainError> {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        eval::eval_node::<Jet>(&self.expr, p, order)
    }

    /// Central-difference jet with step `step`: every partial of order ≤
    /// `order` from a tensor product of second-order-accurate 1-D stencils.
    /// Truncation error is O(step²); rounding grows like ε/stepⁿ for an
    /// order-n partial.
    pub fn fd_jet(&self, p: &Point, order: usize, step: f64) -> Result<Jet, DomainError> {
        assert!(step > 0.0, "finite-difference step must be positive");
        let mut cache = HashMap::new();
        let partials = fd_partials(self, p, order, step, &mut cache)?;
        Ok(Jet::from_partials(order, |m| partials[m]))
    }

    /// Richardson-extrapolated central differences, `(4 D(h/2) − D(h)) / 3`,
    /// with O(step⁴) truncation. Used where third and fourth partials must be
    /// checked to ~1e-6.
    pub fn fd_jet_extrapolated(&self, p: &Point, order: usize, step: f64) -> Result<Jet, DomainError> {
        assert!(step > 0.0, "finite-difference step must be positive");
        let coarse = fd_partials(self, p, order, step, &mut HashMap::new())?;
        let fine = fd_partials(self, p, order, step / 2.0, &mut HashMap::new())?;
        Ok(Jet::from_partials(order, |m| (4.0 * fine[m] - coarse[m]) / 3.0))
    }

    /// `|f(x, λy) − λ^degree f(x, y)|`.
    pub fn check_homogeneity(&self, degree: f64, p: &Point, scale: f64) -> Result<f64, DomainError> {
        assert!(scale > 0.0, "homogeneity scale must be positive");
        let mut scaled = *p;
        for v in &mut scaled[4..] {
            *v *= scale;
        }
        let lhs = self.eval(&scaled)?;
        let rhs = scale.powf(degree) * self.eval(p)?;
        Ok((lhs - rhs).abs())
    }

    /// Symbolic partial derivative along one coordinate.
    pub fn derivative(&self, v: Var) -> ScalarField {
        ScalarField {
            expr: ast::derivative(&self.expr, v),
        }
    }

    pub fn substitute(&self, f: &dyn Fn(Var) -> Option<Expr>) -> ScalarField {
        ScalarField {
            expr: self.expr.substitute(f),
        }
    }

    pub fn depends_on_direction(&self) -> bool {
        self.expr.depends_on(&|v| v.is_direction())
    }

    pub fn depends_on_position(&self) -> bool {
        self.expr.depends_on(&|v| !v.is_direction())
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

impl FromStr for ScalarField {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScalarField::parse(s)
    }
}

// Offsets (in units of the step) and weights of the 1-D central stencil for
// a derivative of order n; each carries the 1/hⁿ factor separately.
fn stencil(n: u8) -> &'static [(i8, f64)] {
    match n {
        0 => &[(0, 1.0)],
        1 => &[(1, 0.5), (-1, -0.5)],
        2 => &[(1, 1.0), (0, -2.0), (-1, 1.0)],
        3 => &[(2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)],
        4 => &[(2, 1.0), (1, -4.0), (0, 6.0), (-1, -4.0), (-2, 1.0)],
        _ => panic!("no stencil for derivative order {n}"),
    }
}

fn fd_partials(
    field: &ScalarField,
    p: &Point,
    order: usize,
    h: f64,
    cache: &mut HashMap<[i8; NVARS], f64>,
) -> Result<HashMap<MultiIndex, f64>, DomainError> {
    let skeleton = Jet::zero(order);
    let mut out = HashMap::new();
    for (alpha, _) in skeleton.partials() {
        let mut acc = 0.0;
        let mut offsets = [0i8; NVARS];
        accumulate(field, p, h, &alpha, 0, 1.0, &mut offsets, &mut acc, cache)?;
        out.insert(alpha, acc / h.powi(alpha.degree() as i32));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn accumulate(
    field: &ScalarField,
    p: &Point,
    h: f64,
    alpha: &MultiIndex,
    slot: usize,
    weight: f64,
    offsets: &mut [i8; NVARS],
    acc: &mut f64,
    cache: &mut HashMap<[i8; NVARS], f64>,
) -> Result<(), DomainError> {
    if slot == NVARS {
        let value = match cache.get(offsets) {
            Some(v) => *v,
            None => {
                let mut q = *p;
                for (qi, &o) in q.iter_mut().zip(offsets.iter()) {
                    *qi += o as f64 * h;
                }
                let v = field.eval(&q)?;
                cache.insert(*offsets, v);
                v
            }
        };
        *acc += weight * value;
        return Ok(());
    }
    for &(o, w) in stencil(alpha.0[slot]) {
        offsets[slot] = o;
        accumulate(field, p, h, alpha, slot + 1, weight * w, offsets, acc, cache)?;
    }
    offsets[slot] = 0;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at_y(y: [f64; 4]) -> Point {
        point(&[0.0; 4], &y)
    }

    #[test]
    fn quadratic_jet() {
        let f = ScalarField::parse("y0^2 - y1^2").unwrap();
        let j = f.eval_jet(&at_y([1.0, 0.2, 0.0, 0.0]), 2).unwrap();
        assert!((j.value() - 0.96).abs() < 1e-15);
        assert_eq!(j.d(&[4, 4]), 2.0);
        assert_eq!(j.d(&[4, 5]), 0.0);
        assert_eq!(j.d(&[5, 5]), -2.0);
    }

    #[test]
    fn order_zero_matches_plain_evaluation() {
        let f = ScalarField::parse("sqrt(y0^2 - y1^2)/(1 + x0^2) + pow(y0, 1.5)*sin(x2) - log(y0)").unwrap();
        let p = point(&[0.3, -0.2, 1.1, 0.0], &[1.3, 0.4, 0.1, -0.2]);
        let j = f.eval_jet(&p, 0).unwrap();
        assert_eq!(j.value().to_bits(), f.eval(&p).unwrap().to_bits());
        assert_eq!(j.partials().count(), 1);
    }

    #[test]
    fn sqrt_jet_against_differences() {
        let f = ScalarField::parse("sqrt(y0^2 - y1^2)").unwrap();
        let p = at_y([1.0, 0.2, 0.0, 0.0]);
        let exact = f.eval_jet(&p, 3).unwrap();
        let approx = f.fd_jet_extrapolated(&p, 3, 1e-2).unwrap();
        for ((m, a), (_, b)) in exact.partials().zip(approx.partials()) {
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "{m}: {a} vs {b}");
        }
    }

    #[test]
    fn fd_constant_and_bilinear() {
        let c = ScalarField::parse("3.5").unwrap();
        let j = c.fd_jet(&at_y([1.0, 2.0, 3.0, 4.0]), 1, 1e-3).unwrap();
        assert!(j.partials().skip(1).all(|(_, v)| v.abs() < 1e-12));
        let b = ScalarField::parse("y0*y1").unwrap();
        let j = b.fd_jet(&at_y([0.7, -0.3, 0.0, 0.0]), 2, 1e-3).unwrap();
        assert!((j.d(&[4, 5]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let f = ScalarField::parse("1 + sqrt(y1 - y0)").unwrap();
        let err = f.eval(&at_y([1.0, 0.0, 0.0, 0.0])).unwrap_err();
        assert_eq!(err.subexpr, "sqrt(y1 - y0)");
        let f = ScalarField::parse("x0/(x1 - x1)").unwrap();
        assert!(f.eval(&at_y([1.0; 4])).is_err());
        let f = ScalarField::parse("log(x0)").unwrap();
        assert!(f.eval(&at_y([1.0; 4])).is_err());
        let f = ScalarField::parse("sqrt(x0)").unwrap();
        assert!(f.eval(&at_y([1.0; 4])).is_ok());
        assert!(f.eval_jet(&at_y([1.0; 4]), 1).is_err());
        let f = ScalarField::parse("abs(x0)").unwrap();
        assert!(f.eval_jet(&at_y([1.0; 4]), 1).is_err());
        let f = ScalarField::parse("y1^0.5").unwrap();
        assert!(f.eval(&at_y([1.0, -1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn integer_powers_of_negative_bases() {
        let f = ScalarField::parse("y1^3 + pow(y1, 2) + y1^(-1)").unwrap();
        let j = f.eval_jet(&at_y([1.0, -2.0, 0.0, 0.0]), 2).unwrap();
        assert!((j.value() - (-8.0 + 4.0 - 0.5)).abs() < 1e-14);
        assert!((j.d(&[5]) - (12.0 - 4.0 - 0.25)).abs() < 1e-14);
    }

    #[test]
    fn variable_exponent() {
        let f = ScalarField::parse("y0^x0").unwrap();
        let p = point(&[1.5, 0.0, 0.0, 0.0], &[2.0, 0.0, 0.0, 0.0]);
        let j = f.eval_jet(&p, 2).unwrap();
        let v = 2f64.powf(1.5);
        assert!((j.value() - v).abs() < 1e-14);
        assert!((j.d(&[0]) - v * 2f64.ln()).abs() < 1e-13);
        assert!((j.d(&[4]) - 1.5 * 2f64.powf(0.5)).abs() < 1e-13);
    }

    #[test]
    fn homogeneity_residuals() {
        let minkowski = ScalarField::parse("sqrt(y0^2 - y1^2 - y2^2 - y3^2)").unwrap();
        let p = at_y([1.0, 0.2, 0.1, 0.0]);
        assert!(minkowski.check_homogeneity(1.0, &p, 2.0).unwrap() < 1e-15);
        let sq = ScalarField::parse("y0^2 - y1^2 - y2^2 - y3^2").unwrap();
        let r = sq.check_homogeneity(2.0, &p, 3.0).unwrap();
        assert!(r <= 1e-12 * sq.eval(&p).unwrap().abs());
        let l1 = ScalarField::parse("0.3*y1^2/sqrt(y0^2-y1^2-y2^2-y3^2)").unwrap();
        assert!(l1.check_homogeneity(1.0, &at_y([1.0, 0.2, 0.0, 0.0]), 1.7).unwrap() <= 1e-12);
        let bad = ScalarField::parse("x1*y0^2").unwrap();
        let p = point(&[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0]);
        assert!((bad.check_homogeneity(1.0, &p, 2.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn symbolic_derivative_agrees_with_jet() {
        let f = ScalarField::parse("sin(x0*y1)/sqrt(y0^2 - y1^2) + exp(x2)*y3^2 + pow(x1 + 2, x0)").unwrap();
        let p = point(&[0.4, 0.3, -0.2, 0.1], &[1.2, 0.3, 0.1, 0.2]);
        let j = f.eval_jet(&p, 1).unwrap();
        for slot in 0..NVARS {
            let d = f.derivative(Var::new(slot).unwrap()).eval(&p).unwrap();
            let expected = j.d(&[slot]);
            assert!((d - expected).abs() < 1e-13 * expected.abs().max(1.0), "slot {slot}");
        }
    }
}
