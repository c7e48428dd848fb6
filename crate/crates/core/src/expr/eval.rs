use super::ast::{Expr, Func};
use super::jet::{factorial, Jet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error in `{subexpr}`: {reason}")]
pub struct DomainError {
    pub subexpr: String,
    pub reason: String,
}

/// Arithmetic needed by the evaluator. Implemented for plain `f64` and for
/// [`Jet`]; both share one tree walk, so an order-0 jet reproduces plain
/// evaluation exactly.
pub(crate) trait Scalar: Sized + Clone {
    fn lift(v: f64, order: usize) -> Self;
    fn variable(slot: usize, v: f64, order: usize) -> Self;
    fn value(&self) -> f64;
    fn order(&self) -> usize;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn negate(&self) -> Self;
    fn compose(&self, derivs: &[f64]) -> Self;
}

impl Scalar for f64 {
    fn lift(v: f64, _: usize) -> f64 {
        v
    }
    fn variable(_: usize, v: f64, _: usize) -> f64 {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn order(&self) -> usize {
        0
    }
    fn plus(&self, o: &f64) -> f64 {
        self + o
    }
    fn minus(&self, o: &f64) -> f64 {
        self - o
    }
    fn times(&self, o: &f64) -> f64 {
        self * o
    }
    fn negate(&self) -> f64 {
        -self
    }
    fn compose(&self, derivs: &[f64]) -> f64 {
        derivs[0]
    }
}

impl Scalar for Jet {
    fn lift(v: f64, order: usize) -> Jet {
        Jet::constant(v, order)
    }
    fn variable(slot: usize, v: f64, order: usize) -> Jet {
        Jet::variable(slot, v, order)
    }
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn order(&self) -> usize {
        Jet::order(self)
    }
    fn plus(&self, o: &Jet) -> Jet {
        self + o
    }
    fn minus(&self, o: &Jet) -> Jet {
        self - o
    }
    fn times(&self, o: &Jet) -> Jet {
        self * o
    }
    fn negate(&self) -> Jet {
        -self
    }
    fn compose(&self, derivs: &[f64]) -> Jet {
        Jet::compose(self, derivs)
    }
}

fn domain(e: &Expr, reason: impl Into<String>) -> DomainError {
    DomainError {
        subexpr: e.to_string(),
        reason: reason.into(),
    }
}

// r (r-1) … (r-n+1)
fn falling(r: f64, n: usize) -> f64 {
    (0..n).map(|k| r - k as f64).product()
}

/// Derivatives of u ↦ u^r at u0, up to `order`.
fn power_derivs(e: &Expr, u0: f64, r: f64, order: usize) -> Result<Vec<f64>, DomainError> {
    let integer = r.fract() == 0.0 && r.abs() <= 1024.0;
    if !integer && u0 < 0.0 {
        return Err(domain(e, format!("negative base {u0} with non-integer exponent {r}")));
    }
    let mut out = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let c = falling(r, n);
        if c == 0.0 {
            out.push(0.0);
            continue;
        }
        let p = if integer {
            u0.powi((r as i64 - n as i64) as i32)
        } else {
            u0.powf(r - n as f64)
        };
        if !p.is_finite() {
            return Err(domain(e, format!("power singular at base {u0}")));
        }
        out.push(c * p);
    }
    Ok(out)
}

pub(crate) fn eval_node<S: Scalar>(e: &Expr, point: &[f64; 8], order: usize) -> Result<S, DomainError> {
    let out = match e {
        Expr::Num(v) => S::lift(*v, order),
        Expr::Var(v) => S::variable(v.slot(), point[v.slot()], order),
        Expr::Neg(a) => eval_node::<S>(a, point, order)?.negate(),
        Expr::Add(a, b) => eval_node::<S>(a, point, order)?.plus(&eval_node::<S>(b, point, order)?),
        Expr::Sub(a, b) => eval_node::<S>(a, point, order)?.minus(&eval_node::<S>(b, point, order)?),
        Expr::Mul(a, b) => eval_node::<S>(a, point, order)?.times(&eval_node::<S>(b, point, order)?),
        Expr::Div(a, b) => {
            let num = eval_node::<S>(a, point, order)?;
            let den = eval_node::<S>(b, point, order)?;
            let d0 = den.value();
            if d0 == 0.0 {
                return Err(domain(e, "division by zero"));
            }
            num.times(&reciprocal(&den))
        }
        Expr::Pow(a, b) => power(e, a, b, point, order)?,
        Expr::Call(Func::Pow, args) => power(e, &args[0], &args[1], point, order)?,
        Expr::Call(func, args) => {
            let u = eval_node::<S>(&args[0], point, order)?;
            let u0 = u.value();
            let k = u.order();
            let derivs: Vec<f64> = match func {
                Func::Sqrt => {
                    if u0 < 0.0 {
                        return Err(domain(e, format!("square root of negative value {u0}")));
                    }
                    if u0 == 0.0 && k > 0 {
                        return Err(domain(e, "square root is not differentiable at 0"));
                    }
                    if k == 0 {
                        vec![u0.sqrt()]
                    } else {
                        let mut d = power_derivs(e, u0, 0.5, k)?;
                        d[0] = u0.sqrt();
                        d
                    }
                }
                Func::Exp => vec![u0.exp(); k + 1],
                Func::Log => {
                    if u0 <= 0.0 {
                        return Err(domain(e, format!("logarithm of non-positive value {u0}")));
                    }
                    (0..=k)
                        .map(|n| {
                            if n == 0 {
                                u0.ln()
                            } else {
                                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                                sign * factorial(n - 1) / u0.powi(n as i32)
                            }
                        })
                        .collect()
                }
                Func::Sin => (0..=k)
                    .map(|n| match n % 4 {
                        0 => u0.sin(),
                        1 => u0.cos(),
                        2 => -u0.sin(),
                        _ => -u0.cos(),
                    })
                    .collect(),
                Func::Cos => (0..=k)
                    .map(|n| match n % 4 {
                        0 => u0.cos(),
                        1 => -u0.sin(),
                        2 => -u0.cos(),
                        _ => u0.sin(),
                    })
                    .collect(),
                Func::Abs => {
                    if u0 == 0.0 && k > 0 {
                        return Err(domain(e, "absolute value is not differentiable at 0"));
                    }
                    let mut d = vec![0.0; k + 1];
                    d[0] = u0.abs();
                    if k > 0 {
                        d[1] = u0.signum();
                    }
                    d
                }
                Func::Pow => unreachable!("handled above"),
            };
            u.compose(&derivs)
        }
    };
    if !out.value().is_finite() {
        return Err(domain(e, "non-finite result"));
    }
    Ok(out)
}

fn reciprocal<S: Scalar>(u: &S) -> S {
    let u0 = u.value();
    let derivs: Vec<f64> = (0..=u.order())
        .map(|n| {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            sign * factorial(n) / u0.powi(n as i32 + 1)
        })
        .collect();
    u.compose(&derivs)
}

fn power<S: Scalar>(e: &Expr, base: &Expr, exponent: &Expr, point: &[f64; 8], order: usize) -> Result<S, DomainError> {
    let u = eval_node::<S>(base, point, order)?;
    if exponent.is_constant_tree() {
        let r = eval_node::<f64>(exponent, point, 0)?;
        let derivs = power_derivs(e, u.value(), r, u.order())?;
        return Ok(u.compose(&derivs));
    }
    // a^b = exp(b log a) for a position-dependent exponent
    let u0 = u.value();
    if u0 <= 0.0 {
        return Err(domain(e, format!("non-positive base {u0} with variable exponent")));
    }
    let k = u.order();
    let log_derivs: Vec<f64> = (0..=k)
        .map(|n| {
            if n == 0 {
                u0.ln()
            } else {
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                sign * factorial(n - 1) / u0.powi(n as i32)
            }
        })
        .collect();
    let log_u = u.compose(&log_derivs);
    let v = eval_node::<S>(exponent, point, order)?;
    let prod = v.times(&log_u);
    let p0 = prod.value().exp();
    Ok(prod.compose(&vec![p0; prod.order() + 1]))
}
