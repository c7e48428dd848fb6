//! Truncated multivariate Taylor series ("jets") in the eight tangent-bundle
//! coordinates.
//!
//! A jet of order `k` stores the Taylor coefficients `c_α = ∂^α f / α!` for
//! every multi-index `|α| ≤ k`. Monomials are laid out by total degree, so
//! the coefficients of any lower order form a prefix of the storage and
//! truncation is a slice. Products and derivatives go through tables built
//! once for the maximal order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

pub const NVARS: usize = 8;
pub const MAX_ORDER: usize = 4;

/// Exponents of one monomial, indexed by variable slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub [u8; NVARS]);

impl MultiIndex {
    pub fn zero() -> Self {
        MultiIndex([0; NVARS])
    }

    /// Multi-index counting how often each slot appears in `slots`.
    pub fn from_slots(slots: &[usize]) -> Self {
        let mut e = [0u8; NVARS];
        for &s in slots {
            e[s] += 1;
        }
        MultiIndex(e)
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// α! = Π α_v!
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e as usize)).product()
    }

    /// Expand into a sorted list of slots, e.g. ∂²/∂x0∂y1 → [0, 5].
    pub fn slots(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.degree());
        for (v, &e) in self.0.iter().enumerate() {
            out.extend(std::iter::repeat_n(v, e as usize));
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree() == 0 {
            return write!(f, "∅");
        }
        let names: Vec<String> = self
            .slots()
            .into_iter()
            .map(|s| if s < 4 { format!("x{s}") } else { format!("y{}", s - 4) })
            .collect();
        write!(f, "{}", names.join(","))
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

struct Tables {
    monomials: Vec<MultiIndex>,
    /// `len[k]` = number of monomials of degree ≤ k.
    len: [usize; MAX_ORDER + 1],
    /// (i, j, k) with monomial i · monomial j = monomial k, ordered by deg k.
    mul: Vec<(u16, u16, u16)>,
    /// `mul_end[k]` = number of product triples whose result has degree ≤ k.
    mul_end: [usize; MAX_ORDER + 1],
    /// Per variable: (src, dst, factor) with ∂_v monomial src = factor · monomial dst,
    /// ordered by source degree.
    diff: Vec<Vec<(u16, u16, f64)>>,
    /// `diff_end[v][k]` = number of entries with source degree ≤ k.
    diff_end: Vec<[usize; MAX_ORDER + 1]>,
    unit: [usize; NVARS],
}

impl Tables {
    fn build() -> Tables {
        let mut monomials = Vec::new();
        let mut len = [0; MAX_ORDER + 1];
        for d in 0..=MAX_ORDER {
            let mut exps = [0u8; NVARS];
            push_degree(d, 0, &mut exps, &mut monomials);
            len[d] = monomials.len();
        }
        let lookup: std::collections::HashMap<MultiIndex, usize> =
            monomials.iter().enumerate().map(|(i, m)| (*m, i)).collect();

        let mut mul = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if a.degree() + b.degree() > MAX_ORDER {
                    continue;
                }
                let mut e = [0u8; NVARS];
                for v in 0..NVARS {
                    e[v] = a.0[v] + b.0[v];
                }
                let k = lookup[&MultiIndex(e)];
                mul.push((i as u16, j as u16, k as u16));
            }
        }
        mul.sort_by_key(|&(_, _, k)| (monomials[k as usize].degree(), k));
        let mut mul_end = [0; MAX_ORDER + 1];
        for d in 0..=MAX_ORDER {
            mul_end[d] = mul
                .iter()
                .take_while(|&&(_, _, k)| monomials[k as usize].degree() <= d)
                .count();
        }

        let mut diff = Vec::with_capacity(NVARS);
        let mut diff_end = Vec::with_capacity(NVARS);
        for v in 0..NVARS {
            let mut entries = Vec::new();
            for (src, m) in monomials.iter().enumerate() {
                if m.0[v] == 0 {
                    continue;
                }
                let mut e = m.0;
                e[v] -= 1;
                let dst = lookup[&MultiIndex(e)];
                entries.push((src as u16, dst as u16, m.0[v] as f64));
            }
            let mut ends = [0; MAX_ORDER + 1];
            for d in 0..=MAX_ORDER {
                ends[d] = entries
                    .iter()
                    .take_while(|&&(src, _, _)| monomials[src as usize].degree() <= d)
                    .count();
            }
            diff.push(entries);
            diff_end.push(ends);
        }

        let mut unit = [0; NVARS];
        for (v, u) in unit.iter_mut().enumerate() {
            let mut e = [0u8; NVARS];
            e[v] = 1;
            *u = lookup[&MultiIndex(e)];
        }

        Tables {
            monomials,
            len,
            mul,
            mul_end,
            diff,
            diff_end,
            unit,
        }
    }

    fn index_of(&self, m: &MultiIndex) -> Option<usize> {
        let d = m.degree();
        if d > MAX_ORDER {
            return None;
        }
        let start = if d == 0 { 0 } else { self.len[d - 1] };
        self.monomials[start..self.len[d]]
            .iter()
            .position(|x| x == m)
            .map(|p| p + start)
    }
}

// Monomials of one degree, in lexicographic order (first slot largest first).
fn push_degree(remaining: usize, slot: usize, exps: &mut [u8; NVARS], out: &mut Vec<MultiIndex>) {
    if slot == NVARS - 1 {
        exps[slot] = remaining as u8;
        out.push(MultiIndex(*exps));
        exps[slot] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[slot] = e as u8;
        push_degree(remaining - e, slot + 1, exps, out);
    }
    exps[slot] = 0;
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(Tables::build)
}

/// Number of stored coefficients for a jet of the given order.
pub fn coefficient_count(order: usize) -> usize {
    tables().len[order]
}

#[derive(Clone, PartialEq)]
pub struct Jet {
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("value", &self.value())
            .finish()
    }
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        let mut coeffs = vec![0.0; coefficient_count(order)];
        coeffs[0] = value;
        Jet { order, coeffs }
    }

    pub fn zero(order: usize) -> Jet {
        Jet::constant(0.0, order)
    }

    /// The coordinate function for `slot`, expanded at `value`.
    pub fn variable(slot: usize, value: f64, order: usize) -> Jet {
        let mut j = Jet::constant(value, order);
        if order >= 1 {
            j.coeffs[tables().unit[slot]] = 1.0;
        }
        j
    }

    /// Build a jet from explicit partial derivatives (not Taylor coefficients).
    pub fn from_partials(order: usize, partial: impl Fn(&MultiIndex) -> f64) -> Jet {
        let t = tables();
        let coeffs = t.monomials[..t.len[order]]
            .iter()
            .map(|m| partial(m) / m.factorial())
            .collect();
        Jet { order, coeffs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Partial derivative ∂^α f at the expansion point.
    ///
    /// Panics if `|α|` exceeds the jet order.
    pub fn partial(&self, alpha: &MultiIndex) -> f64 {
        assert!(
            alpha.degree() <= self.order,
            "partial of degree {} requested from order-{} jet",
            alpha.degree(),
            self.order
        );
        let idx = tables().index_of(alpha).expect("multi-index within table");
        self.coeffs[idx] * alpha.factorial()
    }

    /// Partial derivative along the listed slots, e.g. `&[4, 5]` for ∂²/∂y0∂y1.
    pub fn d(&self, slots: &[usize]) -> f64 {
        self.partial(&MultiIndex::from_slots(slots))
    }

    /// Every stored partial derivative with its multi-index.
    pub fn partials(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        tables().monomials[..self.coeffs.len()]
            .iter()
            .zip(&self.coeffs)
            .map(|(m, c)| (*m, c * m.factorial()))
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            order,
            coeffs: self.coeffs[..coefficient_count(order)].to_vec(),
        }
    }

    /// Exact partial derivative along one slot; the result has one order less.
    pub fn derivative(&self, slot: usize) -> Jet {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let t = tables();
        let order = self.order - 1;
        let mut coeffs = vec![0.0; t.len[order]];
        for &(src, dst, factor) in &t.diff[slot][..t.diff_end[slot][self.order]] {
            coeffs[dst as usize] += factor * self.coeffs[src as usize];
        }
        Jet { order, coeffs }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        let t = tables();
        let order = self.order.min(other.order);
        let mut coeffs = vec![0.0; t.len[order]];
        for &(i, j, k) in &t.mul[..t.mul_end[order]] {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet { order, coeffs }
    }

    /// `self += a * b`, truncated to the order of `self`.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let t = tables();
        let order = self.order.min(a.order).min(b.order);
        if order < self.order {
            self.coeffs.truncate(t.len[order]);
            self.order = order;
        }
        for &(i, j, k) in &t.mul[..t.mul_end[order]] {
            self.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let order = self.order.min(other.order);
        let n = coefficient_count(order);
        Jet {
            order,
            coeffs: (0..n).map(|i| f(self.coeffs[i], other.coeffs[i])).collect(),
        }
    }

    /// Compose a univariate function with this jet, given the derivatives
    /// `f(u0), f'(u0), …, f^(k)(u0)` at the jet's value.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        assert!(derivs.len() > self.order, "need {} derivatives", self.order + 1);
        let mut out = Jet::constant(derivs[0], self.order);
        if self.order == 0 {
            return out;
        }
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut power = h.clone();
        for (n, &dn) in derivs.iter().enumerate().take(self.order + 1).skip(1) {
            if n > 1 {
                power = power.mul_jet(&h);
            }
            let c = dn / factorial(n);
            if c != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += c * p;
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let u0 = self.value();
        let derivs: Vec<f64> = (0..=self.order)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * factorial(n) / u0.powi(n as i32 + 1)
            })
            .collect();
        self.compose(&derivs)
    }

    /// True if every coefficient beyond the value vanishes.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|&c| c == 0.0)
    }

    /// Largest absolute difference between matching partial derivatives.
    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        self.partials()
            .zip(other.partials())
            .map(|((_, a), (_, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                $body(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                $body(&self, &rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                $body(&self, rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                $body(self, &rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a: &Jet, b: &Jet| a.zip_with(b, |x, y| x + y));
forward_binop!(Sub, sub, |a: &Jet, b: &Jet| a.zip_with(b, |x, y| x - y));
forward_binop!(Mul, mul, |a: &Jet, b: &Jet| a.mul_jet(b));

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        self.scale(s)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_sizes() {
        // C(8 + k, k)
        assert_eq!(coefficient_count(0), 1);
        assert_eq!(coefficient_count(1), 9);
        assert_eq!(coefficient_count(2), 45);
        assert_eq!(coefficient_count(3), 165);
        assert_eq!(coefficient_count(4), 495);
        // product pairs = monomials in 16 variables of degree ≤ 4
        assert_eq!(tables().mul.len(), 4845);
    }

    #[test]
    fn product_rule_on_polynomial() {
        // f = x0² · y1 at (2, 3)
        let x0 = Jet::variable(0, 2.0, 3);
        let y1 = Jet::variable(5, 3.0, 3);
        let f = &(&x0 * &x0) * &y1;
        assert_eq!(f.value(), 12.0);
        assert_eq!(f.d(&[0]), 12.0);
        assert_eq!(f.d(&[5]), 4.0);
        assert_eq!(f.d(&[0, 0]), 6.0);
        assert_eq!(f.d(&[0, 5]), 4.0);
        assert_eq!(f.d(&[0, 0, 5]), 2.0);
        assert_eq!(f.d(&[0, 0, 0]), 0.0);
    }

    #[test]
    fn derivative_lowers_order() {
        let x0 = Jet::variable(0, 1.5, 4);
        let f = &(&x0 * &x0) * &x0;
        let df = f.derivative(0);
        assert_eq!(df.order(), 3);
        assert!((df.value() - 3.0 * 1.5 * 1.5).abs() < 1e-15);
        assert!((df.d(&[0]) - 6.0 * 1.5).abs() < 1e-15);
    }

    #[test]
    fn recip_series() {
        let x = Jet::variable(4, 2.0, 4);
        let r = x.recip();
        assert!((r.value() - 0.5).abs() < 1e-15);
        assert!((r.d(&[4]) + 0.25).abs() < 1e-15);
        assert!((r.d(&[4, 4]) - 0.25).abs() < 1e-15);
        assert!((r.d(&[4, 4, 4, 4]) - 24.0 / 32.0).abs() < 1e-14);
    }

    #[test]
    fn mixed_order_truncates() {
        let a = Jet::variable(0, 1.0, 4);
        let b = Jet::variable(1, 1.0, 2);
        assert_eq!((&a * &b).order(), 2);
        assert_eq!((&a + &b).order(), 2);
        assert_eq!(a.truncate(1).partials().count(), 9);
    }
}
