use std::fmt;

/// One of the eight coordinates on the tangent bundle: positions `x0..x3`
/// occupy slots 0..4 and directions `y0..y3` slots 4..8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(u8);

impl Var {
    pub const COUNT: usize = 8;

    pub fn new(slot: usize) -> Option<Var> {
        (slot < Self::COUNT).then_some(Var(slot as u8))
    }

    pub fn x(i: usize) -> Var {
        assert!(i < 4, "position index out of range: {i}");
        Var(i as u8)
    }

    pub fn y(a: usize) -> Var {
        assert!(a < 4, "direction index out of range: {a}");
        Var(4 + a as u8)
    }

    pub fn slot(self) -> usize {
        self.0 as usize
    }

    pub fn is_direction(self) -> bool {
        self.0 >= 4
    }

    pub fn from_name(name: &str) -> Option<Var> {
        let bytes = name.as_bytes();
        if bytes.len() != 2 || !(b'0'..=b'3').contains(&bytes[1]) {
            return None;
        }
        let i = (bytes[1] - b'0') as usize;
        match bytes[0] {
            b'x' => Some(Var::x(i)),
            b'y' => Some(Var::y(i)),
            _ => None,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_direction() {
            write!(f, "y{}", self.0 - 4)
        } else {
            write!(f, "x{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Pow,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

/// Expression tree. Literals are always non-negative when produced by the
/// parser; negation is an explicit node.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Literal constructor that keeps the parser's sign convention, so the
    /// printed form parses back to the same tree.
    pub fn num(v: f64) -> Expr {
        if v < 0.0 {
            Expr::Neg(Box::new(Expr::Num(-v)))
        } else {
            Expr::Num(v)
        }
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::Pow(Box::new(a), Box::new(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Expr {
        Expr::Call(f, args)
    }

    /// Constant value if the tree contains no variables and only literal
    /// arithmetic that can be folded without domain questions.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(a) => a.as_constant().map(|v| -v),
            _ => None,
        }
    }

    pub fn depends_on(&self, pred: &dyn Fn(Var) -> bool) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => pred(*v),
            Expr::Neg(a) => a.depends_on(pred),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.depends_on(pred) || b.depends_on(pred)
            }
            Expr::Call(_, args) => args.iter().any(|e| e.depends_on(pred)),
        }
    }

    pub fn is_constant_tree(&self) -> bool {
        !self.depends_on(&|_| true)
    }

    /// Replace every variable occurrence by the expression `f` returns for it.
    pub fn substitute(&self, f: &dyn Fn(Var) -> Option<Expr>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(v) => f(*v).unwrap_or(Expr::Var(*v)),
            Expr::Neg(a) => Expr::neg(a.substitute(f)),
            Expr::Add(a, b) => Expr::add(a.substitute(f), b.substitute(f)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(f), b.substitute(f)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(f), b.substitute(f)),
            Expr::Div(a, b) => Expr::div(a.substitute(f), b.substitute(f)),
            Expr::Pow(a, b) => Expr::pow(a.substitute(f), b.substitute(f)),
            Expr::Call(func, args) => Expr::Call(*func, args.iter().map(|e| e.substitute(f)).collect()),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) => 1 + a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                1 + a.depth().max(b.depth())
            }
            Expr::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }

    // Binding strength used by the printer; mirrors the grammar levels
    // expr < term < factor < unary < atom.
    fn level(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Pow(..) => 3,
            Expr::Neg(_) => 4,
            Expr::Num(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }

    fn fmt_at(&self, min_level: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level() < min_level {
            write!(f, "(")?;
            self.fmt_at(0, f)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                a.fmt_at(4, f)
            }
            Expr::Add(a, b) => binary(f, a, " + ", b, 1, 2),
            Expr::Sub(a, b) => binary(f, a, " - ", b, 1, 2),
            Expr::Mul(a, b) => binary(f, a, "*", b, 2, 3),
            Expr::Div(a, b) => binary(f, a, "/", b, 2, 3),
            Expr::Pow(a, b) => binary(f, a, "^", b, 4, 3),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    arg.fmt_at(0, f)?;
                }
                write!(f, ")")
            }
        }
    }
}

fn binary(f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, left: u8, right: u8) -> fmt::Result {
    a.fmt_at(left, f)?;
    write!(f, "{op}")?;
    b.fmt_at(right, f)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(0, f)
    }
}

/// Symbolic partial derivative with light constant folding.
pub fn derivative(e: &Expr, v: Var) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(w) => Expr::Num(if *w == v { 1.0 } else { 0.0 }),
        Expr::Neg(a) => s_neg(derivative(a, v)),
        Expr::Add(a, b) => s_add(derivative(a, v), derivative(b, v)),
        Expr::Sub(a, b) => s_sub(derivative(a, v), derivative(b, v)),
        Expr::Mul(a, b) => s_add(
            s_mul(derivative(a, v), (**b).clone()),
            s_mul((**a).clone(), derivative(b, v)),
        ),
        Expr::Div(a, b) => {
            let num = s_sub(
                s_mul(derivative(a, v), (**b).clone()),
                s_mul((**a).clone(), derivative(b, v)),
            );
            if is_zero(&num) {
                return Expr::Num(0.0);
            }
            Expr::div(num, Expr::pow((**b).clone(), Expr::Num(2.0)))
        }
        Expr::Pow(a, b) => power_derivative(a, b, v),
        Expr::Call(func, args) => {
            let a = &args[0];
            let da = derivative(a, v);
            if *func != Func::Pow && is_zero(&da) {
                return Expr::Num(0.0);
            }
            match func {
                Func::Sqrt => s_div(da, s_mul(Expr::Num(2.0), e.clone())),
                Func::Sin => s_mul(Expr::call(Func::Cos, vec![a.clone()]), da),
                Func::Cos => s_neg(s_mul(Expr::call(Func::Sin, vec![a.clone()]), da)),
                Func::Exp => s_mul(e.clone(), da),
                Func::Log => s_div(da, a.clone()),
                Func::Abs => s_mul(s_div(a.clone(), e.clone()), da),
                Func::Pow => power_derivative(&args[0], &args[1], v),
            }
        }
    }
}

fn power_derivative(a: &Expr, b: &Expr, v: Var) -> Expr {
    let da = derivative(a, v);
    if b.is_constant_tree() {
        if is_zero(&da) {
            return Expr::Num(0.0);
        }
        let reduced = match b.as_constant() {
            Some(c) => Expr::num(c - 1.0),
            None => Expr::sub(b.clone(), Expr::Num(1.0)),
        };
        return s_mul(s_mul(b.clone(), Expr::pow(a.clone(), reduced)), da);
    }
    // d(a^b) = a^b (b' log a + b a'/a)
    let db = derivative(b, v);
    let whole = Expr::pow(a.clone(), b.clone());
    let inner = s_add(
        s_mul(db, Expr::call(Func::Log, vec![a.clone()])),
        s_div(s_mul(b.clone(), da), a.clone()),
    );
    s_mul(whole, inner)
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}

fn s_neg(a: Expr) -> Expr {
    if is_zero(&a) {
        a
    } else {
        Expr::neg(a)
    }
}

fn s_add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        b
    } else if is_zero(&b) {
        a
    } else {
        Expr::add(a, b)
    }
}

fn s_sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        a
    } else if is_zero(&a) {
        Expr::neg(b)
    } else {
        Expr::sub(a, b)
    }
}

fn s_mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        Expr::Num(0.0)
    } else if is_one(&a) {
        b
    } else if is_one(&b) {
        a
    } else {
        Expr::mul(a, b)
    }
}

fn s_div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        Expr::Num(0.0)
    } else if is_one(&b) {
        a
    } else {
        Expr::div(a, b)
    }
}
