use super::{BinOp, Expr, Func, Var};

impl Expr {
    /// Exact derivative with respect to `var`.
    ///
    /// Powers whose exponent depends on `var` go through `exp(b·log a)`; all
    /// other powers use the power rule. Results are built with the folding
    /// constructors, so `0·e`, `1·e`, `e + 0` and constant subtrees collapse.
    pub fn diff(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Call(func, a) => {
                let da = a.diff(var);
                if da.as_const() == Some(0.0) {
                    return Expr::Const(0.0);
                }
                let a = (**a).clone();
                let outer = match func {
                    Func::Exp => Expr::call(Func::Exp, a),
                    Func::Log => return Expr::div(da, a),
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::neg(Expr::call(Func::Sin, a)),
                    Func::Sqrt => return Expr::div(da, Expr::mul(Expr::Const(2.0), Expr::call(Func::Sqrt, a))),
                };
                Expr::mul(outer, da)
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (&**a, &**b);
                match op {
                    BinOp::Add => Expr::add(a.diff(var), b.diff(var)),
                    BinOp::Sub => Expr::sub(a.diff(var), b.diff(var)),
                    BinOp::Mul => Expr::add(Expr::mul(a.diff(var), b.clone()), Expr::mul(a.clone(), b.diff(var))),
                    BinOp::Div => {
                        let da = a.diff(var);
                        let db = b.diff(var);
                        if db.as_const() == Some(0.0) {
                            return Expr::div(da, b.clone());
                        }
                        Expr::div(
                            Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                            Expr::pow(b.clone(), Expr::Const(2.0)),
                        )
                    }
                    BinOp::Pow => {
                        if b.mentions(var) {
                            let rewritten =
                                Expr::call(Func::Exp, Expr::mul(b.clone(), Expr::call(Func::Log, a.clone())));
                            return rewritten.diff(var);
                        }
                        let da = a.diff(var);
                        if da.as_const() == Some(0.0) {
                            return Expr::Const(0.0);
                        }
                        let lowered = Expr::sub(b.clone(), Expr::Const(1.0));
                        Expr::mul(Expr::mul(b.clone(), Expr::pow(a.clone(), lowered)), da)
                    }
                }
            }
        }
    }

    /// Gradient with respect to the phase variables `[t, x1..xn, u]`.
    pub fn phase_gradient(&self, n: usize) -> Vec<Expr> {
        (0..n + 2).map(|i| self.diff(Var::from_phase_index(i, n))).collect()
    }
}
