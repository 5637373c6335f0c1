#![allow(dead_code)]

use std::path::PathBuf;

use charmax::expr::{BinOp, Func};
use charmax::pipeline::Pipeline;
use charmax::{Expr, Var};
use proptest::prelude::*;

pub const EXAMPLES: [&str; 4] = ["ode", "cap", "burgers_linear", "burgers_reciprocal"];

pub fn load(name: &str) -> Pipeline {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(format!("{name}.json"));
    Pipeline::load(path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (-12i32..=12).prop_map(|k| Expr::Const(k as f64 / 4.0)),
        Just(Expr::Var(Var::T)),
        Just(Expr::Var(Var::X(0))),
        Just(Expr::Var(Var::U)),
    ]
}

fn func() -> impl Strategy<Value = Func> {
    prop_oneof![
        Just(Func::Exp),
        Just(Func::Log),
        Just(Func::Sin),
        Just(Func::Cos),
        Just(Func::Sqrt),
    ]
}

fn binop() -> impl Strategy<Value = BinOp> {
    prop_oneof![Just(BinOp::Add), Just(BinOp::Sub), Just(BinOp::Mul), Just(BinOp::Div)]
}

/// Raw trees in `t, x1, u`, built without the folding constructors.
pub fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (func(), inner.clone()).prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
            (binop(), inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (inner.clone(), -3i32..=4).prop_map(|(a, k)| Expr::Binary(
                BinOp::Pow,
                Box::new(a),
                Box::new(Expr::Const(k as f64))
            )),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Binary(BinOp::Pow, Box::new(a), Box::new(b))),
        ]
    })
}

pub fn var() -> impl Strategy<Value = Var> {
    prop_oneof![Just(Var::T), Just(Var::X(0)), Just(Var::U)]
}

pub fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.5f64..1.5, 3)
}
