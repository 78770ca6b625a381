use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavepot_core::expr::{BinOp, Expr, Expression, Func};
use wavepot_core::{Error, Grid};

const NAMES: [&str; 6] = ["x", "y", "z", "t", "m", "w"];

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-100.0f64..100.0).prop_map(Expr::Num),
        (0usize..NAMES.len()).prop_map(|i| Expr::Var(NAMES[i].to_string())),
    ];
    leaf.prop_recursive(6, 48, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        let func = prop_oneof![
            Just(Func::Sin),
            Just(Func::Cos),
            Just(Func::Exp),
            Just(Func::Tanh),
            Just(Func::Sqrt),
            Just(Func::Abs),
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(o, a, b)| Expr::Binary(o, Box::new(a), Box::new(b))),
            (func, inner).prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn same_value(a: f64, b: f64) -> bool {
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    if a == b {
        return true;
    }
    (a - b).abs() <= 1e-15 * a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_expression_reparses_to_equal_values(tree in arb_expr(), seed in any::<u64>()) {
        let printed = tree.to_string();
        let reparsed = Expression::parse(&printed).unwrap();
        let original = Expression::parse(&reparsed.to_string()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slots: Vec<&str> = NAMES.to_vec();
        let empty = HashMap::new();
        let a = reparsed.compile(&empty, &slots).unwrap();
        let b = original.compile(&empty, &slots).unwrap();
        for _ in 0..100 {
            let args: Vec<f64> = (0..NAMES.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let direct = eval_tree(&tree, &args);
            let va = a.eval(&args);
            let vb = b.eval(&args);
            prop_assert!(same_value(direct, va), "{printed}: {direct} vs {va}");
            prop_assert!(same_value(va, vb));
        }
    }

    #[test]
    fn parse_is_total_on_arbitrary_text(text in "\\PC{0,40}") {
        match Expression::parse(&text) {
            Ok(_) => {}
            Err(Error::Syntax { offset, .. }) | Err(Error::UnknownFunction { offset, .. }) => {
                prop_assert!(offset <= text.len());
            }
            Err(other) => prop_assert!(false, "unexpected error kind {other:?}"),
        }
    }

    #[test]
    fn parse_is_total_on_expression_alphabet(text in "[-+*/^() .0-9a-z]{0,30}") {
        match Expression::parse(&text) {
            Ok(_) => {}
            Err(Error::Syntax { offset, .. }) | Err(Error::UnknownFunction { offset, .. }) => {
                prop_assert!(offset <= text.len());
            }
            Err(other) => prop_assert!(false, "unexpected error kind {other:?}"),
        }
    }
}

/// Independent tree-walking evaluator used as the oracle.
fn eval_tree(e: &Expr, args: &[f64]) -> f64 {
    match e {
        Expr::Num(v) => *v,
        Expr::Var(n) => args[NAMES.iter().position(|s| s == n).unwrap()],
        Expr::Neg(a) => -eval_tree(a, args),
        Expr::Binary(op, a, b) => {
            let (x, y) = (eval_tree(a, args), eval_tree(b, args));
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow => x.powf(y),
            }
        }
        Expr::Call(f, a) => {
            let x = eval_tree(a, args);
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Tanh => x.tanh(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
            }
        }
    }
}

fn bind(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn documented_examples() {
    let e = Expression::parse("x^2").unwrap();
    assert_eq!(e.eval(&bind(&[("x", 2.0)])).unwrap(), 4.0);
    let e = Expression::parse("0.5*m*w^2*x^2").unwrap();
    assert_eq!(e.eval(&bind(&[("m", 1.0), ("w", 2.0), ("x", 1.0)])).unwrap(), 2.0);
    assert!(matches!(Expression::parse("2+*3"), Err(Error::Syntax { offset: 2, .. })));
}

#[test]
fn precedence_and_associativity() {
    let v = |s: &str| Expression::parse(s).unwrap().eval(&HashMap::new()).unwrap();
    assert_eq!(v("-2^2"), -4.0);
    assert_eq!(v("2^3^2"), 512.0);
    assert_eq!(v("8/4/2"), 1.0);
    assert_eq!(v("1-2-3"), -4.0);
    assert_eq!(v("2*-3"), -6.0);
    assert_eq!(v(" 1 +\t2 * 3 "), 7.0);
    assert_eq!(v("abs(-3)"), 3.0);
}

#[test]
fn sampling_binds_coordinates_and_constants() {
    let l = 2.0;
    let g = Grid::line(8, l).unwrap();
    let zero = Expression::parse("0").unwrap().sample(&g, &HashMap::new(), 0.0).unwrap();
    assert_eq!(zero.norm_max(), 0.0);
    let mode = Expression::parse("sin(2*pi*x/L)")
        .unwrap()
        .sample(&g, &bind(&[("L", l)]), 0.0)
        .unwrap();
    for (i, v) in mode.data().iter().enumerate() {
        let x = i as f64 * l / 8.0;
        assert!((v - (2.0 * std::f64::consts::PI * x / l).sin()).abs() < 1e-15);
    }
    assert!(matches!(
        Expression::parse("1/x").unwrap().sample(&g, &HashMap::new(), 0.0),
        Err(Error::NonFiniteSample { .. })
    ));
    assert!(matches!(
        Expression::parse("k*x").unwrap().sample(&g, &HashMap::new(), 0.0),
        Err(Error::UnboundVariable(name)) if name == "k"
    ));
    assert!(matches!(
        Expression::parse("sinh(x)"),
        Err(Error::UnknownFunction { offset: 0, .. })
    ));
}
