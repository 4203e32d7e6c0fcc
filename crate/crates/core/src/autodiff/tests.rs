use super::*;
use proptest::prelude::*;

#[test]
fn leaf_roundtrip_and_param_enumeration() {
    let mut t = Tape::new();
    let a = t.leaf(3.0, false);
    assert_eq!(t.value(a), 3.0);
    let z = t.leaf(-0.0, false);
    assert_eq!(t.value(z).to_bits(), (-0.0f64).to_bits());
    let p = t.leaf(1.0, true);
    let q = t.leaf(2.0, true);
    let s = t.add(p, q);
    assert_eq!(t.backward(s).len(), 2);
}

#[test]
fn binary_local_partials() {
    let mut t = Tape::new();
    let a = t.constant(2.0);
    let b = t.constant(3.0);
    let m = t.mul(a, b);
    assert_eq!(t.value(m), 6.0);
    assert_eq!(t.partials(m), &[3.0, 2.0]);

    let x = t.constant(1.7);
    let z = t.constant(0.0);
    let s = t.add(x, z);
    assert_eq!(t.value(s), 1.7);

    let one = t.constant(1.0);
    let four = t.constant(4.0);
    let d = t.div(one, four).unwrap();
    assert_eq!(t.value(d), 0.25);
    assert_eq!(t.partials(d), &[0.25, -0.0625]);
}

#[test]
fn div_by_zero_names_the_op() {
    let mut t = Tape::new();
    let a = t.constant(1.0);
    let b = t.constant(0.0);
    let err = t.div(a, b).unwrap_err();
    assert!(err.to_string().contains("div"));
    let n = t.constant(-1.0);
    assert!(matches!(t.sqrt(n), Err(AutodiffError::Domain { op: "sqrt", .. })));
    assert!(matches!(t.ln(b), Err(AutodiffError::Domain { op: "ln", .. })));
}

#[test]
fn unary_local_partials() {
    let mut t = Tape::new();
    let z = t.constant(0.0);
    let th = t.tanh(z);
    assert_eq!((t.value(th), t.partials(th)[0]), (0.0, 1.0));
    let s = t.sin(z);
    assert_eq!((t.value(s), t.partials(s)[0]), (0.0, 1.0));
    let c = t.cos(z);
    assert_eq!(t.value(c), 1.0);
    assert_eq!(t.partials(c)[0], 0.0);
    let three = t.constant(3.0);
    let sq = t.square(three);
    assert_eq!((t.value(sq), t.partials(sq)[0]), (9.0, 6.0));
    let a = t.abs(z);
    assert_eq!(t.partials(a)[0], 0.0);
}

#[test]
fn backward_examples() {
    let mut t = Tape::new();
    let x = t.param(2.0);
    let y = t.param(3.0);
    let l = t.mul(x, y);
    assert_eq!(t.backward(l).as_slice(), &[3.0, 2.0]);

    let mut t = Tape::new();
    let x = t.param(0.0);
    let l = t.tanh(x);
    assert_eq!(t.backward(l).as_slice(), &[1.0]);

    let mut t = Tape::new();
    let x = t.param(2.0);
    let x2 = t.square(x);
    let l = t.mul(x2, x2);
    assert_eq!(t.backward(l).as_slice(), &[32.0]);
}

#[test]
fn non_parameter_leaves_are_not_reported() {
    let mut t = Tape::new();
    let c = t.constant(5.0);
    let x = t.param(2.0);
    let l = t.mul(c, x);
    assert_eq!(t.backward(l).as_slice(), &[5.0]);
}

#[test]
fn matmul_matches_scalar_products() {
    let mut t = Tape::new();
    let a = t.register_params(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]); // 2x3
    let b = t.register_params(&[0.5, -0.5]);
    let xs: Vec<Var> = [1.0, 2.0, -1.0, 0.5, 3.0, 1.5].iter().map(|&v| t.param(v)).collect(); // 3x2
    let out = t.matmul(a, 2, 3, &xs, 2, Some(b));
    // row 0: [1,2,3]·col0 [1,-1,3] = 8 (+0.5), col1 [2,0.5,1.5] = 7.5
    assert_eq!(t.value(out), 8.5);
    assert_eq!(t.value(out.offset(1)), 7.5);
    assert_eq!(t.value(out.offset(2)), 4.0 - 5.0 + 18.0 - 0.5);
    let w: Vec<(f64, Var)> = (0..4).map(|k| ((k + 1) as f64, out.offset(k))).collect();
    let l = t.linear_combination(&w, 0.0);
    let g = t.backward(l);
    // dL/dA[0][0] = 1*x00 + 2*x01 = 1 + 4
    assert_eq!(g.as_slice()[0], 5.0);
    // dL/db = (1, 3)
    assert_eq!(&g.as_slice()[6..8], &[1.0, 3.0]);
    // dL/dx00 = 1*A00 + 3*A10 = 1 + 12
    assert_eq!(g.as_slice()[8], 13.0);
}

#[test]
fn grad_check_examples() {
    let e = grad_check(|t, v| Ok(t.square(v[0])), &[3.0], 1e-5).unwrap();
    assert!(e < 1e-6, "{e}");
    let e = grad_check(|t, _| Ok(t.constant(4.0)), &[1.0], 1e-5).unwrap();
    assert_eq!(e, 0.0);
    let e = grad_check(
        |t, v| {
            let s = t.sin(v[0]);
            let c = t.cos(v[1]);
            Ok(t.mul(s, c))
        },
        &[0.3, 0.7],
        1e-5,
    )
    .unwrap();
    assert!(e < 1e-6, "{e}");
}

#[test]
fn jet_input_seeding() {
    let mut t = Tape::new();
    let j = t.jet_input(0.5, 0, 2).unwrap();
    assert_eq!(j.values(&t), vec![0.5, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let j = t.jet_input(1.0, 1, 2).unwrap();
    assert_eq!(t.value(j.grad(1)), 1.0);
    let j = t.jet_input(1.0, 2, 3).unwrap();
    assert_eq!(j.grads().len(), 3);
    assert_eq!(j.hess_slots().len(), 6);
    assert!(t.jet_input(1.0, 2, 2).is_err());
}

#[test]
fn jet_broadcast_examples() {
    let mut t = Tape::new();
    let w = t.param(1.5);
    let b = t.jet_broadcast(w, 2, JetOrder::Second);
    assert_eq!(b.values(&t)[1..3], [0.0, 0.0]);
    let x = t.jet_input(0.3, 0, 1).unwrap();
    let bw = t.jet_broadcast(w, 1, JetOrder::Second);
    let p = t.jet_mul(&x, &bw).unwrap();
    assert_eq!(t.value(p.grad(0)), 1.5);
    let zero = t.constant(0.0);
    let z = t.jet_broadcast(zero, 1, JetOrder::Second);
    let s = t.jet_add(&x, &z).unwrap();
    assert_eq!(s.values(&t), x.values(&t));
}

#[test]
fn jet_arithmetic_examples() {
    let mut t = Tape::new();
    let a = t.jet_input(2.0, 0, 1).unwrap();
    let sq = t.jet_mul(&a, &a).unwrap();
    assert_eq!(sq.values(&t), vec![4.0, 4.0, 2.0]);
    let z = t.jet_input(0.0, 0, 1).unwrap();
    assert_eq!(t.jet_tanh(&z).values(&t), vec![0.0, 1.0, 0.0]);
    assert_eq!(t.jet_sin(&z).values(&t), vec![0.0, 1.0, 0.0]);
    let x = t.jet_input(1.0, 0, 2).unwrap();
    let y = t.jet_input(1.0, 1, 3).unwrap();
    assert!(t.jet_add(&x, &y).is_err());
}

#[test]
fn hess_index_layout() {
    assert_eq!(hess_index(2, 0, 0), 0);
    assert_eq!(hess_index(2, 0, 1), 1);
    assert_eq!(hess_index(2, 1, 0), 1);
    assert_eq!(hess_index(2, 1, 1), 2);
    let slots: Vec<usize> = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
        .iter()
        .map(|&(i, j)| hess_index(3, i, j))
        .collect();
    assert_eq!(slots, vec![0, 1, 2, 3, 4, 5]);
}

/// Small expression language evaluated three ways: plain `f64` (the oracle),
/// on the scalar tape, and through jets.
#[derive(Clone, Debug)]
enum Expr {
    X,
    Y,
    Const(f64),
    Un(UnaryOp, Box<Expr>),
    Bin(BinaryOp, Box<Expr>, Box<Expr>),
}

fn eval_f64(e: &Expr, x: f64, y: f64) -> f64 {
    match e {
        Expr::X => x,
        Expr::Y => y,
        Expr::Const(c) => *c,
        Expr::Un(op, a) => {
            let v = eval_f64(a, x, y);
            match op {
                UnaryOp::Tanh => v.tanh(),
                UnaryOp::Sin => v.sin(),
                UnaryOp::Cos => v.cos(),
                UnaryOp::Exp => v.exp(),
                UnaryOp::Neg => -v,
                UnaryOp::Square => v * v,
                UnaryOp::Sqrt => v.sqrt(),
                UnaryOp::Ln => v.ln(),
                UnaryOp::Abs => v.abs(),
                UnaryOp::Recip => 1.0 / v,
            }
        }
        Expr::Bin(op, a, b) => {
            let (u, v) = (eval_f64(a, x, y), eval_f64(b, x, y));
            match op {
                BinaryOp::Add => u + v,
                BinaryOp::Sub => u - v,
                BinaryOp::Mul => u * v,
                BinaryOp::Div => u / v,
            }
        }
    }
}

fn eval_tape(e: &Expr, t: &mut Tape, x: Var, y: Var) -> Var {
    match e {
        Expr::X => x,
        Expr::Y => y,
        Expr::Const(c) => t.constant(*c),
        Expr::Un(op, a) => {
            let v = eval_tape(a, t, x, y);
            t.unary(*op, v).unwrap()
        }
        Expr::Bin(op, a, b) => {
            let u = eval_tape(a, t, x, y);
            let v = eval_tape(b, t, x, y);
            t.binary(*op, u, v).unwrap()
        }
    }
}

fn eval_jet(e: &Expr, t: &mut Tape, x: &Jet, y: &Jet) -> Jet {
    match e {
        Expr::X => *x,
        Expr::Y => *y,
        Expr::Const(c) => t.jet_constant(*c, 2, JetOrder::Second),
        Expr::Un(op, a) => {
            let v = eval_jet(a, t, x, y);
            t.jet_unary(*op, &v).unwrap()
        }
        Expr::Bin(op, a, b) => {
            let u = eval_jet(a, t, x, y);
            let v = eval_jet(b, t, x, y);
            match op {
                BinaryOp::Add => t.jet_add(&u, &v).unwrap(),
                BinaryOp::Sub => t.jet_sub(&u, &v).unwrap(),
                BinaryOp::Mul => t.jet_mul(&u, &v).unwrap(),
                BinaryOp::Div => t.jet_div(&u, &v).unwrap(),
            }
        }
    }
}

/// Guards domain-restricted primitives so every generated expression is smooth.
fn safe_wrap(op: UnaryOp, a: Expr) -> Expr {
    let positive = |a: Expr| {
        Expr::Bin(
            BinaryOp::Add,
            Box::new(Expr::Un(UnaryOp::Square, Box::new(a))),
            Box::new(Expr::Const(1.0)),
        )
    };
    match op {
        UnaryOp::Sqrt | UnaryOp::Ln | UnaryOp::Recip => Expr::Un(op, Box::new(positive(a))),
        UnaryOp::Exp => Expr::Un(op, Box::new(Expr::Un(UnaryOp::Tanh, Box::new(a)))),
        _ => Expr::Un(op, Box::new(a)),
    }
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![Just(Expr::X), Just(Expr::Y), (-2.0f64..2.0).prop_map(Expr::Const)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Tanh),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Exp),
            Just(UnaryOp::Neg),
            Just(UnaryOp::Square),
            Just(UnaryOp::Sqrt),
            Just(UnaryOp::Ln),
            Just(UnaryOp::Recip),
        ];
        let binary = prop_oneof![Just(BinaryOp::Add), Just(BinaryOp::Sub), Just(BinaryOp::Mul)];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, a)| safe_wrap(op, a)),
            (binary, inner.clone(), inner).prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
        ]
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn backward_matches_central_differences(
        e in expr_strategy(),
        pts in proptest::collection::vec((-1.5f64..1.5, -1.5f64..1.5), 10),
    ) {
        let h = 1e-5;
        for (x, y) in pts {
            let mut t = Tape::new();
            let vx = t.param(x);
            let vy = t.param(y);
            let out = eval_tape(&e, &mut t, vx, vy);
            prop_assert!(rel(t.value(out), eval_f64(&e, x, y)) < 1e-14);
            let g = t.backward(out);
            let fx = (eval_f64(&e, x + h, y) - eval_f64(&e, x - h, y)) / (2.0 * h);
            let fy = (eval_f64(&e, x, y + h) - eval_f64(&e, x, y - h)) / (2.0 * h);
            prop_assert!(rel(g.as_slice()[0], fx) < 1e-5, "{} vs {}", g.as_slice()[0], fx);
            prop_assert!(rel(g.as_slice()[1], fy) < 1e-5, "{} vs {}", g.as_slice()[1], fy);
        }
    }

    #[test]
    fn jets_match_finite_differences(
        e in expr_strategy(),
        x in -1.5f64..1.5,
        y in -1.5f64..1.5,
    ) {
        let h = 1e-4;
        let mut t = Tape::new();
        let jx = t.jet_input(x, 0, 2).unwrap();
        let jy = t.jet_input(y, 1, 2).unwrap();
        let j = eval_jet(&e, &mut t, &jx, &jy);
        let f = |a: f64, b: f64| eval_f64(&e, a, b);
        let f0 = f(x, y);
        let fx = (f(x + h, y) - f(x - h, y)) / (2.0 * h);
        let fy = (f(x, y + h) - f(x, y - h)) / (2.0 * h);
        let fxx = (f(x + h, y) - 2.0 * f0 + f(x - h, y)) / (h * h);
        let fyy = (f(x, y + h) - 2.0 * f0 + f(x, y - h)) / (h * h);
        let fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
        prop_assert!(rel(t.value(j.val()), f0) < 1e-12);
        for (got, want) in [
            (t.value(j.grad(0)), fx),
            (t.value(j.grad(1)), fy),
            (t.value(j.hess(0, 0)), fxx),
            (t.value(j.hess(0, 1)), fxy),
            (t.value(j.hess(1, 1)), fyy),
        ] {
            prop_assert!(rel(got, want) < 1e-4, "{} vs {}", got, want);
        }
    }

    #[test]
    fn backward_is_linear(e1 in expr_strategy(), e2 in expr_strategy(),
                          alpha in -3.0f64..3.0, beta in -3.0f64..3.0,
                          x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let grads = |e: &Expr| {
            let mut t = Tape::new();
            let vx = t.param(x);
            let vy = t.param(y);
            let out = eval_tape(e, &mut t, vx, vy);
            t.backward(out)
        };
        let (g1, g2) = (grads(&e1), grads(&e2));
        let mut t = Tape::new();
        let vx = t.param(x);
        let vy = t.param(y);
        let a = eval_tape(&e1, &mut t, vx, vy);
        let b = eval_tape(&e2, &mut t, vx, vy);
        let l = t.linear_combination(&[(alpha, a), (beta, b)], 0.0);
        let g = t.backward(l);
        for k in 0..2 {
            let want = alpha * g1.as_slice()[k] + beta * g2.as_slice()[k];
            let scale = (alpha * g1.as_slice()[k]).abs() + (beta * g2.as_slice()[k]).abs() + 1.0;
            prop_assert!((g.as_slice()[k] - want).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn rebuild_is_bit_identical(e in expr_strategy(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let run = || {
            let mut t = Tape::new();
            let jx = t.jet_input(x, 0, 2).unwrap();
            let jy = t.jet_input(y, 1, 2).unwrap();
            let j = eval_jet(&e, &mut t, &jx, &jy);
            let mut bits: Vec<u64> = j.values(&t).iter().map(|v| v.to_bits()).collect();
            let vx = t.param(x);
            let vy = t.param(y);
            let out = eval_tape(&e, &mut t, vx, vy);
            bits.extend(t.backward(out).as_slice().iter().map(|v| v.to_bits()));
            (bits, t.len())
        };
        prop_assert_eq!(run(), run());
    }
}
