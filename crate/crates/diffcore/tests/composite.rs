use diffcore::{Adam, AdamConfig, Graph, Matrix, Var};
use proptest::prelude::*;

/// sum(softmax(relu(x·W + b)) ⊙ C) + ||normalize_cols(x·W)||² + Σ ln(1 + exp(x·W)²)
fn build(g: &mut Graph, x: &Matrix, w: &Matrix, b: &Matrix, c: &Matrix) -> (Var, Var, Var) {
    let (xv, wv, bv) = (g.constant(x.clone()), g.param(w.clone()), g.param(b.clone()));
    let lin = g.linear(xv, wv, bv).unwrap();
    let act = g.relu(lin).unwrap();
    let sm = g.softmax_rows(act).unwrap();
    let masked = g.mul_const(sm, c.clone()).unwrap();
    let t1 = g.sum(masked).unwrap();
    let xw = g.matmul(xv, wv).unwrap();
    let n = g.l2_normalize_cols(xw, 1e-12).unwrap();
    let sq = g.square(n).unwrap();
    let t2 = g.sum(sq).unwrap();
    let e = g.exp(xw).unwrap();
    let e2 = g.square(e).unwrap();
    let one = g.add_scalar(e2, 1.0).unwrap();
    let l = g.ln(one).unwrap();
    let t3 = g.sum(l).unwrap();
    (g.add_all(&[t1, t2, t3]).unwrap(), wv, bv)
}

fn value(x: &Matrix, w: &Matrix, b: &Matrix, c: &Matrix) -> f64 {
    let mut g = Graph::new();
    let (root, _, _) = build(&mut g, x, w, b, c);
    g.scalar(root)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn composite_gradient_matches_central_differences(
        x in matrix(4, 3),
        w in matrix(3, 5),
        b in matrix(1, 5),
        c in matrix(4, 5),
    ) {
        let mut g = Graph::new();
        let (root, wv, bv) = build(&mut g, &x, &w, &b, &c);
        let grads = g.backward(root).unwrap();
        let h = 1e-6;
        for (which, analytic) in [(0, grads.get(wv).unwrap()), (1, grads.get(bv).unwrap())] {
            for e in 0..analytic.len() {
                let (mut wp, mut wm, mut bp, mut bm) = (w.clone(), w.clone(), b.clone(), b.clone());
                if which == 0 {
                    wp.data_mut()[e] += h;
                    wm.data_mut()[e] -= h;
                } else {
                    bp.data_mut()[e] += h;
                    bm.data_mut()[e] -= h;
                }
                let numeric = (value(&x, &wp, &bp, &c) - value(&x, &wm, &bm, &c)) / (2.0 * h);
                let a = analytic.data()[e];
                // relu kinks make a few entries non-differentiable; skip when x·W+b is within h of 0
                let lin = x.linear(&w, &b).unwrap();
                if lin.data().iter().any(|v| v.abs() < 1e-4) {
                    continue;
                }
                prop_assert!((a - numeric).abs() <= 1e-6 * a.abs().max(numeric.abs()).max(1.0), "{a} vs {numeric}");
            }
        }
    }
}

#[test]
fn adam_minimizes_a_quadratic() {
    let target = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
    let mut w = Matrix::<f64>::zeros(2, 2);
    let mut adam = Adam::new(
        AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        },
        [(2, 2)],
    );
    for _ in 0..2000 {
        let mut g = Graph::new();
        let wv = g.param(w.clone());
        let d = g.add_const(wv, &target.scale(-1.0)).unwrap();
        let sq = g.square(d).unwrap();
        let loss = g.sum(sq).unwrap();
        let grads = g.backward(loss).unwrap();
        adam.step(&mut [&mut w], &[grads.get(wv)]).unwrap();
    }
    let err = w.sub(&target).unwrap().sq_norm();
    assert!(err < 1e-8, "{err}");
    assert_eq!(adam.step_count(), 2000);
}
