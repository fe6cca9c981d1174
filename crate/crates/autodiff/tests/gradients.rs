use autodiff::gradcheck::{finite_diff_grad, max_rel_error};
use autodiff::{conv2d, dense, Arr, Tape, UpsampleKind};
use ndarray::IxDyn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn randn(rng: &mut ChaCha12Rng, shape: &[usize]) -> Arr {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n)
        .map(|_| {
            // Box-Muller, good enough for test fixtures.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
        .collect();
    Arr::from_shape_vec(IxDyn(shape), data).unwrap()
}

/// Check reverse-mode gradients of `f` against central differences.
fn check(
    f: impl for<'a> Fn(&'a Tape, &[autodiff::Var<'a>]) -> autodiff::Var<'a> + Copy,
    inputs: &[Arr],
    tol: f64,
) {
    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let out = f(&tape, &vars);
    let grads = tape.grad(out, &vars);
    let mut eval = |xs: &[Arr]| {
        let t = Tape::new();
        let vs: Vec<_> = xs.iter().map(|a| t.leaf(a.clone())).collect();
        f(&t, &vs).scalar_value()
    };
    let fd = finite_diff_grad(&mut eval, inputs, 1e-5);
    for (g, fd) in grads.iter().zip(fd.iter()) {
        let err = max_rel_error(&g.value(), fd, 1e-6);
        assert!(err < tol, "gradcheck failed: rel err {err}");
    }
}

#[test]
fn elementwise_and_reduction_grads() {
    let mut rng = ChaCha12Rng::seed_from_u64(1);
    let a = randn(&mut rng, &[3, 4]);
    let b = randn(&mut rng, &[3, 4]);
    check(
        |_t, v| v[0].mul(v[1]).add(v[0].square()).sum_all(),
        &[a.clone(), b.clone()],
        1e-6,
    );
    check(|_t, v| v[0].leaky_relu(0.2).sum_all(), &[a.clone()], 1e-4);
    check(
        |_t, v| v[0].mul(v[0]).add_scalar(1.0).powf(0.7).mean_all(),
        &[a.clone()],
        1e-6,
    );
    // Broadcasting add/mul: (3,4) with (1,4) and scalar-ish (3,1).
    let c = randn(&mut rng, &[1, 4]);
    let d = randn(&mut rng, &[3, 1]);
    check(
        |_t, v| v[0].add(v[1]).mul(v[2]).sum_all(),
        &[a.clone(), c, d],
        1e-6,
    );
    check(
        |_t, v| v[0].sum_axes(&[1]).square().sum_all(),
        &[a.clone()],
        1e-6,
    );
    check(
        |_t, v| v[0].matmul(v[1].transpose2()).sum_all(),
        &[a.clone(), b.clone()],
        1e-6,
    );
}

#[test]
fn conv_dense_upsample_concat_grads() {
    let mut rng = ChaCha12Rng::seed_from_u64(2);
    let x = randn(&mut rng, &[2, 3, 5, 5]);
    let w = randn(&mut rng, &[4, 3, 3, 3]);
    let b = randn(&mut rng, &[4]);
    check(
        |_t, v| conv2d(v[0], v[1], Some(v[2]), 1, 1).square().sum_all(),
        &[x.clone(), w.clone(), b.clone()],
        1e-5,
    );
    // Strided, no padding.
    check(
        |_t, v| conv2d(v[0], v[1], None, 2, 0).square().sum_all(),
        &[x.clone(), w.clone()],
        1e-5,
    );
    let xf = randn(&mut rng, &[2, 6]);
    let wf = randn(&mut rng, &[6, 3]);
    let bf = randn(&mut rng, &[3]);
    check(
        |_t, v| dense(v[0], v[1], Some(v[2])).square().sum_all(),
        &[xf, wf, bf],
        1e-6,
    );
    let u = randn(&mut rng, &[1, 2, 4, 4]);
    for kind in [UpsampleKind::Nearest, UpsampleKind::Bilinear] {
        check(
            move |_t, v| v[0].upsample2x(kind).square().sum_all(),
            &[u.clone()],
            1e-6,
        );
    }
    let p = randn(&mut rng, &[1, 2, 3, 3]);
    let q = randn(&mut rng, &[1, 3, 3, 3]);
    check(
        |t, v| {
            let cat = t.concat_c(&[v[0], v[1]]);
            cat.slice_c(1, 3).square().sum_all()
        },
        &[p, q],
        1e-6,
    );
}

#[test]
fn upsample_adjoint_is_transpose() {
    // <L x, y> == <x, L^T y> for random x, y.
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    for kind in [UpsampleKind::Nearest, UpsampleKind::Bilinear] {
        let x = randn(&mut rng, &[1, 1, 4, 4]);
        let y = randn(&mut rng, &[1, 1, 8, 8]);
        let tape = Tape::new();
        let vx = tape.leaf(x.clone());
        let vy = tape.leaf(y.clone());
        let lhs = vx.upsample2x(kind).mul(vy).sum_all().scalar_value();
        // L^T y via differentiating <L x, y> in x.
        let inner = vx.upsample2x(kind).mul(vy).sum_all();
        let lt_y = tape.grad(inner, &[vx])[0].value();
        let rhs = (&lt_y * &x).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{kind:?}: {lhs} vs {rhs}");
    }
}

#[test]
fn second_order_through_gradient_norm() {
    // f(w) = (||d/dx (w * x^2 summed)|| - 1)^2 has an analytic w-derivative;
    // this is the exact structure the gradient penalty relies on.
    let tape = Tape::new();
    let w = tape.scalar(1.5);
    let x = tape.leaf(Arr::from_shape_vec(IxDyn(&[2]), vec![0.3, -0.7]).unwrap());
    let y = w.mul(x.square()).sum_all();
    let gx = tape.grad(y, &[x])[0]; // 2 w x
    let norm = gx.square().sum_all().sqrt();
    let penalty = norm.add_scalar(-1.0).square();
    let gw = tape.grad(penalty, &[w])[0].scalar_value();
    // gx = 2 w x, so norm = 2 w sqrt(sum x^2) and
    // d penalty / dw = 2 (norm - 1) * 2 sqrt(sum x^2).
    let s2 = 0.3f64.powi(2) + 0.7f64.powi(2);
    let norm_v = 2.0 * 1.5 * s2.sqrt();
    let expected = 2.0 * (norm_v - 1.0) * 2.0 * s2.sqrt();
    assert!((gw - expected).abs() < 1e-10, "{gw} vs {expected}");
}

#[test]
fn second_order_finite_difference_conv() {
    // Gradient-penalty-shaped loss through a conv critic, checked against
    // finite differences in the weights.
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let x = randn(&mut rng, &[1, 1, 4, 4]);
    let w = randn(&mut rng, &[1, 1, 3, 3]);
    let loss = |xs: &[Arr]| {
        let t = Tape::new();
        let vx = t.leaf(x.clone());
        let vw = t.leaf(xs[0].clone());
        let out = conv2d(vx, vw, None, 1, 0).square().sum_all();
        let gx = t.grad(out, &[vx])[0];
        let norm = gx.square().sum_all().sqrt();
        norm.add_scalar(-1.0).square().scalar_value()
    };
    let t = Tape::new();
    let vx = t.leaf(x.clone());
    let vw = t.leaf(w.clone());
    let out = conv2d(vx, vw, None, 1, 0).square().sum_all();
    let gx = t.grad(out, &[vx])[0];
    let norm = gx.square().sum_all().sqrt();
    let penalty = norm.add_scalar(-1.0).square();
    let gw = t.grad(penalty, &[vw])[0].value();
    let fd = finite_diff_grad(&mut { |xs: &[Arr]| loss(xs) }, &[w], 1e-5);
    let err = max_rel_error(&gw, &fd[0], 1e-6);
    assert!(err < 1e-5, "second-order conv gradcheck rel err {err}");
}

#[test]
fn grad_of_unused_leaf_is_zero() {
    let tape = Tape::new();
    let a = tape.scalar(2.0);
    let b = tape.scalar(3.0);
    let out = a.square();
    let g = tape.grad(out, &[a, b]);
    assert_eq!(g[0].scalar_value(), 4.0);
    assert_eq!(g[1].scalar_value(), 0.0);
}
