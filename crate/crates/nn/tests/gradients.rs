use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use traji_nn::penalty::{gradient_penalty, gradient_penalty_fd};
use traji_nn::{Activation, AdamConfig, AdamState, Graph, Network, NetworkParams, NetworkSpec, SlotSpec, Var};

fn rand_array(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(lo..hi))
}

fn flat(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-8)
}

/// Central differences of `f` around `x`.
fn fd(x: &Array2<f64>, h: f64, f: impl Fn(&Array2<f64>) -> f64) -> Vec<f64> {
    let mut p = x.clone();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = p.as_slice().unwrap()[i];
        p.as_slice_mut().unwrap()[i] = orig + h;
        let up = f(&p);
        p.as_slice_mut().unwrap()[i] = orig - h;
        let down = f(&p);
        p.as_slice_mut().unwrap()[i] = orig;
        out.push((up - down) / (2.0 * h));
    }
    out
}

type UnaryOp = fn(&mut Graph, Var) -> Var;

fn unary_ops() -> Vec<(&'static str, UnaryOp, f64, f64)> {
    vec![
        ("tanh", |g, x| g.tanh(x), -2.0, 2.0),
        ("sigmoid", |g, x| g.sigmoid(x), -3.0, 3.0),
        ("exp", |g, x| g.exp(x), -1.0, 1.0),
        ("log", |g, x| g.log(x), 0.5, 2.0),
        ("sin", |g, x| g.sin(x), -3.0, 3.0),
        ("cos", |g, x| g.cos(x), -3.0, 3.0),
        ("sqrt", |g, x| g.sqrt(x), 0.5, 2.0),
        ("square", |g, x| g.square(x), -2.0, 2.0),
        ("recip", |g, x| g.recip(x), 0.5, 2.0),
        ("elu", |g, x| g.elu(x), -2.0, 2.0),
        ("softplus", |g, x| g.softplus(x), -3.0, 3.0),
        ("relu", |g, x| g.relu(x), -2.0, 2.0),
        ("abs", |g, x| g.abs(x), -2.0, 2.0),
        ("transpose", |g, x| g.transpose(x), -1.0, 1.0),
        ("sum_rows", |g, x| g.sum_rows(x), -1.0, 1.0),
        ("sum_cols", |g, x| g.sum_cols(x), -1.0, 1.0),
    ]
}

/// Scalar probe: sum((op(x)^2 + op(x)) * c) gives second derivatives something to chew on.
fn probe(g: &mut Graph, x: Var, op: UnaryOp, c: &Array2<f64>) -> Var {
    let y = op(g, x);
    let y2 = g.square(y);
    let y2 = g.add(y2, y).unwrap();
    let shape = g.shape(y2);
    let c = g.constant(c.slice(ndarray::s![..shape.0, ..shape.1]).to_owned());
    let w = g.mul(y2, c).unwrap();
    g.sum(w)
}

#[test]
fn first_order_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (name, op, lo, hi) in unary_ops() {
        let x0 = rand_array(&mut rng, 3, 4, lo, hi);
        let c = rand_array(&mut rng, 4, 4, 0.5, 1.5);
        let f = |x: &Array2<f64>| {
            let mut g = Graph::new();
            let v = g.constant(x.clone());
            let out = probe(&mut g, v, op, &c);
            g.scalar(out)
        };
        let oracle = fd(&x0, 1e-6, f);
        let mut g = Graph::new();
        let x = g.variable(x0.clone());
        let out = probe(&mut g, x, op, &c);
        let numeric = g.backward(out).unwrap().get(x).unwrap_or_else(|| panic!("{name}: no gradient")).clone();
        let symbolic = g.grad(out, &[x]).unwrap()[0];
        assert!(rel_err(&flat(&numeric), &oracle) < 1e-6, "{name} numeric");
        assert!(rel_err(&flat(g.value(symbolic)), &oracle) < 1e-6, "{name} symbolic");
    }
}

#[test]
fn second_order_matches_differences_of_gradients() {
    // d/dx of sum(grad_x f * v) equals the Hessian-vector product H v.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (name, op, lo, hi) in unary_ops() {
        if matches!(name, "relu" | "abs") {
            continue; // piecewise linear, Hessian is zero almost everywhere
        }
        let x0 = rand_array(&mut rng, 3, 4, lo, hi);
        let c = rand_array(&mut rng, 4, 4, 0.5, 1.5);
        let v = rand_array(&mut rng, 3, 4, -1.0, 1.0);
        let grad_dot_v = |x: &Array2<f64>| {
            let mut g = Graph::new();
            let xv = g.variable(x.clone());
            let out = probe(&mut g, xv, op, &c);
            let gr = g.backward(out).unwrap().get(xv).unwrap().clone();
            (&gr * &v).sum()
        };
        let oracle = fd(&x0, 1e-5, grad_dot_v);
        let mut g = Graph::new();
        let x = g.variable(x0.clone());
        let out = probe(&mut g, x, op, &c);
        let gx = g.grad(out, &[x]).unwrap()[0];
        let vv = g.constant(v.clone());
        let dot = g.mul(gx, vv).unwrap();
        let dot = g.sum(dot);
        let hv = g.backward(dot).unwrap().get(x).unwrap_or_else(|| panic!("{name}: no second-order gradient")).clone();
        let err = rel_err(&flat(&hv), &oracle);
        assert!(err < 1e-5, "{name}: {err}");
    }
}

fn critic_spec(reward: bool) -> NetworkSpec {
    let mut slots = vec![SlotSpec::dense("action", 2, 4), SlotSpec::time("t", 3, 10.0)];
    if reward {
        slots.push(SlotSpec::reward("r"));
    }
    NetworkSpec {
        slots,
        hidden: vec![6, 5],
        hidden_activation: Activation::Relu,
        extractor_activation: Activation::Relu,
        output_dim: 1,
        output_activation: Activation::Elu,
    }
}

fn critic_inputs(rng: &mut ChaCha8Rng, n: usize) -> Vec<Array2<f64>> {
    vec![
        rand_array(rng, n, 2, -1.0, 1.0),
        rand_array(rng, n, 1, 0.0, 10.0),
        Array2::from_shape_fn((n, 1), |(i, _)| if i % 2 == 0 { 1.0 } else { -1.0 }),
    ]
}

fn loss_of(net: &Network, p: &NetworkParams, inputs: &[Array2<f64>]) -> f64 {
    let out = net.predict(p, inputs).unwrap();
    out.mapv(|v| v * v).sum() + out.sum()
}

#[test]
fn network_parameter_gradients_match_differences() {
    let net = Network::new(critic_spec(true)).unwrap();
    assert!(net.n_params() < 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let mut params = net.init(&mut rng);
        // Larger output weights so the loss is not flat.
        for v in params.values.iter_mut() {
            *v += rng.random_range(-0.2..0.2);
        }
        for (b, m) in net.blocks().iter().zip(0..) {
            let _ = m;
            if b.nonneg {
                for v in &mut params.values[b.offset..b.offset + b.rows * b.cols] {
                    *v = v.abs();
                }
            }
        }
        let inputs = critic_inputs(&mut rng, 5);
        let mut g = Graph::new();
        let bound = net.bind(&mut g, &params).unwrap();
        let vars: Vec<Var> = inputs.iter().map(|a| g.constant(a.clone())).collect();
        let out = net.forward(&mut g, &bound, &vars).unwrap();
        let sq = g.square(out);
        let a = g.sum(sq);
        let b = g.sum(out);
        let loss = g.add(a, b).unwrap();
        let analytic = net.flat_grad(&g.backward(loss).unwrap(), &bound);
        let p0 = Array2::from_shape_vec((1, params.len()), params.values.clone()).unwrap();
        let oracle = fd(&p0, 1e-6, |p| loss_of(&net, &NetworkParams { values: p.iter().copied().collect() }, &inputs));
        assert!(rel_err(&analytic, &oracle) < 1e-5);
    }
}

#[test]
fn gradient_penalty_parameter_gradient_matches_differences() {
    let net = Network::new(critic_spec(true)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..4 {
        let mut params = net.init(&mut rng);
        for v in params.values.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
        let mask = net.nonneg_mask();
        for (v, m) in params.values.iter_mut().zip(mask) {
            if m {
                *v = v.abs();
            }
        }
        let inputs = critic_inputs(&mut rng, 6);
        let real = rand_array(&mut rng, 6, 2, -1.0, 1.0);
        let fake = rand_array(&mut rng, 6, 2, -1.0, 1.0);
        let w: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
        let (val, analytic) = gradient_penalty(&net, &params, &inputs, 0, &real, &fake, &w, 10.0).unwrap();
        assert!(val.is_finite() && val >= 0.0);
        let oracle = gradient_penalty_fd(&net, &params, &inputs, 0, &real, &fake, &w, 10.0, 1e-6).unwrap();
        let err = rel_err(&analytic, &oracle);
        assert!(err < 1e-4, "penalty gradient rel err {err}");
    }
}

#[test]
fn adam_first_step_moves_each_coordinate_by_lr() {
    // With zero-initialized moments the bias-corrected ratio is g/|g|.
    let mut state = AdamState::new(3, AdamConfig { lr: 0.01, beta1: 0.5, beta2: 0.9, eps: 0.0 });
    let mut p = vec![1.0, -2.0, 0.5];
    state.step(&mut p, &[3.0, -0.2, 1e-3], None).unwrap();
    for (a, b) in p.iter().zip([0.99, -1.99, 0.49]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn adam_clamps_nonnegative_entries() {
    let mut state = AdamState::new(2, AdamConfig::new(1.0, 0.9, 0.999));
    let mut p = vec![0.1, 0.1];
    state.step(&mut p, &[1.0, 1.0], Some(&[true, false])).unwrap();
    assert_eq!(p[0], 0.0);
    assert!(p[1] < 0.0);
}

#[test]
fn non_finite_loss_is_an_error() {
    let mut g = Graph::new();
    let x = g.variable(Array2::from_elem((1, 1), -1.0));
    let y = g.log(x);
    assert!(g.backward(y).is_err());
}

#[test]
fn reward_block_equals_explicit_tiling() {
    let net = Network::new(critic_spec(true)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let params = net.init(&mut rng);
    let b = net.blocks().iter().find(|b| b.nonneg).unwrap();
    let w = Array2::from_shape_vec((b.rows, b.cols), params.values[b.offset..b.offset + b.rows * b.cols].to_vec()).unwrap();
    let r = 0.7;
    let tiled = Array2::from_elem((1, b.rows), r).dot(&w);
    let colsum = w.sum_axis(ndarray::Axis(0)) * r;
    for (a, c) in tiled.iter().zip(colsum.iter()) {
        assert!((a - c).abs() < 1e-12);
    }
}

#[test]
fn elu_second_order_is_finite_for_large_inputs() {
    let mut g = Graph::new();
    let x = g.variable(Array2::from_shape_vec((1, 2), vec![800.0, -3.0]).unwrap());
    let y = g.elu(x);
    let s = g.sum(y);
    let gx = g.grad(s, &[x]).unwrap()[0];
    let sq = g.square(gx);
    let total = g.sum(sq);
    let grads = g.backward(total).unwrap();
    assert!(grads.get(x).unwrap().iter().all(|v| v.is_finite()));
    assert!(g.value(gx).iter().all(|v| v.is_finite()));
}
