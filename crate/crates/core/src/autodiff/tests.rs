use super::net::{bind_params, flatten_grads, forward, input_grad_norm_penalty, predict};
use super::*;

fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 0.5
        })
        .collect()
}

/// Central finite differences of a scalar function of a flat vector.
fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g.push((fp - fm) / (2.0 * h));
    }
    g
}

fn assert_close(analytic: &[f64], numeric: &[f64], rel_tol: f64, what: &str) {
    assert_eq!(analytic.len(), numeric.len());
    let scale = numeric.iter().fold(1e-8f64, |m, v| m.max(v.abs()));
    for (k, (a, n)) in analytic.iter().zip(numeric).enumerate() {
        let err = (a - n).abs() / scale;
        assert!(err <= rel_tol, "{what}: entry {k}: analytic {a}, fd {n}, rel err {err}");
    }
}

/// Gradient of `sum(forward(x)^2)` w.r.t. every parameter and the input,
/// checked against central differences.
fn gradcheck_spec(spec: &NetSpec, seed: u64) {
    let n = 2;
    let params = NetParams::init(spec, InitScheme::Glorot, seed);
    let in_len: usize = spec.input_shape.iter().product::<usize>() * n;
    let input = rand_vec(in_len, seed ^ 0xabcd);

    let loss_fn = |theta: &[f64], x: &[f64]| -> f64 {
        let mut tape = Tape::new();
        let p = NetParams { data: theta.to_vec() };
        let bound = bind_params(&mut tape, spec, &p).unwrap();
        let mut shape = vec![n];
        shape.extend_from_slice(&spec.input_shape);
        let xv = tape.leaf(&shape, x.to_vec());
        let y = forward(&mut tape, spec, &bound, xv).unwrap();
        let sq = tape.mul(y, y);
        let s = tape.sum(sq);
        tape.value(s)[0]
    };

    // Analytic gradients.
    let mut tape = Tape::new();
    let bound = bind_params(&mut tape, spec, &params).unwrap();
    let mut shape = vec![n];
    shape.extend_from_slice(&spec.input_shape);
    let xv = tape.leaf(&shape, input.clone());
    let y = forward(&mut tape, spec, &bound, xv).unwrap();
    let sq = tape.mul(y, y);
    let s = tape.sum(sq);
    let mut wrt = bound.all_vars();
    wrt.push(xv);
    let grads = tape.backward(s, &wrt).unwrap();
    let analytic_theta = flatten_grads(&tape, &grads[..grads.len() - 1]);
    let analytic_x = tape.value(grads[grads.len() - 1]).to_vec();

    let h = 1e-6;
    let fd_theta = fd_grad(&|t| loss_fn(t, &input), &params.data, h);
    let fd_x = fd_grad(&|x| loss_fn(&params.data, x), &input, h);
    assert_close(&analytic_theta, &fd_theta, 1e-5, "theta");
    assert_close(&analytic_x, &fd_x, 1e-5, "input");
}

#[test]
fn gradcheck_dense() {
    let spec = NetSpec::new(vec![3], vec![Layer::Dense { input: 3, output: 5 }]).unwrap();
    gradcheck_spec(&spec, 1);
}

#[test]
fn gradcheck_dense_leaky_stack() {
    let spec = NetSpec::new(
        vec![4],
        vec![
            Layer::Dense { input: 4, output: 6 },
            Layer::LeakyRelu,
            Layer::Dense { input: 6, output: 2 },
        ],
    )
    .unwrap();
    gradcheck_spec(&spec, 2);
}

#[test]
fn gradcheck_conv2d() {
    let spec = NetSpec::new(
        vec![2, 6, 6],
        vec![Layer::Conv2d { in_ch: 2, out_ch: 3, kernel: 4, stride: 2, pad: 1 }],
    )
    .unwrap();
    gradcheck_spec(&spec, 3);
}

#[test]
fn gradcheck_conv_transpose2d() {
    let spec = NetSpec::new(
        vec![3, 3, 3],
        vec![Layer::ConvT2d { in_ch: 3, out_ch: 2, kernel: 4, stride: 2, pad: 1 }],
    )
    .unwrap();
    gradcheck_spec(&spec, 4);
}

#[test]
fn gradcheck_full_generator_stack() {
    let spec = NetSpec::new(
        vec![3],
        vec![
            Layer::Dense { input: 3, output: 2 * 2 * 4 },
            Layer::LeakyRelu,
            Layer::Reshape { shape: vec![4, 2, 2] },
            Layer::ConvT2d { in_ch: 4, out_ch: 2, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::ConvT2d { in_ch: 2, out_ch: 1, kernel: 4, stride: 2, pad: 1 },
            Layer::Crop { h: 7, w: 6 },
        ],
    )
    .unwrap();
    gradcheck_spec(&spec, 5);
}

#[test]
fn gradcheck_discriminator_stack() {
    let spec = NetSpec::new(
        vec![1, 8, 8],
        vec![
            Layer::Conv2d { in_ch: 1, out_ch: 2, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::Conv2d { in_ch: 2, out_ch: 4, kernel: 4, stride: 2, pad: 1 },
            Layer::LeakyRelu,
            Layer::Flatten,
            Layer::Dense { input: 4 * 2 * 2, output: 1 },
        ],
    )
    .unwrap();
    gradcheck_spec(&spec, 6);
}

#[test]
fn transposed_conv_output_size_and_scatter_oracle() {
    // in 1x2x2, kernel 2, stride 2, pad 0 -> out 1x4x4.
    let mut tape = Tape::new();
    let x = tape.constant(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
    let w = tape.constant(&[1, 1, 2, 2], vec![10.0, 20.0, 30.0, 40.0]);
    let y = tape.conv_transpose2d(x, w, 2, 0);
    assert_eq!(tape.shape(y), &[1, 1, 4, 4]);
    // Direct scatter-accumulate oracle.
    let mut expect = vec![0.0; 16];
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ws = [10.0, 20.0, 30.0, 40.0];
    for iy in 0..2 {
        for ix in 0..2 {
            for ky in 0..2 {
                for kx in 0..2 {
                    expect[(iy * 2 + ky) * 4 + ix * 2 + kx] += xs[iy * 2 + ix] * ws[ky * 2 + kx];
                }
            }
        }
    }
    assert_eq!(tape.value(y), &expect[..]);
}

#[test]
fn zero_params_give_zero_output() {
    let spec = NetSpec::new(
        vec![3],
        vec![Layer::Dense { input: 3, output: 4 }, Layer::Dense { input: 4, output: 2 }],
    )
    .unwrap();
    let params = NetParams::init(&spec, InitScheme::Zero, 0);
    let out = predict(&spec, &params, &[1.0, -2.0, 0.5, 0.0, 1.0, 2.0], 2).unwrap();
    assert!(out.iter().all(|&v| v == 0.0));
    // And the gradient of ||output||^2 at theta = 0 vanishes.
    let mut tape = Tape::new();
    let bound = bind_params(&mut tape, &spec, &params).unwrap();
    let x = tape.constant(&[1, 3], vec![1.0, 2.0, 3.0]);
    let y = forward(&mut tape, &spec, &bound, x).unwrap();
    let sq = tape.mul(y, y);
    let s = tape.sum(sq);
    let grads = tape.backward(s, &bound.all_vars()).unwrap();
    assert!(flatten_grads(&tape, &grads).iter().all(|&g| g == 0.0));
}

#[test]
fn dense_identity_embedding_passes_input_through() {
    let spec = NetSpec::new(vec![3], vec![Layer::Dense { input: 3, output: 3 }]).unwrap();
    let mut data = vec![0.0; spec.param_count()];
    for k in 0..3 {
        data[k * 3 + k] = 1.0;
    }
    let params = NetParams { data };
    let input = vec![0.7, -1.3, 2.2];
    let out = predict(&spec, &params, &input, 1).unwrap();
    assert_eq!(out, input);
}

#[test]
fn linear_chain_input_gradient_matches_matrix_product() {
    // y = x W1 W2, L = sum(y): dL/dx = (W1 W2) 1.
    let (d_in, d_mid, d_out) = (3, 4, 2);
    let w1 = rand_vec(d_in * d_mid, 10);
    let w2 = rand_vec(d_mid * d_out, 11);
    let x0 = rand_vec(d_in, 12);

    let mut tape = Tape::new();
    let w1v = tape.constant(&[d_in, d_mid], w1.clone());
    let w2v = tape.constant(&[d_mid, d_out], w2.clone());
    let x = tape.leaf(&[1, d_in], x0);
    let h = tape.matmul(x, w1v);
    let y = tape.matmul(h, w2v);
    let s = tape.sum(y);
    let gx = tape.backward(s, &[x]).unwrap()[0];

    let mut expect = vec![0.0; d_in];
    for i in 0..d_in {
        for k in 0..d_mid {
            for j in 0..d_out {
                expect[i] += w1[i * d_mid + k] * w2[k * d_out + j];
            }
        }
    }
    for (a, b) in tape.value(gx).iter().zip(&expect) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn conv_and_transposed_conv_are_adjoint() {
    // <conv(x), y> = <x, conv_transpose(y)> for a shared kernel tensor.
    for &(stride, pad) in &[(1usize, 0usize), (2, 1), (2, 0)] {
        let (n, ci, co, k) = (2, 3, 2, 4);
        let (h, w) = (8, 6);
        let mut tape = Tape::new();
        let x = tape.constant(&[n, ci, h, w], rand_vec(n * ci * h * w, 20));
        let wvals = rand_vec(co * ci * k * k, 21);
        let w_conv = tape.constant(&[co, ci, k, k], wvals);
        let cx = tape.conv2d(x, w_conv, stride, pad);
        let y_shape = tape.shape(cx).to_vec();
        let y = tape.constant(&y_shape, rand_vec(y_shape.iter().product(), 22));
        let ty = tape.conv_transpose2d(y, w_conv, stride, pad);
        assert_eq!(tape.shape(ty), tape.shape(x));
        let lhs: f64 = tape.value(cx).iter().zip(tape.value(y)).map(|(a, b)| a * b).sum();
        let rhs: f64 = tape.value(x).iter().zip(tape.value(ty)).map(|(a, b)| a * b).sum();
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        assert!(
            (lhs - rhs).abs() <= 1e-10 * scale,
            "stride {stride} pad {pad}: {lhs} vs {rhs}"
        );
    }
}

#[test]
fn gradient_penalty_linear_discriminator_closed_form() {
    // D(x) = w . x: grad_x D = w, penalty = (||w|| - 1)^2,
    // d penalty / dw = 2 (||w|| - 1) w / ||w||.
    let d = 5;
    let spec = NetSpec::new(vec![d], vec![Layer::Dense { input: d, output: 1 }]).unwrap();
    let w = rand_vec(d, 31);
    let mut data = w.clone();
    data.push(0.0); // bias
    let params = NetParams { data };
    let x = rand_vec(2 * d, 32);
    let (penalty, grad) = input_grad_norm_penalty(&spec, &params, &x, 2).unwrap();
    let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let expect_penalty = (norm - 1.0) * (norm - 1.0);
    assert!((penalty - expect_penalty).abs() <= 1e-6, "{penalty} vs {expect_penalty}");
    for i in 0..d {
        let expect = 2.0 * (norm - 1.0) * w[i] / norm;
        assert!((grad[i] - expect).abs() <= 1e-6, "w[{i}]: {} vs {expect}", grad[i]);
    }
    assert!(grad[d].abs() <= 1e-12, "bias gradient must vanish");
}

#[test]
fn gradient_penalty_vanishes_on_normalized_weights() {
    let d = 4;
    let spec = NetSpec::new(vec![d], vec![Layer::Dense { input: d, output: 1 }]).unwrap();
    let mut w = rand_vec(d, 40);
    let norm: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut w {
        *v /= norm;
    }
    let mut data = w;
    data.push(0.25);
    let params = NetParams { data };
    let (penalty, grad) = input_grad_norm_penalty(&spec, &params, &rand_vec(3 * d, 41), 3).unwrap();
    assert!(penalty.abs() <= 1e-12);
    assert!(grad.iter().all(|g| g.abs() <= 1e-10));
}

#[test]
fn gradient_penalty_matches_finite_differences_on_two_layer_net() {
    let spec = NetSpec::new(
        vec![3],
        vec![
            Layer::Dense { input: 3, output: 5 },
            Layer::LeakyRelu,
            Layer::Dense { input: 5, output: 1 },
        ],
    )
    .unwrap();
    let params = NetParams::init(&spec, InitScheme::Glorot, 50);
    let x = rand_vec(2 * 3, 51);
    let (_, analytic) = input_grad_norm_penalty(&spec, &params, &x, 2).unwrap();
    let fd = fd_grad(
        &|theta| {
            let p = NetParams { data: theta.to_vec() };
            input_grad_norm_penalty(&spec, &p, &x, 2).unwrap().0
        },
        &params.data,
        1e-6,
    );
    assert_close(&analytic, &fd, 1e-4, "penalty theta-grad");
}

#[test]
fn gradient_penalty_zero_input_gradient_uses_subgradient_zero() {
    // theta = 0 makes grad_x D = 0; penalty is (0 - 1)^2 = 1, grad 0.
    let spec = NetSpec::new(vec![3], vec![Layer::Dense { input: 3, output: 1 }]).unwrap();
    let params = NetParams::init(&spec, InitScheme::Zero, 0);
    let (penalty, grad) = input_grad_norm_penalty(&spec, &params, &[0.1, 0.2, 0.3], 1).unwrap();
    assert_eq!(penalty, 1.0);
    assert!(grad.iter().all(|&g| g == 0.0));
}

#[test]
fn forward_is_deterministic() {
    let spec = NetSpec::new(
        vec![2],
        vec![
            Layer::Dense { input: 2, output: 8 },
            Layer::LeakyRelu,
            Layer::Dense { input: 8, output: 3 },
        ],
    )
    .unwrap();
    let params = NetParams::init(&spec, InitScheme::Glorot, 9);
    let x = vec![0.5, -0.25];
    let a = predict(&spec, &params, &x, 1).unwrap();
    let b = predict(&spec, &params, &x, 1).unwrap();
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn shape_mismatch_is_an_error() {
    let spec = NetSpec::new(vec![3], vec![Layer::Dense { input: 3, output: 2 }]).unwrap();
    let params = NetParams::init(&spec, InitScheme::Glorot, 0);
    assert!(predict(&spec, &params, &[1.0, 2.0], 1).is_err());
    let bad = NetParams { data: vec![0.0; 3] };
    assert!(predict(&spec, &bad, &[1.0, 2.0, 3.0], 1).is_err());
}

#[test]
fn invalid_layer_compositions_are_rejected() {
    assert!(NetSpec::new(vec![3], vec![Layer::Dense { input: 4, output: 2 }]).is_err());
    assert!(NetSpec::new(
        vec![2, 5, 5],
        vec![Layer::Conv2d { in_ch: 2, out_ch: 1, kernel: 4, stride: 2, pad: 0 }]
    )
    .is_err());
}
