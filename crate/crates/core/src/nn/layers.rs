//! Layer primitives on flat f64 buffers.
//!
//! Activations are HWC: element (y, x, ch) lives at `(y * w + x) * c + ch`.
//! Conv kernels are `[ky][kx][cin][cout]` with `cout` innermost and dense
//! weights `[in][out]` with `out` innermost, so every inner loop walks a
//! contiguous slice. Backward functions return gradients in the same layouts
//! as their forward counterparts.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

/// 2-D convolution, stride 1, zero-padded to keep the spatial size ("same").
/// `kernel` must be odd. Weight length is `k*k*cin*cout`, bias length `cout`.
pub fn conv2d_forward(
    input: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    weights: &[f64],
    bias: &[f64],
    cout: usize,
    k: usize,
) -> Vec<f64> {
    debug_assert_eq!(input.len(), h * w * cin);
    debug_assert_eq!(weights.len(), k * k * cin * cout);
    debug_assert_eq!(bias.len(), cout);
    debug_assert!(k % 2 == 1);
    let pad = (k - 1) / 2;
    let mut out = vec![0.0f64; h * w * cout];
    for y in 0..h {
        for ky in 0..k {
            let iy = y + ky;
            if iy < pad || iy - pad >= h {
                continue;
            }
            let iy = iy - pad;
            for x in 0..w {
                let out_base = (y * w + x) * cout;
                for kx in 0..k {
                    let ix = x + kx;
                    if ix < pad || ix - pad >= w {
                        continue;
                    }
                    let ix = ix - pad;
                    let in_base = (iy * w + ix) * cin;
                    let w_base = (ky * k + kx) * cin * cout;
                    for ci in 0..cin {
                        let a = input[in_base + ci];
                        let wrow = &weights[w_base + ci * cout..w_base + (ci + 1) * cout];
                        let orow = &mut out[out_base..out_base + cout];
                        for (o, &wv) in orow.iter_mut().zip(wrow) {
                            *o += a * wv;
                        }
                    }
                }
            }
        }
    }
    for chunk in out.chunks_exact_mut(cout) {
        for (o, &b) in chunk.iter_mut().zip(bias) {
            *o += b;
        }
    }
    out
}

/// Gradients of [`conv2d_forward`] given the output gradient:
/// `(d_input, d_weights, d_bias)`.
pub fn conv2d_backward(
    input: &[f64],
    h: usize,
    w: usize,
    cin: usize,
    weights: &[f64],
    cout: usize,
    k: usize,
    dout: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    debug_assert_eq!(input.len(), h * w * cin);
    debug_assert_eq!(dout.len(), h * w * cout);
    let pad = (k - 1) / 2;
    let mut dinput = vec![0.0f64; h * w * cin];
    let mut dweights = vec![0.0f64; k * k * cin * cout];
    let mut dbias = vec![0.0f64; cout];
    for chunk in dout.chunks_exact(cout) {
        for (db, &d) in dbias.iter_mut().zip(chunk) {
            *db += d;
        }
    }
    for y in 0..h {
        for ky in 0..k {
            let iy = y + ky;
            if iy < pad || iy - pad >= h {
                continue;
            }
            let iy = iy - pad;
            for x in 0..w {
                let drow = &dout[(y * w + x) * cout..(y * w + x) * cout + cout];
                for kx in 0..k {
                    let ix = x + kx;
                    if ix < pad || ix - pad >= w {
                        continue;
                    }
                    let ix = ix - pad;
                    let in_base = (iy * w + ix) * cin;
                    let w_base = (ky * k + kx) * cin * cout;
                    for ci in 0..cin {
                        let a = input[in_base + ci];
                        let wrow = &weights[w_base + ci * cout..w_base + (ci + 1) * cout];
                        let dwrow =
                            &mut dweights[w_base + ci * cout..w_base + (ci + 1) * cout];
                        let mut acc = 0.0;
                        for o in 0..cout {
                            let d = drow[o];
                            dwrow[o] += a * d;
                            acc += wrow[o] * d;
                        }
                        dinput[in_base + ci] += acc;
                    }
                }
            }
        }
    }
    (dinput, dweights, dbias)
}

/// Element-wise max(x, slope * x).
pub fn leaky_relu_forward(x: &[f64], slope: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| if v > 0.0 { v } else { slope * v })
        .collect()
}

/// Gradient through the leaky ReLU given pre-activation values. The kink at
/// exactly 0 takes the negative-side slope.
pub fn leaky_relu_backward(pre: &[f64], dout: &[f64], slope: f64) -> Vec<f64> {
    pre.iter()
        .zip(dout)
        .map(|(&p, &d)| if p > 0.0 { d } else { slope * d })
        .collect()
}

/// 2x2 max pooling with ceil-mode output sizes: partial windows at the
/// bottom/right edges are pooled over the cells that exist. Returns the
/// pooled buffer, the flat input index of each winner (first occurrence wins
/// ties), and the output spatial dims.
pub fn maxpool2x2_forward(
    input: &[f64],
    h: usize,
    w: usize,
    c: usize,
) -> (Vec<f64>, Vec<u32>, usize, usize) {
    debug_assert_eq!(input.len(), h * w * c);
    let ho = h.div_ceil(2);
    let wo = w.div_ceil(2);
    let mut out = vec![0.0f64; ho * wo * c];
    let mut argmax = vec![0u32; ho * wo * c];
    for oy in 0..ho {
        for ox in 0..wo {
            for ch in 0..c {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0u32;
                for dy in 0..2 {
                    let iy = oy * 2 + dy;
                    if iy >= h {
                        continue;
                    }
                    for dx in 0..2 {
                        let ix = ox * 2 + dx;
                        if ix >= w {
                            continue;
                        }
                        let idx = (iy * w + ix) * c + ch;
                        let v = input[idx];
                        if v > best {
                            best = v;
                            best_idx = idx as u32;
                        }
                    }
                }
                let o = (oy * wo + ox) * c + ch;
                out[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (out, argmax, ho, wo)
}

/// Scatters the pooled gradient back to the winning input cells.
pub fn maxpool2x2_backward(argmax: &[u32], dout: &[f64], input_len: usize) -> Vec<f64> {
    debug_assert_eq!(argmax.len(), dout.len());
    let mut dinput = vec![0.0f64; input_len];
    for (&idx, &d) in argmax.iter().zip(dout) {
        dinput[idx as usize] += d;
    }
    dinput
}

/// Fully connected layer: `out[o] = bias[o] + sum_i x[i] * weights[i*n_out+o]`.
pub fn dense_forward(x: &[f64], weights: &[f64], bias: &[f64], n_out: usize) -> Vec<f64> {
    debug_assert_eq!(weights.len(), x.len() * n_out);
    debug_assert_eq!(bias.len(), n_out);
    let mut out = bias.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        let wrow = &weights[i * n_out..(i + 1) * n_out];
        for (o, &wv) in out.iter_mut().zip(wrow) {
            *o += xi * wv;
        }
    }
    out
}

/// Gradients of [`dense_forward`]: `(d_x, d_weights, d_bias)`.
pub fn dense_backward(
    x: &[f64],
    weights: &[f64],
    n_out: usize,
    dout: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    debug_assert_eq!(dout.len(), n_out);
    let mut dx = vec![0.0f64; x.len()];
    let mut dweights = vec![0.0f64; x.len() * n_out];
    for (i, &xi) in x.iter().enumerate() {
        let wrow = &weights[i * n_out..(i + 1) * n_out];
        let dwrow = &mut dweights[i * n_out..(i + 1) * n_out];
        let mut acc = 0.0;
        for o in 0..n_out {
            let d = dout[o];
            dwrow[o] = xi * d;
            acc += wrow[o] * d;
        }
        dx[i] = acc;
    }
    (dx, dweights, dout.to_vec())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Cross-entropy of the softmax against a hard label:
/// `(loss, probabilities, d_logits)` with `d_logits = p - onehot(label)`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>, Vec<f64>) {
    debug_assert!(label < logits.len());
    let probs = softmax(logits);
    let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
    let mut dlogits = probs.clone();
    dlogits[label] -= 1.0;
    (loss, probs, dlogits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    const EPS: f64 = 1e-5;
    const TOL: f64 = 1e-4;

    fn rand_vec(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
        // Keep values away from 0 so ReLU kinks and pool ties stay off the
        // finite-difference path.
        (0..n)
            .map(|_| {
                let v: f64 = rng.gen_range(0.1..1.0);
                if rng.gen::<bool>() {
                    v
                } else {
                    -v
                }
            })
            .collect()
    }

    /// Central-difference gradient of a scalar function of a flat buffer.
    fn numeric_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let mut g = Vec::with_capacity(x.len());
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            probe[i] = x[i] + EPS;
            let hi = f(&probe);
            probe[i] = x[i] - EPS;
            let lo = f(&probe);
            probe[i] = x[i];
            g.push((hi - lo) / (2.0 * EPS));
        }
        g
    }

    fn assert_grads_close(analytic: &[f64], numeric: &[f64], what: &str) {
        assert_eq!(analytic.len(), numeric.len());
        for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
            let denom = (a.abs() + n.abs()).max(1e-6);
            let rel = (a - n).abs() / denom;
            assert!(rel < TOL, "{what}[{i}]: analytic {a}, numeric {n}, rel {rel}");
        }
    }

    // --- convolution ---

    #[test]
    fn conv_known_values_on_tiny_input() {
        // 2x2 input, 1 channel in/out, 3x3 kernel that picks the center.
        let input = [1.0, 2.0, 3.0, 4.0];
        let mut weights = [0.0; 9];
        weights[4] = 1.0;
        let out = conv2d_forward(&input, 2, 2, 1, &weights, &[0.5], 1, 3);
        assert_eq!(out, vec![1.5, 2.5, 3.5, 4.5]);

        // A kernel that picks the right neighbor shifts and zero-pads.
        let mut shift = [0.0; 9];
        shift[5] = 1.0;
        let out = conv2d_forward(&input, 2, 2, 1, &shift, &[0.0], 1, 3);
        assert_eq!(out, vec![2.0, 0.0, 4.0, 0.0]);
    }

    #[test]
    fn conv_gradients_match_finite_differences_across_shapes() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for case in 0..20 {
            let h = rng.gen_range(1..6);
            let w = rng.gen_range(1..6);
            let cin = rng.gen_range(1..4);
            let cout = rng.gen_range(1..4);
            let k = 3;
            let input = rand_vec(&mut rng, h * w * cin);
            let weights = rand_vec(&mut rng, k * k * cin * cout);
            let bias = rand_vec(&mut rng, cout);
            let proj = rand_vec(&mut rng, h * w * cout);
            let loss = |inp: &[f64], wts: &[f64], b: &[f64]| {
                conv2d_forward(inp, h, w, cin, wts, b, cout, k)
                    .iter()
                    .zip(&proj)
                    .map(|(o, p)| o * p)
                    .sum::<f64>()
            };
            let (di, dw, db) = conv2d_backward(&input, h, w, cin, &weights, cout, k, &proj);
            let ni = numeric_grad(|x| loss(x, &weights, &bias), &input);
            let nw = numeric_grad(|x| loss(&input, x, &bias), &weights);
            let nb = numeric_grad(|x| loss(&input, &weights, x), &bias);
            assert_grads_close(&di, &ni, &alloc::format!("case{case} d_input"));
            assert_grads_close(&dw, &nw, &alloc::format!("case{case} d_weights"));
            assert_grads_close(&db, &nb, &alloc::format!("case{case} d_bias"));
        }
    }

    // --- leaky ReLU ---

    #[test]
    fn leaky_relu_values_and_gradient() {
        let x = [2.0, -3.0, 0.5, -0.25];
        let y = leaky_relu_forward(&x, 0.1);
        for (a, b) in y.iter().zip([2.0, -0.3, 0.5, -0.025]) {
            assert!((a - b).abs() < 1e-15);
        }
        let d = leaky_relu_backward(&x, &[1.0, 1.0, 2.0, 2.0], 0.1);
        for (a, b) in d.iter().zip([1.0, 0.1, 2.0, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }

        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let x = rand_vec(&mut rng, 32);
        let proj = rand_vec(&mut rng, 32);
        let analytic = leaky_relu_backward(&x, &proj, 0.1);
        let numeric = numeric_grad(
            |v| {
                leaky_relu_forward(v, 0.1)
                    .iter()
                    .zip(&proj)
                    .map(|(o, p)| o * p)
                    .sum()
            },
            &x,
        );
        assert_grads_close(&analytic, &numeric, "leaky_relu");
    }

    // --- max pooling ---

    #[test]
    fn maxpool_ceil_dims_and_values() {
        // 3x3, one channel: ceil gives 2x2 output, edge windows are partial.
        let input = [1.0, 5.0, 2.0, 4.0, 3.0, 8.0, 7.0, 6.0, 9.0];
        let (out, argmax, ho, wo) = maxpool2x2_forward(&input, 3, 3, 1);
        assert_eq!((ho, wo), (2, 2));
        assert_eq!(out, vec![5.0, 8.0, 7.0, 9.0]);
        assert_eq!(argmax, vec![1, 5, 6, 8]);
    }

    #[test]
    fn maxpool_first_tie_wins() {
        let input = [3.0, 3.0, 3.0, 3.0];
        let (_, argmax, _, _) = maxpool2x2_forward(&input, 2, 2, 1);
        assert_eq!(argmax, vec![0]);
    }

    #[test]
    fn maxpool_backward_scatters_to_winners() {
        let input = [1.0, 5.0, 2.0, 4.0, 3.0, 8.0, 7.0, 6.0, 9.0];
        let (_, argmax, _, _) = maxpool2x2_forward(&input, 3, 3, 1);
        let dinput = maxpool2x2_backward(&argmax, &[1.0, 2.0, 3.0, 4.0], input.len());
        let mut expected = vec![0.0; 9];
        expected[1] = 1.0;
        expected[5] = 2.0;
        expected[6] = 3.0;
        expected[8] = 4.0;
        assert_eq!(dinput, expected);
    }

    #[test]
    fn maxpool_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h = rng.gen_range(1..7);
            let w = rng.gen_range(1..7);
            let c = rng.gen_range(1..3);
            let input = rand_vec(&mut rng, h * w * c);
            let (out, argmax, _, _) = maxpool2x2_forward(&input, h, w, c);
            let proj = rand_vec(&mut rng, out.len());
            let analytic = maxpool2x2_backward(&argmax, &proj, input.len());
            let numeric = numeric_grad(
                |v| {
                    maxpool2x2_forward(v, h, w, c)
                        .0
                        .iter()
                        .zip(&proj)
                        .map(|(o, p)| o * p)
                        .sum()
                },
                &input,
            );
            assert_grads_close(&analytic, &numeric, "maxpool d_input");
        }
    }

    // --- dense ---

    #[test]
    fn dense_known_values() {
        // 2 inputs, 3 outputs, weights [in][out].
        let x = [1.0, 2.0];
        let weights = [1.0, 0.0, -1.0, 0.5, 2.0, 1.0];
        let bias = [10.0, 20.0, 30.0];
        let out = dense_forward(&x, &weights, &bias, 3);
        assert_eq!(out, vec![12.0, 24.0, 31.0]);
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n_in = rng.gen_range(1..12);
            let n_out = rng.gen_range(1..8);
            let x = rand_vec(&mut rng, n_in);
            let weights = rand_vec(&mut rng, n_in * n_out);
            let bias = rand_vec(&mut rng, n_out);
            let proj = rand_vec(&mut rng, n_out);
            let loss = |xv: &[f64], wv: &[f64], bv: &[f64]| {
                dense_forward(xv, wv, bv, n_out)
                    .iter()
                    .zip(&proj)
                    .map(|(o, p)| o * p)
                    .sum::<f64>()
            };
            let (dx, dw, db) = dense_backward(&x, &weights, n_out, &proj);
            assert_grads_close(&dx, &numeric_grad(|v| loss(v, &weights, &bias), &x), "dx");
            assert_grads_close(&dw, &numeric_grad(|v| loss(&x, v, &bias), &weights), "dw");
            assert_grads_close(&db, &numeric_grad(|v| loss(&x, &weights, v), &bias), "db");
        }
    }

    // --- softmax cross-entropy ---

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let logits = [1.0, 2.0, 3.0];
        let p = softmax(&logits);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = logits.iter().map(|z| z + 100.0).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
        // Extreme logits stay finite.
        let p = softmax(&[1000.0, -1000.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..20 {
            let k = rng.gen_range(2..6);
            let logits = rand_vec(&mut rng, k);
            let label = rng.gen_range(0..k);
            let (_, _, dlogits) = softmax_cross_entropy(&logits, label);
            let numeric = numeric_grad(|z| softmax_cross_entropy(z, label).0, &logits);
            assert_grads_close(&dlogits, &numeric, "d_logits");
        }
    }

    #[test]
    fn cross_entropy_of_confident_correct_prediction_is_small() {
        let (loss, probs, _) = softmax_cross_entropy(&[10.0, 0.0, 0.0], 0);
        assert!(loss < 1e-3);
        assert!(probs[0] > 0.999);
        let (loss_wrong, _, _) = softmax_cross_entropy(&[10.0, 0.0, 0.0], 1);
        assert!(loss_wrong > 5.0);
    }
}
