//! Layer primitives with explicit forward and backward passes. All
//! activations are dense `C x H x W` buffers in f64; the inner loops run
//! over contiguous rows so they vectorize.

/// Same-padded 3x3 convolution. `weight` is `[cout][cin][3][3]`.
pub fn conv3x3_forward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
    out: &mut [f64],
) {
    let plane = h * w;
    debug_assert_eq!(input.len(), cin * plane);
    debug_assert_eq!(weight.len(), cout * cin * 9);
    debug_assert_eq!(out.len(), cout * plane);
    for oc in 0..cout {
        let out_plane = &mut out[oc * plane..(oc + 1) * plane];
        out_plane.fill(bias[oc]);
        for ic in 0..cin {
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            let wbase = (oc * cin + ic) * 9;
            for kr in 0..3usize {
                let dr = kr as isize - 1;
                for kc in 0..3usize {
                    let dc = kc as isize - 1;
                    let coeff = weight[wbase + kr * 3 + kc];
                    let r_lo = (-dr).max(0) as usize;
                    let r_hi = (h as isize).min(h as isize - dr) as usize;
                    let c_lo = (-dc).max(0) as usize;
                    let c_hi = (w as isize).min(w as isize - dc) as usize;
                    if c_lo >= c_hi {
                        continue;
                    }
                    for r in r_lo..r_hi {
                        let src_base = (r as isize + dr) as usize * w;
                        let src = &in_plane
                            [(src_base as isize + c_lo as isize + dc) as usize
                                ..(src_base as isize + c_hi as isize + dc) as usize];
                        let dst = &mut out_plane[r * w + c_lo..r * w + c_hi];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += coeff * s;
                        }
                    }
                }
            }
        }
    }
}

/// Backward pass of [`conv3x3_forward`]: accumulates parameter gradients
/// and fills the input gradient.
#[allow(clippy::too_many_arguments)]
pub fn conv3x3_backward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    cout: usize,
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    d_input: &mut [f64],
) {
    let plane = h * w;
    debug_assert_eq!(d_out.len(), cout * plane);
    debug_assert_eq!(d_input.len(), cin * plane);
    d_input.fill(0.0);
    for oc in 0..cout {
        let dout_plane = &d_out[oc * plane..(oc + 1) * plane];
        d_bias[oc] += dout_plane.iter().sum::<f64>();
        for ic in 0..cin {
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            let din_plane = &mut d_input[ic * plane..(ic + 1) * plane];
            let wbase = (oc * cin + ic) * 9;
            for kr in 0..3usize {
                let dr = kr as isize - 1;
                for kc in 0..3usize {
                    let dc = kc as isize - 1;
                    let coeff = weight[wbase + kr * 3 + kc];
                    let r_lo = (-dr).max(0) as usize;
                    let r_hi = (h as isize).min(h as isize - dr) as usize;
                    let c_lo = (-dc).max(0) as usize;
                    let c_hi = (w as isize).min(w as isize - dc) as usize;
                    if c_lo >= c_hi {
                        continue;
                    }
                    let mut wgrad = 0.0;
                    for r in r_lo..r_hi {
                        let shifted_base = (r as isize + dr) as usize * w;
                        let lo = (shifted_base as isize + c_lo as isize + dc) as usize;
                        let hi = (shifted_base as isize + c_hi as isize + dc) as usize;
                        let dout_row = &dout_plane[r * w + c_lo..r * w + c_hi];
                        // d/dweight: correlate upstream gradient with input.
                        for (g, x) in dout_row.iter().zip(&in_plane[lo..hi]) {
                            wgrad += g * x;
                        }
                        // d/dinput: scatter upstream gradient through the weight.
                        for (d, g) in din_plane[lo..hi].iter_mut().zip(dout_row) {
                            *d += coeff * g;
                        }
                    }
                    d_weight[wbase + kr * 3 + kc] += wgrad;
                }
            }
        }
    }
}

/// 1x1 convolution (a per-pixel linear map across channels).
pub fn conv1x1_forward(
    input: &[f64],
    cin: usize,
    plane: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
    out: &mut [f64],
) {
    debug_assert_eq!(weight.len(), cout * cin);
    for oc in 0..cout {
        let out_plane = &mut out[oc * plane..(oc + 1) * plane];
        out_plane.fill(bias[oc]);
        for ic in 0..cin {
            let coeff = weight[oc * cin + ic];
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            for (d, s) in out_plane.iter_mut().zip(in_plane) {
                *d += coeff * s;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn conv1x1_backward(
    input: &[f64],
    cin: usize,
    plane: usize,
    weight: &[f64],
    cout: usize,
    d_out: &[f64],
    d_weight: &mut [f64],
    d_bias: &mut [f64],
    d_input: &mut [f64],
) {
    d_input.fill(0.0);
    for oc in 0..cout {
        let dout_plane = &d_out[oc * plane..(oc + 1) * plane];
        d_bias[oc] += dout_plane.iter().sum::<f64>();
        for ic in 0..cin {
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            let din_plane = &mut d_input[ic * plane..(ic + 1) * plane];
            let coeff = weight[oc * cin + ic];
            let mut wgrad = 0.0;
            for ((g, x), d) in dout_plane.iter().zip(in_plane).zip(din_plane.iter_mut()) {
                wgrad += g * x;
                *d += coeff * g;
            }
            d_weight[oc * cin + ic] += wgrad;
        }
    }
}

const GELU_SCALE: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_CUBIC: f64 = 0.044715;

/// Tanh-form GELU, elementwise.
pub fn gelu_forward(pre: &[f64], out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(pre) {
        let u = GELU_SCALE * (x + GELU_CUBIC * x * x * x);
        *o = 0.5 * x * (1.0 + u.tanh());
    }
}

/// Multiplies the upstream gradient by the GELU derivative at `pre`,
/// in place.
pub fn gelu_backward(pre: &[f64], d_inout: &mut [f64]) {
    for (g, &x) in d_inout.iter_mut().zip(pre) {
        let u = GELU_SCALE * (x + GELU_CUBIC * x * x * x);
        let t = u.tanh();
        let du = GELU_SCALE * (1.0 + 3.0 * GELU_CUBIC * x * x);
        *g *= 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    }
}

/// 2x2 max pooling with stride 2. Records the winning position within each
/// window (0..4, row-major) for the backward pass; ties keep the first.
pub fn maxpool2_forward(
    input: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    out: &mut [f64],
    argmax: &mut [u8],
) {
    let (oh, ow) = (h / 2, w / 2);
    debug_assert_eq!(out.len(), channels * oh * ow);
    for ch in 0..channels {
        let in_plane = &input[ch * h * w..(ch + 1) * h * w];
        for r in 0..oh {
            for c in 0..ow {
                let base = 2 * r * w + 2 * c;
                let vals = [
                    in_plane[base],
                    in_plane[base + 1],
                    in_plane[base + w],
                    in_plane[base + w + 1],
                ];
                let mut best = 0usize;
                for k in 1..4 {
                    if vals[k] > vals[best] {
                        best = k;
                    }
                }
                let o = (ch * oh + r) * ow + c;
                out[o] = vals[best];
                argmax[o] = best as u8;
            }
        }
    }
}

pub fn maxpool2_backward(
    d_out: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    argmax: &[u8],
    d_input: &mut [f64],
) {
    let (oh, ow) = (h / 2, w / 2);
    d_input.fill(0.0);
    for ch in 0..channels {
        let din_plane = &mut d_input[ch * h * w..(ch + 1) * h * w];
        for r in 0..oh {
            for c in 0..ow {
                let o = (ch * oh + r) * ow + c;
                let k = argmax[o] as usize;
                let base = 2 * r * w + 2 * c;
                let offset = [0, 1, w, w + 1][k];
                din_plane[base + offset] += d_out[o];
            }
        }
    }
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2_forward(input: &[f64], channels: usize, h: usize, w: usize, out: &mut [f64]) {
    let (oh, ow) = (2 * h, 2 * w);
    debug_assert_eq!(out.len(), channels * oh * ow);
    for ch in 0..channels {
        let in_plane = &input[ch * h * w..(ch + 1) * h * w];
        let out_plane = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for r in 0..oh {
            let src_row = &in_plane[(r / 2) * w..(r / 2 + 1) * w];
            let dst_row = &mut out_plane[r * ow..(r + 1) * ow];
            for c in 0..ow {
                dst_row[c] = src_row[c / 2];
            }
        }
    }
}

/// Backward of nearest-neighbor upsampling: each source cell sums the
/// gradients of its four replicas.
pub fn upsample2_backward(d_out: &[f64], channels: usize, h: usize, w: usize, d_input: &mut [f64]) {
    let (oh, ow) = (2 * h, 2 * w);
    debug_assert_eq!(d_input.len(), channels * h * w);
    for ch in 0..channels {
        let dout_plane = &d_out[ch * oh * ow..(ch + 1) * oh * ow];
        let din_plane = &mut d_input[ch * h * w..(ch + 1) * h * w];
        for r in 0..h {
            for c in 0..w {
                let base = 2 * r * ow + 2 * c;
                din_plane[r * w + c] = dout_plane[base]
                    + dout_plane[base + 1]
                    + dout_plane[base + ow]
                    + dout_plane[base + ow + 1];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Central finite differences through an arbitrary scalar loss.
    fn finite_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], i: usize, h: f64) -> f64 {
        let mut xp = x.to_vec();
        xp[i] += h;
        let up = f(&xp);
        xp[i] -= 2.0 * h;
        let down = f(&xp);
        (up - down) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn conv3x3_matches_reference_on_small_case() {
        // 1x3x3 input, identity-ish kernel placement checks padding.
        let input = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let mut weight = vec![0.0; 9];
        weight[5] = 1.0; // (kr=1, kc=2): east neighbor
        let mut out = vec![0.0; 9];
        conv3x3_forward(&input, 1, 3, 3, &weight, &[0.5], 1, &mut out);
        // out[r][c] = 0.5 + input[r][c+1], zero past the border
        assert_eq!(out, vec![2.5, 3.5, 0.5, 5.5, 6.5, 0.5, 8.5, 9.5, 0.5]);
    }

    #[test]
    fn conv3x3_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (cin, cout, h, w) = (3, 2, 6, 5);
        let input = rand_vec(&mut rng, cin * h * w);
        let weight = rand_vec(&mut rng, cout * cin * 9);
        let bias = rand_vec(&mut rng, cout);
        let upstream = rand_vec(&mut rng, cout * h * w);

        let loss = |inp: &[f64], wgt: &[f64], b: &[f64]| -> f64 {
            let mut out = vec![0.0; cout * h * w];
            conv3x3_forward(inp, cin, h, w, wgt, b, cout, &mut out);
            out.iter().zip(&upstream).map(|(o, u)| o * u).sum()
        };

        let mut d_weight = vec![0.0; weight.len()];
        let mut d_bias = vec![0.0; bias.len()];
        let mut d_input = vec![0.0; input.len()];
        conv3x3_backward(
            &input, cin, h, w, &weight, cout, &upstream, &mut d_weight, &mut d_bias,
            &mut d_input,
        );

        let h_step = 1e-5;
        for i in (0..input.len()).step_by(17) {
            let fd = finite_diff(&mut |x| loss(x, &weight, &bias), &input, i, h_step);
            assert!(rel_err(fd, d_input[i]) < 1e-6, "d_input[{i}]");
        }
        for i in 0..weight.len() {
            let fd = finite_diff(&mut |x| loss(&input, x, &bias), &weight, i, h_step);
            assert!(rel_err(fd, d_weight[i]) < 1e-6, "d_weight[{i}]");
        }
        for i in 0..bias.len() {
            let fd = finite_diff(&mut |x| loss(&input, &weight, x), &bias, i, h_step);
            assert!(rel_err(fd, d_bias[i]) < 1e-6, "d_bias[{i}]");
        }
    }

    #[test]
    fn gelu_gradient_matches_finite_differences() {
        let xs: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.17).collect();
        let mut grads = vec![1.0; xs.len()];
        gelu_backward(&xs, &mut grads);
        for (i, &x) in xs.iter().enumerate() {
            let h = 1e-6;
            let mut lo = [0.0];
            let mut hi = [0.0];
            gelu_forward(&[x - h], &mut lo);
            gelu_forward(&[x + h], &mut hi);
            let fd = (hi[0] - lo[0]) / (2.0 * h);
            assert!(rel_err(fd, grads[i]) < 1e-6, "gelu'({x})");
        }
    }

    #[test]
    fn pool_and_upsample_roundtrip_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (ch, h, w) = (2, 4, 6);
        let input = rand_vec(&mut rng, ch * h * w);
        let mut pooled = vec![0.0; ch * h * w / 4];
        let mut argmax = vec![0u8; ch * h * w / 4];
        maxpool2_forward(&input, ch, h, w, &mut pooled, &mut argmax);

        // Gradient of sum(pooled) wrt input is 1 at each argmax.
        let mut d_input = vec![0.0; input.len()];
        maxpool2_backward(&vec![1.0; pooled.len()], ch, h, w, &argmax, &mut d_input);
        assert_eq!(d_input.iter().sum::<f64>(), pooled.len() as f64);
        for (i, &g) in d_input.iter().enumerate() {
            assert!(g == 0.0 || g == 1.0, "pool grad at {i}");
        }

        // Upsample backward sums each 2x2 replica block.
        let mut up = vec![0.0; ch * h * w * 4];
        upsample2_forward(&input, ch, h, w, &mut up);
        let mut back = vec![0.0; input.len()];
        upsample2_backward(&vec![1.0; up.len()], ch, h, w, &mut back);
        assert!(back.iter().all(|&g| g == 4.0));
    }

    #[test]
    fn conv1x1_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (cin, cout, plane) = (4, 3, 10);
        let input = rand_vec(&mut rng, cin * plane);
        let weight = rand_vec(&mut rng, cout * cin);
        let bias = rand_vec(&mut rng, cout);
        let upstream = rand_vec(&mut rng, cout * plane);

        let loss = |inp: &[f64], wgt: &[f64], b: &[f64]| -> f64 {
            let mut out = vec![0.0; cout * plane];
            conv1x1_forward(inp, cin, plane, wgt, b, cout, &mut out);
            out.iter().zip(&upstream).map(|(o, u)| o * u).sum()
        };

        let mut d_weight = vec![0.0; weight.len()];
        let mut d_bias = vec![0.0; bias.len()];
        let mut d_input = vec![0.0; input.len()];
        conv1x1_backward(
            &input, cin, plane, &weight, cout, &upstream, &mut d_weight, &mut d_bias,
            &mut d_input,
        );
        let h = 1e-5;
        for i in 0..weight.len() {
            let fd = finite_diff(&mut |x| loss(&input, x, &bias), &weight, i, h);
            assert!(rel_err(fd, d_weight[i]) < 1e-6);
        }
        for i in 0..input.len() {
            let fd = finite_diff(&mut |x| loss(x, &weight, &bias), &input, i, h);
            assert!(rel_err(fd, d_input[i]) < 1e-6);
        }
    }
}
