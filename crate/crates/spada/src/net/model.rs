//! The segmentation network: a small convolutional encoder-decoder with
//! skip connections and a 1x1 classification head.
//!
//! Each encoder level is conv3x3 -> GELU -> 2x2 max-pool; the decoder
//! mirrors it with nearest-neighbor upsampling and channel concatenation
//! of the pre-pool encoder activation. The head starts at zero so a fresh
//! model predicts the uniform distribution.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ops;
use super::tensor::{Gradients, NamedTensor, ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::raster::{MultiSpectralImage, ProbabilityMap, TRAINABLE_CLASSES};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub in_bands: usize,
    pub widths: Vec<usize>,
    pub classes: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            in_bands: 12,
            widths: vec![16, 32, 64],
            classes: TRAINABLE_CLASSES,
        }
    }
}

impl Architecture {
    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    /// Spatial downsampling factor; input sides must be divisible by it.
    pub fn stride(&self) -> usize {
        1 << self.levels()
    }

    fn validate(&self) -> Result<()> {
        if self.in_bands == 0 || self.classes == 0 || self.widths.is_empty() {
            return Err(Error::InvalidConfig(
                "architecture needs input bands, at least one level, and classes".to_string(),
            ));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("zero-width level".to_string()));
        }
        Ok(())
    }

    /// Decoder conv input width at level `l`: upsampled deeper activation
    /// concatenated with the level-`l` skip.
    fn dec_in(&self, level: usize) -> usize {
        let up = if level + 1 == self.levels() {
            self.widths[level]
        } else {
            self.widths[level + 1]
        };
        up + self.widths[level]
    }
}

#[derive(Clone, Debug)]
pub struct SegModel {
    pub arch: Architecture,
    pub params: ParamSet,
    pub seed: u64,
}

/// Activations retained by [`SegModel::forward`] for the backward pass.
pub struct ForwardCache {
    height: usize,
    width: usize,
    input: Vec<f64>,
    enc_pre: Vec<Vec<f64>>,
    enc_act: Vec<Vec<f64>>,
    pool_idx: Vec<Vec<u8>>,
    pooled: Vec<Vec<f64>>,
    dec_cat: Vec<Vec<f64>>,
    dec_pre: Vec<Vec<f64>>,
    dec_act: Vec<Vec<f64>>,
}

impl SegModel {
    /// Builds a seeded model: Kaiming-uniform fan-in for conv kernels,
    /// zero biases, zero head.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = Vec::new();
        let levels = arch.levels();

        let mut kaiming = |shape: Vec<usize>, fan_in: usize, rng: &mut ChaCha8Rng| -> Tensor {
            let bound = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let len = shape.iter().product();
            let data = (0..len).map(|_| dist.sample(rng)).collect();
            Tensor::from_data(shape, data)
        };

        let mut prev = arch.in_bands;
        for (l, &width) in arch.widths.iter().enumerate() {
            tensors.push(NamedTensor {
                name: format!("enc{l}.weight"),
                tensor: kaiming(vec![width, prev, 3, 3], prev * 9, &mut rng),
            });
            tensors.push(NamedTensor {
                name: format!("enc{l}.bias"),
                tensor: Tensor::zeros(vec![width]),
            });
            prev = width;
        }
        for l in (0..levels).rev() {
            let cin = arch.dec_in(l);
            let width = arch.widths[l];
            tensors.push(NamedTensor {
                name: format!("dec{l}.weight"),
                tensor: kaiming(vec![width, cin, 3, 3], cin * 9, &mut rng),
            });
            tensors.push(NamedTensor {
                name: format!("dec{l}.bias"),
                tensor: Tensor::zeros(vec![width]),
            });
        }
        tensors.push(NamedTensor {
            name: "head.weight".to_string(),
            tensor: Tensor::zeros(vec![arch.classes, arch.widths[0]]),
        });
        tensors.push(NamedTensor {
            name: "head.bias".to_string(),
            tensor: Tensor::zeros(vec![arch.classes]),
        });

        Ok(Self {
            arch,
            params: ParamSet { tensors },
            seed,
        })
    }

    fn param(&self, index: usize) -> &Tensor {
        &self.params.tensors[index].tensor
    }

    /// Index of `enc{l}` / `dec{l}` / head tensors in the flat layout.
    fn enc_idx(l: usize) -> usize {
        2 * l
    }

    fn dec_idx(&self, l: usize) -> usize {
        let levels = self.arch.levels();
        2 * levels + 2 * (levels - 1 - l)
    }

    fn head_idx(&self) -> usize {
        4 * self.arch.levels()
    }

    fn check_input(&self, image: &MultiSpectralImage) -> Result<()> {
        if image.band_count() != self.arch.in_bands {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} bands, image has {}",
                self.arch.in_bands,
                image.band_count()
            )));
        }
        let stride = self.arch.stride();
        if image.height() % stride != 0 || image.width() % stride != 0 {
            return Err(Error::ShapeMismatch(format!(
                "image {}x{} not divisible by the model stride {stride}",
                image.height(),
                image.width()
            )));
        }
        Ok(())
    }

    /// Runs the network, returning `classes x H x W` logits and the cache
    /// needed by [`SegModel::backward`].
    pub fn forward(&self, image: &MultiSpectralImage) -> Result<(Tensor, ForwardCache)> {
        self.check_input(image)?;
        let levels = self.arch.levels();
        let (height, width) = (image.height(), image.width());
        let input: Vec<f64> = image.data().iter().map(|&v| v as f64).collect();

        let mut enc_pre = Vec::with_capacity(levels);
        let mut enc_act = Vec::with_capacity(levels);
        let mut pool_idx = Vec::with_capacity(levels);
        let mut pooled = Vec::with_capacity(levels);

        let mut cur = input.clone();
        let (mut h, mut w) = (height, width);
        let mut cur_ch = self.arch.in_bands;
        for l in 0..levels {
            let width_l = self.arch.widths[l];
            let weight = self.param(Self::enc_idx(l));
            let bias = self.param(Self::enc_idx(l) + 1);
            let mut pre = vec![0.0; width_l * h * w];
            ops::conv3x3_forward(
                &cur, cur_ch, h, w, &weight.data, &bias.data, width_l, &mut pre,
            );
            let mut act = vec![0.0; pre.len()];
            ops::gelu_forward(&pre, &mut act);
            let mut pool = vec![0.0; width_l * (h / 2) * (w / 2)];
            let mut idx = vec![0u8; pool.len()];
            ops::maxpool2_forward(&act, width_l, h, w, &mut pool, &mut idx);
            enc_pre.push(pre);
            enc_act.push(act);
            pool_idx.push(idx);
            cur = pool.clone();
            pooled.push(pool);
            cur_ch = width_l;
            h /= 2;
            w /= 2;
        }

        let mut dec_cat = vec![Vec::new(); levels];
        let mut dec_pre = vec![Vec::new(); levels];
        let mut dec_act = vec![Vec::new(); levels];
        // `cur` is the bottom activation at (h, w) with widths[levels-1]
        // channels; walk back up.
        for l in (0..levels).rev() {
            let (uh, uw) = (h * 2, w * 2);
            let mut up = vec![0.0; cur_ch * uh * uw];
            ops::upsample2_forward(&cur, cur_ch, h, w, &mut up);
            let skip = &enc_act[l];
            let skip_ch = self.arch.widths[l];
            let cat_ch = cur_ch + skip_ch;
            let mut cat = Vec::with_capacity(cat_ch * uh * uw);
            cat.extend_from_slice(&up);
            cat.extend_from_slice(skip);
            let out_ch = self.arch.widths[l];
            let weight = self.param(self.dec_idx(l));
            let bias = self.param(self.dec_idx(l) + 1);
            let mut pre = vec![0.0; out_ch * uh * uw];
            ops::conv3x3_forward(
                &cat, cat_ch, uh, uw, &weight.data, &bias.data, out_ch, &mut pre,
            );
            let mut act = vec![0.0; pre.len()];
            ops::gelu_forward(&pre, &mut act);
            dec_cat[l] = cat;
            dec_pre[l] = pre;
            cur = act.clone();
            dec_act[l] = act;
            cur_ch = out_ch;
            h = uh;
            w = uw;
        }

        let head_w = self.param(self.head_idx());
        let head_b = self.param(self.head_idx() + 1);
        let mut logits = vec![0.0; self.arch.classes * height * width];
        ops::conv1x1_forward(
            &cur,
            cur_ch,
            height * width,
            &head_w.data,
            &head_b.data,
            self.arch.classes,
            &mut logits,
        );

        let cache = ForwardCache {
            height,
            width,
            input,
            enc_pre,
            enc_act,
            pool_idx,
            pooled,
            dec_cat,
            dec_pre,
            dec_act,
        };
        Ok((
            Tensor::from_data(vec![self.arch.classes, height, width], logits),
            cache,
        ))
    }

    /// Backpropagates `d_logits` through the cached forward pass,
    /// returning gradients for every parameter.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Tensor) -> Result<Gradients> {
        let levels = self.arch.levels();
        if cache.enc_pre.len() != levels
            || cache.input.len() != self.arch.in_bands * cache.height * cache.width
        {
            return Err(Error::StaleCache(
                "cache does not match the model architecture".to_string(),
            ));
        }
        if d_logits.shape != vec![self.arch.classes, cache.height, cache.width] {
            return Err(Error::StaleCache(format!(
                "upstream gradient shape {:?} does not match cached forward {}x{}",
                d_logits.shape, cache.height, cache.width
            )));
        }

        let mut grads = self.params.zeros_like();
        let plane = cache.height * cache.width;
        let w0 = self.arch.widths[0];

        // Head.
        let head_idx = self.head_idx();
        let mut d_cur = vec![0.0; w0 * plane];
        {
            let (before, rest) = grads.tensors.split_at_mut(head_idx + 1);
            let d_head_w = &mut before[head_idx].tensor.data;
            let d_head_b = &mut rest[0].tensor.data;
            ops::conv1x1_backward(
                &cache.dec_act[0],
                w0,
                plane,
                &self.param(head_idx).data,
                self.arch.classes,
                &d_logits.data,
                d_head_w,
                d_head_b,
                &mut d_cur,
            );
        }

        // Decoder, shallow to deep. `d_cur` holds the gradient wrt the
        // post-GELU activation of dec level `l`.
        let mut d_skips: Vec<Vec<f64>> = Vec::with_capacity(levels);
        let (mut h, mut w) = (cache.height, cache.width);
        for l in 0..levels {
            let out_ch = self.arch.widths[l];
            let cat_ch = self.arch.dec_in(l);
            let up_ch = cat_ch - self.arch.widths[l];
            let mut d_pre = std::mem::take(&mut d_cur);
            ops::gelu_backward(&cache.dec_pre[l], &mut d_pre);
            let mut d_cat = vec![0.0; cat_ch * h * w];
            {
                let idx = self.dec_idx(l);
                let (before, rest) = grads.tensors.split_at_mut(idx + 1);
                ops::conv3x3_backward(
                    &cache.dec_cat[l],
                    cat_ch,
                    h,
                    w,
                    &self.param(idx).data,
                    out_ch,
                    &d_pre,
                    &mut before[idx].tensor.data,
                    &mut rest[0].tensor.data,
                    &mut d_cat,
                );
            }
            let (d_up, d_skip) = d_cat.split_at(up_ch * h * w);
            d_skips.push(d_skip.to_vec());
            let mut d_deeper = vec![0.0; up_ch * (h / 2) * (w / 2)];
            ops::upsample2_backward(d_up, up_ch, h / 2, w / 2, &mut d_deeper);
            h /= 2;
            w /= 2;
            d_cur = d_deeper;
        }

        // After the deepest decoder level, `d_cur` is the gradient wrt the
        // bottom, i.e. the pooled output of the last encoder level.
        let mut d_pooled = d_cur;
        for l in (0..levels).rev() {
            let (ah, aw) = (cache.height >> l, cache.width >> l);
            let ch = self.arch.widths[l];
            let mut d_act = vec![0.0; ch * ah * aw];
            ops::maxpool2_backward(&d_pooled, ch, ah, aw, &cache.pool_idx[l], &mut d_act);
            for (d, s) in d_act.iter_mut().zip(&d_skips[l]) {
                *d += s;
            }
            ops::gelu_backward(&cache.enc_pre[l], &mut d_act);
            let (conv_in, cin): (&[f64], usize) = if l == 0 {
                (&cache.input, self.arch.in_bands)
            } else {
                (&cache.pooled[l - 1], self.arch.widths[l - 1])
            };
            let mut d_in = vec![0.0; cin * ah * aw];
            {
                let idx = Self::enc_idx(l);
                let (before, rest) = grads.tensors.split_at_mut(idx + 1);
                ops::conv3x3_backward(
                    conv_in,
                    cin,
                    ah,
                    aw,
                    &self.param(idx).data,
                    ch,
                    &d_act,
                    &mut before[idx].tensor.data,
                    &mut rest[0].tensor.data,
                    &mut d_in,
                );
            }
            d_pooled = d_in;
        }

        Ok(grads)
    }

    /// Convenience inference: forward pass plus per-pixel softmax.
    pub fn infer(&self, image: &MultiSpectralImage) -> Result<ProbabilityMap> {
        let (logits, _) = self.forward(image)?;
        softmax_probabilities(&logits)
    }
}

/// Per-pixel softmax of `C x H x W` logits.
pub fn softmax_probabilities(logits: &Tensor) -> Result<ProbabilityMap> {
    if logits.shape.len() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "expected C x H x W logits, got {:?}",
            logits.shape
        )));
    }
    let (classes, h, w) = (logits.shape[0], logits.shape[1], logits.shape[2]);
    if classes != TRAINABLE_CLASSES {
        return Err(Error::ShapeMismatch(format!(
            "expected {TRAINABLE_CLASSES} classes, got {classes}"
        )));
    }
    let plane = h * w;
    let mut probs = vec![0.0f32; classes * plane];
    for i in 0..plane {
        let mut max = f64::NEG_INFINITY;
        for c in 0..classes {
            max = max.max(logits.data[c * plane + i]);
        }
        if !max.is_finite() {
            return Err(Error::NonFiniteValue("logits".to_string()));
        }
        let mut denom = 0.0;
        for c in 0..classes {
            denom += (logits.data[c * plane + i] - max).exp();
        }
        for c in 0..classes {
            probs[c * plane + i] =
                (((logits.data[c * plane + i] - max).exp()) / denom) as f32;
        }
    }
    ProbabilityMap::new(probs, h, w)
}

/// Exponential moving average of the student into the teacher:
/// `teacher = alpha * teacher + (1 - alpha) * student`, per tensor.
/// The endpoints are exact: alpha 0 copies the student, alpha 1 leaves
/// the teacher untouched.
pub fn ema_update(teacher: &mut SegModel, student: &SegModel, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "EMA decay {alpha} outside [0, 1]"
        )));
    }
    if teacher.arch != student.arch {
        return Err(Error::ShapeMismatch(
            "EMA between different architectures".to_string(),
        ));
    }
    teacher
        .params
        .check_congruent(&student.params, "ema_update")?;
    ema_update_params(&mut teacher.params, &student.params, alpha);
    Ok(())
}

/// The EMA rule on bare parameter sets; callers must have checked
/// congruence.
pub fn ema_update_params(teacher: &mut ParamSet, student: &ParamSet, alpha: f64) {
    if alpha == 0.0 {
        for (t, s) in teacher.tensors.iter_mut().zip(&student.tensors) {
            t.tensor.data.copy_from_slice(&s.tensor.data);
        }
        return;
    }
    if alpha == 1.0 {
        return;
    }
    for (t, s) in teacher.tensors.iter_mut().zip(&student.tensors) {
        for (tv, sv) in t.tensor.data.iter_mut().zip(&s.tensor.data) {
            *tv = alpha * *tv + (1.0 - alpha) * sv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_image(seed: u64, bands: usize, h: usize, w: usize) -> MultiSpectralImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = if bands == 12 {
            MultiSpectralImage::default_band_names()
        } else {
            let mut names: Vec<String> = vec!["Red".into(), "Green".into(), "NIR".into()];
            names.extend((3..bands).map(|i| format!("B{i}")));
            names
        };
        let data = (0..bands * h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        MultiSpectralImage::new(data, names, h, w).unwrap()
    }

    #[test]
    fn fresh_model_predicts_uniform() {
        let model = SegModel::new(Architecture::default(), 1).unwrap();
        let image = random_image(2, 12, 8, 8);
        let probs = model.infer(&image).unwrap();
        for &p in probs.values() {
            assert!((p - 1.0 / 9.0).abs() < 1e-6);
        }
    }

    #[test]
    fn forward_is_deterministic_and_shaped() {
        let model = SegModel::new(Architecture::default(), 9).unwrap();
        let image = random_image(3, 12, 64, 64);
        let (a, _) = model.forward(&image).unwrap();
        let (b, _) = model.forward(&image).unwrap();
        assert_eq!(a.shape, vec![9, 64, 64]);
        assert!(a
            .data
            .iter()
            .zip(&b.data)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let model2 = SegModel::new(Architecture::default(), 9).unwrap();
        let (c, _) = model2.forward(&image).unwrap();
        assert!(a
            .data
            .iter()
            .zip(&c.data)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn seeded_models_are_identical() {
        let a = SegModel::new(Architecture::default(), 42).unwrap();
        let b = SegModel::new(Architecture::default(), 42).unwrap();
        assert_eq!(a.params, b.params);
        let c = SegModel::new(Architecture::default(), 43).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn rejects_bad_shapes() {
        let model = SegModel::new(Architecture::default(), 1).unwrap();
        let image = random_image(2, 12, 12, 12); // not divisible by 8
        assert!(model.forward(&image).is_err());
        let image = random_image(2, 4, 8, 8); // wrong band count
        assert!(model.forward(&image).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let model = SegModel::new(Architecture::default(), 5).unwrap();
        let image = random_image(6, 12, 8, 8);
        let (logits, cache) = model.forward(&image).unwrap();
        let zeros = Tensor::zeros(logits.shape.clone());
        let grads = model.backward(&cache, &zeros).unwrap();
        for t in &grads.tensors {
            assert!(t.tensor.data.iter().all(|&g| g == 0.0), "{}", t.name);
        }
    }

    #[test]
    fn gradient_is_linear_in_upstream() {
        let model = SegModel::new(Architecture::default(), 5).unwrap();
        let image = random_image(6, 12, 8, 8);
        let (logits, cache) = model.forward(&image).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let upstream = Tensor::from_data(
            logits.shape.clone(),
            (0..logits.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );
        let doubled = Tensor::from_data(
            upstream.shape.clone(),
            upstream.data.iter().map(|&v| 2.0 * v).collect(),
        );
        let g1 = model.backward(&cache, &upstream).unwrap();
        let g2 = model.backward(&cache, &doubled).unwrap();
        for (a, b) in g1.tensors.iter().zip(&g2.tensors) {
            for (x, y) in a.tensor.data.iter().zip(&b.tensor.data) {
                assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let model = SegModel::new(Architecture::default(), 5).unwrap();
        let image = random_image(6, 12, 8, 8);
        let (_, cache) = model.forward(&image).unwrap();
        let wrong = Tensor::zeros(vec![9, 16, 16]);
        assert!(matches!(
            model.backward(&cache, &wrong).unwrap_err(),
            Error::StaleCache(_)
        ));
    }

    /// Finite-difference check of one parameter against the analytic
    /// gradient of a fixed linear projection of the logits. Returns the
    /// relative error.
    fn fd_rel_err(
        model: &SegModel,
        image: &MultiSpectralImage,
        upstream: &Tensor,
        tensor_idx: usize,
        elem_idx: usize,
        h: f64,
    ) -> f64 {
        let (_, cache) = model.forward(image).unwrap();
        let analytic = model.backward(&cache, upstream).unwrap();
        let score = |m: &SegModel| -> f64 {
            let (l, _) = m.forward(image).unwrap();
            l.data.iter().zip(&upstream.data).map(|(a, b)| a * b).sum()
        };
        let mut probe = model.clone();
        probe.params.tensors[tensor_idx].tensor.data[elem_idx] += h;
        let up = score(&probe);
        probe.params.tensors[tensor_idx].tensor.data[elem_idx] -= 2.0 * h;
        let down = score(&probe);
        let fd = (up - down) / (2.0 * h);
        let an = analytic.tensors[tensor_idx].tensor.data[elem_idx];
        (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6)
    }

    /// End-to-end gradient check of a scalar projection of the logits.
    /// Max-pool argmax flips make the projection piecewise smooth, so a
    /// check that straddles a kink is retried on a perturbed input; a real
    /// gradient bug fails on every input.
    #[test]
    fn backward_matches_finite_differences() {
        let arch = Architecture {
            in_bands: 12,
            widths: vec![4, 6, 8],
            classes: 9,
        };
        let mut model = SegModel::new(arch, 77).unwrap();
        // Non-zero head so head gradients are informative too.
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        for idx in [model.head_idx(), model.head_idx() + 1] {
            for v in &mut model.params.tensors[idx].tensor.data {
                *v = rng.gen_range(-0.3..0.3);
            }
        }
        let upstream = Tensor::from_data(
            vec![9, 8, 8],
            (0..9 * 64).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        );

        let h = 1e-3;
        let mut checked = 0usize;
        for ti in 0..model.params.tensors.len() {
            let n = model.params.tensors[ti].tensor.len();
            for k in 0..4.min(n) {
                let i = (k * 131 + 7) % n;
                let mut rel = f64::INFINITY;
                for attempt in 0..3 {
                    let image = random_image(79 + attempt, 12, 8, 8);
                    rel = fd_rel_err(&model, &image, &upstream, ti, i, h);
                    if rel < 1e-4 {
                        break;
                    }
                }
                assert!(
                    rel < 1e-4,
                    "tensor {} [{i}]: rel error {rel} on every input tried",
                    model.params.tensors[ti].name
                );
                checked += 1;
            }
        }
        assert!(checked >= 50);
    }

    #[test]
    fn ema_endpoints_and_midpoint() {
        let student = SegModel::new(Architecture::default(), 10).unwrap();
        let mut teacher = SegModel::new(Architecture::default(), 11).unwrap();

        let mut t0 = teacher.clone();
        ema_update(&mut t0, &student, 0.0).unwrap();
        for (a, b) in t0.params.tensors.iter().zip(&student.params.tensors) {
            assert!(a
                .tensor
                .data
                .iter()
                .zip(&b.tensor.data)
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }

        let t1_before = teacher.params.clone();
        ema_update(&mut teacher, &student, 1.0).unwrap();
        assert_eq!(teacher.params, t1_before);

        // Scalar probe: 0.5 * 2 + 0.5 * 4 = 3.
        let mut t = ParamSet {
            tensors: vec![NamedTensor {
                name: "p".to_string(),
                tensor: Tensor::from_data(vec![1], vec![2.0]),
            }],
        };
        let s = ParamSet {
            tensors: vec![NamedTensor {
                name: "p".to_string(),
                tensor: Tensor::from_data(vec![1], vec![4.0]),
            }],
        };
        ema_update_params(&mut t, &s, 0.5);
        assert_eq!(t.tensors[0].tensor.data[0], 3.0);
    }
}
