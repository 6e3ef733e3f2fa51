//! Small fully connected network with tanh hidden layers, a linear output
//! layer and a hand-written backward pass.
//!
//! Parameters live in one flat `f64` vector. For each layer, in order, the
//! weight matrix is stored row-major as `[out][in]`, followed by the bias
//! vector `[out]`. The checkpoint format relies on this layout.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations of every layer from the last forward pass, input included.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|&s| s > 0), "bad layer sizes {sizes:?}");
        Self { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] }
    }

    /// Uniform fan-in initialisation, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// biases zero.
    pub fn init_uniform<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut m = Self::zeros(sizes);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut m.params[off..off + fan_in * fan_out] {
                *p = rng.gen_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        m
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Checkpoint(format!("invalid layer sizes {sizes:?}")));
        }
        if params.len() != param_count(sizes) {
            return Err(Error::Checkpoint(format!(
                "layer sizes {sizes:?} need {} parameters, got {}",
                param_count(sizes),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `(weights, bias)` of layer `k`; weights are `[out][in]` row-major.
    pub fn layer(&self, k: usize) -> (&[f64], &[f64]) {
        let off: usize = param_count(&self.sizes[..=k]);
        let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
        let w = &self.params[off..off + fan_in * fan_out];
        let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
        (w, b)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut cache = ForwardCache::default();
        self.forward_cached(x, &mut cache);
        cache.acts.pop().unwrap()
    }

    pub fn forward_cached<'c>(&self, x: &[f64], cache: &'c mut ForwardCache) -> &'c [f64] {
        assert_eq!(x.len(), self.sizes[0], "input width");
        let layers = self.num_layers();
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let mut off = 0;
        for k in 0..layers {
            let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            off += fan_in * fan_out + fan_out;

            let (prev, rest) = cache.acts.split_at_mut(k + 1);
            let input = &prev[k];
            let out = &mut rest[0];
            out.clear();
            let last = k + 1 == layers;
            for (row, bias) in w.chunks_exact(fan_in).zip(b) {
                let z = bias + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                out.push(if last { z } else { z.tanh() });
            }
        }
        cache.output()
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d_out`, the
    /// gradient with respect to the output of the cached forward pass.
    pub fn backward(&self, cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        let layers = self.num_layers();
        assert_eq!(grad.len(), self.params.len());
        assert_eq!(d_out.len(), self.output_width());
        let mut delta = d_out.to_vec();
        let mut off_end = self.params.len();
        for k in (0..layers).rev() {
            let (fan_in, fan_out) = (self.sizes[k], self.sizes[k + 1]);
            let off = off_end - (fan_in * fan_out + fan_out);
            off_end = off;
            let input = &cache.acts[k];
            {
                let (gw, gb) = grad[off..off + fan_in * fan_out + fan_out].split_at_mut(fan_in * fan_out);
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    for (g, &x) in gw[o * fan_in..(o + 1) * fan_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if k > 0 {
                let w = &self.params[off..off + fan_in * fan_out];
                let mut prev = vec![0.0; fan_in];
                for (o, &d) in delta.iter().enumerate() {
                    for (p, &wv) in prev.iter_mut().zip(&w[o * fan_in..(o + 1) * fan_in]) {
                        *p += d * wv;
                    }
                }
                // tanh'(z) = 1 - tanh(z)^2
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_and_counts() {
        let m = Mlp::zeros(&[16, 64, 64, 5]);
        assert_eq!(m.params().len(), 16 * 64 + 64 + 64 * 64 + 64 + 64 * 5 + 5);
        let (w, b) = m.layer(2);
        assert_eq!((w.len(), b.len()), (320, 5));
    }

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(&[3, 4, 2]);
        assert_eq!(m.forward(&[1.0, -2.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_forward() {
        // 2 -> 1 (tanh) -> 1, weights picked so the result is easy to check
        let m = Mlp::from_params(&[2, 1, 1], vec![0.5, -1.0, 0.25, 2.0, -0.5]).unwrap();
        let h = (0.5 * 1.0 - 1.0 * 2.0 + 0.25f64).tanh();
        let y = m.forward(&[1.0, 2.0])[0];
        assert!((y - (2.0 * h - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = Mlp::init_uniform(&[4, 6, 5, 3], &mut rng);
        for b in m.params_mut() {
            *b += 0.01;
        }
        let x = [0.3, -0.7, 1.1, 0.05];
        let weights = [0.7, -1.3, 0.4];
        let loss = |m: &Mlp| m.forward(&x).iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
        let mut cache = ForwardCache::default();
        m.forward_cached(&x, &mut cache);
        let mut grad = vec![0.0; m.params().len()];
        m.backward(&cache, &weights, &mut grad);
        let h = 1e-6;
        for i in 0..grad.len() {
            let mut p = m.clone();
            p.params_mut()[i] += h;
            let mut q = m.clone();
            q.params_mut()[i] -= h;
            let fd = (loss(&p) - loss(&q)) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-8, "param {i}: fd {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn rejects_wrong_parameter_count() {
        assert!(Mlp::from_params(&[2, 2], vec![0.0; 5]).is_err());
        assert!(Mlp::from_params(&[2, 2], vec![f64::NAN; 6]).is_err());
    }
}
