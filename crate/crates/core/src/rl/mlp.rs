//! Fully connected tanh network with hand-written reverse mode.
//!
//! Parameters are kept outside the network in a flat slice, layer by layer:
//! weights (`fan_in × fan_out`, row-major) followed by biases. Batches are
//! row-major `batch × features`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `c = alpha·a·b + beta·c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (isize, isize),
) {
    let last = |rows: usize, cols: usize, rs: isize, cs: isize| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows as isize - 1) * rs + (cols as isize - 1) * cs + 1
        }
    };
    assert!(a.len() as isize >= last(m, k, rsa, csa));
    assert!(b.len() as isize >= last(k, n, rsb, csb));
    assert!(c.len() as isize >= last(m, n, rsc, csc));
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is a unique borrow that cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(m, k, n, 1.0, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), rsc, csc);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    sizes: Vec<usize>,
}

/// Activations kept by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct MlpCache {
    batch: usize,
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

impl Mlp {
    /// `sizes = [input, hidden..., output]`; hidden layers use tanh, the
    /// output layer is linear.
    pub fn new(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2 && sizes.iter().all(|s| *s > 0));
        Self { sizes }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer_offsets(&self, layer: usize) -> (usize, usize, usize) {
        let start: usize = self.sizes.windows(2).take(layer).map(|w| w[0] * w[1] + w[1]).sum();
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        (start, start + fan_in * fan_out, start + fan_in * fan_out + fan_out)
    }

    /// Gaussian init scaled by `gain / sqrt(fan_in)`; the output layer uses
    /// `output_gain`. Biases start at zero.
    pub fn init<R: Rng + ?Sized>(&self, params: &mut [f64], hidden_gain: f64, output_gain: f64, rng: &mut R) {
        assert_eq!(params.len(), self.n_params());
        for layer in 0..self.n_layers() {
            let (w0, b0, end) = self.layer_offsets(layer);
            let fan_in = self.sizes[layer] as f64;
            let gain = if layer + 1 == self.n_layers() { output_gain } else { hidden_gain };
            let std = gain / fan_in.sqrt();
            for w in &mut params[w0..b0] {
                let z: f64 = StandardNormal.sample(rng);
                *w = z * std;
            }
            params[b0..end].iter_mut().for_each(|b| *b = 0.0);
        }
    }

    /// Runs `batch` rows of `input` through the network. The output is
    /// available as [`MlpCache::output`].
    pub fn forward(&self, params: &[f64], input: &[f64], batch: usize, cache: &mut MlpCache) {
        assert_eq!(params.len(), self.n_params());
        assert_eq!(input.len(), batch * self.input_dim());
        cache.batch = batch;
        cache.acts.resize_with(self.sizes.len(), Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(input);
        for layer in 0..self.n_layers() {
            let (w0, b0, end) = self.layer_offsets(layer);
            let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let (prev, rest) = cache.acts.split_at_mut(layer + 1);
            let x = &prev[layer];
            let z = &mut rest[0];
            z.clear();
            z.resize(batch * fan_out, 0.0);
            gemm(
                batch,
                fan_in,
                fan_out,
                x,
                (fan_in as isize, 1),
                &params[w0..b0],
                (fan_out as isize, 1),
                0.0,
                z,
                (fan_out as isize, 1),
            );
            let bias = &params[b0..end];
            let hidden = layer + 1 < self.n_layers();
            for row in z.chunks_mut(fan_out) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                    if hidden {
                        *v = v.tanh();
                    }
                }
            }
        }
    }

    /// Backpropagates `d_out` (`batch × output`) through the activations in
    /// `cache`, writing parameter gradients into `grad` (overwritten).
    pub fn backward(&self, params: &[f64], cache: &mut MlpCache, d_out: &[f64], grad: &mut [f64]) {
        let batch = cache.batch;
        assert_eq!(grad.len(), self.n_params());
        assert_eq!(d_out.len(), batch * self.output_dim());
        let mut delta = d_out.to_vec();
        for layer in (0..self.n_layers()).rev() {
            let (w0, b0, end) = self.layer_offsets(layer);
            let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
            let a_prev = &cache.acts[layer];
            // dW = a_prevᵀ · delta
            gemm(
                fan_in,
                batch,
                fan_out,
                a_prev,
                (1, fan_in as isize),
                &delta,
                (fan_out as isize, 1),
                0.0,
                &mut grad[w0..b0],
                (fan_out as isize, 1),
            );
            let db = &mut grad[b0..end];
            db.iter_mut().for_each(|g| *g = 0.0);
            for row in delta.chunks(fan_out) {
                for (g, d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if layer == 0 {
                break;
            }
            // delta_prev = delta · Wᵀ, then through tanh'
            let scratch = &mut cache.scratch;
            scratch.clear();
            scratch.resize(batch * fan_in, 0.0);
            gemm(
                batch,
                fan_out,
                fan_in,
                &delta,
                (fan_out as isize, 1),
                &params[w0..b0],
                (1, fan_out as isize),
                0.0,
                scratch,
                (fan_in as isize, 1),
            );
            for (d, a) in scratch.iter_mut().zip(a_prev) {
                *d *= 1.0 - a * a;
            }
            std::mem::swap(&mut delta, scratch);
        }
    }
}
