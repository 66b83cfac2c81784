//! Fully connected network with tanh hidden layers and a linear output.
//!
//! Parameters live in one flat vector. Each layer stores its weights row by
//! row (`out × in`) followed by its biases.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input, the last entry the output.
    activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("non-empty")
    }
}

pub fn parameter_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    /// Network of zeros.
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|&s| s > 0),
            "invalid layer sizes {sizes:?}"
        );
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; parameter_count(sizes)],
        }
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && sizes.iter().all(|&s| s > 0) && params.len() == parameter_count(sizes)).then(|| Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// Orthogonal weights scaled by `hidden_gain` (last layer `output_gain`),
    /// zero biases.
    pub fn orthogonal<R: Rng>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let n_layers = sizes.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == n_layers { output_gain } else { hidden_gain };
            let w = orthogonal_matrix(n_out, n_in, rng);
            for r in 0..n_out {
                for c in 0..n_in {
                    net.params[offset + r * n_in + c] = gain * w[(r, c)];
                }
            }
            offset += n_out * n_in + n_out;
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty")
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut x = input.to_vec();
        self.walk(|_, _| {}, &mut x);
        x
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        let mut activations = vec![input.to_vec()];
        self.walk(|_, y| activations.push(y.to_vec()), &mut input.to_vec());
        ForwardCache { activations }
    }

    fn walk(&self, mut visit: impl FnMut(usize, &[f64]), x: &mut Vec<f64>) {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let n_layers = self.sizes.len() - 1;
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_out * n_in];
            let b = &self.params[offset + n_out * n_in..offset + n_out * n_in + n_out];
            let mut y: Vec<f64> = (0..n_out)
                .map(|r| {
                    let row = &w[r * n_in..(r + 1) * n_in];
                    b[r] + row.iter().zip(x.iter()).map(|(a, v)| a * v).sum::<f64>()
                })
                .collect();
            if l + 1 < n_layers {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            visit(l, &y);
            *x = y;
            offset += n_out * n_in + n_out;
        }
    }

    /// Adds `∂L/∂params` to `grad` given `∂L/∂output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        let mut delta = grad_output.to_vec();
        let mut offset = self.params.len();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offset -= n_out * n_in + n_out;
            let x = &cache.activations[l];
            let (gw, gb) = grad[offset..offset + n_out * n_in + n_out].split_at_mut(n_out * n_in);
            for r in 0..n_out {
                let d = delta[r];
                gb[r] += d;
                if d != 0.0 {
                    for (g, v) in gw[r * n_in..(r + 1) * n_in].iter_mut().zip(x) {
                        *g += d * v;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[offset..offset + n_out * n_in];
            // x is the tanh output of the previous layer
            delta = (0..n_in)
                .map(|c| {
                    let s: f64 = (0..n_out).map(|r| w[r * n_in + c] * delta[r]).sum();
                    s * (1.0 - x[c] * x[c])
                })
                .collect();
        }
    }
}

/// `rows × cols` matrix with orthonormal rows or columns.
fn orthogonal_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let (tall_r, tall_c) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::from_fn(tall_r, tall_c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // fix signs so the distribution is uniform
    for j in 0..tall_c {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}
