use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

/// Affine map `y = W x + b` with `W` stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    /// Weights uniform in `±1/sqrt(inputs)`, zero bias.
    pub fn random<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = 1.0 / libm::sqrt(inputs as f64);
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-limit..limit)).collect();
        Dense { inputs, outputs, weights, bias: vec![0.0; outputs] }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs, self.outputs)
    }

    /// Applies the layer to `rows` stacked inputs.
    pub fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), rows * self.inputs);
        let mut y = Vec::with_capacity(rows * self.outputs);
        for xr in x.chunks_exact(self.inputs) {
            for (w, &b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
                y.push(b + dot(w, xr));
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and, when `dx` is given,
    /// writes the input gradient into it.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, mut dx: Option<&mut [f64]>) {
        if let Some(dx) = dx.as_deref_mut() {
            dx.fill(0.0);
        }
        for (r, (xr, dyr)) in x.chunks_exact(self.inputs).zip(dy.chunks_exact(self.outputs)).enumerate() {
            for (o, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grad.bias[o] += g;
                let span = o * self.inputs..(o + 1) * self.inputs;
                axpy(g, xr, &mut grad.weights[span.clone()]);
                if let Some(dx) = dx.as_deref_mut() {
                    axpy(g, &self.weights[span], &mut dx[r * self.inputs..(r + 1) * self.inputs]);
                }
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Two affine layers with a rectifier in between.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Dense,
    pub output: Dense,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    pre: Vec<f64>,
    act: Vec<f64>,
}

impl Mlp {
    pub fn random<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        let h = Dense::random(inputs, hidden, rng);
        let o = Dense::random(hidden, outputs, rng);
        Mlp { hidden: h, output: o }
    }

    pub fn zeros_like(&self) -> Self {
        Mlp { hidden: self.hidden.zeros_like(), output: self.output.zeros_like() }
    }

    pub fn inputs(&self) -> usize {
        self.hidden.inputs
    }

    pub fn outputs(&self) -> usize {
        self.output.outputs
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> (Vec<f64>, MlpCache) {
        let pre = self.hidden.forward(x, rows);
        let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let y = self.output.forward(&act, rows);
        (y, MlpCache { pre, act })
    }

    /// Returns the input gradient when `want_dx` is set.
    pub fn backward(&self, x: &[f64], cache: &MlpCache, dy: &[f64], grad: &mut Mlp, want_dx: bool) -> Vec<f64> {
        let mut dact = vec![0.0; cache.act.len()];
        self.output.backward(&cache.act, dy, &mut grad.output, Some(&mut dact));
        for (d, &p) in dact.iter_mut().zip(&cache.pre) {
            if p <= 0.0 {
                *d = 0.0;
            }
        }
        if want_dx {
            let mut dx = vec![0.0; x.len()];
            self.hidden.backward(x, &dact, &mut grad.hidden, Some(&mut dx));
            dx
        } else {
            self.hidden.backward(x, &dact, &mut grad.hidden, None);
            Vec::new()
        }
    }
}
