//! Feed-forward ReLU classifiers and factorized Gaussian distributions over
//! their parameters.
//!
//! Parameters are stored flat, layer by layer: the `out × in` weight matrix
//! in row-major order followed by the `out` biases.

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    /// Input dimension, hidden widths, number of classes.
    pub widths: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSpec {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w_offset: usize,
    pub b_offset: usize,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(invalid(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self { widths })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub(crate) fn layers(&self) -> Vec<LayerSpec> {
        let mut offset = 0;
        self.widths
            .windows(2)
            .map(|w| {
                let spec = LayerSpec {
                    fan_in: w[0],
                    fan_out: w[1],
                    w_offset: offset,
                    b_offset: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                spec
            })
            .collect()
    }
}

fn weight_view(params: &[f64], l: LayerSpec) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((l.fan_out, l.fan_in), &params[l.w_offset..l.b_offset]).unwrap()
}

fn bias_view(params: &[f64], l: LayerSpec) -> ArrayView1<'_, f64> {
    ArrayView1::from(&params[l.b_offset..l.b_offset + l.fan_out])
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A deterministic network with fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

/// Intermediate values kept for backpropagation.
pub(crate) struct ForwardCache {
    /// Input to each layer (post-ReLU for hidden layers).
    inputs: Vec<Array2<f64>>,
    pub logits: Array2<f64>,
}

impl Mlp {
    pub fn new(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.num_params() {
            return Err(Error::LengthMismatch {
                expected: arch.num_params(),
                got: params.len(),
            });
        }
        Ok(Self { arch, params })
    }

    pub(crate) fn forward(&self, x: &Array2<f64>) -> ForwardCache {
        let layers = self.arch.layers();
        let mut inputs = Vec::with_capacity(layers.len());
        let mut a = x.clone();
        for (i, &l) in layers.iter().enumerate() {
            let mut z = a.dot(&weight_view(&self.params, l).t());
            z += &bias_view(&self.params, l);
            inputs.push(a);
            if i + 1 < layers.len() {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        ForwardCache { inputs, logits: a }
    }

    /// Gradient of `Σ_rows ⟨grad_logits, logits⟩` with respect to the flat
    /// parameter vector.
    pub(crate) fn backward(&self, cache: &ForwardCache, grad_logits: &Array2<f64>) -> Vec<f64> {
        let layers = self.arch.layers();
        let mut grad = vec![0.0; self.params.len()];
        let mut g = grad_logits.clone();
        for (i, &l) in layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let gw = g.t().dot(input);
            grad[l.w_offset..l.b_offset]
                .iter_mut()
                .zip(gw.iter())
                .for_each(|(d, &v)| *d = v);
            let gb = g.sum_axis(Axis(0));
            grad[l.b_offset..l.b_offset + l.fan_out].copy_from_slice(gb.as_slice().unwrap());
            if i > 0 {
                let mut ga = g.dot(&weight_view(&self.params, l));
                // ReLU: the layer input is zero exactly where the unit was off.
                ga.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                g = ga;
            }
        }
        grad
    }

    pub fn logits(&self, x: &Array2<f64>) -> Array2<f64> {
        self.forward(x).logits
    }

    pub fn predict(&self, x: ArrayView1<'_, f32>) -> usize {
        let row = x.mapv(f64::from).insert_axis(Axis(0));
        argmax(self.logits(&row).row(0))
    }
}

/// Independent Gaussian over every parameter: `N(mean_i, σ_i²)`, with σ
/// stored as `ln σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNetworkDistribution {
    pub arch: Architecture,
    pub mean: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl GaussianNetworkDistribution {
    pub fn new(arch: Architecture, mean: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        let p = arch.num_params();
        if mean.len() != p || log_sigma.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                got: mean.len().min(log_sigma.len()),
            });
        }
        Ok(Self {
            arch,
            mean,
            log_sigma,
        })
    }

    /// Data-independent prior: weight means from a normal with standard
    /// deviation `1/√fan_in` truncated at two deviations, zero bias means,
    /// and `σ = sigma0` everywhere.
    pub fn random_prior<R: Rng + ?Sized>(arch: Architecture, sigma0: f64, rng: &mut R) -> Result<Self> {
        if !(sigma0 > 0.0) {
            return Err(invalid("sigma0 must be positive"));
        }
        let mut mean = vec![0.0; arch.num_params()];
        for l in arch.layers() {
            let std = 1.0 / (l.fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).unwrap();
            for w in &mut mean[l.w_offset..l.b_offset] {
                *w = loop {
                    let v: f64 = normal.sample(rng);
                    if v.abs() <= 2.0 * std {
                        break v;
                    }
                };
            }
        }
        let log_sigma = vec![sigma0.ln(); mean.len()];
        Self::new(arch, mean, log_sigma)
    }

    pub fn num_params(&self) -> usize {
        self.mean.len()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|l| l.exp()).collect()
    }

    /// The network at the mean parameters.
    pub fn mean_network(&self) -> Mlp {
        Mlp {
            arch: self.arch.clone(),
            params: self.mean.clone(),
        }
    }

    /// `mean + σ ⊙ noise`.
    pub fn with_noise(&self, noise: &[f64]) -> Mlp {
        let params = self
            .mean
            .iter()
            .zip(&self.log_sigma)
            .zip(noise)
            .map(|((m, l), e)| m + l.exp() * e)
            .collect();
        Mlp {
            arch: self.arch.clone(),
            params,
        }
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.num_params()).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// One network with all parameters drawn from the distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Mlp {
        let noise = self.draw_noise(rng);
        self.with_noise(&noise)
    }

    /// Logits for each row of `x` under an independent full-network draw
    /// per row, using `rngs[r]` for row `r`.
    ///
    /// Given a layer's input, each unit's pre-activation under a fresh draw
    /// of that layer's weights is exactly `N(a·μ + μ_b, a²·σ² + σ_b²)` and
    /// independent across units, so sampling pre-activations layer by layer
    /// has the same law as drawing every weight, at the cost of two matrix
    /// products per layer.
    pub fn sample_logits_per_row<R: Rng>(&self, x: &Array2<f64>, rngs: &mut [R]) -> Array2<f64> {
        assert_eq!(x.nrows(), rngs.len());
        let layers = self.arch.layers();
        let var: Vec<f64> = self.log_sigma.iter().map(|l| (2.0 * l).exp()).collect();
        let mut a = x.clone();
        for (i, &l) in layers.iter().enumerate() {
            let mut mu = a.dot(&weight_view(&self.mean, l).t());
            mu += &bias_view(&self.mean, l);
            let sq = a.mapv(|v| v * v);
            let mut v = sq.dot(&weight_view(&var, l).t());
            v += &bias_view(&var, l);
            for (r, rng) in rngs.iter_mut().enumerate() {
                let mut row = mu.slice_mut(s![r, ..]);
                let vr = v.row(r);
                for (z, &vv) in row.iter_mut().zip(vr.iter()) {
                    let e: f64 = rng.sample(StandardNormal);
                    *z += vv.sqrt() * e;
                }
            }
            if i + 1 < layers.len() {
                mu.mapv_inplace(|z| z.max(0.0));
            }
            a = mu;
        }
        a
    }
}

fn check_arch(post: &GaussianNetworkDistribution, prior: &GaussianNetworkDistribution) -> Result<()> {
    if post.arch != prior.arch {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            post.arch.widths, prior.arch.widths
        )));
    }
    Ok(())
}

/// KL divergence between factorized Gaussians:
/// `Σ_i ln(σ0_i/σ_i) + (σ_i² + (μ_i − μ0_i)²)/(2σ0_i²) − ½`.
pub fn gaussian_kl(post: &GaussianNetworkDistribution, prior: &GaussianNetworkDistribution) -> Result<f64> {
    check_arch(post, prior)?;
    let mut kl = 0.0;
    for i in 0..post.num_params() {
        let (ls, ls0) = (post.log_sigma[i], prior.log_sigma[i]);
        let d = post.mean[i] - prior.mean[i];
        let ratio = (2.0 * (ls - ls0)).exp();
        kl += ls0 - ls + 0.5 * (ratio + d * d * (-2.0 * ls0).exp()) - 0.5;
    }
    Ok(kl.max(0.0))
}

/// [`gaussian_kl`] with its gradients in the posterior mean and `ln σ`.
pub fn gaussian_kl_grad(
    post: &GaussianNetworkDistribution,
    prior: &GaussianNetworkDistribution,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    check_arch(post, prior)?;
    let p = post.num_params();
    let (mut gm, mut gs) = (vec![0.0; p], vec![0.0; p]);
    let mut kl = 0.0;
    for i in 0..p {
        let (ls, ls0) = (post.log_sigma[i], prior.log_sigma[i]);
        let inv_var0 = (-2.0 * ls0).exp();
        let d = post.mean[i] - prior.mean[i];
        let ratio = (2.0 * (ls - ls0)).exp();
        kl += ls0 - ls + 0.5 * (ratio + d * d * inv_var0) - 0.5;
        gm[i] = d * inv_var0;
        gs[i] = ratio - 1.0;
    }
    Ok((kl, gm, gs))
}
