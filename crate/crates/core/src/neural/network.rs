use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    /// `scale · tanh(z)`.
    ScaledTanh { scale: f64 },
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::ScaledTanh { scale } => scale * z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::ScaledTanh { scale } => {
                let t = z.tanh();
                scale * (1.0 - t * t)
            }
        }
    }
}

/// Layer widths and per-layer activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Architecture {
    pub fn new(sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config("a network needs an input and an output size".into()));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::Config(format!(
                "{} layers but {} activations",
                sizes.len() - 1,
                activations.len()
            )));
        }
        if sizes.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(Self { sizes, activations })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `(out, in)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Fully connected feed-forward network operating on row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    architecture: Architecture,
    layers: Vec<DenseLayer>,
    // Bumped on every parameter change; caches from older versions are stale.
    version: u64,
}

/// Intermediates recorded by [`DenseNetwork::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn pre_activations(&self) -> &[Array2<f64>] {
        &self.pre_activations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter gradients per layer plus the gradient with respect to the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
    pub input: Array2<f64>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flattened in the same order as [`DenseNetwork::flat_parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied())
            .collect()
    }
}

impl DenseNetwork {
    /// Random initialization, uniform in `±1/√fan_in` for weights and biases.
    pub fn new<R: Rng + ?Sized>(architecture: Architecture, rng: &mut R) -> Self {
        let layers = architecture
            .sizes
            .windows(2)
            .zip(&architecture.activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                DenseLayer {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| rng.random_range(-bound..=bound)),
                    bias: Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..=bound)),
                    activation,
                }
            })
            .collect();
        Self {
            architecture,
            layers,
            version: 0,
        }
    }

    /// All-zero parameters; used when restoring checkpoints.
    pub fn zeros(architecture: Architecture) -> Self {
        let layers = architecture
            .sizes
            .windows(2)
            .zip(&architecture.activations)
            .map(|(w, &activation)| DenseLayer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
                activation,
            })
            .collect();
        Self {
            architecture,
            layers,
            version: 0,
        }
    }

    /// Builds a network from explicit layers.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let Some(first) = layers.first() else {
            return Err(Error::Config("a network needs at least one layer".into()));
        };
        let mut sizes = vec![first.weights.ncols()];
        for (i, layer) in layers.iter().enumerate() {
            if layer.weights.ncols() != *sizes.last().unwrap() {
                return Err(Error::Config(format!(
                    "layer {i} expects {} inputs but previous layer produces {}",
                    layer.weights.ncols(),
                    sizes.last().unwrap()
                )));
            }
            if layer.bias.len() != layer.weights.nrows() {
                return Err(Error::Config(format!("layer {i} bias length does not match its outputs")));
            }
            sizes.push(layer.weights.nrows());
        }
        let architecture = Architecture::new(sizes, layers.iter().map(|l| l.activation).collect())?;
        let net = Self {
            architecture,
            layers,
            version: 0,
        };
        net.check_finite()?;
        Ok(net)
    }

    /// Re-initializes the final layer uniformly in `±bound`.
    pub fn with_final_layer_uniform<R: Rng + ?Sized>(mut self, bound: f64, rng: &mut R) -> Self {
        let last = self.layers.last_mut().unwrap();
        last.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
        last.bias.mapv_inplace(|_| rng.random_range(-bound..=bound));
        self.version += 1;
        self
    }

    pub fn architecture(&self) -> &Architecture {
        &self.architecture
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.architecture.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.architecture.output_dim()
    }

    pub fn parameter_count(&self) -> usize {
        self.architecture.parameter_count()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Usage(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        for layer in &self.layers {
            let z = a.dot(&layer.weights.t()) + &layer.bias;
            let next = z.mapv(|v| layer.activation.apply(v));
            inputs.push(a);
            pre_activations.push(z);
            a = next;
        }
        Ok((
            a,
            ForwardCache {
                version: self.version,
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without recording intermediates.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let mut a = x.to_owned();
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights.t()) + &layer.bias;
            z.mapv_inplace(|v| layer.activation.apply(v));
            a = z;
        }
        Ok(a)
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).expect("row vector shape");
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Gradients of `Σ upstream ⊙ y` with respect to every parameter and the input.
    pub fn backward(&self, cache: &ForwardCache, upstream: ArrayView2<f64>) -> Result<Gradients> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::Usage("forward cache is stale; parameters changed since the forward pass".into()));
        }
        let last = cache.pre_activations.last().unwrap();
        if upstream.dim() != last.dim() {
            return Err(Error::Usage(format!(
                "upstream gradient shape {:?} does not match output shape {:?}",
                upstream.dim(),
                last.dim()
            )));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = upstream.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let mut delta = upstream;
            Zip::from(&mut delta)
                .and(&cache.pre_activations[i])
                .for_each(|d, &z| *d *= layer.activation.derivative(z));
            grads.push(LayerGradient {
                weights: delta.t().dot(&cache.inputs[i]),
                bias: delta.sum_axis(Axis(0)),
            });
            upstream = delta.dot(&layer.weights);
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: upstream,
        })
    }

    pub fn flat_parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Usage(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = params[offset];
                offset += 1;
            }
        }
        self.version += 1;
        Ok(())
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn check_finite(&self) -> Result<()> {
        if self
            .layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
        {
            Ok(())
        } else {
            Err(Error::NonFinite("network parameters".into()))
        }
    }
}

/// Hard copy of `source` parameters into `target`.
pub fn copy_into_target(source: &DenseNetwork, target: &mut DenseNetwork) -> Result<()> {
    if source.architecture != target.architecture {
        return Err(Error::Usage("target network architecture differs from source".into()));
    }
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        t.weights.assign(&s.weights);
        t.bias.assign(&s.bias);
    }
    target.version += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arch(sizes: &[usize], acts: &[Activation]) -> Architecture {
        Architecture::new(sizes.to_vec(), acts.to_vec()).unwrap()
    }

    /// `L = Σ c ⊙ f(x)` with fixed random `c`, so `∂L/∂f = c`.
    fn weighted_sum(net: &DenseNetwork, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
        (&net.predict(x.view()).unwrap() * c).sum()
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let architectures = [
            arch(&[4, 6, 6, 3], &[Activation::Relu, Activation::Relu, Activation::ScaledTanh { scale: 3.0 }]),
            arch(&[5, 7, 1], &[Activation::Tanh, Activation::Linear]),
            arch(&[3, 2], &[Activation::Linear]),
        ];
        for a in architectures {
            let net = DenseNetwork::new(a.clone(), &mut rng);
            let x = Array2::from_shape_fn((5, a.sizes[0]), |_| rng.random_range(-1.0..1.0));
            let c = Array2::from_shape_fn((5, *a.sizes.last().unwrap()), |_| rng.random_range(-1.0..1.0));
            let (_, cache) = net.forward(x.view()).unwrap();
            let grads = net.backward(&cache, c.view()).unwrap();
            let analytic = grads.flatten();
            let base = net.flat_parameters();
            let eps = 1e-6;
            for i in 0..base.len() {
                let mut probe = net.clone();
                let mut p = base.clone();
                p[i] += eps;
                probe.set_flat_parameters(&p).unwrap();
                let plus = weighted_sum(&probe, &x, &c);
                p[i] -= 2.0 * eps;
                probe.set_flat_parameters(&p).unwrap();
                let minus = weighted_sum(&probe, &x, &c);
                let numeric = (plus - minus) / (2.0 * eps);
                let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
                assert!(err < 1e-4, "{:?} parameter {i}: {} vs {numeric}", a.sizes, analytic[i]);
            }
            // Input gradient as well.
            for (idx, &g) in grads.input.indexed_iter() {
                let mut xp = x.clone();
                xp[idx] += eps;
                let plus = weighted_sum(&net, &xp, &c);
                xp[idx] -= 2.0 * eps;
                let minus = weighted_sum(&net, &xp, &c);
                let numeric = (plus - minus) / (2.0 * eps);
                assert!((g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6) < 1e-4);
            }
        }
    }

    #[test]
    fn identity_linear_layer() {
        let net = DenseNetwork::from_layers(vec![DenseLayer {
            weights: Array2::eye(3),
            bias: Array1::zeros(3),
            activation: Activation::Linear,
        }])
        .unwrap();
        let x = array![[1.0, -2.0, 0.5]];
        let (y, _) = net.forward(x.view()).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_weight_tanh_layer_outputs_zero() {
        let net = DenseNetwork::from_layers(vec![DenseLayer {
            weights: Array2::zeros((2, 3)),
            bias: Array1::zeros(2),
            activation: Activation::Tanh,
        }])
        .unwrap();
        assert_eq!(net.predict_one(&[4.0, -1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_layer_hand_computation() {
        // h = relu([1 -1; 2 0.5] x + [0, -1]); y = 3 h1 - h2 + 0.5
        let net = DenseNetwork::from_layers(vec![
            DenseLayer {
                weights: array![[1.0, -1.0], [2.0, 0.5]],
                bias: array![0.0, -1.0],
                activation: Activation::Relu,
            },
            DenseLayer {
                weights: array![[3.0, -1.0]],
                bias: array![0.5],
                activation: Activation::Linear,
            },
        ])
        .unwrap();
        // x = [2, 1]: z1 = [1, 3.5] -> h = [1, 3.5] -> y = 3 - 3.5 + 0.5 = 0
        assert_eq!(net.predict_one(&[2.0, 1.0]).unwrap(), vec![0.0]);
        // x = [0, 2]: z1 = [-2, 0] -> h = [0, 0] -> y = 0.5
        assert_eq!(net.predict_one(&[0.0, 2.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn linear_squared_loss_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNetwork::new(arch(&[3, 2], &[Activation::Linear]), &mut rng);
        let x = array![[0.5, -1.0, 2.0], [1.5, 0.25, -0.5]];
        let t = array![[1.0, 0.0], [-1.0, 2.0]];
        let (y, cache) = net.forward(x.view()).unwrap();
        // L = Σ (y - t)², dL/dy = 2 (y - t); dL/dW = 2 (y - t)^T X; dL/db = 2 Σ_rows (y - t).
        let residual = &y - &t;
        let g = net.backward(&cache, (2.0 * &residual).view()).unwrap();
        let dw = 2.0 * residual.t().dot(&x);
        let db = 2.0 * residual.sum_axis(Axis(0));
        assert!((&g.layers[0].weights - &dw).iter().all(|v| v.abs() < 1e-12));
        assert!((&g.layers[0].bias - &db).iter().all(|v| v.abs() < 1e-12));
        let dx = 2.0 * residual.dot(&net.layers()[0].weights);
        assert!((&g.input - &dx).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNetwork::new(
            arch(&[4, 6, 2], &[Activation::Relu, Activation::ScaledTanh { scale: 3.0 }]),
            &mut rng,
        );
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - j as f64) * 0.3);
        let (_, cache) = net.forward(x.view()).unwrap();
        let g = net.backward(&cache, Array2::zeros((5, 2)).view()).unwrap();
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DenseNetwork::new(arch(&[2, 2], &[Activation::Tanh]), &mut rng);
        let (_, cache) = net.forward(array![[1.0, 2.0]].view()).unwrap();
        let params = net.flat_parameters();
        net.set_flat_parameters(&params).unwrap();
        assert!(matches!(
            net.backward(&cache, array![[1.0, 1.0]].view()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn input_dimension_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = DenseNetwork::new(arch(&[3, 2], &[Activation::Tanh]), &mut rng);
        assert!(matches!(net.predict_one(&[1.0, 2.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn target_copy_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = arch(&[3, 5, 2], &[Activation::Relu, Activation::Linear]);
        let mut source = DenseNetwork::new(a.clone(), &mut rng);
        let mut target = DenseNetwork::new(a, &mut rng);
        copy_into_target(&source, &mut target).unwrap();
        let x = [0.3, -0.7, 1.1];
        assert_eq!(source.predict_one(&x).unwrap(), target.predict_one(&x).unwrap());
        let snapshot = target.flat_parameters();
        copy_into_target(&source, &mut target).unwrap();
        assert_eq!(target.flat_parameters(), snapshot);

        let perturbed: Vec<f64> = source.flat_parameters().iter().map(|p| p + 1.0).collect();
        source.set_flat_parameters(&perturbed).unwrap();
        assert_eq!(target.flat_parameters(), snapshot);

        let mut other = DenseNetwork::new(arch(&[3, 4, 2], &[Activation::Relu, Activation::Linear]), &mut rng);
        assert!(copy_into_target(&source, &mut other).is_err());
    }

    #[test]
    fn seeded_initialization_is_reproducible() {
        let a = arch(&[4, 8, 3], &[Activation::Relu, Activation::Tanh]);
        let n1 = DenseNetwork::new(a.clone(), &mut ChaCha8Rng::seed_from_u64(5));
        let n2 = DenseNetwork::new(a, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(n1.flat_parameters(), n2.flat_parameters());
    }

    #[test]
    fn scaled_tanh_output_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pi = std::f64::consts::PI;
        let net = DenseNetwork::new(
            arch(&[2, 4, 3], &[Activation::Relu, Activation::ScaledTanh { scale: pi }]),
            &mut rng,
        );
        for x in [[100.0, -50.0], [0.0, 0.0], [-1e3, 1e3]] {
            for y in net.predict_one(&x).unwrap() {
                assert!(y.abs() <= pi);
            }
        }
    }
}
