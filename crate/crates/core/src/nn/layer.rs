use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{Error, Result};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation and the activation output.
    fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Sigmoid => post * (1.0 - post),
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Shape and behavior of one dense layer, without its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input: usize,
    pub output: usize,
    pub activation: Activation,
    /// Inverted-dropout rate applied to this layer's output during training.
    pub dropout: f64,
}

/// `y = act(W x + b)` with `W` stored row-major as `output × input`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub spec: LayerSpec,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(spec: LayerSpec) -> Self {
        DenseLayer {
            weight: vec![0.0; spec.input * spec.output],
            bias: vec![0.0; spec.output],
            spec,
        }
    }

    /// Weights uniform in ±√(6 / (fan_in + fan_out)), biases zero.
    pub fn glorot(spec: LayerSpec, rng: &mut Rng) -> Self {
        let limit = (6.0 / (spec.input + spec.output) as f64).sqrt();
        let mut layer = DenseLayer::zeros(spec);
        for w in &mut layer.weight {
            *w = rng.uniform(-limit, limit);
        }
        layer
    }

    pub fn weight_row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.spec.input..(o + 1) * self.spec.input]
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        (0..self.spec.output)
            .map(|o| {
                self.weight_row(o)
                    .iter()
                    .zip(x)
                    .fold(self.bias[o], |acc, (w, v)| acc + w * v)
            })
            .collect()
    }
}

/// A stack of dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

/// Cached activations from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Input seen by each layer (after the previous layer's dropout).
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    /// Per-unit multiplier (0 or 1/(1-rate)) for layers where dropout fired.
    masks: Vec<Option<Vec<f64>>>,
    output: Vec<f64>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    /// Pre-activations of every layer.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weight: vec![0.0; l.weight.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.layers {
            g.weight.iter_mut().chain(g.bias.iter_mut()).for_each(|v| *v *= factor);
        }
    }

    pub fn fill_zero(&mut self) {
        self.scale(0.0);
    }

    /// All values in the order of [`Mlp::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weight.iter().chain(&g.bias).copied())
            .collect()
    }
}

/// Result of a full backward pass.
#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: Gradients,
    /// Gradient with respect to the network input.
    pub input: Vec<f64>,
}

impl Mlp {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Invalid("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            let s = &l.spec;
            if s.input == 0 || s.output == 0 {
                return Err(Error::Invalid(format!("layer {i} has a zero dimension")));
            }
            if l.weight.len() != s.input * s.output || l.bias.len() != s.output {
                return Err(Error::Invalid(format!("layer {i} parameter shape mismatch")));
            }
            if !(0.0..1.0).contains(&s.dropout) {
                return Err(Error::Invalid(format!("layer {i} dropout {} outside [0, 1)", s.dropout)));
            }
            if let Some(next) = layers.get(i + 1) {
                if next.spec.input != s.output {
                    return Err(Error::Dimension {
                        expected: s.output,
                        got: next.spec.input,
                    });
                }
            } else if s.dropout != 0.0 {
                return Err(Error::Invalid("dropout is not allowed on the output layer".into()));
            }
            if let Some(j) = l.weight.iter().chain(&l.bias).position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: format!("layer {i} parameter {j}"),
                });
            }
        }
        Ok(Mlp { layers })
    }

    /// Glorot-initialized network for the given layer specs.
    pub fn init(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        Mlp::from_layers(specs.iter().map(|&s| DenseLayer::glorot(s, rng)).collect())
    }

    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        Mlp::from_layers(specs.iter().map(|&s| DenseLayer::zeros(s)).collect())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable access to parameters. Shapes must not be changed.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.input
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.output
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Weights then bias of each layer, in layer order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: values.len(),
            });
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64], mode: Mode, rng: &mut Rng) -> Result<ForwardPass> {
        self.run(x, mode, Some(rng))
    }

    /// Eval-mode output. Pure in `(self, x)`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(x, Mode::Eval, None)?.output)
    }

    fn run(&self, x: &[f64], mode: Mode, mut rng: Option<&mut Rng>) -> Result<ForwardPass> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let n = self.layers.len();
        let mut pass = ForwardPass {
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
            output: Vec::new(),
        };
        let mut current = x.to_vec();
        for layer in &self.layers {
            let pre = layer.affine(&current);
            let post: Vec<f64> = pre.iter().map(|&z| layer.spec.activation.apply(z)).collect();
            let rate = layer.spec.dropout;
            let (next, mask) = match (mode, rng.as_deref_mut()) {
                (Mode::Train, Some(rng)) if rate > 0.0 => {
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> = post
                        .iter()
                        .map(|_| if rng.bernoulli(rate) { 0.0 } else { keep })
                        .collect();
                    let dropped = post.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    (dropped, Some(mask))
                }
                _ => (post.clone(), None),
            };
            pass.inputs.push(std::mem::replace(&mut current, next));
            pass.pre.push(pre);
            pass.post.push(post);
            pass.masks.push(mask);
        }
        pass.output = current;
        Ok(pass)
    }

    /// Adds the parameter gradients of `pass` under `upstream` (dL/d output)
    /// into `grads`. The input gradient is not computed.
    pub fn accumulate_gradients(&self, pass: &ForwardPass, upstream: &[f64], grads: &mut Gradients) -> Result<()> {
        self.backprop(pass, upstream, grads, false).map(|_| ())
    }

    pub fn backward(&self, pass: &ForwardPass, upstream: &[f64]) -> Result<Backward> {
        let mut grads = Gradients::zeros_like(self);
        let input = self.backprop(pass, upstream, &mut grads, true)?;
        Ok(Backward { grads, input })
    }

    fn backprop(&self, pass: &ForwardPass, upstream: &[f64], grads: &mut Gradients, want_input: bool) -> Result<Vec<f64>> {
        if pass.pre.len() != self.layers.len() || grads.layers.len() != self.layers.len() {
            return Err(Error::Invalid("forward cache does not match network".into()));
        }
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension {
                expected: self.output_dim(),
                got: upstream.len(),
            });
        }
        let mut grad_out = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let spec = &layer.spec;
            let (input, pre, post) = (&pass.inputs[i], &pass.pre[i], &pass.post[i]);
            if pre.len() != spec.output || input.len() != spec.input {
                return Err(Error::Invalid(format!("forward cache shape mismatch at layer {i}")));
            }
            let mut delta = grad_out;
            if let Some(mask) = &pass.masks[i] {
                delta.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
            }
            for ((d, &z), &a) in delta.iter_mut().zip(pre).zip(post) {
                *d *= spec.activation.derivative(z, a);
            }

            let g = &mut grads.layers[i];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                if d != 0.0 {
                    let row = &mut g.weight[o * spec.input..(o + 1) * spec.input];
                    row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
                }
            }

            if i == 0 && !want_input {
                return Ok(Vec::new());
            }
            let mut grad_in = vec![0.0; spec.input];
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    grad_in.iter_mut().zip(layer.weight_row(o)).for_each(|(gi, w)| *gi += w * d);
                }
            }
            grad_out = grad_in;
        }
        Ok(grad_out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(input: usize, output: usize, activation: Activation) -> LayerSpec {
        LayerSpec { input, output, activation, dropout: 0.0 }
    }

    #[test]
    fn zero_sigmoid_layer_outputs_half() {
        let mlp = Mlp::zeros(&[spec(5, 1, Activation::Sigmoid)]).unwrap();
        for x in [[0.0; 5], [1.0, -2.0, 3.0, 100.0, -7.5]] {
            assert_eq!(mlp.predict(&x).unwrap(), vec![0.5]);
        }
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let mut rng = Rng::new(3);
        let mlp = Mlp::init(&[spec(4, 6, Activation::Relu), spec(6, 1, Activation::Sigmoid)], &mut rng).unwrap();
        let x = [0.3, -1.2, 0.8, 2.0];
        let train = mlp.forward(&x, Mode::Train, &mut rng).unwrap();
        assert_eq!(train.output(), mlp.predict(&x).unwrap().as_slice());
    }

    #[test]
    fn dropout_zeroes_and_rescales() {
        let mut rng = Rng::new(11);
        let hidden = LayerSpec { dropout: 0.5, ..spec(1, 400, Activation::Identity) };
        let mut mlp = Mlp::zeros(&[hidden, spec(400, 1, Activation::Identity)]).unwrap();
        mlp.layers_mut()[0].bias.iter_mut().for_each(|b| *b = 1.0);
        let pass = mlp.forward(&[0.0], Mode::Train, &mut rng).unwrap();
        let hidden_out = &pass.inputs[1];
        assert!(hidden_out.iter().all(|&v| v == 0.0 || v == 2.0));
        let dropped = hidden_out.iter().filter(|&&v| v == 0.0).count();
        assert!((150..250).contains(&dropped), "{dropped}");
        // eval mode never drops
        let pass = mlp.run(&[0.0], Mode::Eval, None).unwrap();
        assert!(pass.inputs[1].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Mlp::zeros(&[spec(3, 4, Activation::Relu), spec(5, 1, Activation::Sigmoid)]).is_err());
        assert!(Mlp::zeros(&[]).is_err());
        let out_dropout = LayerSpec { dropout: 0.5, ..spec(3, 1, Activation::Sigmoid) };
        assert!(Mlp::zeros(&[out_dropout]).is_err());
        let bad_rate = LayerSpec { dropout: 1.0, ..spec(3, 3, Activation::Relu) };
        assert!(Mlp::zeros(&[bad_rate, spec(3, 1, Activation::Sigmoid)]).is_err());
        let mlp = Mlp::zeros(&[spec(3, 1, Activation::Sigmoid)]).unwrap();
        assert!(matches!(mlp.predict(&[1.0]), Err(Error::Dimension { expected: 3, got: 1 })));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = Rng::new(5);
        let mlp = Mlp::init(&[spec(3, 4, Activation::Sigmoid), spec(4, 2, Activation::Relu)], &mut rng).unwrap();
        let pass = mlp.forward(&[0.1, 0.2, -0.3], Mode::Train, &mut rng).unwrap();
        let back = mlp.backward(&pass, &[0.0, 0.0]).unwrap();
        assert!(back.grads.flatten().iter().all(|&g| g == 0.0));
        assert!(back.input.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_cache() {
        let mut rng = Rng::new(5);
        let a = Mlp::init(&[spec(3, 1, Activation::Sigmoid)], &mut rng).unwrap();
        let b = Mlp::init(&[spec(3, 2, Activation::Relu), spec(2, 1, Activation::Sigmoid)], &mut rng).unwrap();
        let pass = a.forward(&[1.0, 2.0, 3.0], Mode::Eval, &mut rng).unwrap();
        assert!(b.backward(&pass, &[1.0]).is_err());
        assert!(a.backward(&pass, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = Rng::new(8);
        let mut mlp = Mlp::init(&[spec(2, 3, Activation::Relu), spec(3, 1, Activation::Sigmoid)], &mut rng).unwrap();
        let flat = mlp.flat_params();
        assert_eq!(flat.len(), mlp.param_count());
        let doubled: Vec<f64> = flat.iter().map(|v| v * 2.0).collect();
        mlp.set_flat_params(&doubled).unwrap();
        assert_eq!(mlp.flat_params(), doubled);
    }

    #[test]
    fn glorot_within_limit() {
        let mut rng = Rng::new(2);
        let layer = DenseLayer::glorot(spec(10, 6, Activation::Relu), &mut rng);
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(layer.weight.iter().all(|w| w.abs() <= limit));
        assert!(layer.bias.iter().all(|&b| b == 0.0));
    }
}
