use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::spec::{Layer, NetworkSpec, Shape};
use super::stream_rng;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// RNG stream used for weight initialization.
const INIT_STREAM: u64 = 1;
/// Dropout masks for forward pass number `t` use stream `DROPOUT_STREAM + t`.
const DROPOUT_STREAM: u64 = 1 << 32;

/// Weight and bias of one parametric layer.
///
/// Dense weights are `outputs x inputs`; conv weights are
/// `out_channels x (in_channels * kernel)` with the kernel index varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

/// Weights of one classifier together with the `NetworkSpec` and seed that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    spec: NetworkSpec,
    seed: u64,
    layers: Vec<Option<LayerParams<T>>>,
    shapes: Vec<Shape>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}

/// Activations retained by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    inputs: Vec<Matrix<T>>,
    dropout_masks: Vec<Option<Vec<T>>>,
    pool_winners: Vec<Option<Vec<usize>>>,
    probabilities: Matrix<T>,
}

impl<T> ForwardCache<T> {
    pub fn probabilities(&self) -> &Matrix<T> {
        &self.probabilities
    }
}

/// Draws weights uniformly in `±sqrt(6 / (fan_in + fan_out))`; biases start at zero.
pub fn init_network<T: Scalar>(spec: &NetworkSpec, seed: u64) -> Result<NetworkParams<T>> {
    let shapes = spec.shapes()?;
    let mut rng = stream_rng(seed, INIT_STREAM);
    let layers = spec
        .layers
        .iter()
        .map(|layer| {
            let (rows, cols, fan_in, fan_out) = match *layer {
                Layer::Dense { inputs, outputs } => (outputs, inputs, inputs, outputs),
                Layer::Conv1d { in_channels, out_channels, kernel } => {
                    (out_channels, in_channels * kernel, in_channels * kernel, out_channels * kernel)
                }
                _ => return None,
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let values = (0..rows * cols).map(|_| T::lit(rng.random_range(-bound..bound))).collect();
            Some(LayerParams { weights: Matrix::from_parts(rows, cols, values), bias: vec![T::zero(); rows] })
        })
        .collect();
    Ok(NetworkParams { spec: spec.clone(), seed, layers, shapes })
}

impl<T: Scalar> NetworkParams<T> {
    /// Assembles parameters loaded from elsewhere, checking every shape against the `NetworkSpec`.
    pub fn from_layers(spec: NetworkSpec, seed: u64, layers: Vec<Option<LayerParams<T>>>) -> Result<Self> {
        let shapes = spec.shapes()?;
        if layers.len() != spec.layers.len() {
            return Err(Error::config(format!("{} parameter slots for {} layers", layers.len(), spec.layers.len())));
        }
        for (i, (layer, p)) in spec.layers.iter().zip(&layers).enumerate() {
            let expected = match *layer {
                Layer::Dense { inputs, outputs } => Some((outputs, inputs)),
                Layer::Conv1d { in_channels, out_channels, kernel } => Some((out_channels, in_channels * kernel)),
                _ => None,
            };
            match (expected, p) {
                (None, None) => {}
                (Some((r, c)), Some(p)) if p.weights.rows() == r && p.weights.cols() == c && p.bias.len() == r => {
                    if !p.weights.is_all_finite() || p.bias.iter().any(|b| !b.is_finite()) {
                        return Err(Error::numerical(Some(i), "non-finite parameter"));
                    }
                }
                _ => return Err(Error::config(format!("layer {i}: parameter shape does not match spec"))),
            }
        }
        Ok(Self { spec, seed, layers, shapes })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Option<LayerParams<T>>] {
        &self.layers
    }

    pub fn class_count(&self) -> usize {
        self.shapes.last().map_or(0, Shape::width)
    }

    pub fn input_width(&self) -> usize {
        self.shapes[0].width()
    }

    /// Flat views of every weight and bias tensor, in layer order.
    pub fn tensors(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.layers.iter().flatten().flat_map(|p| [p.weights.values(), p.bias.as_slice()])
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [T]> + '_ {
        self.layers.iter_mut().flatten().flat_map(|p| [p.weights.values_mut(), p.bias.as_mut_slice()])
    }

    /// Class probabilities for a batch without dropout.
    pub fn predict(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.forward(batch, Mode::Inference, 0)?.probabilities)
    }

    /// Forward pass. Dropout is only active in `Mode::Train`, with masks
    /// drawn deterministically from `seed`.
    pub fn forward(&self, batch: &Matrix<T>, mode: Mode, seed: u64) -> Result<ForwardCache<T>> {
        self.forward_stream(batch, mode, seed, 0)
    }

    pub(crate) fn forward_stream(
        &self,
        batch: &Matrix<T>,
        mode: Mode,
        seed: u64,
        pass: u64,
    ) -> Result<ForwardCache<T>> {
        if batch.cols() != self.input_width() {
            return Err(Error::input(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_width()
            )));
        }
        let mut rng = match mode {
            Mode::Train => Some(stream_rng(seed, DROPOUT_STREAM.wrapping_add(pass))),
            Mode::Inference => None,
        };
        let n = self.spec.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut dropout_masks = vec![None; n];
        let mut pool_winners = vec![None; n];
        let mut x = batch.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let in_shape = self.shapes[i];
            let out_shape = self.shapes[i + 1];
            let y = match *layer {
                Layer::Dense { .. } => dense_forward(&x, self.param(i)),
                Layer::Conv1d { kernel, .. } => conv_forward(&x, self.param(i), in_shape, out_shape, kernel),
                Layer::MaxPool1d { width } => {
                    let (y, winners) = pool_forward(&x, in_shape, out_shape, width);
                    pool_winners[i] = Some(winners);
                    y
                }
                Layer::Relu => map(&x, |v| v.max(T::zero())),
                Layer::Dropout { rate } => match rng.as_mut() {
                    Some(rng) if rate > 0.0 => {
                        let mask = dropout_mask(rng, x.values().len(), rate);
                        let y = Matrix::from_parts(
                            x.rows(),
                            x.cols(),
                            x.values().iter().zip(&mask).map(|(&v, &m)| v * m).collect(),
                        );
                        dropout_masks[i] = Some(mask);
                        y
                    }
                    _ => x.clone(),
                },
                Layer::Softmax => softmax(&x),
            };
            if !y.is_all_finite() {
                return Err(Error::numerical(Some(i), format!("non-finite {} activation", layer.kind())));
            }
            inputs.push(std::mem::replace(&mut x, y));
        }
        Ok(ForwardCache { inputs, dropout_masks, pool_winners, probabilities: x })
    }

    /// Gradients of mean cross-entropy against `targets` (rows summing to one)
    /// with respect to every parameter, using the fused softmax/cross-entropy
    /// derivative `(p - y) / N` at the output.
    pub fn backward(&self, cache: &ForwardCache<T>, targets: &Matrix<T>) -> Result<Vec<Option<LayerParams<T>>>> {
        let probs = &cache.probabilities;
        if targets.rows() != probs.rows() || targets.cols() != probs.cols() {
            return Err(Error::input(format!(
                "targets {}x{} do not match outputs {}x{}",
                targets.rows(),
                targets.cols(),
                probs.rows(),
                probs.cols()
            )));
        }
        let scale = T::one() / T::from_usize_lossy(probs.rows().max(1));
        let mut grad = Matrix::from_parts(
            probs.rows(),
            probs.cols(),
            probs.values().iter().zip(targets.values()).map(|(&p, &y)| (p - y) * scale).collect(),
        );
        let n = self.spec.layers.len();
        let mut grads: Vec<Option<LayerParams<T>>> = vec![None; n];
        // Softmax is last; its gradient is already folded into `grad`.
        for i in (0..n - 1).rev() {
            let x = &cache.inputs[i];
            let in_shape = self.shapes[i];
            let out_shape = self.shapes[i + 1];
            grad = match self.spec.layers[i] {
                Layer::Dense { .. } => {
                    let (g, dx) = dense_backward(x, self.param(i), &grad);
                    grads[i] = Some(g);
                    dx
                }
                Layer::Conv1d { kernel, .. } => {
                    let (g, dx) = conv_backward(x, self.param(i), &grad, in_shape, out_shape, kernel);
                    grads[i] = Some(g);
                    dx
                }
                Layer::MaxPool1d { .. } => {
                    let winners = cache.pool_winners[i].as_ref().expect("pool winners cached");
                    let mut dx = Matrix::zeros(x.rows(), x.cols());
                    let out_w = out_shape.width();
                    for r in 0..x.rows() {
                        let g = grad.row(r);
                        let w = &winners[r * out_w..(r + 1) * out_w];
                        let d = dx.row_mut(r);
                        for (o, &src) in w.iter().enumerate() {
                            d[src] += g[o];
                        }
                    }
                    dx
                }
                Layer::Relu => Matrix::from_parts(
                    x.rows(),
                    x.cols(),
                    x.values()
                        .iter()
                        .zip(grad.values())
                        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                        .collect(),
                ),
                Layer::Dropout { .. } => match &cache.dropout_masks[i] {
                    Some(mask) => Matrix::from_parts(
                        grad.rows(),
                        grad.cols(),
                        grad.values().iter().zip(mask).map(|(&g, &m)| g * m).collect(),
                    ),
                    None => grad,
                },
                Layer::Softmax => unreachable!("softmax is validated to be last"),
            };
            if let Some(g) = &grads[i] {
                if !g.weights.is_all_finite() || g.bias.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numerical(Some(i), "non-finite gradient"));
                }
            }
        }
        Ok(grads)
    }

    fn param(&self, i: usize) -> &LayerParams<T> {
        self.layers[i].as_ref().expect("parametric layer has parameters")
    }
}

fn map<T: Scalar>(x: &Matrix<T>, f: impl Fn(T) -> T) -> Matrix<T> {
    Matrix::from_parts(x.rows(), x.cols(), x.values().iter().map(|&v| f(v)).collect())
}

fn dropout_mask<T: Scalar>(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<T> {
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..len).map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep }).collect()
}

fn dense_forward<T: Scalar>(x: &Matrix<T>, p: &LayerParams<T>) -> Matrix<T> {
    let outputs = p.weights.rows();
    let mut values = Vec::with_capacity(x.rows() * outputs);
    for row in x.iter_rows() {
        for o in 0..outputs {
            let w = p.weights.row(o);
            let mut acc = p.bias[o];
            for (&a, &b) in row.iter().zip(w) {
                acc += a * b;
            }
            values.push(acc);
        }
    }
    Matrix::from_parts(x.rows(), outputs, values)
}

fn dense_backward<T: Scalar>(x: &Matrix<T>, p: &LayerParams<T>, grad: &Matrix<T>) -> (LayerParams<T>, Matrix<T>) {
    let outputs = p.weights.rows();
    let inputs = p.weights.cols();
    let mut dw = Matrix::zeros(outputs, inputs);
    let mut db = vec![T::zero(); outputs];
    let mut dx = Matrix::zeros(x.rows(), inputs);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let gr = grad.row(r);
        for o in 0..outputs {
            let g = gr[o];
            if g == T::zero() {
                continue;
            }
            db[o] += g;
            for (d, &a) in dw.row_mut(o).iter_mut().zip(xr) {
                *d += g * a;
            }
            for (d, &w) in dx.row_mut(r).iter_mut().zip(p.weights.row(o)) {
                *d += g * w;
            }
        }
    }
    (LayerParams { weights: dw, bias: db }, dx)
}

fn conv_forward<T: Scalar>(x: &Matrix<T>, p: &LayerParams<T>, input: Shape, output: Shape, kernel: usize) -> Matrix<T> {
    let (in_len, out_len) = (input.length, output.length);
    let mut y = Matrix::zeros(x.rows(), output.width());
    for r in 0..x.rows() {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for o in 0..output.channels {
            let w = p.weights.row(o);
            let out = &mut yr[o * out_len..(o + 1) * out_len];
            out.iter_mut().for_each(|v| *v = p.bias[o]);
            for c in 0..input.channels {
                let xc = &xr[c * in_len..(c + 1) * in_len];
                let wc = &w[c * kernel..(c + 1) * kernel];
                for (t, v) in out.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (&a, &b) in xc[t..t + kernel].iter().zip(wc) {
                        acc += a * b;
                    }
                    *v += acc;
                }
            }
        }
    }
    y
}

fn conv_backward<T: Scalar>(
    x: &Matrix<T>,
    p: &LayerParams<T>,
    grad: &Matrix<T>,
    input: Shape,
    output: Shape,
    kernel: usize,
) -> (LayerParams<T>, Matrix<T>) {
    let (in_len, out_len) = (input.length, output.length);
    let mut dw = Matrix::zeros(p.weights.rows(), p.weights.cols());
    let mut db = vec![T::zero(); output.channels];
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let xr = x.row(r);
        let gr = grad.row(r);
        for o in 0..output.channels {
            let go = &gr[o * out_len..(o + 1) * out_len];
            db[o] += go.iter().copied().sum::<T>();
            let w = p.weights.row(o).to_vec();
            let dwo = dw.row_mut(o);
            for c in 0..input.channels {
                let xc = &xr[c * in_len..(c + 1) * in_len];
                for j in 0..kernel {
                    let mut acc = T::zero();
                    for (t, &g) in go.iter().enumerate() {
                        acc += g * xc[t + j];
                    }
                    dwo[c * kernel + j] += acc;
                }
            }
            let dxr = dx.row_mut(r);
            for c in 0..input.channels {
                let dxc = &mut dxr[c * in_len..(c + 1) * in_len];
                let wc = &w[c * kernel..(c + 1) * kernel];
                for (t, &g) in go.iter().enumerate() {
                    for (j, &wv) in wc.iter().enumerate() {
                        dxc[t + j] += g * wv;
                    }
                }
            }
        }
    }
    (LayerParams { weights: dw, bias: db }, dx)
}

fn pool_forward<T: Scalar>(x: &Matrix<T>, input: Shape, output: Shape, width: usize) -> (Matrix<T>, Vec<usize>) {
    let mut y = Matrix::zeros(x.rows(), output.width());
    let mut winners = Vec::with_capacity(x.rows() * output.width());
    for r in 0..x.rows() {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for c in 0..input.channels {
            for t in 0..output.length {
                let start = c * input.length + t * width;
                let mut best = start;
                for k in start + 1..start + width {
                    if xr[k] > xr[best] {
                        best = k;
                    }
                }
                yr[c * output.length + t] = xr[best];
                winners.push(best);
            }
        }
    }
    (y, winners)
}

/// Row-wise softmax with max subtraction.
pub fn softmax<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let mut y = x.clone();
    for r in 0..y.rows() {
        let row = y.row_mut(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_net(inputs: usize, outputs: usize) -> NetworkSpec {
        NetworkSpec::new(Shape::flat(inputs), vec![Layer::Dense { inputs, outputs }, Layer::Softmax]).unwrap()
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let spec = dense_net(2, 2);
        let a = init_network::<f64>(&spec, 7).unwrap();
        let b = init_network::<f64>(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.layers().iter().flatten().all(|p| p.bias.iter().all(|&b| b == 0.0)));
        let c = init_network::<f64>(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn init_weight_spread_matches_uniform_bound() {
        let spec = dense_net(100, 100);
        let params = init_network::<f64>(&spec, 1).unwrap();
        let w = params.layers()[0].as_ref().unwrap().weights.values();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
        // Uniform(-b, b) has standard deviation b / sqrt(3).
        let expected = (6.0f64 / 200.0).sqrt() / 3f64.sqrt();
        assert!((std - expected).abs() < 0.2 * expected, "std {std} vs {expected}");
    }

    #[test]
    fn zero_weights_give_uniform_probabilities() {
        let spec = dense_net(3, 4);
        let mut params = init_network::<f64>(&spec, 0).unwrap();
        params.tensors_mut().for_each(|t| t.iter_mut().for_each(|v| *v = 0.0));
        let batch = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.5, 0.5, 9.0]]).unwrap();
        let p = params.predict(&batch).unwrap();
        assert!(p.values().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn hand_evaluated_dense_softmax() {
        // logits z = W x + b with W = [[1, 2], [-1, 0.5]], b = [0.1, -0.2], x = [0.3, -0.4]
        let spec = dense_net(2, 2);
        let params = NetworkParams::from_layers(
            spec,
            0,
            vec![
                Some(LayerParams {
                    weights: Matrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap(),
                    bias: vec![0.1, -0.2],
                }),
                None,
            ],
        )
        .unwrap();
        let p = params.predict(&Matrix::from_rows(&[vec![0.3, -0.4]]).unwrap()).unwrap();
        let z0: f64 = 0.3 - 0.8 + 0.1;
        let z1: f64 = -0.3 - 0.2 - 0.2;
        let p0 = z0.exp() / (z0.exp() + z1.exp());
        assert!((p.get(0, 0) - p0).abs() < 1e-12);
        assert!((p.get(0, 1) - (1.0 - p0)).abs() < 1e-12);
    }

    #[test]
    fn inference_is_repeatable_and_dropout_inactive() {
        let spec = NetworkSpec::new(
            Shape::flat(3),
            vec![
                Layer::Dense { inputs: 3, outputs: 8 },
                Layer::Relu,
                Layer::Dropout { rate: 0.5 },
                Layer::Dense { inputs: 8, outputs: 2 },
                Layer::Softmax,
            ],
        )
        .unwrap();
        let params = init_network::<f64>(&spec, 3).unwrap();
        let batch = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        let a = params.forward(&batch, Mode::Inference, 1).unwrap();
        let b = params.forward(&batch, Mode::Inference, 99).unwrap();
        assert_eq!(a.probabilities(), b.probabilities());
        let t1 = params.forward(&batch, Mode::Train, 5).unwrap();
        let t2 = params.forward(&batch, Mode::Train, 5).unwrap();
        assert_eq!(t1.probabilities(), t2.probabilities());
    }

    #[test]
    fn wrong_input_width_is_input_error() {
        let params = init_network::<f64>(&dense_net(2, 2), 0).unwrap();
        let err = params.predict(&Matrix::zeros(1, 3)).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn overflowing_activation_is_numerical_error() {
        let spec = dense_net(1, 2);
        let params = NetworkParams::from_layers(
            spec,
            0,
            vec![
                Some(LayerParams {
                    weights: Matrix::from_rows(&[vec![f64::MAX], vec![f64::MAX]]).unwrap(),
                    bias: vec![0.0, 0.0],
                }),
                None,
            ],
        )
        .unwrap();
        let err = params.predict(&Matrix::from_rows(&[vec![10.0]]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Numerical { layer: Some(0), .. }));
    }
}
