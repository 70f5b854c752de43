use std::rc::Rc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::NO_SOURCE;
use super::{Graph, NeuralError, Tensor, Var};

/// Version tag written into every checkpoint.
pub const CHECKPOINT_FORMAT: &str = "wogan-network/1";

const BN_EPS: f64 = 1e-7;
const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Layer {
    Dense { out: usize },
    Conv1d { maps: usize, kernel: usize, stride: usize, padding: usize },
    MaxPool { window: usize, stride: usize },
    BatchNorm,
    Activation(Activation),
    Flatten,
}

/// Per-sample input layout. Sequences are stored channel-major in one row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InputShape {
    Vector(usize),
    Sequence { channels: usize, length: usize },
}

impl InputShape {
    pub fn width(&self) -> usize {
        match *self {
            InputShape::Vector(n) => n,
            InputShape::Sequence { channels, length } => channels * length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<Layer>,
}

impl NetworkSpec {
    /// Shape after every layer, validating compatibility on the way.
    pub fn shapes(&self) -> Result<Vec<InputShape>, NeuralError> {
        let bad = |i: usize, msg: &str| Err(NeuralError::Spec(format!("layer {i}: {msg}")));
        let mut cur = self.input;
        if cur.width() == 0 {
            return bad(0, "empty input");
        }
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match (*layer, cur) {
                (Layer::Dense { out }, InputShape::Vector(_)) if out > 0 => InputShape::Vector(out),
                (Layer::Dense { .. }, InputShape::Vector(_)) => return bad(i, "dense width must be positive"),
                (Layer::Dense { .. }, _) => return bad(i, "dense layer needs a flattened input"),
                (Layer::Conv1d { maps, kernel, stride, padding }, InputShape::Sequence { length, .. }) => {
                    if maps == 0 || kernel == 0 || stride == 0 || length + 2 * padding < kernel {
                        return bad(i, "conv1d does not fit its input");
                    }
                    InputShape::Sequence {
                        channels: maps,
                        length: (length + 2 * padding - kernel) / stride + 1,
                    }
                }
                (Layer::MaxPool { window, stride }, InputShape::Sequence { channels, length }) => {
                    if window == 0 || stride == 0 || length < window {
                        return bad(i, "maxpool does not fit its input");
                    }
                    InputShape::Sequence {
                        channels,
                        length: (length - window) / stride + 1,
                    }
                }
                (Layer::Conv1d { .. } | Layer::MaxPool { .. }, _) => return bad(i, "needs a sequence input"),
                (Layer::BatchNorm, InputShape::Vector(n)) => InputShape::Vector(n),
                (Layer::BatchNorm, _) => return bad(i, "batchnorm needs a flattened input"),
                (Layer::Activation(Activation::LeakyRelu(s)), _) if !(s > 0.0) => {
                    return bad(i, "leaky relu slope must be positive")
                }
                (Layer::Activation(_), s) => s,
                (Layer::Flatten, s) => InputShape::Vector(s.width()),
            };
            out.push(cur);
        }
        Ok(out)
    }

    pub fn output_width(&self) -> Result<usize, NeuralError> {
        Ok(self.shapes()?.last().copied().unwrap_or(self.input).width())
    }

    pub fn has_batchnorm(&self) -> bool {
        self.layers.contains(&Layer::BatchNorm)
    }

    /// Parameter names and shapes in binding order.
    fn param_layout(&self) -> Result<Vec<(String, Vec<usize>, ParamKind)>, NeuralError> {
        let shapes = self.shapes()?;
        let mut out = Vec::new();
        let mut prev = self.input;
        for (i, (layer, shape)) in self.layers.iter().zip(&shapes).enumerate() {
            match (*layer, prev) {
                (Layer::Dense { out: o }, InputShape::Vector(n)) => {
                    out.push((format!("{i}.dense.weight"), vec![n, o], ParamKind::Weight { fan_in: n, fan_out: o }));
                    out.push((format!("{i}.dense.bias"), vec![1, o], ParamKind::Zero));
                }
                (Layer::Conv1d { maps, kernel, .. }, InputShape::Sequence { channels, .. }) => {
                    out.push((
                        format!("{i}.conv1d.weight"),
                        vec![channels * kernel, maps],
                        ParamKind::Weight {
                            fan_in: channels * kernel,
                            fan_out: maps * kernel,
                        },
                    ));
                    out.push((format!("{i}.conv1d.bias"), vec![1, maps], ParamKind::Zero));
                }
                (Layer::BatchNorm, InputShape::Vector(n)) => {
                    out.push((format!("{i}.batchnorm.scale"), vec![1, n], ParamKind::One));
                    out.push((format!("{i}.batchnorm.shift"), vec![1, n], ParamKind::Zero));
                }
                _ => {}
            }
            prev = *shape;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
enum ParamKind {
    Weight { fan_in: usize, fan_out: usize },
    Zero,
    One,
}

/// A trainable tensor with its Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub m: Tensor,
    pub v: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape.clone());
        Param {
            name: name.into(),
            m: zeros.clone(),
            v: zeros,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub params: Vec<Param>,
    /// Adam steps taken.
    pub step: u64,
}

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Per-batchnorm-layer batch mean and unbiased variance from a train-mode forward.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchStats(pub Vec<RunningStats>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

pub struct Forward {
    pub output: Var,
    pub stats: BatchStats,
}

/// Layer stack with parameters and batchnorm running statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: ParamSet,
    pub running: Vec<RunningStats>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    network: Network,
}

impl Network {
    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases, unit scales.
    pub fn new(spec: NetworkSpec, rng: &mut impl Rng) -> Result<Self, NeuralError> {
        let params = spec
            .param_layout()?
            .into_iter()
            .map(|(name, shape, kind)| {
                let value = match kind {
                    ParamKind::Weight { fan_in, fan_out } => {
                        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                        let n = shape.iter().product();
                        Tensor {
                            shape,
                            data: (0..n).map(|_| rng.gen_range(-a..=a)).collect(),
                        }
                    }
                    ParamKind::Zero => Tensor::zeros(shape),
                    ParamKind::One => Tensor::filled(shape, 1.0),
                };
                Param::new(name, value)
            })
            .collect();
        let running = spec
            .shapes()?
            .iter()
            .zip(&spec.layers)
            .filter(|(_, l)| **l == Layer::BatchNorm)
            .map(|(s, _)| RunningStats {
                mean: vec![0.0; s.width()],
                var: vec![1.0; s.width()],
            })
            .collect();
        Ok(Network {
            spec,
            params: ParamSet { params, step: 0 },
            running,
        })
    }

    /// Puts every parameter on `g`, as trainable leaves or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<Vec<Var>, NeuralError> {
        self.params.params.iter().map(|p| g.leaf(&p.value, trainable)).collect()
    }

    /// Forward pass of the batch `x` (one sample per row) using bound `vars`.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], x: Var, mode: Mode) -> Result<Forward, NeuralError> {
        if vars.len() != self.params.params.len() {
            return Err(NeuralError::Shape("parameter binding does not match network".into()));
        }
        let xv = g.value(x);
        let (batch, width) = (xv.rows(), xv.cols());
        if width != self.spec.input.width() {
            return Err(NeuralError::Shape(format!(
                "input width {width}, network expects {}",
                self.spec.input.width()
            )));
        }
        if batch == 0 {
            return Err(NeuralError::BatchTooSmall { got: 0, need: 1 });
        }
        if mode == Mode::Train && self.spec.has_batchnorm() && batch < 2 {
            return Err(NeuralError::BatchTooSmall { got: batch, need: 2 });
        }
        let shapes = self.spec.shapes()?;
        let mut h = x;
        let mut prev = self.spec.input;
        let mut p = 0;
        let mut bn = 0;
        let mut stats = Vec::new();
        for (layer, shape) in self.spec.layers.iter().zip(&shapes) {
            h = match (*layer, prev) {
                (Layer::Dense { .. }, _) => {
                    let z = g.matmul(h, vars[p])?;
                    let z = g.add_row(z, vars[p + 1])?;
                    p += 2;
                    z
                }
                (Layer::Conv1d { maps, kernel, stride, padding }, InputShape::Sequence { channels, length }) => {
                    let out_len = shape_len(shape);
                    let cols = g.gather(
                        h,
                        im2col_index(batch, channels, length, kernel, stride, padding, out_len),
                        batch * out_len,
                        channels * kernel,
                    )?;
                    let z = g.matmul(cols, vars[p])?;
                    let z = g.add_row(z, vars[p + 1])?;
                    p += 2;
                    g.gather(z, channel_major_index(batch, maps, out_len), batch, maps * out_len)?
                }
                (Layer::MaxPool { window, stride }, InputShape::Sequence { channels, length }) => {
                    let out_len = shape_len(shape);
                    let idx = argmax_index(g.value(h), batch, channels, length, window, stride, out_len);
                    g.gather(h, idx, batch, channels * out_len)?
                }
                (Layer::BatchNorm, _) => {
                    let (scale, shift) = (vars[p], vars[p + 1]);
                    p += 2;
                    let normed = match mode {
                        Mode::Train => {
                            let (normed, s) = batch_normalize(g, h, batch)?;
                            stats.push(s);
                            normed
                        }
                        Mode::Eval => {
                            let rs = &self.running[bn];
                            let mean = g.constant(&Tensor::matrix(1, rs.mean.len(), rs.mean.clone())?)?;
                            let inv: Vec<f64> = rs.var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
                            let inv = g.constant(&Tensor::matrix(1, inv.len(), inv)?)?;
                            let neg = g.scale(mean, -1.0)?;
                            let c = g.add_row(h, neg)?;
                            g.mul_row(c, inv)?
                        }
                    };
                    bn += 1;
                    let z = g.mul_row(normed, scale)?;
                    g.add_row(z, shift)?
                }
                (Layer::Activation(a), _) => match a {
                    Activation::LeakyRelu(s) => g.leaky_relu(h, s)?,
                    Activation::Sigmoid => g.sigmoid(h)?,
                    Activation::Tanh => g.tanh(h)?,
                    Activation::None => h,
                },
                (Layer::Flatten, _) => h,
                _ => return Err(NeuralError::Spec("layer does not fit its input".into())),
            };
            prev = *shape;
        }
        Ok(Forward {
            output: h,
            stats: BatchStats(stats),
        })
    }

    /// Folds train-mode batch statistics into the running estimates.
    pub fn commit(&mut self, stats: &BatchStats) {
        for (rs, s) in self.running.iter_mut().zip(&stats.0) {
            for i in 0..rs.mean.len() {
                rs.mean[i] = (1.0 - BN_MOMENTUM) * rs.mean[i] + BN_MOMENTUM * s.mean[i];
                rs.var[i] = (1.0 - BN_MOMENTUM) * rs.var[i] + BN_MOMENTUM * s.var[i];
            }
        }
    }

    /// Forward pass on a fresh tape with constant parameters.
    pub fn predict(&self, x: &Tensor, mode: Mode) -> Result<Tensor, NeuralError> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false)?;
        let xv = g.constant(x)?;
        let f = self.forward(&mut g, &vars, xv, mode)?;
        Ok(g.value(f.output).clone())
    }

    /// Gradients of `loss` for every bound parameter, as plain tensors.
    pub fn gradients(g: &mut Graph, loss: Var, vars: &[Var]) -> Result<Vec<Tensor>, NeuralError> {
        let grads = g.grad(loss, vars)?;
        Ok(grads.into_iter().map(|v| g.value(v).clone()).collect())
    }

    pub fn to_checkpoint(&self) -> String {
        serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            network: self.clone(),
        })
        .expect("network serializes")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, NeuralError> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if cp.format != CHECKPOINT_FORMAT {
            return Err(NeuralError::Checkpoint(format!("unknown format `{}`", cp.format)));
        }
        let net = cp.network;
        let layout = net.spec.param_layout()?;
        let ok = layout.len() == net.params.params.len()
            && layout.iter().zip(&net.params.params).all(|((name, shape, _), p)| {
                *name == p.name && *shape == p.value.shape && p.m.shape == *shape && p.v.shape == *shape
            });
        if !ok {
            return Err(NeuralError::Checkpoint("parameters do not match the layer spec".into()));
        }
        Ok(net)
    }
}

fn shape_len(s: &InputShape) -> usize {
    match *s {
        InputShape::Sequence { length, .. } => length,
        InputShape::Vector(n) => n,
    }
}

/// Row `(b, o)`, column `(c, j)` of the unfolded input reads position `o*stride + j - padding`.
fn im2col_index(
    batch: usize,
    channels: usize,
    length: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    out_len: usize,
) -> Rc<[u32]> {
    let mut idx = Vec::with_capacity(batch * out_len * channels * kernel);
    for b in 0..batch {
        for o in 0..out_len {
            for c in 0..channels {
                for j in 0..kernel {
                    let pos = (o * stride + j) as isize - padding as isize;
                    idx.push(if pos < 0 || pos as usize >= length {
                        NO_SOURCE
                    } else {
                        (b * channels * length + c * length + pos as usize) as u32
                    });
                }
            }
        }
    }
    idx.into()
}

/// `(batch*len) x maps` position-major rows to `batch x (maps*len)` channel-major.
fn channel_major_index(batch: usize, maps: usize, len: usize) -> Rc<[u32]> {
    let mut idx = Vec::with_capacity(batch * maps * len);
    for b in 0..batch {
        for f in 0..maps {
            for o in 0..len {
                idx.push(((b * len + o) * maps + f) as u32);
            }
        }
    }
    idx.into()
}

/// First maximal position of every pooling window.
fn argmax_index(
    x: &Tensor,
    batch: usize,
    channels: usize,
    length: usize,
    window: usize,
    stride: usize,
    out_len: usize,
) -> Rc<[u32]> {
    let mut idx = Vec::with_capacity(batch * channels * out_len);
    for b in 0..batch {
        for c in 0..channels {
            let base = b * channels * length + c * length;
            for o in 0..out_len {
                let start = base + o * stride;
                let best = (start..start + window).fold(start, |best, k| if x.data[k] > x.data[best] { k } else { best });
                idx.push(best as u32);
            }
        }
    }
    idx.into()
}

fn batch_normalize(g: &mut Graph, h: Var, batch: usize) -> Result<(Var, RunningStats), NeuralError> {
    let n = batch as f64;
    let s = g.sum_rows(h)?;
    let mean = g.scale(s, 1.0 / n)?;
    let mean_b = g.broadcast_rows(mean, batch)?;
    let centered = g.sub(h, mean_b)?;
    let sq = g.mul(centered, centered)?;
    let ss = g.sum_rows(sq)?;
    let var = g.scale(ss, 1.0 / n)?;
    let ve = g.add_scalar(var, BN_EPS)?;
    let sd = g.sqrt(ve)?;
    let inv = g.safe_recip(sd)?;
    let normed = g.mul_row(centered, inv)?;
    let stats = RunningStats {
        mean: g.value(mean).data.clone(),
        var: g.value(var).data.iter().map(|v| v * n / (n - 1.0)).collect(),
    };
    Ok((normed, stats))
}

/// Per-sample `||d critic(x) / dx||_2` as a `batch x 1` node that can be
/// differentiated again with respect to the critic parameters.
pub fn input_gradient_norm(g: &mut Graph, critic: &Network, vars: &[Var], x: Var) -> Result<Var, NeuralError> {
    if critic.spec.has_batchnorm() {
        return Err(NeuralError::Spec("per-sample input gradients need a critic without batchnorm".into()));
    }
    if critic.spec.output_width()? != 1 {
        return Err(NeuralError::Spec("critic must output one value per sample".into()));
    }
    let out = critic.forward(g, vars, x, Mode::Eval)?.output;
    // Samples are independent, so the gradient of the sum holds each sample's own gradient.
    let total = g.sum(out)?;
    let gx = g.grad(total, &[x])?[0];
    let sq = g.mul(gx, gx)?;
    let ss = g.sum_cols(sq)?;
    g.sqrt(ss)
}
