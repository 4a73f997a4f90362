use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix;

use super::ops::{self, ConvGeom, PoolGeom};
use super::scalar::Scalar;
use super::tensor::Tensor;

/// One layer of a sequential stack. Pools use a window and stride of 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel: usize,
    },
    Conv1d {
        filters: usize,
        kernel: usize,
    },
    MaxPool2d,
    /// `floor` drops a trailing odd element instead of rejecting the input.
    MaxPool1d {
        #[serde(default)]
        floor: bool,
    },
    Dense {
        units: usize,
    },
    Relu,
    Dropout {
        p: f64,
    },
    Flatten,
}

#[derive(Clone, Debug)]
enum Op {
    Conv(ConvGeom),
    Pool(PoolGeom),
    Dense { n_in: usize, n_out: usize },
    Relu,
    Dropout(f64),
    Flatten,
}

#[derive(Clone, Debug)]
struct Planned {
    op: Op,
    /// Index of the weight tensor; the bias follows it.
    param: Option<usize>,
}

/// Whether dropout is active; in training each sample carries its own seed.
#[derive(Clone, Copy, Debug)]
pub enum Mode<'a> {
    Eval,
    Train { sample_seeds: &'a [u64] },
}

enum Aux<T> {
    None,
    Argmax(Vec<u32>),
    Mask(Vec<T>),
}

/// Activations saved by a training forward pass.
pub struct Trace<T> {
    inputs: Vec<Vec<T>>,
    aux: Vec<Aux<T>>,
    batch: usize,
}

/// A stack of layers with its parameters.
#[derive(Clone, Debug)]
pub struct Sequential<T> {
    specs: Vec<LayerSpec>,
    shapes: Vec<Vec<usize>>,
    plan: Vec<Planned>,
    params: Vec<Tensor<T>>,
}

impl<T: Scalar> Sequential<T> {
    /// Validates the stack against a per-sample input shape; parameters
    /// start at zero.
    pub fn new(input_shape: &[usize], specs: Vec<LayerSpec>) -> Result<Self> {
        let mut shapes = vec![input_shape.to_vec()];
        let mut plan = Vec::new();
        let mut params = Vec::new();
        for (i, spec) in specs.iter().enumerate() {
            let s = shapes.last().expect("non-empty").clone();
            let bad = |what: &str| Error::invalid(format!("layer {i} ({spec:?}) needs {what} input, got {s:?}"));
            let (op, out, weight): (Op, Vec<usize>, Option<Vec<usize>>) = match *spec {
                LayerSpec::Conv2d { filters, kernel } => {
                    let [c, h, w] = s[..] else { return Err(bad("CxHxW")) };
                    let g = ConvGeom::new(c, h, w, filters, kernel, kernel)?;
                    let out = vec![filters, g.out_h(), g.out_w()];
                    (Op::Conv(g), out, Some(vec![filters, c, kernel, kernel]))
                }
                LayerSpec::Conv1d { filters, kernel } => {
                    let [c, l] = s[..] else { return Err(bad("CxL")) };
                    let g = ConvGeom::new(c, 1, l, filters, 1, kernel)?;
                    (Op::Conv(g), vec![filters, g.out_w()], Some(vec![filters, c, kernel]))
                }
                LayerSpec::MaxPool2d => {
                    let [c, h, w] = s[..] else { return Err(bad("CxHxW")) };
                    let g = PoolGeom::new(c, h, w, 2, 2, false)?;
                    (Op::Pool(g), vec![c, g.out_h(), g.out_w()], None)
                }
                LayerSpec::MaxPool1d { floor } => {
                    let [c, l] = s[..] else { return Err(bad("CxL")) };
                    let g = PoolGeom::new(c, 1, l, 1, 2, floor)?;
                    (Op::Pool(g), vec![c, g.out_w()], None)
                }
                LayerSpec::Dense { units } => {
                    let [n] = s[..] else { return Err(bad("flat")) };
                    if units == 0 {
                        return Err(Error::invalid("dense layer needs at least one unit"));
                    }
                    (Op::Dense { n_in: n, n_out: units }, vec![units], Some(vec![units, n]))
                }
                LayerSpec::Relu => (Op::Relu, s.clone(), None),
                LayerSpec::Dropout { p } => {
                    if !(0.0..1.0).contains(&p) {
                        return Err(Error::invalid(format!("drop probability {p} not in [0,1)")));
                    }
                    (Op::Dropout(p), s.clone(), None)
                }
                LayerSpec::Flatten => (Op::Flatten, vec![s.iter().product()], None),
            };
            let param = weight.map(|wshape| {
                let units = wshape[0];
                params.push(Tensor::zeros(wshape));
                params.push(Tensor::zeros(vec![units]));
                params.len() - 2
            });
            plan.push(Planned { op, param });
            shapes.push(out);
        }
        Ok(Sequential {
            specs,
            shapes,
            plan,
            params,
        })
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Per-sample shape before the first layer and after each layer.
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn input_len(&self) -> usize {
        self.shapes[0].iter().product()
    }

    pub fn output_len(&self) -> usize {
        self.shapes.last().expect("non-empty").iter().product()
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    /// Names `<layer>.weight` / `<layer>.bias` in parameter order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, p) in self.plan.iter().enumerate() {
            if p.param.is_some() {
                names.push(format!("{i}.weight"));
                names.push(format!("{i}.bias"));
            }
        }
        names
    }

    /// He-uniform weights, zero biases.
    pub fn init_he_uniform(&mut self, rng: &mut impl Rng) {
        for p in &self.plan {
            if let Some(w) = p.param {
                let fan_in: usize = self.params[w].shape()[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                for v in self.params[w].data_mut() {
                    *v = T::of(rng.gen_range(-bound..bound));
                }
                self.params[w + 1].fill(T::zero());
            }
        }
    }

    /// Inference pass without saving activations.
    pub fn forward_eval(&self, x: Vec<T>, batch: usize) -> Vec<T> {
        let mut cur = x;
        for p in &self.plan {
            cur = match &p.op {
                Op::Dropout(_) | Op::Flatten => cur,
                Op::Pool(g) => ops::pool_forward(g, &cur, batch).0,
                _ => self.apply(p, &cur, batch),
            };
        }
        cur
    }

    /// Training-style pass that records what [`Sequential::backward`] needs.
    /// `salt` distinguishes dropout streams of different stacks.
    pub fn forward(&self, x: Vec<T>, batch: usize, mode: Mode<'_>, salt: u64) -> (Vec<T>, Trace<T>) {
        assert_eq!(x.len(), batch * self.input_len(), "input length");
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.plan.len()),
            aux: Vec::with_capacity(self.plan.len()),
            batch,
        };
        let mut cur = x;
        for (i, p) in self.plan.iter().enumerate() {
            let (next, aux) = match &p.op {
                Op::Pool(g) => {
                    let (y, arg) = ops::pool_forward(g, &cur, batch);
                    (y, Aux::Argmax(arg))
                }
                Op::Dropout(prob) => match mode {
                    Mode::Train { sample_seeds } if *prob > 0.0 => {
                        let n = cur.len() / batch;
                        let mask: Vec<T> = sample_seeds
                            .iter()
                            .flat_map(|&s| {
                                let mut rng = ChaCha8Rng::seed_from_u64(mix(&[s, salt, i as u64]));
                                ops::dropout_mask::<T>(n, *prob, &mut rng)
                            })
                            .collect();
                        (ops::apply_mask(&cur, &mask), Aux::Mask(mask))
                    }
                    _ => (cur.clone(), Aux::None),
                },
                _ => (self.apply(p, &cur, batch), Aux::None),
            };
            trace.inputs.push(cur);
            trace.aux.push(aux);
            cur = next;
        }
        (cur, trace)
    }

    fn apply(&self, p: &Planned, x: &[T], batch: usize) -> Vec<T> {
        let wb = |w: usize| (self.params[w].data(), self.params[w + 1].data());
        match &p.op {
            Op::Conv(g) => {
                let (w, b) = wb(p.param.expect("conv has params"));
                ops::conv_forward(g, x, w, b, batch)
            }
            Op::Dense { n_in, n_out } => {
                let (w, b) = wb(p.param.expect("dense has params"));
                ops::dense_forward(*n_in, *n_out, x, w, b, batch)
            }
            Op::Relu => ops::relu_forward(x),
            Op::Pool(g) => ops::pool_forward(g, x, batch).0,
            Op::Dropout(_) | Op::Flatten => x.to_vec(),
        }
    }

    /// Accumulates parameter gradients into `grads` (same layout as
    /// [`Sequential::params`]) and returns the input gradient.
    pub fn backward(&self, trace: Trace<T>, dy: Vec<T>, grads: &mut [Tensor<T>]) -> Vec<T> {
        let batch = trace.batch;
        let mut d = dy;
        for ((p, x), aux) in self.plan.iter().zip(trace.inputs).zip(trace.aux).rev() {
            d = match (&p.op, aux) {
                (Op::Conv(g), _) => {
                    let w = p.param.expect("conv has params");
                    let (gw, gb) = grads[w..w + 2].split_at_mut(1);
                    ops::conv_backward(
                        g,
                        &x,
                        self.params[w].data(),
                        &d,
                        batch,
                        gw[0].data_mut(),
                        gb[0].data_mut(),
                    )
                }
                (Op::Dense { n_in, n_out }, _) => {
                    let w = p.param.expect("dense has params");
                    let (gw, gb) = grads[w..w + 2].split_at_mut(1);
                    ops::dense_backward(
                        *n_in,
                        *n_out,
                        &x,
                        self.params[w].data(),
                        &d,
                        batch,
                        gw[0].data_mut(),
                        gb[0].data_mut(),
                    )
                }
                (Op::Pool(g), Aux::Argmax(arg)) => ops::pool_backward(g, &d, &arg, batch),
                (Op::Relu, _) => ops::relu_backward(&x, &d),
                (Op::Dropout(_), Aux::Mask(mask)) => ops::apply_mask(&d, &mask),
                (Op::Dropout(_) | Op::Flatten, _) => d,
                (Op::Pool(_), _) => unreachable!("pool trace without argmax"),
            };
        }
        d
    }
}

/// One or more input stacks ("trunks") whose flat outputs are concatenated
/// and fed to a head stack producing logits.
#[derive(Clone, Debug)]
pub struct Network<T> {
    trunks: Vec<Sequential<T>>,
    head: Sequential<T>,
}

/// Saved activations of a [`Network`] forward pass.
pub struct NetTrace<T> {
    trunks: Vec<Trace<T>>,
    head: Trace<T>,
}

impl<T: Scalar> Network<T> {
    pub fn new(trunks: Vec<Sequential<T>>, head: Sequential<T>) -> Result<Self> {
        if trunks.is_empty() {
            return Err(Error::invalid("a network needs at least one trunk"));
        }
        for (i, t) in trunks.iter().enumerate() {
            if t.shapes().last().expect("non-empty").len() != 1 {
                return Err(Error::invalid(format!("trunk {i} must end flat")));
            }
        }
        let joined: usize = trunks.iter().map(|t| t.output_len()).sum();
        if head.shapes()[0] != [joined] {
            return Err(Error::invalid(format!(
                "head expects {:?}, trunks produce [{joined}]",
                head.shapes()[0]
            )));
        }
        Ok(Network { trunks, head })
    }

    pub fn trunks(&self) -> &[Sequential<T>] {
        &self.trunks
    }

    pub fn trunks_mut(&mut self) -> &mut [Sequential<T>] {
        &mut self.trunks
    }

    pub fn head(&self) -> &Sequential<T> {
        &self.head
    }

    pub fn num_classes(&self) -> usize {
        self.head.output_len()
    }

    /// Seeded He-uniform initialization of every stack.
    pub fn init(&mut self, seed: u64) {
        for (i, t) in self.trunks.iter_mut().enumerate() {
            t.init_he_uniform(&mut ChaCha8Rng::seed_from_u64(mix(&[seed, i as u64])));
        }
        let h = self.trunks.len() as u64;
        self.head
            .init_he_uniform(&mut ChaCha8Rng::seed_from_u64(mix(&[seed, h])));
    }

    /// All parameters: trunks in order, then the head.
    pub fn params(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.trunks
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(|s| s.params().iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.trunks
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
            .flat_map(|s| s.params_mut().iter_mut())
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (i, t) in self.trunks.iter().enumerate() {
            names.extend(t.param_names().into_iter().map(|n| format!("trunk{i}.{n}")));
        }
        names.extend(self.head.param_names().into_iter().map(|n| format!("head.{n}")));
        names
    }

    pub fn num_params(&self) -> usize {
        self.params().map(|p| p.len()).sum()
    }

    /// Zero tensors shaped like [`Network::params`].
    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.params().map(|p| Tensor::zeros(p.shape().to_vec())).collect()
    }

    fn check_inputs(&self, inputs: &[&[T]], batch: usize) -> Result<()> {
        if inputs.len() != self.trunks.len() {
            return Err(Error::invalid(format!(
                "network takes {} inputs, got {}",
                self.trunks.len(),
                inputs.len()
            )));
        }
        for (i, (x, t)) in inputs.iter().zip(&self.trunks).enumerate() {
            if x.len() != batch * t.input_len() {
                return Err(Error::invalid(format!(
                    "input {i} has {} values, expected {} x {}",
                    x.len(),
                    batch,
                    t.input_len()
                )));
            }
        }
        Ok(())
    }

    fn join(&self, outs: &[Vec<T>], batch: usize) -> Vec<T> {
        let mut joined = Vec::with_capacity(batch * self.head.input_len());
        for s in 0..batch {
            for (o, t) in outs.iter().zip(&self.trunks) {
                let n = t.output_len();
                joined.extend_from_slice(&o[s * n..(s + 1) * n]);
            }
        }
        joined
    }

    /// Logits for a batch, dropout off.
    pub fn forward_eval(&self, inputs: &[&[T]], batch: usize) -> Result<Vec<T>> {
        self.check_inputs(inputs, batch)?;
        let outs: Vec<Vec<T>> = inputs
            .iter()
            .zip(&self.trunks)
            .map(|(x, t)| t.forward_eval(x.to_vec(), batch))
            .collect();
        Ok(self.head.forward_eval(self.join(&outs, batch), batch))
    }

    /// Logits plus the trace for [`Network::backward`].
    pub fn forward(&self, inputs: &[&[T]], batch: usize, mode: Mode<'_>) -> Result<(Vec<T>, NetTrace<T>)> {
        self.check_inputs(inputs, batch)?;
        let mut outs = Vec::new();
        let mut traces = Vec::new();
        for (i, (x, t)) in inputs.iter().zip(&self.trunks).enumerate() {
            let (o, tr) = t.forward(x.to_vec(), batch, mode, i as u64);
            outs.push(o);
            traces.push(tr);
        }
        let salt = self.trunks.len() as u64;
        let (logits, head) = self.head.forward(self.join(&outs, batch), batch, mode, salt);
        Ok((logits, NetTrace { trunks: traces, head }))
    }

    /// Accumulates gradients (layout of [`Network::params`]) from the
    /// logit gradient.
    pub fn backward(&self, trace: NetTrace<T>, dlogits: Vec<T>, grads: &mut [Tensor<T>]) {
        let batch = trace.head.batch;
        let trunk_counts: Vec<usize> = self.trunks.iter().map(|t| t.params().len()).collect();
        let (trunk_grads, head_grads) = grads.split_at_mut(trunk_counts.iter().sum());
        let djoined = self.head.backward(trace.head, dlogits, head_grads);
        let width = self.head.input_len();
        let mut offset = 0;
        let mut rest = trunk_grads;
        for ((t, tr), &count) in self.trunks.iter().zip(trace.trunks).zip(&trunk_counts) {
            let n = t.output_len();
            let dy: Vec<T> = (0..batch)
                .flat_map(|s| djoined[s * width + offset..s * width + offset + n].iter().copied())
                .collect();
            let (mine, others) = std::mem::take(&mut rest).split_at_mut(count);
            t.backward(tr, dy, mine);
            rest = others;
            offset += n;
        }
    }
}
