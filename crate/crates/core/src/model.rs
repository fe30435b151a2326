//! Denoising autoencoder (encoder stack + single decoder head) and the softmax
//! classifier built on top of a pretrained encoder.
//!
//! Every hidden layer is `h_i = sigmoid(h_{i-1} · W_i + b_i)` with `h_0` the
//! (possibly corrupted) input. The decoder head maps the top hidden layer
//! straight back to the input dimension through one sigmoid layer.

use serde::{Deserialize, Serialize};

use crate::corruption::CorruptionSpec;
use crate::error::{Error, Result};
use crate::numerics::{
    binary_cross_entropy, init_dense, sigmoid_in_place, DenseLayer, Matrix, SeededRng,
};

/// Rows evaluated at once by the dataset-level metrics.
const EVAL_CHUNK: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderStack {
    layers: Vec<DenseLayer>,
}

impl EncoderStack {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("encoder needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape("EncoderStack::new", pair[0].fan_out(), pair[1].fan_in()));
            }
        }
        Ok(EncoderStack { layers })
    }

    /// Randomly initialized stack `input_dim → sizes[0] → sizes[1] → …`.
    pub fn init(input_dim: usize, sizes: &[usize], rng: &mut SeededRng) -> Result<Self> {
        let mut layers = Vec::with_capacity(sizes.len());
        let mut fan_in = input_dim;
        for &size in sizes {
            layers.push(init_dense(fan_in, size, rng)?);
            fan_in = size;
        }
        Self::new(layers)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn layer(&self, i: usize) -> &DenseLayer {
        &self.layers[i]
    }

    /// Appends a layer on top of the stack.
    pub fn push(&mut self, layer: DenseLayer) -> Result<()> {
        if layer.fan_in() != self.output_dim() {
            return Err(Error::shape("EncoderStack::push", self.output_dim(), layer.fan_in()));
        }
        self.layers.push(layer);
        Ok(())
    }

    /// Top-layer representation of `x`.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        let mut h = self.layers[0].affine(x)?;
        sigmoid_in_place(&mut h);
        for layer in &self.layers[1..] {
            h = layer.affine(&h)?;
            sigmoid_in_place(&mut h);
        }
        Ok(h)
    }

    pub fn fingerprints(&self) -> Vec<u64> {
        self.layers.iter().map(DenseLayer::fingerprint).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderHead {
    pub layer: DenseLayer,
}

impl DecoderHead {
    pub fn new(layer: DenseLayer) -> Self {
        DecoderHead { layer }
    }

    pub fn init(hidden_dim: usize, output_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        Ok(DecoderHead {
            layer: init_dense(hidden_dim, output_dim, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.layer.fan_out()
    }
}

/// Every intermediate of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub x_tilde: Matrix,
    /// `h_1 … h_k`
    pub hidden: Vec<Matrix>,
    /// Reconstruction `y`.
    pub output: Matrix,
}

/// `true` marks an encoder layer whose parameters must not change.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreezeMask(Vec<bool>);

impl FreezeMask {
    pub fn new(frozen: Vec<bool>) -> Self {
        FreezeMask(frozen)
    }

    pub fn none(depth: usize) -> Self {
        FreezeMask(vec![false; depth])
    }

    /// Everything below the top layer frozen.
    pub fn lower_frozen(depth: usize) -> Self {
        FreezeMask((0..depth).map(|i| i + 1 < depth).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_frozen(&self, layer: usize) -> bool {
        self.0[layer]
    }

    fn lowest_trainable(&self) -> Option<usize> {
        self.0.iter().position(|frozen| !frozen)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl LayerGrad {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        LayerGrad {
            weights: Matrix::zeros(layer.fan_in(), layer.fan_out()),
            biases: vec![0.0; layer.fan_out()],
        }
    }

    pub fn matches(&self, layer: &DenseLayer) -> bool {
        self.weights.same_shape(&layer.weights) && self.biases.len() == layer.biases.len()
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .as_slice()
            .iter()
            .chain(&self.biases)
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gradients for a list of parameter layers: the encoder layers in order
/// followed by the head (decoder or classifier output). `None` marks a layer
/// that must not be updated.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Option<LayerGrad>>,
}

impl GradientSet {
    pub fn encoder_layer(&self, i: usize) -> Option<&LayerGrad> {
        self.layers[i].as_ref()
    }

    pub fn head(&self) -> &LayerGrad {
        self.layers
            .last()
            .and_then(Option::as_ref)
            .expect("head gradient is always present")
    }

    pub fn present(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|_| i))
    }
}

pub fn dae_forward(enc: &EncoderStack, dec: &DecoderHead, x_tilde: &Matrix) -> Result<ForwardTrace> {
    if x_tilde.cols() != enc.input_dim() {
        return Err(Error::shape("dae_forward", enc.input_dim(), x_tilde.cols()));
    }
    if dec.layer.fan_in() != enc.output_dim() {
        return Err(Error::shape("dae_forward decoder", enc.output_dim(), dec.layer.fan_in()));
    }
    let mut hidden = Vec::with_capacity(enc.depth());
    let mut input = x_tilde;
    for layer in enc.layers() {
        let mut h = layer.affine(input)?;
        sigmoid_in_place(&mut h);
        hidden.push(h);
        input = hidden.last().unwrap();
    }
    let mut output = dec.layer.affine(input)?;
    sigmoid_in_place(&mut output);
    Ok(ForwardTrace {
        x_tilde: x_tilde.clone(),
        hidden,
        output,
    })
}

/// Reconstruction loss of a trace against the clean input.
pub fn dae_loss(trace: &ForwardTrace, x: &Matrix) -> Result<f64> {
    binary_cross_entropy(&trace.output, x)
}

/// `δ ⊙ h(1-h)`, turning a gradient w.r.t. a sigmoid output into one w.r.t.
/// its pre-activation.
fn sigmoid_backward(delta: &mut Matrix, h: &Matrix) {
    for (d, &a) in delta.as_mut_slice().iter_mut().zip(h.as_slice()) {
        *d *= a * (1.0 - a);
    }
}

fn layer_grad(input: &Matrix, delta: &Matrix) -> Result<LayerGrad> {
    Ok(LayerGrad {
        weights: input.matmul_tn(delta)?,
        biases: delta.column_sums(),
    })
}

/// Backpropagates `delta_top` (gradient w.r.t. the top hidden activation)
/// through the encoder, filling gradients for unfrozen layers. Stops once no
/// trainable layer remains below.
fn encoder_backward(
    enc: &EncoderStack,
    input: &Matrix,
    hidden: &[Matrix],
    mut delta: Matrix,
    freeze: &FreezeMask,
) -> Result<Vec<Option<LayerGrad>>> {
    let depth = enc.depth();
    let mut grads: Vec<Option<LayerGrad>> = vec![None; depth];
    let Some(lowest) = freeze.lowest_trainable() else {
        return Ok(grads);
    };
    for i in (lowest..depth).rev() {
        sigmoid_backward(&mut delta, &hidden[i]);
        let below = if i == 0 { input } else { &hidden[i - 1] };
        if !freeze.is_frozen(i) {
            grads[i] = Some(layer_grad(below, &delta)?);
        }
        if i > lowest {
            delta = delta.matmul_nt(&enc.layer(i).weights)?;
        }
    }
    Ok(grads)
}

/// Gradients of the mean reconstruction cross-entropy w.r.t. the decoder and
/// every unfrozen encoder layer.
pub fn dae_backward(
    trace: &ForwardTrace,
    x: &Matrix,
    enc: &EncoderStack,
    dec: &DecoderHead,
    freeze: &FreezeMask,
) -> Result<GradientSet> {
    if trace.hidden.len() != enc.depth() || freeze.len() != enc.depth() {
        return Err(Error::shape(
            "dae_backward",
            format!("depth {}", enc.depth()),
            format!("trace {} / mask {}", trace.hidden.len(), freeze.len()),
        ));
    }
    if !x.same_shape(&trace.output) {
        return Err(Error::shape(
            "dae_backward target",
            format!("{:?}", trace.output.shape()),
            format!("{:?}", x.shape()),
        ));
    }
    for (h, layer) in trace.hidden.iter().zip(enc.layers()) {
        if h.cols() != layer.fan_out() {
            return Err(Error::shape("dae_backward trace", layer.fan_out(), h.cols()));
        }
    }
    if dec.layer.fan_out() != trace.output.cols() {
        return Err(Error::shape("dae_backward decoder", trace.output.cols(), dec.layer.fan_out()));
    }

    // Sigmoid + cross-entropy: dL/dz_out = (y - x) / batch.
    let scale = 1.0 / x.rows() as f64;
    let mut delta_out = trace.output.clone();
    for (d, &t) in delta_out.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *d = (*d - t) * scale;
    }
    let top = trace.hidden.last().unwrap();
    let dec_grad = layer_grad(top, &delta_out)?;

    let mut layers = if freeze.lowest_trainable().is_some() {
        let delta_top = delta_out.matmul_nt(&dec.layer.weights)?;
        encoder_backward(enc, &trace.x_tilde, &trace.hidden, delta_top, freeze)?
    } else {
        vec![None; enc.depth()]
    };
    layers.push(Some(dec_grad));
    Ok(GradientSet { layers })
}

/// Minimum achievable reconstruction cross-entropy on `x`: the cross-entropy
/// of `x` with itself.
pub fn entropy_floor(x: &Matrix) -> Result<f64> {
    binary_cross_entropy(x, x)
}

/// Reconstruction cross-entropy in excess of the entropy floor, for an
/// already computed reconstruction.
pub fn relative_ce_of(reconstruction: &Matrix, x: &Matrix) -> Result<f64> {
    Ok(binary_cross_entropy(reconstruction, x)? - entropy_floor(x)?)
}

/// Corrupts `x`, reconstructs it, and reports the cross-entropy against the
/// clean `x` minus the entropy floor of `x`.
pub fn relative_ce(
    enc: &EncoderStack,
    dec: &DecoderHead,
    x: &Matrix,
    spec: &CorruptionSpec,
    rng: &mut SeededRng,
) -> Result<f64> {
    if x.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let mut total = 0.0;
    let mut start = 0;
    while start < x.rows() {
        let end = (start + EVAL_CHUNK).min(x.rows());
        let idx: Vec<usize> = (start..end).collect();
        let clean = x.select_rows(&idx);
        let noisy = spec.apply(&clean, rng)?;
        let trace = dae_forward(enc, dec, &noisy)?;
        total += relative_ce_of(&trace.output, &clean)? * (end - start) as f64;
        start = end;
    }
    Ok(total / x.rows() as f64)
}

/// Encoder plus a softmax output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierNet {
    pub encoder: EncoderStack,
    pub output: DenseLayer,
}

impl ClassifierNet {
    pub fn new(encoder: EncoderStack, output: DenseLayer) -> Result<Self> {
        if output.fan_in() != encoder.output_dim() {
            return Err(Error::shape("ClassifierNet::new", encoder.output_dim(), output.fan_in()));
        }
        Ok(ClassifierNet { encoder, output })
    }

    /// Puts a randomly initialized `classes`-way output layer on `encoder`.
    pub fn from_encoder(encoder: EncoderStack, classes: usize, rng: &mut SeededRng) -> Result<Self> {
        let output = init_dense(encoder.output_dim(), classes, rng)?;
        Self::new(encoder, output)
    }

    pub fn classes(&self) -> usize {
        self.output.fan_out()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut DenseLayer> {
        let mut params: Vec<&mut DenseLayer> = self.encoder.layers.iter_mut().collect();
        params.push(&mut self.output);
        params
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        self.output.affine(&self.encoder.encode(x)?)
    }

    pub fn probabilities(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = self.logits(x)?;
        softmax_rows(&mut z);
        Ok(z)
    }

    /// Arg-max class per row, ties to the lowest id.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(x.rows());
        let mut start = 0;
        while start < x.rows() {
            let end = (start + EVAL_CHUNK).min(x.rows());
            let idx: Vec<usize> = (start..end).collect();
            let p = self.probabilities(&x.select_rows(&idx))?;
            out.extend(p.row_iter().map(argmax));
            start = end;
        }
        Ok(out)
    }
}

/// Parameter layers of an autoencoder in `GradientSet` order.
pub fn dae_parameters_mut<'a>(
    enc: &'a mut EncoderStack,
    dec: &'a mut DecoderHead,
) -> Vec<&'a mut DenseLayer> {
    let mut params: Vec<&mut DenseLayer> = enc.layers.iter_mut().collect();
    params.push(&mut dec.layer);
    params
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax_rows(z: &mut Matrix) {
    let cols = z.cols().max(1);
    for row in z.as_mut_slice().chunks_exact_mut(cols) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn check_labels(labels: &[usize], classes: usize, rows: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::shape("labels", rows, labels.len()));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean softmax negative log-likelihood and its gradient w.r.t. every layer.
pub fn classifier_loss_and_grad(
    net: &ClassifierNet,
    x: &Matrix,
    labels: &[usize],
) -> Result<(f64, GradientSet)> {
    check_labels(labels, net.classes(), x.rows())?;
    if x.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let enc = &net.encoder;
    if x.cols() != enc.input_dim() {
        return Err(Error::shape("classifier input", enc.input_dim(), x.cols()));
    }
    let mut hidden = Vec::with_capacity(enc.depth());
    let mut input = x;
    for layer in enc.layers() {
        let mut h = layer.affine(input)?;
        sigmoid_in_place(&mut h);
        hidden.push(h);
        input = hidden.last().unwrap();
    }
    let top = hidden.last().unwrap();
    let logits = net.output.affine(top)?;

    let batch = x.rows() as f64;
    let mut loss = 0.0;
    let mut delta = logits.clone();
    let cols = logits.cols();
    for (r, (row, &label)) in logits.row_iter().zip(labels).enumerate() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - row[label];
        let d = &mut delta.as_mut_slice()[r * cols..(r + 1) * cols];
        for (c, v) in d.iter_mut().enumerate() {
            let p = (row[c] - log_sum).exp();
            let target = if c == label { 1.0 } else { 0.0 };
            *v = (p - target) / batch;
        }
    }
    let out_grad = layer_grad(top, &delta)?;
    let delta_top = delta.matmul_nt(&net.output.weights)?;
    let mut layers = encoder_backward(enc, x, &hidden, delta_top, &FreezeMask::none(enc.depth()))?;
    layers.push(Some(out_grad));
    Ok((loss / batch, GradientSet { layers }))
}

/// Fraction of rows whose predicted class differs from the label.
pub fn classification_error(net: &ClassifierNet, x: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(labels, net.classes(), x.rows())?;
    if x.rows() == 0 {
        return Err(Error::EmptyData);
    }
    let predicted = net.predict(x)?;
    let wrong = predicted.iter().zip(labels).filter(|(p, l)| p != l).count();
    Ok(wrong as f64 / x.rows() as f64)
}
