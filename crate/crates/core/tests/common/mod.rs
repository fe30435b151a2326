//! Shared test oracles and fixtures. Everything numeric here is written with
//! explicit loops so it stays independent of the library's matrix code.

#![allow(dead_code)]

use std::path::PathBuf;

use gradual_dae::data::Dataset;
use gradual_dae::model::{
    classifier_loss_and_grad, dae_backward, dae_forward, ClassifierNet, DecoderHead, EncoderStack, FreezeMask,
    GradientSet,
};
use gradual_dae::numerics::{init_dense, DenseLayer, Matrix, SeededRng};

pub mod dd;
use dd::Dd;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Denominator floor for relative error, so exactly-zero partials compare by
/// absolute error instead of dividing by zero.
pub const FD_FLOOR: f64 = 1e-8;

fn dense_forward(input: &[Vec<Dd>], layer: &DenseLayer) -> Vec<Vec<Dd>> {
    input
        .iter()
        .map(|row| {
            (0..layer.fan_out())
                .map(|j| {
                    let mut z = Dd::from(layer.biases[j]);
                    for (i, &v) in row.iter().enumerate() {
                        z = z + v * Dd::from(layer.weights.get(i, j));
                    }
                    z
                })
                .collect()
        })
        .collect()
}

fn rows_of(m: &Matrix) -> Vec<Vec<Dd>> {
    (0..m.rows()).map(|r| m.row(r).iter().map(|&v| Dd::from(v)).collect()).collect()
}

fn sigmoid_layer(h: &[Vec<Dd>], layer: &DenseLayer) -> Vec<Vec<Dd>> {
    dense_forward(h, layer).into_iter().map(|r| r.into_iter().map(Dd::sigmoid).collect()).collect()
}

/// Mean summed binary cross-entropy of the reconstruction of `x_tilde`
/// against `x`, in double-double.
pub fn naive_dae_loss(layers: &[DenseLayer], x_tilde: &Matrix, x: &Matrix) -> Dd {
    let mut h = rows_of(x_tilde);
    for layer in layers {
        h = sigmoid_layer(&h, layer);
    }
    let mut total = Dd::ZERO;
    for (r, row) in h.iter().enumerate() {
        for (c, &y) in row.iter().enumerate() {
            let t = Dd::from(x.get(r, c));
            total = total - t * y.ln() - (Dd::ONE - t) * (Dd::ONE - y).ln();
        }
    }
    total / Dd::from(x.rows() as f64)
}

/// Mean softmax negative log-likelihood, in double-double.
pub fn naive_classifier_loss(layers: &[DenseLayer], x: &Matrix, labels: &[usize]) -> Dd {
    let mut h = rows_of(x);
    let (output, hidden) = layers.split_last().unwrap();
    for layer in hidden {
        h = sigmoid_layer(&h, layer);
    }
    let logits = dense_forward(&h, output);
    let mut total = Dd::ZERO;
    for (row, &label) in logits.iter().zip(labels) {
        let sum = row.iter().fold(Dd::ZERO, |acc, &z| acc + z.exp());
        total = total + sum.ln() - row[label];
    }
    total / Dd::from(x.rows() as f64)
}

/// Largest relative error between `grads` and central differences of
/// `loss` over every parameter that has a gradient entry.
pub fn max_fd_error(
    layers: &[DenseLayer],
    grads: &GradientSet,
    loss: impl Fn(&[DenseLayer]) -> Dd,
) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut work = layers.to_vec();
    for (li, grad) in grads.layers.iter().enumerate() {
        let Some(grad) = grad else { continue };
        let n_w = work[li].weights.as_slice().len();
        for p in 0..n_w + work[li].biases.len() {
            let analytic = if p < n_w { grad.weights.as_slice()[p] } else { grad.biases[p - n_w] };
            let original = param(&work[li], p);
            let (up, down) = (original + FD_STEP, original - FD_STEP);
            set_param(&mut work[li], p, up);
            let plus = loss(&work);
            set_param(&mut work[li], p, down);
            let minus = loss(&work);
            set_param(&mut work[li], p, original);
            let numeric = ((plus - minus) / Dd::from(up - down)).to_f64();
            let denom = analytic.abs().max(numeric.abs()).max(FD_FLOOR);
            worst = worst.max((analytic - numeric).abs() / denom);
            checked += 1;
        }
    }
    (worst, checked)
}

fn param(layer: &DenseLayer, p: usize) -> f64 {
    let n_w = layer.weights.as_slice().len();
    if p < n_w {
        layer.weights.as_slice()[p]
    } else {
        layer.biases[p - n_w]
    }
}

fn set_param(layer: &mut DenseLayer, p: usize, v: f64) {
    let n_w = layer.weights.as_slice().len();
    if p < n_w {
        layer.weights.as_mut_slice()[p] = v;
    } else {
        layer.biases[p - n_w] = v;
    }
}

fn random_matrix(rows: usize, cols: usize, rng: &mut SeededRng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform()).collect()).unwrap()
}

fn random_layer(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> DenseLayer {
    let mut layer = init_dense(fan_in, fan_out, rng).unwrap();
    for b in &mut layer.biases {
        *b = rng.uniform() - 0.5;
    }
    layer
}

fn dim(rng: &mut SeededRng, lo: usize, hi: usize) -> usize {
    lo + (rng.uniform() * (hi - lo + 1) as f64) as usize
}

#[derive(Debug)]
pub struct GradCheck {
    pub config: String,
    pub max_rel_error: f64,
    pub parameters: usize,
}

/// Random DAE (depth ≤ 3, dims ≤ 12, batch ≤ 7) with a random freeze mask,
/// checked against central differences of the naive loss.
pub fn dae_grad_check(seed: u64) -> GradCheck {
    let mut rng = SeededRng::new(seed);
    let depth = dim(&mut rng, 1, 3);
    let input = dim(&mut rng, 2, 12);
    let batch = dim(&mut rng, 1, 7);
    let mut dims = vec![input];
    let mut layers = Vec::new();
    for _ in 0..depth {
        let out = dim(&mut rng, 2, 12);
        layers.push(random_layer(*dims.last().unwrap(), out, &mut rng));
        dims.push(out);
    }
    let enc = EncoderStack::new(layers).unwrap();
    let dec = DecoderHead::new(random_layer(*dims.last().unwrap(), input, &mut rng));
    let mut mask: Vec<bool> = (0..depth).map(|_| rng.uniform() < 0.3).collect();
    if mask.iter().all(|&m| m) {
        mask[depth - 1] = false;
    }
    let x = random_matrix(batch, input, &mut rng);
    let x_tilde = random_matrix(batch, input, &mut rng);

    let trace = dae_forward(&enc, &dec, &x_tilde).unwrap();
    let grads = dae_backward(&trace, &x, &enc, &dec, &FreezeMask::new(mask.clone())).unwrap();
    for (i, &frozen) in mask.iter().enumerate() {
        assert_eq!(grads.encoder_layer(i).is_none(), frozen);
    }
    let mut all: Vec<DenseLayer> = enc.layers().to_vec();
    all.push(dec.layer.clone());
    let (max_rel_error, parameters) =
        max_fd_error(&all, &grads, |ls| naive_dae_loss(ls, &x_tilde, &x));
    GradCheck {
        config: format!("dae dims {dims:?} batch {batch} frozen {mask:?}"),
        max_rel_error,
        parameters,
    }
}

pub fn classifier_grad_check(seed: u64) -> GradCheck {
    let mut rng = SeededRng::new(seed ^ 0xC1A5);
    let depth = dim(&mut rng, 1, 3);
    let input = dim(&mut rng, 2, 12);
    let batch = dim(&mut rng, 1, 7);
    let classes = dim(&mut rng, 2, 12);
    let mut dims = vec![input];
    let mut layers = Vec::new();
    for _ in 0..depth {
        let out = dim(&mut rng, 2, 12);
        layers.push(random_layer(*dims.last().unwrap(), out, &mut rng));
        dims.push(out);
    }
    let enc = EncoderStack::new(layers).unwrap();
    let output = random_layer(*dims.last().unwrap(), classes, &mut rng);
    let net = ClassifierNet::new(enc, output).unwrap();
    let x = random_matrix(batch, input, &mut rng);
    let labels: Vec<usize> = (0..batch).map(|_| dim(&mut rng, 0, classes - 1)).collect();

    let (loss, grads) = classifier_loss_and_grad(&net, &x, &labels).unwrap();
    let mut all: Vec<DenseLayer> = net.encoder.layers().to_vec();
    all.push(net.output.clone());
    assert!((loss - naive_classifier_loss(&all, &x, &labels).to_f64()).abs() < 1e-12);
    let (max_rel_error, parameters) =
        max_fd_error(&all, &grads, |ls| naive_classifier_loss(ls, &x, &labels));
    dims.push(classes);
    GradCheck {
        config: format!("classifier dims {dims:?} batch {batch}"),
        max_rel_error,
        parameters,
    }
}

/// MNIST directory: `$MNIST_DIR`, else `<workspace>/data/mnist`.
pub fn mnist_dir() -> PathBuf {
    std::env::var_os("MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub fn mnist_available() -> bool {
    let dir = mnist_dir();
    ["train-images-idx3-ubyte", "train-labels-idx1-ubyte", "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
        .iter()
        .all(|f| dir.join(f).is_file())
}

pub fn load_mnist_test() -> gradual_dae::Result<Dataset> {
    let dir = mnist_dir();
    gradual_dae::data::load_mnist_idx(dir.join("t10k-images-idx3-ubyte"), dir.join("t10k-labels-idx1-ubyte"))
}

pub fn load_mnist_train() -> gradual_dae::Result<Dataset> {
    let dir = mnist_dir();
    gradual_dae::data::load_mnist_idx(dir.join("train-images-idx3-ubyte"), dir.join("train-labels-idx1-ubyte"))
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Entropy floor by direct per-component summation with the same
/// `[1e-12, 1 - 1e-12]` clipping.
pub fn entropy_floor_oracle(x: &Matrix) -> f64 {
    let terms = x.as_slice().iter().map(|&t| {
        let y = t.clamp(1e-12, 1.0 - 1e-12);
        -(t * y.ln()) - (1.0 - t) * (1.0 - y).ln()
    });
    compensated_sum(terms) / x.rows() as f64
}
