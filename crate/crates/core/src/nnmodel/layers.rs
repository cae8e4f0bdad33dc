//! Layer primitives with explicit forward caches and backward passes.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Glorot/Xavier uniform in `[-limit, limit]`, `limit = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

pub fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-limit..limit))
}

/// Normal(0, std) with draws beyond two standard deviations redrawn.
pub fn truncated_normal(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.0 {
            break z * std;
        }
    })
}

/// Matrix with orthonormal rows (or columns, whichever is shorter), from
/// Gram-Schmidt over Gaussian draws.
pub fn orthogonal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut q: Array2<f64> = Array2::from_shape_simple_fn((n, m), || StandardNormal.sample(rng));
    for i in 0..n {
        for j in 0..i {
            let proj = q.row(i).dot(&q.row(j));
            let qj = q.row(j).to_owned();
            q.row_mut(i).scaled_add(-proj, &qj);
        }
        let norm = q.row(i).dot(&q.row(i)).sqrt();
        q.row_mut(i).mapv_inplace(|v| v / norm);
    }
    if transpose {
        q.reversed_axes().as_standard_layout().to_owned()
    } else {
        q
    }
}

/// `x · w + b` with `b` stored as a `1 × n` row.
pub fn dense(x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    x.dot(w) + b
}

/// Gradients of a dense layer given the upstream gradient `dy`.
pub fn dense_backward(
    x: &Array2<f64>,
    w: &Array2<f64>,
    dy: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let dw = x.t().dot(dy);
    let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dx = dy.dot(&w.t());
    (dw, db, dx)
}

pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Embedding table followed by a Keras-style LSTM (gate order i, f, c, o;
/// sigmoid recurrent activation, tanh activation) returning the final
/// hidden state. Sequences are zero-padded at the end and padding steps are
/// skipped, so the final state is the state after the last real id.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceParams {
    /// `vocab × embed`
    pub embedding: Array2<f64>,
    /// `embed × 4·units`
    pub kernel: Array2<f64>,
    /// `units × 4·units`
    pub recurrent: Array2<f64>,
    /// `1 × 4·units`, forget-gate slice initialised to one
    pub bias: Array2<f64>,
}

impl SequenceParams {
    pub fn init(vocab: usize, embed: usize, units: usize, rng: &mut ChaCha8Rng) -> SequenceParams {
        let embedding = uniform(vocab, embed, 0.05, rng);
        let kernel = glorot_uniform(embed, 4 * units, rng);
        let recurrent = orthogonal(units, 4 * units, rng);
        let mut bias = Array2::zeros((1, 4 * units));
        bias.slice_mut(s![.., units..2 * units]).fill(1.0);
        SequenceParams {
            embedding,
            kernel,
            recurrent,
            bias,
        }
    }

    pub fn units(&self) -> usize {
        self.recurrent.nrows()
    }

    pub fn zeros_like(&self) -> SequenceParams {
        SequenceParams {
            embedding: Array2::zeros(self.embedding.raw_dim()),
            kernel: Array2::zeros(self.kernel.raw_dim()),
            recurrent: Array2::zeros(self.recurrent.raw_dim()),
            bias: Array2::zeros(self.bias.raw_dim()),
        }
    }
}

struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
    /// `B × 1`, 1 where the step is a real id
    active: Array2<f64>,
}

pub struct SequenceTrace {
    steps: Vec<StepCache>,
}

/// Number of leading non-pad ids.
pub fn real_length(ids: &[u32]) -> usize {
    ids.iter().take_while(|&&id| id != 0).count()
}

pub fn sequence_forward(p: &SequenceParams, ids: &[Vec<u32>]) -> (Array2<f64>, SequenceTrace) {
    let batch = ids.len();
    let units = p.units();
    let embed = p.embedding.ncols();
    let lengths: Vec<usize> = ids.iter().map(|s| real_length(s)).collect();
    let steps_needed = lengths.iter().copied().max().unwrap_or(0);

    let mut h = Array2::<f64>::zeros((batch, units));
    let mut c = Array2::<f64>::zeros((batch, units));
    let mut steps = Vec::with_capacity(steps_needed);
    for t in 0..steps_needed {
        let mut x = Array2::<f64>::zeros((batch, embed));
        let mut active = Array2::<f64>::zeros((batch, 1));
        for (b, seq) in ids.iter().enumerate() {
            if t < lengths[b] {
                x.row_mut(b).assign(&p.embedding.row(seq[t] as usize));
                active[[b, 0]] = 1.0;
            }
        }
        let z = x.dot(&p.kernel) + h.dot(&p.recurrent) + &p.bias;
        let i = z.slice(s![.., 0..units]).mapv(sigmoid);
        let f = z.slice(s![.., units..2 * units]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * units..3 * units]).mapv(f64::tanh);
        let o = z.slice(s![.., 3 * units..4 * units]).mapv(sigmoid);
        let c_cand = &f * &c + &i * &g;
        let tanh_c = c_cand.mapv(f64::tanh);
        let h_cand = &o * &tanh_c;
        let keep = active.mapv(|a| 1.0 - a);
        let c_next = &c_cand * &active + &c * &keep;
        let h_next = &h_cand * &active + &h * &keep;
        steps.push(StepCache {
            x,
            h_prev: std::mem::replace(&mut h, h_next),
            c_prev: std::mem::replace(&mut c, c_next),
            i,
            f,
            g,
            o,
            tanh_c,
            active,
        });
    }
    (h, SequenceTrace { steps })
}

/// Backpropagation through time from the gradient of the final state.
pub fn sequence_backward(
    p: &SequenceParams,
    ids: &[Vec<u32>],
    trace: &SequenceTrace,
    d_h_final: &Array2<f64>,
) -> SequenceParams {
    let units = p.units();
    let mut grads = p.zeros_like();
    let mut dh = d_h_final.clone();
    let mut dc = Array2::<f64>::zeros(dh.raw_dim());
    for (t, step) in trace.steps.iter().enumerate().rev() {
        let keep = step.active.mapv(|a| 1.0 - a);
        let dh_cand = &dh * &step.active;
        let dc_cand_direct = &dc * &step.active;

        let d_o = &dh_cand * &step.tanh_c;
        let dc_total = dc_cand_direct + &dh_cand * &step.o * &step.tanh_c.mapv(|v| 1.0 - v * v);
        let d_i = &dc_total * &step.g;
        let d_g = &dc_total * &step.i;
        let d_f = &dc_total * &step.c_prev;

        let mut dz = Array2::<f64>::zeros((dh.nrows(), 4 * units));
        Zip::from(dz.slice_mut(s![.., 0..units]))
            .and(&d_i)
            .and(&step.i)
            .for_each(|z, &d, &a| *z = d * a * (1.0 - a));
        Zip::from(dz.slice_mut(s![.., units..2 * units]))
            .and(&d_f)
            .and(&step.f)
            .for_each(|z, &d, &a| *z = d * a * (1.0 - a));
        Zip::from(dz.slice_mut(s![.., 2 * units..3 * units]))
            .and(&d_g)
            .and(&step.g)
            .for_each(|z, &d, &a| *z = d * (1.0 - a * a));
        Zip::from(dz.slice_mut(s![.., 3 * units..4 * units]))
            .and(&d_o)
            .and(&step.o)
            .for_each(|z, &d, &a| *z = d * a * (1.0 - a));

        grads.kernel += &step.x.t().dot(&dz);
        grads.recurrent += &step.h_prev.t().dot(&dz);
        grads.bias += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dx = dz.dot(&p.kernel.t());
        for (b, seq) in ids.iter().enumerate() {
            if step.active[[b, 0]] > 0.0 {
                let mut row = grads.embedding.row_mut(seq[t] as usize);
                row += &dx.row(b);
            }
        }

        dh = dz.dot(&p.recurrent.t()) + &dh * &keep;
        dc = &dc_total * &step.f + &dc * &keep;
    }
    grads
}

/// Inverted dropout mask (`0` or `1 / (1 - rate)`).
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let scale = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random_bool(rate) { 0.0 } else { scale })
}

pub fn relu(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn column(values: &[f64]) -> Array2<f64> {
    Array1::from(values.to_vec()).insert_axis(Axis(1))
}
