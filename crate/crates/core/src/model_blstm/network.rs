use rayon::prelude::*;

use super::params::{Block, BlstmDims, BlstmParams};
use super::ModelError;

/// A `T × input` row-major feature block with per-step optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub features: Vec<f64>,
    pub labels: Vec<Option<usize>>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += M v` for row-major `M` of shape `out.len() × v.len()`.
fn gemv_add(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = v.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &m[r * cols..(r + 1) * cols];
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Mᵀ v` for row-major `M` of shape `v.len() × out.len()`.
fn gemv_t_add(out: &mut [f64], m: &[f64], v: &[f64]) {
    let cols = out.len();
    for (r, &s) in v.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let row = &m[r * cols..(r + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * s;
        }
    }
}

/// `g += a bᵀ`.
fn outer_add(g: &mut [f64], a: &[f64], b: &[f64]) {
    let cols = b.len();
    for (r, &s) in a.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        for (x, y) in g[r * cols..(r + 1) * cols].iter_mut().zip(b) {
            *x += s * y;
        }
    }
}

/// Activations of one direction of one layer, indexed by time position.
struct DirCache {
    /// `T × 4H`: i, f, g, o after their nonlinearities.
    gates: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

struct LayerCache {
    dirs: Vec<DirCache>,
    /// `T × D·H` concatenated hidden states.
    out: Vec<f64>,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    probs: Vec<f64>,
}

/// Time position of processing step `s`.
fn position(s: usize, t_len: usize, reverse: bool) -> usize {
    if reverse {
        t_len - 1 - s
    } else {
        s
    }
}

fn run_direction(p: &[f64], blk: Block, h: usize, x: &[f64], t_len: usize, reverse: bool) -> DirCache {
    let g4 = 4 * h;
    let w = &p[blk.w..blk.u];
    let u = &p[blk.u..blk.b];
    let b = &p[blk.b..blk.b + g4];
    let mut cache = DirCache {
        gates: vec![0.0; t_len * g4],
        c: vec![0.0; t_len * h],
        h: vec![0.0; t_len * h],
    };
    let zeros = vec![0.0; h];
    let mut z = vec![0.0; g4];
    for s in 0..t_len {
        let t = position(s, t_len, reverse);
        let (h_prev, c_prev) = if s == 0 {
            (zeros.clone(), zeros.clone())
        } else {
            let tp = position(s - 1, t_len, reverse);
            (
                cache.h[tp * h..(tp + 1) * h].to_vec(),
                cache.c[tp * h..(tp + 1) * h].to_vec(),
            )
        };
        z.copy_from_slice(b);
        gemv_add(&mut z, w, &x[t * blk.input..(t + 1) * blk.input]);
        gemv_add(&mut z, u, &h_prev);
        let gates = &mut cache.gates[t * g4..(t + 1) * g4];
        for k in 0..h {
            gates[k] = sigmoid(z[k]);
            gates[h + k] = sigmoid(z[h + k]);
            gates[2 * h + k] = z[2 * h + k].tanh();
            gates[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        for k in 0..h {
            let c = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
            cache.c[t * h + k] = c;
            cache.h[t * h + k] = gates[3 * h + k] * c.tanh();
        }
    }
    cache
}

fn check_input(dims: &BlstmDims, features: &[f64]) -> Result<usize, ModelError> {
    if features.is_empty() || !features.len().is_multiple_of(dims.input) {
        return Err(ModelError::ShapeMismatch(format!(
            "{} values do not form rows of {} features",
            features.len(),
            dims.input
        )));
    }
    if let Some(i) = features.iter().position(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput {
            step: i / dims.input,
            feature: i % dims.input,
        });
    }
    Ok(features.len() / dims.input)
}

fn forward_cached(params: &BlstmParams, features: &[f64]) -> Result<ForwardCache, ModelError> {
    let dims = params.dims;
    let t_len = check_input(&dims, features)?;
    let h = dims.hidden;
    let nd = dims.directions();
    let p = &params.values;
    let mut layers: Vec<LayerCache> = Vec::with_capacity(dims.layers);
    for l in 0..dims.layers {
        let x: &[f64] = if l == 0 { features } else { &layers[l - 1].out };
        let dirs: Vec<DirCache> = (0..nd)
            .map(|d| run_direction(p, dims.block(l, d), h, x, t_len, d == 1))
            .collect();
        let width = nd * h;
        let mut out = vec![0.0; t_len * width];
        for t in 0..t_len {
            for (d, cache) in dirs.iter().enumerate() {
                out[t * width + d * h..t * width + (d + 1) * h].copy_from_slice(&cache.h[t * h..(t + 1) * h]);
            }
        }
        layers.push(LayerCache { dirs, out });
    }
    let top = &layers[dims.layers - 1].out;
    let width = dims.top_width();
    let c = dims.classes;
    let o = dims.output_offset();
    let v = &p[o..o + c * width];
    let bias = &p[o + c * width..o + c * width + c];
    let mut probs = vec![0.0; t_len * c];
    for t in 0..t_len {
        let row = &mut probs[t * c..(t + 1) * c];
        row.copy_from_slice(bias);
        gemv_add(row, v, &top[t * width..(t + 1) * width]);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for z in row.iter_mut() {
            *z = (*z - max).exp();
            sum += *z;
        }
        for z in row.iter_mut() {
            *z /= sum;
        }
    }
    Ok(ForwardCache { layers, probs })
}

/// Per-step class probabilities, `T × classes` row-major.
pub fn forward(params: &BlstmParams, features: &[f64]) -> Result<Vec<f64>, ModelError> {
    Ok(forward_cached(params, features)?.probs)
}

/// Arg-max class per step; ties go to the lower class index.
pub fn predict(params: &BlstmParams, features: &[f64]) -> Result<Vec<usize>, ModelError> {
    let c = params.dims.classes;
    let probs = forward(params, features)?;
    Ok(probs
        .chunks(c)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(0, |best, (k, &p)| if p > row[best] { k } else { best })
        })
        .collect())
}

fn check_labels(dims: &BlstmDims, seq: &Sequence) -> Result<(), ModelError> {
    if seq.features.len() != seq.labels.len() * dims.input {
        return Err(ModelError::ShapeMismatch(format!(
            "{} labels for {} feature values",
            seq.labels.len(),
            seq.features.len()
        )));
    }
    if let Some(bad) = seq.labels.iter().flatten().find(|&&y| y >= dims.classes) {
        return Err(ModelError::ShapeMismatch(format!(
            "label {bad} outside {} classes",
            dims.classes
        )));
    }
    Ok(())
}

/// Un-normalized weighted cross-entropy of one sequence, its weight sum,
/// and the gradient of the former.
fn sequence_grad(
    params: &BlstmParams,
    seq: &Sequence,
    class_weights: &[f64],
) -> Result<(f64, f64, Vec<f64>), ModelError> {
    check_labels(&params.dims, seq)?;
    let dims = params.dims;
    let cache = forward_cached(params, &seq.features)?;
    let t_len = seq.len();
    let (h, c, nd) = (dims.hidden, dims.classes, dims.directions());
    let g4 = 4 * h;
    let p = &params.values;
    let mut grad = vec![0.0; p.len()];

    let mut loss = 0.0;
    let mut weight = 0.0;
    let width = dims.top_width();
    let o = dims.output_offset();
    let mut d_top = vec![0.0; t_len * width];
    let mut dlogit = vec![0.0; c];
    for t in 0..t_len {
        let Some(y) = seq.labels[t] else { continue };
        let w = class_weights[y];
        let probs = &cache.probs[t * c..(t + 1) * c];
        loss -= w * probs[y].max(f64::MIN_POSITIVE).ln();
        weight += w;
        for k in 0..c {
            dlogit[k] = w * (probs[k] - if k == y { 1.0 } else { 0.0 });
        }
        let top = &cache.layers[dims.layers - 1].out[t * width..(t + 1) * width];
        outer_add(&mut grad[o..o + c * width], &dlogit, top);
        for k in 0..c {
            grad[o + c * width + k] += dlogit[k];
        }
        gemv_t_add(&mut d_top[t * width..(t + 1) * width], &p[o..o + c * width], &dlogit);
    }

    let mut d_out = d_top;
    for l in (0..dims.layers).rev() {
        let input_dim = dims.layer_input(l);
        let x: &[f64] = if l == 0 {
            &seq.features
        } else {
            &cache.layers[l - 1].out
        };
        let mut d_x = if l > 0 {
            vec![0.0; t_len * input_dim]
        } else {
            Vec::new()
        };
        for d in 0..nd {
            let blk = dims.block(l, d);
            let dc_cache = &cache.layers[l].dirs[d];
            let reverse = d == 1;
            let mut dh_next = vec![0.0; h];
            let mut dc_next = vec![0.0; h];
            let mut dz = vec![0.0; g4];
            let zeros = vec![0.0; h];
            for s in (0..t_len).rev() {
                let t = position(s, t_len, reverse);
                let gates = &dc_cache.gates[t * g4..(t + 1) * g4];
                let (h_prev, c_prev): (&[f64], &[f64]) = if s == 0 {
                    (&zeros, &zeros)
                } else {
                    let tp = position(s - 1, t_len, reverse);
                    (&dc_cache.h[tp * h..(tp + 1) * h], &dc_cache.c[tp * h..(tp + 1) * h])
                };
                for k in 0..h {
                    let (i, f, g, og) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                    let tc = dc_cache.c[t * h + k].tanh();
                    let dh = d_out[t * nd * h + d * h + k] + dh_next[k];
                    let dc = dc_next[k] + dh * og * (1.0 - tc * tc);
                    dz[k] = dc * g * i * (1.0 - i);
                    dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
                    dz[2 * h + k] = dc * i * (1.0 - g * g);
                    dz[3 * h + k] = dh * tc * og * (1.0 - og);
                    dc_next[k] = dc * f;
                }
                outer_add(&mut grad[blk.w..blk.u], &dz, &x[t * input_dim..(t + 1) * input_dim]);
                outer_add(&mut grad[blk.u..blk.b], &dz, h_prev);
                for k in 0..g4 {
                    grad[blk.b + k] += dz[k];
                }
                dh_next.fill(0.0);
                gemv_t_add(&mut dh_next, &p[blk.u..blk.b], &dz);
                if l > 0 {
                    gemv_t_add(&mut d_x[t * input_dim..(t + 1) * input_dim], &p[blk.w..blk.u], &dz);
                }
            }
        }
        d_out = d_x;
    }
    Ok((loss, weight, grad))
}

/// Class-weighted mean cross-entropy over all labeled steps of the batch,
/// normalized by the summed weights, and its gradient. Sequences are
/// evaluated in parallel and reduced in input order.
pub fn loss_and_gradients(
    params: &BlstmParams,
    batch: &[&Sequence],
    class_weights: &[f64],
) -> Result<(f64, Vec<f64>), ModelError> {
    if class_weights.len() != params.dims.classes {
        return Err(ModelError::ShapeMismatch(format!(
            "{} class weights for {} classes",
            class_weights.len(),
            params.dims.classes
        )));
    }
    let parts: Vec<(f64, f64, Vec<f64>)> = batch
        .par_iter()
        .map(|s| sequence_grad(params, s, class_weights))
        .collect::<Result<_, _>>()?;
    let mut grad = vec![0.0; params.values.len()];
    let (mut loss, mut weight) = (0.0, 0.0);
    for (l, w, g) in parts {
        loss += l;
        weight += w;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    if weight > 0.0 {
        loss /= weight;
        for g in &mut grad {
            *g /= weight;
        }
    }
    Ok((loss, grad))
}

/// Loss only, on one sequence.
pub fn sequence_loss(params: &BlstmParams, seq: &Sequence, class_weights: &[f64]) -> Result<f64, ModelError> {
    check_labels(&params.dims, seq)?;
    let c = params.dims.classes;
    let probs = forward(params, &seq.features)?;
    let (mut loss, mut weight) = (0.0, 0.0);
    for (t, y) in seq.labels.iter().enumerate() {
        if let Some(y) = *y {
            loss -= class_weights[y] * probs[t * c + y].max(f64::MIN_POSITIVE).ln();
            weight += class_weights[y];
        }
    }
    Ok(if weight > 0.0 { loss / weight } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_blstm::params::init_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> BlstmDims {
        BlstmDims {
            input: 5,
            hidden: 4,
            layers: 2,
            classes: 4,
            bidirectional: true,
        }
    }

    fn random_seq(rng: &mut ChaCha8Rng, dims: BlstmDims, t: usize) -> Sequence {
        Sequence {
            features: (0..t * dims.input).map(|_| rng.random_range(-1.0..1.0)).collect(),
            labels: (0..t).map(|_| Some(rng.random_range(0..dims.classes))).collect(),
        }
    }

    #[test]
    fn rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = init_params(1, BlstmDims::default());
        let s = random_seq(&mut rng, BlstmDims::default(), 30);
        let probs = forward(&p, &s.features).unwrap();
        for row in probs.chunks(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|v| *v > 0.0 && *v < 1.0));
        }
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let dims = small();
        let mut p = init_params(2, dims);
        let o = dims.output_offset();
        p.values[o..].fill(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = random_seq(&mut rng, dims, 7);
        assert!(forward(&p, &s.features).unwrap().iter().all(|v| *v == 0.25));
        let loss = sequence_loss(&p, &s, &[1.0; 4]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_give_near_zero_loss() {
        let dims = small();
        let mut p = BlstmParams::zeros(dims);
        let o = dims.output_offset() + dims.classes * dims.top_width();
        p.values[o..o + 4].copy_from_slice(&[30.0, -30.0, -30.0, -30.0]);
        let s = Sequence {
            features: vec![0.1; 3 * dims.input],
            labels: vec![Some(0); 3],
        };
        assert!(sequence_loss(&p, &s, &[1.0; 4]).unwrap() < 1e-6);
    }

    /// Reversing time and exchanging the direction blocks (with the matching
    /// column permutation of the downstream weights) reverses the output.
    #[test]
    fn time_reversal_symmetry() {
        let dims = small();
        let p = init_params(9, dims);
        let h = dims.hidden;
        let mut q = p.clone();
        for l in 0..dims.layers {
            let (a, b) = (dims.block(l, 0), dims.block(l, 1));
            let len = a.b + 4 * h - a.w;
            q.values[a.w..a.w + len].copy_from_slice(&p.values[b.w..b.w + len]);
            q.values[b.w..b.w + len].copy_from_slice(&p.values[a.w..a.w + len]);
        }
        // swap the [fwd | bwd] input halves of every matrix that reads them
        let swap_cols = |vals: &mut Vec<f64>, start: usize, rows: usize| {
            for r in 0..rows {
                let row = &mut vals[start + r * 2 * h..start + (r + 1) * 2 * h];
                let (x, y) = row.split_at_mut(h);
                x.swap_with_slice(y);
            }
        };
        for d in 0..2 {
            let blk = dims.block(1, d);
            swap_cols(&mut q.values, blk.w, 4 * h);
        }
        swap_cols(&mut q.values, dims.output_offset(), dims.classes);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_seq(&mut rng, dims, 9);
        let reversed: Vec<f64> = s.features.chunks(dims.input).rev().flatten().copied().collect();
        let a = forward(&p, &s.features).unwrap();
        let b = forward(&q, &reversed).unwrap();
        for (ra, rb) in a.chunks(4).zip(b.chunks(4).rev()) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn small_network_gradient_check() {
        let dims = small();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = init_params(5, dims);
        let mut s = random_seq(&mut rng, dims, 6);
        s.labels[2] = None;
        let w = [1.0, 2.0, 0.5, 1.5];
        let (_, g) = loss_and_gradients(&p, &[&s], &w).unwrap();
        let eps = 1e-6;
        for i in 0..p.values.len() {
            let mut a = p.clone();
            a.values[i] += eps;
            let mut b = p.clone();
            b.values[i] -= eps;
            let fd = (sequence_loss(&a, &s, &w).unwrap() - sequence_loss(&b, &s, &w).unwrap()) / (2.0 * eps);
            assert!((fd - g[i]).abs() < 1e-7, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn predict_matches_forward_argmax() {
        let p = init_params(12, BlstmDims::default());
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let s = random_seq(&mut rng, BlstmDims::default(), 3);
            let probs = forward(&p, &s.features).unwrap();
            let pred = predict(&p, &s.features).unwrap();
            for (row, k) in probs.chunks(4).zip(pred) {
                let best = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(row[k], best);
                assert!(row[..k].iter().all(|v| *v < best));
            }
        }
    }

    #[test]
    fn uniform_row_predicts_first_class() {
        let dims = small();
        let mut p = BlstmParams::zeros(dims);
        p.values[0] = 0.0;
        assert_eq!(predict(&p, &[0.3; 5]).unwrap(), vec![0]);
    }

    #[test]
    fn bad_inputs() {
        let p = init_params(1, small());
        assert!(matches!(forward(&p, &[0.0; 7]), Err(ModelError::ShapeMismatch(_))));
        let mut x = vec![0.0; 10];
        x[6] = f64::NAN;
        assert!(matches!(
            forward(&p, &x),
            Err(ModelError::NonFiniteInput { step: 1, feature: 1 })
        ));
    }
}
