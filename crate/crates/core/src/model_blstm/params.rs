use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Network shape. Gate blocks are ordered input, forget, cell, output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlstmDims {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
    /// `false` keeps only the forward direction (ablation).
    pub bidirectional: bool,
}

impl Default for BlstmDims {
    fn default() -> Self {
        Self {
            input: 152,
            hidden: 16,
            layers: 2,
            classes: 4,
            bidirectional: true,
        }
    }
}

/// Offsets of one (layer, direction) block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    /// `4H × in` input weights.
    pub w: usize,
    /// `4H × H` recurrent weights.
    pub u: usize,
    /// `4H` biases.
    pub b: usize,
    pub input: usize,
}

impl BlstmDims {
    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    pub fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input
        } else {
            self.directions() * self.hidden
        }
    }

    /// Width of the top layer's concatenated hidden state.
    pub fn top_width(&self) -> usize {
        self.directions() * self.hidden
    }

    fn block_len(&self, layer: usize) -> usize {
        let g = 4 * self.hidden;
        g * (self.layer_input(layer) + self.hidden) + g
    }

    pub fn block(&self, layer: usize, direction: usize) -> Block {
        let mut start = 0;
        for l in 0..layer {
            start += self.directions() * self.block_len(l);
        }
        start += direction * self.block_len(layer);
        let g = 4 * self.hidden;
        let input = self.layer_input(layer);
        Block {
            w: start,
            u: start + g * input,
            b: start + g * (input + self.hidden),
            input,
        }
    }

    /// Offset of the `classes × top_width` output weights; the biases follow.
    pub fn output_offset(&self) -> usize {
        (0..self.layers).map(|l| self.directions() * self.block_len(l)).sum()
    }

    pub fn param_count(&self) -> usize {
        self.output_offset() + self.classes * (self.top_width() + 1)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.input == 0 || self.hidden == 0 || self.layers == 0 || self.classes < 2 {
            return Err(format!("invalid network dimensions {self:?}"));
        }
        Ok(())
    }
}

/// All weights in one flat vector, laid out by [`BlstmDims::block`] and
/// [`BlstmDims::output_offset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlstmParams {
    pub dims: BlstmDims,
    pub values: Vec<f64>,
}

impl BlstmParams {
    pub fn zeros(dims: BlstmDims) -> Self {
        Self {
            dims,
            values: vec![0.0; dims.param_count()],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub const FORGET_BIAS: f64 = 1.0;

/// Xavier-uniform weights per gate matrix (`±sqrt(6 / (fan_in + fan_out))`),
/// zero biases except the forget gate at 1.0.
pub fn init_params(seed: u64, dims: BlstmDims) -> BlstmParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = BlstmParams::zeros(dims);
    let h = dims.hidden;
    let mut fill = |values: &mut [f64], fan_in: usize, fan_out: usize| {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in values {
            *v = rng.random_range(-a..=a);
        }
    };
    for l in 0..dims.layers {
        for d in 0..dims.directions() {
            let blk = dims.block(l, d);
            for gate in 0..4 {
                let w = blk.w + gate * h * blk.input;
                fill(&mut p.values[w..w + h * blk.input], blk.input, h);
                let u = blk.u + gate * h * h;
                fill(&mut p.values[u..u + h * h], h, h);
            }
            p.values[blk.b + h..blk.b + 2 * h].fill(FORGET_BIAS);
        }
    }
    let o = dims.output_offset();
    let n = dims.classes * dims.top_width();
    fill(&mut p.values[o..o + n], dims.top_width(), dims.classes);
    p
}
