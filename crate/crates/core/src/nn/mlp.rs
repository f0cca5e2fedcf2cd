use crate::error::{check_dim, check_finite, Error, Result};
use crate::rng::SeededRng;

use super::mat::{gemm, Mat};

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

/// Layer widths from input to output. Hidden layers use tanh; the output is linear.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpLayout {
    sizes: Vec<usize>,
}

impl MlpLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|s| *s == 0) {
            return Err(Error::invalid(format!("invalid MLP layout {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    /// `in_dim -> 64 -> 64 -> out_dim`.
    pub fn standard(in_dim: usize, out_dim: usize) -> Result<Self> {
        Self::new(vec![in_dim, DEFAULT_HIDDEN[0], DEFAULT_HIDDEN[1], out_dim])
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn in_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// `sum (fan_in + 1) * fan_out`.
    pub fn param_len(&self) -> usize {
        self.sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    /// Offsets of layer `l`'s weight matrix (`fan_out x fan_in`, row-major) and bias.
    pub fn offsets(&self, layer: usize) -> (usize, usize) {
        let start: usize = self.sizes[..=layer].windows(2).map(|w| (w[0] + 1) * w[1]).sum();
        let (fan_in, fan_out) = (self.sizes[layer], self.sizes[layer + 1]);
        (start, start + fan_in * fan_out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layout: MlpLayout,
    flat: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(layout: MlpLayout) -> Self {
        let flat = vec![0.0; layout.param_len()];
        Self { layout, flat }
    }

    pub fn from_flat(layout: MlpLayout, flat: Vec<f64>) -> Result<Self> {
        check_dim("MLP parameter vector", layout.param_len(), flat.len())?;
        check_finite("MLP parameters", &flat)?;
        Ok(Self { layout, flat })
    }

    /// Scaled uniform initialisation standing in for orthogonal init: weights
    /// of a layer with fan-in `f` are drawn from `U(-g sqrt(3/f), g sqrt(3/f))`
    /// (variance `g^2 / f`) with `g = hidden_gain` for hidden layers and
    /// `output_gain` for the last one. Biases start at zero.
    pub fn init(layout: MlpLayout, hidden_gain: f64, output_gain: f64, rng: &mut SeededRng) -> Self {
        let mut p = Self::zeros(layout);
        let last = p.layout.num_layers() - 1;
        for l in 0..=last {
            let fan_in = p.layout.sizes[l];
            let fan_out = p.layout.sizes[l + 1];
            let gain = if l == last { output_gain } else { hidden_gain };
            let bound = gain * (3.0 / fan_in as f64).sqrt();
            let (w, _) = p.layout.offsets(l);
            for v in &mut p.flat[w..w + fan_in * fan_out] {
                *v = rng.uniform(-bound, bound);
            }
        }
        p
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        let (w, b) = self.layout.offsets(layer);
        &self.flat[w..b]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        let (_, b) = self.layout.offsets(layer);
        &self.flat[b..b + self.layout.sizes[layer + 1]]
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_dim("MLP input", self.layout.in_dim(), input.len())?;
        check_finite("MLP input", input)?;
        Ok(self.forward_unchecked(input))
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> Vec<f64> {
        let last = self.layout.num_layers() - 1;
        let mut x = input.to_vec();
        for l in 0..=last {
            let (fan_in, fan_out) = (self.layout.sizes[l], self.layout.sizes[l + 1]);
            let w = self.weights(l);
            let mut y = self.bias(l).to_vec();
            for (o, yo) in y.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                *yo += row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            }
            if l != last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            x = y;
            debug_assert_eq!(x.len(), fan_out);
        }
        x
    }

    /// Batched forward pass, one sample per row.
    pub fn forward_batch(&self, input: &Mat) -> Result<Mat> {
        check_dim("MLP batch input", self.layout.in_dim(), input.cols)?;
        let last = self.layout.num_layers() - 1;
        let mut x = input.clone();
        for l in 0..=last {
            let (fan_in, fan_out) = (self.layout.sizes[l], self.layout.sizes[l + 1]);
            let mut y = Mat::zeros(x.rows, fan_out);
            for r in 0..x.rows {
                y.data[r * fan_out..(r + 1) * fan_out].copy_from_slice(self.bias(l));
            }
            gemm(x.rows, fan_in, fan_out, 1.0, &x.data, fan_in as isize, 1, self.weights(l), 1, fan_in as isize, 1.0, &mut y.data);
            if l != last {
                y.data.iter_mut().for_each(|v| *v = v.tanh());
            }
            x = y;
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent evaluator: explicit per-neuron loops over the flat layout.
    fn reference_forward(layout: &[usize], flat: &[f64], x: &[f64]) -> Vec<f64> {
        let mut off = 0;
        let mut h = x.to_vec();
        for l in 0..layout.len() - 1 {
            let (fi, fo) = (layout[l], layout[l + 1]);
            let w = &flat[off..off + fi * fo];
            let b = &flat[off + fi * fo..off + fi * fo + fo];
            off += (fi + 1) * fo;
            let mut next = vec![0.0; fo];
            for o in 0..fo {
                let mut acc = b[o];
                for i in 0..fi {
                    acc += w[o * fi + i] * h[i];
                }
                next[o] = if l + 2 < layout.len() { acc.tanh() } else { acc };
            }
            h = next;
        }
        h
    }

    #[test]
    fn param_len_formula() {
        let l = MlpLayout::standard(12, 2).unwrap();
        assert_eq!(l.param_len(), 13 * 64 + 65 * 64 + 65 * 2);
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = MlpParams::zeros(MlpLayout::standard(4, 3).unwrap());
        assert_eq!(p.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_linear_layer() {
        let layout = MlpLayout::new(vec![3, 3]).unwrap();
        let mut flat = vec![0.0; layout.param_len()];
        for i in 0..3 {
            flat[i * 3 + i] = 1.0;
        }
        let p = MlpParams::from_flat(layout, flat).unwrap();
        assert_eq!(p.forward(&[0.25, -7.0, 3.5]).unwrap(), vec![0.25, -7.0, 3.5]);
    }

    #[test]
    fn matches_reference_and_batch() {
        let mut rng = SeededRng::new(12);
        let p = MlpParams::init(MlpLayout::standard(5, 2).unwrap(), 1.4, 1.0, &mut rng);
        let mut rows = Vec::new();
        for _ in 0..7 {
            let x: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let y = p.forward(&x).unwrap();
            let r = reference_forward(p.layout().sizes(), p.flat(), &x);
            for (a, b) in y.iter().zip(&r) {
                assert!((a - b).abs() < 1e-12);
            }
            rows.push(x);
        }
        let batch = p.forward_batch(&Mat::from_rows(&rows)).unwrap();
        for (i, x) in rows.iter().enumerate() {
            let y = p.forward(x).unwrap();
            for (a, b) in batch.row(i).iter().zip(&y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = MlpParams::zeros(MlpLayout::standard(2, 1).unwrap());
        assert!(p.forward(&[1.0]).is_err());
        assert!(p.forward(&[1.0, f64::NAN]).is_err());
    }
}
