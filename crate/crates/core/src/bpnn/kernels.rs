//! Per-block arithmetic shared by the serial and parallel backends. Both
//! backends call these with either the full index range or one worker's
//! block, so every value is produced by the same sequence of operations.

use std::ops::Range;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// How a neuron's weighted input is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// Index order; reproduces the serial result bit for bit.
    Ordered,
    /// Four interleaved partial sums combined at the end.
    Lanes,
}

#[inline]
pub(crate) fn dot(w: &[f64], x: &[f64], reduction: Reduction) -> f64 {
    match reduction {
        Reduction::Ordered => {
            let mut s = 0.0;
            for (a, b) in w.iter().zip(x) {
                s += a * b;
            }
            s
        }
        Reduction::Lanes => {
            let mut acc = [0.0f64; 4];
            let mut wc = w.chunks_exact(4);
            let mut xc = x.chunks_exact(4);
            for (a, b) in (&mut wc).zip(&mut xc) {
                acc[0] += a[0] * b[0];
                acc[1] += a[1] * b[1];
                acc[2] += a[2] * b[2];
                acc[3] += a[3] * b[3];
            }
            let mut tail = 0.0;
            for (a, b) in wc.remainder().iter().zip(xc.remainder()) {
                tail += a * b;
            }
            (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
        }
    }
}

/// Activations of neurons `rows` of a layer: `sigmoid(bias + w_row . input)`.
pub(crate) fn layer_block(
    weights: &[f64],
    biases: &[f64],
    fan_in: usize,
    input: &[f64],
    rows: Range<usize>,
    out: &mut [f64],
    reduction: Reduction,
) {
    for (slot, i) in out.iter_mut().zip(rows) {
        let w = &weights[i * fan_in..(i + 1) * fan_in];
        *slot = sigmoid(biases[i] + dot(w, input, reduction));
    }
}

/// Output-layer error terms `(t - y) * y (1 - y)`.
pub(crate) fn output_deltas(target: &[f64], output: &[f64]) -> Vec<f64> {
    target
        .iter()
        .zip(output)
        .map(|(&t, &y)| (t - y) * (y * (1.0 - y)))
        .collect()
}

/// Hidden error terms for neurons `rows`, read from the pre-update `w2`.
pub(crate) fn hidden_delta_block(
    w2: &[f64],
    h: usize,
    delta_out: &[f64],
    hidden: &[f64],
    rows: Range<usize>,
    out: &mut [f64],
    reduction: Reduction,
) {
    let o = delta_out.len();
    for (slot, i) in out.iter_mut().zip(rows) {
        let back = match reduction {
            Reduction::Ordered => {
                let mut s = 0.0;
                for j in 0..o {
                    s += w2[j * h + i] * delta_out[j];
                }
                s
            }
            Reduction::Lanes => {
                let column: Vec<f64> = (0..o).map(|j| w2[j * h + i]).collect();
                dot(&column, delta_out, Reduction::Lanes)
            }
        };
        let a = hidden[i];
        *slot = (a * (1.0 - a)) * back;
    }
}

/// In-place step for the flat weight indices `flat`:
/// `w[f] += lr * (delta[f / fan_in] * act[f % fan_in])`.
pub(crate) fn weight_step_block(
    block: &mut [f64],
    flat: Range<usize>,
    fan_in: usize,
    lr: f64,
    delta: &[f64],
    act: &[f64],
) {
    for (w, f) in block.iter_mut().zip(flat) {
        *w += lr * (delta[f / fan_in] * act[f % fan_in]);
    }
}

pub(crate) fn bias_step(biases: &mut [f64], lr: f64, delta: &[f64]) {
    for (b, &d) in biases.iter_mut().zip(delta) {
        *b += lr * d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3f64.ln()) - 0.75).abs() < 1e-15);
        for x in [0.1, 1.0, 5.0] {
            assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
        }
        assert!(sigmoid(30.0) < 1.0 && sigmoid(-40.0) > 0.0);
    }

    #[test]
    fn lane_dot_close_to_ordered() {
        let w: Vec<f64> = (0..301).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let x: Vec<f64> = (0..301).map(|i| ((i * 104729) % 97) as f64 / 97.0).collect();
        let a = dot(&w, &x, Reduction::Ordered);
        let b = dot(&w, &x, Reduction::Lanes);
        assert!((a - b).abs() < 1e-12);
    }
}
