//! Naive reference implementations written from the definitions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use retrain::trainer::{Example, SoftmaxLayer};

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Direct six-loop convolution over HWC input and (kernel, row, col, channel)
/// weights; `same` pads like TensorFlow.
pub fn naive_conv(
    x: &[f64],
    (h, w, c): (usize, usize, usize),
    k: &[f64],
    (n, kh, kw): (usize, usize, usize),
    stride: usize,
    same: bool,
) -> (Vec<f64>, usize, usize) {
    let (oh, ow, pt, pl) = if same {
        let oh = h.div_ceil(stride);
        let ow = w.div_ceil(stride);
        let th = ((oh - 1) * stride + kh).saturating_sub(h);
        let tw = ((ow - 1) * stride + kw).saturating_sub(w);
        (oh, ow, th / 2, tw / 2)
    } else {
        ((h - kh) / stride + 1, (w - kw) / stride + 1, 0, 0)
    };
    let mut out = vec![0.0; oh * ow * n];
    for oy in 0..oh {
        for ox in 0..ow {
            for f in 0..n {
                let mut s = 0.0;
                for dy in 0..kh {
                    for dx in 0..kw {
                        for ch in 0..c {
                            let iy = (oy * stride + dy) as i64 - pt as i64;
                            let ix = (ox * stride + dx) as i64 - pl as i64;
                            if iy < 0 || ix < 0 || iy >= h as i64 || ix >= w as i64 {
                                continue;
                            }
                            let xv = x[(iy as usize * w + ix as usize) * c + ch];
                            let kv = k[((f * kh + dy) * kw + dx) * c + ch];
                            s += xv * kv;
                        }
                    }
                }
                out[(oy * ow + ox) * n + f] = s;
            }
        }
    }
    (out, oh, ow)
}

pub fn naive_pool(x: &[f64], (h, w, c): (usize, usize, usize)) -> Vec<f64> {
    let mut out = Vec::new();
    for oy in 0..h / 2 {
        for ox in 0..w / 2 {
            for ch in 0..c {
                let mut m = f64::NEG_INFINITY;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    m = m.max(x[((2 * oy + dy) * w + 2 * ox + dx) * c + ch]);
                }
                out.push(m);
            }
        }
    }
    out
}



/// Mean of `logsumexp(z) - z[label]` over the batch.
pub fn mean_loss(layer: &SoftmaxLayer, batch: &[Example]) -> f64 {
    batch
        .iter()
        .map(|e| {
            let z = layer.forward(&e.features).unwrap();
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - z[e.label]
        })
        .sum::<f64>()
        / batch.len() as f64
}
