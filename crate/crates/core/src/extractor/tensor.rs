//! Dense forward kernels over height × width × channel tensors.

use crate::error::{Error, Result};

/// A 3-D array in height, width, channel order (channels fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::Shape(format!(
                "{height}x{width}x{channels} tensor needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        Ok(Tensor3 {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor3 {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }
}

/// `count` kernels of `height × width × channels`, stored kernel-major, then
/// row, column, channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernels {
    count: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Kernels {
    pub fn new(
        count: usize,
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if count == 0 || height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape("kernel dimensions must be positive".into()));
        }
        if data.len() != count * height * width * channels {
            return Err(Error::Shape(format!(
                "{count} kernels of {height}x{width}x{channels} need {} weights, got {}",
                count * height * width * channels,
                data.len()
            )));
        }
        Ok(Kernels {
            count,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.count, self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, k: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[((k * self.height + y) * self.width + x) * self.channels + c]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Valid,
    /// Output size `ceil(in / stride)`, zero padding split with the extra
    /// row/column on the bottom/right.
    Same,
}

/// Returns (before, total) padding along one axis.
fn padding_for(input: usize, kernel: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Valid => (0, 0),
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            (total / 2, total)
        }
    }
}

/// Cross-correlation without bias.
pub fn conv2d(input: &Tensor3, kernels: &Kernels, stride: usize, padding: Padding) -> Result<Tensor3> {
    let (h, w, c) = input.shape();
    let (k_out, kh, kw, kc) = kernels.shape();
    if kc != c {
        return Err(Error::Shape(format!(
            "kernel depth {kc} does not match input channels {c}"
        )));
    }
    if stride == 0 {
        return Err(Error::Shape("stride must be at least 1".into()));
    }
    let (pad_top, pad_h) = padding_for(h, kh, stride, padding);
    let (pad_left, pad_w) = padding_for(w, kw, stride, padding);
    if kh > h + pad_h || kw > w + pad_w {
        return Err(Error::Shape(format!(
            "{kh}x{kw} kernel larger than padded {}x{} input",
            h + pad_h,
            w + pad_w
        )));
    }
    let out_h = (h + pad_h - kh) / stride + 1;
    let out_w = (w + pad_w - kw) / stride + 1;

    let mut out = vec![0.0; out_h * out_w * k_out];
    let kernel_stride = kh * kw * c;
    for oy in 0..out_h {
        for ox in 0..out_w {
            let acc = &mut out[(oy * out_w + ox) * k_out..][..k_out];
            for ky in 0..kh {
                let iy = (oy * stride + ky) as isize - pad_top as isize;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..kw {
                    let ix = (ox * stride + kx) as isize - pad_left as isize;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let px = &input.data[(iy as usize * w + ix as usize) * c..][..c];
                    let tap = (ky * kw + kx) * c;
                    for (k, a) in acc.iter_mut().enumerate() {
                        let wk = &kernels.data[k * kernel_stride + tap..][..c];
                        *a += px.iter().zip(wk).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
            }
        }
    }
    Tensor3::new(out_h, out_w, k_out, out)
}

pub fn relu(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&v| v.max(0.0)).collect()
}

pub fn relu_tensor(t: Tensor3) -> Tensor3 {
    let (h, w, c) = t.shape();
    let data = t.into_data().into_iter().map(|v| v.max(0.0)).collect();
    Tensor3 {
        height: h,
        width: w,
        channels: c,
        data,
    }
}

/// Per-channel max over non-overlapping 2×2 windows; a trailing odd row or
/// column is dropped.
pub fn maxpool2d(input: &Tensor3) -> Result<Tensor3> {
    let (h, w, c) = input.shape();
    if h < 2 || w < 2 {
        return Err(Error::Shape(format!("max-pool needs at least 2x2, got {h}x{w}")));
    }
    let (out_h, out_w) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        for ox in 0..out_w {
            for ch in 0..c {
                let (y, x) = (oy * 2, ox * 2);
                let m = input
                    .at(y, x, ch)
                    .max(input.at(y, x + 1, ch))
                    .max(input.at(y + 1, x, ch))
                    .max(input.at(y + 1, x + 1, ch));
                out.push(m);
            }
        }
    }
    Tensor3::new(out_h, out_w, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_is_identity() {
        let input = Tensor3::new(3, 4, 1, (0..12).map(f64::from).collect()).unwrap();
        let k = Kernels::new(1, 1, 1, 1, vec![1.0]).unwrap();
        assert_eq!(conv2d(&input, &k, 1, Padding::Valid).unwrap(), input);
    }

    #[test]
    fn ones_kernel_sums() {
        let input = Tensor3::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let k = Kernels::new(1, 2, 2, 1, vec![1.0; 4]).unwrap();
        let out = conv2d(&input, &k, 1, Padding::Valid).unwrap();
        assert_eq!(out.shape(), (1, 1, 1));
        assert_eq!(out.data(), [10.0]);
    }

    #[test]
    fn same_padding_keeps_size_at_stride_one() {
        let input = Tensor3::zeros(5, 7, 3);
        let k = Kernels::new(4, 3, 3, 3, vec![0.5; 108]).unwrap();
        assert_eq!(conv2d(&input, &k, 1, Padding::Same).unwrap().shape(), (5, 7, 4));
        assert_eq!(conv2d(&input, &k, 2, Padding::Same).unwrap().shape(), (3, 4, 4));
    }

    #[test]
    fn channel_mismatch_is_fatal() {
        let input = Tensor3::zeros(4, 4, 2);
        let k = Kernels::new(1, 3, 3, 3, vec![0.0; 27]).unwrap();
        assert!(conv2d(&input, &k, 1, Padding::Valid).is_err());
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&[-1.0, 0.0, 2.0]), [0.0, 0.0, 2.0]);
        assert_eq!(relu(&[0.5, 3.0]), [0.5, 3.0]);
    }

    #[test]
    fn maxpool_cases() {
        let t = Tensor3::new(2, 2, 1, vec![1.0, 5.0, 3.0, 2.0]).unwrap();
        assert_eq!(maxpool2d(&t).unwrap().data(), [5.0]);

        let c = Tensor3::new(5, 4, 2, vec![3.5; 40]).unwrap();
        let p = maxpool2d(&c).unwrap();
        assert_eq!(p.shape(), (2, 2, 2));
        assert!(p.data().iter().all(|&v| v == 3.5));

        assert!(maxpool2d(&Tensor3::zeros(1, 4, 1)).is_err());
    }
}
