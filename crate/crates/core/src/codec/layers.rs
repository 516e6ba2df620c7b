//! Stride-1 convolution and transposed convolution on `[C][H][W]` buffers.
//!
//! Both layers are expressed through the same im2col/col2im pair: a
//! transposed convolution's forward pass is a convolution's data-gradient
//! and vice versa, so one geometry description serves both.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    TransposedConv,
}

/// One layer of the stack. `padding` is zero padding for a convolution and
/// the symmetric output crop for a transposed convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: [usize; 2],
    pub padding: usize,
}

impl LayerSpec {
    pub const fn conv(cin: usize, cout: usize, kh: usize, kw: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            in_channels: cin,
            out_channels: cout,
            kernel: [kh, kw],
            padding: 0,
        }
    }

    pub const fn tconv(cin: usize, cout: usize, kh: usize, kw: usize, crop: usize) -> Self {
        Self {
            kind: LayerKind::TransposedConv,
            in_channels: cin,
            out_channels: cout,
            kernel: [kh, kw],
            padding: crop,
        }
    }

    pub fn weight_len(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel[0] * self.kernel[1]
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_channels
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel[0] * self.kernel[1]
    }

    pub fn fan_out(&self) -> usize {
        self.out_channels * self.kernel[0] * self.kernel[1]
    }

    /// Spatial output size for an `h x w` input, if defined.
    pub fn out_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let [kh, kw] = self.kernel;
        let p = self.padding;
        match self.kind {
            LayerKind::Conv => {
                let oh = (h + 2 * p).checked_sub(kh)? + 1;
                let ow = (w + 2 * p).checked_sub(kw)? + 1;
                Some((oh, ow))
            }
            LayerKind::TransposedConv => {
                let oh = (h + kh - 1).checked_sub(2 * p)?;
                let ow = (w + kw - 1).checked_sub(2 * p)?;
                (oh > 0 && ow > 0).then_some((oh, ow))
            }
        }
    }
}

/// Geometry of a stride-1 sliding window: a `[c][h][w]` "wide" grid read
/// through a `kh x kw` kernel with zero padding `pad` into an `oh x ow`
/// "narrow" grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl Window {
    pub fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    pub fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Gathers the wide grid into a `rows x cols` patch matrix.
    pub fn im2col(&self, src: &[f64], dst: &mut [f64]) {
        let n = self.cols();
        let pad = self.pad as isize;
        for ci in 0..self.c {
            let plane = &src[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for u in 0..self.kh {
                for v in 0..self.kw {
                    let row = (ci * self.kh + u) * self.kw + v;
                    let out = &mut dst[row * n..(row + 1) * n];
                    for i in 0..self.oh {
                        let si = i as isize + u as isize - pad;
                        let line = &mut out[i * self.ow..(i + 1) * self.ow];
                        if si < 0 || si >= self.h as isize {
                            line.iter_mut().for_each(|x| *x = 0.0);
                            continue;
                        }
                        let srow = &plane[si as usize * self.w..(si as usize + 1) * self.w];
                        for (j, x) in line.iter_mut().enumerate() {
                            let sj = j as isize + v as isize - pad;
                            *x = if sj < 0 || sj >= self.w as isize {
                                0.0
                            } else {
                                srow[sj as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Window::im2col`]: scatters and accumulates into `dst`.
    pub fn col2im(&self, src: &[f64], dst: &mut [f64]) {
        let n = self.cols();
        let pad = self.pad as isize;
        for ci in 0..self.c {
            let plane = &mut dst[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for u in 0..self.kh {
                for v in 0..self.kw {
                    let row = (ci * self.kh + u) * self.kw + v;
                    let cols = &src[row * n..(row + 1) * n];
                    for i in 0..self.oh {
                        let si = i as isize + u as isize - pad;
                        if si < 0 || si >= self.h as isize {
                            continue;
                        }
                        let drow = &mut plane[si as usize * self.w..(si as usize + 1) * self.w];
                        for j in 0..self.ow {
                            let sj = j as isize + v as isize - pad;
                            if sj >= 0 && sj < self.w as isize {
                                drow[sj as usize] += cols[i * self.ow + j];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` on row-major buffers, where
/// `op(a)` is `m x k` and `op(b)` is `k x n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool, beta: f64, c: &mut [f64]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the length asserts above bound every index the kernel touches
    // for these strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Forward state of one layer for one sample, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    /// Patch matrix (convolution only).
    pub cols: Vec<f64>,
    /// Post-activation output, `[cout][oh][ow]`.
    pub out: Vec<f64>,
}

pub(crate) struct Geometry {
    pub spec: LayerSpec,
    pub in_hw: (usize, usize),
    pub out_hw: (usize, usize),
}

impl Geometry {
    fn window(&self) -> Window {
        let s = &self.spec;
        match s.kind {
            LayerKind::Conv => Window {
                c: s.in_channels,
                h: self.in_hw.0,
                w: self.in_hw.1,
                kh: s.kernel[0],
                kw: s.kernel[1],
                pad: s.padding,
                oh: self.out_hw.0,
                ow: self.out_hw.1,
            },
            LayerKind::TransposedConv => Window {
                c: s.out_channels,
                h: self.out_hw.0,
                w: self.out_hw.1,
                kh: s.kernel[0],
                kw: s.kernel[1],
                pad: s.padding,
                oh: self.in_hw.0,
                ow: self.in_hw.1,
            },
        }
    }

    /// `tanh(layer(x))` for one sample.
    pub fn forward(&self, params: &[f64], x: &[f64]) -> LayerCache {
        let s = &self.spec;
        let (weights, bias) = params.split_at(s.weight_len());
        let win = self.window();
        let n_out = self.out_hw.0 * self.out_hw.1;
        let mut out = vec![0.0; s.out_channels * n_out];
        let cols = match s.kind {
            LayerKind::Conv => {
                let mut cols = vec![0.0; win.rows() * win.cols()];
                win.im2col(x, &mut cols);
                gemm(
                    s.out_channels,
                    win.rows(),
                    win.cols(),
                    weights,
                    false,
                    &cols,
                    false,
                    0.0,
                    &mut out,
                );
                cols
            }
            LayerKind::TransposedConv => {
                let n_in = self.in_hw.0 * self.in_hw.1;
                let mut cols = vec![0.0; win.rows() * n_in];
                gemm(win.rows(), s.in_channels, n_in, weights, true, x, false, 0.0, &mut cols);
                win.col2im(&cols, &mut out);
                Vec::new()
            }
        };
        for (co, chunk) in out.chunks_mut(n_out).enumerate() {
            for v in chunk {
                *v = (*v + bias[co]).tanh();
            }
        }
        LayerCache { cols, out }
    }

    /// Backpropagates `d_out` (gradient w.r.t. the post-activation output).
    /// Accumulates into `grad` and returns the gradient w.r.t. the input
    /// when `want_input` is set.
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        cache: &LayerCache,
        d_out: &[f64],
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let s = &self.spec;
        let (weights, _) = params.split_at(s.weight_len());
        let (gw, gb) = grad.split_at_mut(s.weight_len());
        let win = self.window();
        let n_out = self.out_hw.0 * self.out_hw.1;
        let dz: Vec<f64> = d_out.iter().zip(&cache.out).map(|(g, a)| g * (1.0 - a * a)).collect();
        for (co, chunk) in dz.chunks(n_out).enumerate() {
            gb[co] += chunk.iter().sum::<f64>();
        }
        match s.kind {
            LayerKind::Conv => {
                gemm(
                    s.out_channels,
                    win.cols(),
                    win.rows(),
                    &dz,
                    false,
                    &cache.cols,
                    true,
                    1.0,
                    gw,
                );
                want_input.then(|| {
                    let mut dcols = vec![0.0; win.rows() * win.cols()];
                    gemm(
                        win.rows(),
                        s.out_channels,
                        win.cols(),
                        weights,
                        true,
                        &dz,
                        false,
                        0.0,
                        &mut dcols,
                    );
                    let mut dx = vec![0.0; x.len()];
                    win.col2im(&dcols, &mut dx);
                    dx
                })
            }
            LayerKind::TransposedConv => {
                let n_in = self.in_hw.0 * self.in_hw.1;
                let mut dcols = vec![0.0; win.rows() * n_in];
                win.im2col(&dz, &mut dcols);
                gemm(s.in_channels, n_in, win.rows(), x, false, &dcols, true, 1.0, gw);
                want_input.then(|| {
                    let mut dx = vec![0.0; s.in_channels * n_in];
                    gemm(
                        s.in_channels,
                        win.rows(),
                        n_in,
                        weights,
                        false,
                        &dcols,
                        false,
                        0.0,
                        &mut dx,
                    );
                    dx
                })
            }
        }
    }
}
