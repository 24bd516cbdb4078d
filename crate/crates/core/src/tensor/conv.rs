//! 2-D convolution and its transpose via im2col + GEMM, NCHW layout.

use super::gemm::{gemm, Layout};
use super::{Result, TensorError, Var};

/// Output extent of a strided, zero-padded convolution.
pub fn conv_output_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    (len + 2 * pad).checked_sub(kernel).map(|d| d / stride + 1)
}

/// Output extent of a transposed convolution.
pub fn conv_transpose_output_len(
    len: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    out_pad: usize,
) -> Option<usize> {
    ((len - 1) * stride + kernel + out_pad).checked_sub(2 * pad)
}

/// Geometry of a convolution from an `(n, c, h, w)` image to `(oh, ow)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeometry {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeometry {
    fn patch_len(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn rows(&self) -> usize {
        self.n * self.oh * self.ow
    }

    /// Index into the padded-away input for kernel tap `(ky, kx)` at output `(oy, ox)`.
    #[inline]
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let iy = (oy * self.stride + ky).checked_sub(self.pad)?;
        let ix = (ox * self.stride + kx).checked_sub(self.pad)?;
        (iy < self.h && ix < self.w).then_some((iy, ix))
    }
}

/// Unfold `x` (NCHW) into a `(n*oh*ow, c*kh*kw)` patch matrix.
pub(crate) fn im2col(x: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let plen = g.patch_len();
    let mut cols = vec![0.0; g.rows() * plen];
    let plane = g.h * g.w;
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let row = ((n * g.oh + oy) * g.ow + ox) * plen;
                for c in 0..g.c {
                    let base = (n * g.c + c) * plane;
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                                cols[row + (c * g.kh + ky) * g.kw + kx] = x[base + iy * g.w + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Fold a patch matrix back onto an NCHW image, accumulating overlaps.
pub(crate) fn col2im(cols: &[f64], g: &ConvGeometry, out: &mut [f64]) {
    let plen = g.patch_len();
    let plane = g.h * g.w;
    for n in 0..g.n {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let row = ((n * g.oh + oy) * g.ow + ox) * plen;
                for c in 0..g.c {
                    let base = (n * g.c + c) * plane;
                    for ky in 0..g.kh {
                        for kx in 0..g.kw {
                            if let Some((iy, ix)) = g.source(oy, ox, ky, kx) {
                                out[base + iy * g.w + ix] += cols[row + (c * g.kh + ky) * g.kw + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// `(n, c, hw)` planes to a `(n*hw, c)` row matrix.
fn planes_to_rows(x: &[f64], n: usize, c: usize, hw: usize) -> Vec<f64> {
    let mut rows = vec![0.0; x.len()];
    for b in 0..n {
        for ch in 0..c {
            let src = &x[(b * c + ch) * hw..(b * c + ch + 1) * hw];
            for (p, v) in src.iter().enumerate() {
                rows[(b * hw + p) * c + ch] = *v;
            }
        }
    }
    rows
}

fn rows_to_planes(rows: &[f64], n: usize, c: usize, hw: usize, out: &mut [f64]) {
    for b in 0..n {
        for p in 0..hw {
            let src = &rows[(b * hw + p) * c..(b * hw + p + 1) * c];
            for (ch, v) in src.iter().enumerate() {
                out[(b * c + ch) * hw + p] += *v;
            }
        }
    }
}

fn rank4(op: &'static str, v: &Var<'_>) -> Result<[usize; 4]> {
    match v.shape().as_slice() {
        &[a, b, c, d] => Ok([a, b, c, d]),
        other => Err(TensorError::BadRank {
            op,
            expected: "a rank-4 tensor",
            got: other.to_vec(),
        }),
    }
}

fn check_bias(op: &'static str, bias: &Var<'_>, channels: usize, kernels: &Var<'_>) -> Result<()> {
    if bias.shape() != [channels] {
        return Err(TensorError::ShapeMismatch {
            op,
            left: kernels.shape(),
            right: bias.shape(),
        });
    }
    Ok(())
}

impl<'t> Var<'t> {
    /// Zero-padded strided convolution.
    ///
    /// `self` is `(N, C, H, W)`, `kernels` is `(F, C, KH, KW)` and `bias` is
    /// `(F)`. With kernel 5, stride 2 and padding 2 the output is
    /// `(N, F, ceil(H/2), ceil(W/2))`.
    pub fn conv2d(&self, kernels: &Var<'t>, bias: &Var<'t>, stride: usize, pad: usize) -> Result<Var<'t>> {
        let [n, c, h, w] = rank4("conv2d", self)?;
        let [f, kc, kh, kw] = rank4("conv2d", kernels)?;
        if kc != c {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                left: self.shape(),
                right: kernels.shape(),
            });
        }
        check_bias("conv2d", bias, f, kernels)?;
        let (Some(oh), Some(ow)) = (conv_output_len(h, kh, stride, pad), conv_output_len(w, kw, stride, pad)) else {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                left: self.shape(),
                right: kernels.shape(),
            });
        };
        let geo = ConvGeometry {
            n,
            c,
            h,
            w,
            kh,
            kw,
            stride,
            pad,
            oh,
            ow,
        };
        let cols = self.with_value(|x| im2col(x, &geo));
        let (m, k) = (geo.rows(), geo.patch_len());
        let mut rows = vec![0.0; m * f];
        kernels.with_value(|kv| {
            gemm(
                m,
                k,
                f,
                1.0,
                &cols,
                Layout::Normal,
                kv,
                Layout::Transposed,
                0.0,
                &mut rows,
            )
        });
        let mut out = vec![0.0; m * f];
        let hw = oh * ow;
        bias.with_value(|bv| {
            for b in 0..n {
                for ch in 0..f {
                    out[(b * f + ch) * hw..(b * f + ch + 1) * hw].fill(bv[ch]);
                }
            }
        });
        rows_to_planes(&rows, n, f, hw, &mut out);
        let (ix, ik, ib) = (self.id, kernels.id, bias.id);
        Ok(self.tape.push(
            vec![n, f, oh, ow],
            out,
            &[*self, *kernels, *bias],
            Box::new(move |g, nodes, sink| {
                let grows = planes_to_rows(g, n, f, hw);
                if sink.wants(ix) {
                    let mut dcols = vec![0.0; m * k];
                    gemm(
                        m,
                        f,
                        k,
                        1.0,
                        &grows,
                        Layout::Normal,
                        &nodes[ik].value,
                        Layout::Normal,
                        0.0,
                        &mut dcols,
                    );
                    col2im(&dcols, &geo, sink.slot(ix));
                }
                if sink.wants(ik) {
                    gemm(
                        f,
                        m,
                        k,
                        1.0,
                        &grows,
                        Layout::Transposed,
                        &cols,
                        Layout::Normal,
                        1.0,
                        sink.slot(ik),
                    );
                }
                if sink.wants(ib) {
                    let s = sink.slot(ib);
                    for row in grows.chunks_exact(f) {
                        s.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                }
            }),
        ))
    }

    /// Transposed convolution, the adjoint of [`Var::conv2d`] w.r.t. its input.
    ///
    /// `self` is `(N, C_in, H, W)`, `kernels` is `(C_in, C_out, KH, KW)` and
    /// `bias` is `(C_out)`. Kernel 5, stride 2, padding 2 and output padding 1
    /// give `(N, C_out, 2H, 2W)`.
    pub fn conv_transpose2d(
        &self,
        kernels: &Var<'t>,
        bias: &Var<'t>,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> Result<Var<'t>> {
        let [n, cin, h, w] = rank4("conv_transpose2d", self)?;
        let [kin, cout, kh, kw] = rank4("conv_transpose2d", kernels)?;
        if kin != cin {
            return Err(TensorError::ShapeMismatch {
                op: "conv_transpose2d",
                left: self.shape(),
                right: kernels.shape(),
            });
        }
        check_bias("conv_transpose2d", bias, cout, kernels)?;
        let dims = (
            conv_transpose_output_len(h, kh, stride, pad, out_pad),
            conv_transpose_output_len(w, kw, stride, pad, out_pad),
        );
        let (Some(oh), Some(ow)) = dims else {
            return Err(TensorError::ShapeMismatch {
                op: "conv_transpose2d",
                left: self.shape(),
                right: kernels.shape(),
            });
        };
        if conv_output_len(oh, kh, stride, pad) != Some(h) || conv_output_len(ow, kw, stride, pad) != Some(w) {
            return Err(TensorError::Contract(format!(
                "conv_transpose2d: output padding {out_pad} inconsistent with stride {stride}"
            )));
        }
        // Geometry of the forward convolution this op is the adjoint of.
        let geo = ConvGeometry {
            n,
            c: cout,
            h: oh,
            w: ow,
            kh,
            kw,
            stride,
            pad,
            oh: h,
            ow: w,
        };
        let (m, k) = (n * h * w, cout * kh * kw);
        let xrows = self.with_value(|x| planes_to_rows(x, n, cin, h * w));
        let mut cols = vec![0.0; m * k];
        kernels.with_value(|kv| {
            gemm(
                m,
                cin,
                k,
                1.0,
                &xrows,
                Layout::Normal,
                kv,
                Layout::Normal,
                0.0,
                &mut cols,
            )
        });
        let ohw = oh * ow;
        let mut out = vec![0.0; n * cout * ohw];
        bias.with_value(|bv| {
            for b in 0..n {
                for ch in 0..cout {
                    out[(b * cout + ch) * ohw..(b * cout + ch + 1) * ohw].fill(bv[ch]);
                }
            }
        });
        col2im(&cols, &geo, &mut out);
        let (ix, ik, ib) = (self.id, kernels.id, bias.id);
        Ok(self.tape.push(
            vec![n, cout, oh, ow],
            out,
            &[*self, *kernels, *bias],
            Box::new(move |g, nodes, sink| {
                let gcols = im2col(g, &geo);
                if sink.wants(ix) {
                    let mut drows = vec![0.0; m * cin];
                    gemm(
                        m,
                        k,
                        cin,
                        1.0,
                        &gcols,
                        Layout::Normal,
                        &nodes[ik].value,
                        Layout::Transposed,
                        0.0,
                        &mut drows,
                    );
                    rows_to_planes(&drows, n, cin, h * w, sink.slot(ix));
                }
                if sink.wants(ik) {
                    gemm(
                        cin,
                        m,
                        k,
                        1.0,
                        &xrows,
                        Layout::Transposed,
                        &gcols,
                        Layout::Normal,
                        1.0,
                        sink.slot(ik),
                    );
                }
                if sink.wants(ib) {
                    let s = sink.slot(ib);
                    for b in 0..n {
                        for ch in 0..cout {
                            s[ch] += g[(b * cout + ch) * ohw..(b * cout + ch + 1) * ohw].iter().sum::<f64>();
                        }
                    }
                }
            }),
        ))
    }
}
