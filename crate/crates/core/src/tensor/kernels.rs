// Inner loops shared by matmul and the im2col convolutions. All matrices are
// row-major slices; every gemm accumulates into `c`.

use super::{Result, TensorError};

/// c[m,n] += a[m,k] · b[k,n]
pub(crate) fn gemm_nn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// c[m,n] += a[k,m]ᵀ · b[k,n]
pub(crate) fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for p in 0..k {
        let b_row = &b[p * n..(p + 1) * n];
        for i in 0..m {
            let av = a[p * m + i];
            if av == 0.0 {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

/// c[m,n] += a[m,k] · b[n,k]ᵀ
pub(crate) fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    let bt = transpose(n, k, b);
    gemm_nn(m, k, n, a, &bt, c);
}

/// Transpose of a row-major [rows, cols] matrix.
pub(crate) fn transpose(rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

/// Output extent of a strided, padded cross-correlation.
pub fn conv_out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    if stride == 0 {
        return Err(TensorError::arg("conv2d", "stride must be at least 1"));
    }
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(TensorError::dim(
            "conv2d",
            format!("kernel extent {kernel} exceeds padded input extent {padded}"),
        ));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Output extent of a transposed convolution: (in − 1)·s − 2p + k.
pub fn conv_transpose_out_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<usize> {
    if stride == 0 {
        return Err(TensorError::arg("conv_transpose2d", "stride must be at least 1"));
    }
    let out = (input as i64 - 1) * stride as i64 - 2 * pad as i64 + kernel as i64;
    if input == 0 || out <= 0 {
        return Err(TensorError::dim(
            "conv_transpose2d",
            format!(
                "input extent {input}, kernel {kernel}, stride {stride}, pad {pad} give output extent {out}"
            ),
        ));
    }
    Ok(out as usize)
}

/// Window geometry of one image plane under a k×k-style kernel.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Geometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Geometry {
    pub fn col_rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn col_cols(&self) -> usize {
        self.out_h * self.out_w
    }

    fn source(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

/// Unfolds one [C,H,W] image into a [C·kh·kw, out_h·out_w] column matrix.
pub(crate) fn im2col(g: &Geometry, x: &[f64], cols: &mut [f64]) {
    let ncols = g.col_cols();
    for c in 0..g.channels {
        let plane = &x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for oy in 0..g.out_h {
                    let sy = g.source(oy, i, g.height);
                    for ox in 0..g.out_w {
                        dst[oy * g.out_w + ox] = match (sy, g.source(ox, j, g.width)) {
                            (Some(y), Some(xx)) => plane[y * g.width + xx],
                            _ => 0.0,
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds a column matrix back into a [C,H,W] image.
pub(crate) fn col2im(g: &Geometry, cols: &[f64], x: &mut [f64]) {
    let ncols = g.col_cols();
    for c in 0..g.channels {
        let plane = &mut x[c * g.height * g.width..(c + 1) * g.height * g.width];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = (c * g.kh + i) * g.kw + j;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for oy in 0..g.out_h {
                    let Some(y) = g.source(oy, i, g.height) else { continue };
                    for ox in 0..g.out_w {
                        if let Some(xx) = g.source(ox, j, g.width) {
                            plane[y * g.width + xx] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}
