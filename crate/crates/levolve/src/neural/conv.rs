//! im2col-based convolution primitives shared by the conv and
//! transposed-conv layers. Weight matrices arrive pre-flattened as
//! (out_channels, in_channels*k*k).

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Array4};

use super::Tensor4;

/// Output spatial extent of a strided convolution.
pub fn out_dim(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - k) / stride + 1
}

fn matmul(a: ndarray::ArrayView2<'_, f64>, b: ndarray::ArrayView2<'_, f64>) -> Array2<f64> {
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    general_mat_mul(1.0, &a, &b, 0.0, &mut c);
    c
}

/// Unfold x into (ci*k*k, b*oh*ow); out-of-bounds taps read as zero.
fn im2col(x: &Tensor4, k: usize, stride: usize, pad: usize) -> Array2<f64> {
    let (b, ci, h, w) = x.dim();
    let oh = out_dim(h, k, stride, pad);
    let ow = out_dim(w, k, stride, pad);
    let rows = ci * k * k;
    let cols = b * oh * ow;
    let mut col = vec![0.0f64; rows * cols];
    let xs = x.as_slice().expect("contiguous input");
    for bi in 0..b {
        for c in 0..ci {
            let x_base = (bi * ci + c) * h * w;
            for kh in 0..k {
                for kw in 0..k {
                    let row = (c * k + kh) * k + kw;
                    for ohi in 0..oh {
                        let ih = (ohi * stride + kh) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let dst = row * cols + (bi * oh + ohi) * ow;
                        let src = x_base + ih as usize * w;
                        for owi in 0..ow {
                            let iw = (owi * stride + kw) as isize - pad as isize;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            col[dst + owi] = xs[src + iw as usize];
                        }
                    }
                }
            }
        }
    }
    Array2::from_shape_vec((rows, cols), col).expect("sized above")
}

/// Fold (ci*k*k, b*oh*ow) columns back to (b, ci, h, w), summing overlaps.
fn col2im(
    gcol: &Array2<f64>,
    b: usize,
    ci: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Tensor4 {
    let oh = out_dim(h, k, stride, pad);
    let ow = out_dim(w, k, stride, pad);
    let cols = b * oh * ow;
    let gs = gcol.as_slice().expect("contiguous columns");
    let mut gx = vec![0.0f64; b * ci * h * w];
    for bi in 0..b {
        for c in 0..ci {
            let x_base = (bi * ci + c) * h * w;
            for kh in 0..k {
                for kw in 0..k {
                    let row = (c * k + kh) * k + kw;
                    for ohi in 0..oh {
                        let ih = (ohi * stride + kh) as isize - pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let src = row * cols + (bi * oh + ohi) * ow;
                        let dst = x_base + ih as usize * w;
                        for owi in 0..ow {
                            let iw = (owi * stride + kw) as isize - pad as isize;
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            gx[dst + iw as usize] += gs[src + owi];
                        }
                    }
                }
            }
        }
    }
    Array4::from_shape_vec((b, ci, h, w), gx).expect("sized above")
}

/// (b, c, oh, ow) tensor viewed as the (c, b*oh*ow) GEMM layout.
fn tensor_to_cols(y: &Tensor4) -> Array2<f64> {
    let (b, c, oh, ow) = y.dim();
    let hw = oh * ow;
    let ys = y.as_slice().expect("contiguous tensor");
    let mut out = vec![0.0f64; b * c * hw];
    for bi in 0..b {
        for ci in 0..c {
            let src = (bi * c + ci) * hw;
            let dst = ci * (b * hw) + bi * hw;
            out[dst..dst + hw].copy_from_slice(&ys[src..src + hw]);
        }
    }
    Array2::from_shape_vec((c, b * hw), out).expect("sized above")
}

fn cols_to_tensor(y2: &Array2<f64>, b: usize, c: usize, oh: usize, ow: usize) -> Tensor4 {
    let hw = oh * ow;
    let ys = y2.as_slice().expect("contiguous columns");
    let mut out = vec![0.0f64; b * c * hw];
    for bi in 0..b {
        for ci in 0..c {
            let src = ci * (b * hw) + bi * hw;
            let dst = (bi * c + ci) * hw;
            out[dst..dst + hw].copy_from_slice(&ys[src..src + hw]);
        }
    }
    Array4::from_shape_vec((b, c, oh, ow), out).expect("sized above")
}

/// Cross-correlation forward pass. `w2` is (co, ci*k*k).
pub fn conv_fwd(x: &Tensor4, w2: &Array2<f64>, k: usize, stride: usize, pad: usize) -> Tensor4 {
    let (b, _, h, w) = x.dim();
    let (oh, ow) = (out_dim(h, k, stride, pad), out_dim(w, k, stride, pad));
    let col = im2col(x, k, stride, pad);
    let y2 = matmul(w2.view(), col.view());
    cols_to_tensor(&y2, b, w2.nrows(), oh, ow)
}

/// Gradient w.r.t. the convolution input: scatter w2^T * gy back to x-space.
pub fn conv_bwd_data(
    gy: &Tensor4,
    w2: &Array2<f64>,
    k: usize,
    stride: usize,
    pad: usize,
    in_hw: (usize, usize),
) -> Tensor4 {
    let (b, _, _, _) = gy.dim();
    let ci = w2.ncols() / (k * k);
    let gy2 = tensor_to_cols(gy);
    let gcol = matmul(w2.t(), gy2.view());
    col2im(&gcol, b, ci, in_hw.0, in_hw.1, k, stride, pad)
}

/// Gradient w.r.t. the flattened weight matrix, summed over the batch.
pub fn conv_bwd_weight(
    x: &Tensor4,
    gy: &Tensor4,
    k: usize,
    stride: usize,
    pad: usize,
) -> Array2<f64> {
    let col = im2col(x, k, stride, pad);
    let gy2 = tensor_to_cols(gy);
    matmul(gy2.view(), col.t())
}
