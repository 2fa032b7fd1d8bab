//! Numeric kernels behind the tape operators.
//!
//! Convolutions are stride-1 with zero "same" padding (`pad = k / 2` for an
//! odd kernel side `k`) and go through im2col + GEMM.

use super::tensor::Tensor;

fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    // SAFETY: callers pass slices whose extents match (m, k, n) and the
    // given strides; c is row-major m x n and does not alias a or b.
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

/// Unfolds one `[C, H, W]` image into `[C*k*k, H*W]`.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, k: usize, col: &mut [f64]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for i in 0..h {
                    let si = i as isize + dy;
                    let dst = &mut row[i * w..(i + 1) * w];
                    if si < 0 || si >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[si as usize * w..(si as usize + 1) * w];
                    for (j, d) in dst.iter_mut().enumerate() {
                        let sj = j as isize + dx;
                        *d = if sj < 0 || sj >= w as isize { 0.0 } else { src[sj as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `[C*k*k, H*W]` back, accumulating.
fn col2im(col: &[f64], c: usize, h: usize, w: usize, k: usize, x: &mut [f64]) {
    let pad = (k / 2) as isize;
    let hw = h * w;
    for ci in 0..c {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * hw..][..hw];
                let dy = ky as isize - pad;
                let dx = kx as isize - pad;
                for i in 0..h {
                    let si = i as isize + dy;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let src = &row[i * w..(i + 1) * w];
                    let dst = &mut plane[si as usize * w..(si as usize + 1) * w];
                    for (j, s) in src.iter().enumerate() {
                        let sj = j as isize + dx;
                        if sj >= 0 && sj < w as isize {
                            dst[sj as usize] += s;
                        }
                    }
                }
            }
        }
    }
}

fn weight_dims(w: &Tensor) -> (usize, usize, usize) {
    let [cout, cin, kh, kw] = w.shape();
    assert_eq!(kh, kw, "square kernels only");
    assert!(kh % 2 == 1, "odd kernel sides only");
    (cout, cin, kh)
}

/// `y = conv(x, w)`: `[N, Cin, H, W] * [Cout, Cin, k, k] -> [N, Cout, H, W]`.
pub fn conv2d(x: &Tensor, w: &Tensor) -> Tensor {
    let [n, cin, h, wd] = x.shape();
    let (cout, wcin, k) = weight_dims(w);
    assert_eq!(cin, wcin, "conv input channels");
    let hw = h * wd;
    let kk = cin * k * k;
    let mut out = Tensor::zeros([n, cout, h, wd]);
    let mut col = if k == 1 { Vec::new() } else { vec![0.0; kk * hw] };
    for b in 0..n {
        let xb = &x.data()[b * cin * hw..(b + 1) * cin * hw];
        let ob = &mut out.data_mut()[b * cout * hw..(b + 1) * cout * hw];
        let colref: &[f64] = if k == 1 {
            xb
        } else {
            im2col(xb, cin, h, wd, k, &mut col);
            &col
        };
        gemm(cout, kk, hw, w.data(), (kk as isize, 1), colref, (hw as isize, 1), 0.0, ob);
    }
    out
}

/// Input gradient of [`conv2d`]: `[N, Cout, H, W] -> [N, Cin, H, W]`.
pub fn conv2d_transpose(g: &Tensor, w: &Tensor) -> Tensor {
    let [n, cout, h, wd] = g.shape();
    let (wcout, cin, k) = weight_dims(w);
    assert_eq!(cout, wcout, "conv-transpose channels");
    let hw = h * wd;
    let kk = cin * k * k;
    let mut out = Tensor::zeros([n, cin, h, wd]);
    let mut col = vec![0.0; kk * hw];
    for b in 0..n {
        let gb = &g.data()[b * cout * hw..(b + 1) * cout * hw];
        let ob = &mut out.data_mut()[b * cin * hw..(b + 1) * cin * hw];
        if k == 1 {
            gemm(kk, cout, hw, w.data(), (1, kk as isize), gb, (hw as isize, 1), 0.0, ob);
        } else {
            gemm(kk, cout, hw, w.data(), (1, kk as isize), gb, (hw as isize, 1), 0.0, &mut col);
            col2im(&col, cin, h, wd, k, ob);
        }
    }
    out
}

/// Weight gradient of [`conv2d`]: `<conv(x, w), g> = <w, conv2d_weight_grad(x, g)>`.
pub fn conv2d_weight_grad(x: &Tensor, g: &Tensor, k: usize) -> Tensor {
    let [n, cin, h, wd] = x.shape();
    let [gn, cout, gh, gw] = g.shape();
    assert_eq!((n, h, wd), (gn, gh, gw), "weight-grad operand shapes");
    let hw = h * wd;
    let kk = cin * k * k;
    let mut out = Tensor::zeros([cout, cin, k, k]);
    let mut col = if k == 1 { Vec::new() } else { vec![0.0; kk * hw] };
    for b in 0..n {
        let xb = &x.data()[b * cin * hw..(b + 1) * cin * hw];
        let gb = &g.data()[b * cout * hw..(b + 1) * cout * hw];
        let colref: &[f64] = if k == 1 {
            xb
        } else {
            im2col(xb, cin, h, wd, k, &mut col);
            &col
        };
        // out[cout, kk] += g_b[cout, hw] * col^T[hw, kk]
        gemm(cout, hw, kk, gb, (hw as isize, 1), colref, (1, hw as isize), 1.0, out.data_mut());
    }
    out
}

pub fn add_bias(x: &Tensor, bias: &Tensor) -> Tensor {
    let [n, c, h, w] = x.shape();
    assert_eq!(bias.shape(), [1, c, 1, 1], "bias shape");
    let hw = h * w;
    let mut out = x.clone();
    for b in 0..n {
        for ci in 0..c {
            let v = bias.data()[ci];
            out.data_mut()[(b * c + ci) * hw..][..hw].iter_mut().for_each(|t| *t += v);
        }
    }
    out
}

pub fn channel_sum(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.shape();
    let hw = h * w;
    let mut out = Tensor::zeros([1, c, 1, 1]);
    for b in 0..n {
        for ci in 0..c {
            out.data_mut()[ci] += x.data()[(b * c + ci) * hw..][..hw].iter().sum::<f64>();
        }
    }
    out
}

pub fn broadcast_channels(b: &Tensor, shape: [usize; 4]) -> Tensor {
    add_bias(&Tensor::zeros(shape), b)
}

/// `k`-th derivative of `softplus(t) = log(1 + eᵗ)`, for `k <= 4`.
pub fn softplus_derivative(t: f64, order: usize) -> f64 {
    if order == 0 {
        return t.max(0.0) + (-t.abs()).exp().ln_1p();
    }
    let s = if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    };
    let q = 1.0 - s;
    match order {
        1 => s,
        2 => s * q,
        3 => s * q * (1.0 - 2.0 * s),
        4 => s * q * (1.0 - 6.0 * s * q),
        _ => panic!("softplus derivatives above order 4 are not supported"),
    }
}

/// `[N, C, H, W] -> [N, 4C, H/2, W/2]`, channel `4c + 2dy + dx`.
pub fn pixel_unshuffle(x: &Tensor) -> Tensor {
    let [n, c, h, w] = x.shape();
    assert!(h % 2 == 0 && w % 2 == 0, "pixel unshuffle needs even sides, got {h}x{w}");
    let (h2, w2) = (h / 2, w / 2);
    let mut out = Tensor::zeros([n, 4 * c, h2, w2]);
    let od = out.data_mut();
    for b in 0..n {
        for ci in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let oc = 4 * ci + 2 * (i % 2) + (j % 2);
                    od[((b * 4 * c + oc) * h2 + i / 2) * w2 + j / 2] =
                        x.data()[((b * c + ci) * h + i) * w + j];
                }
            }
        }
    }
    out
}

/// Inverse (and adjoint) of [`pixel_unshuffle`].
pub fn pixel_shuffle(x: &Tensor) -> Tensor {
    let [n, c4, h2, w2] = x.shape();
    assert!(c4 % 4 == 0, "pixel shuffle needs a multiple of 4 channels");
    let c = c4 / 4;
    let (h, w) = (2 * h2, 2 * w2);
    let mut out = Tensor::zeros([n, c, h, w]);
    let od = out.data_mut();
    for b in 0..n {
        for ci in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let ic = 4 * ci + 2 * (i % 2) + (j % 2);
                    od[((b * c + ci) * h + i) * w + j] =
                        x.data()[((b * c4 + ic) * h2 + i / 2) * w2 + j / 2];
                }
            }
        }
    }
    out
}

pub fn concat_channels(a: &Tensor, b: &Tensor) -> Tensor {
    let [n, ca, h, w] = a.shape();
    let [nb, cb, hb, wb] = b.shape();
    assert_eq!((n, h, w), (nb, hb, wb), "concat operand shapes");
    let hw = h * w;
    let mut data = Vec::with_capacity(n * (ca + cb) * hw);
    for bi in 0..n {
        data.extend_from_slice(&a.data()[bi * ca * hw..(bi + 1) * ca * hw]);
        data.extend_from_slice(&b.data()[bi * cb * hw..(bi + 1) * cb * hw]);
    }
    Tensor::new([n, ca + cb, h, w], data)
}

pub fn slice_channels(x: &Tensor, start: usize, len: usize) -> Tensor {
    let [n, c, h, w] = x.shape();
    assert!(start + len <= c, "channel slice out of range");
    let hw = h * w;
    let mut data = Vec::with_capacity(n * len * hw);
    for b in 0..n {
        data.extend_from_slice(&x.data()[(b * c + start) * hw..(b * c + start + len) * hw]);
    }
    Tensor::new([n, len, h, w], data)
}

/// Places `x` at channel offset `start` of a zero tensor with `total` channels.
pub fn embed_channels(x: &Tensor, start: usize, total: usize) -> Tensor {
    let [n, c, h, w] = x.shape();
    assert!(start + c <= total, "channel embedding out of range");
    let hw = h * w;
    let mut out = Tensor::zeros([n, total, h, w]);
    for b in 0..n {
        out.data_mut()[(b * total + start) * hw..(b * total + start + c) * hw]
            .copy_from_slice(&x.data()[b * c * hw..(b + 1) * c * hw]);
    }
    out
}
