//! Strided convolution and transposed convolution along axis 1 of
//! `[channels, length, batch]` arrays, via im2col + matmul.
//!
//! The trailing `batch` axis lets the same kernel serve both the time stream
//! (`batch == 1`) and the spectral stream, where the convolution runs along
//! frequency independently for every STFT frame.

use ndarray::{Array2, Array3, Axis, Ix2, Ix3};

use super::{Arr, Tape, Var};

/// Geometry of a strided convolution.
#[derive(Debug, Clone, Copy)]
pub struct ConvSpec {
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

impl ConvSpec {
    /// Padding so that `l_out = ceil(l / stride)` for kernel size `k`.
    pub fn same_ceil(l: usize, k: usize, stride: usize) -> Self {
        let l_out = l.div_ceil(stride);
        let l_pad = (l_out - 1) * stride + k;
        let total = l_pad - l;
        let pad_left = total / 2;
        ConvSpec { stride, pad_left, pad_right: total - pad_left }
    }

    pub fn out_len(&self, l: usize, k: usize) -> usize {
        let l_pad = l + self.pad_left + self.pad_right;
        debug_assert!(l_pad >= k && (l_pad - k) % self.stride == 0);
        (l_pad - k) / self.stride + 1
    }
}

/// Geometry of a transposed convolution; output length is `(l - 1) * stride + k`.
#[derive(Debug, Clone, Copy)]
pub struct DeconvSpec {
    pub stride: usize,
}

fn pad_axis1(x: &ndarray::ArrayView3<f64>, pad_left: usize, pad_right: usize) -> Array3<f64> {
    let (c, l, b) = x.dim();
    let mut out = Array3::zeros((c, l + pad_left + pad_right, b));
    out.slice_mut(ndarray::s![.., pad_left..pad_left + l, ..])
        .assign(x);
    out
}

fn im2col(xpad: &Array3<f64>, k: usize, stride: usize, l_out: usize) -> Array2<f64> {
    let (cin, _lpad, b) = xpad.dim();
    let mut cols = Array2::zeros((cin * k, l_out * b));
    for ci in 0..cin {
        for kk in 0..k {
            for l in 0..l_out {
                let src = xpad.slice(ndarray::s![ci, l * stride + kk, ..]);
                let mut dst = cols.slice_mut(ndarray::s![ci * k + kk, l * b..(l + 1) * b]);
                dst.assign(&src);
            }
        }
    }
    cols
}

fn col2im(
    cols: &Array2<f64>,
    cin: usize,
    l_pad: usize,
    b: usize,
    k: usize,
    stride: usize,
    l_out: usize,
) -> Array3<f64> {
    let mut out = Array3::zeros((cin, l_pad, b));
    for ci in 0..cin {
        for kk in 0..k {
            for l in 0..l_out {
                let src = cols.slice(ndarray::s![ci * k + kk, l * b..(l + 1) * b]);
                let mut dst = out.slice_mut(ndarray::s![ci, l * stride + kk, ..]);
                dst += &src;
            }
        }
    }
    out
}

impl Tape {
    /// `x: [cin, l, b]`, `w: [cout, cin, k]`, `bias: [cout]` -> `[cout, l_out, b]`.
    pub fn conv_axis1(&mut self, x: Var, w: Var, bias: Var, spec: ConvSpec) -> Var {
        let vx = self.rc_value(x);
        let vw = self.rc_value(w);
        let x3 = vx.view().into_dimensionality::<Ix3>().expect("conv input 3-D");
        let (cin, l, b) = x3.dim();
        let w3 = vw.view().into_dimensionality::<Ix3>().expect("conv weight 3-D");
        let (cout, w_cin, k) = w3.dim();
        assert_eq!(cin, w_cin, "conv channel mismatch");
        let l_out = spec.out_len(l, k);
        let l_pad = l + spec.pad_left + spec.pad_right;

        let xpad = pad_axis1(&x3, spec.pad_left, spec.pad_right);
        let cols = im2col(&xpad, k, spec.stride, l_out);
        let w2 = w3.to_shape((cout, cin * k)).unwrap().to_owned();
        let out2 = w2.dot(&cols); // [cout, l_out*b]
        let mut value = out2.into_shape_with_order((cout, l_out, b)).unwrap();
        let vb = self.rc_value(bias);
        for (co, mut lane) in value.axis_iter_mut(Axis(0)).enumerate() {
            lane += vb[[co]];
        }

        let cols = std::rc::Rc::new(cols);
        self.push(
            value.into_dyn(),
            vec![x, w, bias],
            Box::new(move |g| {
                let g3 = g.view().into_dimensionality::<Ix3>().unwrap();
                let g2 = g3.to_shape((cout, l_out * b)).unwrap().to_owned();
                let mut dbias = ndarray::Array1::<f64>::zeros(cout);
                for (co, lane) in g3.axis_iter(Axis(0)).enumerate() {
                    dbias[co] = lane.sum();
                }
                let w2 = vw
                    .view()
                    .into_dimensionality::<Ix3>()
                    .unwrap()
                    .to_shape((cout, cin * k))
                    .unwrap()
                    .to_owned();
                let dw2 = g2.dot(&cols.t()); // [cout, cin*k]
                let dw = dw2.into_shape_with_order((cout, cin, k)).unwrap();
                let dcols = w2.t().dot(&g2); // [cin*k, l_out*b]
                let dxpad = col2im(&dcols, cin, l_pad, b, k, spec.stride, l_out);
                let dx = dxpad
                    .slice(ndarray::s![.., spec.pad_left..spec.pad_left + l, ..])
                    .to_owned();
                vec![dx.into_dyn(), dw.into_dyn(), dbias.into_dyn()]
            }),
        )
    }

    /// `x: [cin, l, b]`, `w: [cin, cout, k]`, `bias: [cout]` -> `[cout, (l-1)*stride+k, b]`.
    pub fn deconv_axis1(&mut self, x: Var, w: Var, bias: Var, spec: DeconvSpec) -> Var {
        let vx = self.rc_value(x);
        let vw = self.rc_value(w);
        let x3 = vx.view().into_dimensionality::<Ix3>().expect("deconv input 3-D");
        let (cin, l, b) = x3.dim();
        let w3 = vw.view().into_dimensionality::<Ix3>().expect("deconv weight 3-D");
        let (w_cin, cout, k) = w3.dim();
        assert_eq!(cin, w_cin, "deconv channel mismatch");
        let l_out = (l - 1) * spec.stride + k;

        let x2 = x3.to_shape((cin, l * b)).unwrap().to_owned();
        let w2 = w3.to_shape((cin, cout * k)).unwrap().to_owned();
        let cols = w2.t().dot(&x2); // [cout*k, l*b]
        let out3 = col2im(&cols, cout, l_out, b, k, spec.stride, l);
        let mut value = out3;
        let vb = self.rc_value(bias);
        for (co, mut lane) in value.axis_iter_mut(Axis(0)).enumerate() {
            lane += vb[[co]];
        }

        self.push(
            value.into_dyn(),
            vec![x, w, bias],
            Box::new(move |g| {
                let g3 = g.view().into_dimensionality::<Ix3>().unwrap();
                let mut dbias = ndarray::Array1::<f64>::zeros(cout);
                for (co, lane) in g3.axis_iter(Axis(0)).enumerate() {
                    dbias[co] = lane.sum();
                }
                // Gather: the adjoint of col2im scatter is im2col with no padding.
                let gcols = im2col(&g3.to_owned(), k, spec.stride, l);
                let x2 = vx
                    .view()
                    .into_dimensionality::<Ix3>()
                    .unwrap()
                    .to_shape((cin, l * b))
                    .unwrap()
                    .to_owned();
                let w2 = vw
                    .view()
                    .into_dimensionality::<Ix3>()
                    .unwrap()
                    .to_shape((cin, cout * k))
                    .unwrap()
                    .to_owned();
                let dx2 = w2.dot(&gcols); // [cin, l*b]
                let dx = dx2.into_shape_with_order((cin, l, b)).unwrap();
                let dw2 = x2.dot(&gcols.t()); // [cin, cout*k]
                let dw = dw2.into_shape_with_order((cin, cout, k)).unwrap();
                vec![dx.into_dyn(), dw.into_dyn(), dbias.into_dyn()]
            }),
        )
    }
}

/// Plain (non-tape) convolution used by oracle tests.
#[cfg(test)]
pub fn conv_reference(
    x: &Array3<f64>,
    w: &Array3<f64>,
    bias: &[f64],
    spec: ConvSpec,
) -> Array3<f64> {
    let (cin, l, nb) = x.dim();
    let (cout, _, k) = w.dim();
    let l_out = spec.out_len(l, k);
    let mut out = Array3::zeros((cout, l_out, nb));
    for co in 0..cout {
        for lo in 0..l_out {
            for bi in 0..nb {
                let mut acc = bias[co];
                for ci in 0..cin {
                    for kk in 0..k {
                        let pos = lo * spec.stride + kk;
                        if pos >= spec.pad_left && pos - spec.pad_left < l {
                            acc += w[[co, ci, kk]] * x[[ci, pos - spec.pad_left, bi]];
                        }
                    }
                }
                out[[co, lo, bi]] = acc;
            }
        }
    }
    out
}
