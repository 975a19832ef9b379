//! Elementwise, reduction, shape and linear-algebra operations on the tape.

use ndarray::{ArrayD, Axis, Dimension, Ix1, Ix2, IxDyn, Slice};

use super::{Arr, Tape, Var};

fn unop(t: &mut Tape, a: Var, value: Arr, back: impl Fn(&Arr) -> Arr + 'static) -> Var {
    t.push(value, vec![a], Box::new(move |g| vec![back(g)]))
}

impl Tape {
    // ---- elementwise ----

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = &*self.rc_value(a) + &*self.rc_value(b);
        self.push(value, vec![a, b], Box::new(|g| vec![g.clone(), g.clone()]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = &*self.rc_value(a) - &*self.rc_value(b);
        self.push(value, vec![a, b], Box::new(|g| vec![g.clone(), -g]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let va = self.rc_value(a);
        let vb = self.rc_value(b);
        let value = &*va * &*vb;
        self.push(
            value,
            vec![a, b],
            Box::new(move |g| vec![g * &*vb, g * &*va]),
        )
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = &*self.rc_value(a) * c;
        unop(self, a, value, move |g| g * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = &*self.rc_value(a) + c;
        unop(self, a, value, |g| g.clone())
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let va = self.rc_value(a);
        let value = va.mapv(f64::abs);
        unop(self, a, value, move |g| g * &va.mapv(f64::signum))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.rc_value(a);
        let value = va.mapv(|x| x.max(0.0));
        unop(self, a, value, move |g| {
            g * &va.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 })
        })
    }

    /// GELU, tanh approximation; the gradient differentiates the approximation
    /// itself so finite-difference checks agree.
    pub fn gelu(&mut self, a: Var) -> Var {
        const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
        const A: f64 = 0.044715;
        let va = self.rc_value(a);
        let value = va.mapv(|x| 0.5 * x * (1.0 + (C * (x + A * x * x * x)).tanh()));
        unop(self, a, value, move |g| {
            g * &va.mapv(|x| {
                let u = C * (x + A * x * x * x);
                let th = u.tanh();
                0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * C * (1.0 + 3.0 * A * x * x)
            })
        })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.rc_value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let y = std::rc::Rc::new(value.clone());
        self.push(
            value,
            vec![a],
            Box::new(move |g| vec![g * &y.mapv(|v| v * (1.0 - v))]),
        )
    }

    pub fn tanh_op(&mut self, a: Var) -> Var {
        let value = self.rc_value(a).mapv(f64::tanh);
        let y = std::rc::Rc::new(value.clone());
        self.push(
            value,
            vec![a],
            Box::new(move |g| vec![g * &y.mapv(|v| 1.0 - v * v)]),
        )
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let va = self.rc_value(a);
        let value = va.mapv(f64::ln);
        unop(self, a, value, move |g| g / &*va)
    }

    /// Gradient is 1 inside [lo, hi], 0 outside.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let va = self.rc_value(a);
        let value = va.mapv(|x| x.clamp(lo, hi));
        unop(self, a, value, move |g| {
            g * &va.mapv(|x| if x >= lo && x <= hi { 1.0 } else { 0.0 })
        })
    }

    // ---- reductions ----

    pub fn sum_all(&mut self, a: Var) -> Var {
        let va = self.rc_value(a);
        let value = Arr::from_elem(IxDyn(&[]), va.sum());
        let dim = va.raw_dim();
        unop(self, a, value, move |g| {
            Arr::from_elem(dim.clone(), *g.iter().next().unwrap())
        })
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Var {
        let va = self.rc_value(a);
        let value = va.sum_axis(Axis(axis));
        let dim = va.raw_dim();
        unop(self, a, value, move |g| {
            let mut out = Arr::zeros(dim.clone());
            for mut lane in out.axis_iter_mut(Axis(axis)) {
                lane += g;
            }
            out
        })
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Var {
        let n = self.value(a).shape()[axis] as f64;
        let s = self.sum_axis(a, axis);
        self.scale(s, 1.0 / n)
    }

    // ---- shape ----

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Var {
        let va = self.rc_value(a);
        let dim = va.raw_dim();
        let value = va
            .to_shape(IxDyn(shape))
            .expect("reshape size mismatch")
            .to_owned();
        unop(self, a, value, move |g| {
            g.to_shape(dim.clone()).expect("reshape back").to_owned()
        })
    }

    pub fn transpose2(&mut self, a: Var) -> Var {
        let va = self.rc_value(a);
        debug_assert_eq!(va.ndim(), 2);
        let value = va.t().to_owned();
        unop(self, a, value, |g| g.t().to_owned())
    }

    pub fn slice_axis_op(&mut self, a: Var, axis: usize, start: usize, end: usize) -> Var {
        let va = self.rc_value(a);
        let value = va
            .slice_axis(Axis(axis), Slice::from(start..end))
            .to_owned();
        let dim = va.raw_dim();
        unop(self, a, value, move |g| {
            let mut out = Arr::zeros(dim.clone());
            out.slice_axis_mut(Axis(axis), Slice::from(start..end))
                .assign(g);
            out
        })
    }

    pub fn concat(&mut self, axis: usize, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let views: Vec<_> = parts.iter().map(|p| self.rc_value(*p)).collect();
        let value = ndarray::concatenate(
            Axis(axis),
            &views.iter().map(|v| v.view()).collect::<Vec<_>>(),
        )
        .expect("concat shape mismatch");
        let sizes: Vec<usize> = views.iter().map(|v| v.shape()[axis]).collect();
        self.push(
            value,
            parts.to_vec(),
            Box::new(move |g| {
                let mut out = Vec::with_capacity(sizes.len());
                let mut offset = 0;
                for &s in &sizes {
                    out.push(
                        g.slice_axis(Axis(axis), Slice::from(offset..offset + s))
                            .to_owned(),
                    );
                    offset += s;
                }
                out
            }),
        )
    }

    // ---- broadcasting helpers ----

    /// `x[r, c] * v[c]` for 2-D `x`.
    pub fn mul_rowvec(&mut self, x: Var, v: Var) -> Var {
        let vx = self.rc_value(x);
        let vv = self.rc_value(v);
        debug_assert_eq!(vx.ndim(), 2);
        debug_assert_eq!(vv.ndim(), 1);
        let value = &*vx * &vv.view().insert_axis(Axis(0));
        self.push(
            value,
            vec![x, v],
            Box::new(move |g| {
                let gx = g * &vv.view().insert_axis(Axis(0));
                let gv = (g * &*vx).sum_axis(Axis(0));
                vec![gx, gv.into_dyn()]
            }),
        )
    }

    /// `x[r, c] + v[c]` for 2-D `x`.
    pub fn add_rowvec(&mut self, x: Var, v: Var) -> Var {
        let vx = self.rc_value(x);
        let vv = self.rc_value(v);
        debug_assert_eq!(vx.ndim(), 2);
        debug_assert_eq!(vv.ndim(), 1);
        let value = &*vx + &vv.view().insert_axis(Axis(0));
        self.push(
            value,
            vec![x, v],
            Box::new(move |g| vec![g.clone(), g.sum_axis(Axis(0)).into_dyn()]),
        )
    }

    /// `x + v` broadcast over axis 0: `v[c]` added to every element of `x[c, ...]`.
    pub fn add_colvec(&mut self, x: Var, v: Var) -> Var {
        let vx = self.rc_value(x);
        let vv = self.rc_value(v);
        debug_assert_eq!(vv.ndim(), 1);
        let mut value = (*vx).clone();
        for (c, mut lane) in value.axis_iter_mut(Axis(0)).enumerate() {
            lane += vv[[c]];
        }
        self.push(
            value,
            vec![x, v],
            Box::new(move |g| {
                let mut gv = ndarray::Array1::<f64>::zeros(g.shape()[0]);
                for (c, lane) in g.axis_iter(Axis(0)).enumerate() {
                    gv[c] = lane.sum();
                }
                vec![g.clone(), gv.into_dyn()]
            }),
        )
    }

    // ---- linear algebra ----

    /// 2-D matrix product `[m, k] x [k, n] -> [m, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let va = self.rc_value(a);
        let vb = self.rc_value(b);
        let a2 = va.view().into_dimensionality::<Ix2>().expect("matmul lhs 2-D");
        let b2 = vb.view().into_dimensionality::<Ix2>().expect("matmul rhs 2-D");
        let value = a2.dot(&b2).into_dyn();
        self.push(
            value,
            vec![a, b],
            Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let a2 = va.view().into_dimensionality::<Ix2>().unwrap();
                let b2 = vb.view().into_dimensionality::<Ix2>().unwrap();
                vec![g2.dot(&b2.t()).into_dyn(), a2.t().dot(&g2).into_dyn()]
            }),
        )
    }

    /// Row-wise softmax over the last axis of a 2-D array.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let va = self.rc_value(a);
        let a2 = va.view().into_dimensionality::<Ix2>().expect("softmax 2-D");
        let mut value = a2.to_owned();
        for mut row in value.rows_mut() {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - m).exp());
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        let y = std::rc::Rc::new(value.clone());
        self.push(
            value.into_dyn(),
            vec![a],
            Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let mut out = (*y).clone();
                for (mut orow, (grow, yrow)) in out
                    .rows_mut()
                    .into_iter()
                    .zip(g2.rows().into_iter().zip(y.rows()))
                {
                    let dot: f64 = grow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                    for (o, (gv, yv)) in orow.iter_mut().zip(grow.iter().zip(yrow.iter())) {
                        *o = yv * (gv - dot);
                    }
                }
                vec![out.into_dyn()]
            }),
        )
    }

    /// Layer normalization over the last axis of 2-D `x`, with per-feature
    /// scale and shift.
    pub fn layernorm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let vx = self.rc_value(x);
        let vg = self.rc_value(gamma);
        let vb = self.rc_value(beta);
        let x2 = vx.view().into_dimensionality::<Ix2>().expect("layernorm 2-D");
        let (rows, d) = x2.dim();
        let mut xhat = x2.to_owned();
        let mut invstd = ndarray::Array1::<f64>::zeros(rows);
        for (r, mut row) in xhat.rows_mut().into_iter().enumerate() {
            let mean = row.sum() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            invstd[r] = is;
            row.mapv_inplace(|v| (v - mean) * is);
        }
        let g1 = vg.view().into_dimensionality::<Ix1>().unwrap().to_owned();
        let b1 = vb.view().into_dimensionality::<Ix1>().unwrap().to_owned();
        let value = (&xhat * &g1.view().insert_axis(Axis(0)))
            + &b1.view().insert_axis(Axis(0));
        let xhat = std::rc::Rc::new(xhat);
        self.push(
            value.into_dyn(),
            vec![x, gamma, beta],
            Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let dgamma = (&g2.to_owned() * &*xhat).sum_axis(Axis(0));
                let dbeta = g2.sum_axis(Axis(0));
                let mut dx = ndarray::Array2::<f64>::zeros((rows, d));
                for r in 0..rows {
                    let grow = g2.row(r);
                    let xrow = xhat.row(r);
                    // dxhat = g * gamma
                    let dxhat: Vec<f64> =
                        grow.iter().zip(g1.iter()).map(|(gv, gm)| gv * gm).collect();
                    let mean_dxhat: f64 = dxhat.iter().sum::<f64>() / d as f64;
                    let mean_dxhat_xhat: f64 = dxhat
                        .iter()
                        .zip(xrow.iter())
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        / d as f64;
                    for c in 0..d {
                        dx[[r, c]] = invstd[r]
                            * (dxhat[c] - mean_dxhat - xrow[c] * mean_dxhat_xhat);
                    }
                }
                vec![dx.into_dyn(), dgamma.into_dyn(), dbeta.into_dyn()]
            }),
        )
    }

    /// Batch normalization over axis 0 of 2-D `x` using batch statistics.
    /// Requires at least 2 rows. Evaluation mode with running statistics is
    /// composed from broadcast ops at the layer level instead.
    pub fn batchnorm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Var {
        let vx = self.rc_value(x);
        let vg = self.rc_value(gamma);
        let x2 = vx.view().into_dimensionality::<Ix2>().expect("batchnorm 2-D");
        let (b, d) = x2.dim();
        assert!(b >= 2, "batchnorm_train requires batch >= 2, got {b}");
        let mean = x2.mean_axis(Axis(0)).unwrap();
        let mut var = ndarray::Array1::<f64>::zeros(d);
        for c in 0..d {
            let col = x2.column(c);
            var[c] = col.iter().map(|v| (v - mean[c]) * (v - mean[c])).sum::<f64>() / b as f64;
        }
        let invstd = var.mapv(|v| 1.0 / (v + eps).sqrt());
        let mut xhat = x2.to_owned();
        for mut row in xhat.rows_mut() {
            for c in 0..d {
                row[c] = (row[c] - mean[c]) * invstd[c];
            }
        }
        let g1 = vg.view().into_dimensionality::<Ix1>().unwrap().to_owned();
        let b1 = self
            .rc_value(beta)
            .view()
            .into_dimensionality::<Ix1>()
            .unwrap()
            .to_owned();
        let value = (&xhat * &g1.view().insert_axis(Axis(0)))
            + &b1.view().insert_axis(Axis(0));
        let xhat = std::rc::Rc::new(xhat);
        self.push(
            value.into_dyn(),
            vec![x, gamma, beta],
            Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let dgamma = (&g2.to_owned() * &*xhat).sum_axis(Axis(0));
                let dbeta = g2.sum_axis(Axis(0));
                let mut dx = ndarray::Array2::<f64>::zeros((b, d));
                for c in 0..d {
                    let gcol: Vec<f64> = g2.column(c).iter().map(|v| v * g1[c]).collect();
                    let xcol = xhat.column(c);
                    let mean_g: f64 = gcol.iter().sum::<f64>() / b as f64;
                    let mean_gx: f64 =
                        gcol.iter().zip(xcol.iter()).map(|(a, x)| a * x).sum::<f64>() / b as f64;
                    for r in 0..b {
                        dx[[r, c]] = invstd[c] * (gcol[r] - mean_g - xcol[r] * mean_gx);
                    }
                }
                vec![dx.into_dyn(), dgamma.into_dyn(), dbeta.into_dyn()]
            }),
        )
    }

    /// Adaptive average pooling along the last axis of 2-D `x` to `l_out` bins.
    pub fn avg_pool_to(&mut self, x: Var, l_out: usize) -> Var {
        let vx = self.rc_value(x);
        let x2 = vx.view().into_dimensionality::<Ix2>().expect("pool 2-D");
        let (c, t) = x2.dim();
        assert!(t >= l_out, "cannot pool {t} frames to {l_out}");
        let bounds: Vec<(usize, usize)> = (0..l_out)
            .map(|s| (s * t / l_out, (s + 1) * t / l_out))
            .collect();
        let mut value = ndarray::Array2::<f64>::zeros((c, l_out));
        for ch in 0..c {
            for (s, &(lo, hi)) in bounds.iter().enumerate() {
                value[[ch, s]] =
                    x2.row(ch).slice(ndarray::s![lo..hi]).sum() / (hi - lo) as f64;
            }
        }
        let dim = vx.raw_dim();
        self.push(
            value.into_dyn(),
            vec![x],
            Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                let mut dx = ArrayD::<f64>::zeros(dim.clone());
                let mut dx2 = dx.view_mut().into_dimensionality::<Ix2>().unwrap();
                for ch in 0..g2.nrows() {
                    for (s, &(lo, hi)) in bounds.iter().enumerate() {
                        let share = g2[[ch, s]] / (hi - lo) as f64;
                        for i in lo..hi {
                            dx2[[ch, i]] += share;
                        }
                    }
                }
                vec![dx]
            }),
        )
    }

    /// Magnitude of a `[..., 2, f, t]` real/imag spectrogram (plane axis 1),
    /// producing `[..., f, t]`.
    pub fn complex_mag(&mut self, spec: Var) -> Var {
        let vs = self.rc_value(spec);
        let shape = vs.shape().to_vec();
        assert!(shape.len() >= 3 && shape[1] == 2, "expected [c, 2, f, t]");
        let re = vs.index_axis(Axis(1), 0).to_owned();
        let im = vs.index_axis(Axis(1), 1).to_owned();
        let value = ndarray::Zip::from(&re)
            .and(&im)
            .map_collect(|r, i| (r * r + i * i).sqrt());
        let mag = std::rc::Rc::new(value.clone());
        self.push(
            value,
            vec![spec],
            Box::new(move |g| {
                let mut dx = ArrayD::<f64>::zeros(vs.raw_dim());
                {
                    let mut dre = dx.index_axis_mut(Axis(1), 0);
                    ndarray::Zip::from(&mut dre)
                        .and(g)
                        .and(&re)
                        .and(&*mag)
                        .for_each(|d, gv, r, m| *d = gv * r / m.max(1e-15));
                }
                {
                    let mut dim_ = dx.index_axis_mut(Axis(1), 1);
                    ndarray::Zip::from(&mut dim_)
                        .and(g)
                        .and(&im)
                        .and(&*mag)
                        .for_each(|d, gv, i, m| *d = gv * i / m.max(1e-15));
                }
                vec![dx]
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn elementwise_grads() {
        let a = rand_arr(&[2, 3], 1);
        let b = rand_arr(&[2, 3], 2);
        check_gradients(
            |t, vs| {
                let s = t.add(vs[0], vs[1]);
                let d = t.sub(s, vs[1]);
                let m = t.mul(d, vs[0]);
                let sc = t.scale(m, 0.7);
                t.sum_all(sc)
            },
            &[a, b],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn nonlinearity_grads() {
        let a = rand_arr(&[11], 3);
        for f in ["relu", "gelu", "sigmoid", "tanh", "abs"] {
            let a = a.clone();
            check_gradients(
                move |t, vs| {
                    let y = match f {
                        "relu" => t.relu(vs[0]),
                        "gelu" => t.gelu(vs[0]),
                        "sigmoid" => t.sigmoid(vs[0]),
                        "tanh" => t.tanh_op(vs[0]),
                        _ => t.abs(vs[0]),
                    };
                    let sq = t.mul(y, y);
                    t.sum_all(sq)
                },
                &[a],
                1e-5,
                1e-4,
            );
        }
    }

    #[test]
    fn ln_clamp_grads() {
        let a = rand_arr(&[7], 4).mapv(|v| v.abs() + 0.5);
        check_gradients(
            |t, vs| {
                let l = t.ln(vs[0]);
                let c = t.clamp(l, -0.3, 0.25);
                t.sum_all(c)
            },
            &[a],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn reduction_grads() {
        let a = rand_arr(&[3, 4], 5);
        check_gradients(
            |t, vs| {
                let m = t.mean_axis(vs[0], 0);
                let s = t.sum_axis(vs[0], 1);
                let ms = t.sum_all(m);
                let ss = t.mean_all(s);
                t.add(ms, ss)
            },
            &[a],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn shape_op_grads() {
        let a = rand_arr(&[4, 6], 6);
        check_gradients(
            |t, vs| {
                let r = t.reshape(vs[0], &[6, 4]);
                let tr = t.transpose2(r);
                let sl = t.slice_axis_op(tr, 1, 1, 5);
                let cc = t.concat(1, &[sl, sl]);
                let sq = t.mul(cc, cc);
                t.sum_all(sq)
            },
            &[a],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn broadcast_grads() {
        let x = rand_arr(&[5, 3], 7);
        let v = rand_arr(&[3], 8);
        let c = rand_arr(&[5], 9);
        check_gradients(
            |t, vs| {
                let m = t.mul_rowvec(vs[0], vs[1]);
                let a = t.add_rowvec(m, vs[1]);
                let b = t.add_colvec(a, vs[2]);
                let sq = t.mul(b, b);
                t.sum_all(sq)
            },
            &[x, v, c],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn matmul_grads() {
        let a = rand_arr(&[3, 4], 10);
        let b = rand_arr(&[4, 2], 11);
        check_gradients(
            |t, vs| {
                let p = t.matmul(vs[0], vs[1]);
                let sq = t.mul(p, p);
                t.sum_all(sq)
            },
            &[a, b],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn softmax_grads_and_rows_sum_to_one() {
        let a = rand_arr(&[4, 5], 12);
        let mut tape = Tape::new();
        let v = tape.leaf(a.clone());
        let y = tape.softmax_rows(v);
        let val = tape.value(y).clone().into_dimensionality::<Ix2>().unwrap();
        for row in val.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        check_gradients(
            |t, vs| {
                let y = t.softmax_rows(vs[0]);
                let w = rand_arr(&[4, 5], 13);
                let wc = t.constant(w);
                let p = t.mul(y, wc);
                t.sum_all(p)
            },
            &[a],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn layernorm_grads() {
        let x = rand_arr(&[3, 6], 14);
        let g = rand_arr(&[6], 15).mapv(|v| v + 1.5);
        let b = rand_arr(&[6], 16);
        check_gradients(
            |t, vs| {
                let y = t.layernorm(vs[0], vs[1], vs[2], 1e-5);
                let sq = t.mul(y, y);
                t.sum_all(sq)
            },
            &[x, g, b],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn batchnorm_grads() {
        let x = rand_arr(&[6, 4], 17);
        let g = rand_arr(&[4], 18).mapv(|v| v + 1.5);
        let b = rand_arr(&[4], 19);
        check_gradients(
            |t, vs| {
                let y = t.batchnorm_train(vs[0], vs[1], vs[2], 1e-5);
                let sq = t.mul(y, y);
                t.sum_all(sq)
            },
            &[x, g, b],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn avg_pool_grads_and_values() {
        let x = Arr::from_shape_vec(IxDyn(&[1, 6]), vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let y = tape.avg_pool_to(v, 3);
        assert_eq!(tape.value(y).as_slice().unwrap(), &[1.5, 3.5, 5.5]);
        let x = rand_arr(&[2, 7], 20);
        check_gradients(
            |t, vs| {
                let y = t.avg_pool_to(vs[0], 3);
                let sq = t.mul(y, y);
                t.sum_all(sq)
            },
            &[x],
            1e-5,
            1e-4,
        );
    }

    #[test]
    fn complex_mag_grads() {
        let spec = rand_arr(&[2, 2, 3, 4], 21).mapv(|v| v + 0.1);
        check_gradients(
            |t, vs| {
                let m = t.complex_mag(vs[0]);
                t.sum_all(m)
            },
            &[spec],
            1e-5,
            1e-4,
        );
    }
}
