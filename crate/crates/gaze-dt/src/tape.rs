//! Reverse-mode automatic differentiation on `f64` ndarrays.
//!
//! A [`Tape`] is a Wengert list rebuilt for every forward pass. Each op
//! records its parents and a closure that maps the output gradient to
//! per-parent gradient contributions. Everything runs in double precision
//! on a single thread, so forward and backward passes are bit-reproducible.

use ndarray::{Array1, Array2, ArrayD, Axis, IxDyn};
use std::rc::Rc;

/// Handle to a node on the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(pub usize);

type BackFn = Box<dyn Fn(&ArrayD<f64>) -> Vec<ArrayD<f64>>>;

struct Node {
    value: Rc<ArrayD<f64>>,
    parents: Vec<usize>,
    back: Option<BackFn>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn as2(a: &ArrayD<f64>) -> ndarray::ArrayView2<'_, f64> {
    a.view().into_dimensionality::<ndarray::Ix2>().unwrap()
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: ArrayD<f64>, parents: Vec<usize>, back: Option<BackFn>) -> Var {
        self.nodes.push(Node {
            value: Rc::new(value),
            parents,
            back,
        });
        Var(self.nodes.len() - 1)
    }

    /// Insert an input node. Gradients are accumulated for leaves; whether
    /// they are read afterwards is up to the caller.
    pub fn leaf(&mut self, value: ArrayD<f64>) -> Var {
        self.push(value, vec![], None)
    }

    pub fn value(&self, v: Var) -> &ArrayD<f64> {
        &self.nodes[v.0].value
    }

    fn rc_value(&self, v: Var) -> Rc<ArrayD<f64>> {
        Rc::clone(&self.nodes[v.0].value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = &*self.nodes[a.0].value + &*self.nodes[b.0].value;
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(|g| vec![g.clone(), g.clone()])),
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = &*self.nodes[a.0].value - &*self.nodes[b.0].value;
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(|g| vec![g.clone(), -g])),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let av = self.rc_value(a);
        let bv = self.rc_value(b);
        let v = &*av * &*bv;
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(move |g| vec![g * &*bv, g * &*av])),
        )
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = &*self.nodes[a.0].value * c;
        self.push(v, vec![a.0], Some(Box::new(move |g| vec![g * c])))
    }

    /// Add a non-differentiable constant (attention masks and the like).
    pub fn add_const(&mut self, a: Var, c: ArrayD<f64>) -> Var {
        let v = &*self.nodes[a.0].value + &c;
        self.push(v, vec![a.0], Some(Box::new(|g| vec![g.clone()])))
    }

    /// Elementwise multiply by a constant mask (dropout).
    pub fn mul_const(&mut self, a: Var, mask: ArrayD<f64>) -> Var {
        let v = &*self.nodes[a.0].value * &mask;
        self.push(v, vec![a.0], Some(Box::new(move |g| vec![g * &mask])))
    }

    /// `[n,k] x [k,m] -> [n,m]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let av = self.rc_value(a);
        let bv = self.rc_value(b);
        let v = as2(&av).dot(&as2(&bv)).into_dyn();
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let da = g2.dot(&as2(&bv).t()).into_dyn();
                let db = as2(&av).t().dot(&g2).into_dyn();
                vec![da, db]
            })),
        )
    }

    /// `[n,k] x [m,k]^T -> [n,m]`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let av = self.rc_value(a);
        let bv = self.rc_value(b);
        let v = as2(&av).dot(&as2(&bv).t()).into_dyn();
        self.push(
            v,
            vec![a.0, b.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let da = g2.dot(&as2(&bv)).into_dyn();
                let db = g2.t().dot(&as2(&av)).into_dyn();
                vec![da, db]
            })),
        )
    }

    /// `[n,d] + [d]` broadcast over rows.
    pub fn add_bias(&mut self, m: Var, b: Var) -> Var {
        let bv = self.rc_value(b);
        let b1 = bv.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let v = (&as2(&self.nodes[m.0].value) + &b1).into_dyn();
        self.push(
            v,
            vec![m.0, b.0],
            Some(Box::new(|g| {
                let db = as2(g).sum_axis(Axis(0)).into_dyn();
                vec![g.clone(), db]
            })),
        )
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let av = self.rc_value(a);
        let v = av.mapv(|x| x.max(0.0));
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| {
                vec![g * &av.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 })]
            })),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let cap = v.clone();
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| vec![g * &cap.mapv(|y| y * (1.0 - y))])),
        )
    }

    /// tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
        let av = self.rc_value(a);
        let v = av.mapv(|x| {
            let inner = C * (x + 0.044715 * x * x * x);
            0.5 * x * (1.0 + inner.tanh())
        });
        self.push(
            v,
            vec![a.0],
            Some(Box::new(move |g| {
                let d = av.mapv(|x| {
                    let u = C * (x + 0.044715 * x * x * x);
                    let t = u.tanh();
                    let du = C * (1.0 + 3.0 * 0.044715 * x * x);
                    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
                });
                vec![g * &d]
            })),
        )
    }

    /// LayerNorm over the last axis of a `[n,d]` matrix with affine params.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Var {
        let xv = self.rc_value(x);
        let gv = self.rc_value(gain);
        let x2 = as2(&xv);
        let (n, d) = x2.dim();
        let mut xhat = Array2::<f64>::zeros((n, d));
        let mut inv_std = Array1::<f64>::zeros(n);
        for i in 0..n {
            let row = x2.row(i);
            let mean = row.mean().unwrap();
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std[i] = is;
            for j in 0..d {
                xhat[[i, j]] = (row[j] - mean) * is;
            }
        }
        let g1 = gv.view().into_dimensionality::<ndarray::Ix1>().unwrap();
        let b1 = self.nodes[bias.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .unwrap();
        let out = (&xhat * &g1 + b1).into_dyn();
        let xhat = Rc::new(xhat);
        let xhat_c = Rc::clone(&xhat);
        self.push(
            out,
            vec![x.0, gain.0, bias.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let (n, d) = g2.dim();
                let g1 = gv.view().into_dimensionality::<ndarray::Ix1>().unwrap();
                let mut dx = Array2::<f64>::zeros((n, d));
                let mut dgain = Array1::<f64>::zeros(d);
                let mut dbias = Array1::<f64>::zeros(d);
                for i in 0..n {
                    let gi = g2.row(i);
                    let xh = xhat_c.row(i);
                    let mut sum_gy = 0.0;
                    let mut sum_gyx = 0.0;
                    for j in 0..d {
                        let gy = gi[j] * g1[j];
                        sum_gy += gy;
                        sum_gyx += gy * xh[j];
                        dgain[j] += gi[j] * xh[j];
                        dbias[j] += gi[j];
                    }
                    let is = inv_std[i];
                    for j in 0..d {
                        let gy = gi[j] * g1[j];
                        dx[[i, j]] =
                            is * (gy - sum_gy / d as f64 - xh[j] * sum_gyx / d as f64);
                    }
                }
                vec![dx.into_dyn(), dgain.into_dyn(), dbias.into_dyn()]
            })),
        )
    }

    /// Row-wise softmax of a `[n,m]` matrix.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let x2 = as2(&self.nodes[x.0].value).to_owned();
        let (n, m) = x2.dim();
        let mut y = Array2::<f64>::zeros((n, m));
        for i in 0..n {
            let row = x2.row(i);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for j in 0..m {
                let e = (row[j] - mx).exp();
                y[[i, j]] = e;
                s += e;
            }
            for j in 0..m {
                y[[i, j]] /= s;
            }
        }
        let y = Rc::new(y);
        let yc = Rc::clone(&y);
        self.push(
            (*y).clone().into_dyn(),
            vec![x.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let (n, m) = g2.dim();
                let mut dx = Array2::<f64>::zeros((n, m));
                for i in 0..n {
                    let gi = g2.row(i);
                    let yi = yc.row(i);
                    let dot = gi.iter().zip(yi.iter()).map(|(a, b)| a * b).sum::<f64>();
                    for j in 0..m {
                        dx[[i, j]] = yi[j] * (gi[j] - dot);
                    }
                }
                vec![dx.into_dyn()]
            })),
        )
    }

    /// Select rows `idx` of a `[n,d]` matrix (also an embedding lookup).
    pub fn gather_rows(&mut self, x: Var, idx: Vec<usize>) -> Var {
        let xv = self.rc_value(x);
        let x2 = as2(&xv);
        let d = x2.ncols();
        let n = x2.nrows();
        let mut out = Array2::<f64>::zeros((idx.len(), d));
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).assign(&x2.row(i));
        }
        self.push(
            out.into_dyn(),
            vec![x.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let mut dx = Array2::<f64>::zeros((n, d));
                for (k, &i) in idx.iter().enumerate() {
                    let mut r = dx.row_mut(i);
                    r += &g2.row(k);
                }
                vec![dx.into_dyn()]
            })),
        )
    }

    /// Interleave three `[T,d]` matrices into `[3T,d]` as (a_t, b_t, c_t) per step.
    pub fn interleave3(&mut self, a: Var, b: Var, c: Var) -> Var {
        let av = self.rc_value(a);
        let bv = self.rc_value(b);
        let cv = self.rc_value(c);
        let (t, d) = as2(&av).dim();
        let mut out = Array2::<f64>::zeros((3 * t, d));
        for i in 0..t {
            out.row_mut(3 * i).assign(&as2(&av).row(i));
            out.row_mut(3 * i + 1).assign(&as2(&bv).row(i));
            out.row_mut(3 * i + 2).assign(&as2(&cv).row(i));
        }
        self.push(
            out.into_dyn(),
            vec![a.0, b.0, c.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let mut da = Array2::<f64>::zeros((t, d));
                let mut db = Array2::<f64>::zeros((t, d));
                let mut dc = Array2::<f64>::zeros((t, d));
                for i in 0..t {
                    da.row_mut(i).assign(&g2.row(3 * i));
                    db.row_mut(i).assign(&g2.row(3 * i + 1));
                    dc.row_mut(i).assign(&g2.row(3 * i + 2));
                }
                vec![da.into_dyn(), db.into_dyn(), dc.into_dyn()]
            })),
        )
    }

    /// Columns `[start, start+len)` of a `[n,d]` matrix.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xv = self.rc_value(x);
        let x2 = as2(&xv);
        let (n, d) = x2.dim();
        let out = x2.slice(ndarray::s![.., start..start + len]).to_owned();
        self.push(
            out.into_dyn(),
            vec![x.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let mut dx = Array2::<f64>::zeros((n, d));
                dx.slice_mut(ndarray::s![.., start..start + len]).assign(&g2);
                vec![dx.into_dyn()]
            })),
        )
    }

    /// Concatenate `[n,d_i]` matrices along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let vals: Vec<Rc<ArrayD<f64>>> = parts.iter().map(|&p| self.rc_value(p)).collect();
        let n = as2(&vals[0]).nrows();
        let widths: Vec<usize> = vals.iter().map(|v| as2(v).ncols()).collect();
        let total: usize = widths.iter().sum();
        let mut out = Array2::<f64>::zeros((n, total));
        let mut off = 0;
        for (v, &w) in vals.iter().zip(&widths) {
            out.slice_mut(ndarray::s![.., off..off + w]).assign(&as2(v));
            off += w;
        }
        self.push(
            out.into_dyn(),
            parts.iter().map(|p| p.0).collect(),
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let mut grads = Vec::with_capacity(widths.len());
                let mut off = 0;
                for &w in &widths {
                    grads.push(g2.slice(ndarray::s![.., off..off + w]).to_owned().into_dyn());
                    off += w;
                }
                grads
            })),
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        let old_shape = self.nodes[x.0].value.shape().to_vec();
        let v = self.nodes[x.0]
            .value
            .to_shape(IxDyn(shape))
            .expect("reshape size mismatch")
            .to_owned();
        self.push(
            v,
            vec![x.0],
            Some(Box::new(move |g| {
                vec![g.to_shape(IxDyn(&old_shape)).unwrap().to_owned()]
            })),
        )
    }

    /// Sum of all elements, as a 0-dim array.
    pub fn sum_all(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].value.shape().to_vec();
        let s = self.nodes[x.0].value.sum();
        self.push(
            ndarray::arr0(s).into_dyn(),
            vec![x.0],
            Some(Box::new(move |g| {
                let gs = g.first().copied().unwrap_or(0.0);
                vec![ArrayD::from_elem(IxDyn(&shape), gs)]
            })),
        )
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let n = self.nodes[x.0].value.len() as f64;
        let s = self.sum_all(x);
        self.scale(s, 1.0 / n)
    }

    /// 2-D convolution over a `[c_in, h, w]` input. Weights are laid out
    /// `[c_out, c_in*k*k]`, bias `[c_out]`. Zero padding.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Var,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Var {
        let xv = self.rc_value(x);
        let wv = self.rc_value(w);
        let shape = xv.shape().to_vec();
        let (c_in, h, win) = (shape[0], shape[1], shape[2]);
        let h_out = (h + 2 * pad - k) / stride + 1;
        let w_out = (win + 2 * pad - k) / stride + 1;
        let x3 = xv.view().into_dimensionality::<ndarray::Ix3>().unwrap();

        // im2col: rows = output pixels, cols = c_in*k*k receptive field
        let mut cols = Array2::<f64>::zeros((h_out * w_out, c_in * k * k));
        for oy in 0..h_out {
            for ox in 0..w_out {
                let row = oy * w_out + ox;
                let mut col = 0;
                for c in 0..c_in {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < win {
                                cols[[row, col]] = x3[[c, iy as usize, ix as usize]];
                            }
                            col += 1;
                        }
                    }
                }
            }
        }
        let cols = Rc::new(cols);
        let w2 = as2(&wv);
        let c_out = w2.nrows();
        let b1 = self.nodes[b.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix1>()
            .unwrap();
        // [hw, k2] x [k2, c_out] + bias -> [hw, c_out]
        let out_flat = cols.dot(&w2.t()) + b1;
        let mut out = ndarray::Array3::<f64>::zeros((c_out, h_out, w_out));
        for oy in 0..h_out {
            for ox in 0..w_out {
                for c in 0..c_out {
                    out[[c, oy, ox]] = out_flat[[oy * w_out + ox, c]];
                }
            }
        }
        let cols_c = Rc::clone(&cols);
        self.push(
            out.into_dyn(),
            vec![x.0, w.0, b.0],
            Some(Box::new(move |g| {
                let g3 = g.view().into_dimensionality::<ndarray::Ix3>().unwrap();
                let mut g_flat = Array2::<f64>::zeros((h_out * w_out, c_out));
                for oy in 0..h_out {
                    for ox in 0..w_out {
                        for c in 0..c_out {
                            g_flat[[oy * w_out + ox, c]] = g3[[c, oy, ox]];
                        }
                    }
                }
                // dW = g_flat^T . cols ; db = column sums ; dcols = g_flat . W
                let dw = g_flat.t().dot(&*cols_c).into_dyn();
                let db = g_flat.sum_axis(Axis(0)).into_dyn();
                let dcols = g_flat.dot(&as2(&wv));
                // col2im scatter-add
                let mut dx = ndarray::Array3::<f64>::zeros((c_in, h, win));
                for oy in 0..h_out {
                    for ox in 0..w_out {
                        let row = oy * w_out + ox;
                        let mut col = 0;
                        for c in 0..c_in {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy >= 0
                                        && ix >= 0
                                        && (iy as usize) < h
                                        && (ix as usize) < win
                                    {
                                        dx[[c, iy as usize, ix as usize]] += dcols[[row, col]];
                                    }
                                    col += 1;
                                }
                            }
                        }
                    }
                }
                vec![dx.into_dyn(), dw, db]
            })),
        )
    }

    /// Mean over the spatial axes of a `[c,h,w]` tensor, giving `[1,c]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let shape = self.nodes[x.0].value.shape().to_vec();
        let (c, h, w) = (shape[0], shape[1], shape[2]);
        let x3 = self.nodes[x.0]
            .value
            .view()
            .into_dimensionality::<ndarray::Ix3>()
            .unwrap();
        let mut out = Array2::<f64>::zeros((1, c));
        for ci in 0..c {
            out[[0, ci]] = x3.index_axis(Axis(0), ci).sum() / (h * w) as f64;
        }
        self.push(
            out.into_dyn(),
            vec![x.0],
            Some(Box::new(move |g| {
                let g2 = as2(g);
                let mut dx = ndarray::Array3::<f64>::zeros((c, h, w));
                for ci in 0..c {
                    dx.index_axis_mut(Axis(0), ci)
                        .fill(g2[[0, ci]] / (h * w) as f64);
                }
                vec![dx.into_dyn()]
            })),
        )
    }

    /// Stack `[1,d]` rows into `[n,d]`.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Var {
        let vals: Vec<Rc<ArrayD<f64>>> = rows.iter().map(|&r| self.rc_value(r)).collect();
        let d = vals[0].len();
        let mut out = Array2::<f64>::zeros((vals.len(), d));
        for (i, v) in vals.iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                out[[i, j]] = *x;
            }
        }
        let shapes: Vec<Vec<usize>> = vals.iter().map(|v| v.shape().to_vec()).collect();
        self.push(
            out.into_dyn(),
            rows.iter().map(|r| r.0).collect(),
            Some(Box::new(move |g| {
                let g2 = as2(g);
                shapes
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        g2.row(i)
                            .to_owned()
                            .into_dyn()
                            .to_shape(IxDyn(s))
                            .unwrap()
                            .to_owned()
                    })
                    .collect()
            })),
        )
    }

    /// Run the backward pass from `root` (seeded with ones) and return the
    /// gradient for every node, where one was produced.
    pub fn backward(&self, root: Var) -> Vec<Option<ArrayD<f64>>> {
        let mut grads: Vec<Option<ArrayD<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(ArrayD::ones(self.nodes[root.0].value.raw_dim()));
        for i in (0..=root.0).rev() {
            let g = match &grads[i] {
                Some(g) => g.clone(),
                None => continue,
            };
            let node = &self.nodes[i];
            if let Some(back) = &node.back {
                let contribs = back(&g);
                debug_assert_eq!(contribs.len(), node.parents.len());
                for (p, c) in node.parents.iter().zip(contribs) {
                    match &mut grads[*p] {
                        Some(acc) => *acc += &c,
                        slot => *slot = Some(c),
                    }
                }
            }
        }
        grads
    }
}
