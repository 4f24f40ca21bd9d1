//! Layer forward and backward passes over batched activations.
//!
//! Activations are flat `[batch, features]` buffers; convolutional features
//! are channel-major (CHW). Parameters and gradients live in one flat vector
//! and each layer addresses its slice by offset.

use super::gemm::gemm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub pad: usize,
    pub h: usize,
    pub w: usize,
    pub oh: usize,
    pub ow: usize,
    pub w_off: usize,
    pub b_off: usize,
}

impl ConvGeom {
    fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Dense {
        in_dim: usize,
        out_dim: usize,
        w_off: usize,
        b_off: usize,
    },
    Conv(ConvGeom),
    Relu {
        len: usize,
    },
    /// 2×2 window, stride 2, trailing odd row/column dropped.
    MaxPool {
        c: usize,
        h: usize,
        w: usize,
    },
    GlobalAvgPool {
        c: usize,
        h: usize,
        w: usize,
    },
    /// `relu(body(x) + x)`; body must preserve the feature length.
    Residual(Vec<Layer>),
}

pub(crate) enum Cache {
    Dense { input: Vec<f64> },
    Conv { cols: Vec<f64> },
    Relu { output: Vec<f64> },
    MaxPool { argmax: Vec<usize>, in_len: usize },
    GlobalAvgPool,
    Residual { body: Vec<Cache>, output: Vec<f64> },
}

impl Layer {
    pub fn out_len(&self) -> usize {
        match self {
            Layer::Dense { out_dim, .. } => *out_dim,
            Layer::Conv(g) => g.cout * g.positions(),
            Layer::Relu { len } => *len,
            Layer::MaxPool { c, h, w } => c * (h / 2) * (w / 2),
            Layer::GlobalAvgPool { c, .. } => *c,
            Layer::Residual(body) => body.last().map_or(0, Layer::out_len),
        }
    }

    pub fn in_len(&self) -> usize {
        match self {
            Layer::Dense { in_dim, .. } => *in_dim,
            Layer::Conv(g) => g.cin * g.h * g.w,
            Layer::Relu { len } => *len,
            Layer::MaxPool { c, h, w } | Layer::GlobalAvgPool { c, h, w } => c * h * w,
            Layer::Residual(body) => body.first().map_or(0, Layer::in_len),
        }
    }
}

pub(crate) fn forward_seq(
    layers: &[Layer],
    params: &[f64],
    mut x: Vec<f64>,
    batch: usize,
    mut caches: Option<&mut Vec<Cache>>,
) -> Vec<f64> {
    for layer in layers {
        let (y, cache) = forward(layer, params, x, batch, caches.is_some());
        debug_assert_eq!(y.len(), batch * layer.out_len());
        if let (Some(cs), Some(c)) = (caches.as_deref_mut(), cache) {
            cs.push(c);
        }
        x = y;
    }
    x
}

fn forward(layer: &Layer, params: &[f64], x: Vec<f64>, batch: usize, train: bool) -> (Vec<f64>, Option<Cache>) {
    debug_assert_eq!(x.len(), batch * layer.in_len());
    match *layer {
        Layer::Dense {
            in_dim,
            out_dim,
            w_off,
            b_off,
        } => {
            let w = &params[w_off..w_off + in_dim * out_dim];
            let b = &params[b_off..b_off + out_dim];
            let mut y = vec![0.0; batch * out_dim];
            gemm(batch, in_dim, out_dim, &x, false, w, true, 0.0, &mut y);
            for row in y.chunks_exact_mut(out_dim) {
                for (v, bias) in row.iter_mut().zip(b) {
                    *v += bias;
                }
            }
            (y, train.then_some(Cache::Dense { input: x }))
        }
        Layer::Conv(g) => {
            let cols = im2col(&x, batch, &g);
            let (p, bp) = (g.positions(), batch * g.positions());
            let w = &params[g.w_off..g.w_off + g.cout * g.patch()];
            let b = &params[g.b_off..g.b_off + g.cout];
            let mut outm = vec![0.0; g.cout * bp];
            gemm(g.cout, g.patch(), bp, w, false, &cols, false, 0.0, &mut outm);
            let mut y = vec![0.0; batch * g.cout * p];
            for f in 0..g.cout {
                for s in 0..batch {
                    let src = &outm[f * bp + s * p..f * bp + (s + 1) * p];
                    let dst = &mut y[(s * g.cout + f) * p..(s * g.cout + f + 1) * p];
                    for (d, v) in dst.iter_mut().zip(src) {
                        *d = v + b[f];
                    }
                }
            }
            (y, train.then_some(Cache::Conv { cols }))
        }
        Layer::Relu { .. } => {
            let mut y = x;
            for v in y.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let cache = train.then(|| Cache::Relu { output: y.clone() });
            (y, cache)
        }
        Layer::MaxPool { c, h, w } => {
            let (oh, ow) = (h / 2, w / 2);
            let in_len = c * h * w;
            let mut y = Vec::with_capacity(batch * c * oh * ow);
            let mut argmax = Vec::with_capacity(if train { y.capacity() } else { 0 });
            for s in 0..batch {
                for ch in 0..c {
                    let base = s * in_len + ch * h * w;
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut best = base + 2 * oy * w + 2 * ox;
                            for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                                let i = base + (2 * oy + dy) * w + 2 * ox + dx;
                                if x[i] > x[best] {
                                    best = i;
                                }
                            }
                            y.push(x[best]);
                            if train {
                                argmax.push(best);
                            }
                        }
                    }
                }
            }
            let cache = train.then_some(Cache::MaxPool {
                argmax,
                in_len: batch * in_len,
            });
            (y, cache)
        }
        Layer::GlobalAvgPool { c, h, w } => {
            let area = (h * w) as f64;
            let y = x.chunks_exact(h * w).map(|plane| plane.iter().sum::<f64>() / area).collect();
            debug_assert_eq!(x.len(), batch * c * h * w);
            (y, train.then_some(Cache::GlobalAvgPool))
        }
        Layer::Residual(ref body) => {
            let mut body_caches = train.then(Vec::new);
            let z = forward_seq(body, params, x.clone(), batch, body_caches.as_mut());
            let y: Vec<f64> = z.iter().zip(&x).map(|(a, b)| (a + b).max(0.0)).collect();
            let cache = body_caches.map(|body| Cache::Residual {
                body,
                output: y.clone(),
            });
            (y, cache)
        }
    }
}

/// Backpropagates `dy` through `layers`, accumulating parameter gradients into
/// `grad`. Returns the input gradient when `need_dx` is set.
pub(crate) fn backward_seq(
    layers: &[Layer],
    params: &[f64],
    caches: &[Cache],
    mut dy: Vec<f64>,
    batch: usize,
    grad: &mut [f64],
    need_dx: bool,
) -> Option<Vec<f64>> {
    debug_assert_eq!(layers.len(), caches.len());
    for (i, (layer, cache)) in layers.iter().zip(caches).enumerate().rev() {
        let want = i > 0 || need_dx;
        dy = backward(layer, params, cache, dy, batch, grad, want)?;
    }
    Some(dy)
}

fn backward(
    layer: &Layer,
    params: &[f64],
    cache: &Cache,
    dy: Vec<f64>,
    batch: usize,
    grad: &mut [f64],
    need_dx: bool,
) -> Option<Vec<f64>> {
    match (layer, cache) {
        (
            &Layer::Dense {
                in_dim,
                out_dim,
                w_off,
                b_off,
            },
            Cache::Dense { input },
        ) => {
            let gw = &mut grad[w_off..w_off + in_dim * out_dim];
            gemm(out_dim, batch, in_dim, &dy, true, input, false, 1.0, gw);
            let gb = &mut grad[b_off..b_off + out_dim];
            for row in dy.chunks_exact(out_dim) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            need_dx.then(|| {
                let w = &params[w_off..w_off + in_dim * out_dim];
                let mut dx = vec![0.0; batch * in_dim];
                gemm(batch, out_dim, in_dim, &dy, false, w, false, 0.0, &mut dx);
                dx
            })
        }
        (Layer::Conv(g), Cache::Conv { cols }) => {
            let (p, bp) = (g.positions(), batch * g.positions());
            let mut doutm = vec![0.0; g.cout * bp];
            for s in 0..batch {
                for f in 0..g.cout {
                    let src = &dy[(s * g.cout + f) * p..(s * g.cout + f + 1) * p];
                    doutm[f * bp + s * p..f * bp + (s + 1) * p].copy_from_slice(src);
                }
            }
            let gw = &mut grad[g.w_off..g.w_off + g.cout * g.patch()];
            gemm(g.cout, bp, g.patch(), &doutm, false, cols, true, 1.0, gw);
            let gb = &mut grad[g.b_off..g.b_off + g.cout];
            for (f, gbf) in gb.iter_mut().enumerate() {
                *gbf += doutm[f * bp..(f + 1) * bp].iter().sum::<f64>();
            }
            need_dx.then(|| {
                let w = &params[g.w_off..g.w_off + g.cout * g.patch()];
                let mut dcols = vec![0.0; g.patch() * bp];
                gemm(g.patch(), g.cout, bp, w, true, &doutm, false, 0.0, &mut dcols);
                col2im(&dcols, batch, g)
            })
        }
        (Layer::Relu { .. }, Cache::Relu { output }) => need_dx.then(|| {
            let mut dx = dy;
            for (d, &o) in dx.iter_mut().zip(output) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
            dx
        }),
        (Layer::MaxPool { .. }, Cache::MaxPool { argmax, in_len }) => need_dx.then(|| {
            let mut dx = vec![0.0; *in_len];
            for (&i, d) in argmax.iter().zip(&dy) {
                dx[i] += d;
            }
            dx
        }),
        (&Layer::GlobalAvgPool { c, h, w }, Cache::GlobalAvgPool) => need_dx.then(|| {
            let area = (h * w) as f64;
            let mut dx = vec![0.0; batch * c * h * w];
            for (plane, d) in dx.chunks_exact_mut(h * w).zip(&dy) {
                plane.fill(d / area);
            }
            dx
        }),
        (Layer::Residual(body), Cache::Residual { body: caches, output }) => {
            let mut ds = dy;
            for (d, &o) in ds.iter_mut().zip(output) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
            let dbody = backward_seq(body, params, caches, ds.clone(), batch, grad, true)
                .expect("body input gradient requested");
            need_dx.then(|| ds.iter().zip(&dbody).map(|(a, b)| a + b).collect())
        }
        _ => unreachable!("cache does not match layer"),
    }
}

/// Patch matrix of shape `[cin·k·k, batch·oh·ow]`.
fn im2col(x: &[f64], batch: usize, g: &ConvGeom) -> Vec<f64> {
    let (p, bp) = (g.positions(), batch * g.positions());
    let in_len = g.cin * g.h * g.w;
    let mut cols = vec![0.0; g.patch() * bp];
    for c in 0..g.cin {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * bp..(row + 1) * bp];
                for s in 0..batch {
                    let plane = &x[s * in_len + c * g.h * g.w..s * in_len + (c + 1) * g.h * g.w];
                    for oy in 0..g.oh {
                        let iy = (oy + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        for ox in 0..g.ow {
                            let ix = (ox + kx) as isize - g.pad as isize;
                            if ix < 0 || ix >= g.w as isize {
                                continue;
                            }
                            dst[s * p + oy * g.ow + ox] = plane[iy as usize * g.w + ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(dcols: &[f64], batch: usize, g: &ConvGeom) -> Vec<f64> {
    let (p, bp) = (g.positions(), batch * g.positions());
    let in_len = g.cin * g.h * g.w;
    let mut dx = vec![0.0; batch * in_len];
    for c in 0..g.cin {
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (c * g.k + ky) * g.k + kx;
                let src = &dcols[row * bp..(row + 1) * bp];
                for s in 0..batch {
                    let base = s * in_len + c * g.h * g.w;
                    for oy in 0..g.oh {
                        let iy = (oy + ky) as isize - g.pad as isize;
                        if iy < 0 || iy >= g.h as isize {
                            continue;
                        }
                        for ox in 0..g.ow {
                            let ix = (ox + kx) as isize - g.pad as isize;
                            if ix < 0 || ix >= g.w as isize {
                                continue;
                            }
                            dx[base + iy as usize * g.w + ix as usize] += src[s * p + oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
    dx
}
