use rand::Rng;

use super::layers::{backward_seq, forward_seq, ConvGeom, Layer};
use super::{Architecture, LearnerSpec, ModelWeights, ParamBlock, ProximalConfig};
use crate::data::{Image, LabelVector};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

/// A compiled network for one [`LearnerSpec`].
#[derive(Debug, Clone)]
pub struct Model {
    spec: LearnerSpec,
    layers: Vec<Layer>,
    layout: Vec<ParamBlock>,
    n_params: usize,
}

struct Builder {
    layout: Vec<ParamBlock>,
    offset: usize,
    dims: (usize, usize, usize),
}

impl Builder {
    fn len(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    fn param(&mut self, name: String, shape: Vec<usize>) -> usize {
        let off = self.offset;
        let block = ParamBlock::new(name, shape);
        self.offset += block.len();
        self.layout.push(block);
        off
    }

    fn dense(&mut self, name: &str, out_dim: usize) -> Layer {
        let in_dim = self.len();
        let w_off = self.param(format!("{name}.weight"), vec![out_dim, in_dim]);
        let b_off = self.param(format!("{name}.bias"), vec![out_dim]);
        self.dims = (out_dim, 1, 1);
        Layer::Dense {
            in_dim,
            out_dim,
            w_off,
            b_off,
        }
    }

    fn conv(&mut self, name: &str, cout: usize, k: usize, pad: usize) -> Result<Layer> {
        let (cin, h, w) = self.dims;
        if h + 2 * pad < k || w + 2 * pad < k {
            return Err(Error::ShapeMismatch(format!(
                "{name}: {h}x{w} input too small for a {k}x{k} kernel"
            )));
        }
        let (oh, ow) = (h + 2 * pad - k + 1, w + 2 * pad - k + 1);
        let w_off = self.param(format!("{name}.weight"), vec![cout, cin, k, k]);
        let b_off = self.param(format!("{name}.bias"), vec![cout]);
        self.dims = (cout, oh, ow);
        Ok(Layer::Conv(ConvGeom {
            cin,
            cout,
            k,
            pad,
            h,
            w,
            oh,
            ow,
            w_off,
            b_off,
        }))
    }

    fn relu(&self) -> Layer {
        Layer::Relu { len: self.len() }
    }

    fn pool(&mut self, name: &str) -> Result<Layer> {
        let (c, h, w) = self.dims;
        if h < 2 || w < 2 {
            return Err(Error::ShapeMismatch(format!("{name}: {h}x{w} input too small to pool")));
        }
        self.dims = (c, h / 2, w / 2);
        Ok(Layer::MaxPool { c, h, w })
    }

    fn global_avg_pool(&mut self) -> Layer {
        let (c, h, w) = self.dims;
        self.dims = (c, 1, 1);
        Layer::GlobalAvgPool { c, h, w }
    }

    fn residual_block(&mut self, name: &str) -> Result<Layer> {
        let before = self.dims;
        let body = vec![
            self.conv(&format!("{name}.conv1"), before.0, 3, 1)?,
            self.relu(),
            self.conv(&format!("{name}.conv2"), before.0, 3, 1)?,
        ];
        if self.dims != before {
            return Err(Error::ShapeMismatch(format!("{name}: shortcut dimensions differ")));
        }
        Ok(Layer::Residual(body))
    }
}

impl Model {
    pub fn new(spec: &LearnerSpec) -> Result<Self> {
        let input = spec.input;
        if input.is_empty() {
            return Err(Error::ShapeMismatch("input shape has a zero dimension".into()));
        }
        if spec.n_outputs == 0 {
            return Err(Error::ShapeMismatch("model needs at least one output".into()));
        }
        let mut b = Builder {
            layout: Vec::new(),
            offset: 0,
            dims: (input.channels, input.height, input.width),
        };
        let l = spec.n_outputs;
        let layers = match &spec.architecture {
            Architecture::Linear => vec![b.dense("fc", l)],
            Architecture::Mlp { hidden } => {
                if hidden.contains(&0) {
                    return Err(Error::ShapeMismatch("MLP hidden width of zero".into()));
                }
                let mut layers = Vec::new();
                for (i, &h) in hidden.iter().enumerate() {
                    layers.push(b.dense(&format!("fc{}", i + 1), h));
                    layers.push(b.relu());
                }
                layers.push(b.dense("out", l));
                layers
            }
            Architecture::LeNetStyle => {
                let mut layers = vec![b.conv("conv1", 6, 5, 0)?];
                layers.push(b.relu());
                layers.push(b.pool("pool1")?);
                layers.push(b.conv("conv2", 16, 5, 0)?);
                layers.push(b.relu());
                layers.push(b.pool("pool2")?);
                layers.push(b.dense("fc1", 120));
                layers.push(b.relu());
                layers.push(b.dense("fc2", l));
                layers
            }
            Architecture::TinyResidual => {
                let mut layers = vec![b.conv("stem", 8, 3, 1)?];
                layers.push(b.relu());
                layers.push(b.residual_block("block1")?);
                layers.push(b.residual_block("block2")?);
                layers.push(b.global_avg_pool());
                layers.push(b.dense("fc", l));
                layers
            }
        };
        Ok(Self {
            spec: spec.clone(),
            layers,
            n_params: b.offset,
            layout: b.layout,
        })
    }

    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn layout(&self) -> &[ParamBlock] {
        &self.layout
    }

    pub fn input_len(&self) -> usize {
        self.spec.input.len()
    }

    /// Uniform in `±√(6/fan_in)` for weights, zero biases.
    pub fn init(&self, seed: u64) -> ModelWeights {
        let mut rng = rng_for(seed, &[tag::INIT]);
        let mut values = vec![0.0; self.n_params];
        init_layers(&self.layers, &mut values, &mut rng);
        ModelWeights::new(values, self.layout.clone()).expect("layout matches parameter count")
    }

    fn check_weights(&self, w: &ModelWeights) -> Result<()> {
        if w.layout() != self.layout.as_slice() {
            return Err(Error::ShapeMismatch(format!(
                "weights do not match the {} layout",
                self.spec.architecture
            )));
        }
        Ok(())
    }

    /// Packs images into a CHW batch buffer.
    pub fn pack<'a>(&self, images: impl IntoIterator<Item = &'a Image>) -> Result<(Vec<f64>, usize)> {
        let d = self.input_len();
        let mut buf = Vec::new();
        let mut n = 0;
        for img in images {
            if img.shape() != self.spec.input {
                return Err(Error::ShapeMismatch(format!(
                    "image {:?} does not match model input {:?}",
                    img.shape().as_tuple(),
                    self.spec.input.as_tuple()
                )));
            }
            let start = buf.len();
            buf.resize(start + d, 0.0);
            img.write_chw(&mut buf[start..]);
            n += 1;
        }
        Ok((buf, n))
    }

    pub fn pack_labels<'a>(&self, labels: impl IntoIterator<Item = &'a LabelVector>) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for lv in labels {
            if lv.len() != self.spec.n_outputs {
                return Err(Error::ShapeMismatch(format!(
                    "label vector of length {} for {} outputs",
                    lv.len(),
                    self.spec.n_outputs
                )));
            }
            out.extend(lv.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }));
        }
        Ok(out)
    }

    pub fn logits(&self, w: &ModelWeights, inputs: Vec<f64>, batch: usize) -> Result<Vec<f64>> {
        self.check_weights(w)?;
        if inputs.len() != batch * self.input_len() {
            return Err(Error::ShapeMismatch("batch buffer length".into()));
        }
        Ok(forward_seq(&self.layers, w.values(), inputs, batch, None))
    }

    /// Per-sample label probabilities.
    pub fn predict(&self, w: &ModelWeights, images: &[&Image]) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 256;
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(CHUNK) {
            let (inputs, n) = self.pack(chunk.iter().copied())?;
            let z = self.logits(w, inputs, n)?;
            out.extend(
                z.chunks_exact(self.spec.n_outputs)
                    .map(|row| row.iter().map(|&v| sigmoid(v)).collect()),
            );
        }
        Ok(out)
    }

    /// Mean per-label binary cross-entropy over the batch, plus the proximal
    /// penalty when given, and its exact gradient.
    pub fn loss_and_grad(
        &self,
        w: &ModelWeights,
        inputs: Vec<f64>,
        targets: &[f64],
        batch: usize,
        prox: Option<&ProximalConfig>,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_weights(w)?;
        let l = self.spec.n_outputs;
        if batch == 0 || inputs.len() != batch * self.input_len() || targets.len() != batch * l {
            return Err(Error::ShapeMismatch("batch buffers disagree with model".into()));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let z = forward_seq(&self.layers, w.values(), inputs, batch, Some(&mut caches));
        let scale = 1.0 / (batch * l) as f64;
        let mut loss = 0.0;
        let mut dz = vec![0.0; z.len()];
        for ((d, &zi), &y) in dz.iter_mut().zip(&z).zip(targets) {
            // log(1 + e^z) - y·z, evaluated stably
            loss += zi.max(0.0) - zi * y + (-zi.abs()).exp().ln_1p();
            *d = (sigmoid(zi) - y) * scale;
        }
        loss *= scale;
        let mut grad = vec![0.0; self.n_params];
        backward_seq(&self.layers, w.values(), &caches, dz, batch, &mut grad, false);

        if let Some(p) = prox.filter(|p| p.mu != 0.0) {
            if p.anchor.len() != w.len() {
                return Err(Error::ShapeMismatch("proximal anchor length".into()));
            }
            let mut sq = 0.0;
            for ((g, &wi), &ai) in grad.iter_mut().zip(w.values()).zip(p.anchor.values()) {
                let d = wi - ai;
                sq += d * d;
                *g += p.mu * d;
            }
            loss += 0.5 * p.mu * sq;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        Ok((loss, grad))
    }
}

fn init_layers(layers: &[Layer], values: &mut [f64], rng: &mut impl Rng) {
    for layer in layers {
        let (off, len, fan_in) = match layer {
            Layer::Dense {
                in_dim,
                out_dim,
                w_off,
                ..
            } => (*w_off, in_dim * out_dim, *in_dim),
            Layer::Conv(g) => (g.w_off, g.cout * g.cin * g.k * g.k, g.cin * g.k * g.k),
            Layer::Residual(body) => {
                init_layers(body, values, rng);
                continue;
            }
            _ => continue,
        };
        let bound = (6.0 / fan_in as f64).sqrt();
        for v in &mut values[off..off + len] {
            *v = rng.random_range(-bound..bound);
        }
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn init_weights(spec: &LearnerSpec, seed: u64) -> Result<ModelWeights> {
    Ok(Model::new(spec)?.init(seed))
}

/// Label probabilities for each image.
pub fn forward(spec: &LearnerSpec, w: &ModelWeights, images: &[&Image]) -> Result<Vec<Vec<f64>>> {
    Model::new(spec)?.predict(w, images)
}

pub fn loss_and_grad(
    spec: &LearnerSpec,
    w: &ModelWeights,
    images: &[&Image],
    labels: &[&LabelVector],
    prox: Option<&ProximalConfig>,
) -> Result<(f64, Vec<f64>)> {
    let model = Model::new(spec)?;
    if images.len() != labels.len() {
        return Err(Error::ShapeMismatch("images and labels differ in count".into()));
    }
    let (inputs, n) = model.pack(images.iter().copied())?;
    let targets = model.pack_labels(labels.iter().copied())?;
    model.loss_and_grad(w, inputs, &targets, n, prox)
}
