//! UNet trunk with shallow per-patch heads, and its MSE training loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{
    adam_step, load_checkpoint, save_checkpoint, AdamConfig, AdamState, Tape, Tensor, Var,
};
use crate::error::{geometry, invalid, Error, Result};
use crate::image::Image;
use crate::pyramid::{slice_to_base_patches, BandPredictor, LevelDataset, LevelGeometry, PatchGrid};
use crate::wavelet::FilterBank;

pub const KERNEL: usize = 3;
pub const LEAKY_SLOPE: f64 = 0.2;
/// Scale of the head output initialization; small so untrained heads start near the zero predictor.
pub const OUTPUT_GAIN: f64 = 0.1;
const GEOMETRY_KEY: &str = "__geometry__";

/// Width and depth of the shared trunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrunkConfig {
    pub width: usize,
    pub head_width: usize,
    /// Encoder/decoder stage pairs; each contributes 4 convolutions.
    pub stages: usize,
}

impl Default for TrunkConfig {
    fn default() -> Self {
        TrunkConfig {
            width: 16,
            head_width: 16,
            stages: 1,
        }
    }
}

impl TrunkConfig {
    /// Convolutions on any input-to-head path.
    pub fn depth(&self) -> usize {
        4 * self.stages + 2 + 2
    }
}

/// Input and output layout of a [`UNet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetGeometry {
    pub in_channels: usize,
    pub in_extent: usize,
    pub out_extent: usize,
    /// Channels produced by each head.
    pub out_channels: usize,
    pub heads: usize,
}

impl NetGeometry {
    fn validate(&self, trunk: &TrunkConfig) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 || self.heads == 0 {
            return Err(geometry("channels and heads must be positive"));
        }
        if trunk.width == 0 || trunk.head_width == 0 {
            return Err(invalid("trunk widths must be positive"));
        }
        let f = 1usize << trunk.stages;
        if self.in_extent == 0 || !self.in_extent.is_multiple_of(f) {
            return Err(geometry(format!(
                "input extent {} is not divisible by 2^{} stages",
                self.in_extent, trunk.stages
            )));
        }
        if self.out_extent == 0
            || !self.in_extent.is_multiple_of(self.out_extent)
            || !(self.in_extent / self.out_extent).is_power_of_two()
        {
            return Err(geometry(format!(
                "output extent {} does not divide input extent {} by a power of two",
                self.out_extent, self.in_extent
            )));
        }
        Ok(())
    }

    fn pool_depth(&self) -> usize {
        (self.in_extent / self.out_extent).trailing_zeros() as usize
    }

    /// Values per example on the output side.
    pub fn output_len(&self) -> usize {
        self.heads * self.out_channels * self.out_extent * self.out_extent
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_extent * self.in_extent
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Hidden,
    Output,
}

struct ConvSpec {
    name: String,
    cin: usize,
    cout: usize,
    init: Init,
}

fn layout(g: &NetGeometry, t: &TrunkConfig) -> Vec<ConvSpec> {
    let mut specs = Vec::new();
    let mut conv = |name: String, cin, cout, init| specs.push(ConvSpec { name, cin, cout, init });
    let w = t.width;
    for i in 0..t.stages {
        conv(format!("enc{i}.conv0"), if i == 0 { g.in_channels } else { w }, w, Init::Hidden);
        conv(format!("enc{i}.conv1"), w, w, Init::Hidden);
    }
    conv("mid.conv0".into(), if t.stages == 0 { g.in_channels } else { w }, w, Init::Hidden);
    conv("mid.conv1".into(), w, w, Init::Hidden);
    for i in (0..t.stages).rev() {
        conv(format!("dec{i}.conv0"), 2 * w, w, Init::Hidden);
        conv(format!("dec{i}.conv1"), w, w, Init::Hidden);
    }
    for h in 0..g.heads {
        conv(format!("head{h}.conv0"), w, t.head_width, Init::Hidden);
        conv(format!("head{h}.conv1"), t.head_width, g.out_channels, Init::Output);
    }
    specs
}

/// Encoder/decoder with skip connections between equal extents, followed by
/// mean pooling to the output extent and `heads` two-layer conv heads whose
/// outputs are concatenated along channels.
#[derive(Debug, Clone, PartialEq)]
pub struct UNet {
    geometry: NetGeometry,
    trunk: TrunkConfig,
    names: Vec<String>,
    params: Vec<Tensor>,
}

impl UNet {
    /// Kaiming-uniform fan-in initialization for hidden convolutions,
    /// `U(-g/sqrt(fan_in), g/sqrt(fan_in))` with `g = OUTPUT_GAIN` for head
    /// outputs, zero biases.
    /// Values are rounded to f32.
    pub fn new(geometry: NetGeometry, trunk: TrunkConfig, seed: u64) -> Result<Self> {
        geometry.validate(&trunk)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::new();
        let mut params = Vec::new();
        for s in layout(&geometry, &trunk) {
            let fan_in = (s.cin * KERNEL * KERNEL) as f64;
            let bound = match s.init {
                Init::Hidden => (6.0 / ((1.0 + LEAKY_SLOPE * LEAKY_SLOPE) * fan_in)).sqrt(),
                Init::Output => OUTPUT_GAIN / fan_in.sqrt(),
            };
            let n = s.cout * s.cin * KERNEL * KERNEL;
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            let mut wt = Tensor::new(vec![s.cout, s.cin, KERNEL, KERNEL], w)?.requires_grad(true);
            wt.round_to_f32();
            names.push(format!("{}.weight", s.name));
            params.push(wt);
            names.push(format!("{}.bias", s.name));
            params.push(Tensor::zeros(vec![s.cout]).requires_grad(true));
        }
        Ok(UNet {
            geometry,
            trunk,
            names,
            params,
        })
    }

    pub fn geometry(&self) -> NetGeometry {
        self.geometry
    }

    pub fn trunk(&self) -> TrunkConfig {
        self.trunk
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::numel).sum()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    /// Zeroes the output layer of every head so the network emits zeros.
    pub fn zero_heads(&mut self) {
        for (n, p) in self.names.iter().zip(&mut self.params) {
            if n.starts_with("head") && n.contains(".conv1.") {
                p.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.data().iter().all(|v| v.is_finite()))
    }

    /// Records the network on `tape`. `params` are the vars of
    /// [`UNet::params`] in order; `x` is `[batch, in_channels, in_extent, in_extent]`.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        if params.len() != self.params.len() {
            return Err(invalid(format!(
                "network has {} parameters, got {} vars",
                self.params.len(),
                params.len()
            )));
        }
        let mut cursor = params.chunks_exact(2);
        let mut conv = |tape: &mut Tape, x: Var| -> Result<Var> {
            let wb = cursor.next().expect("layout and forward agree");
            tape.conv2d(x, wb[0], wb[1])
        };
        let block = |tape: &mut Tape, x: Var, conv: &mut dyn FnMut(&mut Tape, Var) -> Result<Var>| -> Result<Var> {
            let a = conv(tape, x)?;
            let a = tape.leaky_relu(a, LEAKY_SLOPE)?;
            let b = conv(tape, a)?;
            tape.leaky_relu(b, LEAKY_SLOPE)
        };

        let mut cur = x;
        let mut skips = Vec::with_capacity(self.trunk.stages);
        for _ in 0..self.trunk.stages {
            cur = block(tape, cur, &mut conv)?;
            skips.push(cur);
            cur = tape.stride2_downsample(cur)?;
        }
        cur = block(tape, cur, &mut conv)?;
        while let Some(skip) = skips.pop() {
            cur = tape.nearest_upsample2x(cur)?;
            cur = tape.concat_channels(cur, skip)?;
            cur = block(tape, cur, &mut conv)?;
        }
        for _ in 0..self.geometry.pool_depth() {
            cur = tape.stride2_downsample(cur)?;
        }
        let mut out: Option<Var> = None;
        for _ in 0..self.geometry.heads {
            let h = conv(tape, cur)?;
            let h = tape.leaky_relu(h, LEAKY_SLOPE)?;
            let h = conv(tape, h)?;
            out = Some(match out {
                None => h,
                Some(o) => tape.concat_channels(o, h)?,
            });
        }
        Ok(out.expect("at least one head"))
    }

    /// Inference on a planar batch; returns `[batch, heads * out_channels, out, out]` values.
    pub fn run(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        let g = self.geometry;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.leaf(&p.clone().requires_grad(false)))
            .collect();
        let x = tape.constant(vec![batch, g.in_channels, g.in_extent, g.in_extent], input.to_vec())?;
        let y = self.forward(&mut tape, &vars, x)?;
        Ok(tape.value(y).to_vec())
    }

    /// Batch MSE and gradients accumulated into each parameter (cleared first).
    fn loss_and_grad(&mut self, input: Vec<f64>, target: Vec<f64>, batch: usize) -> Result<f64> {
        let g = self.geometry;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.iter().map(|p| tape.leaf(p)).collect();
        let x = tape.constant(vec![batch, g.in_channels, g.in_extent, g.in_extent], input)?;
        let y = self.forward(&mut tape, &vars, x)?;
        let t = tape.constant(
            vec![batch, g.heads * g.out_channels, g.out_extent, g.out_extent],
            target,
        )?;
        let loss = tape.mse_loss(y, t)?;
        let grads = tape.backward(loss)?;
        for (v, p) in vars.iter().zip(&mut self.params) {
            p.zero_grad();
            grads.accumulate_into(*v, p)?;
        }
        Ok(tape.value(loss)[0])
    }

    pub(crate) fn to_entries(&self, kind: u8, level: usize, base_patch: usize) -> Vec<(String, Tensor)> {
        let g = self.geometry;
        let t = self.trunk;
        let meta = [
            kind as usize,
            level,
            g.in_channels,
            g.in_extent,
            g.out_extent,
            g.out_channels,
            g.heads,
            t.width,
            t.head_width,
            t.stages,
            base_patch,
        ];
        let mut out = vec![(
            GEOMETRY_KEY.to_string(),
            Tensor::new(vec![meta.len()], meta.iter().map(|v| *v as f64).collect())
                .expect("fixed length"),
        )];
        out.extend(
            self.names
                .iter()
                .cloned()
                .zip(self.params.iter().map(|p| p.clone().requires_grad(false))),
        );
        out
    }

    /// Returns `(kind, level, base_patch, net)`.
    pub(crate) fn from_entries(entries: Vec<(String, Tensor)>) -> Result<(u8, usize, usize, UNet)> {
        let mut it = entries.into_iter();
        let meta = match it.next() {
            Some((name, t)) if name == GEOMETRY_KEY && t.numel() == 11 => t,
            _ => return Err(invalid("checkpoint does not start with a geometry record")),
        };
        let m: Vec<usize> = meta.data().iter().map(|v| *v as usize).collect();
        let geometry = NetGeometry {
            in_channels: m[2],
            in_extent: m[3],
            out_extent: m[4],
            out_channels: m[5],
            heads: m[6],
        };
        let trunk = TrunkConfig {
            width: m[7],
            head_width: m[8],
            stages: m[9],
        };
        let mut net = UNet::new(geometry, trunk, 0)?;
        let mut count = 0;
        for (i, (name, t)) in it.enumerate() {
            if i >= net.params.len() || name != net.names[i] || t.shape() != net.params[i].shape() {
                return Err(crate::error::geometry(format!(
                    "checkpoint entry {name:?} {:?} does not match the network layout",
                    t.shape()
                )));
            }
            net.params[i] = t.requires_grad(true);
            count += 1;
        }
        if count != net.params.len() {
            return Err(crate::error::geometry(format!(
                "checkpoint holds {count} of {} parameters",
                net.params.len()
            )));
        }
        Ok((m[0] as u8, m[1], m[10], net))
    }
}

/// Inputs and targets flattened per example, planar.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn gather(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let x = idx.iter().flat_map(|&i| self.inputs[i].iter().copied()).collect();
        let t = idx.iter().flat_map(|&i| self.targets[i].iter().copied()).collect();
        (x, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Validation cadence in iterations; the last iteration is always validated.
    pub validate_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 64,
            iterations: 1000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            validate_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.iterations == 0 || self.validate_every == 0 {
            return Err(invalid("batch_size, iterations and validate_every must be positive"));
        }
        self.adam().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// One row of the loss history. `train_mse` is the minibatch loss before
/// the update; `val_mse` is measured after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
}

pub fn history_csv(history: &[LossRecord]) -> String {
    let mut s = String::from("iteration,train_mse,val_mse\n");
    for r in history {
        let val = r.val_mse.map(|v| format!("{v:.9e}")).unwrap_or_default();
        s.push_str(&format!("{},{:.9e},{}\n", r.iteration, r.train_mse, val));
    }
    s
}

#[derive(Debug, Clone)]
pub struct Trained<M> {
    pub model: M,
    pub history: Vec<LossRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError<M> {
    #[error(transparent)]
    Setup(Error),
    #[error("training diverged at iteration {iteration}: {cause}")]
    Diverged {
        iteration: usize,
        cause: Error,
        last_finite: Box<M>,
        history: Vec<LossRecord>,
    },
}

impl<M> TrainError<M> {
    pub(crate) fn map_model<N>(self, f: impl FnOnce(M) -> N) -> TrainError<N> {
        match self {
            TrainError::Setup(e) => TrainError::Setup(e),
            TrainError::Diverged {
                iteration,
                cause,
                last_finite,
                history,
            } => TrainError::Diverged {
                iteration,
                cause,
                last_finite: Box::new(f(*last_finite)),
                history,
            },
        }
    }
}

/// Mean over all examples of the per-example MSE.
pub fn evaluate_mse(net: &UNet, samples: &Samples, batch_size: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("cannot evaluate on an empty set"));
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let (x, t) = samples.gather(chunk);
        let y = net.run(&x, chunk.len())?;
        total += y.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / (samples.len() * net.geometry.output_len()) as f64)
}

/// Minibatch Adam on the MSE between network outputs and targets.
pub fn train_network(
    mut net: UNet,
    train: &Samples,
    val: Option<&Samples>,
    cfg: &TrainConfig,
) -> Result<Trained<UNet>, TrainError<UNet>> {
    cfg.validate().map_err(TrainError::Setup)?;
    if train.is_empty() {
        return Err(TrainError::Setup(invalid("training set is empty")));
    }
    let g = net.geometry;
    if train.inputs.iter().any(|x| x.len() != g.input_len())
        || train.targets.iter().any(|t| t.len() != g.output_len())
    {
        return Err(TrainError::Setup(geometry("sample sizes do not match the network")));
    }
    let mut state = AdamState::new(cfg.adam(), &net.params).map_err(TrainError::Setup)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_ba7c);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut pos = order.len();
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if pos == order.len() {
                order.shuffle(&mut rng);
                pos = 0;
            }
            batch.push(order[pos]);
            pos += 1;
        }
        let (x, t) = train.gather(&batch);
        let last = net.clone();
        let diverged = |cause: Error, history: Vec<LossRecord>, last: UNet| TrainError::Diverged {
            iteration: it,
            cause,
            last_finite: Box::new(last),
            history,
        };
        let loss = match net.loss_and_grad(x, t, batch.len()) {
            Ok(l) if l.is_finite() => l,
            Ok(_) => {
                let e = Error::NonFinite { op: "mse_loss", node: 0 };
                return Err(diverged(e, history, last));
            }
            Err(e @ Error::NonFinite { .. }) => return Err(diverged(e, history, last)),
            Err(e) => return Err(TrainError::Setup(e)),
        };
        adam_step(&mut net.params, &mut state).map_err(TrainError::Setup)?;
        for p in &mut net.params {
            p.round_to_f32();
        }
        if !net.is_finite() {
            let e = Error::NonFinite { op: "adam_step", node: 0 };
            return Err(diverged(e, history, last));
        }
        let val_mse = match val {
            Some(v) if !v.is_empty() && ((it + 1) % cfg.validate_every == 0 || it + 1 == cfg.iterations) => {
                Some(evaluate_mse(&net, v, cfg.batch_size).map_err(TrainError::Setup)?)
            }
            _ => None,
        };
        history.push(LossRecord {
            iteration: it + 1,
            train_mse: loss,
            val_mse,
        });
    }
    Ok(Trained {
        model: net,
        history,
    })
}

const KIND_DECODER: u8 = 0;
pub(crate) const KIND_PIXEL: u8 = 1;

/// The per-level reconstructor: predicts every base patch of `tr`, `bl`
/// and `br` from `tl`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderModel {
    pub level: usize,
    geometry: LevelGeometry,
    net: UNet,
}

impl DecoderModel {
    pub fn build(level: usize, geometry: LevelGeometry, trunk: TrunkConfig, seed: u64) -> Result<Self> {
        geometry.validate()?;
        if level == 0 {
            return Err(invalid("levels are numbered from 1"));
        }
        let ng = NetGeometry {
            in_channels: geometry.channels,
            in_extent: geometry.band_extent,
            out_extent: geometry.base_patch,
            out_channels: geometry.channels,
            heads: geometry.head_count(),
        };
        Ok(DecoderModel {
            level,
            geometry,
            net: UNet::new(ng, trunk, seed)?,
        })
    }

    pub fn head_count(&self) -> usize {
        self.geometry.head_count()
    }

    pub fn net(&self) -> &UNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut UNet {
        &mut self.net
    }

    pub fn zero_heads(&mut self) {
        self.net.zero_heads();
    }

    /// `tl` values grow by 2 per level; inputs are rescaled to pixel range.
    pub fn input_scale(&self) -> f64 {
        0.5f64.powi(self.level as i32)
    }

    fn encode_input(&self, tl: &Image) -> Result<Vec<f64>> {
        let g = self.geometry;
        if tl.dims() != (g.band_extent, g.band_extent, g.channels) {
            return Err(geometry(format!(
                "level {} model expects a {}x{}x{} tl, got {:?}",
                self.level,
                g.band_extent,
                g.band_extent,
                g.channels,
                tl.dims()
            )));
        }
        let s = self.input_scale();
        Ok(tl.to_planar().into_iter().map(|v| v * s).collect())
    }

    /// Patch grids per example, in input order.
    pub fn predict_patches(&self, tls: &[Image]) -> Result<Vec<[PatchGrid; 3]>> {
        if tls.is_empty() {
            return Ok(Vec::new());
        }
        let mut x = Vec::with_capacity(tls.len() * self.net.geometry.input_len());
        for tl in tls {
            x.extend(self.encode_input(tl)?);
        }
        let y = self.net.run(&x, tls.len())?;
        let g = self.geometry;
        let k = g.patches_per_band();
        let plen = g.channels * g.base_patch * g.base_patch;
        y.chunks_exact(self.net.geometry.output_len())
            .map(|ex| {
                let mut grids: Vec<PatchGrid> = (0..3).map(|_| PatchGrid::zeros(&g)).collect();
                for (h, patch) in ex.chunks_exact(plen).enumerate() {
                    grids[h / k].patches[h % k] =
                        Image::from_planar(g.base_patch, g.base_patch, g.channels, patch)?;
                }
                let br = grids.pop().unwrap();
                let bl = grids.pop().unwrap();
                let tr = grids.pop().unwrap();
                Ok([tr, bl, br])
            })
            .collect()
    }

    /// Network inputs and sliced targets for every tuple of `ds`.
    pub fn samples(&self, ds: &LevelDataset, fb: &FilterBank) -> Result<Samples> {
        if ds.level != self.level {
            return Err(geometry(format!(
                "dataset is for level {}, model for level {}",
                ds.level, self.level
            )));
        }
        let mut out = Samples::default();
        for q in &ds.examples {
            out.inputs.push(self.encode_input(&q.tl)?);
            let mut t = Vec::with_capacity(self.net.geometry.output_len());
            for band in q.details() {
                for p in slice_to_base_patches(band, self.geometry.base_patch, fb)?.patches {
                    t.extend(p.to_planar());
                }
            }
            out.targets.push(t);
        }
        Ok(out)
    }

    pub fn evaluate(&self, ds: &LevelDataset, fb: &FilterBank, batch_size: usize) -> Result<f64> {
        evaluate_mse(&self.net, &self.samples(ds, fb)?, batch_size)
    }

    pub fn save(&self) -> Result<Vec<u8>> {
        Ok(save_checkpoint(&self.net.to_entries(
            KIND_DECODER,
            self.level,
            self.geometry.base_patch,
        ))?)
    }

    /// Loads a decoder checkpoint into the slot for `level`.
    pub fn load(bytes: &[u8], level: usize) -> Result<Self> {
        let (kind, stored, base_patch, net) = UNet::from_entries(load_checkpoint(bytes)?)?;
        if kind != KIND_DECODER {
            return Err(geometry("checkpoint is not a band decoder".to_string()));
        }
        if stored != level {
            return Err(geometry(format!(
                "checkpoint is for level {stored}, requested level {level}"
            )));
        }
        let ng = net.geometry;
        let geometry = LevelGeometry::new(ng.in_extent, base_patch, ng.in_channels)?;
        if ng.heads != geometry.head_count() || ng.out_extent != base_patch {
            return Err(crate::error::geometry("checkpoint head layout is inconsistent"));
        }
        Ok(DecoderModel {
            level,
            geometry,
            net,
        })
    }
}

impl BandPredictor for DecoderModel {
    fn geometry(&self) -> LevelGeometry {
        self.geometry
    }

    fn predict(&self, tl: &Image) -> Result<[PatchGrid; 3]> {
        Ok(self.predict_patches(std::slice::from_ref(tl))?.pop().expect("one input"))
    }
}

/// Trains `model` on `train`, validating on `val` when given.
pub fn train_decoder(
    model: DecoderModel,
    train: &LevelDataset,
    val: Option<&LevelDataset>,
    cfg: &TrainConfig,
    fb: &FilterBank,
) -> Result<Trained<DecoderModel>, TrainError<DecoderModel>> {
    if train.is_empty() {
        return Err(TrainError::Setup(invalid("training dataset is empty")));
    }
    let ts = model.samples(train, fb).map_err(TrainError::Setup)?;
    let vs = val.map(|v| model.samples(v, fb)).transpose().map_err(TrainError::Setup)?;
    let DecoderModel { level, geometry, net } = model;
    let wrap = |net| DecoderModel { level, geometry, net };
    match train_network(net, &ts, vs.as_ref(), cfg) {
        Ok(t) => Ok(Trained {
            model: wrap(t.model),
            history: t.history,
        }),
        Err(e) => Err(e.map_model(wrap)),
    }
}
