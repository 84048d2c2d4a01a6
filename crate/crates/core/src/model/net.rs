use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{
    add_assign, attention, attention_backward, gelu, gelu_backward, layer_norm, layer_norm_backward, linear,
    linear_backward, LnCache,
};
use super::{EncodedPositions, ModelConfig, ModelError, Scalar};

/// A named, contiguous slice of the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockInfo {
    pub name: String,
    pub shape: [usize; 2],
    pub offset: usize,
}

impl BlockInfo {
    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Ordered parameter blocks. Gradients share the same layout.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamLayout {
    pub blocks: Vec<BlockInfo>,
    pub len: usize,
}

impl ParamLayout {
    pub fn block_of(&self, index: usize) -> Option<&BlockInfo> {
        self.blocks.iter().find(|b| index >= b.offset && index < b.offset + b.len())
    }
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Uniform(f64),
    /// `Uniform` with a different range for the first row.
    FirstRow(f64, f64),
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lin {
    w: usize,
    b: Option<usize>,
    din: usize,
    dout: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ln {
    g: usize,
    b: usize,
    d: usize,
}

/// Pre-norm attention block followed by a pre-norm MLP, both residual.
/// `ln_kv` is present for cross-attention.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    ln_q: Ln,
    ln_kv: Option<Ln>,
    wq: Lin,
    wk: Lin,
    wv: Lin,
    wo: Lin,
    ln_m: Ln,
    fc1: Lin,
    fc2: Lin,
}

#[derive(Debug, Clone, PartialEq)]
struct Arch {
    embed: Lin,
    latent: usize,
    enc_cross: Block,
    enc_self: Vec<Block>,
    q_embed: Lin,
    dec: Block,
    ln_out: Ln,
    head: Lin,
}

struct Builder {
    blocks: Vec<BlockInfo>,
    inits: Vec<Init>,
    len: usize,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        let offset = self.len;
        self.blocks.push(BlockInfo { name, shape: [rows, cols], offset });
        self.inits.push(init);
        self.len += rows * cols;
        offset
    }

    fn lin(&mut self, name: &str, din: usize, dout: usize, bias: bool) -> Lin {
        let w = self.add(alloc::format!("{name}.w"), din, dout, Init::Uniform(1.0 / (din as f64).sqrt()));
        let b = bias.then(|| self.add(alloc::format!("{name}.b"), 1, dout, Init::Zero));
        Lin { w, b, din, dout }
    }

    fn ln(&mut self, name: &str, d: usize) -> Ln {
        let g = self.add(alloc::format!("{name}.g"), 1, d, Init::One);
        let b = self.add(alloc::format!("{name}.b"), 1, d, Init::Zero);
        Ln { g, b, d }
    }

    fn block(&mut self, name: &str, d: usize, hidden: usize, cross: bool) -> Block {
        let ln_q = self.ln(&alloc::format!("{name}.ln_q"), d);
        let ln_kv = cross.then(|| self.ln(&alloc::format!("{name}.ln_kv"), d));
        Block {
            ln_q,
            ln_kv,
            wq: self.lin(&alloc::format!("{name}.wq"), d, d, true),
            wk: self.lin(&alloc::format!("{name}.wk"), d, d, false),
            wv: self.lin(&alloc::format!("{name}.wv"), d, d, true),
            wo: self.lin(&alloc::format!("{name}.wo"), d, d, true),
            ln_m: self.ln(&alloc::format!("{name}.ln_mlp"), d),
            fc1: self.lin(&alloc::format!("{name}.fc1"), d, hidden, true),
            fc2: self.lin(&alloc::format!("{name}.fc2"), hidden, d, true),
        }
    }
}

/// Init range of the reading's row in the token embedding.
const VALUE_INIT: f64 = 1.0;
/// Init range of the learned latent array.
const LATENT_INIT: f64 = 0.02;

fn build(cfg: &ModelConfig) -> (Arch, ParamLayout, Vec<Init>) {
    let p = cfg.encoding_dim();
    let d = cfg.latent_dim;
    let h = cfg.mlp_hidden;
    let mut b = Builder { blocks: Vec::new(), inits: Vec::new(), len: 0 };
    // the reading shares its token with ~200 positional features; with
    // fan-in init it barely moves the latent and training stalls on the
    // frame-averaged field
    let embed = b.lin("enc.embed", 1 + p, d, true);
    let k = b.inits.len() - 2;
    b.inits[k] = Init::FirstRow(VALUE_INIT, 1.0 / ((1 + p) as f64).sqrt());
    let latent = b.add("enc.latent".to_string(), cfg.latent_rows, d, Init::Uniform(LATENT_INIT));
    let enc_cross = b.block("enc.cross", d, h, true);
    let enc_self = (0..cfg.num_encoder_blocks).map(|i| b.block(&alloc::format!("enc.self{i}"), d, h, false)).collect();
    let q_embed = b.lin("dec.embed", p, d, true);
    let dec = b.block("dec.cross", d, h, true);
    let ln_out = b.ln("dec.ln_out", d);
    let head = b.lin("dec.head", d, 1, true);
    let arch = Arch { embed, latent, enc_cross, enc_self, q_embed, dec, ln_out, head };
    (arch, ParamLayout { blocks: b.blocks, len: b.len }, b.inits)
}

/// Latent array produced by the encoder, `rows × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<F> {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<F>,
}

/// Query-side decoder quantities that do not depend on the latent state.
#[derive(Debug, Clone)]
pub struct DecoderQueries<F> {
    n: usize,
    embedded: Vec<F>,
    q: Vec<F>,
}

impl<F> DecoderQueries<F> {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

struct BlockCache<F> {
    nq: usize,
    nk: usize,
    ln_q: LnCache<F>,
    xq: Vec<F>,
    ln_kv: Option<LnCache<F>>,
    /// normalized key/value input; `None` means it is `xq`
    xkv: Option<Vec<F>>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    probs: Vec<F>,
    att: Vec<F>,
    ln_m: LnCache<F>,
    xm: Vec<F>,
    h_pre: Vec<F>,
    h_act: Vec<F>,
}

struct EncoderCache<F> {
    tokens: Vec<F>,
    n_tokens: usize,
    cross: BlockCache<F>,
    selfs: Vec<BlockCache<F>>,
}

struct DecoderCache<F> {
    a_q: Vec<F>,
    block: BlockCache<F>,
    ln_out: LnCache<F>,
    yn: Vec<F>,
}

/// Network weights with their configuration and value scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    cfg: ModelConfig,
    layout: ParamLayout,
    arch: Arch,
    params: Vec<F>,
    /// Wave heights are divided by this before entering the network.
    scale: f64,
}

impl<F: Scalar> Model<F> {
    /// Fresh weights: uniform `±1/√fan_in` for projections, zero biases,
    /// unit LayerNorm gains, drawn from `cfg.seed`. The reading's row of the
    /// token embedding is `±1` and the latent array `±0.02`.
    pub fn new(cfg: ModelConfig, scale: f64) -> Result<Self, ModelError> {
        cfg.validate()?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(ModelError::BadConfig("scale must be positive and finite"));
        }
        let (arch, layout, inits) = build(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = vec![F::zero(); layout.len];
        for (blk, init) in layout.blocks.iter().zip(&inits) {
            let s = &mut params[blk.offset..blk.offset + blk.len()];
            match *init {
                Init::Zero => {}
                Init::One => s.iter_mut().for_each(|x| *x = F::one()),
                Init::Uniform(a) => {
                    for x in s.iter_mut() {
                        let u: f64 = rng.random();
                        *x = F::from_f64((2.0 * u - 1.0) * a).unwrap();
                    }
                }
                Init::FirstRow(a0, a) => {
                    let cols = blk.shape[1];
                    for (j, x) in s.iter_mut().enumerate() {
                        let u: f64 = rng.random();
                        let r = if j < cols { a0 } else { a };
                        *x = F::from_f64((2.0 * u - 1.0) * r).unwrap();
                    }
                }
            }
        }
        Ok(Self { cfg, layout, arch, params, scale })
    }

    /// Rebuilds a model from stored weights.
    pub fn from_params(cfg: ModelConfig, scale: f64, params: Vec<F>) -> Result<Self, ModelError> {
        let mut m = Self::new(cfg, scale)?;
        if params.len() != m.layout.len {
            return Err(ModelError::Shape("parameter count does not match config"));
        }
        m.params = params;
        Ok(m)
    }

    /// Same weights in another precision.
    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            cfg: self.cfg,
            layout: self.layout.clone(),
            arch: self.arch.clone(),
            params: self.params.iter().map(|x| G::from(*x).unwrap()).collect(),
            scale: self.scale,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn param_count(&self) -> usize {
        self.layout.len
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    fn w(&self, lin: &Lin) -> (&[F], Option<&[F]>) {
        let w = &self.params[lin.w..lin.w + lin.din * lin.dout];
        let b = lin.b.map(|o| &self.params[o..o + lin.dout]);
        (w, b)
    }

    fn lin_fwd(&self, lin: &Lin, x: &[F], n: usize) -> Vec<F> {
        let (w, b) = self.w(lin);
        linear(x, n, lin.din, w, b, lin.dout)
    }

    fn lin_bwd(&self, lin: &Lin, x: &[F], n: usize, dy: &[F], grads: &mut [F], want_dx: bool) -> Option<Vec<F>> {
        let (w, _) = self.w(lin);
        let (gw, gb) = split_grad(grads, lin);
        linear_backward(x, n, lin.din, w, lin.dout, dy, gw, gb, want_dx)
    }

    fn ln_fwd(&self, ln: &Ln, x: &[F], n: usize) -> (Vec<F>, LnCache<F>) {
        layer_norm(x, n, ln.d, &self.params[ln.g..ln.g + ln.d], &self.params[ln.b..ln.b + ln.d])
    }

    fn ln_bwd(&self, ln: &Ln, dy: &[F], n: usize, cache: &LnCache<F>, grads: &mut [F]) -> Vec<F> {
        let (lo, hi) = if ln.g < ln.b { (ln.g, ln.b) } else { (ln.b, ln.g) };
        let (a, b) = grads.split_at_mut(hi);
        let (glo, ghi) = (&mut a[lo..lo + ln.d], &mut b[..ln.d]);
        let (dg, db) = if ln.g < ln.b { (glo, ghi) } else { (ghi, glo) };
        layer_norm_backward(dy, n, ln.d, &self.params[ln.g..ln.g + ln.d], cache, dg, db)
    }

    fn block_fwd(&self, blk: &Block, x: &[F], nq: usize, kv: Option<(&[F], usize)>) -> (Vec<F>, BlockCache<F>) {
        let d = self.cfg.latent_dim;
        let (xq, ln_q) = self.ln_fwd(&blk.ln_q, x, nq);
        let (xkv, ln_kv, nk) = match (kv, &blk.ln_kv) {
            (Some((src, nk)), Some(ln)) => {
                let (y, c) = self.ln_fwd(ln, src, nk);
                (Some(y), Some(c), nk)
            }
            _ => (None, None, nq),
        };
        let kv_in = xkv.as_deref().unwrap_or(&xq);
        let q = self.lin_fwd(&blk.wq, &xq, nq);
        let k = self.lin_fwd(&blk.wk, kv_in, nk);
        let v = self.lin_fwd(&blk.wv, kv_in, nk);
        let (att, probs) = attention(&q, &k, &v, nq, nk, d, self.cfg.num_heads);
        let mut y = self.lin_fwd(&blk.wo, &att, nq);
        add_assign(&mut y, x);
        let (xm, ln_m, h_pre, h_act, out) = self.mlp_fwd(blk, &y, nq);
        (out, BlockCache { nq, nk, ln_q, xq, ln_kv, xkv, q, k, v, probs, att, ln_m, xm, h_pre, h_act })
    }

    #[allow(clippy::type_complexity)]
    fn mlp_fwd(&self, blk: &Block, y: &[F], n: usize) -> (Vec<F>, LnCache<F>, Vec<F>, Vec<F>, Vec<F>) {
        let (xm, ln_m) = self.ln_fwd(&blk.ln_m, y, n);
        let h_pre = self.lin_fwd(&blk.fc1, &xm, n);
        let h_act = gelu(&h_pre);
        let mut out = self.lin_fwd(&blk.fc2, &h_act, n);
        add_assign(&mut out, y);
        (xm, ln_m, h_pre, h_act, out)
    }

    /// Returns the gradient with respect to the block input and, for
    /// cross-attention, with respect to the raw key/value source.
    fn block_bwd(&self, blk: &Block, c: &BlockCache<F>, dout: &[F], grads: &mut [F]) -> (Vec<F>, Option<Vec<F>>) {
        let d = self.cfg.latent_dim;
        let (nq, nk) = (c.nq, c.nk);
        // MLP branch
        let dh_act = self.lin_bwd(&blk.fc2, &c.h_act, nq, dout, grads, true).unwrap();
        let dh_pre = gelu_backward(&c.h_pre, &dh_act);
        let dxm = self.lin_bwd(&blk.fc1, &c.xm, nq, &dh_pre, grads, true).unwrap();
        let mut dy = self.ln_bwd(&blk.ln_m, &dxm, nq, &c.ln_m, grads);
        add_assign(&mut dy, dout);
        // attention branch
        let datt = self.lin_bwd(&blk.wo, &c.att, nq, &dy, grads, true).unwrap();
        let (dq, dk, dv) = attention_backward(&datt, &c.q, &c.k, &c.v, &c.probs, nq, nk, d, self.cfg.num_heads);
        let kv_in = c.xkv.as_deref().unwrap_or(&c.xq);
        let mut dxkv = self.lin_bwd(&blk.wk, kv_in, nk, &dk, grads, true).unwrap();
        add_assign(&mut dxkv, &self.lin_bwd(&blk.wv, kv_in, nk, &dv, grads, true).unwrap());
        let mut dxq = self.lin_bwd(&blk.wq, &c.xq, nq, &dq, grads, true).unwrap();
        let dkv_src = match (&blk.ln_kv, &c.ln_kv) {
            (Some(ln), Some(cache)) => Some(self.ln_bwd(ln, &dxkv, nk, cache, grads)),
            _ => {
                add_assign(&mut dxq, &dxkv);
                None
            }
        };
        let mut dx = self.ln_bwd(&blk.ln_q, &dxq, nq, &c.ln_q, grads);
        add_assign(&mut dx, &dy);
        (dx, dkv_src)
    }

    fn tokens(&self, values: &[f64], a_s: &EncodedPositions<F>) -> Result<Vec<F>, ModelError> {
        let n = values.len();
        if n == 0 {
            return Err(ModelError::NoObservations);
        }
        if a_s.len() != n || a_s.dim != self.cfg.encoding_dim() {
            return Err(ModelError::Shape("sensor encodings do not match readings"));
        }
        let p = a_s.dim;
        let mut t = Vec::with_capacity(n * (1 + p));
        for (i, &s) in values.iter().enumerate() {
            t.push(F::from_f64(s / self.scale).unwrap());
            t.extend_from_slice(a_s.row(i));
        }
        Ok(t)
    }

    fn encode_cached(&self, values: &[f64], a_s: &EncodedPositions<F>) -> Result<(LatentState<F>, EncoderCache<F>), ModelError> {
        let arch = &self.arch;
        let tokens = self.tokens(values, a_s)?;
        let n = values.len();
        let rows = self.cfg.latent_rows;
        let d = self.cfg.latent_dim;
        let emb = self.lin_fwd(&arch.embed, &tokens, n);
        let latent = &self.params[arch.latent..arch.latent + rows * d];
        let (mut x, cross) = self.block_fwd(&arch.enc_cross, latent, rows, Some((&emb, n)));
        let mut selfs = Vec::with_capacity(arch.enc_self.len());
        for blk in &arch.enc_self {
            let (y, c) = self.block_fwd(blk, &x, rows, None);
            x = y;
            selfs.push(c);
        }
        Ok((LatentState { rows, dim: d, data: x }, EncoderCache { tokens, n_tokens: n, cross, selfs }))
    }

    /// Latent state from sensor readings in meters and their encoded positions.
    pub fn encode(&self, values: &[f64], a_s: &EncodedPositions<F>) -> Result<LatentState<F>, ModelError> {
        self.encode_cached(values, a_s).map(|(z, _)| z)
    }

    /// Query embeddings and query projections, reusable across frames.
    pub fn prepare_queries(&self, a_q: &EncodedPositions<F>) -> Result<DecoderQueries<F>, ModelError> {
        if a_q.dim != self.cfg.encoding_dim() {
            return Err(ModelError::Shape("query encoding width"));
        }
        let arch = &self.arch;
        let n = a_q.len();
        let embedded = self.lin_fwd(&arch.q_embed, &a_q.data, n);
        let (xq, _) = self.ln_fwd(&arch.dec.ln_q, &embedded, n);
        let q = self.lin_fwd(&arch.dec.wq, &xq, n);
        Ok(DecoderQueries { n, embedded, q })
    }

    /// Wave heights in meters at prepared queries.
    pub fn decode_prepared(&self, z: &LatentState<F>, dq: &DecoderQueries<F>) -> Result<Vec<f64>, ModelError> {
        self.check_latent(z)?;
        let arch = &self.arch;
        let blk = &arch.dec;
        let (nq, nk) = (dq.n, z.rows);
        let (xkv, _) = self.ln_fwd(blk.ln_kv.as_ref().unwrap(), &z.data, nk);
        let k = self.lin_fwd(&blk.wk, &xkv, nk);
        let v = self.lin_fwd(&blk.wv, &xkv, nk);
        let (att, _) = attention(&dq.q, &k, &v, nq, nk, self.cfg.latent_dim, self.cfg.num_heads);
        let mut y = self.lin_fwd(&blk.wo, &att, nq);
        add_assign(&mut y, &dq.embedded);
        let (_, _, _, _, out) = self.mlp_fwd(blk, &y, nq);
        let (yn, _) = self.ln_fwd(&arch.ln_out, &out, nq);
        let pred = self.lin_fwd(&arch.head, &yn, nq);
        Ok(pred.iter().map(|p| p.to_f64().unwrap() * self.scale).collect())
    }

    /// Wave heights in meters at the encoded query positions.
    pub fn decode(&self, z: &LatentState<F>, a_q: &EncodedPositions<F>) -> Result<Vec<f64>, ModelError> {
        let dq = self.prepare_queries(a_q)?;
        self.decode_prepared(z, &dq)
    }

    fn check_latent(&self, z: &LatentState<F>) -> Result<(), ModelError> {
        if z.rows != self.cfg.latent_rows || z.dim != self.cfg.latent_dim || z.data.len() != z.rows * z.dim {
            return Err(ModelError::Shape("latent state"));
        }
        Ok(())
    }

    fn decode_cached(&self, z: &LatentState<F>, a_q: &EncodedPositions<F>) -> (Vec<F>, DecoderCache<F>) {
        let arch = &self.arch;
        let n = a_q.len();
        let qe = self.lin_fwd(&arch.q_embed, &a_q.data, n);
        let (y, block) = self.block_fwd(&arch.dec, &qe, n, Some((&z.data, z.rows)));
        let (yn, ln_out) = self.ln_fwd(&arch.ln_out, &y, n);
        let pred = self.lin_fwd(&arch.head, &yn, n);
        (pred, DecoderCache { a_q: a_q.data.clone(), block, ln_out, yn })
    }

    /// Standardized predictions and the gradient of
    /// `Σ weight·(pred − target)²` over one frame, accumulated into `grads`.
    /// Targets are in meters. Returns the unweighted sum of squared errors.
    pub(crate) fn frame_loss_grad(
        &self,
        values: &[f64],
        a_s: &EncodedPositions<F>,
        a_q: &EncodedPositions<F>,
        targets: &[f64],
        weight: f64,
        grads: &mut [F],
    ) -> Result<f64, ModelError> {
        if a_q.len() != targets.len() || a_q.dim != self.cfg.encoding_dim() {
            return Err(ModelError::Shape("queries do not match targets"));
        }
        let arch = &self.arch;
        let (z, enc) = self.encode_cached(values, a_s)?;
        let (pred, dec) = self.decode_cached(&z, a_q);
        let m = targets.len();
        let mut sse = 0.0;
        let mut dpred = vec![F::zero(); m];
        for i in 0..m {
            let r = pred[i].to_f64().unwrap() - targets[i] / self.scale;
            sse += r * r;
            dpred[i] = F::from_f64(2.0 * weight * r).unwrap();
        }
        // decoder
        let dyn_ = self.lin_bwd(&arch.head, &dec.yn, m, &dpred, grads, true).unwrap();
        let dy = self.ln_bwd(&arch.ln_out, &dyn_, m, &dec.ln_out, grads);
        let (dqe, dz) = self.block_bwd(&arch.dec, &dec.block, &dy, grads);
        self.lin_bwd(&arch.q_embed, &dec.a_q, m, &dqe, grads, false);
        // encoder
        let mut dx = dz.unwrap();
        for (blk, c) in arch.enc_self.iter().zip(&enc.selfs).rev() {
            dx = self.block_bwd(blk, c, &dx, grads).0;
        }
        let (dlatent, demb) = self.block_bwd(&arch.enc_cross, &enc.cross, &dx, grads);
        let rows = self.cfg.latent_rows;
        add_assign(&mut grads[arch.latent..arch.latent + rows * self.cfg.latent_dim], &dlatent);
        self.lin_bwd(&arch.embed, &enc.tokens, enc.n_tokens, &demb.unwrap(), grads, false);
        Ok(sse)
    }

    /// Names the first parameter block holding a non-finite gradient.
    pub(crate) fn check_grads(&self, grads: &[F]) -> Result<(), ModelError> {
        for b in &self.layout.blocks {
            if grads[b.offset..b.offset + b.len()].iter().any(|g| !g.is_finite()) {
                return Err(ModelError::NonFiniteGradient(b.name.clone()));
            }
        }
        Ok(())
    }
}

fn split_grad<'a, F>(grads: &'a mut [F], lin: &Lin) -> (&'a mut [F], Option<&'a mut [F]>) {
    let wlen = lin.din * lin.dout;
    match lin.b {
        None => (&mut grads[lin.w..lin.w + wlen], None),
        Some(b) if b >= lin.w + wlen => {
            let (lo, hi) = grads.split_at_mut(b);
            (&mut lo[lin.w..lin.w + wlen], Some(&mut hi[..lin.dout]))
        }
        Some(b) => {
            let (lo, hi) = grads.split_at_mut(lin.w);
            (&mut hi[..wlen], Some(&mut lo[b..b + lin.dout]))
        }
    }
}
