//! Pre-norm encoder-decoder transformer with hand-written backward pass.
//!
//! Parameters live in one flat buffer described by a [`Layout`]; gradients
//! use the same layout. The token embedding is shared by the encoder input,
//! the decoder input and the output projection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::ops::{self, Scalar};
use crate::error::{Error, Result};
use crate::linearize::Marker;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in elements into the flat parameter buffer.
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Weight `[din, dout]` immediately followed by bias `[dout]`.
#[derive(Debug, Clone, Copy)]
struct Lin {
    w: usize,
    b: usize,
    din: usize,
    dout: usize,
}

/// Gain `[d]` immediately followed by shift `[d]`.
#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    d: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    q: Lin,
    k: Lin,
    v: Lin,
    o: Lin,
}

#[derive(Debug, Clone)]
struct EncLayer {
    ln1: Norm,
    attn: Attn,
    ln2: Norm,
    ff1: Lin,
    ff2: Lin,
}

#[derive(Debug, Clone)]
struct DecLayer {
    ln1: Norm,
    self_attn: Attn,
    ln2: Norm,
    cross: Attn,
    ln3: Norm,
    ff1: Lin,
    ff2: Lin,
}

#[derive(Debug, Clone)]
pub struct Layout {
    specs: Vec<ParamSpec>,
    embed: usize,
    enc: Vec<EncLayer>,
    enc_norm: Norm,
    dec: Vec<DecLayer>,
    dec_norm: Norm,
    out_bias: usize,
    len: usize,
    vocab: usize,
    dim: usize,
    heads: usize,
}

struct LayoutBuilder {
    specs: Vec<ParamSpec>,
    len: usize,
}

impl LayoutBuilder {
    fn push(&mut self, name: String, shape: Vec<usize>) -> usize {
        let offset = self.len;
        self.len += shape.iter().product::<usize>();
        self.specs.push(ParamSpec { name, shape, offset });
        offset
    }

    fn lin(&mut self, name: &str, din: usize, dout: usize) -> Lin {
        let w = self.push(format!("{name}.weight"), vec![din, dout]);
        let b = self.push(format!("{name}.bias"), vec![dout]);
        Lin { w, b, din, dout }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        let g = self.push(format!("{name}.gain"), vec![d]);
        self.push(format!("{name}.shift"), vec![d]);
        Norm { g, d }
    }

    fn attn(&mut self, name: &str, d: usize) -> Attn {
        Attn {
            q: self.lin(&format!("{name}.query"), d, d),
            k: self.lin(&format!("{name}.key"), d, d),
            v: self.lin(&format!("{name}.value"), d, d),
            o: self.lin(&format!("{name}.output"), d, d),
        }
    }
}

impl Layout {
    pub fn new(config: &ModelConfig, vocab: usize) -> Self {
        let d = config.model_dim;
        let f = config.ff_dim;
        let mut b = LayoutBuilder {
            specs: Vec::new(),
            len: 0,
        };
        let embed = b.push("embedding".into(), vec![vocab, d]);
        let enc = (0..config.encoder_layers)
            .map(|l| EncLayer {
                ln1: b.norm(&format!("encoder.{l}.attn_norm"), d),
                attn: b.attn(&format!("encoder.{l}.self_attn"), d),
                ln2: b.norm(&format!("encoder.{l}.ff_norm"), d),
                ff1: b.lin(&format!("encoder.{l}.ff_in"), d, f),
                ff2: b.lin(&format!("encoder.{l}.ff_out"), f, d),
            })
            .collect();
        let enc_norm = b.norm("encoder.final_norm", d);
        let dec = (0..config.decoder_layers)
            .map(|l| DecLayer {
                ln1: b.norm(&format!("decoder.{l}.self_attn_norm"), d),
                self_attn: b.attn(&format!("decoder.{l}.self_attn"), d),
                ln2: b.norm(&format!("decoder.{l}.cross_attn_norm"), d),
                cross: b.attn(&format!("decoder.{l}.cross_attn"), d),
                ln3: b.norm(&format!("decoder.{l}.ff_norm"), d),
                ff1: b.lin(&format!("decoder.{l}.ff_in"), d, f),
                ff2: b.lin(&format!("decoder.{l}.ff_out"), f, d),
            })
            .collect();
        let dec_norm = b.norm("decoder.final_norm", d);
        let out_bias = b.push("output.bias".into(), vec![vocab]);
        Layout {
            specs: b.specs,
            embed,
            enc,
            enc_norm,
            dec,
            dec_norm,
            out_bias,
            len: b.len,
            vocab,
            dim: d,
            heads: config.n_heads,
        }
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl Lin {
    fn forward<F: Scalar>(&self, p: &[F], x: &[F], n: usize) -> Vec<F> {
        ops::linear(
            x,
            &p[self.w..self.w + self.din * self.dout],
            &p[self.b..self.b + self.dout],
            n,
            self.din,
            self.dout,
        )
    }

    fn backward<F: Scalar>(&self, p: &[F], g: &mut [F], x: &[F], dy: &[F], n: usize) -> Vec<F> {
        let wlen = self.din * self.dout;
        let (dw, db) = g[self.w..self.b + self.dout].split_at_mut(wlen);
        ops::linear_backward(x, dy, &p[self.w..self.w + wlen], n, self.din, self.dout, dw, db)
    }
}

struct NormTrace<F> {
    xhat: Vec<F>,
    rstd: Vec<F>,
}

impl Norm {
    fn forward<F: Scalar>(&self, p: &[F], x: &[F], n: usize) -> (Vec<F>, NormTrace<F>) {
        let d = self.d;
        let (y, xhat, rstd) = ops::layer_norm(x, &p[self.g..self.g + d], &p[self.g + d..self.g + 2 * d], n, d);
        (y, NormTrace { xhat, rstd })
    }

    fn backward<F: Scalar>(&self, p: &[F], g: &mut [F], dy: &[F], t: &NormTrace<F>, n: usize) -> Vec<F> {
        let d = self.d;
        let (dg, db) = g[self.g..self.g + 2 * d].split_at_mut(d);
        ops::layer_norm_backward(dy, &t.xhat, &t.rstd, &p[self.g..self.g + d], n, d, dg, db)
    }
}

struct AttnTrace<F> {
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// `[heads, lq, lk]`; masked entries are zero.
    p: Vec<F>,
    o: Vec<F>,
    lq: usize,
    lk: usize,
    causal: bool,
}

fn attention_core<F: Scalar>(
    q: &[F],
    k: &[F],
    v: &[F],
    lq: usize,
    lk: usize,
    d: usize,
    heads: usize,
    causal: bool,
    q_offset: usize,
) -> (Vec<F>, Vec<F>) {
    let dh = d / heads;
    let scale = F::one() / F::of(dh as f64).sqrt();
    let mut p = vec![F::zero(); heads * lq * lk];
    let mut o = vec![F::zero(); lq * d];
    for h in 0..heads {
        let c0 = h * dh;
        for i in 0..lq {
            let visible = if causal { (q_offset + i + 1).min(lk) } else { lk };
            let row = &mut p[(h * lq + i) * lk..(h * lq + i) * lk + visible];
            let qi = &q[i * d + c0..i * d + c0 + dh];
            for (j, s) in row.iter_mut().enumerate() {
                *s = ops::dot(qi, &k[j * d + c0..j * d + c0 + dh]) * scale;
            }
            ops::softmax_in_place(row);
            let oi = &mut o[i * d + c0..i * d + c0 + dh];
            for (j, &pij) in row.iter().enumerate() {
                let vj = &v[j * d + c0..j * d + c0 + dh];
                for (oc, &vc) in oi.iter_mut().zip(vj) {
                    *oc += pij * vc;
                }
            }
        }
    }
    (p, o)
}

impl Attn {
    fn forward<F: Scalar>(
        &self,
        p: &[F],
        xq: &[F],
        lq: usize,
        xkv: &[F],
        lk: usize,
        heads: usize,
        causal: bool,
    ) -> (Vec<F>, AttnTrace<F>) {
        let d = self.q.dout;
        let q = self.q.forward(p, xq, lq);
        let k = self.k.forward(p, xkv, lk);
        let v = self.v.forward(p, xkv, lk);
        let (probs, o) = attention_core(&q, &k, &v, lq, lk, d, heads, causal, 0);
        let out = self.o.forward(p, &o, lq);
        (
            out,
            AttnTrace {
                q,
                k,
                v,
                p: probs,
                o,
                lq,
                lk,
                causal,
            },
        )
    }

    /// Returns `(dxq, dxkv)`.
    fn backward<F: Scalar>(
        &self,
        p: &[F],
        g: &mut [F],
        xq: &[F],
        xkv: &[F],
        t: &AttnTrace<F>,
        dout: &[F],
        heads: usize,
    ) -> (Vec<F>, Vec<F>) {
        let d = self.q.dout;
        let dh = d / heads;
        let (lq, lk) = (t.lq, t.lk);
        let scale = F::one() / F::of(dh as f64).sqrt();
        let d_o = self.o.backward(p, g, &t.o, dout, lq);
        let mut dq = vec![F::zero(); lq * d];
        let mut dk = vec![F::zero(); lk * d];
        let mut dv = vec![F::zero(); lk * d];
        let mut dp = vec![F::zero(); lk];
        for h in 0..heads {
            let c0 = h * dh;
            for i in 0..lq {
                let visible = if t.causal { (i + 1).min(lk) } else { lk };
                let prow = &t.p[(h * lq + i) * lk..(h * lq + i) * lk + visible];
                let doi = &d_o[i * d + c0..i * d + c0 + dh];
                let mut rowdot = F::zero();
                for j in 0..visible {
                    let vj = &t.v[j * d + c0..j * d + c0 + dh];
                    dp[j] = ops::dot(doi, vj);
                    rowdot += dp[j] * prow[j];
                    let dvj = &mut dv[j * d + c0..j * d + c0 + dh];
                    for (a, &b) in dvj.iter_mut().zip(doi) {
                        *a += prow[j] * b;
                    }
                }
                let qi = &t.q[i * d + c0..i * d + c0 + dh];
                for j in 0..visible {
                    let ds = prow[j] * (dp[j] - rowdot) * scale;
                    if ds == F::zero() {
                        continue;
                    }
                    let kj = &t.k[j * d + c0..j * d + c0 + dh];
                    let dqi = &mut dq[i * d + c0..i * d + c0 + dh];
                    for (a, &b) in dqi.iter_mut().zip(kj) {
                        *a += ds * b;
                    }
                    let dkj = &mut dk[j * d + c0..j * d + c0 + dh];
                    for (a, &b) in dkj.iter_mut().zip(qi) {
                        *a += ds * b;
                    }
                }
            }
        }
        let dxq = self.q.backward(p, g, xq, &dq, lq);
        let mut dxkv = self.k.backward(p, g, xkv, &dk, lk);
        let dxv = self.v.backward(p, g, xkv, &dv, lk);
        add_into(&mut dxkv, &dxv);
        (dxq, dxkv)
    }
}

fn add_into<F: Scalar>(acc: &mut [F], x: &[F]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

fn mul_into<F: Scalar>(acc: &mut [F], mask: &Option<Vec<F>>) {
    if let Some(m) = mask {
        for (a, &b) in acc.iter_mut().zip(m) {
            *a *= b;
        }
    }
}

fn dropout_mask<F: Scalar>(rng: &mut Option<&mut ChaCha8Rng>, rate: f64, n: usize) -> Option<Vec<F>> {
    let rng = rng.as_mut()?;
    if rate <= 0.0 {
        return None;
    }
    let keep = F::of(1.0 / (1.0 - rate));
    Some(
        (0..n)
            .map(|_| if rng.random::<f64>() < rate { F::zero() } else { keep })
            .collect(),
    )
}

struct EncTrace<F> {
    ln1: NormTrace<F>,
    a: Vec<F>,
    attn: AttnTrace<F>,
    drop1: Option<Vec<F>>,
    ln2: NormTrace<F>,
    b: Vec<F>,
    h1: Vec<F>,
    act: Vec<F>,
    drop2: Option<Vec<F>>,
}

struct DecTrace<F> {
    ln1: NormTrace<F>,
    a: Vec<F>,
    self_attn: AttnTrace<F>,
    drop1: Option<Vec<F>>,
    ln2: NormTrace<F>,
    c: Vec<F>,
    cross: AttnTrace<F>,
    drop2: Option<Vec<F>>,
    ln3: NormTrace<F>,
    e: Vec<F>,
    h1: Vec<F>,
    act: Vec<F>,
    drop3: Option<Vec<F>>,
}

/// Everything the backward pass needs from one forward pass.
struct Trace<F> {
    src: Vec<u32>,
    dec_in: Vec<u32>,
    enc: Vec<EncTrace<F>>,
    enc_norm: NormTrace<F>,
    enc_out: Vec<F>,
    dec: Vec<DecTrace<F>>,
    dec_norm: NormTrace<F>,
    hidden: Vec<F>,
}

/// A transformer instance: configuration, layout and parameters.
#[derive(Debug, Clone)]
pub struct Model<F> {
    config: ModelConfig,
    layout: Layout,
    params: Vec<F>,
}

/// Summed token cross-entropy of one example and the number of scored tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSum<F> {
    pub total: F,
    pub tokens: usize,
}

impl<F: Scalar> Model<F> {
    /// Weights uniform in `±1/sqrt(fan_in)`; biases and shifts zero; gains one.
    pub fn init(config: &ModelConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config, vocab_size);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![F::zero(); layout.len];
        for spec in &layout.specs {
            let slot = &mut params[spec.offset..spec.offset + spec.len()];
            if spec.name.ends_with(".gain") {
                slot.fill(F::one());
            } else if spec.shape.len() == 2 {
                let fan_in = if spec.name == "embedding" { spec.shape[1] } else { spec.shape[0] };
                let bound = 1.0 / (fan_in as f64).sqrt();
                for v in slot.iter_mut() {
                    *v = F::of(rng.random_range(-bound..bound));
                }
            }
        }
        Ok(Model {
            config: config.clone(),
            layout,
            params,
        })
    }

    pub fn from_params(config: &ModelConfig, vocab_size: usize, params: Vec<F>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config, vocab_size);
        if params.len() != layout.len {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                layout.len,
                params.len()
            )));
        }
        Ok(Model {
            config: config.clone(),
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn vocab_size(&self) -> usize {
        self.layout.vocab
    }

    pub fn cast<G: Scalar>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|v| G::of(v.to_f64().unwrap())).collect(),
        }
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        match ids.iter().find(|&&id| id as usize >= self.layout.vocab) {
            Some(id) => Err(Error::Shape(format!("token id {id} outside vocabulary of {}", self.layout.vocab))),
            None => Ok(()),
        }
    }

    fn embed(&self, ids: &[u32]) -> Vec<F> {
        let d = self.layout.dim;
        let scale = F::of((d as f64).sqrt());
        let mut x = vec![F::zero(); ids.len() * d];
        for (i, &id) in ids.iter().enumerate() {
            let row = &mut x[i * d..(i + 1) * d];
            let e = &self.params[self.layout.embed + id as usize * d..self.layout.embed + (id as usize + 1) * d];
            for (r, &v) in row.iter_mut().zip(e) {
                *r = v * scale;
            }
            ops::add_position(row, i);
        }
        x
    }

    fn embed_backward(&self, ids: &[u32], dx: &[F], g: &mut [F]) {
        let d = self.layout.dim;
        let scale = F::of((d as f64).sqrt());
        for (i, &id) in ids.iter().enumerate() {
            let off = self.layout.embed + id as usize * d;
            for (gv, &dv) in g[off..off + d].iter_mut().zip(&dx[i * d..(i + 1) * d]) {
                *gv += dv * scale;
            }
        }
    }

    fn forward_trace(&self, src: &[u32], dec_in: &[u32], mut rng: Option<&mut ChaCha8Rng>) -> Trace<F> {
        let p = &self.params;
        let heads = self.layout.heads;
        let rate = self.config.dropout;
        let ls = src.len();
        let lt = dec_in.len();

        let mut x = self.embed(src);
        let mut enc = Vec::with_capacity(self.layout.enc.len());
        for layer in &self.layout.enc {
            let (a, ln1) = layer.ln1.forward(p, &x, ls);
            let (mut att, attn) = layer.attn.forward(p, &a, ls, &a, ls, heads, false);
            let drop1 = dropout_mask(&mut rng, rate, att.len());
            mul_into(&mut att, &drop1);
            add_into(&mut x, &att);
            let (b, ln2) = layer.ln2.forward(p, &x, ls);
            let h1 = layer.ff1.forward(p, &b, ls);
            let act = ops::gelu(&h1);
            let mut f = layer.ff2.forward(p, &act, ls);
            let drop2 = dropout_mask(&mut rng, rate, f.len());
            mul_into(&mut f, &drop2);
            add_into(&mut x, &f);
            enc.push(EncTrace {
                ln1,
                a,
                attn,
                drop1,
                ln2,
                b,
                h1,
                act,
                drop2,
            });
        }
        let (enc_out, enc_norm) = self.layout.enc_norm.forward(p, &x, ls);

        let mut y = self.embed(dec_in);
        let mut dec = Vec::with_capacity(self.layout.dec.len());
        for layer in &self.layout.dec {
            let (a, ln1) = layer.ln1.forward(p, &y, lt);
            let (mut att, self_attn) = layer.self_attn.forward(p, &a, lt, &a, lt, heads, true);
            let drop1 = dropout_mask(&mut rng, rate, att.len());
            mul_into(&mut att, &drop1);
            add_into(&mut y, &att);
            let (c, ln2) = layer.ln2.forward(p, &y, lt);
            let (mut crs, cross) = layer.cross.forward(p, &c, lt, &enc_out, ls, heads, false);
            let drop2 = dropout_mask(&mut rng, rate, crs.len());
            mul_into(&mut crs, &drop2);
            add_into(&mut y, &crs);
            let (e, ln3) = layer.ln3.forward(p, &y, lt);
            let h1 = layer.ff1.forward(p, &e, lt);
            let act = ops::gelu(&h1);
            let mut f = layer.ff2.forward(p, &act, lt);
            let drop3 = dropout_mask(&mut rng, rate, f.len());
            mul_into(&mut f, &drop3);
            add_into(&mut y, &f);
            dec.push(DecTrace {
                ln1,
                a,
                self_attn,
                drop1,
                ln2,
                c,
                cross,
                drop2,
                ln3,
                e,
                h1,
                act,
                drop3,
            });
        }
        let (hidden, dec_norm) = self.layout.dec_norm.forward(p, &y, lt);
        Trace {
            src: src.to_vec(),
            dec_in: dec_in.to_vec(),
            enc,
            enc_norm,
            enc_out,
            dec,
            dec_norm,
            hidden,
        }
    }

    /// Output logits for one hidden row.
    fn project(&self, h: &[F], out: &mut [F]) {
        let d = self.layout.dim;
        let e = &self.params[self.layout.embed..self.layout.embed + self.layout.vocab * d];
        let bias = &self.params[self.layout.out_bias..self.layout.out_bias + self.layout.vocab];
        for (v, o) in out.iter_mut().enumerate() {
            *o = ops::dot(h, &e[v * d..(v + 1) * d]) + bias[v];
        }
    }

    /// Evaluation-mode logits `[dec_in.len(), vocab]` for one example.
    pub fn logits(&self, src: &[u32], dec_in: &[u32]) -> Result<Vec<F>> {
        if src.is_empty() || dec_in.is_empty() {
            return Err(Error::Shape("source and decoder input must be non-empty".into()));
        }
        self.check_ids(src)?;
        self.check_ids(dec_in)?;
        let trace = self.forward_trace(src, dec_in, None);
        Ok(self.project_all(&trace.hidden, dec_in.len()))
    }

    fn project_all(&self, hidden: &[F], lt: usize) -> Vec<F> {
        let d = self.layout.dim;
        let v = self.layout.vocab;
        let mut out = vec![F::zero(); lt * v];
        for i in 0..lt {
            self.project(&hidden[i * d..(i + 1) * d], &mut out[i * v..(i + 1) * v]);
        }
        out
    }

    /// Summed cross-entropy over positions whose label is not PAD.
    pub fn loss(&self, src: &[u32], dec_in: &[u32], labels: &[u32]) -> Result<LossSum<F>> {
        self.validate_example(src, dec_in, labels)?;
        let trace = self.forward_trace(src, dec_in, None);
        Ok(self.loss_from_trace(&trace, labels, None))
    }

    /// Loss and its gradient with respect to every parameter. `rng` enables dropout.
    pub fn loss_and_grad(
        &self,
        src: &[u32],
        dec_in: &[u32],
        labels: &[u32],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(LossSum<F>, Vec<F>)> {
        self.validate_example(src, dec_in, labels)?;
        let trace = self.forward_trace(src, dec_in, rng);
        let mut grad = vec![F::zero(); self.layout.len];
        let loss = self.loss_from_trace(&trace, labels, Some(&mut grad));
        Ok((loss, grad))
    }

    fn validate_example(&self, src: &[u32], dec_in: &[u32], labels: &[u32]) -> Result<()> {
        if src.is_empty() || dec_in.is_empty() {
            return Err(Error::Shape("source and decoder input must be non-empty".into()));
        }
        if labels.len() != dec_in.len() {
            return Err(Error::Shape(format!(
                "{} labels for {} decoder positions",
                labels.len(),
                dec_in.len()
            )));
        }
        self.check_ids(src)?;
        self.check_ids(dec_in)?;
        self.check_ids(labels)
    }

    fn loss_from_trace(&self, trace: &Trace<F>, labels: &[u32], grad: Option<&mut Vec<F>>) -> LossSum<F> {
        let d = self.layout.dim;
        let vsize = self.layout.vocab;
        let lt = labels.len();
        let mut total = F::zero();
        let mut tokens = 0;
        let mut dhidden = grad.as_ref().map(|_| vec![F::zero(); lt * d]);
        let mut dlogits_rows: Vec<(usize, Vec<F>)> = Vec::new();
        let mut row = vec![F::zero(); vsize];
        for (i, &label) in labels.iter().enumerate() {
            if label == Marker::Pad.id() {
                continue;
            }
            self.project(&trace.hidden[i * d..(i + 1) * d], &mut row);
            let lse = ops::log_sum_exp(&row);
            total += lse - row[label as usize];
            tokens += 1;
            if dhidden.is_some() {
                let mut probs = row.clone();
                ops::softmax_in_place(&mut probs);
                probs[label as usize] -= F::one();
                dlogits_rows.push((i, probs));
            }
        }
        let (Some(grad), Some(mut dh)) = (grad, dhidden.take()) else {
            return LossSum { total, tokens };
        };
        let embed = self.layout.embed;
        for (i, dl) in &dlogits_rows {
            let h = &trace.hidden[i * d..(i + 1) * d];
            let dhi = &mut dh[i * d..(i + 1) * d];
            for (v, &g) in dl.iter().enumerate() {
                grad[self.layout.out_bias + v] += g;
                let e = &self.params[embed + v * d..embed + (v + 1) * d];
                for c in 0..d {
                    dhi[c] += g * e[c];
                }
                let ge = &mut grad[embed + v * d..embed + (v + 1) * d];
                for c in 0..d {
                    ge[c] += g * h[c];
                }
            }
        }
        self.backward(trace, &dh, grad);
        LossSum { total, tokens }
    }

    fn backward(&self, t: &Trace<F>, dhidden: &[F], g: &mut [F]) {
        let p = &self.params;
        let heads = self.layout.heads;
        let ls = t.src.len();
        let lt = t.dec_in.len();
        let d = self.layout.dim;

        let mut dy = self.layout.dec_norm.backward(p, g, dhidden, &t.dec_norm, lt);
        let mut denc = vec![F::zero(); ls * d];
        for (layer, tr) in self.layout.dec.iter().zip(&t.dec).rev() {
            // feed-forward branch
            let mut df = dy.clone();
            mul_into(&mut df, &tr.drop3);
            let dact = layer.ff2.backward(p, g, &tr.act, &df, lt);
            let dh1 = ops::gelu_backward(&tr.h1, &dact);
            let de = layer.ff1.backward(p, g, &tr.e, &dh1, lt);
            let dx = layer.ln3.backward(p, g, &de, &tr.ln3, lt);
            add_into(&mut dy, &dx);
            // cross-attention branch
            let mut dc_out = dy.clone();
            mul_into(&mut dc_out, &tr.drop2);
            let (dc, dkv) = layer.cross.backward(p, g, &tr.c, &t.enc_out, &tr.cross, &dc_out, heads);
            add_into(&mut denc, &dkv);
            let dx = layer.ln2.backward(p, g, &dc, &tr.ln2, lt);
            add_into(&mut dy, &dx);
            // self-attention branch
            let mut da_out = dy.clone();
            mul_into(&mut da_out, &tr.drop1);
            let (daq, dakv) = layer.self_attn.backward(p, g, &tr.a, &tr.a, &tr.self_attn, &da_out, heads);
            let mut da = daq;
            add_into(&mut da, &dakv);
            let dx = layer.ln1.backward(p, g, &da, &tr.ln1, lt);
            add_into(&mut dy, &dx);
        }
        self.embed_backward(&t.dec_in, &dy, g);

        let mut dx = self.layout.enc_norm.backward(p, g, &denc, &t.enc_norm, ls);
        for (layer, tr) in self.layout.enc.iter().zip(&t.enc).rev() {
            let mut df = dx.clone();
            mul_into(&mut df, &tr.drop2);
            let dact = layer.ff2.backward(p, g, &tr.act, &df, ls);
            let dh1 = ops::gelu_backward(&tr.h1, &dact);
            let db = layer.ff1.backward(p, g, &tr.b, &dh1, ls);
            let dres = layer.ln2.backward(p, g, &db, &tr.ln2, ls);
            add_into(&mut dx, &dres);
            let mut da_out = dx.clone();
            mul_into(&mut da_out, &tr.drop1);
            let (daq, dakv) = layer.attn.backward(p, g, &tr.a, &tr.a, &tr.attn, &da_out, heads);
            let mut da = daq;
            add_into(&mut da, &dakv);
            let dres = layer.ln1.backward(p, g, &da, &tr.ln1, ls);
            add_into(&mut dx, &dres);
        }
        self.embed_backward(&t.src, &dx, g);
    }

    /// Runs the encoder and prepares cached cross-attention keys and values
    /// for step-by-step decoding.
    pub fn start_decoding(&self, src: &[u32]) -> Result<IncrementalDecoder<'_, F>> {
        if src.is_empty() {
            return Err(Error::Shape("source must be non-empty".into()));
        }
        self.check_ids(src)?;
        let p = &self.params;
        let ls = src.len();
        let mut x = self.embed(src);
        for layer in &self.layout.enc {
            let (a, _) = layer.ln1.forward(p, &x, ls);
            let (att, _) = layer.attn.forward(p, &a, ls, &a, ls, self.layout.heads, false);
            add_into(&mut x, &att);
            let (b, _) = layer.ln2.forward(p, &x, ls);
            let act = ops::gelu(&layer.ff1.forward(p, &b, ls));
            add_into(&mut x, &layer.ff2.forward(p, &act, ls));
        }
        let (enc_out, _) = self.layout.enc_norm.forward(p, &x, ls);
        let cross = self
            .layout
            .dec
            .iter()
            .map(|layer| (layer.cross.k.forward(p, &enc_out, ls), layer.cross.v.forward(p, &enc_out, ls)))
            .collect();
        Ok(IncrementalDecoder {
            model: self,
            src_len: ls,
            cross,
            self_kv: vec![(Vec::new(), Vec::new()); self.layout.dec.len()],
            pos: 0,
        })
    }
}

/// Decoder state with per-layer key/value caches.
pub struct IncrementalDecoder<'m, F> {
    model: &'m Model<F>,
    src_len: usize,
    cross: Vec<(Vec<F>, Vec<F>)>,
    self_kv: Vec<(Vec<F>, Vec<F>)>,
    pos: usize,
}

impl<F: Scalar> IncrementalDecoder<'_, F> {
    pub fn position(&self) -> usize {
        self.pos
    }

    /// Feeds the token at the next position and returns its output logits.
    pub fn step(&mut self, token: u32) -> Result<Vec<F>> {
        let m = self.model;
        m.check_ids(&[token])?;
        let p = &m.params;
        let d = m.layout.dim;
        let heads = m.layout.heads;
        let mut y = {
            let scale = F::of((d as f64).sqrt());
            let e = &p[m.layout.embed + token as usize * d..m.layout.embed + (token as usize + 1) * d];
            let mut row: Vec<F> = e.iter().map(|&v| v * scale).collect();
            ops::add_position(&mut row, self.pos);
            row
        };
        for (li, layer) in m.layout.dec.iter().enumerate() {
            let (a, _) = layer.ln1.forward(p, &y, 1);
            let q = layer.self_attn.q.forward(p, &a, 1);
            let (kc, vc) = &mut self.self_kv[li];
            kc.extend(layer.self_attn.k.forward(p, &a, 1));
            vc.extend(layer.self_attn.v.forward(p, &a, 1));
            let lk = self.pos + 1;
            let (_, o) = attention_core(&q, kc, vc, 1, lk, d, heads, true, self.pos);
            add_into(&mut y, &layer.self_attn.o.forward(p, &o, 1));

            let (c, _) = layer.ln2.forward(p, &y, 1);
            let q = layer.cross.q.forward(p, &c, 1);
            let (ck, cv) = &self.cross[li];
            let (_, o) = attention_core(&q, ck, cv, 1, self.src_len, d, heads, false, 0);
            add_into(&mut y, &layer.cross.o.forward(p, &o, 1));

            let (e, _) = layer.ln3.forward(p, &y, 1);
            let act = ops::gelu(&layer.ff1.forward(p, &e, 1));
            add_into(&mut y, &layer.ff2.forward(p, &act, 1));
        }
        let (h, _) = m.layout.dec_norm.forward(p, &y, 1);
        let mut logits = vec![F::zero(); m.layout.vocab];
        m.project(&h, &mut logits);
        self.pos += 1;
        Ok(logits)
    }
}
