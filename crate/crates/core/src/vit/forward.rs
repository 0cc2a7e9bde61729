use super::config::VitConfig;
use super::data::Image;
use super::model::{BlockOffsets, VitModel};
use crate::error::{Error, Result};

pub const LN_EPS: f64 = 1e-6;

/// Output of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub cls: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Splits an image into row-major, non-overlapping `P x P` patches, each flattened
/// in (row, column, channel) order.
pub fn patchify(image: &Image, patch: usize) -> Result<Vec<Vec<f64>>> {
    if patch == 0 || !image.height.is_multiple_of(patch) || !image.width.is_multiple_of(patch) {
        return Err(Error::config(format!(
            "image {}x{} is not divisible by patch size {patch}",
            image.height, image.width
        )));
    }
    let c = image.channels;
    let mut out = Vec::with_capacity((image.height / patch) * (image.width / patch));
    for py in (0..image.height).step_by(patch) {
        for px in (0..image.width).step_by(patch) {
            let mut p = Vec::with_capacity(patch * patch * c);
            for y in py..py + patch {
                let row = (y * image.width + px) * c;
                p.extend_from_slice(&image.pixels[row..row + patch * c]);
            }
            out.push(p);
        }
    }
    Ok(out)
}

pub(crate) struct LnTrace {
    xhat: Vec<f64>,
    rstd: Vec<f64>,
}

pub(crate) struct BlockTrace {
    ln1: LnTrace,
    a1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    attn: Vec<f64>,
    ctx: Vec<f64>,
    ln2: LnTrace,
    a2: Vec<f64>,
    h_pre: Vec<f64>,
    h_act: Vec<f64>,
}

/// Intermediate activations kept for the backward pass.
pub struct Trace {
    patches: Vec<f64>,
    blocks: Vec<BlockTrace>,
    cls_ln: LnTrace,
    pub output: ForwardOutput,
}

impl Trace {
    /// Attention probabilities of `layer`, laid out `[head][query][key]`.
    pub fn attention(&self, layer: usize) -> &[f64] {
        &self.blocks[layer].attn
    }
}

/// `out[t][o] = b[o] + sum_i x[t][i] * w[o][i]`.
pub(crate) fn linear(x: &[f64], in_dim: usize, w: &[f64], b: Option<&[f64]>, out_dim: usize) -> Vec<f64> {
    let rows = x.len() / in_dim;
    let mut out = vec![0.0; rows * out_dim];
    for (xr, or) in x.chunks_exact(in_dim).zip(out.chunks_exact_mut(out_dim)) {
        for (o, (wr, y)) in w.chunks_exact(in_dim).zip(or.iter_mut()).enumerate() {
            *y = dot(xr, wr) + b.map_or(0.0, |b| b[o]);
        }
    }
    out
}

/// Accumulates weight/bias gradients and, when requested, `dx` for [`linear`].
pub(crate) fn linear_backward(
    dy: &[f64],
    x: &[f64],
    in_dim: usize,
    w: &[f64],
    out_dim: usize,
    dw: &mut [f64],
    mut db: Option<&mut [f64]>,
    mut dx: Option<&mut [f64]>,
) {
    for (t, (dyr, xr)) in dy.chunks_exact(out_dim).zip(x.chunks_exact(in_dim)).enumerate() {
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(g, xr, &mut dw[o * in_dim..(o + 1) * in_dim]);
            if let Some(db) = db.as_deref_mut() {
                db[o] += g;
            }
            if let Some(dx) = dx.as_deref_mut() {
                axpy(
                    g,
                    &w[o * in_dim..(o + 1) * in_dim],
                    &mut dx[t * in_dim..(t + 1) * in_dim],
                );
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for j in 0..4 {
            acc[j] += a[4 * i + j] * b[4 * i + j];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn layer_norm(x: &[f64], dim: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, LnTrace) {
    let rows = x.len() / dim;
    let mut out = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * dim..(r + 1) * dim];
        let mean = row.iter().sum::<f64>() / dim as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for i in 0..dim {
            let h = (row[i] - mean) * rs;
            xhat[r * dim + i] = h;
            out[r * dim + i] = gain[i] * h + bias[i];
        }
    }
    (out, LnTrace { xhat, rstd })
}

fn layer_norm_backward(
    dy: &[f64],
    tr: &LnTrace,
    dim: usize,
    gain: &[f64],
    dg: &mut [f64],
    db: &mut [f64],
    dx: &mut [f64],
) {
    let mut dxhat = vec![0.0; dim];
    for (r, &rs) in tr.rstd.iter().enumerate() {
        let dyr = &dy[r * dim..(r + 1) * dim];
        let xh = &tr.xhat[r * dim..(r + 1) * dim];
        for i in 0..dim {
            dg[i] += dyr[i] * xh[i];
            db[i] += dyr[i];
            dxhat[i] = dyr[i] * gain[i];
        }
        let mean_d = dxhat.iter().sum::<f64>() / dim as f64;
        let mean_dx = dot(&dxhat, xh) / dim as f64;
        let dxr = &mut dx[r * dim..(r + 1) * dim];
        for i in 0..dim {
            dxr[i] += rs * (dxhat[i] - mean_d - xh[i] * mean_dx);
        }
    }
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn check_finite(x: &[f64], layer: usize, stage: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { layer, stage })
    }
}

impl VitModel {
    pub fn forward(&self, image: &Image) -> Result<ForwardOutput> {
        Ok(self.forward_trace(image)?.output)
    }

    /// The final-layer CLS representation; identical to `forward(image).cls`.
    pub fn extract_cls(&self, image: &Image) -> Result<Vec<f64>> {
        Ok(self.forward(image)?.cls)
    }

    pub fn forward_trace(&self, image: &Image) -> Result<Trace> {
        let cfg = self.config();
        if image.height != cfg.image_h || image.width != cfg.image_w || image.channels != cfg.channels {
            return Err(Error::contract(format!(
                "image {}x{}x{} does not match model input {}x{}x{}",
                image.height, image.width, image.channels, cfg.image_h, cfg.image_w, cfg.channels
            )));
        }
        let patches = patchify(image, cfg.patch_size)?;
        self.forward_patches(&patches)
    }

    /// Forward pass from an explicit patch sequence.
    pub fn forward_patches(&self, patches: &[Vec<f64>]) -> Result<Trace> {
        let cfg = *self.config();
        let (d, t) = (cfg.hidden_dim, cfg.token_count());
        if patches.len() != cfg.patch_count() || patches.iter().any(|p| p.len() != cfg.patch_dim()) {
            return Err(Error::contract("patch sequence does not match the configuration"));
        }
        let p = &self.params;
        let o = &self.layout().off;
        let flat: Vec<f64> = patches.concat();
        let emb = linear(
            &flat,
            cfg.patch_dim(),
            &p[o.patch_w..o.patch_w + d * cfg.patch_dim()],
            Some(&p[o.patch_b..o.patch_b + d]),
            d,
        );
        let mut z = vec![0.0; t * d];
        z[..d].copy_from_slice(&p[o.cls..o.cls + d]);
        z[d..].copy_from_slice(&emb);
        for (zi, &e) in z.iter_mut().zip(&p[o.pos..o.pos + t * d]) {
            *zi += e;
        }
        check_finite(&z, 0, "embedding")?;

        let mut blocks = Vec::with_capacity(cfg.depth);
        for (l, bo) in o.blocks.iter().enumerate() {
            let (z_next, tr) = self.block_forward(&cfg, bo, &z);
            check_finite(&z_next, l + 1, "encoder block")?;
            blocks.push(tr);
            z = z_next;
        }

        let (cls, cls_ln) = layer_norm(&z[..d], d, &p[o.lnf_g..o.lnf_g + d], &p[o.lnf_b..o.lnf_b + d]);
        let k = cfg.classes;
        let logits = linear(
            &cls,
            d,
            &p[o.head_w..o.head_w + k * d],
            Some(&p[o.head_b..o.head_b + k]),
            k,
        );
        check_finite(&logits, cfg.depth + 1, "classification head")?;
        let probs = softmax(&logits);
        Ok(Trace {
            patches: flat,
            blocks,
            cls_ln,
            output: ForwardOutput { cls, logits, probs },
        })
    }

    fn block_forward(&self, cfg: &VitConfig, bo: &BlockOffsets, x: &[f64]) -> (Vec<f64>, BlockTrace) {
        let p = &self.params;
        let (d, t, m, h, dk) = (
            cfg.hidden_dim,
            cfg.token_count(),
            cfg.mlp_dim,
            cfg.heads,
            cfg.head_dim(),
        );
        let (a1, ln1) = layer_norm(x, d, &p[bo.ln1_g..bo.ln1_g + d], &p[bo.ln1_b..bo.ln1_b + d]);
        let q = linear(&a1, d, &p[bo.wq..bo.wq + d * d], None, d);
        let k = linear(&a1, d, &p[bo.wk..bo.wk + d * d], None, d);
        let v = linear(&a1, d, &p[bo.wv..bo.wv + d * d], None, d);
        let inv_sqrt = 1.0 / (dk as f64).sqrt();
        let mut attn = vec![0.0; h * t * t];
        let mut ctx = vec![0.0; t * d];
        let mut scores = vec![0.0; t];
        for head in 0..h {
            let c0 = head * dk;
            for i in 0..t {
                let qi = &q[i * d + c0..i * d + c0 + dk];
                for j in 0..t {
                    scores[j] = dot(qi, &k[j * d + c0..j * d + c0 + dk]) * inv_sqrt;
                }
                let pr = softmax(&scores);
                let ci = &mut ctx[i * d + c0..i * d + c0 + dk];
                for (j, &pj) in pr.iter().enumerate() {
                    axpy(pj, &v[j * d + c0..j * d + c0 + dk], ci);
                }
                attn[(head * t + i) * t..(head * t + i + 1) * t].copy_from_slice(&pr);
            }
        }
        let attn_out = linear(&ctx, d, &p[bo.wo..bo.wo + d * d], None, d);
        let mid: Vec<f64> = x.iter().zip(&attn_out).map(|(a, b)| a + b).collect();
        let (a2, ln2) = layer_norm(&mid, d, &p[bo.ln2_g..bo.ln2_g + d], &p[bo.ln2_b..bo.ln2_b + d]);
        let h_pre = linear(&a2, d, &p[bo.w1..bo.w1 + m * d], Some(&p[bo.b1..bo.b1 + m]), m);
        let h_act: Vec<f64> = h_pre.iter().map(|&v| gelu(v)).collect();
        let mlp_out = linear(&h_act, m, &p[bo.w2..bo.w2 + d * m], Some(&p[bo.b2..bo.b2 + d]), d);
        let out: Vec<f64> = mid.iter().zip(&mlp_out).map(|(a, b)| a + b).collect();
        (
            out,
            BlockTrace {
                ln1,
                a1,
                q,
                k,
                v,
                attn,
                ctx,
                ln2,
                a2,
                h_pre,
                h_act,
            },
        )
    }

    /// Accumulates `d(loss)/d(params)` into `grad` given `d(loss)/d(logits)`.
    pub(crate) fn backward(&self, trace: &Trace, dlogits: &[f64], grad: &mut [f64]) {
        let cfg = *self.config();
        let (d, t, k) = (cfg.hidden_dim, cfg.token_count(), cfg.classes);
        let p = &self.params;
        let o = &self.layout().off;

        let mut dcls = vec![0.0; d];
        {
            let (dw, db) = two_slices_sized(grad, o.head_w, k * d, o.head_b, k);
            linear_backward(
                dlogits,
                &trace.output.cls,
                d,
                &p[o.head_w..o.head_w + k * d],
                k,
                dw,
                Some(db),
                Some(&mut dcls),
            );
        }
        let mut dz = vec![0.0; t * d];
        {
            let (dg, db) = two_slices(grad, o.lnf_g, o.lnf_b, d);
            layer_norm_backward(&dcls, &trace.cls_ln, d, &p[o.lnf_g..o.lnf_g + d], dg, db, &mut dz[..d]);
        }
        for (bo, tr) in o.blocks.iter().zip(&trace.blocks).rev() {
            dz = self.block_backward(&cfg, bo, tr, &dz, grad);
        }
        for (i, &g) in dz[..d].iter().enumerate() {
            grad[o.cls + i] += g;
        }
        for (gp, &g) in grad[o.pos..o.pos + t * d].iter_mut().zip(&dz) {
            *gp += g;
        }
        let pd = cfg.patch_dim();
        let (dw, db) = two_slices_sized(grad, o.patch_w, d * pd, o.patch_b, d);
        linear_backward(
            &dz[d..],
            &trace.patches,
            pd,
            &p[o.patch_w..o.patch_w + d * pd],
            d,
            dw,
            Some(db),
            None,
        );
    }

    fn block_backward(
        &self,
        cfg: &VitConfig,
        bo: &BlockOffsets,
        tr: &BlockTrace,
        dout: &[f64],
        grad: &mut [f64],
    ) -> Vec<f64> {
        let p = &self.params;
        let (d, t, m, h, dk) = (
            cfg.hidden_dim,
            cfg.token_count(),
            cfg.mlp_dim,
            cfg.heads,
            cfg.head_dim(),
        );

        // MLP branch
        let mut dh_act = vec![0.0; t * m];
        {
            let (dw, db) = two_slices_sized(grad, bo.w2, d * m, bo.b2, d);
            linear_backward(
                dout,
                &tr.h_act,
                m,
                &p[bo.w2..bo.w2 + d * m],
                d,
                dw,
                Some(db),
                Some(&mut dh_act),
            );
        }
        let dh_pre: Vec<f64> = dh_act.iter().zip(&tr.h_pre).map(|(g, &x)| g * gelu_grad(x)).collect();
        let mut da2 = vec![0.0; t * d];
        {
            let (dw, db) = two_slices_sized(grad, bo.w1, m * d, bo.b1, m);
            linear_backward(
                &dh_pre,
                &tr.a2,
                d,
                &p[bo.w1..bo.w1 + m * d],
                m,
                dw,
                Some(db),
                Some(&mut da2),
            );
        }
        let mut dmid = dout.to_vec();
        {
            let (dg, db) = two_slices(grad, bo.ln2_g, bo.ln2_b, d);
            layer_norm_backward(&da2, &tr.ln2, d, &p[bo.ln2_g..bo.ln2_g + d], dg, db, &mut dmid);
        }

        // attention branch
        let mut dctx = vec![0.0; t * d];
        linear_backward(
            &dmid,
            &tr.ctx,
            d,
            &p[bo.wo..bo.wo + d * d],
            d,
            &mut grad[bo.wo..bo.wo + d * d],
            None,
            Some(&mut dctx),
        );
        let inv_sqrt = 1.0 / (dk as f64).sqrt();
        let mut dq = vec![0.0; t * d];
        let mut dk_ = vec![0.0; t * d];
        let mut dv = vec![0.0; t * d];
        let mut dp = vec![0.0; t];
        for head in 0..h {
            let c0 = head * dk;
            for i in 0..t {
                let pr = &tr.attn[(head * t + i) * t..(head * t + i + 1) * t];
                let dci = &dctx[i * d + c0..i * d + c0 + dk];
                for j in 0..t {
                    dp[j] = dot(dci, &tr.v[j * d + c0..j * d + c0 + dk]);
                    axpy(pr[j], dci, &mut dv[j * d + c0..j * d + c0 + dk]);
                }
                let s = dot(&dp, pr);
                for j in 0..t {
                    let ds = pr[j] * (dp[j] - s) * inv_sqrt;
                    if ds == 0.0 {
                        continue;
                    }
                    axpy(
                        ds,
                        &tr.k[j * d + c0..j * d + c0 + dk],
                        &mut dq[i * d + c0..i * d + c0 + dk],
                    );
                    axpy(
                        ds,
                        &tr.q[i * d + c0..i * d + c0 + dk],
                        &mut dk_[j * d + c0..j * d + c0 + dk],
                    );
                }
            }
        }
        let mut da1 = vec![0.0; t * d];
        for (dy, off) in [(&dq, bo.wq), (&dk_, bo.wk), (&dv, bo.wv)] {
            linear_backward(
                dy,
                &tr.a1,
                d,
                &p[off..off + d * d],
                d,
                &mut grad[off..off + d * d],
                None,
                Some(&mut da1),
            );
        }
        let mut dx = dmid;
        {
            let (dg, db) = two_slices(grad, bo.ln1_g, bo.ln1_b, d);
            layer_norm_backward(&da1, &tr.ln1, d, &p[bo.ln1_g..bo.ln1_g + d], dg, db, &mut dx);
        }
        dx
    }
}

/// Two disjoint length-`len` windows starting at `a < b`.
fn two_slices(buf: &mut [f64], a: usize, b: usize, len: usize) -> (&mut [f64], &mut [f64]) {
    two_slices_sized(buf, a, len, b, len)
}

fn two_slices_sized(buf: &mut [f64], a: usize, alen: usize, b: usize, blen: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a + alen <= b);
    let (lo, hi) = buf.split_at_mut(b);
    (&mut lo[a..a + alen], &mut hi[..blen])
}
