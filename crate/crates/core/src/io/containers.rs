use super::wire::{
    deserialize_ciphertext, malformed, serialize_ciphertext, Reader, Writer, MAGIC_BUNDLE, MAGIC_DATASET, MAGIC_HEAD,
    MAGIC_MODEL, MAGIC_TOKENS,
};
use crate::ckks::{serialized_size, Ciphertext, CkksContext, CIPHERTEXT_HEADER_BYTES};
use crate::error::{Error, Result, WireError};
use crate::fed::{ClassifierHead, ClientBundle, EncryptedToken};
use crate::vit::{Dataset, Image, VitConfig, VitModel};

/// A token as sent on the wire: its chunk ciphertexts back to back.
pub fn serialize_token_message(chunks: &[Ciphertext]) -> Vec<u8> {
    let mut out = Vec::with_capacity(chunks.iter().map(Ciphertext::serialized_size).sum());
    for ct in chunks {
        out.extend_from_slice(&serialize_ciphertext(ct));
    }
    out
}

pub fn deserialize_token_message(bytes: &[u8], ctx: &CkksContext) -> Result<Vec<Ciphertext>> {
    let mut out = Vec::new();
    let mut rest = bytes;
    while !rest.is_empty() {
        if rest.len() < CIPHERTEXT_HEADER_BYTES {
            return Err(WireError::Truncated {
                needed: CIPHERTEXT_HEADER_BYTES,
                available: rest.len(),
            }
            .into());
        }
        let degree = u32::from_le_bytes(rest[5..9].try_into().expect("four bytes")) as usize;
        let (level, comps) = (rest[9] as usize, rest[10] as usize);
        let size = serialized_size(degree, level, comps);
        if size > rest.len() {
            return Err(WireError::Truncated {
                needed: size,
                available: rest.len(),
            }
            .into());
        }
        out.push(deserialize_ciphertext(&rest[..size], ctx)?);
        rest = &rest[size..];
    }
    if out.is_empty() {
        return Err(malformed("empty token message"));
    }
    Ok(out)
}

pub fn serialize_head(head: &ClassifierHead) -> Vec<u8> {
    let mut w = Writer::new(MAGIC_HEAD);
    w.u32(head.classes as u32);
    w.u32(head.dim as u32);
    w.f64s(&head.weights);
    w.f64s(&head.bias);
    w.finish()
}

pub fn deserialize_head(bytes: &[u8]) -> Result<ClassifierHead> {
    let mut r = Reader::open(bytes, MAGIC_HEAD)?;
    let classes = r.len_u32()?;
    let dim = r.len_u32()?;
    let n = classes
        .checked_mul(dim)
        .ok_or_else(|| malformed("head size overflows"))?;
    let weights = r.f64s(n)?;
    let bias = r.f64s(classes)?;
    r.finish()?;
    ClassifierHead::new(classes, dim, weights, bias).map_err(|e| malformed(e.to_string()))
}

pub fn serialize_bundle(bundle: &ClientBundle) -> Result<Vec<u8>> {
    let mut w = Writer::new(MAGIC_BUNDLE);
    w.u32(bundle.client_id);
    w.len_u32(bundle.dim)?;
    w.len_u32(bundle.tokens.len())?;
    for t in &bundle.tokens {
        w.u32(t.sample);
        w.blob(&serialize_token_message(&t.chunks))?;
    }
    w.blob(&serialize_head(&bundle.head))?;
    Ok(w.finish())
}

pub fn deserialize_bundle(bytes: &[u8], ctx: &CkksContext) -> Result<ClientBundle> {
    let mut r = Reader::open(bytes, MAGIC_BUNDLE)?;
    let client_id = r.u32()?;
    let dim = r.len_u32()?;
    let n = r.len_u32()?;
    let mut tokens = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let sample = r.u32()?;
        let chunks = deserialize_token_message(r.blob()?, ctx)?;
        tokens.push(EncryptedToken { sample, chunks });
    }
    let head = deserialize_head(r.blob()?)?;
    r.finish()?;
    if head.dim != dim {
        return Err(malformed(format!(
            "head dimension {} but tokens are {dim}-dim",
            head.dim
        )));
    }
    Ok(ClientBundle {
        client_id,
        dim,
        tokens,
        head,
    })
}

/// Client-side plaintext tokens with their labels. Never sent to the server.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenFile {
    pub client_id: u32,
    pub dim: usize,
    pub tokens: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn serialize_tokens(tf: &TokenFile) -> Result<Vec<u8>> {
    if tf.tokens.len() != tf.labels.len() {
        return Err(Error::contract("token and label counts differ"));
    }
    let mut w = Writer::new(MAGIC_TOKENS);
    w.u32(tf.client_id);
    w.len_u32(tf.dim)?;
    w.len_u32(tf.tokens.len())?;
    for (t, &y) in tf.tokens.iter().zip(&tf.labels) {
        if t.len() != tf.dim {
            return Err(Error::contract("token length differs from the declared dimension"));
        }
        w.len_u32(y)?;
        w.f64s(t);
    }
    Ok(w.finish())
}

pub fn deserialize_tokens(bytes: &[u8]) -> Result<TokenFile> {
    let mut r = Reader::open(bytes, MAGIC_TOKENS)?;
    let client_id = r.u32()?;
    let dim = r.len_u32()?;
    let n = r.len_u32()?;
    let mut tokens = Vec::with_capacity(n.min(1 << 16));
    let mut labels = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        labels.push(r.len_u32()?);
        tokens.push(r.f64s(dim)?);
    }
    r.finish()?;
    Ok(TokenFile {
        client_id,
        dim,
        tokens,
        labels,
    })
}

fn write_config(w: &mut Writer, c: &VitConfig) {
    for v in [
        c.image_h,
        c.image_w,
        c.channels,
        c.patch_size,
        c.hidden_dim,
        c.depth,
        c.heads,
        c.mlp_dim,
        c.classes,
    ] {
        w.u32(v as u32);
    }
}

fn read_config(r: &mut Reader) -> Result<VitConfig> {
    let mut v = [0usize; 9];
    for x in &mut v {
        *x = r.len_u32()?;
    }
    let c = VitConfig {
        image_h: v[0],
        image_w: v[1],
        channels: v[2],
        patch_size: v[3],
        hidden_dim: v[4],
        depth: v[5],
        heads: v[6],
        mlp_dim: v[7],
        classes: v[8],
    };
    c.validate().map_err(|e| malformed(e.to_string()))?;
    Ok(c)
}

/// Model checkpoint: configuration, then every named tensor.
pub fn serialize_model(model: &VitModel) -> Result<Vec<u8>> {
    let mut w = Writer::new(MAGIC_MODEL);
    write_config(&mut w, model.config());
    let specs = model.layout().specs();
    w.len_u32(specs.len())?;
    for s in specs {
        w.str(&s.name)?;
        w.len_u32(s.len())?;
        w.f64s(&model.params()[s.range()]);
    }
    Ok(w.finish())
}

pub fn deserialize_model(bytes: &[u8]) -> Result<VitModel> {
    let mut r = Reader::open(bytes, MAGIC_MODEL)?;
    let config = read_config(&mut r)?;
    let probe = crate::vit::ParamLayout::new(&config);
    let count = r.len_u32()?;
    if count != probe.specs().len() {
        return Err(malformed(format!(
            "{count} tensors; configuration has {}",
            probe.specs().len()
        )));
    }
    let mut params = Vec::with_capacity(probe.total());
    for spec in probe.specs() {
        let name = r.str()?;
        let len = r.len_u32()?;
        if name != spec.name || len != spec.len() {
            return Err(malformed(format!(
                "tensor {name} ({len}) where {} ({}) was expected",
                spec.name,
                spec.len()
            )));
        }
        params.extend(r.f64s(len)?);
    }
    r.finish()?;
    VitModel::from_params(config, params).map_err(|e| malformed(e.to_string()))
}

pub fn serialize_dataset(ds: &Dataset) -> Result<Vec<u8>> {
    let mut w = Writer::new(MAGIC_DATASET);
    let (h, wd, c) = ds
        .images
        .first()
        .map(|i| (i.height, i.width, i.channels))
        .unwrap_or((0, 0, 0));
    w.len_u32(h)?;
    w.len_u32(wd)?;
    w.len_u32(c)?;
    w.len_u32(ds.class_names.len())?;
    for name in &ds.class_names {
        w.str(name)?;
    }
    w.len_u32(ds.len())?;
    for (img, &y) in ds.images.iter().zip(&ds.labels) {
        if (img.height, img.width, img.channels) != (h, wd, c) {
            return Err(Error::contract("dataset images differ in shape"));
        }
        w.len_u32(y)?;
        w.f64s(&img.pixels);
    }
    Ok(w.finish())
}

pub fn deserialize_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::open(bytes, MAGIC_DATASET)?;
    let (h, w, c) = (r.len_u32()?, r.len_u32()?, r.len_u32()?);
    let k = r.len_u32()?;
    let class_names = (0..k).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
    let n = r.len_u32()?;
    let mut images = Vec::with_capacity(n.min(1 << 16));
    let mut labels = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let y = r.len_u32()?;
        if y >= k {
            return Err(malformed(format!("label {y} with {k} classes")));
        }
        labels.push(y);
        let px = r.f64s(h * w * c)?;
        images.push(Image::new(h, w, c, px).map_err(|e| malformed(e.to_string()))?);
    }
    r.finish()?;
    Ok(Dataset {
        class_names,
        images,
        labels,
    })
}
