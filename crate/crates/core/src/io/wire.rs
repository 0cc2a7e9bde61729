//! Binary containers. Every container is `magic | version | body | crc32`, with
//! the checksum taken over everything before it. Integers are little-endian.

use crate::ckks::{
    Ciphertext, CkksContext, GaloisKeys, KeySwitchKey, Plaintext, PublicKey, RelinKey, SecretKey,
    CIPHERTEXT_HEADER_BYTES,
};
use crate::error::{Error, Result, WireError};
use crate::ring::{Domain, PrimeRing, RnsPoly};

pub const FORMAT_VERSION: u8 = 1;

pub const MAGIC_CIPHERTEXT: [u8; 4] = *b"FCHE";
pub const MAGIC_PLAINTEXT: [u8; 4] = *b"FCPT";
pub const MAGIC_KEY: [u8; 4] = *b"FKEY";
pub const MAGIC_TOKENS: [u8; 4] = *b"FTOK";
pub const MAGIC_BUNDLE: [u8; 4] = *b"FBND";
pub const MAGIC_HEAD: [u8; 4] = *b"FHED";
pub const MAGIC_CIPHERTEXT_LIST: [u8; 4] = *b"FPRD";
pub const MAGIC_MODEL: [u8; 4] = *b"FVIT";
pub const MAGIC_DATASET: [u8; 4] = *b"FDAT";

/// Tags for [`serialize_ciphertext_list`].
pub const LIST_AGGREGATE_TOKENS: u8 = 1;
pub const LIST_PREDICTIONS: u8 = 2;
pub const LIST_GRADIENT: u8 = 3;
pub const LIST_AGGREGATE_GRADIENT: u8 = 4;

const MIN_CONTAINER: usize = 4 + 1 + 4;

pub(crate) struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn new(magic: [u8; 4]) -> Self {
        let mut buf = Vec::new();
        buf.extend_from_slice(&magic);
        buf.push(FORMAT_VERSION);
        Self { buf }
    }

    pub(crate) fn with_capacity(magic: [u8; 4], cap: usize) -> Self {
        let mut w = Self {
            buf: Vec::with_capacity(cap),
        };
        w.buf.extend_from_slice(&magic);
        w.buf.push(FORMAT_VERSION);
        w
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub(crate) fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub(crate) fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }

    pub(crate) fn len_u32(&mut self, n: usize) -> Result<()> {
        let v = u32::try_from(n).map_err(|_| Error::contract(format!("length {n} does not fit in 32 bits")))?;
        self.u32(v);
        Ok(())
    }

    /// Length-prefixed nested blob.
    pub(crate) fn blob(&mut self, b: &[u8]) -> Result<()> {
        self.len_u32(b.len())?;
        self.buf.extend_from_slice(b);
        Ok(())
    }

    pub(crate) fn str(&mut self, s: &str) -> Result<()> {
        let n = u16::try_from(s.len()).map_err(|_| Error::contract("string too long"))?;
        self.u16(n);
        self.buf.extend_from_slice(s.as_bytes());
        Ok(())
    }

    fn poly_body(&mut self, p: &RnsPoly) {
        for r in p.residues() {
            for &x in r {
                self.u64(x);
            }
        }
    }

    /// Level byte, domain byte, then residues.
    fn poly(&mut self, p: &RnsPoly) {
        self.u8(p.level() as u8);
        self.u8(match p.domain() {
            Domain::Coefficient => 0,
            Domain::Evaluation => 1,
        });
        self.poly_body(p);
    }

    pub(crate) fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    /// Checks magic, version and checksum, and positions after the version byte.
    pub(crate) fn open(bytes: &'a [u8], magic: [u8; 4]) -> Result<Self> {
        if bytes.len() < MIN_CONTAINER {
            return Err(WireError::Truncated {
                needed: MIN_CONTAINER,
                available: bytes.len(),
            }
            .into());
        }
        let found: [u8; 4] = bytes[..4].try_into().expect("length checked");
        if found != magic {
            return Err(WireError::BadMagic { expected: magic, found }.into());
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(WireError::UnsupportedVersion(bytes[4]).into());
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("four bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(WireError::ChecksumMismatch { stored, computed }.into());
        }
        Ok(Self { data: body, pos: 5 })
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or(WireError::Truncated {
                needed: self.pos.saturating_add(n) + 4,
                available: self.data.len() + 4,
            })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("two bytes")))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    #[cfg(test)]
    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| malformed("length overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
            .collect())
    }

    pub(crate) fn len_u32(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    pub(crate) fn blob(&mut self) -> Result<&'a [u8]> {
        let n = self.len_u32()?;
        self.take(n)
    }

    pub(crate) fn str(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| malformed("string is not UTF-8"))
    }

    fn residues(&mut self, level: usize, rings: &[PrimeRing]) -> Result<Vec<Vec<u64>>> {
        if level == 0 || level > rings.len() {
            return Err(malformed(format!("level {level} outside 1..={}", rings.len())));
        }
        let n = rings[0].degree();
        let raw = self.take(level * n * 8)?;
        let mut out = Vec::with_capacity(level);
        for (i, ring) in rings.iter().take(level).enumerate() {
            let chunk = &raw[i * n * 8..(i + 1) * n * 8];
            let r: Vec<u64> = chunk
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().expect("eight bytes")))
                .collect();
            if let Some(bad) = r.iter().find(|&&x| x >= ring.q()) {
                return Err(malformed(format!("residue {bad} not reduced mod {}", ring.q())));
            }
            out.push(r);
        }
        Ok(out)
    }

    fn poly(&mut self, rings: &[PrimeRing]) -> Result<RnsPoly> {
        let level = self.u8()? as usize;
        let domain = match self.u8()? {
            0 => Domain::Coefficient,
            1 => Domain::Evaluation,
            d => return Err(malformed(format!("unknown domain tag {d}"))),
        };
        let res = self.residues(level, rings)?;
        RnsPoly::from_residues(res, domain, rings)
    }

    pub(crate) fn finish(self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(malformed(format!("{} trailing bytes", self.data.len() - self.pos)));
        }
        Ok(())
    }
}

pub(crate) fn malformed(msg: impl Into<String>) -> Error {
    WireError::Malformed(msg.into()).into()
}

fn check_degree(found: u32, ctx: &CkksContext) -> Result<()> {
    if found as usize != ctx.ring_degree() {
        return Err(malformed(format!(
            "ring degree {found} does not match context degree {}",
            ctx.ring_degree()
        )));
    }
    Ok(())
}

fn check_scale(scale: f64) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(malformed(format!("invalid scale {scale}")));
    }
    Ok(())
}

/// `FCHE | version | degree u32 | level u8 | components u8 | scale f64 | residues | crc32`.
pub fn serialize_ciphertext(ct: &Ciphertext) -> Vec<u8> {
    let mut w = Writer::with_capacity(MAGIC_CIPHERTEXT, ct.serialized_size());
    w.u32(ct.degree() as u32);
    w.u8(ct.level() as u8);
    w.u8(ct.component_count() as u8);
    w.f64(ct.scale());
    debug_assert_eq!(w.buf.len(), CIPHERTEXT_HEADER_BYTES);
    for p in ct.components() {
        w.poly_body(p);
    }
    let out = w.finish();
    debug_assert_eq!(out.len(), ct.serialized_size());
    out
}

pub fn deserialize_ciphertext(bytes: &[u8], ctx: &CkksContext) -> Result<Ciphertext> {
    let mut r = Reader::open(bytes, MAGIC_CIPHERTEXT)?;
    check_degree(r.u32()?, ctx)?;
    let level = r.u8()? as usize;
    let comps = r.u8()? as usize;
    let scale = r.f64()?;
    if level == 0 || level > ctx.max_level() {
        return Err(malformed(format!("level {level} outside 1..={}", ctx.max_level())));
    }
    if !(2..=3).contains(&comps) {
        return Err(malformed(format!("{comps} ciphertext components")));
    }
    check_scale(scale)?;
    let rings = ctx.rings(level);
    let mut parts = Vec::with_capacity(comps);
    for _ in 0..comps {
        let res = r.residues(level, rings)?;
        parts.push(RnsPoly::from_residues(res, Domain::Evaluation, rings)?);
    }
    r.finish()?;
    Ciphertext::from_parts(parts, scale)
}

pub fn serialize_plaintext(pt: &Plaintext) -> Vec<u8> {
    let mut w = Writer::new(MAGIC_PLAINTEXT);
    w.u32(pt.poly().degree() as u32);
    w.f64(pt.scale());
    w.poly(pt.poly());
    w.finish()
}

pub fn deserialize_plaintext(bytes: &[u8], ctx: &CkksContext) -> Result<Plaintext> {
    let mut r = Reader::open(bytes, MAGIC_PLAINTEXT)?;
    check_degree(r.u32()?, ctx)?;
    let scale = r.f64()?;
    check_scale(scale)?;
    let poly = r.poly(ctx.rings(ctx.max_level()))?;
    r.finish()?;
    Plaintext::from_parts(poly, scale)
}

const KEY_SECRET: u8 = 0;
const KEY_PUBLIC: u8 = 1;
const KEY_RELIN: u8 = 2;
const KEY_GALOIS: u8 = 3;

fn key_writer(kind: u8, ctx: &CkksContext) -> Writer {
    let mut w = Writer::new(MAGIC_KEY);
    w.u8(kind);
    w.u32(ctx.ring_degree() as u32);
    w
}

fn key_reader<'a>(bytes: &'a [u8], kind: u8, ctx: &CkksContext) -> Result<Reader<'a>> {
    let mut r = Reader::open(bytes, MAGIC_KEY)?;
    let found = r.u8()?;
    if found != kind {
        return Err(malformed(format!("key kind {found}, expected {kind}")));
    }
    check_degree(r.u32()?, ctx)?;
    Ok(r)
}

fn write_switch_key(w: &mut Writer, k: &KeySwitchKey) {
    w.u8(k.parts.len() as u8);
    for (b, a) in &k.parts {
        w.poly(b);
        w.poly(a);
    }
}

fn read_switch_key(r: &mut Reader, ctx: &CkksContext) -> Result<KeySwitchKey> {
    let n = r.u8()? as usize;
    if n != ctx.max_level() {
        return Err(malformed(format!(
            "{n} key-switching digits, expected {}",
            ctx.max_level()
        )));
    }
    let all = ctx.all_rings();
    let mut parts = Vec::with_capacity(n);
    for _ in 0..n {
        let b = r.poly(all)?;
        let a = r.poly(all)?;
        if b.level() != all.len() || a.level() != all.len() {
            return Err(malformed("key-switching key must span every prime"));
        }
        parts.push((b, a));
    }
    Ok(KeySwitchKey { parts })
}

pub fn serialize_secret_key(sk: &SecretKey, ctx: &CkksContext) -> Vec<u8> {
    let mut w = key_writer(KEY_SECRET, ctx);
    w.poly(&sk.s);
    w.finish()
}

pub fn deserialize_secret_key(bytes: &[u8], ctx: &CkksContext) -> Result<SecretKey> {
    let mut r = key_reader(bytes, KEY_SECRET, ctx)?;
    let s = r.poly(ctx.all_rings())?;
    r.finish()?;
    if s.level() != ctx.all_rings().len() {
        return Err(malformed("secret key must span every prime"));
    }
    Ok(SecretKey { s })
}

pub fn serialize_public_key(pk: &PublicKey, ctx: &CkksContext) -> Vec<u8> {
    let mut w = key_writer(KEY_PUBLIC, ctx);
    w.poly(&pk.b);
    w.poly(&pk.a);
    w.finish()
}

pub fn deserialize_public_key(bytes: &[u8], ctx: &CkksContext) -> Result<PublicKey> {
    let mut r = key_reader(bytes, KEY_PUBLIC, ctx)?;
    let rings = ctx.rings(ctx.max_level());
    let b = r.poly(rings)?;
    let a = r.poly(rings)?;
    r.finish()?;
    if b.level() != ctx.max_level() || a.level() != ctx.max_level() {
        return Err(malformed("public key must span the full chain"));
    }
    Ok(PublicKey { b, a })
}

pub fn serialize_relin_key(rk: &RelinKey, ctx: &CkksContext) -> Vec<u8> {
    let mut w = key_writer(KEY_RELIN, ctx);
    write_switch_key(&mut w, &rk.0);
    w.finish()
}

pub fn deserialize_relin_key(bytes: &[u8], ctx: &CkksContext) -> Result<RelinKey> {
    let mut r = key_reader(bytes, KEY_RELIN, ctx)?;
    let k = read_switch_key(&mut r, ctx)?;
    r.finish()?;
    Ok(RelinKey(k))
}

pub fn serialize_galois_keys(gk: &GaloisKeys, ctx: &CkksContext) -> Vec<u8> {
    let mut w = key_writer(KEY_GALOIS, ctx);
    w.u32(gk.len() as u32);
    for (g, k) in &gk.keys {
        w.u32(*g as u32);
        write_switch_key(&mut w, k);
    }
    w.finish()
}

pub fn deserialize_galois_keys(bytes: &[u8], ctx: &CkksContext) -> Result<GaloisKeys> {
    let mut r = key_reader(bytes, KEY_GALOIS, ctx)?;
    let count = r.len_u32()?;
    let two_n = 2 * ctx.ring_degree();
    let mut gk = GaloisKeys::default();
    for _ in 0..count {
        let g = r.u32()? as usize;
        if g.is_multiple_of(2) || g >= two_n {
            return Err(malformed(format!("invalid galois element {g}")));
        }
        let k = read_switch_key(&mut r, ctx)?;
        if gk.keys.insert(g, k).is_some() {
            return Err(malformed(format!("duplicate galois element {g}")));
        }
    }
    r.finish()?;
    Ok(gk)
}

/// A list of ciphertexts tagged with what they carry.
pub fn serialize_ciphertext_list(kind: u8, cts: &[Ciphertext]) -> Result<Vec<u8>> {
    let mut w = Writer::new(MAGIC_CIPHERTEXT_LIST);
    w.u8(kind);
    w.len_u32(cts.len())?;
    for ct in cts {
        w.blob(&serialize_ciphertext(ct))?;
    }
    Ok(w.finish())
}

pub fn deserialize_ciphertext_list(bytes: &[u8], ctx: &CkksContext) -> Result<(u8, Vec<Ciphertext>)> {
    let mut r = Reader::open(bytes, MAGIC_CIPHERTEXT_LIST)?;
    let kind = r.u8()?;
    let n = r.len_u32()?;
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        out.push(deserialize_ciphertext(r.blob()?, ctx)?);
    }
    r.finish()?;
    Ok((kind, out))
}
