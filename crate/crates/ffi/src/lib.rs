//! C interface to the CKKS context, ciphertexts and the wire format.
//!
//! Every function returns a [`FedvitStatus`]. Handles are opaque and must be
//! released with the matching `_free` function. The message of the most
//! recent failure on the calling thread is available through
//! [`fedvit_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fedvit::ckks::{Ciphertext, CkksContext, CkksParams, KeySet};
use fedvit::fed::mean_ciphertexts;
use fedvit::io::{chunk_count, deserialize_ciphertext, serialize_ciphertext};
use fedvit::{Error, WireError};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Result codes. Library errors use the same numbers as the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FedvitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Panic = 4,
    Contract = 10,
    Config = 11,
    BudgetExhausted = 12,
    MissingGaloisKey = 13,
    Numerical = 14,
    NonFinite = 15,
    Diverged = 16,
    BadMagic = 20,
    UnsupportedVersion = 21,
    ChecksumMismatch = 22,
    Truncated = 23,
    Malformed = 24,
    Io = 30,
}

impl From<&Error> for FedvitStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Contract(_) => Self::Contract,
            Error::Config(_) => Self::Config,
            Error::BudgetExhausted(_) => Self::BudgetExhausted,
            Error::MissingGaloisKey { .. } => Self::MissingGaloisKey,
            Error::Numerical(_) => Self::Numerical,
            Error::NonFinite { .. } => Self::NonFinite,
            Error::Diverged { .. } => Self::Diverged,
            Error::Wire(w) => match w {
                WireError::BadMagic { .. } => Self::BadMagic,
                WireError::UnsupportedVersion(_) => Self::UnsupportedVersion,
                WireError::ChecksumMismatch { .. } => Self::ChecksumMismatch,
                WireError::Truncated { .. } => Self::Truncated,
                WireError::Malformed(_) => Self::Malformed,
            },
            Error::Io(_) => Self::Io,
            Error::Stage { source, .. } => Self::from(source.as_ref()),
        }
    }
}

/// Parameters, a key set and the encryption RNG.
pub struct FedvitContext {
    ctx: CkksContext,
    keys: KeySet,
    rng: ChaCha20Rng,
}

/// One ciphertext.
pub struct FedvitCiphertext {
    ct: Ciphertext,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: FedvitStatus, msg: impl Into<String>) -> FedvitStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), FedvitStatus>) -> FedvitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FedvitStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(FedvitStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> FedvitStatus {
    fail(FedvitStatus::from(&e), e.to_string())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, FedvitStatus> {
    p.as_ref()
        .ok_or_else(|| fail(FedvitStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, FedvitStatus> {
    p.as_mut()
        .ok_or_else(|| fail(FedvitStatus::NullPointer, format!("{what} is null")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], FedvitStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(FedvitStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed(ct: Ciphertext) -> *mut FedvitCiphertext {
    Box::into_raw(Box::new(FedvitCiphertext { ct }))
}

/// Builds a context for `profile` ("paper" or "small") with keys derived from `seed`.
///
/// # Safety
/// `profile` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedvit_context_new(
    profile: *const c_char,
    seed: u64,
    out: *mut *mut FedvitContext,
) -> FedvitStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        if profile.is_null() {
            return Err(fail(FedvitStatus::NullPointer, "profile is null"));
        }
        let name = CStr::from_ptr(profile)
            .to_str()
            .map_err(|_| fail(FedvitStatus::InvalidArgument, "profile is not UTF-8"))?;
        let ctx = CkksContext::new(CkksParams::by_name(name).map_err(lib)?).map_err(lib)?;
        let keys = ctx.keygen(seed).map_err(lib)?;
        let rng = ChaCha20Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        *out = Box::into_raw(Box::new(FedvitContext { ctx, keys, rng }));
        Ok(())
    })
}

/// # Safety
/// `ctx` must come from [`fedvit_context_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fedvit_context_free(ctx: *mut FedvitContext) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Slots per ciphertext, or 0 for a null context.
///
/// # Safety
/// `ctx` must be null or a live context.
#[no_mangle]
pub unsafe extern "C" fn fedvit_slot_count(ctx: *const FedvitContext) -> usize {
    ctx.as_ref().map_or(0, |c| c.ctx.slot_count())
}

/// Number of ciphertexts needed for a `dim`-element vector.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fedvit_chunk_count(dim: usize, slot_count: usize, out: *mut usize) -> FedvitStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = chunk_count(dim, slot_count).map_err(lib)?;
        Ok(())
    })
}

/// Encrypts `len <= slot_count` values at the top level.
///
/// # Safety
/// `values` must point to `len` doubles; `ctx` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fedvit_encrypt(
    ctx: *mut FedvitContext,
    values: *const f64,
    len: usize,
    out: *mut *mut FedvitCiphertext,
) -> FedvitStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let c = out_ptr(ctx, "ctx")?;
        let values = slice(values, len, "values")?;
        if len > c.ctx.slot_count() {
            return Err(fail(
                FedvitStatus::InvalidArgument,
                format!("{len} values exceed {} slots", c.ctx.slot_count()),
            ));
        }
        let pt = c
            .ctx
            .encode(values, c.ctx.default_scale(), c.ctx.max_level())
            .map_err(lib)?;
        let ct = c.ctx.encrypt(&c.keys.public, &pt, &mut c.rng).map_err(lib)?;
        *out = boxed(ct);
        Ok(())
    })
}

/// Decrypts the first `len` slots into `out`.
///
/// # Safety
/// `out` must have room for `len` doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn fedvit_decrypt(
    ctx: *const FedvitContext,
    ct: *const FedvitCiphertext,
    out: *mut f64,
    len: usize,
) -> FedvitStatus {
    guard(|| {
        let c = deref(ctx, "ctx")?;
        let ct = deref(ct, "ciphertext")?;
        if len > c.ctx.slot_count() {
            return Err(fail(FedvitStatus::InvalidArgument, "len exceeds slot count"));
        }
        if len > 0 && out.is_null() {
            return Err(fail(FedvitStatus::NullPointer, "out is null"));
        }
        let values = c.ctx.decrypt_decode(&c.keys.secret, &ct.ct).map_err(lib)?;
        if len > 0 {
            std::slice::from_raw_parts_mut(out, len).copy_from_slice(&values[..len]);
        }
        Ok(())
    })
}

/// Homomorphic sum of two ciphertexts at the same level and scale.
///
/// # Safety
/// All handles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fedvit_add(
    ctx: *const FedvitContext,
    a: *const FedvitCiphertext,
    b: *const FedvitCiphertext,
    out: *mut *mut FedvitCiphertext,
) -> FedvitStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let c = deref(ctx, "ctx")?;
        let sum = c.ctx.add(&deref(a, "a")?.ct, &deref(b, "b")?.ct).map_err(lib)?;
        *out = boxed(sum);
        Ok(())
    })
}

/// Encrypted elementwise mean of `n` ciphertexts. Consumes one level.
///
/// # Safety
/// `cts` must point to `n` live ciphertext handles.
#[no_mangle]
pub unsafe extern "C" fn fedvit_aggregate_mean(
    ctx: *const FedvitContext,
    cts: *const *const FedvitCiphertext,
    n: usize,
    out: *mut *mut FedvitCiphertext,
) -> FedvitStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let c = deref(ctx, "ctx")?;
        let handles = slice(cts, n, "cts")?;
        let parts = handles
            .iter()
            .map(|&h| deref(h, "ciphertext").map(|h| &h.ct))
            .collect::<Result<Vec<_>, _>>()?;
        *out = boxed(mean_ciphertexts(&c.ctx, &parts).map_err(lib)?);
        Ok(())
    })
}

/// Modulus level of a ciphertext, or 0 for null.
///
/// # Safety
/// `ct` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn fedvit_ciphertext_level(ct: *const FedvitCiphertext) -> usize {
    ct.as_ref().map_or(0, |c| c.ct.level())
}

/// Exact serialized length in bytes, or 0 for null.
///
/// # Safety
/// `ct` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn fedvit_ciphertext_size(ct: *const FedvitCiphertext) -> usize {
    ct.as_ref().map_or(0, |c| c.ct.serialized_size())
}

/// Writes the wire encoding into `buf`. `written` always receives the required
/// length, so a call with `cap = 0` can be used to size the buffer.
///
/// # Safety
/// `buf` must have room for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn fedvit_serialize(
    ct: *const FedvitCiphertext,
    buf: *mut u8,
    cap: usize,
    written: *mut usize,
) -> FedvitStatus {
    guard(|| {
        let written = out_ptr(written, "written")?;
        let bytes = serialize_ciphertext(&deref(ct, "ciphertext")?.ct);
        *written = bytes.len();
        if cap < bytes.len() {
            return Err(fail(
                FedvitStatus::BufferTooSmall,
                format!("need {} bytes, have {cap}", bytes.len()),
            ));
        }
        if buf.is_null() {
            return Err(fail(FedvitStatus::NullPointer, "buf is null"));
        }
        std::slice::from_raw_parts_mut(buf, bytes.len()).copy_from_slice(&bytes);
        Ok(())
    })
}

/// Parses and validates a serialized ciphertext.
///
/// # Safety
/// `buf` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn fedvit_deserialize(
    ctx: *const FedvitContext,
    buf: *const u8,
    len: usize,
    out: *mut *mut FedvitCiphertext,
) -> FedvitStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let c = deref(ctx, "ctx")?;
        let bytes = slice(buf, len, "buf")?;
        *out = boxed(deserialize_ciphertext(bytes, &c.ctx).map_err(lib)?);
        Ok(())
    })
}

/// # Safety
/// `ct` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn fedvit_ciphertext_free(ct: *mut FedvitCiphertext) {
    if !ct.is_null() {
        drop(Box::from_raw(ct));
    }
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must have room for `cap` bytes or be null with `cap = 0`.
#[no_mangle]
pub unsafe extern "C" fn fedvit_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
