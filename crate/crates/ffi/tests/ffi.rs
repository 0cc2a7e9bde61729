use std::ffi::CString;
use std::ptr;

use fedvit_ffi::*;

struct Ctx(*mut FedvitContext);

impl Drop for Ctx {
    fn drop(&mut self) {
        unsafe { fedvit_context_free(self.0) }
    }
}

fn small(seed: u64) -> Ctx {
    let name = CString::new("small").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { fedvit_context_new(name.as_ptr(), seed, &mut out) },
        FedvitStatus::Ok
    );
    assert!(!out.is_null());
    Ctx(out)
}

fn encrypt(ctx: &Ctx, values: &[f64]) -> *mut FedvitCiphertext {
    let mut ct = ptr::null_mut();
    assert_eq!(
        unsafe { fedvit_encrypt(ctx.0, values.as_ptr(), values.len(), &mut ct) },
        FedvitStatus::Ok
    );
    ct
}

fn decrypt(ctx: &Ctx, ct: *const FedvitCiphertext, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    assert_eq!(
        unsafe { fedvit_decrypt(ctx.0, ct, out.as_mut_ptr(), len) },
        FedvitStatus::Ok
    );
    out
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let n = unsafe { fedvit_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(255)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn encrypt_add_mean_decrypt() {
    let ctx = small(3);
    assert_eq!(unsafe { fedvit_slot_count(ctx.0) }, 512);
    let a: Vec<f64> = (0..100).map(|i| i as f64 / 10.0 - 5.0).collect();
    let b: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
    let ca = encrypt(&ctx, &a);
    let cb = encrypt(&ctx, &b);
    unsafe {
        let mut sum = ptr::null_mut();
        assert_eq!(fedvit_add(ctx.0, ca, cb, &mut sum), FedvitStatus::Ok);
        let got = decrypt(&ctx, sum, 100);
        for i in 0..100 {
            assert!((got[i] - a[i] - b[i]).abs() < 1e-3);
        }

        let handles = [ca as *const _, cb as *const _];
        let mut mean = ptr::null_mut();
        assert_eq!(
            fedvit_aggregate_mean(ctx.0, handles.as_ptr(), 2, &mut mean),
            FedvitStatus::Ok
        );
        assert_eq!(fedvit_ciphertext_level(mean) + 1, fedvit_ciphertext_level(ca));
        let got = decrypt(&ctx, mean, 100);
        for i in 0..100 {
            assert!((got[i] - (a[i] + b[i]) / 2.0).abs() < 1e-3);
        }
        for h in [ca, cb, sum, mean] {
            fedvit_ciphertext_free(h);
        }
    }
}

#[test]
fn serialize_round_trip_and_sizing() {
    let ctx = small(4);
    let v = [1.5, -2.25, 3.0];
    let ct = encrypt(&ctx, &v);
    unsafe {
        let size = fedvit_ciphertext_size(ct);
        let mut written = 0;
        assert_eq!(
            fedvit_serialize(ct, ptr::null_mut(), 0, &mut written),
            FedvitStatus::BufferTooSmall
        );
        assert_eq!(written, size);
        let mut buf = vec![0u8; size];
        assert_eq!(
            fedvit_serialize(ct, buf.as_mut_ptr(), buf.len(), &mut written),
            FedvitStatus::Ok
        );

        let mut back = ptr::null_mut();
        assert_eq!(
            fedvit_deserialize(ctx.0, buf.as_ptr(), buf.len(), &mut back),
            FedvitStatus::Ok
        );
        let got = decrypt(&ctx, back, 3);
        for (g, e) in got.iter().zip(v) {
            assert!((g - e).abs() < 1e-3);
        }

        buf[size / 2] ^= 0x40;
        let mut bad = ptr::null_mut();
        assert_eq!(
            fedvit_deserialize(ctx.0, buf.as_ptr(), buf.len(), &mut bad),
            FedvitStatus::ChecksumMismatch
        );
        assert!(bad.is_null());
        assert!(last_error().contains("checksum"));
        assert_eq!(
            fedvit_deserialize(ctx.0, buf.as_ptr(), 3, &mut bad),
            FedvitStatus::Truncated
        );
        fedvit_ciphertext_free(ct);
        fedvit_ciphertext_free(back);
    }
}

#[test]
fn error_codes() {
    let ctx = small(5);
    unsafe {
        let mut out = ptr::null_mut();
        let bogus = CString::new("huge").unwrap();
        assert_eq!(fedvit_context_new(bogus.as_ptr(), 1, &mut out), FedvitStatus::Config);
        assert_eq!(fedvit_context_new(ptr::null(), 1, &mut out), FedvitStatus::NullPointer);

        let too_many = vec![0.0; 513];
        let mut ct = ptr::null_mut();
        assert_eq!(
            fedvit_encrypt(ctx.0, too_many.as_ptr(), too_many.len(), &mut ct),
            FedvitStatus::InvalidArgument
        );
        assert_eq!(
            fedvit_aggregate_mean(ctx.0, ptr::null(), 0, &mut ct),
            FedvitStatus::Contract
        );
        assert_eq!(
            fedvit_add(ctx.0, ptr::null(), ptr::null(), &mut ct),
            FedvitStatus::NullPointer
        );

        let mut n = 0;
        assert_eq!(fedvit_chunk_count(120_000, 4096, &mut n), FedvitStatus::Ok);
        assert_eq!(n, 30);
        assert_eq!(fedvit_chunk_count(768, 4096, &mut n), FedvitStatus::Ok);
        assert_eq!(n, 1);
        assert_eq!(fedvit_chunk_count(0, 4096, &mut n), FedvitStatus::Contract);

        fedvit_context_free(ptr::null_mut());
        fedvit_ciphertext_free(ptr::null_mut());
        assert_eq!(fedvit_ciphertext_size(ptr::null()), 0);
    }
}

#[test]
fn header_is_current_and_compiles() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(dir.join("include/fedvit.h")).unwrap();
    for name in [
        "fedvit_context_new",
        "fedvit_encrypt",
        "fedvit_decrypt",
        "fedvit_aggregate_mean",
        "fedvit_serialize",
        "fedvit_deserialize",
        "fedvit_chunk_count",
        "FEDVIT_STATUS_CHECKSUM_MISMATCH = 22",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipping compile check");
        return;
    };
    assert!(cc.status.success());
    let tmp = tempfile::tempdir().unwrap();
    let obj = tmp.path().join("smoke.o");
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-c"])
        .arg("-I")
        .arg(dir.join("include"))
        .arg(dir.join("tests/smoke.c"))
        .arg("-o")
        .arg(&obj)
        .status()
        .unwrap();
    assert!(status.success());
}
