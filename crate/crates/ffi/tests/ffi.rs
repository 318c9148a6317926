use std::ffi::CStr;
use std::ptr;

use crfountain_ffi::*;

fn last_error() -> String {
    let p = crf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn empty() -> CrfBuffer {
    CrfBuffer {
        data: ptr::null_mut(),
        len: 0,
    }
}

#[test]
fn round_trip_through_handles() {
    let message = b"opaque handles over C";
    unsafe {
        let mut enc = ptr::null_mut();
        let st = crf_encoder_new(message.as_ptr(), message.len(), 8, CrfDistribution::Uniform, 0.0, CrfHeader::Seed, 3, &mut enc);
        assert_eq!(st, CrfStatus::Ok);
        let k = crf_encoder_block_bits(enc);
        assert_eq!(k, 21);
        for algo in [CrfAlgorithm::Majority, CrfAlgorithm::Exhaustive, CrfAlgorithm::Randomized] {
            let mut dec = ptr::null_mut();
            assert_eq!(crf_decoder_new(k, 1, 6, algo, 1, &mut dec), CrfStatus::Ok);
            for _ in 0..120 {
                let mut buf = empty();
                assert_eq!(crf_encoder_next_packet(enc, &mut buf), CrfStatus::Ok);
                assert_eq!(crf_packet_validate(buf.data, buf.len), CrfStatus::Ok);
                assert_eq!(crf_decoder_add_packet(dec, buf.data, buf.len), CrfStatus::Ok);
                crf_buffer_free(&mut buf);
                assert!(buf.data.is_null());
            }
            assert_eq!(crf_decoder_packet_count(dec), 120);
            let mut out = empty();
            assert_eq!(crf_decoder_decode(dec, &mut out), CrfStatus::Ok, "{algo:?}: {}", last_error());
            let got = std::slice::from_raw_parts(out.data, out.len);
            assert_eq!(&got[..message.len()], message);
            crf_buffer_free(&mut out);
            crf_decoder_free(dec);
        }
        crf_encoder_free(enc);
    }
}

#[test]
fn error_codes() {
    unsafe {
        assert_eq!(crf_packet_validate(b"junk".as_ptr(), 4), CrfStatus::MalformedPacket);
        assert!(!last_error().is_empty());
        assert_eq!(crf_packet_validate(ptr::null(), 4), CrfStatus::NullPointer);

        let mut enc = ptr::null_mut();
        let st = crf_encoder_new(b"ab".as_ptr(), 2, 0, CrfDistribution::Uniform, 0.0, CrfHeader::Dense, 0, &mut enc);
        assert_eq!(st, CrfStatus::InvalidArgument);
        assert!(enc.is_null());

        let mut dec = ptr::null_mut();
        assert_eq!(crf_decoder_new(40, 1, 4, CrfAlgorithm::Exhaustive, 0, &mut dec), CrfStatus::InvalidArgument);
        assert_eq!(crf_decoder_new(8, 0, 2, CrfAlgorithm::Exhaustive, 0, &mut dec), CrfStatus::Ok);
        let mut out = empty();
        assert_eq!(crf_decoder_decode(dec, &mut out), CrfStatus::DecodeFailed);
        crf_decoder_free(dec);

        crf_encoder_free(ptr::null_mut());
        crf_decoder_free(ptr::null_mut());
        crf_buffer_free(ptr::null_mut());
    }
}

#[test]
fn rank_limit_matches_product() {
    // prod_{i > d} (1 - 2^-i), truncated far past double precision
    for d in [0u32, 1, 4, 10] {
        let p: f64 = ((d + 1)..200).map(|i| 1.0 - 0.5f64.powi(i as i32)).product();
        assert!((crf_rank_failure_limit(d) - (1.0 - p)).abs() < 1e-12, "d = {d}");
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/crfountain.h")).unwrap();
    for name in [
        "crf_encoder_new",
        "crf_encoder_next_packet",
        "crf_encoder_free",
        "crf_decoder_new",
        "crf_decoder_add_packet",
        "crf_decoder_decode",
        "crf_decoder_free",
        "crf_buffer_free",
        "crf_packet_validate",
        "crf_rank_failure_limit",
        "crf_last_error_message",
        "CRF_STATUS_DECODE_FAILED",
        "typedef struct CrfEncoder CrfEncoder",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
