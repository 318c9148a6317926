//! C interface to the encoder, the decoders and a few numeric helpers.
//!
//! Every function returns a [`CrfStatus`]; on failure a description is kept in
//! thread-local storage and can be read with [`crf_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Byte buffers handed out by the library are released with [`crf_buffer_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use crfountain::coding::{deserialize_packet, serialize_packet, CodingDistribution, CodingError, Encoder, HeaderForm, Packet, DEFAULT_WINDOW_C};
use crfountain::decoders::{bp_decode_coded, decode_all_blocks, g_for_base, plan_uniform, Algorithm, DecodeResult, DEFAULT_EXHAUSTIVE_CEILING};
use crfountain::gf2::{rank_failure_limit, BitVector};
use crfountain::rng::{rng_from_seed, CodeRng};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrfStatus {
    Ok = 0,
    /// The decoder could not certify a unique answer.
    DecodeFailed = 1,
    InvalidArgument = 2,
    MalformedPacket = 3,
    NullPointer = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrfDistribution {
    Uniform = 0,
    LogSparse = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrfHeader {
    Dense = 0,
    IndexList = 1,
    Seed = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrfAlgorithm {
    BeliefPropagation = 0,
    Majority = 1,
    Exhaustive = 2,
    Randomized = 3,
}

/// Bytes owned by the library.
#[repr(C)]
pub struct CrfBuffer {
    pub data: *mut u8,
    pub len: usize,
}

pub struct CrfEncoder {
    inner: Encoder,
}

pub struct CrfDecoder {
    k: usize,
    f: usize,
    epsilon: usize,
    algorithm: CrfAlgorithm,
    rng: CodeRng,
    packets: Vec<Packet>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CrfStatus, message: impl Into<String>) -> CrfStatus {
    set_error(message.into());
    status
}

fn coding_status(e: CodingError) -> CrfStatus {
    let status = match e {
        CodingError::Malformed { .. } => CrfStatus::MalformedPacket,
        _ => CrfStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> CrfStatus) -> CrfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(CrfStatus::Panic, msg)
        }
    }
}

/// # Safety
/// `data` must point to `len` readable bytes, or be null with `len == 0`.
unsafe fn bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if len == 0 {
        return Some(&[]);
    }
    if data.is_null() {
        return None;
    }
    Some(std::slice::from_raw_parts(data, len))
}

fn hand_out(v: Vec<u8>, out: &mut CrfBuffer) {
    let boxed = v.into_boxed_slice();
    out.len = boxed.len();
    out.data = Box::into_raw(boxed) as *mut u8;
}

/// Message describing the most recent failure on this thread, or null.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn crf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `buffer` must be null or have been filled by this library and not freed.
#[no_mangle]
pub unsafe extern "C" fn crf_buffer_free(buffer: *mut CrfBuffer) {
    if buffer.is_null() {
        return;
    }
    let b = &mut *buffer;
    if !b.data.is_null() {
        drop(Box::from_raw(ptr::slice_from_raw_parts_mut(b.data, b.len)));
    }
    b.data = ptr::null_mut();
    b.len = 0;
}

/// Creates an encoder for `message_len` bytes split into `blocks` blocks.
/// `delta` is only read for the log-sparse distribution.
///
/// # Safety
/// `message` must point to `message_len` bytes and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crf_encoder_new(
    message: *const u8,
    message_len: usize,
    blocks: usize,
    distribution: CrfDistribution,
    delta: f64,
    header: CrfHeader,
    seed: u64,
    out: *mut *mut CrfEncoder,
) -> CrfStatus {
    guard(|| {
        if out.is_null() {
            return fail(CrfStatus::NullPointer, "out is null");
        }
        let Some(msg) = bytes(message, message_len) else {
            return fail(CrfStatus::NullPointer, "message is null");
        };
        let dist = match distribution {
            CrfDistribution::Uniform => CodingDistribution::Uniform,
            CrfDistribution::LogSparse => CodingDistribution::LogSparse {
                delta,
                window_c: DEFAULT_WINDOW_C,
            },
        };
        let form = match header {
            CrfHeader::Dense => HeaderForm::Dense,
            CrfHeader::IndexList => HeaderForm::IndexList,
            CrfHeader::Seed => HeaderForm::Seed,
        };
        let bits = BitVector::from_bytes_lsb(msg.len() * 8, msg);
        match Encoder::new(&bits, blocks, dist, form, seed) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(CrfEncoder { inner }));
                CrfStatus::Ok
            }
            Err(e) => coding_status(e),
        }
    })
}

/// Number of bits per block, which is the `k` a decoder must be created with.
///
/// # Safety
/// `encoder` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn crf_encoder_block_bits(encoder: *const CrfEncoder) -> usize {
    encoder.as_ref().map_or(0, |e| e.inner.layout().block_bits)
}

/// Serializes the next packet of the stream into `out`.
///
/// # Safety
/// `encoder` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crf_encoder_next_packet(encoder: *mut CrfEncoder, out: *mut CrfBuffer) -> CrfStatus {
    guard(|| {
        let (Some(enc), Some(out)) = (encoder.as_mut(), out.as_mut()) else {
            return fail(CrfStatus::NullPointer, "null handle or buffer");
        };
        hand_out(serialize_packet(&enc.inner.next_packet()), out);
        CrfStatus::Ok
    })
}

/// # Safety
/// `encoder` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crf_encoder_free(encoder: *mut CrfEncoder) {
    if !encoder.is_null() {
        drop(Box::from_raw(encoder));
    }
}

/// Creates a decoder expecting packets over `k`-bit blocks with at most `f`
/// corrupted packets and `epsilon` packets of slack.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn crf_decoder_new(
    k: usize,
    f: usize,
    epsilon: usize,
    algorithm: CrfAlgorithm,
    seed: u64,
    out: *mut *mut CrfDecoder,
) -> CrfStatus {
    guard(|| {
        if out.is_null() {
            return fail(CrfStatus::NullPointer, "out is null");
        }
        if let Err(e) = plan_uniform(k, f, epsilon) {
            return fail(CrfStatus::InvalidArgument, e.to_string());
        }
        if algorithm == CrfAlgorithm::Exhaustive && k > DEFAULT_EXHAUSTIVE_CEILING {
            return fail(CrfStatus::InvalidArgument, format!("k = {k} exceeds the exhaustive ceiling {DEFAULT_EXHAUSTIVE_CEILING}"));
        }
        *out = Box::into_raw(Box::new(CrfDecoder {
            k,
            f,
            epsilon,
            algorithm,
            rng: rng_from_seed(seed),
            packets: Vec::new(),
        }));
        CrfStatus::Ok
    })
}

/// Adds one serialized packet.
///
/// # Safety
/// `decoder` must be a live handle and `data` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn crf_decoder_add_packet(decoder: *mut CrfDecoder, data: *const u8, len: usize) -> CrfStatus {
    guard(|| {
        let Some(dec) = decoder.as_mut() else {
            return fail(CrfStatus::NullPointer, "decoder is null");
        };
        let Some(raw) = bytes(data, len) else {
            return fail(CrfStatus::NullPointer, "data is null");
        };
        match deserialize_packet(raw) {
            Ok(p) if p.k() != dec.k => fail(CrfStatus::InvalidArgument, format!("packet has k = {}, decoder expects {}", p.k(), dec.k)),
            Ok(p) if dec.packets.first().is_some_and(|q| q.m() != p.m()) => fail(CrfStatus::InvalidArgument, "payload width differs from earlier packets"),
            Ok(p) => {
                dec.packets.push(p);
                CrfStatus::Ok
            }
            Err(e) => coding_status(e),
        }
    })
}

/// # Safety
/// `decoder` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn crf_decoder_packet_count(decoder: *const CrfDecoder) -> usize {
    decoder.as_ref().map_or(0, |d| d.packets.len())
}

/// Decodes the packets added so far. On success `out` holds the blocks
/// concatenated in order, LSB-first, including any zero padding the encoder
/// appended; callers truncate to the original message length.
///
/// # Safety
/// `decoder` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn crf_decoder_decode(decoder: *mut CrfDecoder, out: *mut CrfBuffer) -> CrfStatus {
    guard(|| {
        let (Some(dec), Some(out)) = (decoder.as_mut(), out.as_mut()) else {
            return fail(CrfStatus::NullPointer, "null handle or buffer");
        };
        if dec.packets.is_empty() {
            return fail(CrfStatus::DecodeFailed, "no packets");
        }
        let blocks = if dec.algorithm == CrfAlgorithm::BeliefPropagation {
            match bp_decode_coded(&dec.packets) {
                Ok((_, Some(blocks))) => blocks,
                Ok((_, None)) => return fail(CrfStatus::DecodeFailed, "belief propagation stalled"),
                Err(e) => return fail(CrfStatus::InvalidArgument, e.to_string()),
            }
        } else {
            let plan = match plan_uniform(dec.k, dec.f, dec.epsilon) {
                Ok(p) => p,
                Err(e) => return fail(CrfStatus::InvalidArgument, e.to_string()),
            };
            let algorithm = match dec.algorithm {
                CrfAlgorithm::Majority => Algorithm::Majority,
                CrfAlgorithm::Exhaustive => Algorithm::Exhaustive,
                _ => Algorithm::Randomized {
                    g: g_for_base(dec.k, dec.f, dec.epsilon.max(1), 2.0),
                },
            };
            match decode_all_blocks(&dec.packets, &plan, algorithm, &mut dec.rng) {
                Ok(outcome) => match outcome.result {
                    DecodeResult::Recovered(blocks) => blocks,
                    DecodeResult::Failed(reason) => return fail(CrfStatus::DecodeFailed, format!("{reason:?}")),
                },
                Err(e) => return fail(CrfStatus::InvalidArgument, e.to_string()),
            }
        };
        hand_out(BitVector::concat(&blocks).to_bytes_lsb(), out);
        CrfStatus::Ok
    })
}

/// # Safety
/// `decoder` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn crf_decoder_free(decoder: *mut CrfDecoder) {
    if !decoder.is_null() {
        drop(Box::from_raw(decoder));
    }
}

/// Checks that `data` holds exactly one well-formed packet.
///
/// # Safety
/// `data` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn crf_packet_validate(data: *const u8, len: usize) -> CrfStatus {
    guard(|| {
        let Some(raw) = bytes(data, len) else {
            return fail(CrfStatus::NullPointer, "data is null");
        };
        match deserialize_packet(raw) {
            Ok(_) => CrfStatus::Ok,
            Err(e) => coding_status(e),
        }
    })
}

/// Limit, as the row count grows, of the probability that a uniform random
/// binary matrix with `d` more rows than columns is not of full column rank.
#[no_mangle]
pub extern "C" fn crf_rank_failure_limit(d: u32) -> f64 {
    rank_failure_limit(d)
}
