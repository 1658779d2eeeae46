#![allow(dead_code)]

use std::io::{self, Cursor, Read, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hecnn_cli::batch::BatchFile;
use hecnn_cli::pipeline::{encrypt_batch, prepare, seeded, Images, ModelSource, DEFAULT_INPUT_RANGE};
use hecnn_cli::protocol::{encode_frame, encode_keys, read_frame, serve_connection, MsgType, ServeOptions};
use hecnn_core::fixtures::p49;
use hecnn_he::{HeContext, HeParams, KeySet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Everything a client holds for one small-fixture session.
pub struct Session {
    pub model: ModelSource,
    pub ctx: HeContext,
    pub keys: KeySet,
    pub batch: BatchFile,
}

impl Session {
    pub fn new(params: HeParams, instances: usize, seed: u64) -> Self {
        let model = ModelSource::load("fixture:small").unwrap();
        let ctx = HeContext::new(params).unwrap();
        let keys = ctx.keygen(&seed.to_le_bytes());
        let spec = prepare(&model, ctx.plain_modulus(), DEFAULT_INPUT_RANGE).unwrap().spec;
        let imgs = Images::synthetic(seed, instances, model.input_shape());
        let batch = encrypt_batch(&ctx, &keys.public, &spec, &imgs.pixels, instances, &mut seeded(seed)).unwrap();
        Self { model, ctx, keys, batch }
    }

    pub fn small(seed: u64) -> Self {
        Self::new(HeParams::simulator(p49(), 6, 64), 8, seed)
    }

    /// PARAMS, PUBKEY and CIPHERBATCH payloads in order.
    pub fn payloads(&self) -> Vec<(MsgType, Vec<u8>)> {
        vec![
            (MsgType::Params, self.ctx.params().to_json().into_bytes()),
            (MsgType::PubKey, encode_keys(&self.keys.public.to_bytes(), &self.keys.eval.to_bytes())),
            (MsgType::CipherBatch, self.batch.to_bytes()),
        ]
    }
}

/// In-memory stream: reads from a fixed buffer, collects writes.
pub struct Duplex {
    pub input: Cursor<Vec<u8>>,
    pub output: Vec<u8>,
}

impl Duplex {
    pub fn new(input: Vec<u8>) -> Self {
        Self { input: Cursor::new(input), output: Vec::new() }
    }
}

impl Read for Duplex {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.input.read(buf)
    }
}

impl Write for Duplex {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.output.write(buf)
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FuzzStats {
    pub frames: usize,
    pub sessions: usize,
    pub panics: usize,
    /// Sessions whose reply was neither results-only nor a single trailing ERROR frame.
    pub bad_replies: usize,
    pub error_replies: usize,
    pub result_replies: usize,
}

fn mutate(rng: &mut ChaCha20Rng, bytes: &mut Vec<u8>) {
    match rng.random_range(0..4) {
        0 if !bytes.is_empty() => {
            for _ in 0..rng.random_range(1..=8) {
                let i = rng.random_range(0..bytes.len());
                bytes[i] ^= 1 << rng.random_range(0..8);
            }
        }
        1 if !bytes.is_empty() => {
            let cut = rng.random_range(0..bytes.len());
            bytes.truncate(cut);
        }
        2 => {
            for _ in 0..rng.random_range(1..32) {
                bytes.push(rng.random());
            }
        }
        _ if !bytes.is_empty() => {
            let i = rng.random_range(0..bytes.len());
            bytes[i] = rng.random();
        }
        _ => bytes.push(rng.random()),
    }
}

/// One fuzz session: a stream built from the valid frames by a random strategy.
fn fuzz_stream(rng: &mut ChaCha20Rng, valid: &[(MsgType, Vec<u8>)]) -> (Vec<u8>, usize) {
    let frame = |ty: MsgType, p: &[u8]| encode_frame(ty, p);
    match rng.random_range(0..6) {
        // Raw noise.
        0 => {
            let n = rng.random_range(0..64);
            ((0..n).map(|_| rng.random()).collect(), 1)
        }
        // Well-formed header, arbitrary type byte and payload.
        1 => {
            let mut out = b"CDL1".to_vec();
            out.push(rng.random_range(0..8));
            let len = rng.random_range(0..128u32);
            let claimed = if rng.random_bool(0.2) { rng.random() } else { len };
            out.extend_from_slice(&claimed.to_be_bytes());
            out.extend((0..len).map(|_| rng.random::<u8>()));
            (out, 1)
        }
        // Valid session with one payload corrupted.
        2 => {
            let k = rng.random_range(0..valid.len());
            let mut out = Vec::new();
            for (i, (ty, p)) in valid.iter().enumerate() {
                let mut p = p.clone();
                if i == k {
                    mutate(rng, &mut p);
                }
                out.extend(frame(*ty, &p));
            }
            (out, valid.len())
        }
        // Valid session with one header corrupted.
        3 => {
            let k = rng.random_range(0..valid.len());
            let mut out = Vec::new();
            for (i, (ty, p)) in valid.iter().enumerate() {
                let mut f = frame(*ty, p);
                if i == k {
                    let j = rng.random_range(0..9);
                    f[j] = rng.random();
                }
                out.extend(f);
            }
            (out, valid.len())
        }
        // Frames out of order, repeated or missing.
        4 => {
            let n = rng.random_range(0..5);
            let mut out = Vec::new();
            for _ in 0..n {
                let (ty, p) = &valid[rng.random_range(0..valid.len())];
                out.extend(frame(*ty, p));
            }
            (out, n.max(1))
        }
        // Untouched session.
        _ => (valid.iter().flat_map(|(ty, p)| frame(*ty, p)).collect(), valid.len()),
    }
}

fn reply_is_well_formed(out: &[u8], ok: bool) -> (bool, bool) {
    let mut r = Cursor::new(out);
    let mut frames = Vec::new();
    loop {
        match read_frame(&mut r) {
            Ok(Some(f)) => frames.push(f.ty),
            Ok(None) => break,
            Err(_) => return (false, false),
        }
    }
    let errors = frames.iter().filter(|&&t| t == MsgType::Error).count();
    let results = frames.iter().filter(|&&t| t == MsgType::Result).count();
    let well = if ok { errors == 0 && results == frames.len() && results > 0 } else { errors == 1 && frames.last() == Some(&MsgType::Error) };
    (well, errors == 1)
}

/// Drive `serve_connection` with at least `frames` fuzzed frames.
pub fn fuzz_protocol(session: &Session, frames: usize, seed: u64) -> FuzzStats {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let valid = session.payloads();
    let opts = ServeOptions::default();
    let mut stats = FuzzStats::default();
    let hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    while stats.frames < frames {
        let (bytes, n) = fuzz_stream(&mut rng, &valid);
        stats.frames += n;
        stats.sessions += 1;
        let mut io = Duplex::new(bytes);
        match catch_unwind(AssertUnwindSafe(|| serve_connection(&mut io, &session.model, &opts))) {
            Err(_) => stats.panics += 1,
            Ok(res) => {
                let (well, error) = reply_is_well_formed(&io.output, res.is_ok());
                stats.bad_replies += usize::from(!well);
                stats.error_replies += usize::from(error);
                stats.result_replies += usize::from(res.is_ok());
            }
        }
    }
    std::panic::set_hook(hook);
    stats
}
