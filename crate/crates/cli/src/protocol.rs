//! Length-prefixed frames over a byte stream.
//!
//! A frame is `"CDL1"`, a u8 message type, a big-endian u32 payload length, then the payload.
//! A session sends PARAMS, PUBKEY and CIPHERBATCH in that order; the server answers with one
//! RESULT per logit ciphertext, or one ERROR, and closes.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::time::Duration;

use hecnn_he::{HeContext, HeParams};
use thiserror::Error;

use crate::batch::{BatchFile, BatchKind};
use crate::error::{CliError, ExitKind};
use crate::pipeline::{infer_batch, prepare, ModelSource, DEFAULT_INPUT_RANGE};

pub const FRAME_MAGIC: &[u8; 4] = b"CDL1";
pub const HEADER_LEN: usize = 9;
/// Largest accepted payload. A full 8192-slot Model 1 input batch is ~52 MB.
pub const MAX_PAYLOAD: u32 = 1 << 30;
pub const IO_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgType {
    Params = 1,
    PubKey = 2,
    CipherBatch = 3,
    Result = 4,
    Error = 5,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => Self::Params,
            2 => Self::PubKey,
            3 => Self::CipherBatch,
            4 => Self::Result,
            5 => Self::Error,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub ty: MsgType,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("bad frame magic {0:02x?}")]
    Magic([u8; 4]),
    #[error("unknown message type {0}")]
    Type(u8),
    #[error("payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    TooLarge(u32),
    #[error("stream ended inside a frame")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        CliError::transport(e.to_string())
    }
}

pub fn encode_frame(ty: MsgType, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(FRAME_MAGIC);
    out.push(ty as u8);
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

pub fn write_frame(w: &mut impl Write, ty: MsgType, payload: &[u8]) -> io::Result<()> {
    if payload.len() > MAX_PAYLOAD as usize {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "payload too large for one frame"));
    }
    w.write_all(&encode_frame(ty, payload))?;
    w.flush()
}

/// Read one frame. `Ok(None)` on a clean end of stream between frames.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Frame>, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(FrameError::Truncated),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let magic: [u8; 4] = header[..4].try_into().unwrap();
    if &magic != FRAME_MAGIC {
        return Err(FrameError::Magic(magic));
    }
    let ty = MsgType::from_u8(header[4]).ok_or(FrameError::Type(header[4]))?;
    let len = u32::from_be_bytes(header[5..9].try_into().unwrap());
    if len > MAX_PAYLOAD {
        return Err(FrameError::TooLarge(len));
    }
    // Grow with the data actually received rather than trusting the header.
    let mut payload = Vec::with_capacity((len as usize).min(1 << 16));
    r.take(len as u64).read_to_end(&mut payload)?;
    if payload.len() != len as usize {
        return Err(FrameError::Truncated);
    }
    Ok(Some(Frame { ty, payload }))
}

/// PUBKEY payload: u32 big-endian public-key length, public key, evaluation key.
pub fn encode_keys(public: &[u8], eval: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + public.len() + eval.len());
    out.extend_from_slice(&(public.len() as u32).to_be_bytes());
    out.extend_from_slice(public);
    out.extend_from_slice(eval);
    out
}

pub fn decode_keys(payload: &[u8]) -> Result<(&[u8], &[u8]), CliError> {
    let bad = || CliError::validation("PUBKEY payload is malformed");
    let len = u32::from_be_bytes(payload.get(..4).ok_or_else(bad)?.try_into().unwrap()) as usize;
    let public = payload.get(4..4usize.checked_add(len).ok_or_else(bad)?).ok_or_else(bad)?;
    Ok((public, &payload[4 + len..]))
}

/// ERROR payload: u8 exit code, then a UTF-8 message.
pub fn encode_error(e: &CliError) -> Vec<u8> {
    let mut out = vec![e.code()];
    out.extend_from_slice(e.message.as_bytes());
    out
}

pub fn decode_error(payload: &[u8]) -> CliError {
    let kind = payload.first().and_then(|&c| ExitKind::from_code(c)).unwrap_or(ExitKind::Transport);
    let message = String::from_utf8_lossy(payload.get(1..).unwrap_or_default());
    CliError::new(kind, format!("server: {message}"))
}

/// Server-side settings shared by every connection.
#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub allow_overflow: bool,
    pub input_range: (f64, f64),
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self { allow_overflow: false, input_range: DEFAULT_INPUT_RANGE }
    }
}

fn expect(r: &mut impl Read, ty: MsgType) -> Result<Vec<u8>, CliError> {
    match read_frame(r)? {
        Some(f) if f.ty == ty => Ok(f.payload),
        Some(f) => Err(CliError::transport(format!("expected {ty:?} frame, got {:?}", f.ty))),
        None => Err(CliError::transport(format!("connection closed before {ty:?} frame"))),
    }
}

fn session<S: Read + Write>(stream: &mut S, model: &ModelSource, opts: &ServeOptions) -> Result<usize, CliError> {
    let params = expect(stream, MsgType::Params)?;
    let params = std::str::from_utf8(&params).map_err(|_| CliError::validation("PARAMS payload is not UTF-8"))?;
    let params = HeParams::from_json(params)?;
    let ctx = HeContext::new(params)?;
    let prepared = prepare(model, ctx.plain_modulus(), opts.input_range)?;
    prepared.gate(ctx.params().levels, opts.allow_overflow)?;

    let keys = expect(stream, MsgType::PubKey)?;
    let (public, eval) = decode_keys(&keys)?;
    let pk = ctx.public_key_from_bytes(public)?;
    let ek = ctx.eval_key_from_bytes(eval)?;

    let batch = BatchFile::from_bytes(&expect(stream, MsgType::CipherBatch)?)?;
    if batch.kind != BatchKind::Inputs {
        return Err(CliError::validation("CIPHERBATCH must carry an input batch"));
    }
    if batch.fingerprint != pk.fingerprint() {
        return Err(CliError::noise("checksum mismatch: batch was not encrypted under the supplied public key"));
    }
    let results = infer_batch(&ctx, &ek, &prepared.spec, &batch, |_| {})?;
    for ct in &results.cts {
        write_frame(stream, MsgType::Result, ct).map_err(|e| CliError::transport(e.to_string()))?;
    }
    Ok(results.cts.len())
}

/// Handle one connection: one inference, then close. Failures are reported to the peer as an
/// ERROR frame before returning.
pub fn serve_connection<S: Read + Write>(stream: &mut S, model: &ModelSource, opts: &ServeOptions) -> Result<usize, CliError> {
    session(stream, model, opts).inspect_err(|e| {
        let _ = write_frame(stream, MsgType::Error, &encode_error(e));
    })
}

pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self, CliError> {
        let listener = TcpListener::bind(addr).map_err(|e| CliError::transport(format!("bind: {e}")))?;
        Ok(Self { listener })
    }

    pub fn local_addr(&self) -> Result<SocketAddr, CliError> {
        self.listener.local_addr().map_err(|e| CliError::transport(e.to_string()))
    }

    /// Accept connections, one thread each. Stops after `max_connections` if given.
    pub fn run(self, model: Arc<ModelSource>, opts: ServeOptions, max_connections: Option<usize>) -> Result<(), CliError> {
        let mut handles = Vec::new();
        for (i, conn) in self.listener.incoming().enumerate() {
            let mut stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("accept: {e}");
                    continue;
                }
            };
            let (model, opts) = (Arc::clone(&model), opts.clone());
            handles.push(std::thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                let _ = stream.set_read_timeout(Some(IO_TIMEOUT));
                let _ = stream.set_write_timeout(Some(IO_TIMEOUT));
                match serve_connection(&mut stream, &model, &opts) {
                    Ok(n) => eprintln!("{peer}: sent {n} result ciphertexts"),
                    Err(e) => eprintln!("{peer}: {e}"),
                }
            }));
            handles.retain(|h| !h.is_finished());
            if max_connections.is_some_and(|m| i + 1 >= m) {
                break;
            }
        }
        for h in handles {
            let _ = h.join();
        }
        Ok(())
    }
}

/// Client side: send one session, collect the RESULT payloads.
pub fn send_session<S: Read + Write>(stream: &mut S, params: &HeParams, public: &[u8], eval: &[u8], batch: &[u8]) -> Result<Vec<Vec<u8>>, CliError> {
    let sent = write_frame(stream, MsgType::Params, params.to_json().as_bytes())
        .and_then(|_| write_frame(stream, MsgType::PubKey, &encode_keys(public, eval)))
        .and_then(|_| write_frame(stream, MsgType::CipherBatch, batch));
    if let Err(e) = sent {
        // The server may have rejected an early frame and closed; prefer its explanation.
        return Err(match read_frame(stream) {
            Ok(Some(f)) if f.ty == MsgType::Error => decode_error(&f.payload),
            _ => CliError::transport(e.to_string()),
        });
    }
    let mut results = Vec::new();
    while let Some(frame) = read_frame(stream)? {
        match frame.ty {
            MsgType::Result => results.push(frame.payload),
            MsgType::Error => return Err(decode_error(&frame.payload)),
            other => return Err(CliError::transport(format!("unexpected {other:?} frame from server"))),
        }
    }
    if results.is_empty() {
        return Err(CliError::transport("server closed without results"));
    }
    Ok(results)
}

pub fn send(addr: &str, params: &HeParams, public: &[u8], eval: &[u8], batch: &[u8]) -> Result<Vec<Vec<u8>>, CliError> {
    let mut stream = TcpStream::connect(addr).map_err(|e| CliError::transport(format!("connect {addr}: {e}")))?;
    stream.set_read_timeout(Some(IO_TIMEOUT)).map_err(|e| CliError::transport(e.to_string()))?;
    send_session(&mut stream, params, public, eval, batch)
}
