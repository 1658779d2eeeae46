use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use hecnn_approx::{Activation, Interval};
use hecnn_cli::batch::{BatchFile, BatchKind};
use hecnn_cli::bench::run_bench;
use hecnn_cli::config::{check_batch_size, Settings};
use hecnn_cli::fit::{fit, FitMeasure, FitMethod, FitRequest};
use hecnn_cli::pipeline::*;
use hecnn_cli::protocol::{self, ServeOptions, Server};
use hecnn_cli::CliError;
use hecnn_core::fixtures::p49;
use hecnn_core::modelio::save_model;
use hecnn_core::Shape;
use hecnn_he::{Backend, HeParams, DEFAULT_LEVELS, DEFAULT_RING_DEGREE};

/// Print to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "hecnn", version, about = "Encrypted CNN inference with polynomial activations")]
struct Cli {
    /// TOML file with session settings (also CDL_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    session: SessionArgs,
    #[command(subcommand)]
    cmd: Cmd,
}

/// Highest-precedence layer; each also reads CDL_<NAME> and the config file.
#[derive(Args, Default)]
struct SessionArgs {
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[arg(long, global = true)]
    public_key: Option<PathBuf>,
    #[arg(long, global = true)]
    secret_key: Option<PathBuf>,
    #[arg(long, global = true)]
    eval_key: Option<PathBuf>,
    /// Model file, or fixture:<small|model1|model1-small>[:seed].
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    /// simulator or rlwe.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// host:port of the inference server.
    #[arg(long, global = true)]
    addr: Option<String>,
}

impl From<SessionArgs> for Settings {
    fn from(a: SessionArgs) -> Self {
        Settings {
            params: a.params,
            public_key: a.public_key,
            secret_key: a.secret_key,
            eval_key: a.eval_key,
            model: a.model,
            batch_size: a.batch_size,
            backend: a.backend,
            addr: a.addr,
        }
    }
}

/// Encryption parameters for commands that create their own context.
#[derive(Args)]
struct ParamArgs {
    /// Plaintext modulus; defaults to a 49-bit NTT-friendly prime.
    #[arg(long)]
    p: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: u32,
    /// Slot count (simulator) or ring degree (rlwe); defaults to the batch size or 4096.
    #[arg(long)]
    slots: Option<usize>,
}

impl ParamArgs {
    fn build(&self, s: &Settings) -> Result<HeParams, CliError> {
        let p = self.p.unwrap_or_else(p49);
        let params = match s.backend()?.unwrap_or(Backend::Simulator) {
            Backend::Simulator => HeParams::simulator(p, self.levels, self.slots.unwrap_or(s.batch_size())),
            Backend::Rlwe => HeParams::rlwe(p, self.levels, self.slots.unwrap_or(DEFAULT_RING_DEGREE)),
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Args)]
struct ImageArgs {
    /// IDX image file; needs --labels.
    #[arg(long, requires = "labels")]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Use this many synthetic images instead of IDX files.
    #[arg(long, conflicts_with = "images")]
    synthetic: Option<usize>,
    /// Read at most this many IDX images.
    #[arg(long)]
    limit: Option<usize>,
}

impl ImageArgs {
    fn load(&self, shape: &Shape, seed: u64, default_count: usize) -> Result<Images, CliError> {
        match (&self.images, &self.labels) {
            (Some(i), Some(l)) => Images::from_idx(i, l, self.limit.or(Some(default_count))),
            _ => Ok(Images::synthetic(seed, self.synthetic.unwrap_or(default_count), shape)),
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("bad number {a:?}"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("bad number {b:?}"))?;
    Ok((lo, hi))
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a polynomial replacement for an activation and write its report.
    Fit {
        #[arg(long, default_value = "relu")]
        activation: Activation,
        #[arg(long, value_enum)]
        method: FitMethod,
        #[arg(long)]
        degree: usize,
        #[arg(long, value_parser = parse_range, default_value = "-8,8", allow_hyphen_values = true)]
        interval: (f64, f64),
        #[arg(long, value_enum)]
        measure: Option<FitMeasure>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate params.json and the secret, public and evaluation keys.
    Keygen {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out_dir: PathBuf,
        /// Key seed; random when omitted.
        #[arg(long)]
        seed: Option<String>,
    },
    /// Write a fixture model file.
    GenFixture {
        #[arg(long, default_value = "small")]
        kind: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Store weights in a binary blob next to the manifest.
        #[arg(long)]
        blob: bool,
    },
    /// Interval bound on every layer's integer values.
    Capacity {
        #[arg(long)]
        p: Option<u64>,
        #[arg(long, value_parser = parse_range, default_value = "0,255", allow_hyphen_values = true)]
        input_range: (f64, f64),
    },
    /// Multiplicative depth and plaintext-multiplication counts.
    Depth {
        #[arg(long)]
        p: Option<u64>,
        /// Fail with exit 3 if the model needs more than this many levels.
        #[arg(long)]
        levels: Option<u32>,
    },
    /// Quantize, pack and encrypt a batch of images.
    Encrypt {
        #[command(flatten)]
        images: ImageArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Evaluate the model on an encrypted batch.
    Infer {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_overflow: bool,
    },
    /// Decrypt a result batch and print the predicted classes.
    Decrypt {
        #[arg(long)]
        input: PathBuf,
        /// Write logits and predictions as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Keygen, encrypt, infer and decrypt in one go, then compare with both oracles.
    RunE2e {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        images: ImageArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        allow_overflow: bool,
    },
    /// Per-stage timing and transfer sizes for one batch.
    Bench {
        #[command(flatten)]
        params: ParamArgs,
        /// Instances in the batch; defaults to the batch size.
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        allow_overflow: bool,
        /// Also run the plaintext engine and compare.
        #[arg(long)]
        verify: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Accept inference sessions over TCP.
    Serve {
        #[arg(long)]
        allow_overflow: bool,
        /// Exit after this many connections.
        #[arg(long)]
        max_connections: Option<usize>,
    },
    /// Send an encrypted batch to a server and store the results.
    Send {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn model(s: &Settings) -> Result<ModelSource, CliError> {
    ModelSource::load(Settings::require(&s.model, "model")?)
}

fn context(s: &Settings) -> Result<hecnn_he::HeContext, CliError> {
    let ctx = load_context(Settings::require(&s.params, "params")?)?;
    if let Some(b) = s.backend()?.filter(|&b| b != ctx.params().backend) {
        return Err(CliError::validation(format!("backend {b:?} requested but the parameter file uses {:?}", ctx.params().backend)));
    }
    Ok(ctx)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    write_file(path, serde_json::to_string_pretty(value)?.as_bytes())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let s = Settings::layered(cli.session.into(), cli.config.as_deref(), |k| std::env::var(k).ok())?;
    match cli.cmd {
        Cmd::Fit { activation, method, degree, interval, measure, out } => {
            let interval = Interval::new(interval.0, interval.1)?;
            let report = fit(&FitRequest { activation, method, degree, interval, measure })?;
            let json = report.to_json()?;
            match out {
                Some(path) => write_file(&path, json.as_bytes())?,
                None => say!("{json}"),
            }
            eprintln!("sup error {:.6e}, L2 error {:.6e}", report.sup_error, report.l2_error);
        }
        Cmd::Keygen { params, out_dir, seed } => {
            let params = params.build(&s)?;
            check_batch_size(s.batch_size().min(params.slot_count), &params)?;
            let seed = seed.map(String::into_bytes).unwrap_or_else(|| rand::random::<[u8; 32]>().to_vec());
            let files = KeyFiles::in_dir(&out_dir);
            keygen(&params, &seed, &files)?;
            say!("wrote {}, {}, {}, {}", files.params.display(), files.secret.display(), files.public.display(), files.eval.display());
        }
        Cmd::GenFixture { kind, seed, out, blob } => {
            let src = ModelSource::load(&format!("fixture:{kind}:{seed}"))?;
            save_model(&out, &src.float, &src.meta, blob)?;
            say!("wrote {}", out.display());
        }
        Cmd::Capacity { p, input_range } => {
            let src = model(&s)?;
            let p = p.or(src.meta.p).unwrap_or_else(p49);
            let prepared = prepare(&src, p, input_range)?;
            say!("{}", prepared.capacity.to_json());
            if !prepared.capacity.pass {
                return Err(CliError::capacity(format!("capacity check fails at p = {p}")));
            }
        }
        Cmd::Depth { p, levels } => {
            let src = model(&s)?;
            let prepared = prepare(&src, p.or(src.meta.p).unwrap_or_else(p49), DEFAULT_INPUT_RANGE)?;
            say!("{}", serde_json::to_string_pretty(&prepared.depth)?);
            if let Some(l) = levels {
                prepared.gate(l, true)?;
            }
        }
        Cmd::Encrypt { images, out, seed } => {
            let ctx = context(&s)?;
            let pk = load_public(&ctx, Settings::require(&s.public_key, "public-key")?)?;
            let src = model(&s)?;
            let prepared = prepare(&src, ctx.plain_modulus(), DEFAULT_INPUT_RANGE)?;
            let batch_size = s.batch_size.unwrap_or(ctx.slot_count());
            let seed = seed.unwrap_or_else(rand::random);
            let imgs = images.load(src.input_shape(), seed, batch_size)?;
            let batch = encrypt_batch(&ctx, &pk, &prepared.spec, &imgs.pixels, batch_size, &mut seeded(seed))?;
            write_file(&out, &batch.to_bytes())?;
            say!("encrypted {} instances into {} ciphertexts", batch.instances, batch.cts.len());
        }
        Cmd::Infer { input, out, allow_overflow } => {
            let ctx = context(&s)?;
            let ek = load_eval(&ctx, Settings::require(&s.eval_key, "eval-key")?)?;
            let prepared = prepare(&model(&s)?, ctx.plain_modulus(), DEFAULT_INPUT_RANGE)?;
            prepared.gate(ctx.params().levels, allow_overflow)?;
            let batch = BatchFile::from_bytes(&read_file(&input)?)?;
            let results = infer_batch(&ctx, &ek, &prepared.spec, &batch, |t| {
                let budget = t.min_budget.map_or("n/a".to_string(), |b| format!("{b:.0} bits"));
                eprintln!("layer {:>2} {:<16} {:>9.3} s  budget {budget}", t.index, t.kind, t.elapsed.as_secs_f64());
            })?;
            write_file(&out, &results.to_bytes())?;
        }
        Cmd::Decrypt { input, json } => {
            let ctx = context(&s)?;
            let sk = load_secret(&ctx, Settings::require(&s.secret_key, "secret-key")?)?;
            let dec = decrypt_batch(&ctx, &sk, &BatchFile::from_bytes(&read_file(&input)?)?)?;
            for (i, p) in dec.predictions.iter().enumerate() {
                say!("{i}\t{p}");
            }
            if let Some(path) = json {
                write_json(&path, &dec)?;
            }
        }
        Cmd::RunE2e { params, images, seed, allow_overflow } => {
            let params = match &s.params {
                Some(path) => load_context(path)?.params().clone(),
                None => params.build(&s)?,
            };
            let src = model(&s)?;
            let count = s.batch_size.unwrap_or(64).min(params.slot_count);
            let imgs = images.load(src.input_shape(), seed, count)?;
            let report = run_e2e(&src, &params, &imgs, seed, allow_overflow)?;
            say!("{report}");
            if !report.all_equal() {
                return Err(CliError::noise("encrypted logits differ from the plaintext engine"));
            }
        }
        Cmd::Bench { params, instances, seed, allow_overflow, verify, json } => {
            let params = params.build(&s)?;
            let n = instances.unwrap_or(s.batch_size()).min(params.slot_count);
            let report = run_bench(&model(&s)?, &params, n, seed, allow_overflow, verify)?;
            say!("{report}");
            if let Some(path) = json {
                write_json(&path, &report)?;
            }
        }
        Cmd::Serve { allow_overflow, max_connections } => {
            let src = Arc::new(model(&s)?);
            let server = Server::bind(Settings::require(&s.addr, "addr")?.as_str())?;
            eprintln!("listening on {}", server.local_addr()?);
            server.run(src, ServeOptions { allow_overflow, ..ServeOptions::default() }, max_connections)?;
        }
        Cmd::Send { input, out } => {
            let ctx = context(&s)?;
            let public = read_file(Settings::require(&s.public_key, "public-key")?)?;
            let eval = read_file(Settings::require(&s.eval_key, "eval-key")?)?;
            let bytes = read_file(&input)?;
            let batch = BatchFile::from_bytes(&bytes)?;
            let cts = protocol::send(Settings::require(&s.addr, "addr")?, ctx.params(), &public, &eval, &bytes)?;
            let results = BatchFile {
                kind: BatchKind::Results,
                fingerprint: batch.fingerprint,
                instances: batch.instances,
                shape: Shape::flat(cts.len()),
                cts,
            };
            write_file(&out, &results.to_bytes())?;
            say!("received {} result ciphertexts", results.cts.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind as u8)
        }
    }
}
