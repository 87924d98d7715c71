//! The `sepris` command line.
//!
//! Exit codes: 0 success, 1 a check or threshold failed, 2 bad usage or
//! unreadable input.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sepris_core::contract::{Date, TimeOfDay};
use sepris_core::dab::{self, wire, DabError, DabKeyset, FrameBuffer};
use sepris_core::envelope::generate_keypair;
use sepris_core::ledger::{decrypt_body, validate_chain, BodyKeyStore, LedgerError, TxKind};
use sepris_core::metrics::{security_report_with, DabView, IdentityView, MetricsError, ReportOptions, SecurityReport, Thresholds};
use sepris_core::network::{body_key_for_seed, run_scenario, RequestRecord, ScenarioConfig, BODY_KEY_ID};
use sepris_core::storage::{AuditRecord, StorageError, StorageSite, VideoRecord};
use sepris_core::synth;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sepris_core::Digest256;
use thiserror::Error;

use crate::error::FormatError;
use crate::{chainfile, keyfile, keyset, pnm, video};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Usage(String),
    #[error("DuplicateLabel: key files for {0:?} already exist (use --force to overwrite)")]
    DuplicateLabel(String),
    #[error(transparent)]
    Dab(#[from] DabError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) => 1,
            _ => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Format(FormatError::Io { path: path.to_path_buf(), source })
}

#[derive(Debug, Parser)]
#[command(name = "sepris", version, about = "Privacy-preserving surveillance video sharing: keys, codec, metrics and protocol simulation")]
pub struct Cli {
    /// Configuration directory (keys/, store/, sim/ live below it).
    #[arg(long, env = "SEPRIS_HOME", global = true)]
    pub home: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive an identity key pair, or a DAB session keyset with --keyset.
    Keygen(KeygenArgs),
    /// Pack frames into an SPRS container in the store.
    Ingest(IngestArgs),
    /// Encipher a PGM/PPM image or an SPRS video into SPRC.
    Encipher(EncipherArgs),
    /// Decipher SPRC back to PGM/PPM.
    Decipher(DecipherArgs),
    /// Security report for one image; exits 1 if any threshold fails.
    Metrics(MetricsArgs),
    /// Protocol simulation.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long, required_unless_present = "keyset")]
    pub label: Option<String>,
    /// Seed material; the same seed always gives the same key.
    #[arg(long)]
    pub seed: String,
    #[arg(long)]
    pub force: bool,
    /// Output directory for SPRK files (default: <home>/keys).
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Write a DAB keyset JSON file here instead of an identity key.
    #[arg(long, conflicts_with = "label")]
    pub keyset: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub quality: u8,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub camera: String,
    /// YYYY-MM-DD
    #[arg(long)]
    pub date: Date,
    /// HH:MM
    #[arg(long)]
    pub start: TimeOfDay,
    #[arg(long)]
    pub fps: u8,
    /// Frames as PGM/PPM files, in order.
    #[arg(long, num_args = 1.., required_unless_present = "synthetic")]
    pub frames: Vec<PathBuf>,
    /// Generate this many synthetic frames instead of reading files.
    #[arg(long, conflicts_with = "frames", requires = "seed")]
    pub synthetic: Option<u32>,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 48)]
    pub height: usize,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Store directory (default: <home>/store).
    #[arg(long)]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncipherArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Keyset JSON.
    #[arg(long)]
    pub keys: PathBuf,
    /// Overrides the keyset's quality factor.
    #[arg(long)]
    pub quality: Option<u8>,
    /// Frame index for single images; videos number frames from 0.
    #[arg(long, default_value_t = 0)]
    pub frame_index: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DecipherArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub keys: PathBuf,
    /// Image path for a single frame, directory for a stream.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub plain: PathBuf,
    #[arg(long)]
    pub keys: PathBuf,
    /// Print the report as JSON (the table goes to stderr).
    #[arg(long)]
    pub json: bool,
    /// Replace the cipher with the identity map. Test hook.
    #[arg(long, hide = true)]
    pub identity_codec: bool,
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Run a scenario and write its transcript, chain and served streams.
    Run(SimRunArgs),
    /// Validate a chain file; reports the first failing block.
    Verify(ChainArgs),
    /// Decrypt block bodies and list the recorded requests and audits.
    AuditList(AuditListArgs),
}

#[derive(Debug, Args)]
pub struct SimRunArgs {
    /// Scenario JSON (default: the built-in court walkthrough).
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario's seed; one of the two must be present.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: <home>/sim).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long)]
    pub chain: PathBuf,
}

#[derive(Debug, Args)]
pub struct AuditListArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Scenario seed the body key was derived from.
    #[arg(long)]
    pub seed: u64,
}

fn home(cli_home: &Option<PathBuf>) -> PathBuf {
    cli_home.clone().unwrap_or_else(|| std::env::var_os("HOME").map_or_else(|| PathBuf::from(".sepris"), |h| PathBuf::from(h).join(".sepris")))
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let home = home(&cli.home);
    match cli.command {
        Command::Keygen(a) => keygen(&home, a, out),
        Command::Ingest(a) => ingest(&home, a, out),
        Command::Encipher(a) => encipher(a, out),
        Command::Decipher(a) => decipher(a, out),
        Command::Metrics(a) => metrics(a, out, err),
        Command::Sim(SimCommand::Run(a)) => sim_run(&home, a, out),
        Command::Sim(SimCommand::Verify(a)) => sim_verify(a, out),
        Command::Sim(SimCommand::AuditList(a)) => audit_list(a, out),
    }
}

macro_rules! say {
    ($out:expr, $($t:tt)*) => {
        writeln!($out, $($t)*).map_err(|e| CliError::Usage(format!("cannot write output: {e}")))?
    };
}

fn keygen(home: &Path, a: KeygenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(path) = a.keyset {
        if path.exists() && !a.force {
            return Err(CliError::DuplicateLabel(path.display().to_string()));
        }
        let mut rng = ChaCha20Rng::from_seed(Digest256::of_parts(&[b"sepris/cli/keyset/v1", a.seed.as_bytes()]).0);
        let keys = DabKeyset::generate(&mut rng, a.quality)?;
        keyset::save(&path, &keys)?;
        say!(out, "keyset {}", path.display());
        return Ok(());
    }
    let label = a.label.expect("clap enforces --label");
    let dir = a.dir.unwrap_or_else(|| home.join("keys"));
    let (private, public) = keyfile::paths(&dir, &label);
    if (private.exists() || public.exists()) && !a.force {
        return Err(CliError::DuplicateLabel(label));
    }
    let kp = generate_keypair(&label, a.seed.as_bytes()).map_err(|e| CliError::Usage(e.to_string()))?;
    keyfile::save_pair(&dir, &kp)?;
    say!(out, "private {}", private.display());
    say!(out, "public  {}", public.display());
    say!(out, "fingerprint {}", kp.public().fingerprint());
    Ok(())
}

fn store_site(records: Vec<VideoRecord>) -> Result<StorageSite, CliError> {
    let kp = generate_keypair("store", b"sepris/cli/store").expect("fixed seed is valid");
    let mut site = StorageSite::new(kp, "local", Default::default(), b"cli");
    for r in records {
        site.ingest_video(r)?;
    }
    Ok(site)
}

fn stored_videos(dir: &Path) -> Result<Vec<VideoRecord>, CliError> {
    let Ok(entries) = fs::read_dir(dir) else { return Ok(Vec::new()) };
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.extension().is_some_and(|x| x == "sprs")).collect();
    paths.sort();
    paths.iter().map(|p| video::load(p).map_err(CliError::from)).collect()
}

fn ingest(home: &Path, a: IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let frames: Vec<FrameBuffer> = match a.synthetic {
        Some(n) => {
            let seed = a.seed.expect("clap enforces --seed");
            (0..u64::from(n)).map(|i| synth::natural_image(a.width, a.height, a.channels, seed.wrapping_add(i))).collect()
        }
        None => a.frames.iter().map(|p| pnm::load(p)).collect::<Result<_, _>>()?,
    };
    let record = VideoRecord::new(&a.camera, a.date, a.start.seconds(), a.fps, frames)?;
    let dir = a.store.unwrap_or_else(|| home.join("store"));
    let mut site = store_site(stored_videos(&dir)?)?;
    let path = dir.join(format!("{}_{}_{:05}.sprs", a.camera, a.date, a.start.seconds()));
    let bytes = video::encode(&record)?;
    let reference = site.ingest_video(record)?;
    crate::error::write(&path, &bytes)?;
    say!(out, "{reference} {}", path.display());
    Ok(())
}

enum Plain {
    Image(FrameBuffer),
    Video(VideoRecord),
}

fn load_plain(path: &Path) -> Result<Plain, CliError> {
    let bytes = crate::error::read(path)?;
    if bytes.starts_with(video::MAGIC) {
        Ok(Plain::Video(video::decode(&bytes)?))
    } else {
        Ok(Plain::Image(pnm::decode(&bytes)?))
    }
}

fn load_keys(path: &Path, quality: Option<u8>) -> Result<DabKeyset, CliError> {
    let mut keys = keyset::load(path)?;
    if let Some(q) = quality {
        keys.quality = q;
    }
    keys.validate()?;
    Ok(keys)
}

fn encipher(a: EncipherArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let keys = load_keys(&a.keys, a.quality)?;
    let (bytes, n) = match load_plain(&a.input)? {
        Plain::Image(f) => (wire::encode(&dab::encipher_frame(&f, &keys, a.frame_index)?), 1),
        Plain::Video(v) => {
            let cfs = v.frames().iter().zip(0u64..).map(|(f, i)| dab::encipher_frame(f, &keys, i)).collect::<Result<Vec<_>, _>>()?;
            (wire::encode_stream(&cfs), cfs.len())
        }
    };
    crate::error::write(&a.out, &bytes)?;
    say!(out, "{n} frame(s) -> {}", a.out.display());
    Ok(())
}

fn decipher(a: DecipherArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let keys = load_keys(&a.keys, None)?;
    let bytes = crate::error::read(&a.input)?;
    if bytes.starts_with(wire::MAGIC) {
        let cf = wire::decode(&bytes)?;
        pnm::save(&a.out, &dab::decipher_frame(&cf, &keys)?)?;
        say!(out, "1 frame -> {}", a.out.display());
        return Ok(());
    }
    let frames = wire::decode_stream(&bytes)?;
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    for cf in &frames {
        let f = dab::decipher_frame(cf, &keys)?;
        let ext = if f.channels() == 1 { "pgm" } else { "ppm" };
        pnm::save(&a.out.join(format!("frame-{:05}.{ext}", cf.frame_index)), &f)?;
    }
    say!(out, "{} frame(s) -> {}", frames.len(), a.out.display());
    Ok(())
}

fn metrics(a: MetricsArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let plain = pnm::load(&a.plain)?;
    let keys = load_keys(&a.keys, None)?;
    let report: SecurityReport = if a.identity_codec {
        security_report_with(&plain, &keys, &IdentityView, &ReportOptions::default())?
    } else {
        security_report_with(&plain, &keys, &DabView, &ReportOptions::default())?
    };
    let t = Thresholds::default();
    if a.json {
        say!(out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        write!(err, "{}", report.table(&t)).ok();
    } else {
        write!(out, "{}", report.table(&t)).ok();
    }
    let failed: Vec<&str> = report.checks(&t).into_iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!("thresholds failed: {}", failed.join(", "))))
    }
}

fn sim_run(home: &Path, a: SimRunArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = match &a.scenario {
        Some(p) => serde_json::from_slice::<ScenarioConfig>(&crate::error::read(p)?).map_err(FormatError::from)?,
        None => ScenarioConfig::court(),
    };
    let seed = a.seed.or(config.seed).ok_or_else(|| CliError::Usage("no seed: pass --seed or set \"seed\" in the scenario".into()))?;
    let dir = a.out.unwrap_or_else(|| home.join("sim"));
    let outcome = run_scenario(&config, seed).map_err(|e| CliError::Check(format!("scenario failed at step {}: {}", e.step, e.error)))?;
    crate::error::write(&dir.join("transcript.jsonl"), outcome.transcript.to_jsonl().as_bytes())?;
    chainfile::save(&dir.join("chain.jsonl"), outcome.chain())?;
    for d in &outcome.deliveries {
        crate::error::write(&dir.join(format!("stream-{}.sprc", d.request)), &d.stream)?;
        keyset::save(&dir.join(format!("stream-{}.keys.json", d.request)), &d.keys)?;
    }
    let chain = outcome.chain();
    say!(out, "seed {seed}");
    say!(out, "blocks {} tip {}", chain.blocks.len(), chain.tip().map(|b| b.hash().to_hex()).unwrap_or_default());
    say!(out, "transcript {} ({} events)", outcome.transcript.digest(), outcome.transcript.events.len());
    say!(out, "replicas identical: {}", outcome.replicas_identical());
    say!(out, "wrote {}", dir.display());
    if !outcome.replicas_identical() {
        return Err(CliError::Check("replicas diverged".into()));
    }
    Ok(())
}

fn sim_verify(a: ChainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let chain = match chainfile::load(&a.chain) {
        Ok(c) => c,
        Err(FormatError::BadBlockLine { index, reason }) => return Err(CliError::Check(format!("block {index}: {reason}"))),
        Err(e @ FormatError::Io { .. }) => return Err(e.into()),
        Err(e) => return Err(CliError::Check(e.to_string())),
    };
    validate_chain(&chain).map_err(|f| CliError::Check(format!("block {}: {:?}", f.index, f.fault)))?;
    say!(out, "ok: {} blocks, tip {}", chain.blocks.len(), chain.tip().expect("validated chain has genesis").hash());
    Ok(())
}

fn audit_list(a: AuditListArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let chain = chainfile::load(&a.chain)?;
    let mut keystore = BodyKeyStore::default();
    keystore.insert(BODY_KEY_ID, body_key_for_seed(a.seed));
    for (height, block) in chain.blocks.iter().enumerate().skip(1) {
        let txs = decrypt_body(block, &keystore).map_err(|e| match e {
            LedgerError::AuthTagMismatch => CliError::Check(format!("block {height}: body does not decrypt under the key for seed {}", a.seed)),
            other => CliError::Check(format!("block {height}: {other}")),
        })?;
        for tx in txs {
            let line = match tx.kind {
                TxKind::AuditRecord => match serde_json::from_slice::<AuditRecord>(&tx.payload) {
                    Ok(r) => {
                        let refs: Vec<String> = r.accessed_reference.iter().map(ToString::to_string).collect();
                        format!("audit   {:?} by {} at {} refs [{}] device {:?}", r.action, r.requestor_uid, r.timestamp, refs.join(", "), r.device_info)
                    }
                    Err(_) => format!("audit   <unparsed {} bytes>", tx.payload.len()),
                },
                TxKind::RequestRecord => match serde_json::from_slice::<RequestRecord>(&tx.payload) {
                    Ok(r) => format!(
                        "request {} via {} cameras [{}] {} {}-{} approvals {}",
                        r.request.uid,
                        r.origin,
                        r.request.camera_ids.join(", "),
                        r.request.date,
                        r.request.range.start(),
                        r.request.range.end(),
                        r.approvals.len()
                    ),
                    Err(_) => format!("request <unparsed {} bytes>", tx.payload.len()),
                },
                TxKind::UserRegistration => format!("user    {}", String::from_utf8_lossy(&tx.payload)),
            };
            say!(out, "#{height} {} {line}", tx.submitter_uid);
        }
    }
    Ok(())
}
