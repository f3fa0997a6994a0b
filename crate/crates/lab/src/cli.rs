//! The `forrel` command line.
//!
//! Exit status: 0 on success, 2 when the input or parameters are at fault
//! (usage errors, malformed files, infeasible profiles, adversary protocol
//! violations), 1 on internal failures such as unwritable outputs.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use forrelation_core::ac0::{averaging_identity_exhaustive, library, sensitivity_tail_curve, sensitivity_tail_exact};
use forrelation_core::ac0::{Ac0Circuit, BlockMatrixShape, WeightedRows};
use forrelation_core::crypto::{ot_run, Decoder};
use forrelation_core::forrelation::ForrelatedSampler;
use forrelation_core::games::{
    advantage_squaring_wrap, fake_pk_adversary_wrap, run_calibration, run_owf_invert_game, run_pk_game,
    run_pke_game, run_prf_game, run_resample_experiment, run_towf_invert_game, Adversary, BOnlyAdversary,
    BiasedMatch, Checker, CircuitAdversary, CoinAdversary, ConstantAdversary, DecodeAndCompare, ExperimentReport,
    GameConfig, Inverter, RandomInverter, ReadBitAdversary, ReportRow, ResampleConfig, TrapdoorInverter,
    TrivialInverter,
};
use forrelation_core::nporacle::{find_witness, NpOracleB};
use forrelation_core::oracle::{
    decode_bit, sample_prf_world, sample_trapdoor_world, BlockId, EncodedOracle, OracleWorld, ScaleProfile,
    WorldKind,
};
use forrelation_core::rng::{derive_seed, rng_from_seed};
use forrelation_core::stats::Estimate;
use forrelation_core::BitString;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::exec::Parallel;
use crate::external::ExternalProgram;
use crate::formats::{self, bits_to_hex, decode_world, encode_world, parse_bits, sha256_hex};
use crate::netlist::{parse_circuit, parse_np_query};
use crate::report::{report_json, to_csv, EventLog};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precondition(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<forrelation_core::Error> for CliError {
    fn from(e: forrelation_core::Error) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        CliError::Precondition(format!("bad snapshot: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

fn pre(msg: impl Into<String>) -> CliError {
    CliError::Precondition(msg.into())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "forrel", version, about = "Forrelation-encoded oracle worlds: sampling, decoding, games and experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileName {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerName {
    Exact,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindName {
    Prf,
    Trapdoor,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = ProfileName::Desk)]
    pub profile: ProfileName,
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerName>,
    /// Coupling strength of the Gaussian sampler.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub reps: Option<u32>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Per-run query cap, or `none`.
    #[arg(long)]
    pub query_cap: Option<String>,
    /// Also write the CSV report here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON-lines event log.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a world and write its snapshot.
    SampleWorld {
        #[arg(long, value_enum)]
        kind: KindName,
        #[arg(long)]
        out: PathBuf,
        /// Write encoded regions even above the size limit.
        #[arg(long)]
        materialize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Re-write a snapshot, optionally with its regions.
    Save {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        materialize: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Load and verify a snapshot, then print a summary.
    Load {
        #[arg(long)]
        world: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decode one block and compare it with the stored pattern.
    Decode {
        #[arg(long)]
        world: PathBuf,
        /// PRF key.
        #[arg(long)]
        k: Option<String>,
        /// PRF input.
        #[arg(long)]
        x: Option<String>,
        /// Trapdoor block: `g/<td>/<bit>`, `f/<pk>/<x>/<bit>` or `i/<td>/<y>/<bit>`.
        #[arg(long)]
        block: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Measure acceptance frequencies and suggest threshold and repetitions.
    Calibrate {
        #[arg(long, default_value_t = 1e-3)]
        target_error: f64,
        #[command(flatten)]
        common: Common,
    },
    /// PRF distinguishing game.
    PrfGame {
        #[arg(long, default_value = "coin")]
        adversary: String,
        #[command(flatten)]
        common: Common,
    },
    /// Trapdoor inversion game.
    TowfGame {
        #[arg(long, default_value = "random")]
        inverter: String,
        #[command(flatten)]
        common: Common,
    },
    /// Public-key pseudorandomness game.
    PkGame {
        #[arg(long, default_value = "fake-pk:trivial")]
        adversary: String,
        #[command(flatten)]
        common: Common,
    },
    /// One-way function inversion game.
    OwfGame {
        #[arg(long, default_value = "random")]
        inverter: String,
        #[command(flatten)]
        common: Common,
    },
    /// Encryption and key-exchange completeness.
    Pke {
        #[command(flatten)]
        common: Common,
    },
    /// Oblivious transfer: one annotated transcript, or completeness with --stats.
    Ot {
        #[arg(long, action = clap::ArgAction::Set, default_value_t = false)]
        x0: bool,
        #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
        x1: bool,
        #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
        choice: bool,
        /// Write the transcript in binary form.
        #[arg(long)]
        transcript_out: Option<PathBuf>,
        #[arg(long)]
        stats: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Block-resampling experiment.
    ResampleExp {
        #[arg(long, value_enum, default_value_t = ResampleName::Prf)]
        config: ResampleName,
        #[arg(long, default_value = "coin")]
        adversary: String,
        #[arg(long, default_value_t = 16)]
        inner: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Sensitivity tail curve of a circuit.
    Sensitivity {
        /// Netlist file.
        #[arg(long)]
        circuit: Option<PathBuf>,
        /// `parity:<n>`, `and:<n>` or `or:<n>`.
        #[arg(long)]
        builtin: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive check of the averaging identity behind the block-resampling bound.
    GwCheck {
        #[arg(long = "K", alias = "k")]
        k: usize,
        #[arg(long = "M", alias = "m")]
        m: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Witness search through B by self-reduction.
    NpDemo {
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the experiment described by a TOML spec.
    Report {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleName {
    Prf,
    TrapdoorKey,
    TrapdoorImage,
}

impl From<ResampleName> for ResampleConfig {
    fn from(r: ResampleName) -> Self {
        match r {
            ResampleName::Prf => ResampleConfig::Prf,
            ResampleName::TrapdoorKey => ResampleConfig::TrapdoorKey,
            ResampleName::TrapdoorImage => ResampleConfig::TrapdoorImage,
        }
    }
}

impl Common {
    pub fn resolve_profile(&self, kind: WorldKind) -> CliResult<ScaleProfile> {
        let n = self.n.unwrap_or(2);
        let mut p = match self.profile {
            ProfileName::Paper => {
                if self.ell.is_some() {
                    return Err(pre("--ell is fixed by the paper profile"));
                }
                match kind {
                    WorldKind::Prf => ScaleProfile::paper_prf(n)?,
                    WorldKind::Trapdoor => ScaleProfile::paper_trapdoor(n)?,
                }
            }
            ProfileName::Desk => {
                let sampler = match (self.sampler.unwrap_or(SamplerName::Exact), self.eps) {
                    (SamplerName::Exact, None) => ForrelatedSampler::Exact,
                    (SamplerName::Exact, Some(_)) => return Err(pre("--eps needs --sampler gaussian")),
                    (SamplerName::Gaussian, eps) => ForrelatedSampler::Gaussian { eps },
                };
                ScaleProfile::custom(n, self.ell.unwrap_or(7), sampler, 64)?
            }
        };
        if let Some(r) = self.reps {
            p = p.with_reps(r)?;
        }
        if let Some(t) = self.threshold {
            p = p.with_threshold(t)?;
        }
        Ok(p)
    }

    pub fn game_config(&self, kind: WorldKind) -> CliResult<GameConfig> {
        let mut cfg = GameConfig::new(self.resolve_profile(kind)?, self.trials, self.seed);
        match self.query_cap.as_deref() {
            None => {}
            Some("none") => cfg.query_cap = None,
            Some(v) => cfg.query_cap = Some(v.parse().map_err(|_| pre("--query-cap takes a number or `none`"))?),
        }
        Ok(cfg)
    }
}

/// Builds an adversary from its name; see the README for the list.
pub fn adversary_from_spec(spec: &str) -> CliResult<Box<dyn Adversary>> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match head {
        "constant0" => Box::new(ConstantAdversary(false)),
        "constant1" => Box::new(ConstantAdversary(true)),
        "coin" => Box::new(CoinAdversary),
        "decode-and-compare" => Box::new(DecodeAndCompare),
        "biased-match" => Box::new(BiasedMatch { on_match: 0.75, otherwise: 0.25 }),
        "read-bit" => Box::new(ReadBitAdversary { address: parse_bits(rest).ok_or_else(|| pre("bad read-bit address"))? }),
        "b-only" => {
            let queries = rest
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|s| parse_bits(s).ok_or_else(|| pre("bad b-only query")))
                .collect::<CliResult<_>>()?;
            Box::new(BOnlyAdversary { queries })
        }
        "netlist" => {
            let text = read_text(Path::new(rest))?;
            let parsed = parse_circuit(&text).map_err(|e| pre(format!("{rest}: {e}")))?;
            let window = parsed.window.ok_or_else(|| pre("adversary netlists must declare a window"))?;
            Box::new(CircuitAdversary::new(parsed.circuit, window)?)
        }
        "exec" => Box::new(ExternalProgram::parse(rest).ok_or_else(|| pre("empty exec command"))?),
        "squared" => Box::new(advantage_squaring_wrap(adversary_from_spec(rest)?)),
        "fake-pk" => Box::new(fake_pk_adversary_wrap(inverter_from_spec(rest)?)),
        "checker" => Box::new(Checker { inverter: inverter_from_spec(rest)? }),
        _ => return Err(pre(format!("unknown adversary {spec:?}"))),
    })
}

pub fn inverter_from_spec(spec: &str) -> CliResult<Box<dyn Inverter>> {
    let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
    Ok(match head {
        "trivial" => Box::new(TrivialInverter),
        "random" => Box::new(RandomInverter),
        "trapdoor" => Box::new(TrapdoorInverter),
        "exec" => Box::new(ExternalProgram::parse(rest).ok_or_else(|| pre("empty exec command"))?),
        _ => return Err(pre(format!("unknown inverter {spec:?}"))),
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| pre(format!("{}: {e}", path.display())))
}

fn read_world(path: &Path) -> CliResult<(OracleWorld, String)> {
    let bytes = fs::read(path).map_err(|e| pre(format!("{}: {e}", path.display())))?;
    Ok((decode_world(&bytes)?, sha256_hex(&bytes)))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| internal(format!("{}: {e}", path.display())))
}

/// Parses `args` and runs the command, writing normal output to `out`.
/// Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Session<'a> {
    out: &'a mut dyn Write,
    log: EventLog,
    csv: Option<PathBuf>,
}

impl Session<'_> {
    fn line(&mut self, s: impl AsRef<str>) -> CliResult<()> {
        writeln!(self.out, "{}", s.as_ref()).map_err(internal)
    }

    fn event(&mut self, name: &str, v: serde_json::Value) -> CliResult<()> {
        self.log.event(name, v).map_err(internal)
    }

    fn emit(&mut self, mut reports: Vec<ExperimentReport>, world_hash: Option<&str>) -> CliResult<()> {
        if let Some(h) = world_hash {
            for r in &mut reports {
                r.param("world_sha256", h.to_string());
            }
        }
        let csv = to_csv(&reports);
        if let Some(p) = &self.csv {
            write_file(p, csv.as_bytes())?;
        }
        for r in &reports {
            self.event("report", report_json(r))?;
        }
        self.out.write_all(csv.as_bytes()).map_err(internal)
    }
}

fn world_summary(w: &OracleWorld, hash: &str) -> serde_json::Value {
    let p = w.profile();
    json!({
        "kind": format!("{:?}", w.kind()).to_lowercase(),
        "n": p.n,
        "ell": p.ell,
        "reps": p.reps,
        "seed": w.seed(),
        "blocks": w.all_blocks().len(),
        "encoded_bits": formats::encoded_bits(w).to_string(),
        "sha256": hash,
    })
}

fn parse_value(s: &str, width: usize, what: &str) -> CliResult<u64> {
    let b = parse_bits(s).ok_or_else(|| pre(format!("bad {what}: {s}")))?;
    if b.len() != width {
        return Err(pre(format!("{what} must have {width} bits")));
    }
    Ok(b.to_u64().unwrap_or(0))
}

fn parse_block(w: &OracleWorld, spec: &str) -> CliResult<BlockId> {
    let n = w.profile().n as usize;
    let parts: Vec<&str> = spec.split('/').collect();
    let bit = |s: &str| s.parse::<u32>().map_err(|_| pre("bad bit index"));
    let id = match parts[..] {
        ["g", td, b] => BlockId::G { td: parse_value(td, n, "td")?, bit: bit(b)? },
        ["f", pk, x, b] => BlockId::F { pk: parse_value(pk, 3 * n, "pk")?, x: parse_value(x, n, "x")?, bit: bit(b)? },
        ["i", td, y, b] => BlockId::I { td: parse_value(td, n, "td")?, y: parse_value(y, 6 * n, "y")?, bit: bit(b)? },
        _ => return Err(pre(format!("bad block {spec:?}"))),
    };
    Ok(id)
}

fn builtin_circuit(spec: &str) -> CliResult<Ac0Circuit> {
    let (name, n) = spec.split_once(':').ok_or_else(|| pre("builtin circuits look like parity:<n>"))?;
    let n: usize = n.parse().map_err(|_| pre("bad circuit size"))?;
    if n == 0 || n > 24 {
        return Err(pre("builtin circuits take 1..=24 inputs"));
    }
    Ok(match name {
        "parity" => library::parity_n(n),
        "and" => library::and_n(n),
        "or" => library::or_n(n),
        _ => return Err(pre(format!("unknown builtin {name:?}"))),
    })
}

fn execute(cmd: Command, out: &mut dyn Write) -> CliResult<()> {
    let common = match &cmd {
        Command::SampleWorld { common, .. }
        | Command::Save { common, .. }
        | Command::Load { common, .. }
        | Command::Decode { common, .. }
        | Command::Calibrate { common, .. }
        | Command::PrfGame { common, .. }
        | Command::TowfGame { common, .. }
        | Command::PkGame { common, .. }
        | Command::OwfGame { common, .. }
        | Command::Pke { common }
        | Command::Ot { common, .. }
        | Command::ResampleExp { common, .. }
        | Command::Sensitivity { common, .. }
        | Command::GwCheck { common, .. }
        | Command::NpDemo { common, .. }
        | Command::Report { common, .. } => common.clone(),
    };
    let log = match &common.events {
        Some(p) => EventLog::open(p).map_err(internal)?,
        None => EventLog::disabled(),
    };
    let mut s = Session { out, log, csv: common.csv.clone() };
    s.event("start", json!({ "command": format!("{cmd:?}") }))?;
    let exec = Parallel::from_env();
    let c = &common;
    match cmd {
        Command::SampleWorld { kind, out: path, materialize, .. } => {
            let world = match kind {
                KindName::Prf => OracleWorld::Prf(sample_prf_world(&c.resolve_profile(WorldKind::Prf)?, c.seed)?),
                KindName::Trapdoor => {
                    OracleWorld::Trapdoor(sample_trapdoor_world(&c.resolve_profile(WorldKind::Trapdoor)?, c.seed)?)
                }
            };
            let bytes = encode_world(&world, materialize);
            write_file(&path, &bytes)?;
            let summary = world_summary(&world, &sha256_hex(&bytes));
            s.line(summary.to_string())?;
            s.event("world", summary)?;
        }
        Command::Save { world, out: path, materialize, .. } => {
            let (w, _) = read_world(&world)?;
            let bytes = encode_world(&w, materialize);
            write_file(&path, &bytes)?;
            s.line(world_summary(&w, &sha256_hex(&bytes)).to_string())?;
        }
        Command::Load { world, .. } => {
            let (w, hash) = read_world(&world)?;
            s.line(world_summary(&w, &hash).to_string())?;
        }
        Command::Decode { world, k, x, block, .. } => {
            let (w, hash) = read_world(&world)?;
            let n = w.profile().n as usize;
            let id = match (&w, k, x, block) {
                (OracleWorld::Prf(_), Some(k), Some(x), None) => {
                    BlockId::Prf { k: parse_value(&k, n, "k")?, x: parse_value(&x, n, "x")? }
                }
                (OracleWorld::Trapdoor(_), None, None, Some(b)) => parse_block(&w, &b)?,
                (OracleWorld::Prf(_), ..) => return Err(pre("PRF worlds take --k and --x")),
                (OracleWorld::Trapdoor(_), ..) => return Err(pre("trapdoor worlds take --block")),
            };
            let plain = w.pattern_bit(id).ok_or_else(|| pre("no such block"))?;
            let reps = c.reps.unwrap_or(w.profile().reps);
            let mut rng = rng_from_seed(derive_seed(c.seed, forrelation_core::rng::tags::MEASURE));
            let bit = decode_bit(&w, id, reps, &mut rng)?;
            s.line(format!("decoded={} plaintext={} match={}", bit as u8, plain as u8, bit == plain))?;
            s.event("decode", json!({ "block": format!("{id:?}"), "decoded": bit, "plaintext": plain, "reps": reps, "world_sha256": hash }))?;
        }
        Command::Calibrate { target_error, .. } => {
            let cfg = c.game_config(WorldKind::Prf)?;
            let r = run_calibration(&cfg, target_error, &exec)?;
            s.emit(vec![r], None)?;
        }
        Command::PrfGame { adversary, .. } => {
            let cfg = c.game_config(WorldKind::Prf)?;
            let adv = adversary_from_spec(&adversary)?;
            let r = run_prf_game(&cfg, adv.as_ref(), &exec)?;
            s.emit(vec![r], Some(&first_world_hash(&cfg, WorldKind::Prf)?))?;
        }
        Command::TowfGame { inverter, .. } => {
            let cfg = c.game_config(WorldKind::Trapdoor)?;
            let inv = inverter_from_spec(&inverter)?;
            let reveal = inverter == "trapdoor";
            let r = run_towf_invert_game(&cfg, inv.as_ref(), reveal, &exec)?;
            s.emit(vec![r], Some(&first_world_hash(&cfg, WorldKind::Trapdoor)?))?;
        }
        Command::PkGame { adversary, .. } => {
            let cfg = c.game_config(WorldKind::Trapdoor)?;
            let adv = adversary_from_spec(&adversary)?;
            let r = run_pk_game(&cfg, adv.as_ref(), &exec)?;
            s.emit(vec![r], Some(&first_world_hash(&cfg, WorldKind::Trapdoor)?))?;
        }
        Command::OwfGame { inverter, .. } => {
            let cfg = c.game_config(WorldKind::Prf)?;
            let inv = inverter_from_spec(&inverter)?;
            let r = run_owf_invert_game(&cfg, inv.as_ref(), &exec)?;
            s.emit(vec![r], Some(&first_world_hash(&cfg, WorldKind::Prf)?))?;
        }
        Command::Pke { .. } => {
            let cfg = c.game_config(WorldKind::Trapdoor)?;
            let r = run_pke_game(&cfg, &exec)?;
            s.emit(vec![r], Some(&first_world_hash(&cfg, WorldKind::Trapdoor)?))?;
        }
        Command::Ot { x0, x1, choice, transcript_out, stats, .. } => {
            let cfg = c.game_config(WorldKind::Trapdoor)?;
            if stats {
                let r = forrelation_core::games::run_ot_game(&cfg, &exec)?;
                s.emit(vec![r], Some(&first_world_hash(&cfg, WorldKind::Trapdoor)?))?;
            } else {
                let world = sample_trapdoor_world(&cfg.profile, c.seed)?;
                let mut q = Decoder::new(&world, rng_from_seed(derive_seed(c.seed, 1)));
                let tr = ot_run(&mut q, x0, x1, choice, derive_seed(c.seed, 2))?;
                for (role, msg) in &tr.messages {
                    s.line(format!("{:<8} {:>4} bits  {}", format!("{role:?}").to_lowercase(), msg.len(), bits_to_hex(msg)))?;
                }
                s.line(format!("output {}", tr.output as u8))?;
                if let Some(p) = transcript_out {
                    write_file(&p, &formats::encode_transcript(&tr.messages))?;
                }
            }
        }
        Command::ResampleExp { config, adversary, inner, .. } => {
            let kind = if config == ResampleName::Prf { WorldKind::Prf } else { WorldKind::Trapdoor };
            let cfg = c.game_config(kind)?;
            let adv = adversary_from_spec(&adversary)?;
            let r = run_resample_experiment(&cfg, config.into(), adv.as_ref(), inner, &exec)?;
            s.emit(vec![r], Some(&first_world_hash(&cfg, kind)?))?;
        }
        Command::Sensitivity { circuit, builtin, .. } => {
            let circ = match (circuit, builtin) {
                (Some(p), None) => parse_circuit(&read_text(&p)?).map_err(|e| pre(e.to_string()))?.circuit,
                (None, Some(b)) => builtin_circuit(&b)?,
                _ => return Err(pre("give exactly one of --circuit and --builtin")),
            };
            s.emit(vec![sensitivity_report(&circ, c)?], None)?;
        }
        Command::GwCheck { k, m, .. } => {
            let (lines, ok) = gw_check(k, m, c.seed)?;
            for l in lines {
                s.line(l)?;
            }
            s.line(format!("averaging identity: {}", if ok { "PASS" } else { "FAIL" }))?;
            if !ok {
                return Err(internal("averaging identity failed"));
            }
        }
        Command::NpDemo { world, target, .. } => {
            let (w, hash) = read_world(&world)?;
            let q = parse_np_query(&read_text(&target)?).map_err(|e| pre(format!("{}: {e}", target.display())))?;
            let b = NpOracleB::new(&w);
            let found = find_witness(&b, &q)?;
            match &found {
                Some(wit) => {
                    let bits = BitString::from_bits(wit.clone());
                    let check = q.evaluate_with(
                        wit,
                        &mut |a: &[bool]| w.read_a(a),
                        &mut |x: &[bool]| forrelation_core::nporacle::query_b_reference(&w, x),
                    );
                    s.line(format!("witness {bits}"))?;
                    s.line(format!("verified {check}"))?;
                }
                None => s.line("witness none")?,
            }
            s.line(format!("b_evaluations {}", b.evaluations()))?;
            s.event("np-demo", json!({ "found": found.is_some(), "world_sha256": hash }))?;
        }
        Command::Report { spec, .. } => {
            let text = read_text(&spec)?;
            let spec: GameSpec = toml::from_str(&text).map_err(|e| pre(format!("malformed spec: {e}")))?;
            let (r, hash) = spec.run(&exec)?;
            s.emit(vec![r], hash.as_deref())?;
        }
    }
    s.event("end", json!({}))?;
    Ok(())
}

fn first_world_hash(cfg: &GameConfig, kind: WorldKind) -> CliResult<String> {
    let seed = cfg.world_seed(0);
    let w = match kind {
        WorldKind::Prf => OracleWorld::Prf(sample_prf_world(&cfg.profile, seed)?),
        WorldKind::Trapdoor => OracleWorld::Trapdoor(sample_trapdoor_world(&cfg.profile, seed)?),
    };
    Ok(sha256_hex(&encode_world(&w, false)))
}

fn sensitivity_report(circ: &Ac0Circuit, c: &Common) -> CliResult<ExperimentReport> {
    let n = circ.num_inputs();
    let thresholds: Vec<usize> = (0..=n).collect();
    let curve = sensitivity_tail_curve(circ, &thresholds, c.trials, c.seed)?;
    let cfg = GameConfig::new(ScaleProfile::desk(1, 1)?, c.trials, c.seed);
    let mut r = ExperimentReport::new("sensitivity", &cfg);
    r.params.clear();
    r.param("inputs", n.to_string());
    r.param("size", circ.size().to_string());
    r.param("depth", circ.depth().to_string());
    for (t, e) in thresholds.iter().zip(curve) {
        r.rows.push(ReportRow::plain(&format!("tail_ge_{t}"), e));
        if n <= 16 {
            let exact = sensitivity_tail_exact(circ, *t)?;
            r.rows.push(ReportRow::plain(&format!("tail_ge_{t}_exact"), Estimate::exact(exact, 1 << n)));
        }
    }
    Ok(r)
}

/// Checks the identity for parity, AND, OR and a few random circuits over
/// a `K x M` matrix with nonuniform row weights.
pub fn gw_check(k: usize, m: usize, seed: u64) -> CliResult<(Vec<String>, bool)> {
    if k == 0 || m == 0 || k * m > 12 {
        return Err(pre("gw-check needs 1 <= K*M <= 12"));
    }
    let shape = BlockMatrixShape::new(k, m)?;
    let weights: Vec<u64> = (0..1u64 << m).map(|r| 1 + (r % 3)).collect();
    let dist = WeightedRows::new(m, weights)?;
    let mut rng = rng_from_seed(seed);
    let mut circuits = vec![
        ("parity".to_string(), library::parity_n(k * m)),
        ("and".to_string(), library::and_n(k * m)),
        ("or".to_string(), library::or_n(k * m)),
    ];
    for i in 0..3 {
        circuits.push((format!("random{i}"), library::random(k * m, 3 * k * m, &mut rng)));
    }
    let mut lines = Vec::new();
    let mut all = true;
    for (name, circ) in &circuits {
        let checks = averaging_identity_exhaustive(circ, shape, &dist)?;
        let ok = checks.iter().all(|c| c.holds());
        all &= ok;
        lines.push(format!("{name:<8} inputs={:<5} {}", checks.len(), if ok { "ok" } else { "MISMATCH" }));
    }
    Ok((lines, all))
}

/// Experiment description read by `forrel report`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub game: GameName,
    pub seed: u64,
    pub trials: u64,
    #[serde(default)]
    pub adversary: Option<String>,
    #[serde(default)]
    pub inverter: Option<String>,
    pub profile: ProfileSpec,
    #[serde(default)]
    pub query_cap: Option<toml::Value>,
    #[serde(default)]
    pub inner: Option<u64>,
    #[serde(default)]
    pub config: Option<ResampleName>,
    /// Netlist for circuit experiments, or a `parity:<n>`-style builtin.
    #[serde(default)]
    pub circuit: Option<String>,
    /// Planted patterns for `planted-indist`, as bit strings.
    #[serde(default)]
    pub patterns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameName {
    PrfDistinguish,
    PkPseudorandom,
    TowfInvert,
    OwfInvert,
    BlockResample,
    SensitivityTail,
    PlantedIndist,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub n: u32,
    #[serde(default)]
    pub ell: Option<u32>,
    #[serde(default)]
    pub sampler: Option<String>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub reps: Option<u32>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub paper: bool,
}

impl GameSpec {
    fn common(&self) -> CliResult<Common> {
        let sampler = match self.profile.sampler.as_deref() {
            None | Some("exact") => None,
            Some("gaussian") => Some(SamplerName::Gaussian),
            Some(o) => return Err(pre(format!("unknown sampler {o:?}"))),
        };
        let query_cap = match &self.query_cap {
            None => None,
            Some(toml::Value::String(s)) if s == "none" => Some("none".to_string()),
            Some(toml::Value::Integer(i)) if *i >= 0 => Some(i.to_string()),
            Some(_) => return Err(pre("query_cap must be a count or \"none\"")),
        };
        Ok(Common {
            seed: self.seed,
            trials: self.trials,
            profile: if self.profile.paper { ProfileName::Paper } else { ProfileName::Desk },
            n: Some(self.profile.n),
            ell: self.profile.ell,
            sampler,
            eps: self.profile.eps,
            reps: self.profile.reps,
            threshold: self.profile.threshold,
            query_cap,
            csv: None,
            events: None,
        })
    }

    /// Runs the spec; returns the report and, for world-based games, the
    /// hash of the first trial's world.
    pub fn run(&self, exec: &Parallel) -> CliResult<(ExperimentReport, Option<String>)> {
        let c = self.common()?;
        let adversary = || adversary_from_spec(self.adversary.as_deref().unwrap_or("coin"));
        let inverter = || inverter_from_spec(self.inverter.as_deref().unwrap_or("random"));
        let world_game = |kind: WorldKind, f: &dyn Fn(&GameConfig) -> CliResult<ExperimentReport>| {
            let cfg = c.game_config(kind)?;
            let r = f(&cfg)?;
            Ok((r, Some(first_world_hash(&cfg, kind)?)))
        };
        match self.game {
            GameName::PrfDistinguish => {
                world_game(WorldKind::Prf, &|cfg| Ok(run_prf_game(cfg, adversary()?.as_ref(), exec)?))
            }
            GameName::PkPseudorandom => {
                world_game(WorldKind::Trapdoor, &|cfg| Ok(run_pk_game(cfg, adversary()?.as_ref(), exec)?))
            }
            GameName::TowfInvert => world_game(WorldKind::Trapdoor, &|cfg| {
                let reveal = self.inverter.as_deref() == Some("trapdoor");
                Ok(run_towf_invert_game(cfg, inverter()?.as_ref(), reveal, exec)?)
            }),
            GameName::OwfInvert => {
                world_game(WorldKind::Prf, &|cfg| Ok(run_owf_invert_game(cfg, inverter()?.as_ref(), exec)?))
            }
            GameName::BlockResample => {
                let config = self.config.unwrap_or(ResampleName::Prf);
                let kind = if config == ResampleName::Prf { WorldKind::Prf } else { WorldKind::Trapdoor };
                world_game(kind, &|cfg| {
                    let inner = self.inner.unwrap_or(16);
                    Ok(run_resample_experiment(cfg, config.into(), adversary()?.as_ref(), inner, exec)?)
                })
            }
            GameName::SensitivityTail => Ok((sensitivity_report(&self.spec_circuit()?, &c)?, None)),
            GameName::PlantedIndist => Ok((self.planted(&c)?, None)),
        }
    }

    fn spec_circuit(&self) -> CliResult<Ac0Circuit> {
        let spec = self.circuit.as_deref().ok_or_else(|| pre("this game needs `circuit`"))?;
        if spec.contains(':') && !Path::new(spec).exists() {
            return builtin_circuit(spec);
        }
        Ok(parse_circuit(&read_text(Path::new(spec))?).map_err(|e| pre(e.to_string()))?.circuit)
    }

    /// Advantage of a circuit between blocks planted with the given
    /// patterns and all-uniform blocks.
    fn planted(&self, c: &Common) -> CliResult<ExperimentReport> {
        use forrelation_core::ac0::distinguishing_advantage;
        use forrelation_core::oracle::PatternedDistribution;
        let profile = c.resolve_profile(WorldKind::Prf)?;
        let patterns: Vec<Vec<bool>> = self
            .patterns
            .as_ref()
            .ok_or_else(|| pre("planted-indist needs `patterns`"))?
            .iter()
            .map(|p| parse_bits(p).map(|b| b.as_slice().to_vec()).ok_or_else(|| pre("bad pattern")))
            .collect::<CliResult<_>>()?;
        let blocks = patterns.first().map_or(0, Vec::len);
        let planted = PatternedDistribution::new(patterns, profile.ell, profile.sampler)?;
        let null = PatternedDistribution::null(blocks, profile.ell, profile.sampler)?;
        let circ = self.spec_circuit()?;
        let adv = distinguishing_advantage(&circ, &planted, &null, c.trials, c.seed)?;
        let cfg = GameConfig::new(profile, c.trials, c.seed);
        let mut r = ExperimentReport::new("planted-indist", &cfg);
        r.param("blocks", blocks.to_string());
        r.param("size", circ.size().to_string());
        r.param("depth", circ.depth().to_string());
        r.rows.push(ReportRow::plain("advantage", adv));
        Ok(r)
    }
}
