//! `meshmac`: encode and decode frames, run medium scenarios, convert and
//! check traces, and run the conformance suite.
//!
//! Exit codes: 0 success, 1 conformance or order-check failure, 2 usage,
//! 3 configuration, 4 I/O.

mod error;
mod scenario;

use std::fs;
use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use meshmac::builder::{build_frame, BufferDescriptor, NavRegister, SequenceState, StationRole};
use meshmac::codec::{self, from_hex, to_hex};
use meshmac::conformance::{run_conformance, ConformanceConfig};
use meshmac::frame::{FcFlags, Frame, FrameKind, MacAddress, MeshHeader, SubtypeCode, SubtypeTable};
use meshmac::sim::{self, NodeReport, SimConfig, SimReport};
use meshmac::trace::{self, Edge, Trace};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "meshmac", version, about = "802.11s mesh MAC transmitter model")]
struct Cli {
    /// Print machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and encode one frame, printing it as hex.
    Encode(EncodeArgs),
    /// Decode a hex frame (argument or standard input).
    Decode {
        /// Hex bytes; reads standard input when omitted or "-".
        hex: Option<String>,
    },
    /// Run a scenario file, or every *.toml in a directory.
    Run {
        path: PathBuf,
        /// Directory for report and waveform files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a trace from a scenario (.toml), waveform (.vcd) or JSON file.
    Trace {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = TraceFormat::Vcd)]
        format: TraceFormat,
        /// Check edges in order instead of printing, e.g. "msdurdy+,frame_done+,en_buildframe-".
        #[arg(long)]
        assert_order: Option<String>,
        /// Scope for --assert-order; defaults to the first scope in the trace.
        #[arg(long)]
        scope: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the golden conformance suite.
    Conform {
        #[arg(long, hide = true)]
        threshold: Option<u32>,
        /// Replace a subtype code, e.g. ack=000001.
        #[arg(long = "subtype", hide = true)]
        subtypes: Vec<String>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TraceFormat {
    Vcd,
    Json,
}

#[derive(Debug, clap::Args)]
struct EncodeArgs {
    kind: FrameKind,
    #[arg(long)]
    ra: Option<MacAddress>,
    #[arg(long)]
    ta: Option<MacAddress>,
    /// Defaults to --ra for data frames.
    #[arg(long)]
    da: Option<MacAddress>,
    /// Defaults to --ta for data frames.
    #[arg(long)]
    sa: Option<MacAddress>,
    #[arg(long)]
    bssid: Option<MacAddress>,
    /// NAV register value handed to the Duration/ID computation.
    #[arg(long, default_value_t = 0)]
    nav: u16,
    /// Payload as hex bytes.
    #[arg(long, default_value = "")]
    payload: String,
    /// Sequence number of the frame.
    #[arg(long, default_value_t = 1)]
    seq: u16,
    #[arg(long, default_value_t = meshmac::frame::DEFAULT_MESH_TTL)]
    ttl: u8,
    /// Management subtype for mgmt frames.
    #[arg(long, default_value_t = meshmac::frame::MGMT_SUBTYPE_ACTION)]
    mgmt_subtype: u8,
    #[arg(long, value_enum, default_value_t = Role::MeshPoint)]
    role: Role,
    #[arg(long)]
    retry: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Role {
    Associated,
    IbssMember,
    MeshPoint,
}

impl From<Role> for StationRole {
    fn from(r: Role) -> Self {
        match r {
            Role::Associated => StationRole::Associated,
            Role::IbssMember => StationRole::IbssMember,
            Role::MeshPoint => StationRole::MeshPoint,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let json = cli.json;
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("meshmac: {e}");
            // Conformance failures have already printed their result document.
            if json && !matches!(e, CliError::Conformance(_)) {
                println!("{}", json!({ "error": e.to_string(), "exit_code": e.exit_code() }));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let json = cli.json;
    match cli.command {
        Command::Encode(args) => cmd_encode(&args, json),
        Command::Decode { hex } => cmd_decode(hex, json),
        Command::Run { path, out, seed } => cmd_run(&path, &out, seed, json),
        Command::Trace { path, format, assert_order, scope, seed } => {
            cmd_trace(&path, format, assert_order.as_deref(), scope.as_deref(), seed, json)
        }
        Command::Conform { threshold, subtypes } => cmd_conform(threshold, &subtypes, json),
    }
}

fn print_json(v: &impl Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn encode_frames(args: &EncodeArgs) -> Result<Vec<Frame>, CliError> {
    let payload = from_hex(&args.payload).map_err(|e| CliError::Usage(format!("--payload: {e}")))?;
    let data = args.kind == FrameKind::Data;
    let header = MeshHeader::new(args.ttl, 0, vec![]).map_err(|e| CliError::Usage(e.to_string()))?;
    let buf = BufferDescriptor {
        ra: args.ra,
        ta: args.ta,
        da: args.da.or(if data { args.ra } else { None }),
        sa: args.sa.or(if data { args.ta } else { None }),
        bssid: args.bssid,
        payload,
        mgmt_subtype: args.mgmt_subtype,
        mesh_header: header,
        ..BufferDescriptor::default()
    };
    let flags = FcFlags { retry: args.retry, ..if data { FcFlags::mesh_data() } else { FcFlags::default() } };
    let state = SequenceState::default().with_counter(args.seq.wrapping_add(4095) % 4096);
    let built = build_frame(args.kind, &buf, args.role.into(), NavRegister(args.nav), state, flags)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(built.frames)
}

fn cmd_encode(args: &EncodeArgs, json: bool) -> Result<(), CliError> {
    let frames = encode_frames(args)?;
    let mut encoded = Vec::new();
    for f in &frames {
        encoded.push(codec::encode(f).map_err(|e| CliError::Usage(e.to_string()))?);
    }
    if json {
        let items: Vec<_> =
            encoded.iter().map(|b| json!({ "kind": args.kind.name(), "length": b.len(), "hex": to_hex(b) })).collect();
        print_json(&items);
    } else {
        for b in &encoded {
            println!("{}", to_hex(b));
        }
    }
    Ok(())
}

fn cmd_decode(hex: Option<String>, json: bool) -> Result<(), CliError> {
    let text = match hex.as_deref() {
        None | Some("-") => {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io(e.to_string()))?;
            s
        }
        Some(h) => h.to_string(),
    };
    let bytes = from_hex(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    let frame = codec::decode(&bytes).map_err(|e| CliError::Usage(e.to_string()))?;
    let kind = frame.kind().map_or("unknown", FrameKind::name);
    if json {
        print_json(&json!({ "kind": kind, "length": bytes.len(), "frame": frame }));
        return Ok(());
    }
    println!("kind      {kind}");
    println!("fch       {:#06x}", frame.fch.pack());
    println!("did       {}", frame.did);
    for (i, a) in frame.addresses().iter().enumerate() {
        if let Some(a) = a {
            println!("addr{}     {a}", i + 1);
        }
    }
    if let Some(s) = frame.seq_ctl {
        let (seq, frag) = meshmac::builder::unpack_seq_ctl(s);
        println!("seq_ctl   {s:#06x} (seq {seq}, frag {frag})");
    }
    if let Some(mh) = &frame.mesh_header {
        println!("mesh      flags {:#04x} ttl {} seq {}", mh.flags, mh.ttl, mh.mesh_seq);
    }
    if !frame.body.is_empty() {
        println!("body      {}", to_hex(&frame.body));
    }
    println!("fcs       {:#010x}", frame.fcs);
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunSummary {
    scenario: String,
    report: PathBuf,
    waveform: PathBuf,
    end_time: u64,
    nodes: Vec<NodeReport>,
}

fn run_one(path: &Path, out: &Path, seed: Option<u64>) -> Result<RunSummary, CliError> {
    let mut cfg: SimConfig = scenario::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = sim::run(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let stem = path.file_stem().map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned());
    let report_path = out.join(format!("{stem}.report.json"));
    let wave_path = out.join(format!("{stem}.vcd"));
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    let text = serde_json::to_string_pretty(&report).expect("serializable");
    fs::write(&report_path, text).map_err(|e| io(&report_path, e))?;
    fs::write(&wave_path, trace::export_waveform(&report.trace)).map_err(|e| io(&wave_path, e))?;
    Ok(RunSummary {
        scenario: stem,
        report: report_path,
        waveform: wave_path,
        end_time: report.end_time,
        nodes: report.nodes,
    })
}

fn cmd_run(path: &Path, out: &Path, seed: Option<u64>, json: bool) -> Result<(), CliError> {
    let files = scenario::collect(path)?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let results: Vec<Result<RunSummary, CliError>> = std::thread::scope(|s| {
        let handles: Vec<_> = files.iter().map(|f| s.spawn(move || run_one(f, out, seed))).collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
    });
    let mut summaries = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(s) => summaries.push(s),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(e) => eprintln!("meshmac: {e}"),
        }
    }
    if json {
        if first_err.is_none() {
            print_json(&summaries);
        }
    } else {
        for s in &summaries {
            println!("{} (end {} us) -> {}", s.scenario, s.end_time, s.report.display());
            println!("  node  offered delivered failed in_flight retries collisions deferrals");
            for n in &s.nodes {
                println!(
                    "  {:>4} {:>8} {:>9} {:>6} {:>9} {:>7} {:>10} {:>9}",
                    n.id, n.offered, n.delivered, n.failed, n.in_flight, n.retries, n.collisions, n.deferrals
                );
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn load_trace(path: &Path, seed: Option<u64>) -> Result<Trace, CliError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext == "toml" {
        let mut cfg = scenario::load(path)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let report: SimReport = sim::run(cfg).map_err(|e| CliError::Config(e.to_string()))?;
        return Ok(report.trace);
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let parsed = if ext == "json" { trace::parse_json(&text) } else { trace::parse_waveform(&text) };
    parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_order(spec: &str) -> Result<Vec<Edge>, CliError> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Edge>().map_err(|e| CliError::Usage(format!("--assert-order: {e}"))))
        .collect()
}

fn cmd_trace(
    path: &Path,
    format: TraceFormat,
    order: Option<&str>,
    scope: Option<&str>,
    seed: Option<u64>,
    json: bool,
) -> Result<(), CliError> {
    let t = load_trace(path, seed)?;
    if let Some(spec) = order {
        let edges = parse_order(spec)?;
        let scope = scope.map(str::to_string).or_else(|| t.scopes().first().map(|s| s.to_string())).unwrap_or_default();
        let ok = trace::assert_order(&t, &scope, &edges);
        if json {
            let names: Vec<String> = edges.iter().map(ToString::to_string).collect();
            print_json(&json!({ "scope": scope, "order": names, "satisfied": ok }));
        } else {
            println!("{scope}: order {}", if ok { "satisfied" } else { "violated" });
        }
        return if ok { Ok(()) } else { Err(CliError::Conformance(format!("order violated in scope {scope}"))) };
    }
    match (format, json) {
        (TraceFormat::Json, _) | (_, true) => println!("{}", trace::export_json(&t)),
        (TraceFormat::Vcd, false) => print!("{}", trace::export_waveform(&t)),
    }
    Ok(())
}

fn conformance_config(threshold: Option<u32>, subtypes: &[String]) -> Result<ConformanceConfig, CliError> {
    let mut table = SubtypeTable::STANDARD;
    for spec in subtypes {
        let (kind, code) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--subtype expects kind=code, got {spec:?}")))?;
        let kind: FrameKind = kind.parse().map_err(CliError::Usage)?;
        let code = SubtypeCode::from_bits(code).map_err(|e| CliError::Usage(e.to_string()))?;
        table = table.with_entry(kind, code).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(ConformanceConfig { threshold: threshold.unwrap_or(ConformanceConfig::default().threshold), subtypes: table })
}

fn cmd_conform(threshold: Option<u32>, subtypes: &[String], json: bool) -> Result<(), CliError> {
    let cfg = conformance_config(threshold, subtypes)?;
    let results = run_conformance(&cfg);
    let passed = results.iter().all(|r| r.passed);
    if json {
        print_json(&json!({ "passed": passed, "cases": results }));
    } else {
        for r in &results {
            println!("{:<4} {:<24} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        }
    }
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
        Err(CliError::Conformance(failed.join(", ")))
    }
}
