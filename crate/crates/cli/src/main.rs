//! `wfpad`: simulate padding defenses over traces, measure overhead, run
//! the client/bridge tunnel, and replay synthetic loads through it.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::StdRng;
use rand::SeedableRng;

use wfpad::metrics::compute_overhead;
use wfpad::sim::{simulate_front, simulate_randomwt_with, simulate_tamaraw, RttSpread, SimulationStrategy};
use wfpad::trace::{parse_trace, serialize_trace, Trace};
use wfpad_tunnel::config::{apply_setting, validate_settings, DefenseId, DefenseSettings, ProxyConfig};
use wfpad_tunnel::replay::{replay, ReplayOptions};
use wfpad_tunnel::{BridgeProxy, CaptureLog, ClientProxy};

#[derive(Parser)]
#[command(
    name = "wfpad",
    version,
    about = "Padding defenses against website fingerprinting: tunnel, simulator and metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DefenseArg {
    Tamaraw,
    Front,
    Randomwt,
}

impl DefenseArg {
    fn id(self) -> DefenseId {
        match self {
            DefenseArg::Tamaraw => DefenseId::Tamaraw,
            DefenseArg::Front => DefenseId::Front,
            DefenseArg::Randomwt => DefenseId::RandomWt,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StrategyArg {
    Optimistic,
    Pessimistic,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RttSpreadArg {
    /// 0.1 * tau is the variance of the fake-RTT distribution.
    LiteralVariance,
    /// 0.1 * tau is its standard deviation.
    StdFraction,
}

#[derive(Args)]
struct ParamArgs {
    /// Read defense parameters from a config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one parameter, e.g. --set tamaraw.L=100. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ParamArgs {
    fn settings(&self, defense: DefenseId) -> Result<DefenseSettings> {
        let mut settings = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ProxyConfig::parse(&text)?.settings
            }
            None => DefenseSettings::defaults(defense),
        };
        settings.defense = defense;
        for kv in &self.set {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{kv}`"))?;
            apply_setting(&mut settings, key.trim(), value.trim(), 0)?;
        }
        validate_settings(&settings)?;
        Ok(settings)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Apply a defense to an undefended trace file.
    ///
    /// Defaults: tamaraw rho_out=12ms rho_in=4ms L=200; front
    /// N_out=N_in=3000 W_min=1s W_max=13s; randomwt N_real=4/45
    /// N_fake=8/90 p_fake=0.4 t_talkie=500ms.
    Simulate {
        defense: DefenseArg,
        /// Slot-assignment policy; tamaraw only.
        #[arg(long)]
        strategy: Option<StrategyArg>,
        /// RNG seed; required for front and randomwt, ignored by tamaraw.
        #[arg(long)]
        seed: Option<u64>,
        /// How to read the fake-RTT dispersion; randomwt only.
        #[arg(long, value_enum, default_value_t = RttSpreadArg::LiteralVariance)]
        rtt_spread: RttSpreadArg,
        /// Undefended input trace.
        #[arg(short, long)]
        input: PathBuf,
        /// Defended output trace.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Compute data/time overhead over (undefended, defended) trace pairs.
    Overhead {
        /// Manifest: one `undefended<TAB>defended` pair of paths per line.
        #[arg(long)]
        pairs: PathBuf,
        /// Report TSV (per-pair ratios plus the corpus means).
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the client proxy: a local SOCKS5 listener tunneling through a
    /// bridge.
    Client {
        /// Config file with defense, parameters and secret.
        #[arg(long)]
        config: PathBuf,
        /// SOCKS5 listen address; overrides the config file.
        #[arg(long)]
        listen: Option<String>,
        /// Bridge address; overrides the config file.
        #[arg(long)]
        bridge: Option<String>,
        /// Write the wire capture to this path, refreshed periodically.
        #[arg(long)]
        capture: Option<PathBuf>,
        /// Defense RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the bridge proxy.
    Bridge {
        #[arg(long)]
        config: PathBuf,
        /// Wire listen address; overrides the config file.
        #[arg(long)]
        listen: Option<String>,
        /// Write the wire capture to this path, refreshed periodically.
        #[arg(long)]
        capture: Option<PathBuf>,
        /// Defense RNG seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay a synthetic load (a trace file as script) through a loopback
    /// client/bridge pair and capture both sides.
    Replay {
        /// The script: outgoing packets are written by the client, incoming
        /// ones by the destination, each at its timestamp.
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defense when no config file is given.
        #[arg(long, value_enum, default_value_t = DefenseArg::Tamaraw)]
        defense: DefenseArg,
        /// Directory for client.trace / bridge.trace captures.
        #[arg(long)]
        capture_dir: Option<PathBuf>,
        /// Defense RNG seed (client uses seed, bridge seed+1).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Write a fresh config file with defaults and a random secret.
    Genconf {
        defense: DefenseArg,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        eprintln!("wfpad: {err:#}");
        std::process::exit(1);
    }
}

fn read_trace(path: &Path) -> Result<Trace<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_trace(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes via a temp file and rename, so readers never see partial output.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            defense,
            strategy,
            seed,
            rtt_spread,
            input,
            output,
            params,
        } => {
            let settings = params.settings(defense.id())?;
            let trace = read_trace(&input)?;
            let defended = match defense {
                DefenseArg::Tamaraw => {
                    let strategy = match strategy {
                        Some(StrategyArg::Optimistic) | None => SimulationStrategy::Optimistic,
                        Some(StrategyArg::Pessimistic) => SimulationStrategy::Pessimistic,
                    };
                    simulate_tamaraw(&trace, &settings.tamaraw, strategy)
                }
                DefenseArg::Front => {
                    if strategy.is_some() {
                        bail!("--strategy applies to tamaraw only");
                    }
                    let seed = seed.ok_or_else(|| anyhow!("front requires --seed"))?;
                    let mut rng = StdRng::seed_from_u64(seed);
                    simulate_front(&trace, &settings.front, &mut rng)
                }
                DefenseArg::Randomwt => {
                    if strategy.is_some() {
                        bail!("--strategy applies to tamaraw only");
                    }
                    let seed = seed.ok_or_else(|| anyhow!("randomwt requires --seed"))?;
                    let spread = match rtt_spread {
                        RttSpreadArg::LiteralVariance => RttSpread::LiteralVariance,
                        RttSpreadArg::StdFraction => RttSpread::StdFraction,
                    };
                    let mut rng = StdRng::seed_from_u64(seed);
                    simulate_randomwt_with(&trace, &settings.randomwt, spread, &mut rng)?
                }
            };
            write_atomic(&output, &serialize_trace(&defended))?;
        }
        Command::Overhead { pairs, output } => {
            let manifest = std::fs::read_to_string(&pairs)
                .with_context(|| format!("reading {}", pairs.display()))?;
            let mut paths = Vec::new();
            let mut loaded = Vec::new();
            for (idx, line) in manifest.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (undefended, defended) = line
                    .split_once('\t')
                    .ok_or_else(|| anyhow!("manifest line {}: expected two paths", idx + 1))?;
                loaded.push((
                    read_trace(Path::new(undefended.trim()))?,
                    read_trace(Path::new(defended.trim()))?,
                ));
                paths.push((undefended.trim().to_string(), defended.trim().to_string()));
            }
            let report = compute_overhead(&loaded)?;
            let mut out = String::from("undefended\tdefended\tdata_ratio\ttime_ratio\n");
            for ((u, d), (data, time)) in paths.iter().zip(&report.per_trace) {
                out.push_str(&format!("{u}\t{d}\t{data}\t{time}\n"));
            }
            out.push_str(&format!(
                "mean\t*\t{}\t{}\n",
                report.data_overhead, report.time_overhead
            ));
            write_atomic(&output, &out)?;
            println!(
                "data_overhead {} time_overhead {} over {} pairs",
                report.data_overhead,
                report.time_overhead,
                report.per_trace.len()
            );
        }
        Command::Client {
            config,
            listen,
            bridge,
            capture,
            seed,
        } => {
            let parsed = load_config(&config)?;
            let listen = listen
                .or(parsed.listen.clone())
                .ok_or_else(|| anyhow!("no listen address (flag or config)"))?;
            let bridge = bridge
                .or(parsed.bridge.clone())
                .ok_or_else(|| anyhow!("no bridge address (flag or config)"))?;
            let log = capture.as_ref().map(|_| CaptureLog::new());
            let proxy = ClientProxy::start(
                &listen,
                &bridge,
                &parsed.settings,
                &parsed.secret,
                seed,
                log.clone(),
            )?;
            eprintln!(
                "client: socks5 on {} tunneling {} via {bridge}",
                proxy.socks_addr(),
                parsed.settings.defense.as_str()
            );
            serve_forever(capture, log)?;
        }
        Command::Bridge {
            config,
            listen,
            capture,
            seed,
        } => {
            let parsed = load_config(&config)?;
            let listen = listen
                .or(parsed.listen.clone())
                .ok_or_else(|| anyhow!("no listen address (flag or config)"))?;
            let log = capture.as_ref().map(|_| CaptureLog::new());
            let proxy = BridgeProxy::start(
                &listen,
                &parsed.settings,
                &parsed.secret,
                seed,
                log.clone(),
            )?;
            eprintln!(
                "bridge: {} on {}",
                parsed.settings.defense.as_str(),
                proxy.addr()
            );
            serve_forever(capture, log)?;
        }
        Command::Replay {
            script,
            config,
            defense,
            capture_dir,
            seed,
            set,
        } => {
            let settings = match &config {
                Some(path) => load_config(path)?.settings,
                None => {
                    let params = ParamArgs { config: None, set };
                    params.settings(defense.id())?
                }
            };
            let script_trace = read_trace(&script)?;
            let mut options = ReplayOptions::new(settings);
            options.client_seed = seed;
            options.bridge_seed = seed.wrapping_add(1);
            let outcome = replay(&script_trace, &options)?;

            if let Some(dir) = capture_dir {
                std::fs::create_dir_all(&dir)?;
                write_atomic(
                    &dir.join("client.trace"),
                    &serialize_trace(&outcome.client_capture.to_trace(false)),
                )?;
                write_atomic(
                    &dir.join("bridge.trace"),
                    &serialize_trace(&outcome.bridge_capture.to_trace(false)),
                )?;
            }
            let defended = outcome.client_capture.to_trace(true);
            if !script_trace.is_empty() && !defended.is_empty() {
                let report = compute_overhead(&[(script_trace, defended)])?;
                println!(
                    "data_overhead {} time_overhead {} overruns {}",
                    report.data_overhead, report.time_overhead, outcome.overruns
                );
            } else {
                println!("captured {} client records", outcome.client_capture.records().len());
            }
        }
        Command::Genconf { defense, output } => {
            let config = ProxyConfig::generate(defense.id());
            match output {
                Some(path) => write_atomic(&path, &config.to_text())?,
                None => print!("{}", config.to_text()),
            }
        }
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<ProxyConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ProxyConfig::parse(&text)?)
}

/// Blocks forever, refreshing the capture file if one was requested.
fn serve_forever(path: Option<PathBuf>, log: Option<CaptureLog>) -> Result<()> {
    loop {
        std::thread::sleep(Duration::from_secs(2));
        if let (Some(path), Some(log)) = (&path, &log) {
            let text = serialize_trace(&log.snapshot().to_trace(false));
            let _ = write_atomic(path, &text);
        }
    }
}
