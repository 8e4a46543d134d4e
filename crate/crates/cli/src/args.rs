use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "peeg", version, about = "PiEEG station: acquisition, streaming, recording and analysis")]
pub struct Cli {
    /// Report format on standard output.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scenario offline into a session file.
    Simulate(SimulateArgs),
    /// Acquire from a backend into a session file, printing live metrics.
    Record(RecordArgs),
    /// Stream a session file to clients.
    Replay(ReplayArgs),
    /// Run a backend behind the stream server.
    Serve(ServeArgs),
    /// Analyze a session file.
    Analyze {
        #[command(subcommand)]
        kind: AnalyzeKind,
    },
    /// Read or write converter registers on a running station.
    Regs {
        #[command(subcommand)]
        op: RegsOp,
    },
    /// Convert a session file to another format.
    Export {
        #[command(subcommand)]
        kind: ExportKind,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Shortcut (fig6, fig7, fig8, fig9, ecg:<bpm>) or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario duration in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, default_value_t = 25)]
    pub block_len: usize,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// `sim:<scenario>` or `hw:<config.toml>`.
    #[arg(long, default_value = "sim:fig6")]
    pub backend: String,
    /// Overrides the simulator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 25)]
    pub block_len: usize,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Stop after this many seconds of stream time.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Do not pace the simulator to real time.
    #[arg(long)]
    pub fast: bool,
}

#[derive(Debug, Args)]
pub struct Listen {
    #[arg(long, default_value = peeg_stream::DEFAULT_TCP_ADDR)]
    pub tcp: SocketAddr,
    #[arg(long, default_value = peeg_stream::DEFAULT_WS_ADDR)]
    pub ws: SocketAddr,
    #[arg(long)]
    pub no_tcp: bool,
    #[arg(long)]
    pub no_ws: bool,
    /// Required by clients when set. Serving beyond loopback needs one.
    #[arg(long, env = "PEEG_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Leave the stream idle until a client sends START.
    #[arg(long)]
    pub idle: bool,
    /// Exit after this many seconds of wall time.
    #[arg(long)]
    pub duration: Option<f64>,
    /// Exit as soon as the stream ends.
    #[arg(long)]
    pub exit_on_end: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub listen: Listen,
    /// Also record everything served, with client annotations, to this file.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub session: PathBuf,
    #[command(flatten)]
    pub listen: Listen,
    /// Samples per DATA block; defaults to the recorded block length.
    #[arg(long)]
    pub block_len: Option<usize>,
    /// Send as fast as clients read instead of in real time.
    #[arg(long)]
    pub fast: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeCommon {
    pub session: PathBuf,
    /// Channel index or label; defaults to the first channel.
    #[arg(long)]
    pub channel: Option<String>,
    /// Detector settings as JSON; missing fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeKind {
    /// Alpha power per protocol segment of alternating eye states.
    Alpha {
        #[command(flatten)]
        common: AnalyzeCommon,
        /// Segment length in seconds.
        #[arg(long, default_value_t = 5.0)]
        segment: f64,
        /// Eye state of the first segment.
        #[arg(long, value_enum, default_value_t = Eyes::Closed)]
        first: Eyes,
    },
    /// Blinks and chewing bursts.
    Artifacts {
        #[command(flatten)]
        common: AnalyzeCommon,
    },
    /// Muscle activation onsets.
    Emg {
        #[command(flatten)]
        common: AnalyzeCommon,
    },
    /// R peaks and heart rate.
    Ecg {
        #[command(flatten)]
        common: AnalyzeCommon,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Eyes {
    Closed,
    Open,
}

#[derive(Debug, Args)]
pub struct Remote {
    #[arg(long, env = "PEEG_ENDPOINT", default_value = peeg_stream::DEFAULT_TCP_ADDR)]
    pub endpoint: String,
    #[arg(long, env = "PEEG_TOKEN", hide_env_values = true)]
    pub token: Option<String>,
    /// Reply timeout in milliseconds.
    #[arg(long, default_value_t = 5000)]
    pub timeout_ms: u64,
}

#[derive(Debug, Subcommand)]
pub enum RegsOp {
    /// Print one register, or all of them.
    Get {
        /// Address (`5`, `0x05`) or name (`CH1SET`).
        register: Option<String>,
        #[command(flatten)]
        remote: Remote,
    },
    /// Write one register.
    Set {
        register: String,
        value: String,
        #[command(flatten)]
        remote: Remote,
    },
}

#[derive(Debug, Subcommand)]
pub enum ExportKind {
    /// One row per sample: time and microvolts per channel.
    Csv {
        session: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
