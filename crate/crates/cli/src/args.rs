use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "coexist",
    version,
    about = "Wi-Fi / unlicensed-LTE coexistence analytics and simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// Preset name or path to a TOML config.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Config override `dotted.key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fraction of each cell where the base's signal trips ED.
    Coverage {
        #[command(flatten)]
        common: Common,
        /// Also write the RSSI CDF here.
        #[arg(long)]
        cdf: Option<PathBuf>,
    },
    /// Probability that every listed link is detected under fast fading.
    #[command(allow_negative_numbers = true)]
    Edprob {
        #[command(flatten)]
        common: Common,
        /// ED threshold in dBm.
        #[arg(long, default_value_t = -62.0, allow_negative_numbers = true)]
        threshold: f64,
        /// Monte Carlo trials for a sampled cross-check; 0 skips it.
        #[arg(long, default_value_t = 0)]
        trials: usize,
        /// Mean RSSI of each link in dBm.
        #[arg(value_name = "RSSI_DBM")]
        rssi: Vec<f64>,
    },
    /// Rank candidate channels from a scan file.
    Select {
        #[command(flatten)]
        common: Common,
        /// CSV scan file.
        scan: PathBuf,
        #[arg(long, value_enum, default_value_t = Running::WifiAp)]
        running_on: Running,
        /// Candidate channels; the channels seen in the scan when absent.
        #[arg(long, value_delimiter = ',')]
        channels: Vec<u8>,
    },
    /// Adaptive ED threshold for one channel from a scan file.
    Adapt {
        #[command(flatten)]
        common: Common,
        /// CSV scan file.
        scan: PathBuf,
        #[arg(long)]
        channel: u8,
        /// Technology whose default threshold is the ceiling.
        #[arg(long, value_enum, default_value_t = TechArg::Lte)]
        tech: TechArg,
    },
    /// Encode or decode beacons.
    Beacon {
        #[command(subcommand)]
        action: BeaconAction,
    },
    /// Run the simulator for one or more seeds.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 1)]
        runs: u64,
        /// Run with adaptive ED off and on.
        #[arg(long)]
        compare_adaptive: bool,
        /// Event trace of the first run.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the simulator over values of one config key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted config key to vary.
        #[arg(long)]
        param: String,
        /// Values for the key.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum BeaconAction {
    /// Encode cell information as hex information elements.
    Encode {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        id: String,
        #[arg(long)]
        channel: u8,
        #[arg(long, default_value_t = 0)]
        stations: u16,
        #[arg(long, default_value_t = 0.0)]
        utilization: f64,
        #[arg(long, default_value_t = 0)]
        capacity: u16,
        #[arg(long, default_value = "rel13_laa")]
        node_type: String,
        #[arg(long, default_value = "lbt_cat4")]
        mac_spec: String,
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        offset: i8,
        /// Plain beacon without the vendor elements.
        #[arg(long)]
        legacy: bool,
    },
    /// Decode hex information elements.
    Decode {
        #[command(flatten)]
        common: Common,
        hex: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Running {
    WifiAp,
    LteEnb,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TechArg {
    Wifi,
    Lte,
}
