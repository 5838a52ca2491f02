use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

mod commands;

use streamalloc_core::model::{Strategy, DEFAULT_HEADROOM};
use streamalloc_core::profiles::{Device, FrameSize, ReferenceMachine};
use streamalloc_core::solver::SolverLimits;

/// Plans, compares and simulates cloud deployments for real-time camera
/// stream analysis on CPU and GPU instances.
#[derive(Debug, Parser)]
#[command(name = "streamalloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a minimum-cost plan under one strategy.
    Plan {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value = "st3")]
        strategy: Strategy,
        #[command(flatten)]
        solver: SolverArgs,
        /// Plan output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan under every strategy and tabulate costs and savings.
    Compare {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Structured (JSON) comparison output file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate utilization and performance of a plan.
    Simulate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        plan: PathBuf,
        /// Report output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a profile to test-run samples and store it.
    ProfileFit {
        /// Test-run sample file.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        program: String,
        #[arg(long, value_parser = parse_device)]
        device: Device,
        /// Frame size as WIDTHxHEIGHT.
        #[arg(long, value_parser = parse_frame_size, default_value = "640x480")]
        frame_size: FrameSize,
        /// Reference machine as CORES,MEMORY_GB[,GPU_CORES,GPU_MEMORY_GB].
        #[arg(long, value_parser = parse_machine, default_value = "8,15,1536,4")]
        reference_machine: ReferenceMachine,
        /// Measured single-stream maximum frame rate on this device.
        #[arg(long)]
        max_rate: Option<f64>,
        /// Profile store to update (created when missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic test-run samples from a stored profile.
    TestRun {
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        program: String,
        #[arg(long, value_parser = parse_device)]
        device: Device,
        #[arg(long, value_parser = parse_frame_size, default_value = "640x480")]
        frame_size: FrameSize,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Standard deviation of the additive utilization noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check documents against their schemas and invariants.
    Validate {
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        workload: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
    },
}

/// Catalog and profiles default to the bundled EC2 experiment data.
#[derive(Debug, Args)]
struct Inputs {
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<PathBuf>,
    #[arg(long)]
    workload: PathBuf,
    /// Fraction of raw instance capacity the planner may use.
    #[arg(long, default_value_t = DEFAULT_HEADROOM)]
    headroom: f64,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 10_000_000)]
    max_nodes: u64,
    /// Search time budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
}

impl SolverArgs {
    fn limits(&self) -> SolverLimits {
        SolverLimits {
            max_nodes: self.max_nodes,
            time_budget: Duration::from_secs_f64(self.time_budget),
            optimality_required: false,
        }
    }
}

fn parse_device(s: &str) -> Result<Device, String> {
    match s {
        "cpu" | "cpu-only" => Ok(Device::CpuOnly),
        "gpu" | "gpu-assisted" => Ok(Device::GpuAssisted),
        _ => Err(format!("unknown device `{s}` (expected cpu or gpu)")),
    }
}

fn parse_frame_size(s: &str) -> Result<FrameSize, String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    Ok(FrameSize { w: w.parse().map_err(|_| "bad width")?, h: h.parse().map_err(|_| "bad height")? })
}

fn parse_machine(s: &str) -> Result<ReferenceMachine, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad number `{p}`")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [cpu_cores, memory_gb] => Ok(ReferenceMachine { cpu_cores, memory_gb, gpu_cores: 0.0, gpu_memory_gb: 0.0 }),
        [cpu_cores, memory_gb, gpu_cores, gpu_memory_gb] => {
            Ok(ReferenceMachine { cpu_cores, memory_gb, gpu_cores, gpu_memory_gb })
        }
        _ => Err("expected 2 or 4 comma-separated numbers".into()),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::EXIT_INPUT)
        }
    }
}
