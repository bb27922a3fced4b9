//! `vcd`: score videos for frequency-domain consistency with a conditioning image.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vcd_core::config::{parse_taps, ConfigBuilder};
use vcd_core::metrics::{MetricConfig, TapCombine, Variant};
use vcd_core::spectra::PoolingMode;
use vcd_core::transport::Order;

#[derive(Parser, Debug)]
#[command(name = "vcd", version, about = "Video consistency distance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score one video against its first frame or a separate image.
    Score(ScoreArgs),
    /// Score two videos with the same configuration.
    Compare(CompareArgs),
    /// Score one video with every metric variant.
    Ablate(ScoreArgs),
    /// Optimize a toy parametric video against a conditioning image.
    OptimizeDemo(OptimizeArgs),
    /// Dump the amplitude and phase clouds of one image.
    InspectSpectrum(InspectArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EncoderArg {
    Identity,
    Random,
    Vgg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Scalar,
    Cvec,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CombineArg {
    Sum,
    Mean,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        self != Format::Csv
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }
}

/// Metric options. Flags override values read from `--config`.
#[derive(Args, Debug, Clone)]
struct MetricArgs {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    encoder: Option<EncoderArg>,
    /// VCDW weight file for the vgg encoder
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Comma-separated tap names
    #[arg(long)]
    taps: Option<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Number of slicing directions
    #[arg(long)]
    projections: Option<usize>,
    /// Seed for the random encoder, slicing directions and frame sampling
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["1", "2"])]
    order: Option<String>,
    /// Weight of the phase term
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    eps_rel: Option<f64>,
    #[arg(long)]
    no_temporal_weight: bool,
    /// Evaluate a seeded sample of K frames instead of all of them
    #[arg(long, value_name = "K")]
    sample_frames: Option<usize>,
    #[arg(long, value_enum)]
    tap_combine: Option<CombineArg>,
}

impl MetricArgs {
    fn build(&self) -> vcd_core::Result<MetricConfig> {
        let mut b = ConfigBuilder::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                vcd_core::VcdError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            b.apply_text(&text)?;
        }
        if let Some(e) = self.encoder {
            b.set(
                "encoder",
                match e {
                    EncoderArg::Identity => "identity",
                    EncoderArg::Random => "random_conv",
                    EncoderArg::Vgg => "vgg_shallow",
                },
            )?;
        }
        if let Some(w) = &self.weights {
            b.weights = Some(w.clone());
        }
        if let Some(t) = &self.taps {
            b.taps = Some(parse_taps(t)?);
        }
        if let Some(m) = self.mode {
            b.mode = Some(match m {
                ModeArg::Scalar => PoolingMode::Scalar,
                ModeArg::Cvec => PoolingMode::ChannelVector,
            });
        }
        if let Some(l) = self.projections {
            b.projections = Some(l);
        }
        if let Some(s) = self.seed {
            b.set_seed(s);
        }
        if let Some(o) = &self.order {
            b.order = Some(o.parse::<Order>()?);
        }
        if let Some(a) = self.alpha {
            b.alpha = Some(a);
        }
        if let Some(e) = self.eps_rel {
            b.eps_rel = Some(e);
        }
        if self.no_temporal_weight {
            b.use_temporal_weight = Some(false);
        }
        if let Some(k) = self.sample_frames {
            b.sample_frames = Some(Some(k));
        }
        if let Some(c) = self.tap_combine {
            b.tap_combine = Some(match c {
                CombineArg::Sum => TapCombine::Sum,
                CombineArg::Mean => TapCombine::Mean,
            });
        }
        b.build()
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
    /// Also write an SVG chart of per-frame totals
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Frame directory or manifest file
    #[arg(long)]
    video: PathBuf,
    /// Conditioning image; defaults to the first frame
    #[arg(long)]
    cond: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant, default_value = "vcd")]
    variant: Variant,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Two frame directories or manifests
    #[arg(long, num_args = 2, required = true)]
    video: Vec<PathBuf>,
    #[arg(long)]
    cond: Option<PathBuf>,
    #[arg(long, value_parser = parse_variant, default_value = "vcd")]
    variant: Variant,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Conditioning image; defaults to a seeded 16x16 texture
    #[arg(long)]
    cond: Option<PathBuf>,
    /// Number of frames of the parametric video
    #[arg(long, default_value_t = 4)]
    frames: usize,
    /// Initial shift of every frame as dx,dy
    #[arg(long, default_value = "2,2", value_parser = parse_shift)]
    init_shift: (i64, i64),
    /// Objective evaluations
    #[arg(long, default_value_t = 500)]
    budget: usize,
    /// Search seed (also used by the metric when --seed is absent)
    #[arg(long, default_value_t = 0)]
    search_seed: u64,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    plot: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    /// Image file
    #[arg(long)]
    image: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: vcd_core::VcdError| e.to_string())
}

fn parse_shift(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(',').ok_or("expected dx,dy")?;
    let p = |v: &str| v.trim().parse::<i64>().map_err(|e| e.to_string());
    Ok((p(a)?, p(b)?))
}

fn init_workers() {
    if let Some(n) = std::env::var("VCD_NUM_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if the pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_workers();
    let result = match cli.command {
        Command::Score(a) => a
            .metric
            .build()
            .and_then(|cfg| commands::score(&a.video, a.cond.as_deref(), a.variant, &cfg, &a.output)),
        Command::Compare(a) => a.metric.build().and_then(|cfg| {
            commands::compare(&a.video[0], &a.video[1], a.cond.as_deref(), a.variant, &cfg, &a.output)
        }),
        Command::Ablate(a) => a
            .metric
            .build()
            .and_then(|cfg| commands::ablate(&a.video, a.cond.as_deref(), &cfg, &a.output)),
        Command::OptimizeDemo(a) => a.metric.build().and_then(|cfg| {
            commands::optimize_demo(
                a.cond.as_deref(),
                a.frames,
                a.init_shift,
                a.budget,
                a.search_seed,
                &cfg,
                a.plot,
                &a.out,
            )
        }),
        Command::InspectSpectrum(a) => a
            .metric
            .build()
            .and_then(|cfg| commands::inspect_spectrum(&a.image, &cfg, &a.out)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vcd: {e}");
            ExitCode::FAILURE
        }
    }
}
