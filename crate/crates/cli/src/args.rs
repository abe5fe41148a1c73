use clap::{Args, Parser, Subcommand, ValueEnum};
use foamsim::engine::{CameraPolicy, Completion, OverflowPolicy, ScanOrder};
use foamsim::payload::PayloadLayout;
use std::path::PathBuf;

/// Distributed Voronoi-foam renderer simulator.
///
/// Every command that writes files also writes `<first output>.manifest.json`
/// with the resolved configuration, its SHA-256, and hashes of all inputs and
/// outputs. Exit status: 0 success, 2 partial frame, 1 any other failure.
#[derive(Debug, Parser)]
#[command(name = "foamsim", version, propagate_version = true)]
pub struct Cli {
    /// Worker threads for parallel stages [default: all cores].
    #[arg(long, global = true, env = "FOAMSIM_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene and its Voronoi adjacency.
    GenScene(GenSceneArgs),
    /// Partition a scene and report per-shard statistics.
    Partition(PartitionArgs),
    /// Render on the simulated tile machine.
    Render(RenderArgs),
    /// Render serially with the reference marcher.
    RenderRef(RenderRefArgs),
    /// PSNR and SSIM between two PPM images.
    Compare(CompareArgs),
    /// Memory, hop and conservation tables from a render stats file.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ColorArg {
    Random,
    PositionHash,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistributionArg {
    Uniform,
    Clustered,
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    #[arg(long)]
    pub sites: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scene box as x0,y0,z0,x1,y1,z1.
    #[arg(long, value_delimiter = ',', num_args = 6, default_value = "0,0,0,1,1,1")]
    pub bbox: Vec<f32>,
    /// Density range as lo,hi.
    #[arg(long, value_delimiter = ',', num_args = 2, default_value = "0,5")]
    pub density: Vec<f32>,
    #[arg(long, value_enum, default_value_t = ColorArg::Random)]
    pub color: ColorArg,
    #[arg(long, value_enum, default_value_t = DistributionArg::Uniform)]
    pub distribution: DistributionArg,
    /// Cluster centers (clustered only).
    #[arg(long, default_value_t = 16)]
    pub clusters: u32,
    /// Cluster spread as a fraction of the box extent (clustered only).
    #[arg(long, default_value_t = 0.03)]
    pub spread: f32,
    /// Fraction of uniform background sites (clustered only).
    #[arg(long, default_value_t = 0.05)]
    pub background: f32,
    /// Candidate neighbors per site for the adjacency search.
    #[arg(long, default_value_t = 64)]
    pub knn: usize,
    /// Test every site pair instead of the k-nearest candidates (small scenes).
    #[arg(long)]
    pub exhaustive: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Kdtree,
    OctreeCap,
    OctreeFixed,
}

#[derive(Debug, Args)]
pub struct PartitionArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Kdtree)]
    pub method: MethodArg,
    /// k-d tree depth (2^depth shards).
    #[arg(long, default_value_t = 6)]
    pub depth: u32,
    /// Octree leaf capacity for octree-cap.
    #[arg(long, default_value_t = 5000)]
    pub cap: usize,
    /// Partition count for octree-fixed.
    #[arg(long, default_value_t = 1024)]
    pub target: usize,
    /// Per-partition CSV.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Summary and rows as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Shard file (FSHD).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip shard extraction; footprints then count local sites only.
    #[arg(long)]
    pub no_shards: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Default,
    Mixed,
    AllHalf,
}

impl From<LayoutArg> for PayloadLayout {
    fn from(l: LayoutArg) -> Self {
        match l {
            LayoutArg::Default => PayloadLayout::Default,
            LayoutArg::Mixed => PayloadLayout::Mixed,
            LayoutArg::AllHalf => PayloadLayout::AllHalf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    Row,
    Col,
}

impl From<ScanArg> for ScanOrder {
    fn from(s: ScanArg) -> Self {
        match s {
            ScanArg::Row => ScanOrder::Row,
            ScanArg::Col => ScanOrder::Column,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Backpressure,
    Drop,
}

impl From<PolicyArg> for OverflowPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Backpressure => OverflowPolicy::Backpressure,
            PolicyArg::Drop => OverflowPolicy::Drop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CameraPolicyArg {
    Safe,
    Unsafe,
}

impl From<CameraPolicyArg> for CameraPolicy {
    fn from(p: CameraPolicyArg) -> Self {
        match p {
            CameraPolicyArg::Safe => CameraPolicy::DeferredSafe,
            CameraPolicyArg::Unsafe => CameraPolicy::ImmediateUnsafe,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompletionArg {
    Quiescence,
    Budgeted,
}

impl From<CompletionArg> for Completion {
    fn from(c: CompletionArg) -> Self {
        match c {
            CompletionArg::Quiescence => Completion::Quiescence,
            CompletionArg::Budgeted => Completion::Budgeted,
        }
    }
}

/// Image outputs shared by both renderers.
#[derive(Debug, Args)]
pub struct ImageOutputs {
    /// RGB image (binary PPM).
    #[arg(long)]
    pub out: PathBuf,
    /// Depth at 50% transmittance (PFM, -1 where never reached).
    #[arg(long)]
    pub depth_out: Option<PathBuf>,
    /// Run statistics (JSON).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Camera JSON: one camera or a list (one frame each, or a mid-frame
    /// switch with --switch-at).
    #[arg(long)]
    pub camera: PathBuf,
    /// Engine and schedule JSON; flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Shards from `partition --out`; otherwise a k-d tree is built here.
    #[arg(long)]
    pub shards: Option<PathBuf>,
    /// k-d tree depth when no shard file is given [default: 2 x levels].
    #[arg(long)]
    pub depth: Option<u32>,
    /// Payload layout [default: default (28 B)].
    #[arg(long, value_enum)]
    pub layout: Option<LayoutArg>,
    /// Router levels; 4^L tracers [default: 3].
    #[arg(long)]
    pub levels: Option<u32>,
    /// Iterations per host sync [default: 20].
    #[arg(long)]
    pub rc: Option<u32>,
    /// Scan order [default: row].
    #[arg(long, value_enum)]
    pub scan: Option<ScanArg>,
    /// Rows or columns per batch [default: 1].
    #[arg(long)]
    pub batch: Option<u32>,
    /// Idle iterations between batches [default: 0].
    #[arg(long)]
    pub idle: Option<u32>,
    /// Injection-free iterations after the last batch [default: 200].
    #[arg(long)]
    pub drain: Option<u32>,
    /// Overflow policy [default: backpressure].
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    /// Camera change policy [default: safe].
    #[arg(long, value_enum)]
    pub camera_policy: Option<CameraPolicyArg>,
    /// Completion rule [default: quiescence].
    #[arg(long, value_enum)]
    pub completion: Option<CompletionArg>,
    /// Bytes per buffer [default: 57600].
    #[arg(long)]
    pub buffer_bytes: Option<usize>,
    /// Rays per buffer, overriding --buffer-bytes.
    #[arg(long)]
    pub lane_capacity: Option<usize>,
    /// Modeled SRAM per tile in bytes [default: 638976].
    #[arg(long)]
    pub sram_budget: Option<usize>,
    /// Cells a tracer marches per ray per visit [default: unlimited].
    #[arg(long)]
    pub cell_cap: Option<u32>,
    /// Simulated workers per tile, 1..=6 [default: 6].
    #[arg(long)]
    pub workers: Option<usize>,
    /// With two cameras: iterations into the frame at which the second is
    /// requested.
    #[arg(long)]
    pub switch_at: Option<u64>,
    #[command(flatten)]
    pub images: ImageOutputs,
    /// Router hop map (PGM, clamped at 255).
    #[arg(long)]
    pub hops_out: Option<PathBuf>,
    /// Tracer hop map (PGM, clamped at 255).
    #[arg(long)]
    pub tracer_hops_out: Option<PathBuf>,
    /// Missing-pixel mask (PGM, 255 = missing).
    #[arg(long)]
    pub missing_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderRefArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub camera: PathBuf,
    /// Transmittance below which a ray stops [default: 0.001].
    #[arg(long)]
    pub t_min: Option<f32>,
    /// Cells per ray before giving up [default: 10000].
    #[arg(long)]
    pub max_steps: Option<u32>,
    #[command(flatten)]
    pub images: ImageOutputs,
    /// Cells visited per pixel (PGM, clamped at 255).
    #[arg(long)]
    pub steps_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Stats file written by `render --stats`.
    #[arg(long)]
    pub stats: PathBuf,
    /// Write hops.csv and memory.csv into this directory.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
}
