use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

/// Radiance-manifold renderer: scene generation, gridding, map
/// super-resolution, rendering, mesh export and evaluation.
#[derive(Debug, Parser)]
#[command(name = "gramhd", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scene configuration (TOML). Built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for all randomness; overrides the config's `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; also where inputs are looked up by default.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded stand-in weights and the surface set into model.grmh.
    GenScene,
    /// Sample the radiance network onto per-surface maps (maps_lr.grms).
    Grid(GridArgs),
    /// Upsample the low-resolution maps (maps_hr.grms).
    Superres(SuperresArgs),
    /// Render one view to render.png.
    Render(RenderArgs),
    /// Render a yaw sweep to frames/frame_NNN.png, optionally with its EPI.
    Orbit(OrbitArgs),
    /// Fuse multiview depth into an occupancy grid and extract a mesh.
    ExtractMesh(ExtractArgs),
    /// Render a yaw sweep and write only its epipolar-plane image.
    Epi(EpiArgs),
    /// Compute consistency losses and image metrics; writes eval.txt and eval.json.
    Eval(EvalArgs),
    /// Time the cached mesh renderer on one core and report frames per second.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Weight file [default: <out>/model.grmh].
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MapsArg {
    /// Map file [default: <out>/maps_hr.grms, else <out>/maps_lr.grms].
    #[arg(long, value_name = "FILE")]
    pub maps: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Also write a PNG contact sheet of the maps.
    #[arg(long)]
    pub sheet: bool,
}

#[derive(Debug, Args)]
pub struct SuperresArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Low-resolution maps [default: <out>/maps_lr.grms].
    #[arg(long, value_name = "FILE")]
    pub maps: Option<PathBuf>,
    /// Also write a PNG contact sheet of the maps.
    #[arg(long)]
    pub sheet: bool,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct ViewArgs {
    /// Camera yaw in radians [default: from config].
    #[arg(long, allow_hyphen_values = true)]
    pub yaw: Option<f64>,
    /// Camera pitch in radians [default: from config].
    #[arg(long, allow_hyphen_values = true)]
    pub pitch: Option<f64>,
    /// Camera roll in radians [default: from config].
    #[arg(long, allow_hyphen_values = true)]
    pub roll: Option<f64>,
    /// Square output size in pixels [default: from config].
    #[arg(long)]
    pub size: Option<usize>,
    /// Use the cached textured-mesh rasterizer instead of ray casting.
    #[arg(long)]
    pub cached: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub maps: MapsArg,
    #[command(flatten)]
    pub view: ViewArgs,
    /// Also write the depth map (depth.grmd).
    #[arg(long)]
    pub depth: bool,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct SweepArgs {
    /// Number of frames in the sweep.
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    /// Yaw runs from -R to +R radians.
    #[arg(long, value_name = "R", default_value_t = 0.4)]
    pub yaw_range: f64,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub maps: MapsArg,
    #[command(flatten)]
    pub view: ViewArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Also write the EPI of the sweep (epi.png).
    #[arg(long)]
    pub epi: bool,
    /// Image row used for the EPI [default: middle row].
    #[arg(long)]
    pub epi_row: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EpiArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub maps: MapsArg,
    #[command(flatten)]
    pub view: ViewArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Image row to slice [default: middle row].
    #[arg(long)]
    pub row: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub maps: MapsArg,
    /// Number of depth views to fuse.
    #[arg(long, default_value_t = 15)]
    pub views: usize,
    /// Yaw of the outermost views, in radians.
    #[arg(long, default_value_t = 0.5)]
    pub yaw_span: f64,
    /// Pitch offset of the upper and lower views, in radians.
    #[arg(long, default_value_t = 0.2)]
    pub pitch: f64,
    /// Square depth-map size.
    #[arg(long, default_value_t = 128)]
    pub view_size: usize,
    /// Occupancy grid points per side.
    #[arg(long, default_value_t = 128)]
    pub resolution: usize,
    /// Isosurface level.
    #[arg(long, default_value_t = 0.5)]
    pub level: f64,
    /// Also bake the surfaces and maps into textured meshes (scene.obj).
    #[arg(long)]
    pub textured: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Low-resolution maps [default: <out>/maps_lr.grms].
    #[arg(long, value_name = "FILE")]
    pub lr_maps: Option<PathBuf>,
    /// High-resolution maps [default: <out>/maps_hr.grms].
    #[arg(long, value_name = "FILE")]
    pub hr_maps: Option<PathBuf>,
    /// Reference PNG compared against the high-resolution render.
    #[arg(long, value_name = "FILE")]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub maps: MapsArg,
    /// Timed frames.
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    /// Square frame size.
    #[arg(long, default_value_t = 256)]
    pub size: usize,
}
