use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use gramhd::error::{Error, Result};
use gramhd::export::{
    bake_textured_mesh, fuse_occupancy, marching_cubes, orbit_cameras, render_cached, GridSpec, TexturedMesh,
};
use gramhd::geometry::{SurfaceSet, DEFAULT_CENTER};
use gramhd::gridding::{grid_manifolds, MapStack};
use gramhd::io::{self, Manifest, SceneConfig};
use gramhd::losses::{consistency_loss, downsample_image, psnr, ssim, ConsistencyWeights};
use gramhd::math::{linspace, Vec3};
use gramhd::model::{gen_test_model, latent_from_seed};
use gramhd::params::NetParams;
use gramhd::radiance::{LatentCode, RadianceArch};
use gramhd::render::{build_epi, render_depth_with, render_image_with, Camera, Image, RenderOptions};
use gramhd::superres::superresolve;

use crate::args::*;

pub const MODEL_FILE: &str = "model.grmh";
pub const SCENE_FILE: &str = "scene.toml";
pub const LR_MAPS_FILE: &str = "maps_lr.grms";
pub const HR_MAPS_FILE: &str = "maps_hr.grms";

/// Settings shared by every subcommand.
pub struct Context {
    pub cfg: SceneConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    pub fn new(global: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &global.config {
            Some(p) => SceneConfig::load(p)?,
            None => SceneConfig::default(),
        };
        if let Some(seed) = global.seed {
            cfg.seed = seed;
        }
        Ok(Self {
            seed: cfg.seed,
            cfg,
            out: global.out.clone(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn manifest(&self, command: &str) -> Manifest {
        Manifest::new(command, self.seed, self.cfg.sha256())
    }

    /// Records `written` and saves `<command>.manifest.json` next to them.
    fn finish(&self, command: &str, written: &[PathBuf]) -> Result<()> {
        let mut m = self.manifest(command);
        m.record_all(&self.out, written)?;
        let path = self.path(&format!("{command}.manifest.json"));
        m.save(&path)?;
        for p in written {
            println!("wrote {}", p.display());
        }
        println!("wrote {}", path.display());
        Ok(())
    }

    fn load_model(&self, arg: &ModelArg) -> Result<(NetParams, SurfaceSet)> {
        let path = arg.model.clone().unwrap_or_else(|| self.path(MODEL_FILE));
        let params = io::load_weights(&path).map_err(|e| hint(e, "gen-scene"))?;
        let surfaces = SurfaceSet::from_params(&params)?;
        Ok((params, surfaces))
    }

    fn latent(&self, params: &NetParams) -> Result<LatentCode> {
        Ok(latent_from_seed(self.seed, RadianceArch::infer(params)?.d_z))
    }

    fn load_maps(&self, arg: &MapsArg) -> Result<MapStack> {
        if let Some(p) = &arg.maps {
            return io::load_maps(p);
        }
        let hr = self.path(HR_MAPS_FILE);
        if hr.exists() {
            return io::load_maps(&hr);
        }
        io::load_maps(&self.path(LR_MAPS_FILE)).map_err(|e| hint(e, "grid"))
    }

    fn camera(&self, view: &ViewArgs) -> Camera {
        let mut cam = self.cfg.camera();
        cam.yaw = view.yaw.unwrap_or(cam.yaw);
        cam.pitch = view.pitch.unwrap_or(cam.pitch);
        cam.roll = view.roll.unwrap_or(cam.roll);
        if let Some(s) = view.size {
            cam = cam.with_resolution(s, s);
        }
        cam
    }

    fn render_options(&self) -> RenderOptions {
        RenderOptions::for_grid_range(self.cfg.maps.t_near, self.cfg.maps.t_far)
    }
}

fn hint(e: Error, command: &str) -> Error {
    match e {
        Error::Io { path, source } if source.kind() == std::io::ErrorKind::NotFound => Error::InvalidArgument(format!(
            "{} not found (run `gramhd {command}` first or pass the file explicitly)",
            path.display()
        )),
        other => other,
    }
}

/// Ray-cast or cached renderer behind one interface.
enum Renderer {
    Rays {
        surfaces: SurfaceSet,
        maps: MapStack,
        opts: RenderOptions,
    },
    Cached(Vec<TexturedMesh>),
}

impl Renderer {
    fn new(ctx: &Context, model: &ModelArg, maps: &MapsArg, cached: bool) -> Result<Self> {
        let (_, surfaces) = ctx.load_model(model)?;
        let maps = ctx.load_maps(maps)?;
        Ok(if cached {
            Renderer::Cached(bake_textured_mesh(&surfaces, &maps.radiance_only())?)
        } else {
            Renderer::Rays {
                surfaces,
                maps,
                opts: ctx.render_options(),
            }
        })
    }

    fn render(&self, cam: &Camera) -> Result<Image> {
        match self {
            Renderer::Rays { surfaces, maps, opts } => render_image_with(cam, surfaces, maps, opts),
            Renderer::Cached(meshes) => render_cached(meshes, cam),
        }
    }
}

pub fn gen_scene(ctx: &Context) -> Result<()> {
    let mut params = gen_test_model(ctx.seed, &ctx.cfg.model_config()?);
    params.extend(ctx.cfg.surface_set()?.to_params());
    let model = ctx.path(MODEL_FILE);
    io::save_weights(&params, &model)?;
    let mut cfg = ctx.cfg.clone();
    cfg.seed = ctx.seed;
    let scene = ctx.path(SCENE_FILE);
    io::write_file(&scene, cfg.canonical_toml().as_bytes())?;
    ctx.finish("gen-scene", &[model, scene])
}

fn write_sheet(ctx: &Context, maps: &MapStack, name: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let p = ctx.path(name);
    io::save_png(&io::contact_sheet(maps)?, &p)?;
    written.push(p);
    Ok(())
}

pub fn grid(ctx: &Context, args: &GridArgs) -> Result<()> {
    let (params, surfaces) = ctx.load_model(&args.model)?;
    let latent = ctx.latent(&params)?;
    let maps = grid_manifolds(&latent, &surfaces, &params, &ctx.cfg.grid_options())?;
    let path = ctx.path(LR_MAPS_FILE);
    io::save_maps(&maps, &path)?;
    let mut written = vec![path];
    if args.sheet {
        write_sheet(ctx, &maps, "maps_lr.png", &mut written)?;
    }
    ctx.finish("grid", &written)
}

pub fn superres(ctx: &Context, args: &SuperresArgs) -> Result<()> {
    let (params, _) = ctx.load_model(&args.model)?;
    let latent = ctx.latent(&params)?;
    let lr = match &args.maps {
        Some(p) => io::load_maps(p)?,
        None => io::load_maps(&ctx.path(LR_MAPS_FILE)).map_err(|e| hint(e, "grid"))?,
    };
    let hr = superresolve(&latent, &lr, &params, ctx.cfg.maps.sr_factor)?;
    let path = ctx.path(HR_MAPS_FILE);
    io::save_maps(&hr, &path)?;
    let mut written = vec![path];
    if args.sheet {
        write_sheet(ctx, &hr, "maps_hr.png", &mut written)?;
    }
    ctx.finish("superres", &written)
}

pub fn render(ctx: &Context, args: &RenderArgs) -> Result<()> {
    let cam = ctx.camera(&args.view);
    let renderer = Renderer::new(ctx, &args.model, &args.maps, args.view.cached)?;
    let path = ctx.path("render.png");
    io::save_png(&renderer.render(&cam)?, &path)?;
    let mut written = vec![path];
    if args.depth {
        let (_, surfaces) = ctx.load_model(&args.model)?;
        let maps = ctx.load_maps(&args.maps)?;
        let depth = render_depth_with(&cam, &surfaces, &maps, &ctx.render_options())?;
        let p = ctx.path("depth.grmd");
        io::save_depth(&depth, &p)?;
        written.push(p);
    }
    ctx.finish("render", &written)
}

fn sweep_cameras(base: &Camera, sweep: &SweepArgs) -> Result<Vec<Camera>> {
    if sweep.frames == 0 {
        return Err(Error::InvalidArgument("--frames must be at least 1".into()));
    }
    if !(sweep.yaw_range >= 0.0 && sweep.yaw_range.is_finite()) {
        return Err(Error::InvalidArgument(format!("--yaw-range must be >= 0, got {}", sweep.yaw_range)));
    }
    let yaws = if sweep.frames == 1 {
        vec![base.yaw]
    } else {
        linspace(-sweep.yaw_range, sweep.yaw_range, sweep.frames)
    };
    Ok(yaws.into_iter().map(|yaw| Camera { yaw, ..*base }).collect())
}

fn epi_of(frames: &[Image], row: Option<usize>) -> Result<Image> {
    let first = frames.first().ok_or_else(|| Error::InvalidArgument("no frames".into()))?;
    build_epi(frames, row.unwrap_or(first.height / 2), 0..first.width)
}

/// Zero-padded to at least three digits.
pub fn frame_name(index: usize, count: usize) -> String {
    let digits = count.saturating_sub(1).to_string().len().max(3);
    format!("frame_{index:0digits$}.png")
}

pub fn orbit(ctx: &Context, args: &OrbitArgs) -> Result<()> {
    let cams = sweep_cameras(&ctx.camera(&args.view), &args.sweep)?;
    let renderer = Renderer::new(ctx, &args.model, &args.maps, args.view.cached)?;
    let mut written = Vec::new();
    let mut frames = Vec::new();
    for (i, cam) in cams.iter().enumerate() {
        let img = renderer.render(cam)?;
        let p = ctx.path("frames").join(frame_name(i, cams.len()));
        io::save_png(&img, &p)?;
        written.push(p);
        if args.epi {
            frames.push(img);
        }
    }
    if args.epi {
        let p = ctx.path("epi.png");
        io::save_png(&epi_of(&frames, args.epi_row)?, &p)?;
        written.push(p);
    }
    ctx.finish("orbit", &written)
}

pub fn epi(ctx: &Context, args: &EpiArgs) -> Result<()> {
    let cams = sweep_cameras(&ctx.camera(&args.view), &args.sweep)?;
    let renderer = Renderer::new(ctx, &args.model, &args.maps, args.view.cached)?;
    let frames = cams.iter().map(|c| renderer.render(c)).collect::<Result<Vec<_>>>()?;
    let p = ctx.path("epi.png");
    io::save_png(&epi_of(&frames, args.row)?, &p)?;
    ctx.finish("epi", &[p])
}

/// Box around the foreground: the gridded square in x and y, and the slab
/// between the near gridding plane and the far side of the default center.
fn extraction_box(ctx: &Context, resolution: usize) -> GridSpec {
    let l = ctx.cfg.maps.fg_half_width;
    GridSpec {
        resolution,
        min: Vec3::new(-l, -l, DEFAULT_CENTER.z - l),
        max: Vec3::new(l, l, DEFAULT_CENTER.z + l),
    }
}

pub fn extract_mesh(ctx: &Context, args: &ExtractArgs) -> Result<()> {
    if args.views == 0 {
        return Err(Error::InvalidArgument("--views must be at least 1".into()));
    }
    let (_, surfaces) = ctx.load_model(&args.model)?;
    let maps = ctx.load_maps(&args.maps)?;
    let base = ctx.cfg.camera().with_resolution(args.view_size, args.view_size);
    let opts = ctx.render_options();
    let views = orbit_cameras(&base, args.views, args.yaw_span, args.pitch)
        .into_iter()
        .map(|c| Ok((render_depth_with(&c, &surfaces, &maps, &opts)?, c)))
        .collect::<Result<Vec<_>>>()?;
    let grid = fuse_occupancy(&views, &extraction_box(ctx, args.resolution))?;
    let mesh = marching_cubes(&grid, args.level);
    let grid_path = ctx.path("occupancy.grmo");
    io::save_grid(&grid, &grid_path)?;
    let mesh_path = ctx.path("proxy.obj");
    io::save_obj(&mesh, &mesh_path)?;
    println!("proxy mesh: {} vertices, {} triangles", mesh.vertices.len(), mesh.triangles.len());
    let mut written = vec![grid_path, mesh_path];
    if args.textured {
        let baked = bake_textured_mesh(&surfaces, &maps.radiance_only())?;
        written.extend(io::save_textured_obj(&baked, &ctx.out, "scene")?);
    }
    ctx.finish("extract-mesh", &written)
}

/// Ordered metric list rendered as `key = value` lines and as JSON.
pub struct Report(Vec<(String, f64)>);

impl Report {
    fn push(&mut self, key: &str, v: f64) {
        self.0.push((key.to_string(), v));
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, serde_json::Value> = self
            .0
            .iter()
            .map(|(k, v)| {
                let v = serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, serde_json::Value::Number);
                (k.clone(), v)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).expect("metrics serialize");
        s.push('\n');
        s
    }
}

pub fn eval(ctx: &Context, args: &EvalArgs) -> Result<()> {
    let (_, surfaces) = ctx.load_model(&args.model)?;
    let lr = io::load_maps(&args.lr_maps.clone().unwrap_or_else(|| ctx.path(LR_MAPS_FILE))).map_err(|e| hint(e, "grid"))?;
    let hr = io::load_maps(&args.hr_maps.clone().unwrap_or_else(|| ctx.path(HR_MAPS_FILE)))
        .map_err(|e| hint(e, "superres"))?;
    if lr.height == 0 || hr.height % lr.height != 0 || hr.height / lr.height != hr.width / lr.width.max(1) {
        return Err(Error::InvalidArgument(format!(
            "maps {}x{} are not an integer upscale of {}x{}",
            hr.height, hr.width, lr.height, lr.width
        )));
    }
    let factor = hr.height / lr.height;
    let cam = ctx.cfg.camera();
    if cam.height % factor != 0 || cam.width % factor != 0 {
        return Err(Error::InvalidArgument(format!(
            "camera size {}x{} is not divisible by the upscale factor {factor}",
            cam.height, cam.width
        )));
    }
    let opts = ctx.render_options();
    let hr_img = render_image_with(&cam, &surfaces, &hr, &opts)?;
    let lr_cam = cam.with_resolution(cam.height / factor, cam.width / factor);
    let lr_img = render_image_with(&lr_cam, &surfaces, &lr, &opts)?;
    let w = ctx.cfg.consistency_weights();
    let image_term = consistency_loss(&hr_img, &lr_img, &hr, &lr, factor, ConsistencyWeights { image: 1.0, maps: 0.0 })?;
    let maps_term = consistency_loss(&hr_img, &lr_img, &hr, &lr, factor, ConsistencyWeights { image: 0.0, maps: 1.0 })?;

    let mut r = Report(Vec::new());
    r.push("upscale_factor", factor as f64);
    r.push("consistency_image", image_term);
    r.push("consistency_maps", maps_term);
    r.push("consistency_loss", w.image * image_term + w.maps * maps_term);
    let down = downsample_image(&hr_img, factor)?;
    r.push("psnr_downsampled_vs_lr_db", psnr(&down, &lr_img)?);
    if down.height >= 11 && down.width >= 11 {
        r.push("ssim_downsampled_vs_lr", ssim(&down, &lr_img)?);
    }
    let cached = render_cached(&bake_textured_mesh(&surfaces, &hr.radiance_only())?, &cam)?;
    r.push("psnr_cached_vs_rays_db", psnr(&cached, &hr_img)?);
    r.push("ssim_cached_vs_rays", ssim(&cached, &hr_img)?);
    if let Some(p) = &args.reference {
        let reference = io::load_png(p)?;
        r.push("psnr_vs_reference_db", psnr(&hr_img, &reference)?);
        r.push("ssim_vs_reference", ssim(&hr_img, &reference)?);
    }

    let text = r.to_text();
    print!("{text}");
    let (tp, jp) = (ctx.path("eval.txt"), ctx.path("eval.json"));
    io::write_file(&tp, text.as_bytes())?;
    io::write_file(&jp, r.to_json().as_bytes())?;
    ctx.finish("eval", &[tp, jp])
}

/// Frames per second of the cached renderer on a single worker thread.
pub fn measure_fps(meshes: &[TexturedMesh], base: &Camera, frames: usize) -> Result<f64> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Config(format!("cannot build benchmark pool: {e}")))?;
    pool.install(|| {
        let yaws = linspace(-0.3, 0.3, frames.max(2));
        render_cached(meshes, base)?;
        let start = Instant::now();
        for &yaw in yaws.iter().take(frames) {
            std::hint::black_box(render_cached(meshes, &Camera { yaw, ..*base })?);
        }
        Ok(frames as f64 / start.elapsed().as_secs_f64())
    })
}

pub fn bench(ctx: &Context, args: &BenchArgs) -> Result<()> {
    if args.frames == 0 || args.size == 0 {
        return Err(Error::InvalidArgument("--frames and --size must be positive".into()));
    }
    let (_, surfaces) = ctx.load_model(&args.model)?;
    let maps = ctx.load_maps(&args.maps)?;
    let meshes = bake_textured_mesh(&surfaces, &maps.radiance_only())?;
    let cam = ctx.cfg.camera().with_resolution(args.size, args.size);
    let fps = measure_fps(&meshes, &cam, args.frames)?;
    println!(
        "cached renderer: {} surfaces, {}x{}, {} frames, 1 thread: {fps:.2} fps",
        meshes.len(),
        args.size,
        args.size,
        args.frames
    );
    let mut r = Report(Vec::new());
    r.push("surfaces", meshes.len() as f64);
    r.push("size", args.size as f64);
    r.push("frames", args.frames as f64);
    r.push("threads", 1.0);
    r.push("fps", fps);
    let p = ctx.path("bench.json");
    io::write_file(&p, r.to_json().as_bytes())?;
    ctx.finish("bench", &[p])
}
