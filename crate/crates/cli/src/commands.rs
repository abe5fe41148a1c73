use crate::args::*;
use crate::camera::load_cameras;
use crate::manifest::Manifest;
use anyhow::{bail, Context, Result};
use foamsim::engine::{RunConfig, RunStats, System};
use foamsim::forge::{
    generate_scene, load_scene, save_scene, AdjacencyOptions, ColorMode, Distribution, SceneGenSpec,
};
use foamsim::metrics::image_io::{clamp_counts, encode_pgm, read_ppm};
use foamsim::metrics::report::{render_report, HOP_CONVENTION};
use foamsim::metrics::{
    conservation_audit, export_images, hop_histogram, memory_report, psnr, ssim, ConservationAudit, ExportPaths,
    HopHistogram, MemoryReport,
};
use foamsim::partition::{
    build_kdtree, build_octree_cap, build_octree_fixed, extract_all_shards, partition_stats, read_shards,
    write_shards, FootprintWeights, PartitionAssignment,
};
use foamsim::render::{render_reference, MarchParams};
use foamsim::{Aabb, FrameOutput, Scene, Vec3};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

/// Bad flag values or combinations.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// At least one frame has missing pixels.
    Partial,
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn scene_from(path: &Path) -> Result<Scene> {
    load_scene(path).with_context(|| format!("loading scene {}", path.display()))
}

fn positions(scene: &Scene) -> Vec<Vec3> {
    scene.sites.iter().map(|s| s.position).collect()
}

/// `img.ppm` -> `img_0002.ppm` when a command writes several frames.
fn indexed(path: &Path, i: usize, n: usize) -> PathBuf {
    if n == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(e) => format!("{stem}_{i:04}.{}", e.to_string_lossy()),
        None => format!("{stem}_{i:04}"),
    };
    path.with_file_name(name)
}

pub fn gen_scene(a: &GenSceneArgs) -> Result<Outcome> {
    let b = &a.bbox;
    let spec = SceneGenSpec {
        site_count: a.sites,
        seed: a.seed,
        bbox: Aabb::new(Vec3::new(b[0], b[1], b[2]), Vec3::new(b[3], b[4], b[5])),
        density_range: [a.density[0], a.density[1]],
        color_mode: match a.color {
            ColorArg::Random => ColorMode::RandomUniform,
            ColorArg::PositionHash => ColorMode::PositionHash,
        },
        distribution: match a.distribution {
            DistributionArg::Uniform => Distribution::Uniform,
            DistributionArg::Clustered => Distribution::Clustered {
                clusters: a.clusters,
                spread: a.spread,
                background: a.background,
            },
        },
    };
    let options = AdjacencyOptions {
        knn_k: a.knn,
        exhaustive: a.exhaustive,
        ..Default::default()
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    let scene = generate_scene(&spec, &options)?;
    save_scene(&scene, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "{} sites, mean degree {:.2}, wrote {}",
        scene.len(),
        scene.adjacency.len() as f64 / scene.len() as f64,
        a.out.display()
    );
    #[derive(Serialize)]
    struct Config<'a> {
        spec: &'a SceneGenSpec,
        adjacency: &'a AdjacencyOptions,
    }
    let mut m = Manifest::new("gen-scene", Config {
        spec: &spec,
        adjacency: &options,
    })?;
    m.output(&a.out);
    m.write()?;
    Ok(Outcome::Complete)
}

pub fn partition(a: &PartitionArgs) -> Result<Outcome> {
    let scene = scene_from(&a.scene)?;
    let pos = positions(&scene);
    let assignment: PartitionAssignment = match a.method {
        MethodArg::Kdtree => build_kdtree(&pos, a.depth)?,
        MethodArg::OctreeCap => build_octree_cap(&pos, a.cap)?,
        MethodArg::OctreeFixed => build_octree_fixed(&pos, a.target)?,
    };
    let shards = if a.no_shards {
        if a.out.is_some() {
            return Err(usage("--out needs shard extraction; drop --no-shards"));
        }
        Vec::new()
    } else {
        extract_all_shards(&scene, &assignment)?
    };
    let stats = partition_stats(&assignment, &shards, &FootprintWeights::default());
    println!(
        "{} partitions (tile budget {}), max {} / mean {:.1} sites, imbalance {:.2}, max footprint {} B",
        stats.partition_count,
        stats.tile_budget,
        stats.max_local,
        stats.mean_local,
        stats.imbalance,
        stats.max_footprint_bytes
    );
    if stats.exceeds_tile_budget {
        println!(
            "WARNING: {} partitions exceed the {}-tile budget",
            stats.partition_count, stats.tile_budget
        );
    }
    let mut m = Manifest::new("partition", assignment.method)?;
    m.input(&a.scene);
    if let Some(p) = &a.stats {
        write(p, stats.to_csv())?;
        m.output(p);
    }
    if let Some(p) = &a.json {
        write(p, serde_json::to_string_pretty(&stats)? + "\n")?;
        m.output(p);
    }
    if let Some(p) = &a.out {
        let mut bytes = Vec::new();
        write_shards(&shards, &mut bytes)?;
        write(p, bytes)?;
        m.output(p);
    }
    m.write()?;
    Ok(Outcome::Complete)
}

/// Everything `render --stats` records for one frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsDocument {
    pub hop_convention: String,
    pub stats: RunStats,
    pub hops: HopHistogram,
    pub memory: MemoryReport,
    pub audit: ConservationAudit,
}

#[derive(Debug, Serialize)]
struct RenderManifestConfig {
    #[serde(flatten)]
    run: RunConfig,
    kdtree_depth: Option<u32>,
    shards: Option<PathBuf>,
    switch_at: Option<u64>,
}

pub fn resolve_run_config(a: &RenderArgs) -> Result<RunConfig> {
    let mut rc = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            // Flattened structs cannot deny unknown fields themselves.
            let known = serde_json::to_value(RunConfig::default())?;
            if let (Some(given), Some(known)) = (value.as_object(), known.as_object()) {
                if let Some(k) = given.keys().find(|k| !known.contains_key(*k)) {
                    return Err(usage(format!("{}: unknown config field {k:?}", p.display())));
                }
            }
            serde_json::from_value(value).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let (e, s) = (&mut rc.engine, &mut rc.schedule);
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v.into();
            }
        };
    }
    set!(a.layout, e.layout);
    set!(a.levels, e.levels);
    set!(a.buffer_bytes, e.buffer_bytes);
    if a.lane_capacity.is_some() {
        e.lane_capacity = a.lane_capacity;
    }
    set!(a.sram_budget, e.sram_budget);
    if a.cell_cap.is_some() {
        e.tracer_cell_cap = a.cell_cap;
    }
    set!(a.workers, e.workers);
    set!(a.rc, s.rc);
    set!(a.scan, s.scan);
    set!(a.batch, s.batch_size);
    set!(a.idle, s.idle_between_batches);
    set!(a.drain, s.final_drain);
    set!(a.policy, s.overflow_policy);
    set!(a.camera_policy, s.camera_policy);
    set!(a.completion, s.completion);
    e.validate().map_err(|err| usage(err.to_string()))?;
    s.validate().map_err(usage)?;
    Ok(rc)
}

fn save_pgm(path: &Option<PathBuf>, frame: &FrameOutput, values: &[u32], m: &mut Manifest) -> Result<()> {
    if let Some(p) = path {
        write(p, encode_pgm(frame.width, frame.height, &clamp_counts(values)))?;
        m.output(p);
    }
    Ok(())
}

pub fn render(a: &RenderArgs) -> Result<Outcome> {
    let rc = resolve_run_config(a)?;
    let scene = scene_from(&a.scene)?;
    let cams = load_cameras(&a.camera)?;
    let depth = match (&a.shards, a.depth) {
        (Some(_), Some(_)) => return Err(usage("--shards and --depth are exclusive")),
        (Some(_), None) => None,
        (None, d) => Some(d.unwrap_or(2 * rc.engine.levels)),
    };
    if a.switch_at.is_some() && cams.len() != 2 {
        return Err(usage("--switch-at needs a camera file with exactly two cameras"));
    }
    let mut sys = match &a.shards {
        Some(p) => {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            System::new(read_shards(&bytes)?, scene.bbox, rc.engine)?
        }
        None => System::from_scene(&scene, &build_kdtree(&positions(&scene), depth.unwrap_or(0))?, rc.engine)?,
    };
    let frames = match a.switch_at {
        Some(k) => {
            sys.start_frame(&cams[0], &rc.schedule)?;
            let mut done = false;
            for _ in 0..k {
                if sys.step()? {
                    done = true;
                    break;
                }
            }
            sys.set_camera(cams[1].clone(), rc.schedule.camera_policy)?;
            while !done {
                done = sys.step()?;
            }
            vec![sys.finish_frame()?]
        }
        None => cams
            .iter()
            .map(|c| sys.run_frame(c, &rc.schedule))
            .collect::<Result<Vec<_>, _>>()?,
    };

    let mut m = Manifest::new("render", RenderManifestConfig {
        run: rc,
        kdtree_depth: depth,
        shards: a.shards.clone(),
        switch_at: a.switch_at,
    })?;
    m.input(&a.scene);
    m.input(&a.camera);
    if let Some(p) = &a.config {
        m.input(p);
    }
    if let Some(p) = &a.shards {
        m.input(p);
    }
    let n = frames.len();
    let mut outcome = Outcome::Complete;
    for (i, (frame, stats)) in frames.iter().enumerate() {
        let at = |p: &Option<PathBuf>| p.as_ref().map(|p| indexed(p, i, n));
        let paths = ExportPaths {
            rgb: Some(indexed(&a.images.out, i, n)),
            depth: at(&a.images.depth_out),
            ..Default::default()
        };
        export_images(frame, &paths).context("writing images")?;
        for p in [&paths.rgb, &paths.depth].into_iter().flatten() {
            m.output(p);
        }
        save_pgm(&at(&a.hops_out), frame, &frame.router_hops, &mut m)?;
        save_pgm(&at(&a.tracer_hops_out), frame, &frame.tracer_hops, &mut m)?;
        if let Some(p) = at(&a.missing_out) {
            let mask: Vec<u32> = frame.missing.iter().map(|&x| if x { 255 } else { 0 }).collect();
            save_pgm(&Some(p), frame, &mask, &mut m)?;
        }
        let audit = conservation_audit(stats, Some(frame));
        if let Some(p) = at(&a.images.stats) {
            let doc = StatsDocument {
                hop_convention: HOP_CONVENTION.to_string(),
                stats: stats.clone(),
                hops: hop_histogram(frame),
                memory: memory_report(&sys.memory(frame.width, frame.height)),
                audit: audit.clone(),
            };
            write(&p, serde_json::to_string_pretty(&doc)? + "\n")?;
            m.output(&p);
        }
        let missing = frame.missing_count();
        eprintln!(
            "frame {i}: {}x{}, {} iterations, {} syncs, {} missing, {} dropped{}{}",
            frame.width,
            frame.height,
            stats.iterations_executed,
            stats.host_sync_count,
            missing,
            stats.rays_dropped,
            if stats.stalled { ", STALLED" } else { "" },
            if audit.pass { "" } else { ", CONSERVATION FAILED" }
        );
        if !audit.pass {
            bail!("conservation audit failed: {}", audit.failures.join("; "));
        }
        if missing > 0 || !stats.completed {
            outcome = Outcome::Partial;
        }
    }
    m.write()?;
    Ok(outcome)
}

pub fn render_ref(a: &RenderRefArgs) -> Result<Outcome> {
    let scene = scene_from(&a.scene)?;
    let cams = load_cameras(&a.camera)?;
    let mut params = MarchParams::for_scene(&scene);
    if let Some(t) = a.t_min {
        params.t_min = t;
    }
    if let Some(s) = a.max_steps {
        params.max_steps = s;
    }
    if !(0.0..1.0).contains(&params.t_min) || params.max_steps == 0 {
        return Err(usage("t-min must be in [0, 1) and max-steps positive"));
    }
    let mut m = Manifest::new("render-ref", params)?;
    m.input(&a.scene);
    m.input(&a.camera);
    let n = cams.len();
    for (i, cam) in cams.iter().enumerate() {
        let frame = render_reference(&scene, cam, &params)?;
        let at = |p: &Option<PathBuf>| p.as_ref().map(|p| indexed(p, i, n));
        let paths = ExportPaths {
            rgb: Some(indexed(&a.images.out, i, n)),
            depth: at(&a.images.depth_out),
            ..Default::default()
        };
        export_images(&frame, &paths).context("writing images")?;
        for p in [&paths.rgb, &paths.depth].into_iter().flatten() {
            m.output(p);
        }
        save_pgm(&at(&a.steps_out), &frame, &frame.cell_steps, &mut m)?;
        if let Some(p) = at(&a.images.stats) {
            #[derive(Serialize)]
            struct RefStats {
                width: u32,
                height: u32,
                cell_steps_total: u64,
                cell_steps_max: u32,
                pixels_with_depth: usize,
            }
            let s = RefStats {
                width: frame.width,
                height: frame.height,
                cell_steps_total: frame.cell_steps.iter().map(|&c| c as u64).sum(),
                cell_steps_max: frame.cell_steps.iter().copied().max().unwrap_or(0),
                pixels_with_depth: frame.depth.iter().filter(|&&d| d >= 0.0).count(),
            };
            write(&p, serde_json::to_string_pretty(&s)? + "\n")?;
            m.output(&p);
        }
    }
    m.write()?;
    Ok(Outcome::Complete)
}

#[derive(Debug, Serialize)]
struct Comparison {
    width: u32,
    height: u32,
    identical: bool,
    /// Decibels, or the string "inf" for identical images.
    psnr_db: serde_json::Value,
    ssim: f64,
}

pub fn compare(a: &CompareArgs) -> Result<Outcome> {
    let read = |p: &Path| read_ppm(p).with_context(|| format!("reading {}", p.display()));
    let (x, y) = (read(&a.a)?, read(&a.b)?);
    let p = psnr(&x, &y).map_err(|e| usage(e.to_string()))?;
    let s = ssim(&x, &y).map_err(|e| usage(e.to_string()))?;
    let c = Comparison {
        width: x.width,
        height: x.height,
        identical: x.data == y.data,
        psnr_db: if p.is_infinite() { "inf".into() } else { p.into() },
        ssim: s,
    };
    let json = serde_json::to_string_pretty(&c)? + "\n";
    if a.json {
        print!("{json}");
    } else if p.is_infinite() {
        println!("PSNR inf dB (identical), SSIM {s:.6}");
    } else {
        println!("PSNR {p:.3} dB, SSIM {s:.6}");
    }
    if let Some(out) = &a.out {
        write(out, &json)?;
        let mut m = Manifest::new("compare", serde_json::json!({}))?;
        m.input(&a.a);
        m.input(&a.b);
        m.output(out);
        m.write()?;
    }
    Ok(Outcome::Complete)
}

pub fn report(a: &ReportArgs) -> Result<Outcome> {
    let text = fs::read_to_string(&a.stats).with_context(|| format!("reading {}", a.stats.display()))?;
    let doc: StatsDocument = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", a.stats.display())))?;
    print!("{}", render_report(&doc.stats, &doc.hops, Some(&doc.memory)));
    if let Some(dir) = &a.csv_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let (h, mem) = (dir.join("hops.csv"), dir.join("memory.csv"));
        write(&h, doc.hops.to_csv())?;
        write(&mem, doc.memory.to_csv())?;
        let mut m = Manifest::new("report", serde_json::json!({}))?;
        m.input(&a.stats);
        m.output(&h);
        m.output(&mem);
        m.write()?;
    }
    let audit = conservation_audit(&doc.stats, None);
    if !audit.pass {
        bail!("conservation audit failed: {}", audit.failures.join("; "));
    }
    Ok(Outcome::Complete)
}
