use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use skelgrid::io::{load_grid, save_grid, save_grid_with_comments, VoxFormat};
use skelgrid::skeleton::{from_json, skeletonize_with, to_json, write_ply};
use skelgrid::synth::{
    bench_grid, centerline_skeleton, failed_csv, generate, inject_noise, loglog_slope, parse_centerline, rmse,
    write_centerline, Axis, BenchRow, NoiseSpec, Shape, ShapeSpec, CSV_HEADER,
};
use skelgrid::{
    distance_transform, CurveSkeleton, Error, LabelField, RejectPolicy, SkeletonOptions, SpuriousTestConfig,
    VoxelCoord, VoxelGrid,
};

#[derive(Parser, Debug)]
#[command(name = "skelgrid", version, about = "Curve skeletons of voxel models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic model and its centerline sidecar.
    Gen(GenArgs),
    /// Extract the curve skeleton of a model.
    Extract(ExtractArgs),
    /// Apply iterative surface noise to a model.
    Noise(NoiseArgs),
    /// Compare a skeleton against a reference.
    Eval(EvalArgs),
    /// Time extraction over a set of models.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeKind {
    Cylinder,
    Y,
    Torus,
    Sphere,
    Tree,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Ascii,
    Binary,
}

impl From<Format> for VoxFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Ascii => VoxFormat::Ascii,
            Format::Binary => VoxFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum LabelKind {
    Bfs1,
    Bfs2,
}

#[derive(Args, Debug, Clone)]
struct ShapeArgs {
    #[arg(long, value_enum)]
    shape: ShapeKind,
    /// Cylinder, sphere, or tree trunk radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Y-junction arm radii, `a,b,c`.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Cylinder, arm, or trunk length.
    #[arg(long)]
    length: Option<f64>,
    #[arg(long, default_value = "z")]
    axis: String,
    #[arg(long)]
    major: Option<f64>,
    #[arg(long)]
    minor: Option<f64>,
    /// Tree branching levels.
    #[arg(long)]
    depth: Option<u32>,
    /// Grid size `nx,ny,nz`; fitted to the model when omitted.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<u32>>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long, value_enum, default_value = "ascii")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Spurious-branch density threshold.
    #[arg(long, default_value_t = 1e-12)]
    t: f64,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// `stop-after-<k>` or `exhaustive`.
    #[arg(long, default_value = "stop-after-1")]
    policy: String,
    /// Start the skeleton here instead of at the deepest voxel, `x,y,z`.
    #[arg(long)]
    seed_voxel: Option<String>,
    /// Skeleton document to write.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ply: Option<PathBuf>,
    /// Write `x y z d` for every voxel.
    #[arg(long)]
    dump_distance: Option<PathBuf>,
    /// Write `x y z label` from the last proposal of each component.
    #[arg(long, value_enum, requires = "labels_out")]
    dump_labels: Option<LabelKind>,
    #[arg(long, requires = "dump_labels")]
    labels_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[arg(long, default_value_t = 1)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "ascii")]
    format: Format,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Skeleton document or centerline sidecar.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Skeleton document or centerline sidecar.
    #[arg(long)]
    test: PathBuf,
    /// Append `ref,test,rmse,ref_count,test_count` to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Model files; each may have a `.centerline` sidecar for the RMSE column.
    #[arg(long, num_args = 1.., conflicts_with = "lengths")]
    models: Vec<PathBuf>,
    /// Generator sweep: one model per length, other shape flags fixed.
    #[arg(long, value_delimiter = ',')]
    lengths: Vec<f64>,
    #[command(flatten)]
    sweep: Option<SweepShape>,
    #[arg(long, default_value_t = 1e-12)]
    t: f64,
    /// Write the report here instead of standard output.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SweepShape {
    #[arg(long, value_enum, default_value = "tree")]
    shape: ShapeKind,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    #[arg(long)]
    depth: Option<u32>,
}

/// Failure carrying its exit status.
struct Fail(u8, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(if e.is_internal() { 3 } else { 2 }, e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail(2, e.to_string())
    }
}

fn user(msg: impl Into<String>) -> Fail {
    Fail(2, msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.1);
        return ExitCode::from(e.0);
    }
    let res = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn configure_threads() -> Result<(), Fail> {
    let Ok(v) = std::env::var("SKELGRID_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| user(format!("SKELGRID_THREADS={v:?} is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Fail(3, e.to_string()))?;
    }
    Ok(())
}

fn need<T>(v: Option<T>, flag: &str, shape: &str) -> Result<T, Fail> {
    v.ok_or_else(|| user(format!("--{flag} is required for --shape {shape}")))
}

fn build_shape(a: &ShapeArgs) -> Result<ShapeSpec, Fail> {
    let shape = match a.shape {
        ShapeKind::Cylinder => Shape::Cylinder {
            radius: need(a.radius, "radius", "cylinder")?,
            length: need(a.length, "length", "cylinder")?,
            axis: Axis::from_str(&a.axis)?,
        },
        ShapeKind::Y => {
            let r = triple(need(a.radii.as_deref(), "radii", "y")?, "radii")?;
            Shape::YJunction { radii: r, length: need(a.length, "length", "y")? }
        }
        ShapeKind::Torus => Shape::Torus {
            major: need(a.major, "major", "torus")?,
            minor: need(a.minor, "minor", "torus")?,
        },
        ShapeKind::Sphere => Shape::Sphere { radius: need(a.radius, "radius", "sphere")? },
        ShapeKind::Tree => Shape::Tree {
            radius: need(a.radius, "radius", "tree")?,
            length: need(a.length, "length", "tree")?,
            depth: need(a.depth, "depth", "tree")?,
        },
    };
    let dims = a.dims.as_deref().map(|d| triple(d, "dims")).transpose()?;
    Ok(ShapeSpec { shape, dims })
}

fn triple<T: Copy>(v: &[T], flag: &str) -> Result<[T; 3], Fail> {
    <[T; 3]>::try_from(v).map_err(|_| user(format!("--{flag} takes exactly three comma-separated values")))
}

fn cmd_gen(a: GenArgs) -> Result<u8, Fail> {
    let spec = build_shape(&a.shape)?;
    let model = generate(&spec)?;
    save_grid(&model.grid, &a.out, a.format.into())?;
    let sidecar = a.out.with_extension("centerline");
    let mut w = BufWriter::new(fs::File::create(&sidecar)?);
    write_centerline(&model.centerline_voxels(), &mut w)?;
    w.flush()?;
    println!("n={} dims={:?} out={} centerline={}", model.grid.len(), model.grid.dims(), a.out.display(), sidecar.display());
    Ok(0)
}

fn parse_voxel(s: &str) -> Result<VoxelCoord, Fail> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let v: Option<Vec<u32>> = parts.iter().map(|p| p.parse().ok()).collect();
    match v.as_deref() {
        Some(&[x, y, z]) => Ok(VoxelCoord::new(x, y, z)),
        _ => Err(user(format!("--seed-voxel {s:?} is not `x,y,z`"))),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Fail> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| user(format!("{}: {e}", path.display())))
}

fn cmd_extract(a: ExtractArgs) -> Result<u8, Fail> {
    let grid = load_grid(&a.input, None)?;
    let opts = SkeletonOptions {
        config: SpuriousTestConfig { t: a.t, epsilon: a.epsilon, ..Default::default() },
        policy: RejectPolicy::from_str(&a.policy)?,
        seed: a.seed_voxel.as_deref().map(parse_voxel).transpose()?,
    };

    // last label field seen in each component, keyed by the component grid
    let mut dumps: Vec<(VoxelGrid, LabelField)> = Vec::new();
    let want = a.dump_labels;
    let start = Instant::now();
    let (skel, stats) = skeletonize_with(&grid, &opts, &mut |e| {
        let Some(kind) = want else { return };
        let labels = if kind == LabelKind::Bfs1 { e.bfs1 } else { e.bfs2 };
        match dumps.last_mut() {
            Some((g, l)) if g.coords().first() == e.grid.coords().first() => *l = labels.clone(),
            _ => dumps.push((e.grid.clone(), labels.clone())),
        }
    })?;
    let time_ms = start.elapsed().as_secs_f64() * 1e3;

    if let Some(path) = &a.out {
        let mut w = create(path)?;
        w.write_all(to_json(&skel).as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    if let Some(path) = &a.ply {
        let mut w = create(path)?;
        write_ply(&skel, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &a.dump_distance {
        let mut w = create(path)?;
        for comp in grid.connected_components() {
            distance_transform(&comp, &comp.surface_mask()).dump(&comp, &mut w)?;
        }
        w.flush()?;
    }
    if let Some(path) = &a.labels_out {
        let mut w = create(path)?;
        for (g, l) in &dumps {
            l.dump(g, &mut w)?;
        }
        w.flush()?;
    }
    println!(
        "n={} dmax={:.3} proposals={} accepted={} loops={} time_ms={:.3}",
        grid.len(),
        (stats.d2_max as f64).sqrt(),
        stats.proposals,
        stats.accepted,
        stats.loops,
        time_ms
    );
    Ok(0)
}

fn cmd_noise(a: NoiseArgs) -> Result<u8, Fail> {
    let grid = load_grid(&a.input, None)?;
    let spec = NoiseSpec { p: a.p, iterations: a.iters, rng_seed: a.seed };
    let noisy = inject_noise(&grid, &spec)?;
    let comment = format!("noise p={} iters={} seed={}", a.p, a.iters, a.seed);
    save_grid_with_comments(&noisy, &a.out, a.format.into(), &[comment])?;
    println!("n_in={} n_out={}", grid.len(), noisy.len());
    Ok(0)
}

fn load_skeleton(path: &Path) -> Result<CurveSkeleton, Fail> {
    let text = fs::read_to_string(path).map_err(|e| user(format!("{}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        return Ok(from_json(&text)?);
    }
    let voxels = parse_centerline(&text).map_err(Error::from)?;
    let mut dims = [1u32; 3];
    for (c, _) in &voxels {
        for (d, v) in dims.iter_mut().zip(c.to_array()) {
            *d = (*d).max(v.saturating_add(1));
        }
    }
    Ok(centerline_skeleton(&voxels, dims))
}

fn cmd_eval(a: EvalArgs) -> Result<u8, Fail> {
    let reference = load_skeleton(&a.reference)?;
    let test = load_skeleton(&a.test)?;
    let (ru, tu) = (reference.union(), test.union());
    let r = rmse(&ru, &tu)?;
    println!("rmse={r:.4} ref_count={} test_count={}", ru.len(), tu.len());
    if let Some(path) = &a.csv {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
        writeln!(f, "{},{},{r:.4},{},{}", a.reference.display(), a.test.display(), ru.len(), tu.len())?;
    }
    Ok(0)
}

fn sweep_spec(s: &SweepShape, length: f64) -> Result<ShapeSpec, Fail> {
    build_shape(&ShapeArgs {
        shape: s.shape,
        radius: s.radius,
        radii: s.radii.clone(),
        length: Some(length),
        axis: "z".into(),
        major: None,
        minor: None,
        depth: s.depth,
        dims: None,
    })
}

fn bench_file(path: &Path, opts: &SkeletonOptions) -> Result<BenchRow, Fail> {
    let grid = load_grid(path, None)?;
    let sidecar = path.with_extension("centerline");
    let reference: Option<Vec<VoxelCoord>> = match fs::read_to_string(&sidecar) {
        Ok(text) => Some(parse_centerline(&text).map_err(Error::from)?.into_iter().map(|v| v.0).collect()),
        Err(_) => None,
    };
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(bench_grid(&name, &grid, reference.as_deref(), opts)?.0)
}

fn bench_spec(spec: &ShapeSpec, opts: &SkeletonOptions) -> Result<BenchRow, Fail> {
    let model = generate(spec)?;
    let reference: Vec<VoxelCoord> = model.centerline_voxels().into_iter().map(|v| v.0).collect();
    let name = spec.shape.to_string().replace(' ', "_");
    Ok(bench_grid(&name, &model.grid, Some(&reference), opts)?.0)
}

fn cmd_bench(a: BenchArgs) -> Result<u8, Fail> {
    let opts = SkeletonOptions {
        config: SpuriousTestConfig { t: a.t, ..Default::default() },
        ..Default::default()
    };
    let mut jobs: Vec<(String, Box<dyn Fn() -> Result<BenchRow, Fail>>)> = Vec::new();
    for p in &a.models {
        let (p, o) = (p.clone(), opts.clone());
        jobs.push((p.display().to_string(), Box::new(move || bench_file(&p, &o))));
    }
    if !a.lengths.is_empty() {
        let sweep = a.sweep.clone().ok_or_else(|| user("--lengths needs shape flags"))?;
        for &len in &a.lengths {
            let spec = sweep_spec(&sweep, len)?;
            let o = opts.clone();
            jobs.push((spec.shape.to_string().replace(' ', "_"), Box::new(move || bench_spec(&spec, &o))));
        }
    }
    if jobs.is_empty() {
        return Err(user("nothing to benchmark: give --models or --lengths"));
    }

    let mut out: Box<dyn Write> = match &a.csv {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(out, "{CSV_HEADER}")?;
    let mut failed = false;
    let (mut ns, mut ts) = (Vec::new(), Vec::new());
    // sequential so each row's wall time is not shared with its neighbors
    for (name, job) in &jobs {
        match job() {
            Ok(row) => {
                ns.push(row.n as f64);
                ts.push(row.time_ms);
                writeln!(out, "{}", row.csv())?;
            }
            Err(Fail(_, msg)) => {
                log::error!("{name}: {msg}");
                failed = true;
                writeln!(out, "{}", failed_csv(name))?;
            }
        }
    }
    match loglog_slope(&ns, &ts) {
        Ok(s) => writeln!(out, "# loglog_exponent={s:.3}")?,
        Err(_) => writeln!(out, "# loglog_exponent=")?,
    }
    out.flush()?;
    Ok(if failed { 1 } else { 0 })
}
