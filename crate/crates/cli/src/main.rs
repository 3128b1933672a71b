use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gvf_nav::bench::{
    disturbance_schedule, generate_scene, run_batch, DisturbanceProfile, SceneSpec, SceneStyle,
};
use gvf_nav::bspline::PathPoints;
use gvf_nav::config::Config;
use gvf_nav::gvf::GuidingField;
use gvf_nav::navigator::{run_mission, DisturbanceSchedule, NavSettings};
use gvf_nav::scene::Scene;
use gvf_nav::{Execution, Vec3};

#[derive(Parser)]
#[command(name = "gvfnav", version, about = "Guiding-vector-field navigation toolkit")]
struct Cli {
    /// JSON parameter file (keys K1, K2, T_p, lambda_s, lambda_c, d_thr, r,
    /// resolution, cruise_speed); missing keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scene utilities.
    Scene {
        #[command(subcommand)]
        command: SceneCommand,
    },
    /// Fly one closed-loop mission and write its log and report.
    Run(RunArgs),
    /// Run a seeded batch of missions on generated scenes.
    Bench(BenchArgs),
    /// Guiding-field utilities.
    Field {
        #[command(subcommand)]
        command: FieldCommand,
    },
}

#[derive(Subcommand)]
enum SceneCommand {
    /// Generate a random scene at a target obstacle density.
    Gen(GenArgs),
}

#[derive(Subcommand)]
enum FieldCommand {
    /// Sample the guiding field of a trajectory on a horizontal slice.
    Slice(SliceArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "pillars-2d")]
    style: SceneStyle,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    /// Scene size in meters as X,Y,Z.
    #[arg(long, value_parser = parse_vec3, default_value = "30,10,3")]
    extent: Vec3,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_parser = parse_vec3)]
    start: Vec3,
    #[arg(long, value_parser = parse_vec3)]
    goal: Vec3,
    /// Disturbance schedule JSON; omitted means undisturbed.
    #[arg(long, conflicts_with = "disturbance")]
    schedule: Option<PathBuf>,
    /// Generate a seeded schedule instead of reading one.
    #[arg(long)]
    disturbance: Option<DisturbanceProfile>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "pillars-2d")]
    style: SceneStyle,
    #[arg(long, default_value_t = 0.3)]
    density: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value = "none")]
    disturbance: DisturbanceProfile,
    #[arg(long, value_parser = parse_vec3, default_value = "30,10,3")]
    extent: Vec3,
    /// Seed of the first trial; trial i uses seed + i.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also write one trajectory CSV per trial.
    #[arg(long)]
    logs: bool,
    /// Run trials one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SliceArgs {
    /// Scene whose x-y bounds set the slice extent.
    #[arg(long)]
    scene: PathBuf,
    /// CSV with x, y, z columns (a mission log works).
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    z: f64,
    #[arg(long, default_value_t = 0.25)]
    spacing: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_vec3(s: &str) -> std::result::Result<Vec3, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("{s:?}: {e}"))?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(format!("expected X,Y,Z, got {s:?}")),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => Config::load(path).with_context(|| format!("reading config {}", path.display()))?,
        None => Config::default(),
    };
    match cli.command {
        Command::Scene {
            command: SceneCommand::Gen(args),
        } => scene_gen(&args, &config),
        Command::Run(args) => run(&args, &config),
        Command::Bench(args) => bench(&args, &config),
        Command::Field {
            command: FieldCommand::Slice(args),
        } => field_slice(&args, &config),
    }
}

fn scene_gen(args: &GenArgs, config: &Config) -> Result<()> {
    let spec = SceneSpec {
        extent: args.extent.into(),
        resolution: config.resolution,
        ..SceneSpec::new(args.style, args.density, args.seed)
    };
    let generated = generate_scene(&spec)?;
    generated.scene.save(&args.out)?;
    let summary = serde_json::json!({
        "obstacles": generated.scene.obstacles.len(),
        "density_full": generated.density_full,
        "density_band": generated.density_band,
        "start": [generated.start.x, generated.start.y, generated.start.z],
        "goal": [generated.goal.x, generated.goal.y, generated.goal.z],
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run(args: &RunArgs, config: &Config) -> Result<()> {
    let scene = Scene::load(&args.scene).with_context(|| format!("reading scene {}", args.scene.display()))?;
    let schedule = match (&args.schedule, args.disturbance) {
        (Some(path), _) => DisturbanceSchedule::load(path)?,
        (None, Some(profile)) => disturbance_schedule(profile, args.seed),
        (None, None) => DisturbanceSchedule::none(),
    };
    let settings = NavSettings {
        config: *config,
        ..NavSettings::default()
    };
    let mission = run_mission(&scene, args.start, args.goal, &schedule, args.seed, &settings)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let dir = &args.out_dir;
    mission.write_log_csv(BufWriter::new(File::create(dir.join(format!("trial_{}.csv", args.seed)))?))?;
    write_json(&dir.join("report.json"), &mission.report)?;
    write_json(&dir.join("timing.json"), &mission.timing)?;
    println!("{}", serde_json::to_string_pretty(&mission.report)?);
    println!("mean cycle time: {:.2} ms over {} replans", mission.mean_cycle_ms(), mission.timing.len());
    Ok(())
}

fn bench(args: &BenchArgs, config: &Config) -> Result<()> {
    let spec = SceneSpec {
        extent: args.extent.into(),
        resolution: config.resolution,
        ..SceneSpec::new(args.style, args.density, args.seed)
    };
    let settings = NavSettings {
        config: *config,
        ..NavSettings::default()
    };
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let output = run_batch(&spec, args.trials, args.disturbance, &settings, exec)?;
    output.write_to(&args.out, args.logs)?;
    let a = &output.report.aggregates;
    println!(
        "success {}/{}  collisions {}  travel time {:.2} ± {:.2} s  distance {:.2} ± {:.2} m",
        a.successes, a.trials, a.collisions, a.travel_time.mean, a.travel_time.std, a.travel_distance.mean,
        a.travel_distance.std
    );
    println!(
        "density full {:.3}  band {:.3}  planning {:.2} ± {:.2} ms/cycle",
        a.density_full.mean, a.density_band.mean, output.timing.planning_ms.mean, output.timing.planning_ms.std
    );
    Ok(())
}

fn field_slice(args: &SliceArgs, config: &Config) -> Result<()> {
    let scene = Scene::load(&args.scene).with_context(|| format!("reading scene {}", args.scene.display()))?;
    let points = read_trajectory(&args.traj)?;
    let path = PathPoints::new(points, 0.0);
    if path.len() < 2 {
        bail!("trajectory needs at least two distinct points");
    }
    let field = GuidingField::build(path, config.resolution, config.gvf(), &[])?;
    let b = scene.bounds;
    let rows = field.write_slice_csv(
        [b.min[0], b.min[1]],
        [b.max[0], b.max[1]],
        args.z,
        args.spacing,
        BufWriter::new(File::create(&args.out)?),
    )?;
    println!("wrote {rows} rows to {}", args.out.display());
    Ok(())
}

fn read_trajectory(path: &Path) -> Result<Vec<Vec3>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{} has no {name:?} column", path.display()))
    };
    let cols = [column("x")?, column("y")?, column("z")?];
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let mut v = [0.0; 3];
        for (a, &c) in cols.iter().enumerate() {
            let field = record.get(c).unwrap_or("");
            v[a] = field
                .trim()
                .parse()
                .with_context(|| format!("row {}: bad number {field:?}", i + 1))?;
        }
        points.push(Vec3::from(v));
    }
    Ok(points)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
