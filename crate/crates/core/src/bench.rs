//! Seeded scene generation, disturbance schedules and batch experiments.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::grid::{for_each_obstacle_cell, GridGeometry, VoxelGrid};
use crate::navigator::{
    run_mission, Disturbance, DisturbanceEvent, DisturbanceSchedule, LogRow, NavSettings, Outcome, MAX_WIND,
};
use crate::scene::{Bounds, Obstacle, Scene};
use crate::Vec3;

/// Realized density must land within this of the target.
pub const DENSITY_TOLERANCE: f64 = 0.03;
const MAX_REJECTIONS: usize = 1000;
/// Radius kept free around start and goal.
const KEEP_OUT: f64 = 1.0;
/// Minimum free gap between pillar footprints.
pub const PILLAR_GAP: f64 = 1.2;
/// Range of pillar footprint side lengths before shrinking to fit.
const PILLAR_SIDE: (f64, f64) = (2.0, 3.5);
/// Pillars are shrunk until they fit or a side drops below this.
const PILLAR_MIN_SIDE: f64 = 0.8;
const BOX_SIDE: (f64, f64) = (0.4, 2.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SceneStyle {
    #[serde(rename = "irregular-3d")]
    Irregular3d,
    #[serde(rename = "pillars-2d")]
    Pillars2d,
}

impl FromStr for SceneStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "irregular-3d" => Ok(Self::Irregular3d),
            "pillars-2d" => Ok(Self::Pillars2d),
            other => Err(Error::InvalidArgument(format!(
                "unknown style {other:?} (expected irregular-3d or pillars-2d)"
            ))),
        }
    }
}

impl fmt::Display for SceneStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Irregular3d => "irregular-3d",
            Self::Pillars2d => "pillars-2d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub extent: [f64; 3],
    pub style: SceneStyle,
    pub target_density: f64,
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    /// Obstacles placed before any random primitive.
    #[serde(default)]
    pub forced: Vec<Obstacle>,
}

fn default_resolution() -> f64 {
    crate::grid::DEFAULT_RESOLUTION
}

impl SceneSpec {
    pub fn new(style: SceneStyle, target_density: f64, seed: u64) -> Self {
        Self {
            extent: [30.0, 10.0, 3.0],
            style,
            target_density,
            seed,
            resolution: default_resolution(),
            forced: Vec::new(),
        }
    }

    /// Mission start: 1 m in from the low-x face, mid-width, 1 m up.
    pub fn start(&self) -> Vec3 {
        Vec3::new(1.0, 0.5 * self.extent[1], self.extent[2].min(2.0) * 0.5)
    }

    pub fn goal(&self) -> Vec3 {
        Vec3::new(self.extent[0] - 1.0, 0.5 * self.extent[1], self.extent[2].min(2.0) * 0.5)
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            min: [0.0; 3],
            max: self.extent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedScene {
    pub scene: Scene,
    pub start: Vec3,
    pub goal: Vec3,
    /// Occupied fraction of the whole voxelized volume.
    pub density_full: f64,
    /// Occupied fraction of the slab between the first and last obstacle along x.
    pub density_band: f64,
}

struct Occupancy {
    grid: VoxelGrid,
    count: usize,
}

impl Occupancy {
    fn added_by(&self, o: &Obstacle) -> Vec<[usize; 3]> {
        let mut cells = Vec::new();
        for_each_obstacle_cell(&self.grid.geometry, o, |c| {
            if !self.grid.is_occupied(c) {
                cells.push(c);
            }
        });
        cells
    }

    fn commit(&mut self, cells: &[[usize; 3]]) {
        for &c in cells {
            self.grid.set(c, true);
        }
        self.count += cells.len();
    }

    fn density(&self) -> f64 {
        self.count as f64 / self.grid.geometry.len() as f64
    }
}

/// Places seeded random primitives until the voxel density is within
/// tolerance of the target.
pub fn generate_scene(spec: &SceneSpec) -> Result<GeneratedScene> {
    if !(0.0..=0.6).contains(&spec.target_density) {
        return Err(Error::InvalidArgument(format!(
            "target density {} outside [0, 0.6]",
            spec.target_density
        )));
    }
    let bounds = spec.bounds();
    let geometry = GridGeometry::from_bounds(bounds.min_v(), bounds.max_v(), spec.resolution)?;
    let mut occ = Occupancy {
        grid: VoxelGrid::new(geometry),
        count: 0,
    };
    let mut obstacles = Vec::new();
    for o in &spec.forced {
        let cells = occ.added_by(o);
        occ.commit(&cells);
        obstacles.push(*o);
    }

    let (start, goal) = (spec.start(), spec.goal());
    let target = spec.target_density;
    // Aim at the middle of the tolerance band so one large primitive cannot overshoot it.
    let upper = target + DENSITY_TOLERANCE / 3.0;
    let lower = target - DENSITY_TOLERANCE / 3.0;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rejections = 0;
    while occ.density() < lower {
        if rejections >= MAX_REJECTIONS {
            if (occ.density() - target).abs() <= DENSITY_TOLERANCE {
                break;
            }
            return Err(Error::Generation(format!(
                "density {:.3} short of target {target} after {MAX_REJECTIONS} rejections",
                occ.density()
            )));
        }
        let fits = |o: &Obstacle| {
            o.distance(&start) >= KEEP_OUT
                && o.distance(&goal) >= KEEP_OUT
                && (spec.style == SceneStyle::Irregular3d
                    || obstacles.iter().all(|other| footprint_gap(other, o) >= PILLAR_GAP))
        };
        let candidate = match spec.style {
            SceneStyle::Pillars2d => random_pillar(&mut rng, &spec.extent, fits),
            SceneStyle::Irregular3d => Some(random_box(&mut rng, &spec.extent)).filter(|b| fits(b)),
        };
        let Some(candidate) = candidate else {
            rejections += 1;
            continue;
        };
        let cells = occ.added_by(&candidate);
        if cells.is_empty()
            || (occ.count + cells.len()) as f64 / geometry.len() as f64 > upper
        {
            rejections += 1;
            continue;
        }
        occ.commit(&cells);
        obstacles.push(candidate);
        rejections = 0;
    }

    let density_full = occ.density();
    let density_band = band_density(&occ.grid, &obstacles);
    Ok(GeneratedScene {
        scene: Scene {
            bounds,
            resolution: spec.resolution,
            obstacles,
        },
        start,
        goal,
        density_full,
        density_band,
    })
}

/// A full-height pillar at a random center; shrunk about that center until
/// it fits, or `None` once its sides would drop below the minimum.
fn random_pillar(rng: &mut ChaCha8Rng, extent: &[f64; 3], fits: impl Fn(&Obstacle) -> bool) -> Option<Obstacle> {
    let cx = rng.gen_range(0.0..extent[0]);
    let cy = rng.gen_range(0.0..extent[1]);
    let mut sx = rng.gen_range(PILLAR_SIDE.0..PILLAR_SIDE.1).min(extent[0]);
    let mut sy = rng.gen_range(PILLAR_SIDE.0..PILLAR_SIDE.1).min(extent[1]);
    while sx.min(sy) >= PILLAR_MIN_SIDE {
        let x = (cx - 0.5 * sx).clamp(0.0, extent[0] - sx);
        let y = (cy - 0.5 * sy).clamp(0.0, extent[1] - sy);
        let pillar = Obstacle::Box {
            min: [x, y, 0.0],
            max: [x + sx, y + sy, extent[2]],
        };
        if fits(&pillar) {
            return Some(pillar);
        }
        sx *= 0.85;
        sy *= 0.85;
    }
    None
}

fn random_box(rng: &mut ChaCha8Rng, extent: &[f64; 3]) -> Obstacle {
    let mut min = [0.0; 3];
    let mut max = [0.0; 3];
    for a in 0..3 {
        let side = rng.gen_range(BOX_SIDE.0..BOX_SIDE.1).min(extent[a]);
        min[a] = rng.gen_range(0.0..=extent[a] - side);
        max[a] = min[a] + side;
    }
    Obstacle::Box { min, max }
}

/// Horizontal (x-y) gap between two obstacle footprints.
fn footprint_gap(a: &Obstacle, b: &Obstacle) -> f64 {
    let (alo, ahi) = a.aabb();
    let (blo, bhi) = b.aabb();
    let dx = (blo[0] - ahi[0]).max(alo[0] - bhi[0]).max(0.0);
    let dy = (blo[1] - ahi[1]).max(alo[1] - bhi[1]).max(0.0);
    dx.hypot(dy)
}

fn band_density(grid: &VoxelGrid, obstacles: &[Obstacle]) -> f64 {
    let g = &grid.geometry;
    if obstacles.is_empty() {
        return 0.0;
    }
    let lo = obstacles.iter().map(|o| o.aabb().0[0]).fold(f64::INFINITY, f64::min);
    let hi = obstacles.iter().map(|o| o.aabb().1[0]).fold(f64::NEG_INFINITY, f64::max);
    let in_band = |i: usize| {
        let x = g.origin.x + (i as f64 + 0.5) * g.resolution;
        x >= lo && x <= hi
    };
    let slab = g.dims[1] * g.dims[2];
    let columns = (0..g.dims[0]).filter(|&i| in_band(i)).count();
    if columns == 0 {
        return 0.0;
    }
    let occupied = grid.occupied_cells().filter(|c| in_band(c[0])).count();
    occupied as f64 / (columns * slab) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceProfile {
    None,
    Wind,
    Drag,
    /// Wind pulses plus two drag-to-stop events.
    Mixed,
}

impl FromStr for DisturbanceProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "wind" => Ok(Self::Wind),
            "drag" => Ok(Self::Drag),
            "mixed" => Ok(Self::Mixed),
            other => Err(Error::InvalidArgument(format!(
                "unknown disturbance {other:?} (expected none, wind, drag or mixed)"
            ))),
        }
    }
}

impl fmt::Display for DisturbanceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Wind => "wind",
            Self::Drag => "drag",
            Self::Mixed => "mixed",
        })
    }
}

/// Seeded disturbance schedule: wind pulses of up to 1.5 m/s² in random
/// horizontal directions and/or two lateral drag-to-stop events.
pub fn disturbance_schedule(profile: DisturbanceProfile, seed: u64) -> DisturbanceSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut events = Vec::new();
    if matches!(profile, DisturbanceProfile::Wind | DisturbanceProfile::Mixed) {
        for _ in 0..3 {
            let t_start = rng.gen_range(1.0..10.0);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let magnitude = rng.gen_range(0.5..=MAX_WIND);
            events.push(DisturbanceEvent {
                t_start,
                t_end: t_start + rng.gen_range(0.5..2.0),
                disturbance: Disturbance::Wind {
                    accel: [magnitude * angle.cos(), magnitude * angle.sin(), 0.0],
                },
            });
        }
    }
    if matches!(profile, DisturbanceProfile::Drag | DisturbanceProfile::Mixed) {
        for window in [(2.0, 5.0), (6.0, 10.0)] {
            let t_start = rng.gen_range(window.0..window.1);
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            events.push(DisturbanceEvent {
                t_start,
                t_end: t_start + 0.5,
                disturbance: Disturbance::Drag {
                    displacement: [rng.gen_range(-0.5..0.5), side * rng.gen_range(1.0..2.0), 0.0],
                },
            });
        }
    }
    events.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
    DisturbanceSchedule { events }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub density_full: f64,
    pub density_band: f64,
    pub success: bool,
    pub outcome: Option<Outcome>,
    pub collisions: usize,
    pub travel_time: f64,
    pub travel_distance: f64,
    pub replans: usize,
    pub replan_failures: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for fewer than two values).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub collisions: usize,
    /// Over successful trials.
    pub travel_time: MeanStd,
    /// Over successful trials.
    pub travel_distance: MeanStd,
    pub density_full: MeanStd,
    pub density_band: MeanStd,
}

impl Aggregates {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.success).collect();
        let pick = |f: fn(&TrialRecord) -> f64, rs: &[&TrialRecord]| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
        let all: Vec<&TrialRecord> = records.iter().collect();
        Self {
            trials: records.len(),
            successes: ok.len(),
            success_rate: if records.is_empty() { 0.0 } else { ok.len() as f64 / records.len() as f64 },
            collisions: records.iter().map(|r| r.collisions).sum(),
            travel_time: MeanStd::of(&pick(|r| r.travel_time, &ok)),
            travel_distance: MeanStd::of(&pick(|r| r.travel_distance, &ok)),
            density_full: MeanStd::of(&pick(|r| r.density_full, &all)),
            density_band: MeanStd::of(&pick(|r| r.density_band, &all)),
        }
    }
}

/// Deterministic part of a batch: identical inputs give identical JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub style: SceneStyle,
    pub target_density: f64,
    pub disturbance: DisturbanceProfile,
    pub first_seed: u64,
    pub records: Vec<TrialRecord>,
    pub aggregates: Aggregates,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StageMeans {
    pub esdf_ms: f64,
    pub astar_ms: f64,
    pub optimize_ms: f64,
    pub field_ms: f64,
}

/// Wall-clock planning time per replanning cycle, reported apart from the
/// deterministic metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchTiming {
    pub cycles: usize,
    pub planning_ms: MeanStd,
    pub stages: StageMeans,
    pub per_trial_mean_ms: Vec<(u64, f64)>,
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub report: BenchReport,
    pub timing: BenchTiming,
    pub logs: Vec<(u64, Vec<LogRow>)>,
}

impl BatchOutput {
    /// Writes `bench_report.json`, `bench_timing.json` and, when `logs` is
    /// set, one `trial_<seed>.csv` per mission.
    pub fn write_to(&self, dir: impl AsRef<Path>, logs: bool) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench_report.json"), serde_json::to_string_pretty(&self.report)?)?;
        std::fs::write(dir.join("bench_timing.json"), serde_json::to_string_pretty(&self.timing)?)?;
        if logs {
            for (seed, log) in &self.logs {
                let file = std::fs::File::create(dir.join(format!("trial_{seed}.csv")))?;
                crate::navigator::write_log_csv(log, std::io::BufWriter::new(file))?;
            }
        }
        Ok(())
    }
}

/// Runs `n_trials` missions on scenes seeded `spec.seed`, `spec.seed + 1`, …
/// Individual failures are recorded, never propagated.
pub fn run_batch(
    spec: &SceneSpec,
    n_trials: usize,
    profile: DisturbanceProfile,
    settings: &NavSettings,
    exec: Execution,
) -> Result<BatchOutput> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let results = map_indices(exec, n_trials, |i| {
        let seed = spec.seed + i as u64;
        run_trial(&SceneSpec { seed, ..spec.clone() }, profile, settings)
    });

    let mut records = Vec::with_capacity(n_trials);
    let mut logs = Vec::new();
    let mut cycles = Vec::new();
    let mut per_trial = Vec::new();
    let mut stages = StageMeans::default();
    for (record, mission) in results {
        if let Some((log, timing)) = mission {
            let totals: Vec<f64> = timing.iter().map(|c| c.total_ms).collect();
            per_trial.push((record.seed, MeanStd::of(&totals).mean));
            for c in &timing {
                stages.esdf_ms += c.esdf_ms;
                stages.astar_ms += c.astar_ms;
                stages.optimize_ms += c.optimize_ms;
                stages.field_ms += c.field_ms;
            }
            cycles.extend(totals);
            logs.push((record.seed, log));
        }
        records.push(record);
    }
    let n = cycles.len().max(1) as f64;
    stages.esdf_ms /= n;
    stages.astar_ms /= n;
    stages.optimize_ms /= n;
    stages.field_ms /= n;

    Ok(BatchOutput {
        report: BenchReport {
            style: spec.style,
            target_density: spec.target_density,
            disturbance: profile,
            first_seed: spec.seed,
            aggregates: Aggregates::from_records(&records),
            records,
        },
        timing: BenchTiming {
            cycles: cycles.len(),
            planning_ms: MeanStd::of(&cycles),
            stages,
            per_trial_mean_ms: per_trial,
        },
        logs,
    })
}

type TrialResult = (TrialRecord, Option<(Vec<LogRow>, Vec<crate::navigator::CycleTiming>)>);

fn run_trial(spec: &SceneSpec, profile: DisturbanceProfile, settings: &NavSettings) -> TrialResult {
    let failed = |error: Error, density: (f64, f64)| TrialRecord {
        seed: spec.seed,
        density_full: density.0,
        density_band: density.1,
        success: false,
        outcome: None,
        collisions: 0,
        travel_time: 0.0,
        travel_distance: 0.0,
        replans: 0,
        replan_failures: 0,
        error: Some(error.to_string()),
    };
    let generated = match generate_scene(spec) {
        Ok(g) => g,
        Err(e) => return (failed(e, (0.0, 0.0)), None),
    };
    let density = (generated.density_full, generated.density_band);
    let schedule = disturbance_schedule(profile, spec.seed);
    let mut nav = *settings;
    nav.config.resolution = spec.resolution;
    match run_mission(&generated.scene, generated.start, generated.goal, &schedule, spec.seed, &nav) {
        Ok(m) => {
            let r = &m.report;
            let record = TrialRecord {
                seed: spec.seed,
                density_full: density.0,
                density_band: density.1,
                success: r.success,
                outcome: Some(r.outcome),
                collisions: r.collisions,
                travel_time: r.travel_time,
                travel_distance: r.travel_distance,
                replans: r.replans,
                replan_failures: r.replan_failures,
                error: None,
            };
            (record, Some((m.log, m.timing)))
        }
        Err(e) => (failed(e, density), None),
    }
}
