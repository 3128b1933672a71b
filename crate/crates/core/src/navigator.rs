//! Closed-loop receding-horizon navigation on a deterministic simulated clock.
//!
//! Every 10 ms tick the point-mass vehicle follows the latest guiding field;
//! every 5 ticks the idealized range sensor reveals obstacles within its
//! radius, and every `T_p` the reference is rebuilt: local obstacle distance
//! field → grid path → B-spline fit → optimization → sampling → trajectory
//! field. Commands depend only on the current position and the latest field.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bspline::{fit_through, polyline_length, sample_uniform, PathPoints};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::global_path::{self, PathQuery, Traversability};
use crate::grid::{euclidean_distance_transform, rasterize_scene, DistanceField, VoxelGrid};
use crate::gvf::GuidingField;
use crate::scene::Scene;
use crate::traj_opt::{optimize, OptProblem, OptSettings};
use crate::Vec3;

/// Command period in seconds.
pub const STEP_DT: f64 = 0.01;
/// Largest wind acceleration a schedule may contain, m/s².
pub const MAX_WIND: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Disturbance {
    /// Constant added acceleration.
    Wind { accel: [f64; 3] },
    /// Vehicle is carried by `displacement` over the event window with zero velocity.
    Drag { displacement: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceEvent {
    pub t_start: f64,
    pub t_end: f64,
    #[serde(flatten)]
    pub disturbance: Disturbance,
}

impl DisturbanceEvent {
    pub fn active(&self, t: f64) -> bool {
        self.t_start <= t && t < self.t_end
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSchedule {
    pub events: Vec<DisturbanceEvent>,
}

impl DisturbanceSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.events.iter().enumerate() {
            if !(e.t_end > e.t_start && e.t_start >= 0.0) {
                return Err(Error::InvalidArgument(format!("event {i} has an empty or negative window")));
            }
            if let Disturbance::Wind { accel } = e.disturbance {
                let m = Vec3::from(accel).norm();
                if m > MAX_WIND + 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "event {i} wind {m:.3} m/s² exceeds {MAX_WIND} m/s²"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let s: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Net wind acceleration at `t`; overlapping pulses add up to the cap.
    pub fn wind(&self, t: f64) -> Vec3 {
        let total: Vec3 = self
            .events
            .iter()
            .filter(|e| e.active(t))
            .filter_map(|e| match e.disturbance {
                Disturbance::Wind { accel } => Some(Vec3::from(accel)),
                Disturbance::Drag { .. } => None,
            })
            .sum();
        let norm = total.norm();
        if norm > MAX_WIND {
            total * (MAX_WIND / norm)
        } else {
            total
        }
    }

    fn drag(&self, t: f64) -> Option<(usize, &DisturbanceEvent)> {
        self.events
            .iter()
            .enumerate()
            .find(|(_, e)| e.active(t) && matches!(e.disturbance, Disturbance::Drag { .. }))
    }

    fn any_active(&self, t: f64) -> bool {
        self.events.iter().any(|e| e.active(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavSettings {
    pub config: Config,
    pub v_max: f64,
    pub a_max: f64,
    pub sensor_radius: f64,
    pub horizon: f64,
    pub inflation: f64,
    /// Grid-path preference for clearance (see [`PathQuery`]).
    pub clearance_weight: f64,
    pub clearance_soft: f64,
    pub goal_tolerance: f64,
    pub timeout: f64,
    /// Vehicle radius for collision checks against the true scene.
    pub body_radius: f64,
    /// Window margin around the robot, replan start and local goal.
    pub window_margin: f64,
    /// Consecutive replanning failure longer than this fails the mission, s.
    pub failure_limit: f64,
    /// The previous reference's committed stretch is reused only while the
    /// robot is closer than this to it.
    pub rejoin_distance: f64,
    /// Up to this distance from the previous reference the robot is routed
    /// back onto it; further away the reference is abandoned.
    pub return_distance: f64,
    /// Length of previous reference kept ahead of the replan start, meters.
    pub commit_distance: f64,
    /// Clearance a drag must leave between the vehicle and any obstacle.
    pub drag_clearance: f64,
    pub opt: OptSettings,
}

impl Default for NavSettings {
    fn default() -> Self {
        Self {
            config: Config::default(),
            v_max: 2.5,
            a_max: 3.0,
            sensor_radius: 5.0,
            horizon: global_path::DEFAULT_HORIZON,
            inflation: global_path::DEFAULT_INFLATION,
            clearance_weight: 5.0,
            clearance_soft: 0.6,
            goal_tolerance: 0.3,
            timeout: 120.0,
            body_radius: 0.1,
            window_margin: global_path::WINDOW_MARGIN,
            failure_limit: 3.0,
            rejoin_distance: 0.6,
            return_distance: 2.5,
            commit_distance: 2.5,
            drag_clearance: 0.3,
            opt: OptSettings::default(),
        }
    }
}

impl NavSettings {
    fn ticks(&self, period: f64) -> u64 {
        ((period / STEP_DT).round() as u64).max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub online_grid: VoxelGrid,
    pub goal: Vec3,
    pub tick: u64,
}

impl NavState {
    pub fn clock(&self) -> f64 {
        self.tick as f64 * STEP_DT
    }
}

/// Wall-clock milliseconds per pipeline stage for one replanning cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct CycleTiming {
    pub t: f64,
    pub esdf_ms: f64,
    pub astar_ms: f64,
    pub optimize_ms: f64,
    pub field_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Collision,
    Timeout,
    PlannerFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    pub d_to_path: f64,
    pub event_active: bool,
}

/// Deterministic mission summary; wall-clock timing lives in [`Mission::timing`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionReport {
    pub seed: u64,
    pub success: bool,
    pub outcome: Outcome,
    pub travel_time: f64,
    pub travel_distance: f64,
    pub collisions: usize,
    pub replans: usize,
    pub replan_failures: usize,
    /// Cycles whose optimized spline was rejected in favor of the grid path.
    pub fallbacks: usize,
    pub min_clearance: f64,
    pub final_position: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Mission {
    pub report: MissionReport,
    pub log: Vec<LogRow>,
    pub timing: Vec<CycleTiming>,
}

impl Mission {
    pub fn write_log_csv(&self, w: impl Write) -> Result<()> {
        write_log_csv(&self.log, w)
    }

    pub fn mean_cycle_ms(&self) -> f64 {
        if self.timing.is_empty() {
            return 0.0;
        }
        self.timing.iter().map(|c| c.total_ms).sum::<f64>() / self.timing.len() as f64
    }
}

pub fn write_log_csv(log: &[LogRow], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,x,y,z,vx,vy,vz,d_to_path,event_active")?;
    for r in log {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.t,
            r.position.x,
            r.position.y,
            r.position.z,
            r.velocity.x,
            r.velocity.y,
            r.velocity.z,
            r.d_to_path,
            u8::from(r.event_active)
        )?;
    }
    Ok(())
}

/// Speed that lets a point mass with lateral and braking budget `accel`
/// take every bend of `points` ahead of index `from`: the cruise speed capped
/// by `sqrt(accel / curvature)`, plus the speed bled off before reaching it.
pub fn curve_speed(points: &[Vec3], from: usize, cruise: f64, accel: f64) -> f64 {
    const SPAN: f64 = 0.2;
    let lookahead = cruise * cruise / (2.0 * accel) + SPAN;
    let mut limit = cruise;
    let mut ahead = 0.0;
    let mut i = from;
    while i + 1 < points.len() && ahead < lookahead {
        // Chord-based turning angle over roughly SPAN on either side of i.
        let back = (0..=i).rev().find(|&j| (points[i] - points[j]).norm() >= SPAN);
        let fwd = (i..points.len()).find(|&j| (points[j] - points[i]).norm() >= SPAN);
        if let (Some(b), Some(f)) = (back, fwd) {
            let u = points[i] - points[b];
            let w = points[f] - points[i];
            let kappa = u.angle(&w) / (0.5 * (u.norm() + w.norm()));
            if kappa > 1e-6 {
                let v2 = accel / kappa;
                limit = limit.min((v2 + 2.0 * accel * ahead).sqrt());
            }
        }
        let prev = i;
        i = (i + 1..points.len())
            .find(|&j| (points[j] - points[prev]).norm() >= 0.5 * SPAN)
            .unwrap_or(points.len() - 1);
        ahead += (points[i] - points[prev]).norm();
    }
    limit
}

/// Exact distance from `p` to a polyline.
pub fn distance_to_polyline(points: &[Vec3], p: &Vec3) -> f64 {
    match points {
        [] => f64::INFINITY,
        [only] => (only - p).norm(),
        _ => points
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let len2 = d.norm_squared();
                let t = if len2 > 0.0 { ((p - w[0]).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (w[0] + d * t - p).norm()
            })
            .fold(f64::INFINITY, f64::min),
    }
}

struct ActiveDrag {
    event: usize,
    from: Vec3,
    displacement: Vec3,
}

/// Stepwise simulator; [`run_mission`] drives it to completion.
pub struct Navigator<'s> {
    scene: &'s Scene,
    truth: VoxelGrid,
    schedule: DisturbanceSchedule,
    settings: NavSettings,
    pub state: NavState,
    field: Option<GuidingField>,
    failing_since: Option<f64>,
    drag: Option<ActiveDrag>,
    collided: bool,
    replans: usize,
    replan_failures: usize,
    fallbacks: usize,
    timing: Vec<CycleTiming>,
}

impl<'s> Navigator<'s> {
    pub fn new(
        scene: &'s Scene,
        start: Vec3,
        goal: Vec3,
        schedule: DisturbanceSchedule,
        settings: NavSettings,
    ) -> Result<Self> {
        schedule.validate()?;
        let truth = if scene.obstacles.is_empty() {
            VoxelGrid::new(crate::grid::GridGeometry::from_bounds(
                scene.bounds.min_v(),
                scene.bounds.max_v(),
                settings.config.resolution,
            )?)
        } else {
            rasterize_scene(&scene.obstacles, &scene.bounds, settings.config.resolution)?
        };
        for (name, p) in [("start", &start), ("goal", &goal)] {
            if !scene.bounds.contains(p) {
                return Err(Error::OutOfBounds(format!("{name} lies outside the scene")));
            }
        }
        if scene.clearance(&start) < settings.body_radius {
            return Err(Error::InvalidArgument("start is in collision".into()));
        }
        let online_grid = VoxelGrid::new(truth.geometry);
        Ok(Self {
            scene,
            truth,
            schedule,
            settings,
            state: NavState {
                position: start,
                velocity: Vec3::zeros(),
                online_grid,
                goal,
                tick: 0,
            },
            field: None,
            failing_since: None,
            drag: None,
            collided: false,
            replans: 0,
            replan_failures: 0,
            fallbacks: 0,
            timing: Vec::new(),
        })
    }

    pub fn field(&self) -> Option<&GuidingField> {
        self.field.as_ref()
    }

    pub fn truth(&self) -> &VoxelGrid {
        &self.truth
    }

    /// Reveals every true occupied cell whose center is within the sensor radius.
    pub fn perceive(&mut self) {
        let geom = self.truth.geometry;
        let p = self.state.position;
        let r = self.settings.sensor_radius;
        let reach = (r / geom.resolution).ceil() as i64 + 1;
        let c = geom.cell_of_unchecked(&p);
        let range = |a: usize| {
            let lo = (c[a] - reach).max(0);
            let hi = (c[a] + reach).min(geom.dims[a] as i64 - 1);
            lo..=hi
        };
        for i in range(0) {
            for j in range(1) {
                for k in range(2) {
                    let cell = [i as usize, j as usize, k as usize];
                    if self.truth.is_occupied(cell)
                        && !self.state.online_grid.is_occupied(cell)
                        && (geom.cell_center(cell) - p).norm() <= r
                    {
                        self.state.online_grid.set(cell, true);
                    }
                }
            }
        }
    }

    /// Rebuilds the guiding field; on failure the previous field is kept.
    pub fn replan(&mut self) -> Result<CycleTiming> {
        let t = self.state.clock();
        match self.build_field() {
            Ok((field, mut timing)) => {
                timing.t = t;
                self.field = Some(field);
                self.replans += 1;
                self.failing_since = None;
                self.timing.push(timing);
                Ok(timing)
            }
            Err(e) => {
                log::debug!("replan at t = {t:.2} s failed: {e}");
                self.replan_failures += 1;
                self.failing_since.get_or_insert(t);
                Err(e)
            }
        }
    }

    fn build_field(&mut self) -> Result<(GuidingField, CycleTiming)> {
        let s = &self.settings;
        let cfg = &s.config;
        let clock = Instant::now();
        let robot = self.state.position;
        let goal = self.state.goal;
        let reference = self.field.as_ref().map(|f| f.path.points.as_slice());

        // Where the previous reference is picked up again: at the robot's
        // projection when close, otherwise further along, reached through a
        // planned lead-in rather than by converging across unchecked space.
        let rejoin = reference.and_then(|r| {
            let d = distance_to_polyline(r, &robot);
            let arc = global_path::closest_arc_length(r, &robot).1;
            if d <= s.rejoin_distance {
                Some((r, arc, false))
            } else if d <= s.return_distance {
                Some((r, arc + s.commit_distance.max(1.5 * d), true))
            } else {
                None
            }
        });
        let lead_in = rejoin.is_some_and(|(_, _, lead)| lead);
        let start = match rejoin {
            Some((r, arc, _)) => crate::bspline::point_at_arc_length(r, arc),
            None => robot,
        };
        let target = global_path::horizon_point(&goal, &start, s.horizon, reference);

        // Local obstacle distance field.
        let margin = Vec3::repeat(s.window_margin);
        let lo = robot.inf(&start).inf(&target) - margin;
        let hi = robot.sup(&start).sup(&target) + margin;
        let grid = &self.state.online_grid;
        let (window, offset) = grid.geometry.aligned_window(&lo, &hi)?;
        let local = grid.extract(&window, offset);
        let esdf = match euclidean_distance_transform(&local) {
            Ok(f) => Some(f),
            Err(Error::AllFree) => None,
            Err(e) => return Err(e),
        };
        let trav = match &esdf {
            Some(f) => Traversability::from_field(f, s.inflation),
            None => Traversability::free(window),
        };
        let t_esdf = clock.elapsed();

        // Grid path to the local goal.
        let local_goal = trav.nearest_free(&target, 1.0).unwrap_or(target);
        let query_to = |from: Vec3, to: Vec3| PathQuery {
            inflation: s.inflation,
            clearance_weight: s.clearance_weight,
            clearance_soft: s.clearance_soft,
            ..PathQuery::new(from, to)
        };
        let query = |from: Vec3| query_to(from, local_goal);
        // Keep the next stretch of the previous reference while it stays
        // clear, so the route cannot flip sides of an obstacle at the last moment.
        let committed = rejoin
            .map(|(r, arc, _)| sub_polyline(r, arc, arc + s.commit_distance))
            .filter(|c| {
                c.len() >= 2
                    && c.iter().all(|p| match &esdf {
                        Some(f) => f.sample_distance(p).is_ok_and(|d| d > s.inflation),
                        None => window.contains(p),
                    })
            });
        let extended = committed.and_then(|c| {
            let mut joined = Vec::new();
            if lead_in {
                let lead = global_path::plan_on(&trav, &query_to(robot, c[0])).ok()?;
                joined.extend_from_slice(&lead[..lead.len() - 1]);
            }
            let tail = global_path::plan_on(&trav, &query(*c.last().unwrap())).ok()?;
            joined.extend(densify_keep(&c, 0.3));
            joined.extend_from_slice(&tail[1..]);
            Some(joined)
        });
        let from = if lead_in { robot } else { start };
        let waypoints = match extended {
            Some(w) => w,
            None => global_path::plan_on(&trav, &query(from))
                .or_else(|_| global_path::plan_on(&trav, &query(robot)))
                .or_else(|_| global_path::plan(grid, &query(robot)))?,
        };
        let t_astar = clock.elapsed();

        // Spline fit, refinement and sampling.
        let sample_dt = 0.5 * cfg.resolution / cfg.cruise_speed;
        let length = polyline_length(&waypoints);
        let points = if length < 3.0 * cfg.resolution {
            densify(&waypoints, 0.5 * cfg.resolution)
        } else {
            let refined = self.refine(&waypoints, length, esdf.as_ref(), sample_dt);
            match refined {
                Some(p) => p,
                None => {
                    self.fallbacks += 1;
                    densify(&waypoints, 0.5 * cfg.resolution)
                }
            }
        };
        let t_opt = clock.elapsed();

        let path = PathPoints::new(points, sample_dt);
        let field = GuidingField::build(path, cfg.resolution, cfg.gvf(), &[robot])?;
        let t_field = clock.elapsed();

        let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
        Ok((
            field,
            CycleTiming {
                t: 0.0,
                esdf_ms: ms(t_esdf),
                astar_ms: ms(t_astar - t_esdf),
                optimize_ms: ms(t_opt - t_astar),
                field_ms: ms(t_field - t_opt),
                total_ms: ms(t_field),
            },
        ))
    }

    /// Optimized spline samples, or `None` when any stage fails or a sample
    /// comes closer than half the inflation radius to a known obstacle.
    fn refine(&self, waypoints: &[Vec3], length: f64, esdf: Option<&DistanceField>, dt: f64) -> Option<Vec<Vec3>> {
        let s = &self.settings;
        let cfg = &s.config;
        let dense = densify(waypoints, 0.3);
        let n_control = ((length / 0.5).round() as usize + 3).clamp(7, 40);
        let mut spline = fit_through(&dense, 3, n_control).ok()?;
        spline
            .set_time_scale(length / cfg.cruise_speed / spline.domain().1)
            .ok()?;
        let problem = OptProblem::new(spline, esdf, cfg.weights()).ok()?;
        let outcome = optimize(&problem, &s.opt).ok()?;
        let samples = sample_uniform(&outcome.spline, dt).ok()?.points;
        let safe = samples.iter().all(|p| {
            self.scene.bounds.contains(p)
                && match esdf {
                    Some(f) => f.sample_distance(p).is_ok_and(|d| d >= 0.5 * s.inflation),
                    None => true,
                }
        });
        safe.then_some(samples)
    }

    /// Advances one command period.
    pub fn step(&mut self) {
        let dt = STEP_DT;
        let t = self.state.clock();
        let s = self.settings;

        if let Some((idx, event)) = self.schedule.drag(t) {
            if self.drag.as_ref().is_none_or(|d| d.event != idx) {
                let Disturbance::Drag { displacement } = event.disturbance else {
                    unreachable!()
                };
                let from = self.state.position;
                let displacement = self.truncate_drag(&from, &Vec3::from(displacement));
                self.drag = Some(ActiveDrag {
                    event: idx,
                    from,
                    displacement,
                });
            }
            let d = self.drag.as_ref().unwrap();
            let progress = ((t + dt - event.t_start) / (event.t_end - event.t_start)).min(1.0);
            self.state.position = d.from + d.displacement * progress;
            self.state.velocity = Vec3::zeros();
            self.state.tick += 1;
            return;
        }
        self.drag = None;

        let v_cmd = self
            .field
            .as_ref()
            .and_then(|f| {
                let xi = f.u_field.clamp_inside(&self.state.position, 3);
                let chi = f.guide(&xi).ok()?;
                let speed = curve_speed(&f.path.points, f.nearest_index(&xi), s.config.cruise_speed, 0.5 * s.a_max);
                Some(speed * chi / chi.norm().max(1e-9))
            })
            .unwrap_or_else(Vec3::zeros);
        let mut dv = v_cmd - self.state.velocity;
        let max_dv = s.a_max * dt;
        if dv.norm() > max_dv {
            dv *= max_dv / dv.norm();
        }
        let mut v = self.state.velocity + dv + self.schedule.wind(t) * dt;
        if v.norm() > s.v_max {
            v *= s.v_max / v.norm();
        }
        self.state.velocity = v;
        self.state.position += v * dt;
        self.state.tick += 1;

        let p = self.state.position;
        if !self.scene.bounds.contains(&p) || self.scene.clearance(&p) < s.body_radius {
            self.collided = true;
        }
    }

    /// Shortens a drag so every point along it keeps the drag clearance.
    fn truncate_drag(&self, from: &Vec3, displacement: &Vec3) -> Vec3 {
        let c = self.settings.drag_clearance;
        let b = &self.scene.bounds;
        let ok = |q: &Vec3| {
            (0..3).all(|a| q[a] >= b.min[a] + c && q[a] <= b.max[a] - c) && self.scene.clearance(q) >= c
        };
        let n = (displacement.norm() / 0.05).ceil().max(1.0) as usize;
        let mut keep = 0;
        for k in 1..=n {
            if !ok(&(from + displacement * (k as f64 / n as f64))) {
                break;
            }
            keep = k;
        }
        displacement * (keep as f64 / n as f64)
    }

    fn log_row(&self) -> LogRow {
        let t = self.state.clock();
        LogRow {
            t,
            position: self.state.position,
            velocity: self.state.velocity,
            d_to_path: self
                .field
                .as_ref()
                .map_or(f64::INFINITY, |f| distance_to_polyline(&f.path.points, &self.state.position)),
            event_active: self.schedule.any_active(t),
        }
    }

    /// Runs until the goal is captured, a collision occurs, replanning keeps
    /// failing, or the timeout expires.
    pub fn run(mut self, seed: u64) -> Mission {
        let s = self.settings;
        let perceive_every = s.ticks(STEP_DT * 5.0);
        let replan_every = s.ticks(s.config.t_p);
        let mut log = Vec::new();
        let mut min_clearance = f64::INFINITY;
        let outcome = loop {
            let tick = self.state.tick;
            let t = self.state.clock();
            if tick.is_multiple_of(perceive_every) {
                self.perceive();
            }
            if tick.is_multiple_of(replan_every) {
                let _ = self.replan();
            }
            log.push(self.log_row());
            if self.drag.is_none() {
                min_clearance = min_clearance.min(self.scene.clearance(&self.state.position));
            }
            if self.collided {
                break Outcome::Collision;
            }
            if (self.state.position - self.state.goal).norm() <= s.goal_tolerance {
                break Outcome::GoalReached;
            }
            if self.failing_since.is_some_and(|since| t - since > s.failure_limit) {
                break Outcome::PlannerFailure;
            }
            if t >= s.timeout {
                break Outcome::Timeout;
            }
            self.step();
        };
        let travel_distance = log.windows(2).map(|w| (w[1].position - w[0].position).norm()).sum();
        let report = MissionReport {
            seed,
            success: outcome == Outcome::GoalReached,
            outcome,
            travel_time: self.state.clock(),
            travel_distance,
            collisions: usize::from(self.collided),
            replans: self.replans,
            replan_failures: self.replan_failures,
            fallbacks: self.fallbacks,
            min_clearance,
            final_position: self.state.position.into(),
        };
        Mission {
            report,
            log,
            timing: self.timing,
        }
    }
}

/// The part of a polyline between arc lengths `from` and `to`.
pub fn sub_polyline(points: &[Vec3], from: f64, to: f64) -> Vec<Vec3> {
    let mut out = vec![crate::bspline::point_at_arc_length(points, from)];
    let mut acc = 0.0;
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        if acc > from && acc < to {
            out.push(w[1]);
        }
    }
    out.push(crate::bspline::point_at_arc_length(points, to));
    crate::bspline::dedup(&out, 1e-9)
}

/// Keeps roughly one point per `spacing` of arc length, always keeping both ends.
fn densify_keep(points: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let mut out = vec![points[0]];
    let mut acc = 0.0;
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        if acc >= spacing {
            out.push(w[1]);
            acc = 0.0;
        }
    }
    if out.last() != points.last() {
        out.push(*points.last().unwrap());
    }
    out
}

/// Inserts points so no segment is longer than `spacing`.
pub fn densify(points: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let n = ((w[1] - w[0]).norm() / spacing).ceil().max(1.0) as usize;
        for k in 0..n {
            out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
        }
    }
    if let Some(last) = points.last() {
        out.push(*last);
    }
    out
}

pub fn run_mission(
    scene: &Scene,
    start: Vec3,
    goal: Vec3,
    schedule: &DisturbanceSchedule,
    seed: u64,
    settings: &NavSettings,
) -> Result<Mission> {
    Ok(Navigator::new(scene, start, goal, schedule.clone(), *settings)?.run(seed))
}
