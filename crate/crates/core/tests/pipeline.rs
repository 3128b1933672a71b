use gvf_nav::bench::{generate_scene, run_batch, DisturbanceProfile, SceneSpec, SceneStyle};
use gvf_nav::bspline::polyline_length;
use gvf_nav::navigator::{run_mission, DisturbanceSchedule, NavSettings};
use gvf_nav::scene::Scene;
use gvf_nav::{Execution, Vec3};

fn small(style: SceneStyle, density: f64, seed: u64) -> SceneSpec {
    SceneSpec {
        extent: [12.0, 6.0, 3.0],
        ..SceneSpec::new(style, density, seed)
    }
}

#[test]
fn log_is_consistent_with_the_report() {
    let scene = Scene::empty([0.0, 0.0, 0.0], [10.0, 4.0, 2.0], 0.1);
    let m = run_mission(
        &scene,
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(8.5, 3.0, 1.0),
        &DisturbanceSchedule::none(),
        11,
        &NavSettings::default(),
    )
    .unwrap();
    assert!(m.report.success);
    let positions: Vec<Vec3> = m.log.iter().map(|r| r.position).collect();
    assert!((polyline_length(&positions) - m.report.travel_distance).abs() < 1e-6);
    assert!((m.log.len() as f64 - m.report.travel_time / 0.01).abs() <= 1.0);
    assert!(m.log.windows(2).all(|w| w[1].t > w[0].t));
    assert!(m.log.iter().all(|r| r.velocity.norm() <= NavSettings::default().v_max + 1e-9));
}

#[test]
fn generated_density_is_near_target() {
    for style in [SceneStyle::Pillars2d, SceneStyle::Irregular3d] {
        for target in [0.1, 0.2, 0.3] {
            let g = generate_scene(&SceneSpec::new(style, target, 7)).unwrap();
            assert!((g.density_full - target).abs() <= 0.03, "{style:?} {target}: {}", g.density_full);
            assert!(g.density_band >= g.density_full);
            assert!(g.scene.obstacles.iter().all(|o| !o.contains(&g.start) && !o.contains(&g.goal)));
        }
    }
}

#[test]
fn batches_do_not_depend_on_execution_mode() {
    let spec = small(SceneStyle::Pillars2d, 0.15, 3);
    let settings = NavSettings::default();
    let a = run_batch(&spec, 3, DisturbanceProfile::Mixed, &settings, Execution::Sequential).unwrap();
    let b = run_batch(&spec, 3, DisturbanceProfile::Mixed, &settings, Execution::Parallel).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.logs, b.logs);
    let seeds: Vec<u64> = a.report.records.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, [3, 4, 5]);
}
