mod common;

use foamsim::engine::{EngineConfig, FrameSchedule, System};
use foamsim::partition::{build_kdtree, PartitionAssignment};
use foamsim::render::render_reference;
use foamsim::MarchParams;

fn positions(s: &foamsim::Scene) -> Vec<foamsim::Vec3> {
    s.sites.iter().map(|x| x.position).collect()
}

#[test]
fn single_partition_matches_reference() {
    let scene = common::scene(300, 1);
    let cam = common::camera(32, 24);
    let reference = render_reference(&scene, &cam, &MarchParams::for_scene(&scene)).unwrap();
    let cfg = EngineConfig {
        levels: 1,
        ..Default::default()
    };
    let mut sys = System::from_scene(&scene, &PartitionAssignment::single(scene.len()), cfg).unwrap();
    let (out, stats) = sys.run_frame(&cam, &FrameSchedule::default()).unwrap();
    assert!(stats.completed, "{stats:?}");
    assert!(out.same_image(&reference));
    assert!(out.tracer_hops.iter().all(|&h| h == 1));
    assert!(out.router_hops.iter().all(|&h| h == 2));
}

#[test]
fn kdtree_partitions_match_reference() {
    let scene = common::scene(2000, 2);
    let cam = common::camera(64, 48);
    let reference = render_reference(&scene, &cam, &MarchParams::for_scene(&scene)).unwrap();
    for (levels, depth) in [(1, 4), (2, 4), (3, 8), (2, 2)] {
        let a = build_kdtree(&positions(&scene), depth).unwrap();
        let cfg = EngineConfig {
            levels,
            ..Default::default()
        };
        let mut sys = System::from_scene(&scene, &a, cfg).unwrap();
        let (out, stats) = sys.run_frame(&cam, &FrameSchedule::default()).unwrap();
        assert!(stats.completed && stats.balanced());
        assert_eq!(stats.rays_dropped, 0);
        assert!(out.same_image(&reference), "L={levels} depth={depth}");
        assert_eq!(out.cell_steps, reference.cell_steps);
        assert!(stats.max_router_hops_between_tracers <= 2 * levels);
    }
}

use foamsim::engine::{CameraPolicy, Completion, EngineError, OverflowPolicy, ScanOrder};
use foamsim::payload::PayloadLayout;

fn kd_system(scene: &foamsim::Scene, depth: u32, cfg: EngineConfig) -> System {
    let a = build_kdtree(&positions(scene), depth).unwrap();
    System::from_scene(scene, &a, cfg).unwrap()
}

#[test]
fn tight_buffers_and_cell_cap_keep_arithmetic() {
    let scene = common::scene(1500, 3);
    let cam = common::camera(40, 30);
    let reference = render_reference(&scene, &cam, &MarchParams::for_scene(&scene)).unwrap();
    for (cap, cell_cap, scan) in [(8, None, ScanOrder::Row), (64, Some(3), ScanOrder::Column)] {
        let cfg = EngineConfig {
            levels: 2,
            lane_capacity: Some(cap),
            tracer_cell_cap: cell_cap,
            ..Default::default()
        };
        let mut sys = kd_system(&scene, 6, cfg);
        let sched = FrameSchedule {
            scan,
            batch_size: 4,
            idle_between_batches: 3,
            ..Default::default()
        };
        let (out, stats) = sys.run_frame(&cam, &sched).unwrap();
        assert!(stats.completed, "cap {cap}: {stats:?}");
        assert_eq!(stats.rays_dropped, 0);
        assert!(out.same_image(&reference), "cap {cap}");
    }
}

#[test]
fn backpressure_deadlock_is_reported_as_stall() {
    // Five-ray lanes and one cell per visit: tracers re-queue to themselves
    // until every buffer on the cycle is full.
    let scene = common::scene(1500, 3);
    let cam = common::camera(40, 30);
    let reference = render_reference(&scene, &cam, &MarchParams::for_scene(&scene)).unwrap();
    let cfg = EngineConfig {
        levels: 2,
        lane_capacity: Some(5),
        tracer_cell_cap: Some(1),
        ..Default::default()
    };
    let mut sys = kd_system(&scene, 6, cfg);
    let (out, stats) = sys.run_frame(&cam, &FrameSchedule { batch_size: 4, ..Default::default() }).unwrap();
    assert!(stats.stalled && !stats.completed);
    assert!(stats.balanced() && stats.rays_in_flight > 0);
    assert_eq!(stats.rays_dropped, 0);
    assert!(out.missing_count() > 0);
    for p in (0..out.pixel_count()).filter(|&p| !out.missing[p]) {
        assert_eq!(out.rgb[p], reference.rgb[p]);
    }
}

#[test]
fn drop_mode_loses_pixels_and_balances() {
    let scene = common::scene(3000, 4);
    let cam = common::camera(64, 48);
    let cfg = EngineConfig {
        levels: 4,
        lane_capacity: Some(16),
        ..Default::default()
    };
    let mut sys = kd_system(&scene, 8, cfg);
    let sched = FrameSchedule {
        batch_size: 48,
        overflow_policy: OverflowPolicy::Drop,
        ..Default::default()
    };
    let (out, stats) = sys.run_frame(&cam, &sched).unwrap();
    assert!(stats.rays_dropped > 0);
    assert!(stats.balanced());
    assert_eq!(stats.rays_in_flight, 0);
    assert_eq!(out.missing_count() as u64, stats.rays_dropped);
}

#[test]
fn budgeted_schedule_counts() {
    let scene = common::scene(200, 5);
    let cam = common::camera(1, 480);
    let cfg = EngineConfig {
        levels: 1,
        ..Default::default()
    };
    let mut sys = kd_system(&scene, 2, cfg);
    let sched = FrameSchedule {
        completion: Completion::Budgeted,
        ..Default::default()
    };
    let (out, stats) = sys.run_frame(&cam, &sched).unwrap();
    assert_eq!(stats.iterations_executed, 680);
    assert_eq!(stats.scheduled_iterations, 680);
    assert_eq!(stats.injection_iterations, 480);
    assert_eq!(stats.host_sync_count, 34);
    assert_eq!(out.missing_count(), 0);
    assert!(stats.completed);
}

#[test]
fn camera_policies() {
    let scene = common::scene(1500, 6);
    let (a, b) = (common::camera(48, 36), common::other_camera(48, 36));
    let params = MarchParams::for_scene(&scene);
    let ref_a = render_reference(&scene, &a, &params).unwrap();
    let ref_b = render_reference(&scene, &b, &params).unwrap();
    let sched = FrameSchedule {
        rc: 4,
        ..Default::default()
    };
    let cfg = EngineConfig {
        levels: 2,
        ..Default::default()
    };
    for policy in [CameraPolicy::DeferredSafe, CameraPolicy::ImmediateUnsafe] {
        let mut sys = kd_system(&scene, 6, cfg);
        sys.start_frame(&a, &sched).unwrap();
        for _ in 0..18 {
            sys.step().unwrap();
        }
        sys.set_camera(b.clone(), policy).unwrap();
        while !sys.step().unwrap() {}
        let (out, stats) = sys.finish_frame().unwrap();
        assert!(stats.completed);
        let speckle = (0..out.pixel_count())
            .filter(|&p| out.rgb[p] != ref_a.rgb[p] && out.rgb[p] != ref_b.rgb[p])
            .count();
        match policy {
            CameraPolicy::DeferredSafe => {
                assert!(out.same_image(&ref_a));
                assert_eq!(sys.camera(), Some(&b));
            }
            CameraPolicy::ImmediateUnsafe => {
                assert!(speckle > 0);
                assert_eq!(stats.camera_switches, vec![20]);
            }
        }
    }
}

#[test]
fn half_layouts_complete() {
    let scene = common::scene(1000, 7);
    let cam = common::camera(32, 24);
    for layout in [PayloadLayout::Mixed, PayloadLayout::AllHalf] {
        let cfg = EngineConfig {
            levels: 2,
            layout,
            ..Default::default()
        };
        let mut sys = kd_system(&scene, 5, cfg);
        let (out, stats) = sys.run_frame(&cam, &FrameSchedule::default()).unwrap();
        assert!(stats.completed);
        assert_eq!(out.missing_count(), 0);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let scene = common::scene(1200, 8);
    let cam = common::camera(40, 30);
    let cfg = EngineConfig {
        levels: 3,
        lane_capacity: Some(12),
        ..Default::default()
    };
    let sched = FrameSchedule {
        overflow_policy: OverflowPolicy::Drop,
        batch_size: 6,
        ..Default::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| kd_system(&scene, 7, cfg).run_frame(&cam, &sched).unwrap())
    };
    let (o1, s1) = run(1);
    let (o4, s4) = run(4);
    assert_eq!(o1, o4);
    assert_eq!(s1, s4);
}

#[test]
fn sram_budget_is_checked_before_running() {
    let scene = common::scene(300, 9);
    let cfg = EngineConfig {
        levels: 1,
        sram_budget: 500_000,
        ..Default::default()
    };
    let mut sys = kd_system(&scene, 2, cfg);
    let err = sys.run_frame(&common::camera(8, 8), &FrameSchedule::default()).unwrap_err();
    assert!(matches!(err, EngineError::SramBudget { .. }));
}
