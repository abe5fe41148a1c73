mod common;

use foamsim::engine::{router_step, serial_router, RouteContext, MAX_WORKERS};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn two_pass_router_matches_serial(seed in any::<u64>()) {
        let case = common::router_case(seed);
        let ctx = RouteContext {
            topology: &case.topology,
            router: case.router,
            partition_leaf: &case.partition_leaf,
            policy: case.policy,
            spill_to_parent: case.spill_to_parent,
        };
        let mut expect = case.tile.clone();
        let expect_report = serial_router(&mut expect, &ctx);
        for w in 1..=MAX_WORKERS {
            let mut got = case.tile.clone();
            let report = router_step(&mut got, &ctx, w);
            prop_assert_eq!(report, expect_report, "W={}", w);
            prop_assert_eq!(common::router_snapshot(&got), common::router_snapshot(&expect), "W={}", w);
        }
    }

    #[test]
    fn router_conserves_rays(seed in any::<u64>()) {
        let case = common::router_case(seed);
        let ctx = RouteContext {
            topology: &case.topology,
            router: case.router,
            partition_leaf: &case.partition_leaf,
            policy: case.policy,
            spill_to_parent: case.spill_to_parent,
        };
        let mut tile = case.tile.clone();
        let before = tile.occupancy();
        let r = router_step(&mut tile, &ctx, 4);
        prop_assert_eq!(tile.occupancy() + r.dropped, before);
        for b in tile.inputs.iter().chain(&tile.outputs) {
            prop_assert_eq!(b.scan_valid(), b.len());
        }
    }
}
