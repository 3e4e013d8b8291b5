mod common;

use common::{op_cases, run_case};

#[test]
fn every_op_matches_finite_differences() {
    for (i, case) in op_cases().iter().enumerate() {
        let r = run_case(case, 20, 1000 + i as u64);
        assert_eq!(r.failures, 0, "{r:?}");
        assert!(r.worst_rel <= common::REL_TOL, "{r:?}");
    }
}
