mod common;

use floorpose::geometry::{Pose6DoF, Vec3};
use floorpose::poi::*;
use proptest::prelude::*;

use common::poi_oracle::{brute_force, random_plan};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_brute_force(
        seed in any::<u64>(),
        w in 1u32..64, h in 1u32..64,
        fr in 0.0f64..1.0, fc in 0.0f64..1.0,
        heading in -180.0f64..180.0,
        radius in 0.01f64..5.0,
        fov in 1.0f64..=360.0,
    ) {
        let plan = random_plan(seed, w, h, 0.1);
        let (row, col) = (fr * (h as f64 - 1.0), fc * (w as f64 - 1.0));
        let pose = Pose6DoF::new(Vec3::new(row, col, 0.0), level_camera_orientation(heading));
        let got = pois_near(&plan, &pose, radius, fov).unwrap();
        let want = brute_force(&plan, row, col, heading, radius, fov);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(g.poi_id, w.0);
            prop_assert!((g.distance - w.1).abs() < 1e-9);
            prop_assert!((g.bearing - w.2).abs() < 1e-6, "{} vs {}", g.bearing, w.2);
        }
    }

    #[test]
    fn larger_radius_or_fov_never_loses_hits(
        seed in any::<u64>(),
        fr in 0.0f64..1.0, fc in 0.0f64..1.0,
        heading in -180.0f64..180.0,
        radius in 0.1f64..3.0, extra_r in 0.0f64..3.0,
        fov in 1.0f64..300.0, extra_f in 0.0f64..60.0,
    ) {
        let plan = random_plan(seed, 40, 30, 0.1);
        let pose = Pose6DoF::new(Vec3::new(fr * 29.0, fc * 39.0, 0.0), level_camera_orientation(heading));
        let ids = |r, f| -> Vec<u16> {
            let mut v: Vec<u16> = pois_near(&plan, &pose, r, f).unwrap().iter().map(|h| h.poi_id).collect();
            v.sort();
            v
        };
        let base = ids(radius, fov);
        for (r, f) in [(radius + extra_r, fov), (radius, (fov + extra_f).min(360.0))] {
            let more = ids(r, f);
            prop_assert!(base.iter().all(|id| more.contains(id)));
        }
    }

    #[test]
    fn turning_shifts_bearings(
        seed in any::<u64>(),
        fr in 0.0f64..1.0, fc in 0.0f64..1.0,
        heading in -180.0f64..180.0,
        delta in -90.0f64..90.0,
    ) {
        let plan = random_plan(seed, 40, 30, 0.1);
        let at = |hd: f64| {
            let pose = Pose6DoF::new(Vec3::new(fr * 29.0, fc * 39.0, 0.0), level_camera_orientation(hd));
            pois_near(&plan, &pose, 2.0, 360.0).unwrap()
        };
        let (a, b) = (at(heading), at(heading + delta));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.poi_id, y.poi_id);
            if x.distance > 0.0 {
                let diff = (y.bearing - (x.bearing - delta)).rem_euclid(360.0);
                prop_assert!(diff < 1e-6 || diff > 360.0 - 1e-6, "{} -> {}", x.bearing, y.bearing);
            }
        }
    }
}
