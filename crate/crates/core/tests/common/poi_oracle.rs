//! Random labelled plans and a pixel-by-pixel reference for `pois_near`.

use std::collections::BTreeMap;

use floorpose::poi::{FloorPlan, PoiInfo};
use rand::{Rng, SeedableRng};

/// A few rectangular areas plus scattered single pixels, ids 1..=6.
pub fn random_plan(seed: u64, w: u32, h: u32, mpp: f64) -> FloorPlan {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut labels = vec![0u16; (w * h) as usize];
    for id in 1..=4u16 {
        let (r0, c0) = (rng.random_range(0..h), rng.random_range(0..w));
        let (rh, cw) = (rng.random_range(1..=h.min(12)), rng.random_range(1..=w.min(12)));
        for r in r0..(r0 + rh).min(h) {
            for c in c0..(c0 + cw).min(w) {
                labels[(r * w + c) as usize] = id;
            }
        }
    }
    for _ in 0..(w * h / 50 + 1) {
        let i = rng.random_range(0..labels.len());
        labels[i] = rng.random_range(5..=6);
    }
    let registry: BTreeMap<u16, PoiInfo> = (1..=6)
        .map(|id| {
            (
                id,
                PoiInfo {
                    name: format!("area {id}"),
                    category: "room".into(),
                },
            )
        })
        .collect();
    FloorPlan::new(w, h, mpp, labels, registry).unwrap()
}

fn wrap(a: f64) -> f64 {
    let mut x = a % 360.0;
    if x <= -180.0 {
        x += 360.0;
    }
    if x > 180.0 {
        x -= 360.0;
    }
    x
}

/// `(id, distance, bearing)` for each PoI, scanning every pixel.
pub fn brute_force(plan: &FloorPlan, row: f64, col: f64, heading: f64, radius: f64, fov: f64) -> Vec<(u16, f64, f64)> {
    let mut best: BTreeMap<u16, (f64, f64)> = BTreeMap::new();
    for r in 0..plan.height() {
        for c in 0..plan.width() {
            let id = plan.label_at(r, c);
            if id == 0 {
                continue;
            }
            let (dr, dc) = (r as f64 - row, c as f64 - col);
            let d = (dr * dr + dc * dc).sqrt();
            let bearing = if d == 0.0 { 0.0 } else { wrap(dr.atan2(dc).to_degrees() - heading) };
            let dist = d * plan.meters_per_pixel();
            if dist > radius || bearing.abs() > fov / 2.0 {
                continue;
            }
            match best.get(&id) {
                Some((bd, _)) if *bd <= dist => {}
                _ => {
                    best.insert(id, (dist, bearing));
                }
            }
        }
    }
    let mut out: Vec<(u16, f64, f64)> = best.into_iter().map(|(id, (d, b))| (id, d, b)).collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    out
}
