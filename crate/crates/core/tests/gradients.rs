//! Analytic codebook gradients against central finite differences of the
//! forward loss, computed here only from public forward operations.

use floorloc::renderer::ClassAssignment;
use floorloc::training::batch_loss_and_grad;
use floorloc::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;

fn triangle() -> RasterMap {
    let ring = Ring::walls(vec![vec2(0.0, 0.0), vec2(3.0, 0.2), vec2(1.2, 2.6)]);
    let map = RasterMap::new(FloorMap::new(vec![ring], None).unwrap(), 100.0).unwrap();
    assert_eq!(map.cloud.points.len(), 3);
    map
}

fn forward(map: &RasterMap, cb: &CodebookSet, anchor: &CircularFeature, pos: Pose, negs: &[Pose]) -> f64 {
    let p = render_pose(map, cb, pos.t(), pos.theta).unwrap();
    let mut total = 0.0;
    for n in negs {
        let f = render_pose(map, cb, n.t(), n.theta).unwrap();
        total += triplet_loss(anchor, &p, &f).unwrap() + context_loss(anchor, &p, &f).unwrap();
    }
    total / negs.len() as f64
}

/// Loss near a hinge kink would make the central difference straddle it.
fn hinges_clear_of_kinks(map: &RasterMap, cb: &CodebookSet, anchor: &CircularFeature, pos: Pose, negs: &[Pose]) -> bool {
    let cos = |a: &[f64], b: &[f64]| floorloc::circfeat::cosine(a, b);
    let p = render_pose(map, cb, pos.t(), pos.theta).unwrap();
    let (Ok(sp), Ok(cp)) = (similarity(anchor, &p), context(&p)) else {
        return false;
    };
    let ca = context(anchor).unwrap();
    negs.iter().all(|n| {
        let f = render_pose(map, cb, n.t(), n.theta).unwrap();
        let (Ok(sn), Ok(cn)) = (similarity(anchor, &f), context(&f)) else {
            return false;
        };
        let h = sn - sp + 0.5;
        let hc = cos(&ca, &cn) - cos(&ca, &cp) + 1.0;
        h.abs() > 1e-3 && hc.abs() > 1e-3
    })
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn check(seed: u64, per_point: bool) -> f64 {
    let map = triangle();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = 3;
    let mut cb = init_codebooks(6, 5, 4, 8, classes, 4.0, seed).unwrap();
    if per_point {
        cb.assignment = ClassAssignment::PerPoint;
    }
    let anchor = CircularFeature::full(4, 8, (0..32).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let inside = |rng: &mut ChaCha8Rng| loop {
        let t = vec2(rng.random_range(0.0..3.0), rng.random_range(0.0..2.6));
        if map.floor.clearance(&t) > 0.05 && map.floor.is_free(&t) {
            return Pose::new(t, rng.random_range(0.0..std::f64::consts::TAU));
        }
    };
    let (pos, negs) = loop {
        let pos = inside(&mut rng);
        let negs: Vec<Pose> = (0..3).map(|_| inside(&mut rng)).collect();
        if hinges_clear_of_kinks(&map, &cb, &anchor, pos, &negs) {
            break (pos, negs);
        }
    };
    let (loss, grad) = batch_loss_and_grad(&map, &cb, &anchor, pos, &negs, &TrainConfig::default()).unwrap();
    assert!((loss.total() - forward(&map, &cb, &anchor, pos, &negs)).abs() < 1e-12);

    let mut worst: f64 = 0.0;
    for which in 0..2 {
        let len = if which == 0 { cb.angle_codes.len() } else { cb.dist_codes.len() };
        for i in 0..len {
            let mut plus = cb.clone();
            let mut minus = cb.clone();
            let (gp, gm, g) = if which == 0 {
                plus.angle_codes[i] += EPS;
                minus.angle_codes[i] -= EPS;
                (&plus, &minus, grad.angle_codes[i])
            } else {
                plus.dist_codes[i] += EPS;
                minus.dist_codes[i] -= EPS;
                (&plus, &minus, grad.dist_codes[i])
            };
            let fd = (forward(&map, gp, &anchor, pos, &negs) - forward(&map, gm, &anchor, pos, &negs)) / (2.0 * EPS);
            if g.abs() < 1e-9 && fd.abs() < 1e-9 {
                continue;
            }
            worst = worst.max(rel_err(g, fd));
        }
    }
    worst
}

#[test]
fn per_label_gradients_match_finite_differences() {
    for seed in 0..4 {
        let e = check(seed, false);
        assert!(e < 1e-4, "seed {seed}: max relative error {e}");
    }
}

#[test]
fn per_point_gradients_match_finite_differences() {
    for seed in 10..14 {
        let e = check(seed, true);
        assert!(e < 1e-4, "seed {seed}: max relative error {e}");
    }
}
