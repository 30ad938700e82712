//! Shared fixtures for the criterion benchmarks.

use floorloc::scene::{generate_scene, SceneParams, SceneStyle};
use floorloc::{init_codebooks, vec2, CodebookSet, RasterMap, Vec2};

/// A 10 × 10 m single room rasterized at 0.1 m with default-size random codebooks.
pub fn square_room() -> (RasterMap, CodebookSet) {
    let params = SceneParams { width: Some(10.0), height: Some(10.0), ..SceneParams::new(SceneStyle::SingleRoom) };
    let scene = generate_scene(&params, 1).expect("scene");
    let map = RasterMap::new(scene.floormap, 0.1).expect("raster");
    (map, init_codebooks(32, 32, 16, 128, 3, 10.0, 1).expect("codebooks"))
}

/// A seeded multi-room layout with the same codebook shape and one of its
/// ground-truth query locations.
pub fn multi_room() -> (RasterMap, CodebookSet, Vec2) {
    let scene = generate_scene(&SceneParams::new(SceneStyle::MultiRoom), 3).expect("scene");
    let loc = scene.gt_queries[0].gt_pose.t();
    let map = RasterMap::new(scene.floormap, 0.1).expect("raster");
    (map, init_codebooks(32, 32, 16, 128, 3, 10.0, 1).expect("codebooks"), loc)
}

/// A free location in [`square_room`] off the cell lattice.
pub fn probe_location() -> Vec2 {
    vec2(4.05, 3.95)
}
