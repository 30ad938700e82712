//! Floor-map localization by latent-space rendering.
//!
//! Floor maps are rasterized into boundary points, rendered into circular
//! features at pose hypotheses through per-class rendering codebooks, and
//! matched against query features over a dense location grid with
//! rotation recovered by cyclic shifts.

pub mod baseline;
pub mod bench;
pub mod circfeat;
pub mod diagnostics;
pub mod error;
pub mod eval;
pub mod floormap;
pub mod geom;
pub mod localizer;
pub mod query;
pub mod raycast;
pub mod renderer;
pub mod scene;
pub mod training;

pub use circfeat::{context, mask_fov, rotate, similarity, CircularFeature};
pub use error::{Error, Result};
pub use floormap::{parse_floormap, rasterize, FloorMap, Label, MapPoint, PointCloudMap, Ring};
pub use geom::{vec2, Vec2};

pub use raycast::{lidar_scan, visible_points, DepthScan, RasterMap, VisibilityResult};
pub use renderer::{lookup_feature, ray_dynamics, render, render_pose, CodebookSet, RayDynamics};
pub use localizer::{
    best_rotation, extract_peaks, localize, refine, score_grid, LocalizeOptions, PoseHypothesis, PosteriorGrid,
    RefineConfig,
};
pub use query::{Pose, QuerySample, QuerySource};
pub use training::{
    context_loss, encode_depth_query, encode_oracle_query, init_codebooks, train_codebooks, triplet_loss,
    DepthEncoder, TrainConfig, TrainScene,
};
