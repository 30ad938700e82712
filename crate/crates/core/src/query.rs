//! Query samples and their JSON file format.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::circfeat::{CircularFeature, FeatureDoc};
use crate::error::{Error, Result};
use crate::geom::{vec2, Vec2};

/// A planar pose; `theta` is the heading, counter-clockwise from +x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(t: Vec2, theta: f64) -> Self {
        Self { x: t.x, y: t.y, theta }
    }

    pub fn t(&self) -> Vec2 {
        vec2(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuerySource {
    /// Rendered through the codebooks at the true pose, plus Gaussian noise.
    OracleNoisy,
    /// Deterministic encoding of a simulated range scan.
    DepthEncoded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySample {
    pub gt_pose: Pose,
    pub feature: CircularFeature,
    pub source: QuerySource,
    pub fov: f64,
}

/// On-disk form of a query: `{"source", "fov", "gt_pose"?, "feature": {V, D, valid, segments}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QueryDoc {
    pub source: QuerySource,
    pub fov: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_pose: Option<Pose>,
    pub feature: FeatureDoc,
}

impl QuerySample {
    pub fn to_doc(&self) -> QueryDoc {
        QueryDoc { source: self.source, fov: self.fov, gt_pose: Some(self.gt_pose), feature: self.feature.to_doc() }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyQueryDoc {
    Query(QueryDoc),
    Bare(FeatureDoc),
}

/// Reads a query document; the ground-truth pose is optional. A bare feature
/// document reads as a full-circle oracle query.
pub fn parse_query(bytes: &[u8]) -> Result<(CircularFeature, Option<Pose>, QuerySource, f64)> {
    let doc = match serde_json::from_slice(bytes).map_err(|e| Error::Schema(e.to_string()))? {
        AnyQueryDoc::Query(doc) => doc,
        AnyQueryDoc::Bare(feature) => QueryDoc { source: QuerySource::OracleNoisy, fov: TAU, gt_pose: None, feature },
    };
    if !(doc.fov > 0.0 && doc.fov <= TAU + 1e-12) {
        return Err(Error::Schema(format!("fov must lie in (0, 2π], got {}", doc.fov)));
    }
    Ok((CircularFeature::try_from(doc.feature)?, doc.gt_pose, doc.source, doc.fov))
}
