use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, SimilarityTransform};

/// The seven facial fiducials, in acquisition order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandmarkId {
    RightTragus,
    RightOuterCanthus,
    RightInnerCanthus,
    NoseBridge,
    LeftInnerCanthus,
    LeftOuterCanthus,
    LeftTragus,
}

impl LandmarkId {
    pub const ALL: [LandmarkId; 7] = [
        LandmarkId::RightTragus,
        LandmarkId::RightOuterCanthus,
        LandmarkId::RightInnerCanthus,
        LandmarkId::NoseBridge,
        LandmarkId::LeftInnerCanthus,
        LandmarkId::LeftOuterCanthus,
        LandmarkId::LeftTragus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn first() -> Self {
        LandmarkId::RightTragus
    }

    /// Next landmark in acquisition order, saturating at the last.
    pub fn next(self) -> Self {
        Self::ALL[(self.index() + 1).min(6)]
    }

    /// Previous landmark in acquisition order, saturating at the first.
    pub fn prev(self) -> Self {
        Self::ALL[self.index().saturating_sub(1)]
    }

    /// Human-readable prompt text, e.g. "Right Tragus".
    pub fn label(self) -> &'static str {
        match self {
            LandmarkId::RightTragus => "Right Tragus",
            LandmarkId::RightOuterCanthus => "Right Outer Canthus",
            LandmarkId::RightInnerCanthus => "Right Inner Canthus",
            LandmarkId::NoseBridge => "Nose Bridge",
            LandmarkId::LeftInnerCanthus => "Left Inner Canthus",
            LandmarkId::LeftOuterCanthus => "Left Outer Canthus",
            LandmarkId::LeftTragus => "Left Tragus",
        }
    }

    /// Snake-case key used in CSV headers.
    pub fn key(self) -> &'static str {
        match self {
            LandmarkId::RightTragus => "right_tragus",
            LandmarkId::RightOuterCanthus => "right_outer_canthus",
            LandmarkId::RightInnerCanthus => "right_inner_canthus",
            LandmarkId::NoseBridge => "nose_bridge",
            LandmarkId::LeftInnerCanthus => "left_inner_canthus",
            LandmarkId::LeftOuterCanthus => "left_outer_canthus",
            LandmarkId::LeftTragus => "left_tragus",
        }
    }
}

impl fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for LandmarkId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|id| id.key().replace('_', "") == norm)
            .ok_or_else(|| format!("unknown landmark '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Model,
    World,
}

/// Partial map from landmark to position, tagged with its coordinate space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub space: Space,
    #[serde(rename = "landmarks")]
    points: BTreeMap<LandmarkId, Point3>,
}

impl LandmarkSet {
    pub fn new(space: Space) -> Self {
        Self { space, points: BTreeMap::new() }
    }

    pub fn from_points(space: Space, points: impl IntoIterator<Item = (LandmarkId, Point3)>) -> Self {
        Self { space, points: points.into_iter().collect() }
    }

    /// Builds a complete set from seven points in acquisition order.
    pub fn from_ordered(space: Space, points: [Point3; 7]) -> Self {
        Self::from_points(space, LandmarkId::ALL.into_iter().zip(points))
    }

    pub fn insert(&mut self, id: LandmarkId, p: Point3) -> Option<Point3> {
        self.points.insert(id, p)
    }

    pub fn remove(&mut self, id: LandmarkId) -> Option<Point3> {
        self.points.remove(&id)
    }

    pub fn get(&self, id: LandmarkId) -> Option<&Point3> {
        self.points.get(&id)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.points.len() == LandmarkId::ALL.len()
    }

    pub fn missing(&self) -> Vec<LandmarkId> {
        LandmarkId::ALL.into_iter().filter(|id| !self.points.contains_key(id)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LandmarkId, &Point3)> {
        self.points.iter().map(|(k, v)| (*k, v))
    }

    pub fn points(&self) -> Vec<Point3> {
        self.points.values().copied().collect()
    }

    pub fn centroid(&self) -> Option<Point3> {
        if self.points.is_empty() {
            return None;
        }
        let sum: crate::Vec3 = self.points.values().map(|p| p.coords).sum();
        Some(Point3::from(sum / self.points.len() as f64))
    }

    /// Maps every point through `t` and retags the result.
    pub fn transformed(&self, t: &SimilarityTransform, space: Space) -> Self {
        Self { space, points: self.points.iter().map(|(k, p)| (*k, t.apply(p))).collect() }
    }
}
