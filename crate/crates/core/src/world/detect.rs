use serde::{Deserialize, Serialize};

use crate::io::sentinel_vec3;
use crate::Vec3;

pub const CONFIDENCE_THRESHOLD: f64 = 0.5;
pub const NEAR_RADIUS: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Blemished,
    Unblemished,
    Red,
    Blue,
    Unknown,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Blemished,
        Label::Unblemished,
        Label::Red,
        Label::Blue,
        Label::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn one_hot(self) -> [f64; 5] {
        let mut v = [0.0; 5];
        v[self.index()] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: Label,
    pub confidence: f64,
    #[serde(with = "sentinel_vec3")]
    pub centroid: Vec3,
}

/// The state's object slot: a label and a location, with the location at
/// minus infinity on every axis when nothing qualifies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectOfInterest {
    pub label: Label,
    #[serde(with = "sentinel_vec3")]
    pub location: Vec3,
}

impl ObjectOfInterest {
    pub fn none() -> Self {
        ObjectOfInterest {
            label: Label::Unknown,
            location: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn is_sentinel(&self) -> bool {
        self.location.iter().any(|v| !v.is_finite())
    }
}

/// Which selection rule produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionRule {
    NoConfidentDetection,
    NearEndEffector,
    LowestY,
}

/// Picks the object of interest and reports the rule that fired, along
/// with the index of the chosen detection in the input list.
pub fn select_with_rule(
    detections: &[Detection],
    eef: Vec3,
) -> (ObjectOfInterest, SelectionRule, Option<usize>) {
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[a].centroid.y.total_cmp(&detections[b].centroid.y));
    let confident: Vec<usize> = order
        .into_iter()
        .filter(|&i| detections[i].confidence >= CONFIDENCE_THRESHOLD && detections[i].centroid.iter().all(|v| v.is_finite()))
        .collect();
    let Some(&lowest) = confident.first() else {
        return (ObjectOfInterest::none(), SelectionRule::NoConfidentDetection, None);
    };
    let near = confident
        .iter()
        .map(|&i| (i, (detections[i].centroid - eef).norm()))
        .filter(|(_, d)| *d < NEAR_RADIUS)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let (idx, rule) = match near {
        Some((i, _)) => (i, SelectionRule::NearEndEffector),
        None => (lowest, SelectionRule::LowestY),
    };
    let d = &detections[idx];
    (
        ObjectOfInterest {
            label: d.label,
            location: d.centroid,
        },
        rule,
        Some(idx),
    )
}

pub fn select_object_of_interest(detections: &[Detection], eef: Vec3) -> ObjectOfInterest {
    select_with_rule(detections, eef).0
}
