//! JSON map documents.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bounds, Directionality, Intersection, Landmark, LandmarkSet, RoadNetwork};
use crate::geom::Vec2;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: usize,
    pub b: usize,
    pub dir: Directionality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub edge: usize,
}

/// Serialized form of a network plus its landmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub bounds: Bounds,
    pub block_range: (f64, f64),
    pub landmarks: Vec<LandmarkRecord>,
    #[serde(default)]
    pub landmark_density_per_km2: f64,
}

impl MapDocument {
    pub fn from_network(net: &RoadNetwork, landmarks: Option<&LandmarkSet>) -> Self {
        MapDocument {
            nodes: net
                .nodes
                .iter()
                .map(|n| NodeRecord { id: n.id, x_m: n.pos.x, y_m: n.pos.y })
                .collect(),
            edges: net
                .edges
                .iter()
                .map(|e| EdgeRecord { a: e.a, b: e.b, dir: e.dir })
                .collect(),
            bounds: net.bounds,
            block_range: net.block_range,
            landmarks: landmarks
                .map(|l| {
                    l.entries
                        .iter()
                        .map(|lm| LandmarkRecord { id: lm.id, x_m: lm.pos.x, y_m: lm.pos.y, edge: lm.edge })
                        .collect()
                })
                .unwrap_or_default(),
            landmark_density_per_km2: landmarks.map_or(0.0, |l| l.density_per_km2),
        }
    }

    pub fn to_network(&self) -> Result<(RoadNetwork, LandmarkSet)> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Intersection { id: n.id, pos: Vec2::new(n.x_m, n.y_m) })
            .collect();
        let edges = self.edges.iter().map(|e| (e.a, e.b, e.dir)).collect();
        let net = RoadNetwork::from_parts(nodes, edges, self.bounds, self.block_range)?;
        let landmarks = LandmarkSet {
            entries: self
                .landmarks
                .iter()
                .map(|l| Landmark { id: l.id, pos: Vec2::new(l.x_m, l.y_m), edge: l.edge })
                .collect(),
            density_per_km2: self.landmark_density_per_km2,
        };
        Ok((net, landmarks))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citygen::{generate_map, place_landmarks, MapParams};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn json_round_trip_is_lossless(seed in 0u64..10_000, area in 1.0f64..6.0, density in 0.0f64..20.0) {
            let params = MapParams { area_km2: area, one_way_fraction: 0.2, ..MapParams::default() };
            let net = generate_map(&params, seed).unwrap();
            let lms = place_landmarks(&net, density, seed ^ 1).unwrap();
            let doc = MapDocument::from_network(&net, Some(&lms));
            let back = MapDocument::from_json(&doc.to_json().unwrap()).unwrap();
            prop_assert_eq!(&back, &doc);
            let (net2, lms2) = back.to_network().unwrap();
            prop_assert_eq!(net2, net);
            prop_assert_eq!(lms2, lms);
        }
    }
}
