//! Seeded gridded city road networks.
//!
//! A map is a rectangular grid whose column and row spacings are drawn independently from
//! the block-length range. Some nodes are pruned to dead ends and some segments are made
//! one-way. Landmarks are scattered uniformly over total road length, and start/goal pairs
//! are sampled with a directed reachability check.

mod io;

pub use io::MapDocument;

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{bearing, Vec2};
use crate::seed::{rng_from, SimRng};
use crate::{Error, Result};

/// Allowed travel direction on a segment, relative to its `(a, b)` node order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Directionality {
    #[serde(rename = "two-way")]
    TwoWay,
    /// a -> b only.
    #[serde(rename = "forward")]
    Forward,
    /// b -> a only.
    #[serde(rename = "reverse")]
    Reverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Intersection {
    pub id: usize,
    pub pos: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub a: usize,
    pub b: usize,
    pub length_m: f64,
    pub dir: Directionality,
}

impl Segment {
    pub fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }

    /// Whether the segment may be driven starting at `from`.
    pub fn allows_from(&self, from: usize) -> bool {
        match self.dir {
            Directionality::TwoWay => true,
            Directionality::Forward => from == self.a,
            Directionality::Reverse => from == self.b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn area_km2(&self) -> f64 {
        (self.max_x - self.min_x) * (self.max_y - self.min_y) * 1e-6
    }

    pub fn diagonal_m(&self) -> f64 {
        (self.max_x - self.min_x).hypot(self.max_y - self.min_y)
    }
}

/// An incident segment seen from one of its end nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub node: usize,
    pub edge: usize,
}

#[derive(Debug, Clone)]
pub struct RoadNetwork {
    pub nodes: Vec<Intersection>,
    pub edges: Vec<Segment>,
    pub bounds: Bounds,
    pub block_range: (f64, f64),
    adjacency: Vec<Vec<Link>>,
}

impl PartialEq for RoadNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.bounds == other.bounds
            && self.block_range == other.block_range
    }
}

impl RoadNetwork {
    /// Builds a network from raw parts, deriving segment lengths and adjacency.
    pub fn from_parts(
        nodes: Vec<Intersection>,
        edges: Vec<(usize, usize, Directionality)>,
        bounds: Bounds,
        block_range: (f64, f64),
    ) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::config(format!("node id {} at index {i}", n.id)));
            }
        }
        let mut segs = Vec::with_capacity(edges.len());
        for (a, b, dir) in edges {
            if a >= nodes.len() || b >= nodes.len() || a == b {
                return Err(Error::config(format!("bad segment ({a}, {b})")));
            }
            segs.push(Segment {
                a,
                b,
                length_m: (nodes[b].pos - nodes[a].pos).norm(),
                dir,
            });
        }
        let mut net = RoadNetwork {
            nodes,
            edges: segs,
            bounds,
            block_range,
            adjacency: Vec::new(),
        };
        net.rebuild_adjacency();
        Ok(net)
    }

    fn rebuild_adjacency(&mut self) {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (e, s) in self.edges.iter().enumerate() {
            adj[s.a].push(Link { node: s.b, edge: e });
            adj[s.b].push(Link { node: s.a, edge: e });
        }
        self.adjacency = adj;
    }

    pub fn links(&self, node: usize) -> &[Link] {
        &self.adjacency[node]
    }

    pub fn arity(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn pos(&self, node: usize) -> Vec2 {
        self.nodes[node].pos
    }

    /// Links that may be driven out of `node`.
    pub fn outgoing(&self, node: usize) -> impl Iterator<Item = Link> + '_ {
        self.adjacency[node]
            .iter()
            .copied()
            .filter(move |l| self.edges[l.edge].allows_from(node))
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a].iter().find(|l| l.node == b).map(|l| l.edge)
    }

    pub fn link_bearing(&self, from: usize, to: usize) -> f64 {
        bearing(self.pos(to) - self.pos(from))
    }

    pub fn total_length_m(&self) -> f64 {
        self.edges.iter().map(|e| e.length_m).sum()
    }

    pub fn area_km2(&self) -> f64 {
        self.bounds.area_km2()
    }

    /// Nodes reachable from `start` along permitted directions.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(n) = queue.pop_front() {
            for l in self.outgoing(n) {
                if !seen[l.node] {
                    seen[l.node] = true;
                    queue.push_back(l.node);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapParams {
    pub area_km2: f64,
    pub block_min_m: f64,
    pub block_max_m: f64,
    pub dead_end_fraction: f64,
    pub one_way_fraction: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams {
            area_km2: 4.0,
            block_min_m: 50.0,
            block_max_m: 300.0,
            dead_end_fraction: 0.05,
            one_way_fraction: 0.05,
        }
    }
}

impl MapParams {
    pub fn validate(&self) -> Result<()> {
        if !(1.0..=100.0).contains(&self.area_km2) {
            return Err(Error::config(format!(
                "map area {} km² outside [1, 100]",
                self.area_km2
            )));
        }
        if !(self.block_min_m >= 50.0
            && self.block_max_m <= 300.0
            && self.block_min_m <= self.block_max_m)
        {
            return Err(Error::config(format!(
                "block range [{}, {}] m not inside [50, 300]",
                self.block_min_m, self.block_max_m
            )));
        }
        if !(0.0..1.0).contains(&self.dead_end_fraction) {
            return Err(Error::config("dead-end fraction must lie in [0, 1)"));
        }
        // A fully one-way map is a legal (if unfriendly) configuration.
        if !(0.0..=1.0).contains(&self.one_way_fraction) {
            return Err(Error::config("one-way fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

const TILE_EPS: f64 = 1e-6;

/// Splits `side` into spacings within `[min, max]`, drawn i.i.d. except for the closing ones.
fn tile_spacings(side: f64, min: f64, max: f64, rng: &mut SimRng) -> Result<Vec<f64>> {
    if side + TILE_EPS < min {
        return Err(Error::config(format!(
            "map side {side:.1} m is shorter than the minimum block {min} m"
        )));
    }
    for _ in 0..64 {
        let mut out = Vec::new();
        let mut rem = side;
        loop {
            if rem <= max + TILE_EPS {
                if rem >= min - TILE_EPS {
                    out.push(rem);
                    return Ok(out);
                }
                if rem <= TILE_EPS {
                    return Ok(out);
                }
                // Remainder shorter than a block: absorb it into the previous spacing.
                let Some(prev) = out.pop() else { break };
                let total = prev + rem;
                if total <= max + TILE_EPS {
                    out.push(total);
                    return Ok(out);
                }
                if total / 2.0 >= min - TILE_EPS {
                    out.push(total / 2.0);
                    out.push(total / 2.0);
                    return Ok(out);
                }
                break;
            }
            let s = if max > min {
                rng.random_range(min..=max)
            } else {
                min
            };
            out.push(s);
            rem -= s;
        }
    }
    Err(Error::config(format!(
        "cannot tile {side:.1} m with blocks in [{min}, {max}] m"
    )))
}

fn cumulative(spacings: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for s in spacings {
        acc += s;
        out.push(acc);
    }
    out
}

fn connected(n_nodes: usize, edges: &[(usize, usize)], alive: &[bool]) -> bool {
    let mut adj = vec![Vec::new(); n_nodes];
    for (i, &(a, b)) in edges.iter().enumerate() {
        if alive[i] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n_nodes];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(n) = stack.pop() {
        for &m in &adj[n] {
            if !seen[m] {
                seen[m] = true;
                count += 1;
                stack.push(m);
            }
        }
    }
    count == n_nodes
}

/// Generates a gridded road network. Identical `(params, seed)` give identical networks.
pub fn generate_map(params: &MapParams, seed: u64) -> Result<RoadNetwork> {
    params.validate()?;
    let mut rng = rng_from(seed);
    let side = params.area_km2.sqrt() * 1000.0;
    let xs = cumulative(&tile_spacings(side, params.block_min_m, params.block_max_m, &mut rng)?);
    let ys = cumulative(&tile_spacings(side, params.block_min_m, params.block_max_m, &mut rng)?);
    let (nx, ny) = (xs.len(), ys.len());
    if nx < 2 || ny < 2 {
        return Err(Error::config("grid needs at least two rows and columns"));
    }

    let idx = |i: usize, j: usize| j * nx + i;
    let nodes: Vec<Intersection> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (i, j)))
        .map(|(i, j)| Intersection {
            id: idx(i, j),
            pos: Vec2::new(xs[i], ys[j]),
        })
        .collect();

    let mut pairs = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            if i + 1 < nx {
                pairs.push((idx(i, j), idx(i + 1, j)));
            }
            if j + 1 < ny {
                pairs.push((idx(i, j), idx(i, j + 1)));
            }
        }
    }
    let mut alive = vec![true; pairs.len()];

    // Dead ends: keep one random incident segment of a node, provided the grid stays connected.
    let n_dead = (params.dead_end_fraction * nodes.len() as f64).round() as usize;
    if n_dead > 0 {
        let mut incident = vec![Vec::new(); nodes.len()];
        for (e, &(a, b)) in pairs.iter().enumerate() {
            incident[a].push(e);
            incident[b].push(e);
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.shuffle(&mut rng);
        let mut made = 0;
        for n in order {
            if made == n_dead {
                break;
            }
            let live: Vec<usize> = incident[n].iter().copied().filter(|&e| alive[e]).collect();
            if live.len() < 2 {
                continue;
            }
            let keep = live[rng.random_range(0..live.len())];
            let removed: Vec<usize> = live.into_iter().filter(|&e| e != keep).collect();
            for &e in &removed {
                alive[e] = false;
            }
            if connected(nodes.len(), &pairs, &alive) {
                made += 1;
            } else {
                for &e in &removed {
                    alive[e] = true;
                }
            }
        }
    }

    let mut edges: Vec<(usize, usize, Directionality)> = pairs
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(&(a, b), _)| (a, b, Directionality::TwoWay))
        .collect();

    let n_oneway = (params.one_way_fraction * edges.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(&mut rng);
    for &e in order.iter().take(n_oneway) {
        edges[e].2 = if rng.random_bool(0.5) {
            Directionality::Forward
        } else {
            Directionality::Reverse
        };
    }

    RoadNetwork::from_parts(
        nodes,
        edges,
        Bounds {
            min_x: 0.0,
            min_y: 0.0,
            max_x: xs[nx - 1],
            max_y: ys[ny - 1],
        },
        (params.block_min_m, params.block_max_m),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landmark {
    pub id: usize,
    pub pos: Vec2,
    /// Segment the landmark sits on.
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub entries: Vec<Landmark>,
    pub density_per_km2: f64,
}

impl LandmarkSet {
    pub fn empty() -> Self {
        LandmarkSet {
            entries: Vec::new(),
            density_per_km2: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Scatters `round(density × area)` landmarks uniformly over total road length.
///
/// Positions are drawn sequentially from the seeded stream, so for a fixed seed the set at a
/// lower density is a prefix of the set at a higher density.
pub fn place_landmarks(net: &RoadNetwork, density_per_km2: f64, seed: u64) -> Result<LandmarkSet> {
    if !(density_per_km2 >= 0.0) {
        return Err(Error::config("landmark density must be nonnegative"));
    }
    let count = (density_per_km2 * net.area_km2()).round() as usize;
    let mut rng = rng_from(seed);
    let mut cum = Vec::with_capacity(net.edges.len());
    let mut acc = 0.0;
    for e in &net.edges {
        acc += e.length_m;
        cum.push(acc);
    }
    let entries = (0..count)
        .map(|id| {
            let s = rng.random_range(0.0..acc);
            let edge = cum.partition_point(|&c| c <= s).min(net.edges.len() - 1);
            let seg = &net.edges[edge];
            let start = if edge == 0 { 0.0 } else { cum[edge - 1] };
            let t = ((s - start) / seg.length_m).clamp(0.0, 1.0);
            let pos = net.pos(seg.a) + (net.pos(seg.b) - net.pos(seg.a)) * t;
            Landmark { id, pos, edge }
        })
        .collect();
    Ok(LandmarkSet {
        entries,
        density_per_km2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioEndpoints {
    pub start_node: usize,
    /// Node the vehicle first drives toward.
    pub first_node: usize,
    pub start: Vec2,
    pub start_heading: f64,
    pub goal_node: usize,
    pub goal: Vec2,
}

pub const DEFAULT_MAX_ENDPOINT_ATTEMPTS: usize = 2000;

/// Default minimum start/goal separation: a quarter of the map diagonal.
pub fn default_min_separation(net: &RoadNetwork) -> f64 {
    0.25 * net.bounds.diagonal_m()
}

/// Samples a start node with an initial heading along a permitted segment, and a goal node
/// reachable from it, at least `min_separation_m` apart.
pub fn sample_endpoints(net: &RoadNetwork, seed: u64, min_separation_m: f64) -> Result<ScenarioEndpoints> {
    let mut rng = rng_from(seed);
    sample_endpoints_with(net, &mut rng, min_separation_m, f64::INFINITY, DEFAULT_MAX_ENDPOINT_ATTEMPTS)
}

/// As [`sample_endpoints`], with the start/goal distance restricted to
/// `[min_separation_m, max_separation_m]`.
pub fn sample_endpoints_with(
    net: &RoadNetwork,
    rng: &mut SimRng,
    min_separation_m: f64,
    max_separation_m: f64,
    max_attempts: usize,
) -> Result<ScenarioEndpoints> {
    let n = net.nodes.len();
    for _ in 0..max_attempts {
        let s = rng.random_range(0..n);
        let g = rng.random_range(0..n);
        let sep = (net.pos(s) - net.pos(g)).norm();
        if s == g || sep < min_separation_m || sep > max_separation_m {
            continue;
        }
        let exits: Vec<Link> = net.outgoing(s).collect();
        if exits.is_empty() {
            continue;
        }
        let first = exits[rng.random_range(0..exits.len())];
        if first.node != g && !net.reachable_from(first.node)[g] {
            continue;
        }
        return Ok(ScenarioEndpoints {
            start_node: s,
            first_node: first.node,
            start: net.pos(s),
            start_heading: net.link_bearing(s, first.node),
            goal_node: g,
            goal: net.pos(g),
        });
    }
    Err(Error::SamplingExhausted {
        attempts: max_attempts,
    })
}

/// Samples a new goal reachable from `from_node`, used when chaining goals in range studies.
pub fn sample_goal_from(
    net: &RoadNetwork,
    rng: &mut SimRng,
    from_node: usize,
    min_separation_m: f64,
    max_attempts: usize,
) -> Option<usize> {
    let reach = net.reachable_from(from_node);
    let here = net.pos(from_node);
    (0..max_attempts).find_map(|_| {
        let g = rng.random_range(0..net.nodes.len());
        (g != from_node && reach[g] && (net.pos(g) - here).norm() >= min_separation_m).then_some(g)
    })
}
