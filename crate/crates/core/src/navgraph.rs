//! Walkable street graph and shortest-path queries.
//!
//! Street centerlines form a lattice. Entrances and zone entry points hang off
//! it through perpendicular connectors; objects inside a zone connect to the
//! zone's nearest entry point, other objects to the nearest street.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::citygen::SemanticCity;
use crate::geom::Vec2;

#[derive(Debug, Error)]
pub enum NavError {
    #[error("{0} is not connected to the street network")]
    Disconnected(Attachment),
    #[error("edge {0}-{1} refers to a missing node")]
    BadEdge(u32, u32),
}

/// A city entity that owns a node in the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Attachment {
    Entrance { building: u32, index: u32 },
    ZoneEntry { zone: u32, index: u32 },
    Object { object: u32 },
}

impl fmt::Display for Attachment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Attachment::Entrance { building, index } => write!(f, "entrance {index} of building {building}"),
            Attachment::ZoneEntry { zone, index } => write!(f, "entry point {index} of zone {zone}"),
            Attachment::Object { object } => write!(f, "object {object}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub length: f64,
}

/// Start or end of a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Node(u32),
    Attach(Attachment),
    /// Arbitrary ground point, joined to the graph at its nearest edge.
    Point(Vec2),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<u32>,
    pub polyline: Vec<Vec2>,
    pub length: f64,
}

impl Path {
    pub fn start(&self) -> Vec2 {
        self.polyline[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.polyline.last().unwrap()
    }

    /// Point at arclength `d`, clamped to `[0, length]`.
    pub fn position_at_distance(&self, d: f64) -> Vec2 {
        if !(d >= 0.0) {
            if d < 0.0 {
                log::debug!("path position {d} clamped to 0");
            }
            return self.start();
        }
        let mut left = d;
        for w in self.polyline.windows(2) {
            let seg = w[0].distance(w[1]);
            if left <= seg {
                return if seg > 0.0 { w[0].lerp(w[1], left / seg) } else { w[0] };
            }
            left -= seg;
        }
        if d > self.length + 1e-9 {
            log::debug!("path position {d} clamped to {}", self.length);
        }
        self.end()
    }
}

/// Single-source shortest-path tree.
#[derive(Debug)]
struct Tree {
    dist: Vec<f64>,
    prev: Vec<u32>,
}

const NONE: u32 = u32::MAX;

#[derive(PartialEq)]
struct Entry(f64, u32);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Serializable form of a graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphDump {
    pub nodes: Vec<Vec2>,
    pub edges: Vec<Edge>,
    pub attachments: Vec<(Attachment, u32)>,
}

pub struct NavGraph {
    nodes: Vec<Vec2>,
    edges: Vec<Edge>,
    adj: Vec<Vec<(u32, f64)>>,
    attachments: BTreeMap<Attachment, u32>,
    cache: Mutex<LruCache<u32, Arc<Tree>>>,
}

impl fmt::Debug for NavGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NavGraph")
            .field("nodes", &self.nodes.len())
            .field("edges", &self.edges.len())
            .field("attachments", &self.attachments.len())
            .finish()
    }
}

const CACHE_TREES: usize = 512;

/// Node deduplication by rounded position.
struct Builder {
    nodes: Vec<Vec2>,
    index: HashMap<(i64, i64), u32>,
    edges: Vec<Edge>,
}

impl Builder {
    fn node(&mut self, p: Vec2) -> u32 {
        let key = ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64);
        *self.index.entry(key).or_insert_with(|| {
            self.nodes.push(p);
            self.nodes.len() as u32 - 1
        })
    }

    fn edge(&mut self, a: u32, b: u32) {
        if a != b {
            let length = self.nodes[a as usize].distance(self.nodes[b as usize]);
            self.edges.push(Edge { a: a.min(b), b: a.max(b), length });
        }
    }
}

impl NavGraph {
    /// Builds the graph of a city.
    pub fn build(city: &SemanticCity) -> Result<Self, NavError> {
        let streets = &city.streets;
        // points where each street gets a node
        let mut stops: Vec<Vec<Vec2>> = streets.iter().map(|s| vec![s.a, s.b]).collect();
        for (i, s) in streets.iter().enumerate() {
            for t in streets {
                if let Some(p) = crossing(s.a, s.b, t.a, t.b) {
                    stops[i].push(p);
                }
            }
        }
        let nearest_street = |p: Vec2| -> (usize, Vec2) {
            let mut best = (0, p.project_on_segment(streets[0].a, streets[0].b));
            let mut best_d = p.distance(best.1);
            for (i, s) in streets.iter().enumerate().skip(1) {
                let q = p.project_on_segment(s.a, s.b);
                let d = p.distance(q);
                if d < best_d - 1e-12 {
                    best = (i, q);
                    best_d = d;
                }
            }
            best
        };

        // street-side attachments: (attachment, position, street, foot)
        let mut street_attach: Vec<(Attachment, Vec2, Vec2)> = Vec::new();
        for b in &city.buildings {
            for (i, e) in b.entrances.iter().enumerate() {
                street_attach.push((Attachment::Entrance { building: b.id, index: i as u32 }, e.position, Vec2::default()));
            }
        }
        for z in &city.zones {
            for (i, p) in z.entry_points.iter().enumerate() {
                street_attach.push((Attachment::ZoneEntry { zone: z.id, index: i as u32 }, *p, Vec2::default()));
            }
        }
        let mut zone_objects = Vec::new();
        for o in &city.objects {
            let zone = o.zone_id.and_then(|z| city.zones.get(z as usize)).filter(|z| !z.entry_points.is_empty());
            match zone {
                Some(z) => zone_objects.push((o.id, o.position, z.id)),
                None => street_attach.push((Attachment::Object { object: o.id }, o.position, Vec2::default())),
            }
        }
        for a in &mut street_attach {
            if streets.is_empty() {
                break;
            }
            let (i, foot) = nearest_street(a.1);
            a.2 = foot;
            stops[i].push(foot);
        }

        let mut g = Builder { nodes: Vec::new(), index: HashMap::new(), edges: Vec::new() };
        for (i, s) in streets.iter().enumerate() {
            let dir = s.b - s.a;
            let pts = &mut stops[i];
            pts.sort_by(|p, q| (*p - s.a).dot(dir).total_cmp(&(*q - s.a).dot(dir)));
            let ids: Vec<u32> = pts.iter().map(|p| g.node(*p)).collect();
            for w in ids.windows(2) {
                g.edge(w[0], w[1]);
            }
        }
        let mut attachments = BTreeMap::new();
        for (att, p, foot) in &street_attach {
            let n = g.node(*p);
            if !streets.is_empty() {
                let f = g.node(*foot);
                g.edge(n, f);
            }
            attachments.insert(*att, n);
        }
        for (object, p, zone) in zone_objects {
            let z = &city.zones[zone as usize];
            let (idx, _) = z.entry_points.iter().enumerate().min_by(|a, b| p.distance(*a.1).total_cmp(&p.distance(*b.1))).unwrap();
            let entry = attachments[&Attachment::ZoneEntry { zone, index: idx as u32 }];
            let n = g.node(p);
            g.edge(n, entry);
            attachments.insert(Attachment::Object { object }, n);
        }
        g.edges.sort_by_key(|x| (x.a, x.b));
        g.edges.dedup_by(|x, y| x.a == y.a && x.b == y.b);
        let graph = Self::assemble(g.nodes, g.edges, attachments)?;
        graph.check_connected()?;
        Ok(graph)
    }

    /// Graph from explicit parts. Edge lengths are recomputed from positions.
    pub fn from_parts(nodes: Vec<Vec2>, edges: &[(u32, u32)], attachments: Vec<(Attachment, u32)>) -> Result<Self, NavError> {
        let mut list = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            let (Some(pa), Some(pb)) = (nodes.get(a as usize), nodes.get(b as usize)) else {
                return Err(NavError::BadEdge(a, b));
            };
            list.push(Edge { a, b, length: pa.distance(*pb) });
        }
        Self::assemble(nodes, list, attachments.into_iter().collect())
    }

    fn assemble(nodes: Vec<Vec2>, edges: Vec<Edge>, attachments: BTreeMap<Attachment, u32>) -> Result<Self, NavError> {
        let mut adj = vec![Vec::new(); nodes.len()];
        for e in &edges {
            if e.a as usize >= nodes.len() || e.b as usize >= nodes.len() {
                return Err(NavError::BadEdge(e.a, e.b));
            }
            adj[e.a as usize].push((e.b, e.length));
            adj[e.b as usize].push((e.a, e.length));
        }
        for list in &mut adj {
            list.sort_by_key(|x| x.0);
        }
        Ok(NavGraph { nodes, edges, adj, attachments, cache: Mutex::new(LruCache::new(NonZeroUsize::new(CACHE_TREES).unwrap())) })
    }

    fn check_connected(&self) -> Result<(), NavError> {
        let Some((_, &root)) = self.attachments.iter().next() else {
            return Ok(());
        };
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([root]);
        seen[root as usize] = true;
        while let Some(n) = queue.pop_front() {
            for &(m, _) in &self.adj[n as usize] {
                if !seen[m as usize] {
                    seen[m as usize] = true;
                    queue.push_back(m);
                }
            }
        }
        match self.attachments.iter().find(|(_, &n)| !seen[n as usize]) {
            Some((a, _)) => Err(NavError::Disconnected(*a)),
            None => Ok(()),
        }
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_position(&self, n: u32) -> Vec2 {
        self.nodes[n as usize]
    }

    pub fn attachment(&self, a: Attachment) -> Option<u32> {
        self.attachments.get(&a).copied()
    }

    pub fn attachments(&self) -> impl Iterator<Item = (Attachment, u32)> + '_ {
        self.attachments.iter().map(|(a, n)| (*a, *n))
    }

    /// Node of a building's first entrance.
    pub fn building_node(&self, building: u32) -> Option<u32> {
        self.attachment(Attachment::Entrance { building, index: 0 })
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump { nodes: self.nodes.clone(), edges: self.edges.clone(), attachments: self.attachments().collect() }
    }

    fn tree(&self, src: u32) -> Arc<Tree> {
        if let Some(t) = self.cache.lock().unwrap().get(&src) {
            return t.clone();
        }
        let tree = Arc::new(self.dijkstra(src));
        self.cache.lock().unwrap().put(src, tree.clone());
        tree
    }

    fn dijkstra(&self, src: u32) -> Tree {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut prev = vec![NONE; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[src as usize] = 0.0;
        heap.push(Entry(0.0, src));
        while let Some(Entry(d, u)) = heap.pop() {
            if done[u as usize] {
                continue;
            }
            done[u as usize] = true;
            for &(v, w) in &self.adj[u as usize] {
                let nd = d + w;
                let cur = dist[v as usize];
                if nd < cur || (nd == cur && !done[v as usize] && u < prev[v as usize]) {
                    dist[v as usize] = nd;
                    prev[v as usize] = u;
                    heap.push(Entry(nd, v));
                }
            }
        }
        Tree { dist, prev }
    }

    /// Shortest distance between two nodes; `None` when unreachable.
    pub fn node_distance(&self, a: u32, b: u32) -> Option<f64> {
        let d = self.tree(a).dist[b as usize];
        d.is_finite().then_some(d)
    }

    fn node_route(&self, a: u32, b: u32) -> Option<(Vec<u32>, f64)> {
        let tree = self.tree(a);
        let d = tree.dist[b as usize];
        if !d.is_finite() {
            return None;
        }
        let mut nodes = vec![b];
        let mut cur = b;
        while cur != a {
            cur = tree.prev[cur as usize];
            nodes.push(cur);
        }
        nodes.reverse();
        Some((nodes, d))
    }

    /// Nearest edge to `p`: `(edge index, foot point)`.
    fn nearest_edge(&self, p: Vec2) -> Option<(usize, Vec2)> {
        let mut best: Option<(usize, Vec2, f64)> = None;
        for (i, e) in self.edges.iter().enumerate() {
            let q = p.project_on_segment(self.nodes[e.a as usize], self.nodes[e.b as usize]);
            let d = p.distance(q);
            if best.is_none_or(|b| d < b.2 - 1e-12) {
                best = Some((i, q, d));
            }
        }
        best.map(|b| (b.0, b.1))
    }

    /// Ways onto the graph from an endpoint: `(node, prefix polyline, cost)`.
    fn access(&self, e: Endpoint) -> Option<Vec<(u32, Vec<Vec2>, f64)>> {
        match e {
            Endpoint::Node(n) => ((n as usize) < self.nodes.len()).then(|| vec![(n, Vec::new(), 0.0)]),
            Endpoint::Attach(a) => self.attachment(a).map(|n| vec![(n, Vec::new(), 0.0)]),
            Endpoint::Point(p) => {
                if self.edges.is_empty() {
                    let n = (0..self.nodes.len() as u32)
                        .min_by(|a, b| p.distance(self.nodes[*a as usize]).total_cmp(&p.distance(self.nodes[*b as usize])))?;
                    return Some(vec![(n, vec![p], p.distance(self.nodes[n as usize]))]);
                }
                let (i, foot) = self.nearest_edge(p)?;
                let e = self.edges[i];
                let lead = p.distance(foot);
                let mut out = Vec::new();
                for n in [e.a, e.b] {
                    let np = self.nodes[n as usize];
                    let mut pre = vec![p];
                    if foot.distance(p) > 1e-12 && foot.distance(np) > 1e-12 {
                        pre.push(foot);
                    }
                    out.push((n, pre, lead + foot.distance(np)));
                }
                Some(out)
            }
        }
    }

    /// Shortest path between two endpoints; `None` when either endpoint does
    /// not attach or no route exists.
    pub fn shortest_path(&self, from: Endpoint, to: Endpoint) -> Option<Path> {
        let starts = self.access(from)?;
        let ends = self.access(to)?;
        let mut best: Option<Path> = None;
        // both points on the same edge: walk along it directly
        if let (Endpoint::Point(p), Endpoint::Point(q)) = (from, to) {
            if let (Some((i, fp)), Some((j, fq))) = (self.nearest_edge(p), self.nearest_edge(q)) {
                if i == j {
                    let mut poly = vec![p, fp, fq, q];
                    poly.dedup_by(|a, b| a.distance(*b) < 1e-12);
                    let length = p.distance(fp) + fp.distance(fq) + fq.distance(q);
                    best = Some(Path { nodes: Vec::new(), polyline: poly, length });
                }
            }
        }
        for (sn, spre, sc) in &starts {
            for (en, epre, ec) in &ends {
                let Some((nodes, d)) = self.node_route(*sn, *en) else {
                    continue;
                };
                let length = sc + d + ec;
                if best.as_ref().is_some_and(|b| b.length <= length) {
                    continue;
                }
                let mut polyline = spre.clone();
                polyline.extend(nodes.iter().map(|n| self.nodes[*n as usize]));
                polyline.extend(epre.iter().rev());
                polyline.dedup_by(|a, b| a.distance(*b) < 1e-12);
                best = Some(Path { nodes, polyline, length });
            }
        }
        best
    }

    /// Shortest walking distance between two endpoints.
    pub fn distance(&self, from: Endpoint, to: Endpoint) -> Option<f64> {
        match (from, to) {
            (Endpoint::Point(_), _) | (_, Endpoint::Point(_)) => self.shortest_path(from, to).map(|p| p.length),
            _ => {
                let a = self.access(from)?[0].0;
                let b = self.access(to)?[0].0;
                self.node_distance(a, b)
            }
        }
    }

    /// Walking distance between the first entrances of two buildings.
    pub fn building_distance(&self, a: u32, b: u32) -> Option<f64> {
        self.node_distance(self.building_node(a)?, self.building_node(b)?)
    }
}

/// Intersection point of two axis-aligned segments, if they cross.
fn crossing(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Option<Vec2> {
    let horizontal = |p: Vec2, q: Vec2| (p.y - q.y).abs() < 1e-12;
    let (h, v) = match (horizontal(a, b), horizontal(c, d)) {
        (true, false) => ((a, b), (c, d)),
        (false, true) => ((c, d), (a, b)),
        _ => return None,
    };
    let (x, z) = (v.0.x, h.0.y);
    let within = |t: f64, p: f64, q: f64| t >= p.min(q) - 1e-9 && t <= p.max(q) + 1e-9;
    (within(x, h.0.x, h.1.x) && within(z, v.0.y, v.1.y)).then_some(Vec2::new(x, z))
}

#[cfg(test)]
mod tests {
    use std::path::Path as FsPath;

    use proptest::prelude::*;

    use super::*;
    use crate::citygen::{generate_city, LayoutConfig};
    use crate::rulelang::RuleSet;

    fn floyd(n: usize, edges: &[(u32, u32)], pos: &[Vec2]) -> Vec<Vec<f64>> {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b) in edges {
            let w = pos[a as usize].distance(pos[b as usize]);
            let (a, b) = (a as usize, b as usize);
            d[a][b] = d[a][b].min(w);
            d[b][a] = d[b][a].min(w);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    fn two_shops() -> SemanticCity {
        let src = "@StartRule\nLot --> extrude(4) comp(f) { front: F | all: W }\nF --> split(x) { ~1: W | 1.5: D | ~1: W }\nD --> [ t('0.5, 0, 0) entrance(\"shop\") ] W\n";
        let rules = RuleSet::from_source(src, FsPath::new("."), None).unwrap();
        let cfg = LayoutConfig::new((1, 1), (2, 1), (12.0, 12.0), 8.0);
        generate_city(&cfg, &rules, 0).unwrap().city
    }

    #[test]
    fn entrances_on_one_street_walk_along_it() {
        let city = two_shops();
        let g = NavGraph::build(&city).unwrap();
        let (a, b) = (city.buildings[0].entrances[0].position, city.buildings[1].entrances[0].position);
        assert!((a.y - b.y).abs() < 1e-12, "both face north");
        // connector down to the centerline, along it, connector back up
        let expected = 4.0 + (a.x - b.x).abs() + 4.0;
        let d = g.building_distance(0, 1).unwrap();
        assert!((d - expected).abs() < 1e-9, "{d} vs {expected}");
        assert_eq!(g.building_distance(0, 0), Some(0.0));
    }

    #[test]
    fn attachment_lookup_returns_entrance_node() {
        let city = two_shops();
        let g = NavGraph::build(&city).unwrap();
        let n = g.building_node(1).unwrap();
        assert_eq!(g.node_position(n), city.buildings[1].entrances[0].position);
    }

    #[test]
    fn park_bench_connects_through_nearest_entry() {
        let rules = RuleSet::from_source(include_str!("../assets/shop_park.cga"), FsPath::new("."), None).unwrap();
        let cfg = LayoutConfig::new((1, 1), (1, 1), (12.0, 12.0), 8.0);
        let city = generate_city(&cfg, &rules, 0).unwrap().city;
        let g = NavGraph::build(&city).unwrap();
        let zone = &city.zones[0];
        for o in &city.objects {
            let node = g.attachment(Attachment::Object { object: o.id }).unwrap();
            let nearest = zone.entry_points.iter().map(|p| p.distance(o.position)).fold(f64::INFINITY, f64::min);
            let neighbours = &g.adj[node as usize];
            assert_eq!(neighbours.len(), 1);
            assert!((neighbours[0].1 - nearest).abs() < 1e-9);
        }
    }

    #[test]
    fn edge_lengths_are_euclidean() {
        let g = NavGraph::build(&two_shops()).unwrap();
        for e in g.edges() {
            let d = g.node_position(e.a).distance(g.node_position(e.b));
            assert!((e.length - d).abs() < 1e-6);
        }
    }

    #[test]
    fn path_positions() {
        let g = NavGraph::from_parts(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)], &[(0, 1)], vec![]).unwrap();
        let p = g.shortest_path(Endpoint::Node(0), Endpoint::Node(1)).unwrap();
        assert_eq!(p.length, 10.0);
        assert_eq!(p.position_at_distance(0.0), Vec2::new(0.0, 0.0));
        assert_eq!(p.position_at_distance(5.0), Vec2::new(5.0, 0.0));
        assert_eq!(p.position_at_distance(10.0), Vec2::new(10.0, 0.0));
        assert_eq!(p.position_at_distance(99.0), Vec2::new(10.0, 0.0));
        let same = g.shortest_path(Endpoint::Node(1), Endpoint::Node(1)).unwrap();
        assert_eq!(same.length, 0.0);
    }

    #[test]
    fn point_endpoints_ride_the_nearest_edge() {
        let g = NavGraph::from_parts(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 10.0)], &[(0, 1), (1, 2)], vec![])
            .unwrap();
        let p = g.shortest_path(Endpoint::Point(Vec2::new(2.0, 1.0)), Endpoint::Point(Vec2::new(11.0, 6.0))).unwrap();
        assert!((p.length - (1.0 + 8.0 + 6.0 + 1.0)).abs() < 1e-9);
        assert_eq!(p.start(), Vec2::new(2.0, 1.0));
        assert_eq!(p.end(), Vec2::new(11.0, 6.0));
        let q = g.shortest_path(Endpoint::Point(Vec2::new(2.0, 1.0)), Endpoint::Point(Vec2::new(5.0, -1.0))).unwrap();
        assert!((q.length - 5.0).abs() < 1e-9);
    }

    #[test]
    fn disconnected_attachment_is_reported() {
        let g = NavGraph::from_parts(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(5.0, 5.0)],
            &[(0, 1)],
            vec![(Attachment::Object { object: 0 }, 0), (Attachment::Object { object: 7 }, 2)],
        )
        .unwrap();
        let err = g.check_connected().unwrap_err();
        assert!(err.to_string().contains("object 7"));
        assert!(g.shortest_path(Endpoint::Node(0), Endpoint::Node(2)).is_none());
    }

    fn random_graph() -> impl Strategy<Value = (Vec<Vec2>, Vec<(u32, u32)>)> {
        (2usize..12).prop_flat_map(|n| {
            let nodes = proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0).prop_map(|(x, y)| Vec2::new(x, y)), n);
            let edges = proptest::collection::vec((0..n as u32, 0..n as u32), 0..30);
            (nodes, edges)
        })
    }

    proptest! {
        #[test]
        fn distances_match_floyd_warshall((nodes, edges) in random_graph()) {
            let g = NavGraph::from_parts(nodes.clone(), &edges, vec![]).unwrap();
            let oracle = floyd(nodes.len(), &edges, &nodes);
            let n = nodes.len() as u32;
            for a in 0..n {
                for b in 0..n {
                    let want = oracle[a as usize][b as usize];
                    match g.node_distance(a, b) {
                        Some(d) => prop_assert!((d - want).abs() < 1e-9),
                        None => prop_assert!(want.is_infinite()),
                    }
                    if let Some(p) = g.shortest_path(Endpoint::Node(a), Endpoint::Node(b)) {
                        let sum: f64 = p.polyline.windows(2).map(|w| w[0].distance(w[1])).sum();
                        prop_assert!((sum - p.length).abs() < 1e-9);
                        let back = g.node_distance(b, a).unwrap();
                        prop_assert!((back - p.length).abs() < 1e-9);
                    }
                    for c in 0..n {
                        if let (Some(ab), Some(bc), Some(ac)) = (g.node_distance(a, b), g.node_distance(b, c), g.node_distance(a, c)) {
                            prop_assert!(ac <= ab + bc + 1e-9);
                        }
                    }
                }
            }
        }

        #[test]
        fn position_along_path_is_monotone(d1 in 0.0f64..30.0, d2 in 0.0f64..30.0) {
            let g = NavGraph::from_parts(
                vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), Vec2::new(10.0, 20.0)],
                &[(0, 1), (1, 2)],
                vec![],
            ).unwrap();
            let p = g.shortest_path(Endpoint::Node(0), Endpoint::Node(2)).unwrap();
            let arc = |q: Vec2| if q.y == 0.0 { q.x } else { 10.0 + q.y };
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(arc(p.position_at_distance(lo)) < arc(p.position_at_distance(hi)));
        }
    }
}
