//! Directed road network with typed links and loop-free route enumeration.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("link `{link}` references unknown node `{node}`")]
    UnknownNode { link: String, node: String },
    #[error("link `{0}` starts and ends at the same node")]
    SelfLoop(String),
    #[error("link `{link}` has non-positive length {length}")]
    NonPositiveLength { link: String, length: f64 },
    #[error("link `{link}` has non-positive speed limit {speed}")]
    NonPositiveSpeed { link: String, speed: f64 },
    #[error("link `{link}` has an invalid signal: {reason}")]
    InvalidSignal { link: String, reason: String },
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("links `{0}` and `{1}` are not contiguous")]
    NotContiguous(String, String),
    #[error("route is empty or repeats a link")]
    InvalidRoute,
}

/// Traffic control at the downstream end of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Control {
    #[default]
    None,
    StopSign,
    Signal {
        /// Cycle length [s].
        cycle: f64,
        /// Share of the cycle that is green, in (0, 1).
        green_fraction: f64,
        /// Phase offset [s] in [0, cycle).
        #[serde(default)]
        offset: f64,
    },
}

impl Control {
    pub fn is_signal(&self) -> bool {
        matches!(self, Control::Signal { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Meters.
    pub length: f64,
    /// m/s.
    pub speed_limit: f64,
    #[serde(default)]
    pub control: Control,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct NetworkSpec {
    pub nodes: Vec<String>,
    pub links: Vec<LinkSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub speed_limit: f64,
    pub control: Control,
}

/// Validated network. Nodes and links are stored sorted by id, so every
/// index-based ordering agrees with the lexicographic id ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<String>,
    links: Vec<Link>,
    link_index: HashMap<String, usize>,
    out_links: Vec<Vec<usize>>,
}

/// Ordered, contiguous, link-indexed path through a [`Network`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Route {
    links: Vec<usize>,
}

/// One link of a route placed on the route's distance axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteSegment {
    pub link: usize,
    /// Distance from route start to the upstream end of the link [m].
    pub start: f64,
    /// Distance from route start to the downstream end (stop line) [m].
    pub end: f64,
    pub speed_limit: f64,
    pub control: Control,
}

impl Route {
    pub fn links(&self) -> &[usize] {
        &self.links
    }

    pub fn link_ids<'a>(&self, net: &'a Network) -> Vec<&'a str> {
        self.links
            .iter()
            .map(|&l| net.links[l].id.as_str())
            .collect()
    }

    /// Total length including the full origin and destination links.
    pub fn length(&self, net: &Network) -> f64 {
        self.links.iter().map(|&l| net.links[l].length).sum()
    }

    pub fn node_sequence(&self, net: &Network) -> Vec<usize> {
        let mut seq = vec![net.links[self.links[0]].from];
        seq.extend(self.links.iter().map(|&l| net.links[l].to));
        seq
    }

    pub fn segments(&self, net: &Network) -> Vec<RouteSegment> {
        let mut start = 0.0;
        self.links
            .iter()
            .map(|&l| {
                let link = &net.links[l];
                let seg = RouteSegment {
                    link: l,
                    start,
                    end: start + link.length,
                    speed_limit: link.speed_limit,
                    control: link.control,
                };
                start += link.length;
                seg
            })
            .collect()
    }

    fn key(&self, net: &Network) -> RouteKey {
        RouteKey {
            length: self.length(net),
            nodes: self.node_sequence(net),
            links: self.links.clone(),
        }
    }
}

/// Ranking key: length, then node sequence, then link sequence.
#[derive(Debug, Clone, PartialEq)]
struct RouteKey {
    length: f64,
    nodes: Vec<usize>,
    links: Vec<usize>,
}

impl Eq for RouteKey {}

impl Ord for RouteKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.length
            .total_cmp(&other.length)
            .then_with(|| self.nodes.cmp(&other.nodes))
            .then_with(|| self.links.cmp(&other.links))
    }
}

impl PartialOrd for RouteKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Network {
    pub fn build(spec: &NetworkSpec) -> Result<Self, NetworkError> {
        let mut nodes = spec.nodes.clone();
        nodes.sort();
        if let Some(w) = nodes.windows(2).find(|w| w[0] == w[1]) {
            return Err(NetworkError::DuplicateNode(w[0].clone()));
        }
        let node_index: HashMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();

        let mut specs: Vec<&LinkSpec> = spec.links.iter().collect();
        specs.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = specs.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(NetworkError::DuplicateLink(w[0].id.clone()));
        }

        let mut links = Vec::with_capacity(specs.len());
        for s in specs {
            let lookup = |node: &str| {
                node_index
                    .get(node)
                    .copied()
                    .ok_or_else(|| NetworkError::UnknownNode {
                        link: s.id.clone(),
                        node: node.to_string(),
                    })
            };
            let from = lookup(&s.from)?;
            let to = lookup(&s.to)?;
            if from == to {
                return Err(NetworkError::SelfLoop(s.id.clone()));
            }
            if !(s.length > 0.0 && s.length.is_finite()) {
                return Err(NetworkError::NonPositiveLength {
                    link: s.id.clone(),
                    length: s.length,
                });
            }
            if !(s.speed_limit > 0.0 && s.speed_limit.is_finite()) {
                return Err(NetworkError::NonPositiveSpeed {
                    link: s.id.clone(),
                    speed: s.speed_limit,
                });
            }
            if let Control::Signal {
                cycle,
                green_fraction,
                offset,
            } = s.control
            {
                let reason = if !(cycle > 0.0 && cycle.is_finite()) {
                    Some(format!("cycle {cycle} must be positive"))
                } else if !(green_fraction > 0.0 && green_fraction < 1.0) {
                    Some(format!("green fraction {green_fraction} outside (0, 1)"))
                } else if !(0.0..cycle).contains(&offset) {
                    Some(format!("offset {offset} outside [0, {cycle})"))
                } else {
                    None
                };
                if let Some(reason) = reason {
                    return Err(NetworkError::InvalidSignal {
                        link: s.id.clone(),
                        reason,
                    });
                }
            }
            links.push(Link {
                id: s.id.clone(),
                from,
                to,
                length: s.length,
                speed_limit: s.speed_limit,
                control: s.control,
            });
        }

        let mut out_links = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            out_links[l.from].push(i);
        }
        let link_index = links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
        Ok(Self {
            nodes,
            links,
            link_index,
            out_links,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, index: usize) -> &Link {
        &self.links[index]
    }

    pub fn link_by_id(&self, id: &str) -> Result<usize, NetworkError> {
        self.link_index
            .get(id)
            .copied()
            .ok_or_else(|| NetworkError::UnknownLink(id.to_string()))
    }

    /// Builds a route from link ids, checking contiguity and link uniqueness.
    pub fn route_from_ids<S: AsRef<str>>(&self, ids: &[S]) -> Result<Route, NetworkError> {
        let links = ids
            .iter()
            .map(|id| self.link_by_id(id.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        if links.is_empty() || links.iter().collect::<HashSet<_>>().len() != links.len() {
            return Err(NetworkError::InvalidRoute);
        }
        for w in links.windows(2) {
            if self.links[w[0]].to != self.links[w[1]].from {
                return Err(NetworkError::NotContiguous(
                    self.links[w[0]].id.clone(),
                    self.links[w[1]].id.clone(),
                ));
            }
        }
        Ok(Route { links })
    }

    /// Up to `p` loop-free routes from origin link `o` to destination link
    /// `d`, ordered by total length with ties broken lexicographically by node
    /// then link sequence. Deviation-path enumeration in the style of Yen.
    pub fn k_shortest_routes(
        &self,
        o: &str,
        d: &str,
        p: usize,
    ) -> Result<Vec<Route>, NetworkError> {
        let o = self.link_by_id(o)?;
        let d = self.link_by_id(d)?;
        if p == 0 {
            return Ok(Vec::new());
        }
        if o == d {
            return Ok(vec![Route { links: vec![o] }]);
        }

        let start = self.links[o].to;
        let target = self.links[d].from;
        let mut banned_nodes: HashSet<usize> = HashSet::new();
        banned_nodes.insert(self.links[o].from);
        banned_nodes.insert(self.links[d].to);
        if banned_nodes.contains(&start) || banned_nodes.contains(&target) {
            return Ok(Vec::new());
        }
        let banned_links: HashSet<usize> = [o, d].into_iter().collect();

        let Some(first) = self.best_path(start, target, &banned_nodes, &banned_links) else {
            return Ok(Vec::new());
        };
        let wrap = |mid: Vec<usize>| {
            let mut links = Vec::with_capacity(mid.len() + 2);
            links.push(o);
            links.extend(mid);
            links.push(d);
            Route { links }
        };

        let mut found: Vec<Route> = vec![wrap(first)];
        let mut candidates: BTreeSet<RouteKey> = BTreeSet::new();
        while found.len() < p {
            let last = found.last().unwrap().clone();
            let nodes = last.node_sequence(self);
            // Spur at every node from the head of `o` up to the tail of `d`.
            for i in 1..nodes.len() - 1 {
                let spur = nodes[i];
                let root = &last.links[..i];
                let mut ban_nodes = banned_nodes.clone();
                ban_nodes.extend(nodes[..i].iter().copied());
                let mut ban_links = banned_links.clone();
                let mut d_removed = false;
                for r in &found {
                    if r.links.len() > i && r.links[..i] == *root {
                        if r.links[i] == d {
                            d_removed = true;
                        }
                        ban_links.insert(r.links[i]);
                    }
                }
                let spur_mid = if spur == target {
                    if d_removed {
                        None
                    } else {
                        Some(Vec::new())
                    }
                } else {
                    self.best_path(spur, target, &ban_nodes, &ban_links)
                };
                let Some(spur_mid) = spur_mid else {
                    continue;
                };
                let mut links = root.to_vec();
                links.extend(spur_mid);
                links.push(d);
                let route = Route { links };
                if !found.contains(&route) {
                    candidates.insert(route.key(self));
                }
            }
            let Some(next) = candidates.pop_first() else {
                break;
            };
            found.push(Route { links: next.links });
        }
        Ok(found)
    }

    /// Shortest (then lexicographically smallest) link path from `from` to
    /// `to` avoiding the given nodes and links. An empty path when `from == to`.
    fn best_path(
        &self,
        from: usize,
        to: usize,
        banned_nodes: &HashSet<usize>,
        banned_links: &HashSet<usize>,
    ) -> Option<Vec<usize>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut settled = vec![false; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        heap.push(Reverse(RouteKey {
            length: 0.0,
            nodes: vec![from],
            links: Vec::new(),
        }));
        while let Some(Reverse(label)) = heap.pop() {
            let at = *label.nodes.last().unwrap();
            if settled[at] {
                continue;
            }
            settled[at] = true;
            if at == to {
                return Some(label.links);
            }
            for &l in &self.out_links[at] {
                let next = self.links[l].to;
                if settled[next]
                    || banned_links.contains(&l)
                    || banned_nodes.contains(&next)
                    || label.nodes.contains(&next)
                {
                    continue;
                }
                let mut nodes = label.nodes.clone();
                nodes.push(next);
                let mut links = label.links.clone();
                links.push(l);
                heap.push(Reverse(RouteKey {
                    length: label.length + self.links[l].length,
                    nodes,
                    links,
                }));
            }
        }
        None
    }
}
