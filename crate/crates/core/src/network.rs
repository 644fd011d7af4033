//! Time-dependent multimodal network: nodes, links, hourly speed profiles,
//! link travel times and shortest paths.
//!
//! Speeds are sampled once when a vehicle enters a link and held for the
//! whole traversal. Hours without a profile entry run at free-flow speed.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path as FsPath;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Ordered, Scalar};

pub const HOURS_PER_DAY: usize = 24;
pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Road,
    Tunnel,
    Bike,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Road, Mode::Tunnel, Mode::Bike];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Road => "road",
            Mode::Tunnel => "tunnel",
            Mode::Bike => "bike",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "road" => Ok(Mode::Road),
            "tunnel" => Ok(Mode::Tunnel),
            "bike" => Ok(Mode::Bike),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node<T> {
    pub id: String,
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link<T> {
    pub id: String,
    pub from: String,
    pub to: String,
    pub length: T,
    pub freeflow_speed: T,
    pub mode: Mode,
}

/// Hourly speed overrides for one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile<T> {
    pub link_id: String,
    pub entries: Vec<(u8, T)>,
}

/// Which input table a validation error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Nodes,
    Links,
    Profiles,
}

impl Table {
    fn file_name(self) -> &'static str {
        match self {
            Table::Nodes => "nodes.csv",
            Table::Links => "links.csv",
            Table::Profiles => "speed_profiles.csv",
        }
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Table::Nodes => "node",
            Table::Links => "link",
            Table::Profiles => "speed profile",
        })
    }
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{table} #{index}: {reason}")]
    Invalid {
        table: Table,
        index: usize,
        reason: String,
    },
    #[error("{file}:{line}: {reason}")]
    Located {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("csv file {file}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("i/o on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown link `{0}`")]
    UnknownLink(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("negative or non-finite entry time {0}")]
    BadTime(f64),
    #[error("no {mode} path for {} pair(s): {}", pairs.len(), format_pairs(pairs))]
    Unreachable {
        mode: Mode,
        pairs: Vec<(String, String)>,
    },
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    let mut shown: Vec<String> = pairs
        .iter()
        .take(10)
        .map(|(a, b)| format!("{a}->{b}"))
        .collect();
    if pairs.len() > 10 {
        shown.push(format!("... ({} more)", pairs.len() - 10));
    }
    shown.join(", ")
}

fn invalid(table: Table, index: usize, reason: impl Into<String>) -> NetworkError {
    NetworkError::Invalid {
        table,
        index,
        reason: reason.into(),
    }
}

/// Immutable validated network.
#[derive(Debug, Clone)]
pub struct Network<T> {
    nodes: Vec<Node<T>>,
    links: Vec<Link<T>>,
    node_index: HashMap<String, usize>,
    link_index: HashMap<String, usize>,
    from_idx: Vec<usize>,
    to_idx: Vec<usize>,
    /// Outgoing link indices per node, ordered by link id.
    outgoing: Vec<Vec<usize>>,
    hourly: Vec<[Option<T>; HOURS_PER_DAY]>,
}

/// Result of a path query. Empty `links` means origin and destination coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Path<T> {
    pub nodes: Vec<String>,
    pub links: Vec<String>,
    pub seconds: T,
    pub meters: T,
}

/// Single-source search labels.
#[derive(Debug, Clone)]
pub struct Reach<T> {
    pub arrival: Vec<Option<T>>,
    pub meters: Vec<T>,
    pub pred_link: Vec<Option<usize>>,
    depart: T,
}

impl<T: Scalar> Reach<T> {
    /// Travel seconds from the source to node `idx`.
    pub fn seconds(&self, idx: usize) -> Option<T> {
        self.arrival[idx].map(|a| a - self.depart)
    }

    pub fn meters(&self, idx: usize) -> Option<T> {
        self.arrival[idx].map(|_| self.meters[idx])
    }
}

impl<T: Scalar> Network<T> {
    /// Validates and indexes the parts of a network.
    pub fn new(
        nodes: Vec<Node<T>>,
        links: Vec<Link<T>>,
        profiles: Vec<SpeedProfile<T>>,
    ) -> Result<Self, NetworkError> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if !(node.x.is_finite() && node.y.is_finite()) {
                return Err(invalid(Table::Nodes, i, format!("node `{}` has non-finite coordinates", node.id)));
            }
            if node_index.insert(node.id.clone(), i).is_some() {
                return Err(invalid(Table::Nodes, i, format!("duplicate node id `{}`", node.id)));
            }
        }

        let mut link_index = HashMap::with_capacity(links.len());
        let mut from_idx = Vec::with_capacity(links.len());
        let mut to_idx = Vec::with_capacity(links.len());
        for (i, link) in links.iter().enumerate() {
            if link_index.insert(link.id.clone(), i).is_some() {
                return Err(invalid(Table::Links, i, format!("duplicate link id `{}`", link.id)));
            }
            let lookup = |id: &str| {
                node_index.get(id).copied().ok_or_else(|| {
                    invalid(Table::Links, i, format!("link `{}` references unknown node `{id}`", link.id))
                })
            };
            let from = lookup(&link.from)?;
            let to = lookup(&link.to)?;
            if from == to {
                return Err(invalid(Table::Links, i, format!("link `{}` is a self-loop on `{}`", link.id, link.from)));
            }
            if !(link.length > T::zero() && link.length.is_finite()) {
                return Err(invalid(Table::Links, i, format!("link `{}` has non-positive length {}", link.id, link.length)));
            }
            if !(link.freeflow_speed > T::zero() && link.freeflow_speed.is_finite()) {
                return Err(invalid(
                    Table::Links,
                    i,
                    format!("link `{}` has non-positive free-flow speed {}", link.id, link.freeflow_speed),
                ));
            }
            from_idx.push(from);
            to_idx.push(to);
        }

        let mut hourly = vec![[None; HOURS_PER_DAY]; links.len()];
        for (i, profile) in profiles.iter().enumerate() {
            let li = *link_index.get(&profile.link_id).ok_or_else(|| {
                invalid(Table::Profiles, i, format!("speed profile references unknown link `{}`", profile.link_id))
            })?;
            let cap = links[li].freeflow_speed * lit(2.0);
            for &(hour, speed) in &profile.entries {
                if hour as usize >= HOURS_PER_DAY {
                    return Err(invalid(Table::Profiles, i, format!("link `{}`: hour {hour} outside 0-23", profile.link_id)));
                }
                if !(speed > T::zero() && speed.is_finite()) {
                    return Err(invalid(
                        Table::Profiles,
                        i,
                        format!("link `{}` hour {hour}: non-positive speed {speed}", profile.link_id),
                    ));
                }
                if speed > cap {
                    return Err(invalid(
                        Table::Profiles,
                        i,
                        format!("link `{}` hour {hour}: speed {speed} exceeds twice the free-flow speed", profile.link_id),
                    ));
                }
                let slot = &mut hourly[li][hour as usize];
                if slot.is_some() {
                    return Err(invalid(
                        Table::Profiles,
                        i,
                        format!("link `{}` hour {hour}: duplicate speed entry", profile.link_id),
                    ));
                }
                *slot = Some(speed);
            }
        }

        let mut outgoing = vec![Vec::new(); nodes.len()];
        for (li, &from) in from_idx.iter().enumerate() {
            outgoing[from].push(li);
        }
        for out in &mut outgoing {
            out.sort_by(|&a, &b| links[a].id.cmp(&links[b].id));
        }

        Ok(Network {
            nodes,
            links,
            node_index,
            link_index,
            from_idx,
            to_idx,
            outgoing,
            hourly,
        })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn node_idx(&self, id: &str) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    pub fn link_idx(&self, id: &str) -> Option<usize> {
        self.link_index.get(id).copied()
    }

    pub fn node(&self, id: &str) -> Option<&Node<T>> {
        self.node_idx(id).map(|i| &self.nodes[i])
    }

    pub fn link(&self, id: &str) -> Option<&Link<T>> {
        self.link_idx(id).map(|i| &self.links[i])
    }

    /// Speed profiles in link order, one per link that has any entry.
    pub fn speed_profiles(&self) -> Vec<SpeedProfile<T>> {
        self.links
            .iter()
            .zip(&self.hourly)
            .filter_map(|(link, hours)| {
                let entries: Vec<(u8, T)> = hours
                    .iter()
                    .enumerate()
                    .filter_map(|(h, s)| s.map(|s| (h as u8, s)))
                    .collect();
                (!entries.is_empty()).then(|| SpeedProfile {
                    link_id: link.id.clone(),
                    entries,
                })
            })
            .collect()
    }

    /// True if any link of `mode` starts or ends at the node.
    pub fn touches_mode(&self, node_id: &str, mode: Mode) -> bool {
        let Some(n) = self.node_idx(node_id) else {
            return false;
        };
        self.links
            .iter()
            .enumerate()
            .any(|(li, l)| l.mode == mode && (self.from_idx[li] == n || self.to_idx[li] == n))
    }

    /// Euclidean distance between two nodes in meters.
    pub fn euclidean(&self, a: usize, b: usize) -> T {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        ((na.x - nb.x).powi(2) + (na.y - nb.y).powi(2)).sqrt()
    }

    /// Copy of the network with every link of `mode` running at `speed`.
    /// Profiles on those links are dropped.
    pub fn with_mode_speed(&self, mode: Mode, speed: T) -> Result<Self, NetworkError> {
        let links: Vec<Link<T>> = self
            .links
            .iter()
            .cloned()
            .map(|mut l| {
                if l.mode == mode {
                    l.freeflow_speed = speed;
                }
                l
            })
            .collect();
        let profiles = self
            .speed_profiles()
            .into_iter()
            .filter(|p| self.link(&p.link_id).map(|l| l.mode != mode).unwrap_or(false))
            .collect();
        Network::new(self.nodes.clone(), links, profiles)
    }

    /// Speed in effect on link `li` for a vehicle entering at `enter_time`.
    pub fn speed_at(&self, li: usize, enter_time: T) -> T {
        self.hourly[li][hour_of(enter_time)].unwrap_or(self.links[li].freeflow_speed)
    }

    #[inline]
    pub fn link_time_idx(&self, li: usize, enter_time: T) -> T {
        self.links[li].length / self.speed_at(li, enter_time)
    }

    #[inline]
    pub fn freeflow_time_idx(&self, li: usize) -> T {
        self.links[li].length / self.links[li].freeflow_speed
    }

    /// Seconds needed to traverse `link_id` when entering at `enter_time`
    /// (seconds since midnight; hours wrap every 24 h).
    pub fn travel_time(&self, link_id: &str, enter_time: T) -> Result<T, NetworkError> {
        let li = self
            .link_idx(link_id)
            .ok_or_else(|| NetworkError::UnknownLink(link_id.to_string()))?;
        if !(enter_time >= T::zero() && enter_time.is_finite()) {
            return Err(NetworkError::BadTime(crate::scalar::to_f64(enter_time)));
        }
        Ok(self.link_time_idx(li, enter_time))
    }

    /// Dijkstra from `source` over links of `mode`. With `time_dependent`
    /// each link is costed at its entry instant, otherwise at free flow.
    /// Stops once `target` is settled. Equal-time labels keep the
    /// predecessor link with the smaller id.
    pub fn search(
        &self,
        source: usize,
        depart: T,
        mode: Mode,
        time_dependent: bool,
        target: Option<usize>,
    ) -> Reach<T> {
        let n = self.nodes.len();
        let mut arrival: Vec<Option<T>> = vec![None; n];
        let mut meters = vec![T::zero(); n];
        let mut pred_link: Vec<Option<usize>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();

        arrival[source] = Some(depart);
        heap.push(Reverse((Ordered(depart), source)));

        while let Some(Reverse((Ordered(t), u))) = heap.pop() {
            if settled[u] {
                continue;
            }
            settled[u] = true;
            if target == Some(u) {
                break;
            }
            for &li in &self.outgoing[u] {
                let link = &self.links[li];
                if link.mode != mode {
                    continue;
                }
                let v = self.to_idx[li];
                if settled[v] {
                    continue;
                }
                let dt = if time_dependent {
                    self.link_time_idx(li, t)
                } else {
                    self.freeflow_time_idx(li)
                };
                let cand = t + dt;
                let better = match arrival[v] {
                    None => true,
                    Some(cur) if cand < cur => true,
                    Some(cur) if cand == cur => match pred_link[v] {
                        Some(p) => link.id < self.links[p].id,
                        None => false,
                    },
                    Some(_) => false,
                };
                if better {
                    arrival[v] = Some(cand);
                    meters[v] = meters[u] + link.length;
                    pred_link[v] = Some(li);
                    heap.push(Reverse((Ordered(cand), v)));
                }
            }
        }

        Reach {
            arrival,
            meters,
            pred_link,
            depart,
        }
    }

    /// Link indices from the search source to `target`, in travel order.
    pub fn trace(&self, reach: &Reach<T>, target: usize) -> Option<Vec<usize>> {
        reach.arrival[target]?;
        let mut links = Vec::new();
        let mut cur = target;
        while let Some(li) = reach.pred_link[cur] {
            links.push(li);
            cur = self.from_idx[li];
        }
        links.reverse();
        Some(links)
    }

    /// Minimal-time path between two nodes restricted to `mode`.
    /// Returns `Ok(None)` when the target is unreachable.
    pub fn shortest_path(
        &self,
        from: &str,
        to: &str,
        depart: T,
        mode: Mode,
        time_dependent: bool,
    ) -> Result<Option<Path<T>>, NetworkError> {
        let s = self.node_idx(from).ok_or_else(|| NetworkError::UnknownNode(from.to_string()))?;
        let t = self.node_idx(to).ok_or_else(|| NetworkError::UnknownNode(to.to_string()))?;
        if !(depart >= T::zero() && depart.is_finite()) {
            return Err(NetworkError::BadTime(crate::scalar::to_f64(depart)));
        }
        let reach = self.search(s, depart, mode, time_dependent, Some(t));
        Ok(self.path_from(&reach, s, t))
    }

    pub(crate) fn path_from(&self, reach: &Reach<T>, source: usize, target: usize) -> Option<Path<T>> {
        let links = self.trace(reach, target)?;
        let mut nodes = vec![self.nodes[source].id.clone()];
        nodes.extend(links.iter().map(|&li| self.nodes[self.to_idx[li]].id.clone()));
        Some(Path {
            nodes,
            links: links.iter().map(|&li| self.links[li].id.clone()).collect(),
            seconds: reach.seconds(target)?,
            meters: reach.meters(target)?,
        })
    }

    pub fn link_endpoints(&self, li: usize) -> (usize, usize) {
        (self.from_idx[li], self.to_idx[li])
    }

    /// Free-flow seconds and meters between every ordered pair of
    /// `locations`. Duplicate ids are allowed and share a row.
    pub fn travel_time_matrix(&self, locations: &[String], mode: Mode) -> Result<TravelMatrix<T>, NetworkError> {
        let idx: Vec<usize> = locations
            .iter()
            .map(|id| self.node_idx(id).ok_or_else(|| NetworkError::UnknownNode(id.clone())))
            .collect::<Result<_, _>>()?;
        let n = locations.len();
        let mut seconds = vec![T::zero(); n * n];
        let mut meters = vec![T::zero(); n * n];
        let mut missing = Vec::new();
        let mut cache: HashMap<usize, Reach<T>> = HashMap::new();
        for (i, &src) in idx.iter().enumerate() {
            let reach = cache
                .entry(src)
                .or_insert_with(|| self.search(src, T::zero(), mode, false, None));
            for (j, &dst) in idx.iter().enumerate() {
                match (reach.seconds(dst), reach.meters(dst)) {
                    (Some(s), Some(m)) => {
                        seconds[i * n + j] = s;
                        meters[i * n + j] = m;
                    }
                    _ => missing.push((locations[i].clone(), locations[j].clone())),
                }
            }
        }
        if !missing.is_empty() {
            return Err(NetworkError::Unreachable { mode, pairs: missing });
        }
        Ok(TravelMatrix::from_parts(locations.to_vec(), seconds, meters))
    }
}

#[inline]
pub fn hour_of<T: Scalar>(t: T) -> usize {
    let h = (t / lit(SECONDS_PER_HOUR)).floor().to_i64().unwrap_or(0);
    h.rem_euclid(HOURS_PER_DAY as i64) as usize
}

/// Dense square matrix of travel seconds and meters between named locations.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelMatrix<T> {
    locations: Vec<String>,
    index: HashMap<String, usize>,
    seconds: Vec<T>,
    meters: Vec<T>,
}

impl<T: Scalar> TravelMatrix<T> {
    /// Builds a matrix from row-major seconds and meters. For duplicate
    /// location ids the first occurrence is the lookup target.
    pub fn from_parts(locations: Vec<String>, seconds: Vec<T>, meters: Vec<T>) -> Self {
        let n = locations.len();
        assert_eq!(seconds.len(), n * n, "seconds must be n*n");
        assert_eq!(meters.len(), n * n, "meters must be n*n");
        let mut index = HashMap::with_capacity(n);
        for (i, id) in locations.iter().enumerate() {
            index.entry(id.clone()).or_insert(i);
        }
        TravelMatrix {
            locations,
            index,
            seconds,
            meters,
        }
    }

    /// Builds a matrix by evaluating `f(i, j) -> (seconds, meters)`.
    pub fn from_fn(locations: Vec<String>, mut f: impl FnMut(usize, usize) -> (T, T)) -> Self {
        let n = locations.len();
        let mut seconds = Vec::with_capacity(n * n);
        let mut meters = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (s, m) = if i == j { (T::zero(), T::zero()) } else { f(i, j) };
                seconds.push(s);
                meters.push(m);
            }
        }
        Self::from_parts(locations, seconds, meters)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[String] {
        &self.locations
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    #[inline]
    pub fn seconds(&self, i: usize, j: usize) -> T {
        self.seconds[i * self.locations.len() + j]
    }

    #[inline]
    pub fn meters(&self, i: usize, j: usize) -> T {
        self.meters[i * self.locations.len() + j]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRow<T> {
    id: String,
    x: T,
    y: T,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkRow<T> {
    id: String,
    from: String,
    to: String,
    length_m: T,
    freeflow_mps: T,
    mode: Mode,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow<T> {
    link_id: String,
    hour: u8,
    speed_mps: T,
}

fn read_rows<R, Row>(reader: R, table: Table) -> Result<Vec<Row>, NetworkError>
where
    R: Read,
    Row: for<'de> Deserialize<'de>,
{
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = rec.map_err(|e| NetworkError::Located {
            file: table.file_name().to_string(),
            // header is line 1
            line: e.position().map(|p| p.line() as usize).unwrap_or(i + 2),
            reason: e.to_string(),
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Loads and validates a network from the three CSV tables
/// (`nodes.csv`, `links.csv`, `speed_profiles.csv`).
pub fn load_network<T: Scalar>(
    nodes_source: impl Read,
    links_source: impl Read,
    profiles_source: impl Read,
) -> Result<Network<T>, NetworkError> {
    let nodes: Vec<NodeRow<T>> = read_rows(nodes_source, Table::Nodes)?;
    let links: Vec<LinkRow<T>> = read_rows(links_source, Table::Links)?;
    let profile_rows: Vec<ProfileRow<T>> = read_rows(profiles_source, Table::Profiles)?;

    // Group profile rows per link, remembering the first row of each group
    // so validation errors point at a line.
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, (usize, Vec<(u8, T)>)> = HashMap::new();
    let mut row_of_entry: HashMap<(String, u8), usize> = HashMap::new();
    for (i, row) in profile_rows.iter().enumerate() {
        let entry = grouped.entry(row.link_id.clone()).or_insert_with(|| {
            order.push(row.link_id.clone());
            (i, Vec::new())
        });
        entry.1.push((row.hour, row.speed_mps));
        row_of_entry.entry((row.link_id.clone(), row.hour)).or_insert(i);
    }
    let profiles: Vec<SpeedProfile<T>> = order
        .iter()
        .map(|id| SpeedProfile {
            link_id: id.clone(),
            entries: grouped[id].1.clone(),
        })
        .collect();
    let first_rows: Vec<usize> = order.iter().map(|id| grouped[id].0).collect();

    let nodes = nodes
        .into_iter()
        .map(|r| Node { id: r.id, x: r.x, y: r.y })
        .collect();
    let links = links
        .into_iter()
        .map(|r| Link {
            id: r.id,
            from: r.from,
            to: r.to,
            length: r.length_m,
            freeflow_speed: r.freeflow_mps,
            mode: r.mode,
        })
        .collect();

    Network::new(nodes, links, profiles).map_err(|e| match e {
        NetworkError::Invalid { table, index, reason } => {
            let row = match table {
                Table::Profiles => first_rows.get(index).copied().unwrap_or(index),
                _ => index,
            };
            NetworkError::Located {
                file: table.file_name().to_string(),
                line: row + 2,
                reason,
            }
        }
        other => other,
    })
}

/// Loads `nodes.csv`, `links.csv` and (optional) `speed_profiles.csv` from a directory.
pub fn load_network_dir<T: Scalar>(dir: &FsPath) -> Result<Network<T>, NetworkError> {
    let open = |name: &str| {
        let path = dir.join(name);
        File::open(&path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })
    };
    let nodes = open("nodes.csv")?;
    let links = open("links.csv")?;
    let profiles_path = dir.join("speed_profiles.csv");
    if profiles_path.exists() {
        load_network(nodes, links, open("speed_profiles.csv")?)
    } else {
        load_network(nodes, links, "link_id,hour,speed_mps\n".as_bytes())
    }
}

impl<T: Scalar> Network<T> {
    pub fn write_nodes_csv(&self, w: impl Write) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        for n in &self.nodes {
            wtr.serialize(NodeRow { id: n.id.clone(), x: n.x, y: n.y })?;
        }
        if self.nodes.is_empty() {
            wtr.write_record(["id", "x", "y"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_links_csv(&self, w: impl Write) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        for l in &self.links {
            wtr.serialize(LinkRow {
                id: l.id.clone(),
                from: l.from.clone(),
                to: l.to.clone(),
                length_m: l.length,
                freeflow_mps: l.freeflow_speed,
                mode: l.mode,
            })?;
        }
        if self.links.is_empty() {
            wtr.write_record(["id", "from", "to", "length_m", "freeflow_mps", "mode"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_profiles_csv(&self, w: impl Write) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["link_id", "hour", "speed_mps"])?;
        for p in self.speed_profiles() {
            for (h, s) in p.entries {
                wtr.write_record([p.link_id.clone(), h.to_string(), s.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Writes the three CSV tables into `dir`.
    pub fn write_dir(&self, dir: &FsPath) -> Result<(), NetworkError> {
        std::fs::create_dir_all(dir).map_err(|source| NetworkError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let create = |name: &str| {
            let path = dir.join(name);
            File::create(&path).map_err(|source| NetworkError::Io {
                path: path.display().to_string(),
                source,
            })
        };
        let csv_err = |file: &str| {
            let file = file.to_string();
            move |source| NetworkError::Csv { file, source }
        };
        self.write_nodes_csv(create("nodes.csv")?).map_err(csv_err("nodes.csv"))?;
        self.write_links_csv(create("links.csv")?).map_err(csv_err("links.csv"))?;
        self.write_profiles_csv(create("speed_profiles.csv")?)
            .map_err(csv_err("speed_profiles.csv"))?;
        Ok(())
    }

    /// Ids of nodes reachable from `from` in `mode`, including `from`.
    pub fn reachable_set(&self, from: usize, mode: Mode) -> HashSet<usize> {
        let reach = self.search(from, T::zero(), mode, false, None);
        (0..self.nodes.len()).filter(|&i| reach.arrival[i].is_some()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_net(profiles: Vec<SpeedProfile<f64>>) -> Network<f64> {
        let nodes = vec![
            Node { id: "A".into(), x: 0.0, y: 0.0 },
            Node { id: "B".into(), x: 1000.0, y: 0.0 },
        ];
        let links = vec![Link {
            id: "L".into(),
            from: "A".into(),
            to: "B".into(),
            length: 1000.0,
            freeflow_speed: 10.0,
            mode: Mode::Road,
        }];
        Network::new(nodes, links, profiles).unwrap()
    }

    #[test]
    fn freeflow_traversal_any_hour() {
        let net = line_net(vec![]);
        assert_eq!(net.links().len(), 1);
        for h in 0..30 {
            assert_eq!(net.travel_time("L", h as f64 * 3600.0).unwrap(), 100.0);
        }
    }

    #[test]
    fn profile_applies_by_entry_hour() {
        let net = line_net(vec![SpeedProfile {
            link_id: "L".into(),
            entries: vec![(8, 5.0)],
        }]);
        assert_eq!(net.travel_time("L", 8.0 * 3600.0).unwrap(), 200.0);
        assert_eq!(net.travel_time("L", 8.5 * 3600.0).unwrap(), 200.0);
        assert_eq!(net.travel_time("L", 8.0 * 3600.0 - 1.0).unwrap(), 100.0);
        // wraps after midnight
        assert_eq!(net.travel_time("L", 32.0 * 3600.0).unwrap(), 200.0);
    }

    #[test]
    fn unknown_link_is_error() {
        let net = line_net(vec![]);
        assert!(matches!(net.travel_time("nope", 0.0), Err(NetworkError::UnknownLink(_))));
    }

    #[test]
    fn csv_dangling_node_named() {
        let nodes = "id,x,y\nA,0,0\nB,1,0\n";
        let links = "id,from,to,length_m,freeflow_mps,mode\nL1,A,B,10,1,road\nL2,A,Z,10,1,road\n";
        let err = load_network::<f64>(nodes.as_bytes(), links.as_bytes(), "link_id,hour,speed_mps\n".as_bytes())
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("`Z`"), "{msg}");
        assert!(msg.contains("links.csv:3"), "{msg}");
    }

    #[test]
    fn csv_zero_profile_speed_rejected() {
        let nodes = "id,x,y\nA,0,0\nB,1,0\n";
        let links = "id,from,to,length_m,freeflow_mps,mode\nL1,A,B,10,1,road\n";
        let profiles = "link_id,hour,speed_mps\nL1,8,0\n";
        let err = load_network::<f64>(nodes.as_bytes(), links.as_bytes(), profiles.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("non-positive speed"), "{err}");
    }

    #[test]
    fn csv_rejects_duplicates_and_bad_values() {
        let p = "link_id,hour,speed_mps\n";
        let dup_node = "id,x,y\nA,0,0\nA,1,0\n";
        let links = "id,from,to,length_m,freeflow_mps,mode\n";
        assert!(load_network::<f64>(dup_node.as_bytes(), links.as_bytes(), p.as_bytes()).is_err());

        let nodes = "id,x,y\nA,0,0\nB,1,0\n";
        let zero_len = "id,from,to,length_m,freeflow_mps,mode\nL,A,B,0,1,road\n";
        assert!(load_network::<f64>(nodes.as_bytes(), zero_len.as_bytes(), p.as_bytes()).is_err());
        let self_loop = "id,from,to,length_m,freeflow_mps,mode\nL,A,A,5,1,road\n";
        assert!(load_network::<f64>(nodes.as_bytes(), self_loop.as_bytes(), p.as_bytes()).is_err());
        let fast = "link_id,hour,speed_mps\nL,3,2.5\n";
        let ok_link = "id,from,to,length_m,freeflow_mps,mode\nL,A,B,5,1,road\n";
        assert!(load_network::<f64>(nodes.as_bytes(), ok_link.as_bytes(), fast.as_bytes()).is_err());
        let dup_hour = "link_id,hour,speed_mps\nL,3,0.5\nL,3,0.6\n";
        assert!(load_network::<f64>(nodes.as_bytes(), ok_link.as_bytes(), dup_hour.as_bytes()).is_err());
        let bad_mode = "id,from,to,length_m,freeflow_mps,mode\nL,A,B,5,1,boat\n";
        assert!(load_network::<f64>(nodes.as_bytes(), bad_mode.as_bytes(), p.as_bytes()).is_err());
    }

    fn triangle() -> Network<f64> {
        let nodes = ["A", "B", "C"]
            .iter()
            .map(|id| Node { id: id.to_string(), x: 0.0, y: 0.0 })
            .collect();
        let mk = |id: &str, f: &str, t: &str, secs: f64| Link {
            id: id.into(),
            from: f.into(),
            to: t.into(),
            length: secs * 10.0,
            freeflow_speed: 10.0,
            mode: Mode::Road,
        };
        Network::new(nodes, vec![mk("ab", "A", "B", 100.0), mk("ac", "A", "C", 60.0), mk("cb", "C", "B", 30.0)], vec![])
            .unwrap()
    }

    #[test]
    fn triangle_prefers_detour() {
        let net = triangle();
        let p = net.shortest_path("A", "B", 0.0, Mode::Road, false).unwrap().unwrap();
        assert_eq!(p.nodes, vec!["A", "C", "B"]);
        assert_eq!(p.seconds, 90.0);
        assert_eq!(p.meters, 900.0);
    }

    #[test]
    fn identity_path_is_empty() {
        let net = triangle();
        let p = net.shortest_path("B", "B", 0.0, Mode::Road, true).unwrap().unwrap();
        assert!(p.links.is_empty());
        assert_eq!((p.seconds, p.meters), (0.0, 0.0));
    }

    #[test]
    fn unreachable_is_none_and_wrong_mode_is_none() {
        let net = triangle();
        assert!(net.shortest_path("B", "A", 0.0, Mode::Road, false).unwrap().is_none());
        assert!(net.shortest_path("A", "B", 0.0, Mode::Bike, false).unwrap().is_none());
    }

    #[test]
    fn equal_cost_tie_breaks_on_link_id() {
        let nodes = ["S", "M1", "M2", "T"]
            .iter()
            .map(|id| Node { id: id.to_string(), x: 0.0, y: 0.0 })
            .collect();
        let mk = |id: &str, f: &str, t: &str| Link {
            id: id.into(),
            from: f.into(),
            to: t.into(),
            length: 100.0,
            freeflow_speed: 10.0,
            mode: Mode::Road,
        };
        let links = vec![mk("z1", "S", "M1"), mk("z2", "M1", "T"), mk("a1", "S", "M2"), mk("b2", "M2", "T")];
        let net = Network::new(nodes, links, vec![]).unwrap();
        let p = net.shortest_path("S", "T", 0.0, Mode::Road, false).unwrap().unwrap();
        assert_eq!(p.links, vec!["a1", "b2"]);
    }

    #[test]
    fn matrix_on_a_line() {
        let nodes = (0..3)
            .map(|i| Node { id: format!("n{i}"), x: 1000.0 * i as f64, y: 0.0 })
            .collect();
        let mut links = Vec::new();
        for i in 0..2 {
            for (a, b) in [(i, i + 1), (i + 1, i)] {
                links.push(Link {
                    id: format!("l{a}{b}"),
                    from: format!("n{a}"),
                    to: format!("n{b}"),
                    length: 1000.0,
                    freeflow_speed: 10.0,
                    mode: Mode::Road,
                });
            }
        }
        let net = Network::new(nodes, links, vec![]).unwrap();
        let locs: Vec<String> = (0..3).map(|i| format!("n{i}")).collect();
        let m = net.travel_time_matrix(&locs, Mode::Road).unwrap();
        assert_eq!(m.seconds(0, 1), 100.0);
        assert_eq!(m.seconds(0, 2), 200.0);
        assert_eq!(m.seconds(2, 0), 200.0);
        assert_eq!(m.meters(1, 2), 1000.0);
        for i in 0..3 {
            assert_eq!(m.seconds(i, i), 0.0);
        }
        let single = net.travel_time_matrix(&locs[..1], Mode::Road).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single.seconds(0, 0), 0.0);
    }

    #[test]
    fn matrix_reports_unreachable_pairs() {
        let net = triangle();
        let locs = vec!["A".to_string(), "B".to_string()];
        match net.travel_time_matrix(&locs, Mode::Road) {
            Err(NetworkError::Unreachable { pairs, .. }) => {
                assert_eq!(pairs, vec![("B".to_string(), "A".to_string())]);
            }
            other => panic!("expected unreachable, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let net = line_net(vec![SpeedProfile {
            link_id: "L".into(),
            entries: vec![(7, 4.0), (17, 6.5)],
        }]);
        let (mut n, mut l, mut p) = (Vec::new(), Vec::new(), Vec::new());
        net.write_nodes_csv(&mut n).unwrap();
        net.write_links_csv(&mut l).unwrap();
        net.write_profiles_csv(&mut p).unwrap();
        let back = load_network::<f64>(n.as_slice(), l.as_slice(), p.as_slice()).unwrap();
        assert_eq!(back.links(), net.links());
        assert_eq!(back.nodes(), net.nodes());
        assert_eq!(back.speed_profiles(), net.speed_profiles());
    }

    #[test]
    fn generic_over_f32() {
        let nodes = vec![
            Node { id: "A".into(), x: 0.0f32, y: 0.0 },
            Node { id: "B".into(), x: 1000.0, y: 0.0 },
        ];
        let links = vec![Link {
            id: "L".into(),
            from: "A".into(),
            to: "B".into(),
            length: 1000.0f32,
            freeflow_speed: 10.0,
            mode: Mode::Road,
        }];
        let net = Network::new(nodes, links, vec![]).unwrap();
        assert_eq!(net.travel_time("L", 0.0).unwrap(), 100.0f32);
    }
}
