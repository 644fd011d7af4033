//! Synthetic toy city: street grid with arterials, a mirrored bike grid,
//! depot clusters out on highway spurs, and a tunnel loop through the
//! micro hubs with spurs to the portals and connected facilities.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::demand::{
    radial_weights, Carrier, DemandConfig, Facility, FacilityKind, Hub, Portal, Zone, HUB_DAILY_CAPACITY,
};
use crate::network::{Link, Mode, Network, NetworkError, Node, SpeedProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CityConfig {
    /// Grid nodes per side.
    pub grid: usize,
    pub spacing_m: f64,
    /// Every n-th row and column is an arterial.
    pub arterial_every: usize,
    pub arterial_mps: f64,
    pub street_mps: f64,
    pub highway_mps: f64,
    pub bike_mps: f64,
    pub tunnel_mps: f64,
    /// Peak-hour speed as a fraction of free flow on arterials and highways.
    pub peak_factor: f64,
    pub peak_hours: Vec<u8>,
    /// Distance of the depot clusters from the city centre.
    pub depot_distance_m: f64,
    pub carriers: usize,
    pub connected_carriers: usize,
    pub total_parcels: u32,
    pub parcel_size: u32,
    /// Zones sit on every n-th grid node in both directions.
    pub zone_stride: usize,
    pub kernel_scale_m: f64,
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            grid: 21,
            spacing_m: 500.0,
            arterial_every: 5,
            arterial_mps: 13.9,
            street_mps: 8.3,
            highway_mps: 22.2,
            bike_mps: 4.5,
            tunnel_mps: 10.0,
            peak_factor: 0.6,
            peak_hours: vec![7, 8, 16, 17],
            depot_distance_m: 12_000.0,
            carriers: 7,
            connected_carriers: 5,
            total_parcels: 20_000,
            parcel_size: 10,
            zone_stride: 2,
            kernel_scale_m: 3000.0,
        }
    }
}

/// Compass bearings of the three depot clusters (N, E, SW).
const CLUSTERS: [(&str, f64, f64); 3] = [("n", 0.0, 1.0), ("e", 1.0, 0.0), ("sw", -FRAC_1_SQRT_2, -FRAC_1_SQRT_2)];

struct Builder {
    nodes: Vec<Node<f64>>,
    links: Vec<Link<f64>>,
    profiles: Vec<SpeedProfile<f64>>,
    peak_factor: f64,
    peak_hours: Vec<u8>,
}

impl Builder {
    fn node(&mut self, id: String, x: f64, y: f64) -> String {
        self.nodes.push(Node { id: id.clone(), x, y });
        id
    }

    fn pos(&self, id: &str) -> (f64, f64) {
        let n = self.nodes.iter().find(|n| n.id == id).expect("node placed before use");
        (n.x, n.y)
    }

    /// Two opposite links; length is the straight-line distance times `detour`.
    fn both(&mut self, prefix: &str, a: &str, b: &str, speed: f64, mode: Mode, detour: f64, peaked: bool) {
        let (pa, pb) = (self.pos(a), self.pos(b));
        let length = (pa.0 - pb.0).hypot(pa.1 - pb.1) * detour;
        for (from, to) in [(a, b), (b, a)] {
            let id = format!("{prefix}:{from}>{to}");
            if peaked {
                self.profiles.push(SpeedProfile {
                    link_id: id.clone(),
                    entries: self.peak_hours.iter().map(|&h| (h, speed * self.peak_factor)).collect(),
                });
            }
            self.links.push(Link {
                id,
                from: from.to_string(),
                to: to.to_string(),
                length,
                freeflow_speed: speed,
                mode,
            });
        }
    }
}

pub fn grid_id(r: usize, c: usize) -> String {
    format!("g{r:02}_{c:02}")
}

impl CityConfig {
    fn center(&self) -> (f64, f64) {
        let half = (self.grid - 1) as f64 * self.spacing_m / 2.0;
        (half, half)
    }

    /// Grid cell nearest to an offset (in cells) from the centre.
    fn cell(&self, dr: i64, dc: i64) -> (usize, usize) {
        let mid = (self.grid / 2) as i64;
        let clamp = |v: i64| v.clamp(0, self.grid as i64 - 1) as usize;
        (clamp(mid + dr), clamp(mid + dc))
    }

    /// Builds the network and the demand geography that goes with it.
    pub fn build(&self) -> Result<(Network<f64>, DemandConfig), NetworkError> {
        let mut b = Builder {
            nodes: Vec::new(),
            links: Vec::new(),
            profiles: Vec::new(),
            peak_factor: self.peak_factor,
            peak_hours: self.peak_hours.clone(),
        };
        let n = self.grid;
        for r in 0..n {
            for c in 0..n {
                b.node(grid_id(r, c), c as f64 * self.spacing_m, r as f64 * self.spacing_m);
            }
        }
        let arterial = |i: usize| self.arterial_every > 0 && i.is_multiple_of(self.arterial_every);
        for r in 0..n {
            for c in 0..n {
                let here = grid_id(r, c);
                if c + 1 < n {
                    let speed = if arterial(r) { self.arterial_mps } else { self.street_mps };
                    b.both("r", &here, &grid_id(r, c + 1), speed, Mode::Road, 1.0, arterial(r));
                    b.both("b", &here, &grid_id(r, c + 1), self.bike_mps, Mode::Bike, 1.0, false);
                }
                if r + 1 < n {
                    let speed = if arterial(c) { self.arterial_mps } else { self.street_mps };
                    b.both("r", &here, &grid_id(r + 1, c), speed, Mode::Road, 1.0, arterial(c));
                    b.both("b", &here, &grid_id(r + 1, c), self.bike_mps, Mode::Bike, 1.0, false);
                }
            }
        }

        // depot clusters: junction out on a highway spur from the grid edge
        let (cx, cy) = self.center();
        let mut junctions = Vec::new();
        for (name, dx, dy) in CLUSTERS {
            let j = b.node(format!("jn-{name}"), cx + dx * self.depot_distance_m, cy + dy * self.depot_distance_m);
            let mid = (n / 2) as i64;
            let edge = {
                let er = if dy > 0.5 { n - 1 } else if dy < -0.5 { 0 } else { mid as usize };
                let ec = if dx > 0.5 { n - 1 } else if dx < -0.5 { 0 } else { mid as usize };
                grid_id(er, ec)
            };
            // highway in ~2 km pieces
            let (ex, ey) = b.pos(&edge);
            let (jx, jy) = (cx + dx * self.depot_distance_m, cy + dy * self.depot_distance_m);
            let pieces = (((jx - ex).hypot(jy - ey)) / 2000.0).ceil().max(1.0) as usize;
            let mut prev = edge.clone();
            for k in 1..pieces {
                let t = k as f64 / pieces as f64;
                let id = b.node(format!("hw-{name}-{k}"), ex + (jx - ex) * t, ey + (jy - ey) * t);
                b.both("h", &prev, &id, self.highway_mps, Mode::Road, 1.0, true);
                prev = id;
            }
            b.both("h", &prev, &j, self.highway_mps, Mode::Road, 1.0, true);
            junctions.push((name, j, jx, jy));
        }

        // carriers spread over clusters: N gets 3, E 2, SW the rest
        let mut carriers = Vec::new();
        let per_cluster = [3usize, 2, usize::MAX];
        let mut k = 0;
        for (ci, (_, j, jx, jy)) in junctions.iter().enumerate() {
            let mut placed = 0;
            while k < self.carriers && placed < per_cluster[ci] {
                let id = format!("c{}", k + 1);
                let angle = placed as f64 * 1.3;
                let d = b.node(format!("depot-{id}"), jx + 1000.0 * angle.cos(), jy + 1000.0 * angle.sin());
                b.both("r", &d, j, self.street_mps, Mode::Road, 1.0, false);
                carriers.push(Carrier {
                    id,
                    depot: d,
                    market_share: 1.0 / self.carriers as f64,
                    hub_connected: k < self.connected_carriers,
                });
                placed += 1;
                k += 1;
            }
        }

        // tunnel: loop through the hubs, spurs to portals and facilities
        let hub_cells = [self.cell(0, 0), self.cell(4, -4), self.cell(4, 4), self.cell(-4, 4), self.cell(-4, -4)];
        let hubs: Vec<Hub> = hub_cells
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| Hub {
                id: format!("h{}", i + 1),
                node: grid_id(r, c),
                daily_capacity: HUB_DAILY_CAPACITY,
            })
            .collect();
        // ring over the four outer hubs, centre hub tied to the ring
        let ring: Vec<&str> = hubs[1..].iter().map(|h| h.node.as_str()).collect();
        for i in 0..ring.len() {
            let (a, z) = (ring[i].to_string(), ring[(i + 1) % ring.len()].to_string());
            b.both("t", &a, &z, self.tunnel_mps, Mode::Tunnel, 1.1, false);
        }
        let centre = hubs[0].node.clone();
        b.both("t", &centre, ring[0], self.tunnel_mps, Mode::Tunnel, 1.1, false);
        b.both("t", &centre, ring[2], self.tunnel_mps, Mode::Tunnel, 1.1, false);

        let nearest_hub = |b: &Builder, x: f64, y: f64| -> String {
            hubs.iter()
                .map(|h| {
                    let (hx, hy) = b.pos(&h.node);
                    ((hx - x).hypot(hy - y), h.node.clone())
                })
                .min_by(|a, z| a.0.total_cmp(&z.0).then_with(|| a.1.cmp(&z.1)))
                .expect("hubs exist")
                .1
        };
        let mut portals = Vec::new();
        for (name, j, jx, jy) in &junctions {
            // portal next to the cluster junction
            let p = b.node(format!("portal-{name}"), jx - 200.0, jy - 200.0);
            b.both("r", &p, j, self.street_mps, Mode::Road, 1.0, false);
            let h = nearest_hub(&b, *jx, *jy);
            b.both("t", &p, &h, self.tunnel_mps, Mode::Tunnel, 1.1, false);
            portals.push(Portal {
                id: format!("portal-{name}"),
                node: p,
            });
        }

        let fac = |id: &str, (r, c): (usize, usize), kind, daily_supply, supplier: &str| Facility {
            id: id.to_string(),
            node: grid_id(r, c),
            kind,
            daily_supply,
            supplier: supplier.to_string(),
        };
        let sup_sw = junctions[2].1.clone();
        let sup_n = junctions[0].1.clone();
        let facilities = vec![
            fac("f-ind1", self.cell(-7, -2), FacilityKind::Industry, 3, &sup_sw),
            fac("f-ind2", self.cell(2, 7), FacilityKind::Industry, 2, &sup_sw),
            fac("f-mall", self.cell(1, 1), FacilityKind::RetailCenter, 2, &sup_n),
            fac("f-retail", self.cell(-8, 8), FacilityKind::RetailCenter, 2, &sup_n),
        ];
        // the outer retail park has no tunnel access
        for f in facilities.iter().filter(|f| f.id != "f-retail") {
            let (x, y) = b.pos(&f.node);
            let h = nearest_hub(&b, x, y);
            if h != f.node {
                b.both("t", &f.node, &h, self.tunnel_mps, Mode::Tunnel, 1.1, false);
            }
        }

        let stride = self.zone_stride.max(1);
        let mut zone_nodes = Vec::new();
        for r in (0..n).step_by(stride) {
            for c in (0..n).step_by(stride) {
                zone_nodes.push((r, c));
            }
        }
        let points: Vec<(f64, f64)> = zone_nodes
            .iter()
            .map(|&(r, c)| (c as f64 * self.spacing_m, r as f64 * self.spacing_m))
            .collect();
        let weights = radial_weights(&points, (cx, cy), self.kernel_scale_m);
        let zones = zone_nodes
            .iter()
            .zip(weights)
            .map(|(&(r, c), weight)| Zone {
                id: format!("z{r:02}_{c:02}"),
                centroid: grid_id(r, c),
                weight,
            })
            .collect();

        let network = Network::new(b.nodes, b.links, b.profiles)?;
        let demand = DemandConfig {
            total_parcels: self.total_parcels,
            parcel_size: self.parcel_size,
            zones,
            carriers,
            hubs,
            facilities,
            portals,
        };
        Ok((network, demand))
    }
}
