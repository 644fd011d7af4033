//! Shortest paths against brute-force enumeration of simple paths on small
//! random graphs, and travel matrices against single-pair queries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subterra::network::{Link, Mode, Network, Node, SpeedProfile};

const NODES: usize = 12;

fn random_graph(seed: u64, with_profiles: bool) -> Network<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<Node<f64>> = (0..NODES)
        .map(|i| Node {
            id: format!("n{i:02}"),
            x: rng.random_range(0.0..5000.0),
            y: rng.random_range(0.0..5000.0),
        })
        .collect();
    let mut links = Vec::new();
    let mut profiles = Vec::new();
    for a in 0..NODES {
        for b in 0..NODES {
            if a == b || !rng.random_bool(0.3) {
                continue;
            }
            let mode = if rng.random_bool(0.8) { Mode::Road } else { Mode::Bike };
            let id = format!("{a:02}>{b:02}");
            if with_profiles && rng.random_bool(0.5) {
                profiles.push(SpeedProfile {
                    link_id: id.clone(),
                    entries: vec![(8, rng.random_range(2.0..8.0))],
                });
            }
            links.push(Link {
                id,
                from: nodes[a].id.clone(),
                to: nodes[b].id.clone(),
                length: rng.random_range(50.0..1500.0),
                freeflow_speed: rng.random_range(8.0..20.0),
                mode,
            });
        }
    }
    Network::new(nodes, links, profiles).unwrap()
}

/// Minimum arrival over every simple path, walking links in order.
fn enumerate_best(net: &Network<f64>, from: usize, to: usize, depart: f64, mode: Mode, td: bool) -> Option<f64> {
    fn dfs(
        net: &Network<f64>,
        at: usize,
        to: usize,
        t: f64,
        mode: Mode,
        td: bool,
        seen: &mut Vec<bool>,
        best: &mut Option<f64>,
    ) {
        if at == to {
            if best.is_none_or(|b| t < b) {
                *best = Some(t);
            }
            return;
        }
        for li in 0..net.links().len() {
            let (a, b) = net.link_endpoints(li);
            if a != at || seen[b] || net.links()[li].mode != mode {
                continue;
            }
            let dt = if td { net.link_time_idx(li, t) } else { net.freeflow_time_idx(li) };
            seen[b] = true;
            dfs(net, b, to, t + dt, mode, td, seen, best);
            seen[b] = false;
        }
    }
    let mut seen = vec![false; net.nodes().len()];
    seen[from] = true;
    let mut best = None;
    dfs(net, from, to, depart, mode, td, &mut seen, &mut best);
    best
}

fn check_against_enumeration(seed: u64, td: bool) {
    let net = random_graph(seed, td);
    // 08:05, inside the single profiled hour
    let depart = 8.0 * 3600.0 + 300.0;
    for mode in [Mode::Road, Mode::Bike] {
        for s in 0..NODES {
            for t in 0..NODES {
                let (from, to) = (&net.nodes()[s].id, &net.nodes()[t].id);
                let got = net.shortest_path(from, to, depart, mode, td).unwrap();
                let want = enumerate_best(&net, s, t, depart, mode, td);
                match (got, want) {
                    (None, None) => {}
                    // before 09:00 every link costs its hour-8 time, so labels are exact
                    (Some(_), Some(w)) if td && w >= 9.0 * 3600.0 => {}
                    (Some(p), Some(w)) => {
                        assert!(
                            (p.seconds - (w - depart)).abs() <= 1e-9 * w,
                            "seed {seed} {mode} {from}->{to}: dijkstra {} vs enumeration {}",
                            p.seconds,
                            w - depart
                        );
                        for l in &p.links {
                            assert_eq!(net.link(l).unwrap().mode, mode);
                        }
                    }
                    (g, w) => panic!("seed {seed} {from}->{to}: reachability differs: {g:?} vs {w:?}"),
                }
            }
        }
    }
}

#[test]
fn freeflow_matches_enumeration() {
    for seed in 0..20 {
        check_against_enumeration(seed, false);
    }
}

#[test]
fn time_dependent_matches_enumeration_within_an_hour() {
    for seed in 100..110 {
        check_against_enumeration(seed, true);
    }
}

#[test]
fn matrix_equals_pairwise_queries() {
    for seed in 0..5 {
        let net = random_graph(seed, false);
        // strongly connect the road layer so the matrix is complete
        let mut links: Vec<Link<f64>> = net.links().to_vec();
        for i in 0..NODES {
            let j = (i + 1) % NODES;
            links.push(Link {
                id: format!("ring{i:02}"),
                from: net.nodes()[i].id.clone(),
                to: net.nodes()[j].id.clone(),
                length: 3000.0,
                freeflow_speed: 10.0,
                mode: Mode::Road,
            });
        }
        let net = Network::new(net.nodes().to_vec(), links, vec![]).unwrap();
        let ids: Vec<String> = net.nodes().iter().map(|n| n.id.clone()).collect();
        let m = net.travel_time_matrix(&ids, Mode::Road).unwrap();
        for (i, a) in ids.iter().enumerate() {
            for (j, b) in ids.iter().enumerate() {
                let p = net.shortest_path(a, b, 0.0, Mode::Road, false).unwrap().unwrap();
                assert_eq!(m.seconds(i, j), p.seconds, "{a}->{b}");
                assert_eq!(m.meters(i, j), p.meters, "{a}->{b}");
            }
        }
    }
}

#[test]
fn unreachable_pairs_fail_the_matrix() {
    let net = random_graph(3, false);
    let ids: Vec<String> = net.nodes().iter().map(|n| n.id.clone()).collect();
    // bike layer of a sparse random graph is rarely strongly connected
    if let Err(e) = net.travel_time_matrix(&ids, Mode::Bike) {
        assert!(e.to_string().contains("bike"), "{e}");
    }
    assert!(net.travel_time_matrix(&["nope".to_string()], Mode::Road).is_err());
}
