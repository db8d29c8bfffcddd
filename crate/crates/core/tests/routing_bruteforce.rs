use accessnet::netcore::{CrossingRule, Edge, Network, Node, NodeCost, OdPair, Project, Stress};
use accessnet::routing::{Design, FollowerOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const T2: f64 = 60.0;

fn random_network(rng: &mut ChaCha8Rng, rule: CrossingRule) -> Network {
    let n = rng.gen_range(3..=6);
    let nodes: Vec<Node> = (0..n)
        .map(|i| {
            let high = i >= 2 && rng.gen_bool(0.5);
            Node {
                id: i,
                coords: [i as f64, 0.0],
                stress: if high { Stress::High } else { Stress::Low },
                is_centroid: !high,
            }
        })
        .collect();
    let n_edges = rng.gen_range(4..=15);
    let n_projects = rng.gen_range(1..=3);
    let mut edges = Vec::new();
    let mut members = vec![Vec::new(); n_projects];
    for id in 0..n_edges {
        let tail = rng.gen_range(0..n);
        let mut head = rng.gen_range(0..n);
        if head == tail {
            head = (head + 1) % n;
        }
        let high = rng.gen_bool(0.5);
        let project_id = high.then(|| rng.gen_range(0..n_projects));
        if let Some(p) = project_id {
            members[p].push(id);
        }
        edges.push(Edge {
            id,
            tail,
            head,
            travel_time: rng.gen_range(1.0..30.0),
            stress: if high { Stress::High } else { Stress::Low },
            edge_cost: if high { 1.0 } else { 0.0 },
            project_id,
        });
    }
    // projects that ended up empty are dropped and ids compacted
    let mut remap = vec![None; n_projects];
    let mut projects = Vec::new();
    for (p, m) in members.into_iter().enumerate() {
        if !m.is_empty() {
            remap[p] = Some(projects.len());
            projects.push(Project { id: projects.len(), cost: m.len() as f64, edge_ids: m });
        }
    }
    for e in &mut edges {
        e.project_id = e.project_id.and_then(|p| remap[p]);
    }
    let node_costs = nodes
        .iter()
        .filter(|v| v.stress == Stress::High)
        .map(|v| NodeCost { node: v.id, cost: 1.0 })
        .collect();
    let centroids: Vec<usize> = nodes.iter().filter(|v| v.is_centroid).map(|v| v.id).collect();
    let mut od_pairs = Vec::new();
    for &o in &centroids {
        for &d in &centroids {
            if o != d {
                od_pairs.push(OdPair { id: od_pairs.len(), origin: o, destination: d, weight: 1.0 });
            }
        }
    }
    Network::new(nodes, edges, node_costs, projects, od_pairs, rule).unwrap()
}

/// Traversability written directly from the crossing definition.
fn usable(net: &Network, design: &Design, e: &Edge) -> bool {
    if let Some(p) = e.project_id {
        if !design.projects[p] {
            return false;
        }
    }
    let tail = &net.nodes[e.tail];
    if tail.stress == Stress::Low || design.nodes[tail.id] {
        return true;
    }
    let all_built = net
        .edges
        .iter()
        .filter(|f| f.tail == tail.id || f.head == tail.id)
        .all(|f| f.project_id.map_or(true, |p| design.projects[p]));
    if all_built {
        return true;
    }
    match net.crossing_rule {
        CrossingRule::HighStressOutgoing => e.stress == Stress::Low,
        CrossingRule::AllOutgoing => false,
    }
}

fn brute_force(net: &Network, design: &Design, o: usize, d: usize) -> f64 {
    fn dfs(net: &Network, design: &Design, u: usize, d: usize, t: f64, seen: &mut Vec<bool>, best: &mut f64) {
        if u == d {
            *best = best.min(t);
            return;
        }
        for e in &net.edges {
            if e.tail == u && !seen[e.head] && usable(net, design, e) {
                seen[e.head] = true;
                dfs(net, design, e.head, d, t + e.travel_time, seen, best);
                seen[e.head] = false;
            }
        }
    }
    let mut seen = vec![false; net.n_nodes()];
    seen[o] = true;
    let mut best = T2;
    dfs(net, design, o, d, 0.0, &mut seen, &mut best);
    best
}

#[test]
fn oracle_times_match_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..200 {
        let rule = if case % 2 == 0 { CrossingRule::HighStressOutgoing } else { CrossingRule::AllOutgoing };
        let net = random_network(&mut rng, rule);
        let oracle = FollowerOracle::all(&net, T2);
        for _ in 0..4 {
            let projects: Vec<bool> = (0..net.n_projects()).map(|_| rng.gen_bool(0.5)).collect();
            let mut design = Design::empty(&net);
            design.projects = projects;
            for v in net.high_stress_nodes() {
                design.nodes[v] = rng.gen_bool(0.3);
            }
            let times = oracle.times(&net, &design);
            for (od, &tau) in net.od_pairs.iter().zip(&times) {
                let want = brute_force(&net, &design, od.origin, od.destination);
                assert!((tau - want).abs() < 1e-9, "case {case} od {}: {tau} vs {want}", od.id);
            }
        }
    }
}
