use std::collections::{BTreeMap, BTreeSet};

use super::TriangleMesh;

/// Findings from an edge-incidence pass over a mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyReport {
    /// Every edge has at most two incident faces and every vertex fan is a
    /// single connected umbrella.
    pub is_manifold: bool,
    /// Every interior edge is traversed once in each direction.
    pub winding_consistent: bool,
    pub unreferenced_vertices: Vec<usize>,
    pub boundary_edge_count: usize,
}

pub fn validate_topology(mesh: &TriangleMesh) -> TopologyReport {
    let n = mesh.num_vertices();
    let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut undirected: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut referenced = vec![false; n];
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            referenced[a] = true;
            *directed.entry((a, b)).or_default() += 1;
            *undirected.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }

    let boundary_edge_count = undirected.values().filter(|&&c| c == 1).count();
    let edge_manifold = undirected.values().all(|&c| c <= 2);
    let winding_consistent = undirected.iter().all(|(&(a, b), &c)| {
        c != 2 || (directed.get(&(a, b)) == Some(&1) && directed.get(&(b, a)) == Some(&1))
    });

    // Vertex manifoldness: the faces around each vertex form one connected fan
    // when linked through shared edges.
    let mut incident: Vec<Vec<[usize; 2]>> = vec![Vec::new(); n];
    for f in mesh.faces() {
        for k in 0..3 {
            incident[f[k]].push([f[(k + 1) % 3], f[(k + 2) % 3]]);
        }
    }
    let vertex_manifold = incident.iter().all(|fan| fan_is_connected(fan));

    TopologyReport {
        is_manifold: edge_manifold && vertex_manifold,
        winding_consistent,
        unreferenced_vertices: (0..n).filter(|&i| !referenced[i]).collect(),
        boundary_edge_count,
    }
}

fn fan_is_connected(fan: &[[usize; 2]]) -> bool {
    if fan.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; fan.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut reached = BTreeSet::new();
    while let Some(i) = stack.pop() {
        reached.insert(i);
        for (j, other) in fan.iter().enumerate() {
            if !seen[j] && fan[i].iter().any(|v| other.contains(v)) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    reached.len() == fan.len()
}
