use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Fixed-length ordered neighbourhood per vertex.
///
/// Row `v` starts with `v`, continues with its 1-ring in winding order and
/// then outer rings; short rows are padded with the sentinel `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpiralTable {
    num_vertices: usize,
    length: usize,
    entries: Vec<usize>,
}

impl SpiralTable {
    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    /// Spiral length `L`.
    pub fn length(&self) -> usize {
        self.length
    }

    /// The padding value (equal to the vertex count).
    pub fn sentinel(&self) -> usize {
        self.num_vertices
    }

    pub fn row(&self, v: usize) -> &[usize] {
        &self.entries[v * self.length..(v + 1) * self.length]
    }

    pub(crate) fn entries(&self) -> &[usize] {
        &self.entries
    }

    /// Prefix of every row; equals a fresh build with the shorter length.
    pub fn truncated(&self, length: usize) -> Result<SpiralTable> {
        if length == 0 || length > self.length {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate spiral of length {} to {length}",
                self.length
            )));
        }
        let entries = (0..self.num_vertices)
            .flat_map(|v| self.row(v)[..length].iter().copied())
            .collect();
        Ok(SpiralTable {
            num_vertices: self.num_vertices,
            length,
            entries,
        })
    }

    /// Renames vertex `v` to `perm[v]` in both row order and entries.
    pub fn relabel(&self, perm: &[usize]) -> Result<SpiralTable> {
        let n = self.num_vertices;
        if perm.len() != n {
            return Err(Error::Shape("permutation length differs from vertex count".into()));
        }
        let mut entries = vec![n; n * self.length];
        for v in 0..n {
            let dst = perm[v];
            for (j, &e) in self.row(v).iter().enumerate() {
                entries[dst * self.length + j] = if e == n { n } else { perm[e] };
            }
        }
        Ok(SpiralTable {
            num_vertices: n,
            length: self.length,
            entries,
        })
    }

    /// `vertex: i0 i1 ... iL-1` per line, sentinel written as `-1`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in 0..self.num_vertices {
            let _ = write!(s, "{v}:");
            for &e in self.row(v) {
                if e == self.num_vertices {
                    s.push_str(" -1");
                } else {
                    let _ = write!(s, " {e}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<SpiralTable> {
        let rows: Vec<(usize, Vec<i64>)> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                let bad = || Error::Data(format!("spiral line {}: malformed", i + 1));
                let (head, rest) = l.split_once(':').ok_or_else(bad)?;
                let v = head.trim().parse::<usize>().map_err(|_| bad())?;
                let vals = rest
                    .split_whitespace()
                    .map(|t| t.parse::<i64>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>>>()?;
                Ok((v, vals))
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        let length = rows.first().map(|r| r.1.len()).unwrap_or(0);
        let mut entries = Vec::with_capacity(n * length);
        for (i, (v, vals)) in rows.into_iter().enumerate() {
            if v != i || vals.len() != length {
                return Err(Error::Data(format!("spiral row {i} out of order or wrong length")));
            }
            for x in vals {
                entries.push(match x {
                    -1 => n,
                    x if x >= 0 && (x as usize) < n => x as usize,
                    _ => return Err(Error::Data(format!("spiral entry {x} out of range"))),
                });
            }
        }
        Ok(SpiralTable {
            num_vertices: n,
            length,
            entries,
        })
    }
}

/// Builds spirals of length `length` for a triangle list over `n` vertices.
///
/// The 1-ring follows face winding (counterclockwise) starting at the
/// smallest-index neighbour; on an open fan it starts at the boundary
/// neighbour that has no predecessor. Outer rings are discovered
/// breadth-first, ordered by parent position in the previous ring and then
/// by index.
pub fn build_spirals(faces: &[[usize; 3]], n: usize, length: usize) -> Result<SpiralTable> {
    if length == 0 {
        return Err(Error::InvalidArgument("spiral length must be >= 1".into()));
    }
    let mut successor: Vec<BTreeMap<usize, BTreeSet<usize>>> = vec![BTreeMap::new(); n];
    let mut neighbours: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (fi, f) in faces.iter().enumerate() {
        if f.iter().any(|&i| i >= n) {
            return Err(Error::Topology(format!("face {fi} index out of range")));
        }
        for k in 0..3 {
            let (v, a, b) = (f[k], f[(k + 1) % 3], f[(k + 2) % 3]);
            successor[v].entry(a).or_default().insert(b);
            neighbours[v].insert(a);
            neighbours[v].insert(b);
        }
    }
    if let Some(v) = (0..n).find(|&v| neighbours[v].is_empty()) {
        return Err(Error::Topology(format!("vertex {v} has no incident face")));
    }

    let mut entries = Vec::with_capacity(n * length);
    let mut visited = vec![false; n];
    for v in 0..n {
        let mut seq = vec![v];
        let mut touched = vec![v];
        visited[v] = true;

        let ring1 = one_ring(&successor[v], &neighbours[v]);
        for &u in &ring1 {
            visited[u] = true;
            touched.push(u);
        }
        seq.extend_from_slice(&ring1);
        let mut prev = ring1;
        while seq.len() < length && !prev.is_empty() {
            let mut ring = Vec::new();
            for &u in &prev {
                for &w in &neighbours[u] {
                    if !visited[w] {
                        visited[w] = true;
                        touched.push(w);
                        ring.push(w);
                    }
                }
            }
            seq.extend_from_slice(&ring);
            prev = ring;
        }
        for t in touched {
            visited[t] = false;
        }
        seq.resize(length, n);
        entries.extend_from_slice(&seq);
    }
    Ok(SpiralTable {
        num_vertices: n,
        length,
        entries,
    })
}

fn one_ring(succ: &BTreeMap<usize, BTreeSet<usize>>, nbrs: &BTreeSet<usize>) -> Vec<usize> {
    let has_pred: BTreeSet<usize> = succ.values().flatten().copied().collect();
    let boundary_starts: Vec<usize> = nbrs.iter().copied().filter(|a| !has_pred.contains(a)).collect();
    let mut order = Vec::with_capacity(nbrs.len());
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    while seen.len() < nbrs.len() {
        let start = boundary_starts
            .iter()
            .copied()
            .find(|a| !seen.contains(a))
            .or_else(|| nbrs.iter().copied().find(|a| !seen.contains(a)))
            .expect("unseen neighbour exists");
        let mut cur = start;
        loop {
            seen.insert(cur);
            order.push(cur);
            match succ
                .get(&cur)
                .and_then(|s| s.iter().copied().find(|b| !seen.contains(b)))
            {
                Some(next) => cur = next,
                None => break,
            }
        }
    }
    order
}
