use anyhow::{ensure, Result};
use mesh_diffusion::mesh::{
    apply_deformation, compute_deformation, icosphere, load_mesh, save_mesh, synth_dataset, validate_topology,
    TopologyReport, TriangleMesh,
};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{bits, rng};

pub fn deformation_ops_invert() -> Result<()> {
    let ds = synth_dataset(3, 3, 12, 162, 7)?;
    for clip in &ds.clips {
        let neutral = clip.neutral();
        for (i, d) in clip.frames().iter().enumerate() {
            // Frame mesh built by hand, independent of apply_deformation.
            let verts: Vec<[f64; 3]> = neutral
                .vertices()
                .iter()
                .zip(d.offsets())
                .map(|(v, o)| [v[0] + o[0], v[1] + o[1], v[2] + o[2]])
                .collect();
            let frame = TriangleMesh::new(verts, neutral.faces().to_vec())?;
            let applied = apply_deformation(neutral, d)?;
            ensure!(applied == frame, "apply_deformation differs from the frame mesh at frame {i}");
            let back = compute_deformation(&frame, neutral)?;
            for (a, b) in back.offsets().iter().zip(d.offsets()) {
                for k in 0..3 {
                    ensure!((a[k] - b[k]).abs() <= 1e-9, "compute_deformation off by {:e}", (a[k] - b[k]).abs());
                }
            }
            let again = apply_deformation(neutral, &back)?;
            for (a, b) in again.vertices().iter().zip(frame.vertices()) {
                for k in 0..3 {
                    ensure!((a[k] - b[k]).abs() <= 1e-9, "apply(compute(m)) off by {:e}", (a[k] - b[k]).abs());
                }
            }
        }
    }
    Ok(())
}

/// Straight-line topology analysis over a flat list of directed edges.
pub fn brute_force_topology(n: usize, faces: &[[usize; 3]]) -> TopologyReport {
    let directed: Vec<(usize, usize)> =
        faces.iter().flat_map(|f| (0..3).map(move |k| (f[k], f[(k + 1) % 3]))).collect();
    let count = |a: usize, b: usize| directed.iter().filter(|&&e| e == (a, b)).count();
    let mut undirected: Vec<(usize, usize)> = directed.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    undirected.sort_unstable();
    undirected.dedup();

    let mut boundary = 0;
    let mut edge_manifold = true;
    let mut winding = true;
    for &(a, b) in &undirected {
        let (ab, ba) = (count(a, b), count(b, a));
        match ab + ba {
            1 => boundary += 1,
            2 => winding &= ab == 1 && ba == 1,
            _ => edge_manifold = false,
        }
    }

    // Faces around each vertex must form one component when faces sharing
    // an edge through that vertex are linked.
    let mut vertex_manifold = true;
    for v in 0..n {
        let around: Vec<usize> = (0..faces.len()).filter(|&f| faces[f].contains(&v)).collect();
        if around.len() <= 1 {
            continue;
        }
        let mut comp: Vec<usize> = (0..around.len()).collect();
        let mut changed = true;
        while changed {
            changed = false;
            for i in 0..around.len() {
                for j in 0..around.len() {
                    let shared = faces[around[i]]
                        .iter()
                        .filter(|&&u| u != v && faces[around[j]].contains(&u))
                        .count();
                    if i != j && shared > 0 && comp[j] > comp[i] {
                        comp[j] = comp[i];
                        changed = true;
                    }
                }
            }
        }
        vertex_manifold &= comp.iter().all(|&c| c == 0);
    }

    TopologyReport {
        is_manifold: edge_manifold && vertex_manifold,
        winding_consistent: winding,
        unreferenced_vertices: (0..n).filter(|v| !faces.iter().any(|f| f.contains(v))).collect(),
        boundary_edge_count: boundary,
    }
}

pub fn topology_matches_brute_force() -> Result<()> {
    let mut r = rng(11);
    let bases = [icosphere(0, 1.0), icosphere(1, 1.0)];
    for case in 0..300 {
        let base = &bases[case % 2];
        let n = base.num_vertices();
        let mut faces = base.faces().to_vec();
        faces.shuffle(&mut r);
        let remove = r.random_range(0..faces.len() / 3);
        faces.truncate(faces.len() - remove);
        for f in faces.iter_mut() {
            if r.random_bool(0.05) {
                f.swap(1, 2);
            }
        }
        if r.random_bool(0.2) {
            let dup = faces[r.random_range(0..faces.len())];
            faces.push(dup);
        }
        if r.random_bool(0.2) {
            // A random extra triangle, possibly creating fins or bowties.
            let mut tri: Vec<usize> = (0..n).collect();
            tri.shuffle(&mut r);
            faces.push([tri[0], tri[1], tri[2]]);
        }
        let mesh = TriangleMesh::new(base.vertices().to_vec(), faces.clone())?;
        let got = validate_topology(&mesh);
        let want = brute_force_topology(n, &faces);
        ensure!(got == want, "case {case}: library {got:?} vs brute force {want:?}");
    }
    // Random small soups exercise the degenerate corners.
    for case in 0..200 {
        let n = r.random_range(3..12);
        let f = r.random_range(1..10);
        let mut faces = Vec::new();
        while faces.len() < f {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut r);
            faces.push([idx[0], idx[1], idx[2]]);
        }
        let verts = (0..n).map(|i| [i as f64, (i * i) as f64, 1.0]).collect();
        let mesh = TriangleMesh::new(verts, faces.clone())?;
        let got = validate_topology(&mesh);
        let want = brute_force_topology(n, &faces);
        ensure!(got == want, "soup {case}: library {got:?} vs brute force {want:?}");
    }
    Ok(())
}

pub fn file_roundtrip_idempotent() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let ds = synth_dataset(2, 3, 6, 162, 3)?;
    let meshes = [
        ds.clips[0].neutral().clone(),
        ds.clips[1].frame_mesh(3)?,
        ds.clips[4].frame_mesh(5)?.scaled(1e-3),
    ];
    for (i, m) in meshes.iter().enumerate() {
        for ext in ["obj", "ply"] {
            let a = dir.path().join(format!("a{i}.{ext}"));
            let b = dir.path().join(format!("b{i}.{ext}"));
            save_mesh(m, &a)?;
            let loaded = load_mesh(&a, 1.0)?;
            save_mesh(&loaded, &b)?;
            ensure!(std::fs::read(&a)? == std::fs::read(&b)?, "{ext} mesh {i}: save-load-save changed bytes");
            ensure!(loaded.faces() == m.faces(), "{ext} mesh {i}: faces changed");
        }
    }
    Ok(())
}

pub fn synth_reproducible() -> Result<()> {
    let a = synth_dataset(3, 3, 10, 162, 21)?;
    let b = synth_dataset(3, 3, 10, 162, 21)?;
    ensure!(a.clips.len() == b.clips.len(), "clip counts differ");
    for (x, y) in a.clips.iter().zip(&b.clips) {
        ensure!(x.neutral() == y.neutral(), "neutral differs");
        ensure!(x.subject_id() == y.subject_id() && x.expression_class() == y.expression_class(), "labels differ");
        for (f, g) in x.frames().iter().zip(y.frames()) {
            ensure!(bits(&f.to_flat()) == bits(&g.to_flat()), "frame differs bitwise");
        }
    }
    ensure!(a.intensities == b.intensities && a.anchors == b.anchors, "ground truth differs");
    let c = synth_dataset(3, 3, 10, 162, 22)?;
    ensure!(
        c.clips[0].apex().to_flat() != a.clips[0].apex().to_flat(),
        "different seeds produced identical clips"
    );
    Ok(())
}
