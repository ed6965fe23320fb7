use anyhow::{ensure, Context, Result};
use mesh_diffusion::mesh::{icosphere, TriangleMesh};
use mesh_diffusion::spiral::{
    build_spirals, spiral_conv, DenoiserNetwork, GateWeights, IdentitySpec, NetworkSpec, SpiralConvWeights,
};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{bits, normals, rng, uniform};

/// Small network used by several checks: 42 vertices, 3 spiral layers.
pub fn small_spec(timesteps: usize, identity: bool) -> NetworkSpec {
    NetworkSpec {
        expression_dim: 3,
        timesteps,
        widths: vec![8, 8, 16],
        spiral_lengths: vec![9, 9, 12],
        d_idx: 4,
        d_t: 8,
        identity: identity.then(|| IdentitySpec {
            widths: vec![8, 8],
            spiral_lengths: vec![9, 9],
            d_id: 4,
            input_scale: 0.1,
        }),
        head_init_scale: 1.0,
    }
}

pub fn table_is_pure() -> Result<()> {
    for level in 0..3 {
        let m = icosphere(level, 1.0);
        for l in [1, 7, 12, 25] {
            let a = build_spirals(m.faces(), m.num_vertices(), l)?;
            let b = build_spirals(m.faces(), m.num_vertices(), l)?;
            ensure!(a == b, "level {level} L={l}: rebuild differs");
        }
    }
    Ok(())
}

pub fn relabel_equivariance() -> Result<()> {
    let mesh = icosphere(1, 50.0);
    let n = mesh.num_vertices();
    let mut r = rng(5);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);

    let mut verts = vec![[0.0; 3]; n];
    for v in 0..n {
        verts[perm[v]] = mesh.vertices()[v];
    }
    let faces: Vec<[usize; 3]> = mesh.faces().iter().map(|f| [perm[f[0]], perm[f[1]], perm[f[2]]]).collect();
    let relabeled = TriangleMesh::new(verts, faces)?;

    let spec = small_spec(50, false);
    let a = DenoiserNetwork::new(spec.clone(), &mesh, 3)?;
    let full = build_spirals(mesh.faces(), n, 12)?;
    let mut b = DenoiserNetwork::with_spirals(spec, &relabeled, &full.relabel(&perm)?, 99)?;

    let mut params = a.params().clone();
    let slot = params.index_of("index_embedding").context("index embedding tensor")?;
    let d = params.tensors()[slot].shape[1];
    let src = params.slot(slot).to_vec();
    let dst = params.slot_mut(slot);
    for v in 0..n {
        dst[perm[v] * d..(perm[v] + 1) * d].copy_from_slice(&src[v * d..(v + 1) * d]);
    }
    b.set_params(params)?;

    for trial in 0..5 {
        let x = normals(&mut r, n * 3);
        let mut xb = vec![0.0; n * 3];
        for v in 0..n {
            xb[perm[v] * 3..perm[v] * 3 + 3].copy_from_slice(&x[v * 3..v * 3 + 3]);
        }
        let e = uniform(&mut r, 3, 0.0, 1.0);
        let t = r.random_range(1..=50);
        let ya = a.denoise(&x, t, &e, None)?;
        let yb = b.denoise(&xb, t, &e, None)?;
        for v in 0..n {
            for k in 0..3 {
                let (p, q) = (ya[v * 3 + k], yb[perm[v] * 3 + k]);
                ensure!(
                    (p - q).abs() <= 1e-12 * (1.0 + p.abs()),
                    "trial {trial}: vertex {v} output {p} vs relabeled {q}"
                );
            }
        }
    }
    Ok(())
}

pub fn zero_gate_is_plain() -> Result<()> {
    let mesh = icosphere(1, 1.0);
    let n = mesh.num_vertices();
    let table = build_spirals(mesh.faces(), n, 9)?;
    let mut r = rng(8);
    for (cin, cout, clen) in [(1, 1, 1), (3, 5, 7), (11, 4, 20)] {
        let x = normals(&mut r, n * cin);
        let w = normals(&mut r, 9 * cin * cout);
        let bias = normals(&mut r, cout);
        let cond = normals(&mut r, clen);
        let zw = vec![0.0; clen * cout];
        let zb = vec![0.0; cout];
        let plain = spiral_conv(&x, cin, &table, &SpiralConvWeights { weight: &w, bias: &bias, gate: None }, None)?;
        let gated = spiral_conv(
            &x,
            cin,
            &table,
            &SpiralConvWeights {
                weight: &w,
                bias: &bias,
                gate: Some(GateWeights { gamma_weight: &zw, gamma_bias: &zb, beta_weight: &zw, beta_bias: &zb }),
            },
            Some(&cond),
        )?;
        ensure!(bits(&plain) == bits(&gated), "zero gate changed the output ({cin}->{cout})");
    }
    Ok(())
}

pub fn outputs_finite() -> Result<()> {
    let mesh = icosphere(1, 50.0);
    let n = mesh.num_vertices();
    let spec = NetworkSpec { head_init_scale: 1e-2, ..small_spec(100, true) };
    let net = DenoiserNetwork::new(spec, &mesh, 17)?;
    let latent = net.encode_identity(&mesh)?;
    let mut r = rng(9);
    for i in 0..1000 {
        let scale = 10f64.powf(r.random_range(-3.0..4.0));
        let x: Vec<f64> = normals(&mut r, n * 3).into_iter().map(|v| v * scale).collect();
        let e = uniform(&mut r, 3, 0.0, 1.0);
        let t = r.random_range(1..=100);
        let id = if i % 2 == 0 {
            latent.clone()
        } else {
            normals(&mut r, latent.len()).into_iter().map(|v| v * scale).collect()
        };
        let y = net.denoise(&x, t, &e, Some(&id))?;
        ensure!(y.iter().all(|v| v.is_finite()), "evaluation {i} (scale {scale:e}, t {t}) not finite");
    }
    Ok(())
}
