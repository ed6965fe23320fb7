//! Spiral neighbor sequences on an icosphere, and a spiral-conv denoiser
//! built on top of them.

use anyhow::Result;
use mesh_diffusion::mesh::icosphere;
use mesh_diffusion::spiral::{build_spirals, DenoiserNetwork, NetworkSpec};

fn main() -> Result<()> {
    let mesh = icosphere(1, 50.0);
    let table = build_spirals(mesh.faces(), mesh.num_vertices(), 12)?;
    println!("{} vertices, spiral length {}, sentinel {}", table.num_vertices(), table.length(), table.sentinel());
    for v in [0, 1, 20] {
        println!("spiral({v:>2}) = {:?}", table.row(v));
    }
    let short = table.truncated(7)?;
    println!("truncated to 7: spiral(0) = {:?}", short.row(0));

    // The table is a pure function of the faces.
    let again = build_spirals(mesh.faces(), mesh.num_vertices(), 12)?;
    println!("rebuilt table identical: {}", again.to_text() == table.to_text());

    let spec = NetworkSpec::desk_scale(3, 100);
    let net = DenoiserNetwork::new(spec, &mesh, 0)?;
    println!("denoiser: {} parameters in {} tensors", net.params().num_elements(), net.params().tensors().len());
    let noisy = vec![0.5; 3 * mesh.num_vertices()];
    let eps = net.denoise(&noisy, 50, &[0.0, 0.8, 0.0], None)?;
    let norm = eps.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("predicted noise at t=50: {} values, norm {norm:.4}", eps.len());
    Ok(())
}
