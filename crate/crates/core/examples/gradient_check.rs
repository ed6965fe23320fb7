//! Compare backpropagated gradients of the noise-prediction loss with
//! central finite differences.

use anyhow::Result;
use mesh_diffusion::diffusion::{forward_sample, linear_schedule, sample_noise_bundle};
use mesh_diffusion::mesh::icosphere;
use mesh_diffusion::spiral::{DenoiserNetwork, EpsSample, IdentityInput, IdentitySpec, NetworkSpec};
use mesh_diffusion::training::{gradient_check, DenoiserObjective};

fn main() -> Result<()> {
    let mesh = icosphere(1, 50.0);
    let n = mesh.num_vertices();
    let sched = linear_schedule(1000, 1e-4, 0.02)?;
    let spec = NetworkSpec {
        widths: vec![8, 8, 16],
        spiral_lengths: vec![9, 9, 12],
        d_idx: 4,
        d_t: 8,
        identity: Some(IdentitySpec { widths: vec![8, 8], spiral_lengths: vec![9, 9], d_id: 4, input_scale: 0.1 }),
        head_init_scale: 1.0,
        ..NetworkSpec::desk_scale(3, 1000)
    };
    let net = DenoiserNetwork::new(spec, &mesh, 7)?;

    let bundle = sample_noise_bundle(n, 1000, 3)?;
    let d0: Vec<f64> = bundle.z(700).iter().map(|v| 2.0 * v).collect();
    let eps = bundle.epsilon().to_vec();
    let noisy = forward_sample(&d0, 250, &eps, &sched)?;
    let expression = [0.0, 0.6, 0.0];
    let obj = DenoiserObjective {
        net: &net,
        samples: vec![EpsSample { noisy: &noisy, t: 250, expression: &expression, identity: IdentityInput::Neutral(&mesh), target: &eps }],
    };

    let report = gradient_check(&obj, net.params(), 1e-5, 200, 0.0, 11)?;
    let worst = report.worst().expect("coordinates checked");
    println!("{} parameters, {} coordinates checked", net.params().num_elements(), report.entries.len());
    println!("max relative error {:.2e} at {}[{}] (analytic {:.6e}, numeric {:.6e})", worst.rel_error, worst.tensor, worst.element, worst.analytic, worst.numeric);
    Ok(())
}
