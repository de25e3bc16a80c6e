//! Compare tape gradients of the full AR-VAE loss against central finite
//! differences on a toy model.
//!
//! cargo run --example gradcheck

use arvae::attrreg::{ar_vae_loss, ArVaeConfig, RegEntry, RegularizationSpec};
use arvae::numgrad::gradcheck::{finite_difference, max_relative_error, STEP};
use arvae::numgrad::{SeededRng, Tensor};
use arvae::vae::{Activation, Architecture, MlpVae, OutputHead};

fn main() -> arvae::Result<()> {
    let arch = Architecture {
        input_width: 16,
        encoder_hidden: vec![8],
        decoder_hidden: vec![8],
        latent: 4,
        activation: Activation::Tanh,
        head: OutputHead::Real,
    };
    let model = MlpVae::new(arch.clone(), &mut SeededRng::new(1))?;
    let mut rng = SeededRng::new(2);
    let x = Tensor::matrix(8, 16, (0..128).map(|_| rng.uniform()).collect())?;
    let attrs: Vec<Vec<f64>> = (0..2)
        .map(|_| (0..8).map(|_| rng.standard_normal()).collect())
        .collect();
    let spec = RegularizationSpec::new(
        vec![
            RegEntry { name: "a".into(), attribute: 0, dim: 0 },
            RegEntry { name: "b".into(), attribute: 1, dim: 3 },
        ],
        4,
    )?;
    let config = ArVaeConfig::images();

    let loss = |m: &MlpVae| -> arvae::Result<(f64, Vec<Tensor>)> {
        let mut s = m.session();
        let l = ar_vae_loss(&mut s, &x, &attrs, &spec, &config, &mut SeededRng::new(3))?;
        Ok((s.tape.value(l.total).item()?, s.gradients(l.total)?))
    };
    let (value, analytic) = loss(&model)?;
    let numeric = finite_difference(model.params(), STEP, |p| {
        let m = MlpVae::from_parameters(arch.clone(), p.clone()).expect("same shapes");
        loss(&m).expect("loss").0
    });
    println!("loss {value:.6}");
    for ((name, _), (a, n)) in model.params().iter().zip(analytic.iter().zip(&numeric)) {
        let err = max_relative_error(std::slice::from_ref(a), std::slice::from_ref(n), 1e-6);
        println!("{name:>14}  max rel err {err:.2e}");
    }
    println!("overall {:.2e}", max_relative_error(&analytic, &numeric, 1e-6));
    Ok(())
}
