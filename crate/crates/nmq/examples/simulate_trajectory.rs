//! Integrate a single monitored trajectory of the reference model with the
//! full composite filter and print a few conditional expectation values.

use nmq::algebra::sigma_z;
use nmq::engines::run_full_sme;
use nmq::models::{reference_init, reference_model};
use nmq::sde::{derive_seed, wiener_path};

fn main() -> nmq::Result<()> {
    let spec = reference_model();
    let dt = 1e-3;
    let path = wiener_path(derive_seed(1, 0), 0.0, dt, 2000)?;
    let traj = run_full_sme(&spec, &reference_init(), &path, true)?;

    let sz = sigma_z();
    println!("{:>6}  {:>12}  {:>12}  {:>12}", "t", "<sigma_z>", "trace", "record Y");
    for step in (0..=2000).step_by(200) {
        let rho = &traj.principal[step];
        let expect = (&sz * rho).trace().re;
        println!(
            "{:>6.2}  {:>12.6}  {:>12.9}  {:>12.6}",
            traj.times[step], expect, traj.traces[step], traj.record_y[step]
        );
    }
    Ok(())
}
