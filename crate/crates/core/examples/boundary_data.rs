//! Boundary data with N stacked dipole pairs inside the unit ball.

use cosserat::boundary::{thm1_boundary_data, BoundaryDataSpec};
use cosserat::degree::ProbeOptions;
use cosserat::so3::MaterialConstants;

fn main() -> cosserat::Result<()> {
    let c = MaterialConstants::unit();
    for n in [1, 2, 3] {
        // the energy is about 128πNε, so ε must shrink like 1/N²
        let spec = BoundaryDataSpec::new(n, 1.0 / (256.0 * (n * n) as f64));
        let data = thm1_boundary_data(&spec, &c)?;
        let man = data.manifest(&ProbeOptions::default())?;
        println!(
            "N = {n}, ε = {:.2e}: energy {:.5} < π/N = {:.5}, separation {:.4} ≥ {:.4}, trace degree {}",
            spec.epsilon, man.energy, man.budget, man.separation_gap, man.separation_required, man.trace_lift_degree
        );
        for s in &man.sites {
            println!("  {}{}: P {:?} N {:?}", s.label, s.index, s.p, s.n);
        }
    }
    match thm1_boundary_data(&BoundaryDataSpec::new(1, 0.05), &c) {
        Ok(_) => println!("ε = 0.05 accepted"),
        Err(e) => println!("ε = 0.05 rejected: {e}"),
    }
    Ok(())
}
