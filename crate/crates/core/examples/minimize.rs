//! Relaxing a perturbed field with fixed boundary values.

use cosserat::grid::{CosseratField, GridDomain, Shape};
use cosserat::minimize::{minimize_restricted, write_trace, Dirichlet, SolverConfig};
use cosserat::so3::{MaterialConstants, Vec3};

fn main() -> cosserat::Result<()> {
    let c = MaterialConstants::unit();
    let domain = GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, 1.0 / 12.0)?;
    let init = CosseratField::from_fn(domain, |x| {
        let bump = (1.0 - x.norm_squared()).max(0.0);
        let n = Vec3::new(0.6 * bump * x.y, -0.6 * bump * x.x, 1.0).normalize();
        (Vec3::new(-x.x, -x.y, x.z) + Vec3::new(0.2 * bump, 0.0, 0.1 * bump), n)
    });
    let cfg = SolverConfig { max_iters: 400, ..SolverConfig::default() };
    let out = minimize_restricted(&init, &Dirichlet::from_field(&init), &cfg, &c)?;
    println!("stopped: {:?} after {} iterations", out.stop, out.trace.len() - 1);
    println!("energy {:.6} → {:.6}", out.initial.total, out.fin.total);
    let every: Vec<_> = out.trace.iter().step_by(50).cloned().collect();
    write_trace(&every, std::io::stdout())?;
    Ok(())
}
