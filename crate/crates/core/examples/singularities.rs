//! Locating singular points on a grid and verifying a dipole.

use cosserat::degree::ProbeOptions;
use cosserat::grid::{CosseratField, GridDomain, Shape};
use cosserat::sampler::{FieldSampler, TwoCharge};
use cosserat::singular::{find_singularities, verify_dipole};
use cosserat::so3::Vec3;

fn main() -> cosserat::Result<()> {
    let opts = ProbeOptions::default();
    let (p, n) = (Vec3::new(0.05, -0.02, -0.4), Vec3::new(0.05, -0.02, 0.4));
    let charges = TwoCharge::dipole(p, n);
    let h = 1.0 / 24.0;
    let field = CosseratField::from_fn(GridDomain::new(Shape::Ball { center: [0.0; 3], radius: 1.0 }, h)?, |x| charges.sample(x).unwrap());
    for s in find_singularities(&field, 2.0 * h, &opts)? {
        println!("singular point at {:?}: mod 2 {:?}, lift {:?}", s.location, s.mod2_degree, s.lift_degree);
    }
    let record = verify_dipole(&charges, &p, &n, 0.2, &opts)?;
    println!("dipole verified: {} with d = {:?}", record.verified, record.d);
    let equal = verify_dipole(&TwoCharge::equal(p, n), &p, &n, 0.2, &opts)?;
    println!("equal charges verified: {} ({:?})", equal.verified, equal.failures);
    Ok(())
}
