//! Mod-2 and lift degrees of a few point singularities.

use cosserat::degree::{mod2_degree_at, ProbeOptions};
use cosserat::sampler::{FnSampler, Hedgehog, TwoCharge};
use cosserat::so3::Vec3;

fn main() -> cosserat::Result<()> {
    let opts = ProbeOptions::default();
    let origin = Vec3::zeros();
    let hedgehog = mod2_degree_at(&Hedgehog { center: origin }, &origin, 0.5, &opts)?;
    // the lift is defined up to sign and n ↦ −n negates the degree, so only
    // the parity and relative signs within one gauge carry information
    println!("hedgehog: {hedgehog:?}");

    // x ↦ −x/|x| has degree −1 but the same rotation field
    let anti = FnSampler(|x: &Vec3| Some((*x, -x.normalize())));
    println!("antipodal hedgehog: {:?}", mod2_degree_at(&anti, &origin, 0.5, &opts)?);

    let (p, n) = (Vec3::new(0.0, 0.0, -0.3), Vec3::new(0.0, 0.0, 0.3));
    let dipole = TwoCharge::dipole(p, n);
    println!("dipole around P: {:?}", mod2_degree_at(&dipole, &p, 0.1, &opts)?);
    println!("dipole around N: {:?}", mod2_degree_at(&dipole, &n, 0.1, &opts)?);
    println!("dipole around both: {:?}", mod2_degree_at(&dipole, &origin, 0.8, &opts)?);
    Ok(())
}
