//! Discrete energy of a few fields on the unit ball.

use cosserat::grid::{CosseratField, GridDomain, Shape};
use cosserat::sampler::{FieldSampler, Hedgehog};
use cosserat::so3::{MaterialConstants, Vec3};

fn main() -> cosserat::Result<()> {
    let c = MaterialConstants::unit();
    let ball = Shape::Ball { center: [0.0; 3], radius: 1.0 };
    for h in [1.0 / 16.0, 1.0 / 32.0] {
        let domain = GridDomain::new(ball, h)?;
        let rigid = CosseratField::rigid_base(domain.clone());
        let off = Hedgehog { center: Vec3::new(0.0, 0.0, 1.5) };
        let smooth = CosseratField::from_fn(domain, |x| off.sample(x).unwrap());
        println!(
            "h = 1/{:.0}: {} nodes, rigid {:e}, off-center hedgehog {:.4} (curvature {:.4})",
            1.0 / h,
            rigid.domain.node_count(),
            rigid.energy(&c).total,
            smooth.energy(&c).total,
            smooth.energy(&c).curvature
        );
    }
    Ok(())
}
