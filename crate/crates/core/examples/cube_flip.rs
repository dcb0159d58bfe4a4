//! Flipping the mod-2 degree on a cube boundary with a bubble.

use std::f64::consts::PI;

use cosserat::bubble::{bisect_alpha0, bubble_energy_within, cube_flip};
use cosserat::degree::ProbeOptions;
use cosserat::sampler::Constant;
use cosserat::so3::MaterialConstants;

fn main() -> cosserat::Result<()> {
    let c = MaterialConstants::unit();
    let eps = 1.0;
    let alpha0 = bisect_alpha0(&Constant::rigid(), 1.0, eps, &c, 20)?;
    println!("largest admissible α: {alpha0:.5}");
    for alpha in [alpha0 / 4.0, alpha0 / 2.0, alpha0] {
        let flip = cube_flip(Constant::rigid(), 1.0, alpha, eps, &c, &ProbeOptions::default())?;
        let r = &flip.report;
        println!(
            "α = {alpha:.5}: integral {:.4} of budget {:.4}, inner bubble {:.4} vs {:.4}, degree {} → {}",
            r.disc.total,
            64.0 * PI + eps,
            r.disc.curvature_inner / 8.0,
            bubble_energy_within(alpha, alpha / 2.0),
            r.degree_before,
            r.degree_after
        );
    }
    Ok(())
}
