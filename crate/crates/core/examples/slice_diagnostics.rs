//! Slice diagnostics on the boundary-data field.

use cosserat::boundary::{thm1_boundary_data, BoundaryDataSpec};
use cosserat::degree::ProbeOptions;
use cosserat::diagnostics::{bands, minimizer_energy_audit, slice_diagnostics, SliceConfig};
use cosserat::so3::MaterialConstants;

fn main() -> cosserat::Result<()> {
    let c = MaterialConstants::unit();
    let spec = BoundaryDataSpec::new(2, 1e-3);
    let data = thm1_boundary_data(&spec, &c)?;
    let h = 1.0 / 32.0;
    let field = data.grid(h)?;
    println!("disc bands: {:?}", bands(&spec, h));
    let report = slice_diagnostics(&field, &spec, &data.field, &SliceConfig::default(), &ProbeOptions::default())?;
    println!("levels {:?}", report.mu_levels);
    println!("disc energies {:?}, slice degrees {:?}", report.disc_energies, report.disc_degrees);
    println!("singularities per slice {:?}", report.singularities_per_slice);
    for a in minimizer_energy_audit(field.energy(&c).total, &report, &spec).assertions {
        println!("{:>5} {}: {:.3e} vs {:.3e}", if a.passed { "ok" } else { "FAIL" }, a.name, a.measured, a.threshold);
    }
    Ok(())
}
