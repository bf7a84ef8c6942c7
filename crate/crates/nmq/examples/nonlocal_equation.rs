//! Solve the time-nonlocal equation for the projected unconditional state
//! and compare it with the projection of the directly solved master equation.

use nmq::algebra::trace_distance;
use nmq::engines::{solve_gksl, solve_nz, GeneratorChoice, NzQuadrature, StateSeries};
use nmq::models::{reference_init, reference_model};
use nmq::superop::{projector_p, ProjectorKind};

fn main() -> nmq::Result<()> {
    let spec = reference_model();
    let init = reference_init();
    let (dt, n) = (1e-3, 2000);
    let kind = ProjectorKind::BlockDiagonal;
    let (p, _) = projector_p(&spec, &kind)?;
    let gksl = solve_gksl(&spec, &init, 0.0, dt, n)?;
    let direct = match &gksl.states {
        StateSeries::Composite(v) => v,
        _ => unreachable!(),
    };

    for quadrature in [NzQuadrature::LeftRectangle, NzQuadrature::Trapezoid] {
        let nz = solve_nz(&spec, &kind, &init, GeneratorChoice::Qq, quadrature, 0.0, dt, n)?;
        let states = match &nz.states {
            StateSeries::Composite(v) => v,
            _ => unreachable!(),
        };
        let mut sup = 0.0f64;
        for (g, s) in direct.iter().zip(states) {
            sup = sup.max(trace_distance(&p.apply(g), s)?);
        }
        println!("{quadrature:?} memory quadrature: sup trace distance {sup:.3e}");
    }
    Ok(())
}
