//! Quick analytic checks run by `vibcascade selfcheck`.

use std::sync::Arc;

use crate::bound::{solve_channel, Manifold, SolveOptions, Spin};
use crate::curves::{make_morse, CurveKind, RadialCurve};
use crate::grid::build_uniform;
use crate::rates::{dipole_element, partial_rate, ChannelRule};
use crate::units;
use crate::Result;

#[derive(Debug, Clone, serde::Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, err: f64, tol: f64) -> Check {
    Check {
        name,
        passed: err <= tol,
        detail: format!("error {err:.3e} (tolerance {tol:.0e})"),
    }
}

fn harmonic(mu: f64, omega: f64, r0: f64) -> Result<RadialCurve> {
    let k = mu * omega * omega;
    let rs: Vec<f64> = (0..4001).map(|i| 2.0 + i as f64 * 0.0015).collect();
    let vs = rs.iter().map(|r| 0.5 * k * (r - r0) * (r - r0)).collect();
    RadialCurve::from_samples(CurveKind::Potential, "harmonic", rs, vs, None)
}

/// Runs every check; an `Err` means a check could not be evaluated at all.
pub fn run() -> Result<Vec<Check>> {
    let opts = SolveOptions::default();
    let mut out = Vec::new();

    let (mu, omega) = (2000.0, 0.01);
    let grid = Arc::new(build_uniform(2.0, 8.0, 256)?);
    let ho = solve_channel(&harmonic(mu, omega, 5.0)?, &grid, mu, 0.1, &opts)?;
    let err = ho
        .iter()
        .take(8)
        .map(|l| (l.energy / (omega * (l.v as f64 + 0.5)) - 1.0).abs())
        .fold(0.0, f64::max);
    out.push(check("harmonic levels", err, 1e-8));

    let morse = make_morse(0.02, 0.9, 5.0, 0.0)?;
    let params = morse.morse_params().expect("analytic Morse");
    let g = Arc::new(build_uniform(3.0, 16.0, 400)?);
    let levels = solve_channel(&morse, &g, mu, -0.2 * 0.02, &opts)?;
    let err = levels
        .iter()
        .map(|l| units::hartree_to_cm((l.energy - params.level_energy(mu, l.v)).abs()))
        .fold(0.0, f64::max);
    out.push(check("Morse levels (cm-1)", err, 1e-4));

    let d = RadialCurve::from_samples(
        CurveKind::Dipole,
        "r",
        (0..41).map(|i| 1.0 + 0.25 * i as f64).collect(),
        (0..41).map(|i| 1.0 + 0.25 * i as f64 - 5.0).collect(),
        None,
    )?;
    let well = Manifold::Single {
        label: "ho".into(),
        spin: Spin::Singlet,
        levels: ho,
    };
    let (l1, l0) = (well.level(1).expect("level"), well.level(0).expect("level"));
    let e = dipole_element(&l1, &l0, &d, ChannelRule::BySpin)?;
    let closed = 4.0 / 3.0 * units::FINE_STRUCTURE.powi(3) * omega.powi(3)
        / (2.0 * mu * omega)
        / units::AU_TIME_S;
    out.push(check(
        "oscillator Einstein A",
        (e.a_partial / closed - 1.0).abs(),
        1e-8,
    ));
    let scale = (partial_rate(2.0 * e.nu, e.mu2) / (8.0 * e.a_partial) - 1.0).abs();
    out.push(check("cubic energy scaling", scale, 0.0));

    let shift = 0.3;
    let up = solve_channel(&harmonic(mu, omega, 5.0)?, &grid, mu, 0.02, &opts)?;
    let down = solve_channel(&harmonic(mu, omega, 5.0 + shift)?, &grid, mu, 0.02, &opts)?;
    let s = crate::bound::overlap(&up[0], &down[0], None)?;
    let fcf = (-shift * shift * mu * omega / 2.0).exp();
    out.push(check(
        "displaced-oscillator overlap",
        (s * s / fcf - 1.0).abs(),
        1e-6,
    ));
    Ok(out)
}
