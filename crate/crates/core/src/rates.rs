//! Transition dipole matrix elements, Einstein A coefficients and vibrational
//! branching.
//!
//! The spontaneous emission rate between two vibronic levels is
//!
//! ```text
//! A = (4/3) α³ ΔE³ |⟨i|D|j⟩|²      (atomic units of inverse time)
//! ```
//!
//! which is the SI expression `16π³ν³|D|²/(3ε₀c³h)` rewritten with ħ = e = mₑ
//! = 4πε₀ = 1. It is converted to s⁻¹ once, through [`units::AU_TIME_S`].

use crate::bound::{weighted_dot, LevelView, Manifold, Spin};
use crate::curves::{CurveKind, RadialCurve};
use crate::error::{ensure, Error, Result};
use crate::units;

/// Transitions with `|ΔE|` below this (hartree) carry no rate.
pub const MIN_DELTA_E: f64 = 1e-12;

/// Prefactor turning `ΔE³·μ²` (atomic units) into a rate in s⁻¹.
pub const EINSTEIN_A_PER_S: f64 =
    4.0 / 3.0 * units::FINE_STRUCTURE * units::FINE_STRUCTURE * units::FINE_STRUCTURE
        / units::AU_TIME_S;

/// Which channel of a coupled level a dipole acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRule {
    /// The channel whose spin matches the partner level's spin: the triplet
    /// component towards triplet manifolds, the singlet component towards
    /// singlet manifolds.
    #[default]
    BySpin,
    /// A fixed channel index (0 = first, 1 = second). Its spin must still agree
    /// with the partner level.
    Channel(usize),
}

/// Key of one vibronic level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct LevelKey {
    pub manifold: String,
    pub v: usize,
}

impl LevelKey {
    pub fn new(manifold: impl Into<String>, v: usize) -> Self {
        Self {
            manifold: manifold.into(),
            v,
        }
    }

    pub fn of(level: &LevelView<'_>) -> Self {
        Self::new(level.manifold(), level.v())
    }
}

impl std::fmt::Display for LevelKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(v={})", self.manifold, self.v)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TransitionElement {
    pub from: LevelKey,
    pub to: LevelKey,
    /// |⟨i|D|j⟩|² in (e·a₀)²
    pub mu2: f64,
    /// E_i − E_j in hartree
    pub nu: f64,
    /// s⁻¹; zero unless E_i − E_j exceeds [`MIN_DELTA_E`]
    pub a_partial: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RateTable {
    pub source: LevelKey,
    pub target: String,
    /// one element per target level, in increasing v_j
    pub elements: Vec<TransitionElement>,
    pub a_total: f64,
    /// A_partial / A_total, all zero when nothing radiates
    pub branching: Vec<f64>,
}

impl RateTable {
    /// Radiative lifetime towards this manifold alone (s), infinite if dark.
    pub fn lifetime(&self) -> f64 {
        1.0 / self.a_total
    }
}

/// Rate in s⁻¹ for energy gap `delta_e` (hartree) and squared dipole `mu2`.
pub fn partial_rate(delta_e: f64, mu2: f64) -> f64 {
    if delta_e <= MIN_DELTA_E {
        return 0.0;
    }
    EINSTEIN_A_PER_S * delta_e * delta_e * delta_e * mu2
}

fn spins(level: &LevelView<'_>) -> Vec<Spin> {
    match level {
        LevelView::Single(_, s) => vec![*s],
        LevelView::Coupled(_, s) => s.to_vec(),
    }
}

fn amplitudes<'a>(level: &LevelView<'a>) -> Vec<&'a [f64]> {
    match level {
        LevelView::Single(l, _) => vec![&l.psi],
        LevelView::Coupled(l, _) => vec![&l.psi[0], &l.psi[1]],
    }
}

/// Pairs of (channel of i, channel of j) the dipole connects.
fn channel_pairs(
    i: &LevelView<'_>,
    j: &LevelView<'_>,
    rule: ChannelRule,
) -> Result<Vec<(usize, usize)>> {
    let (si, sj) = (spins(i), spins(j));
    let pick = |own: &[Spin], partner: Spin, who: &LevelView<'_>| -> Result<usize> {
        match rule {
            ChannelRule::BySpin => own.iter().position(|s| *s == partner).ok_or_else(|| {
                Error::Validation(format!(
                    "{} has no {partner} channel to couple with",
                    LevelKey::of(who)
                ))
            }),
            ChannelRule::Channel(c) => {
                ensure!(
                    c < own.len(),
                    Validation,
                    "{} has no channel {c}",
                    LevelKey::of(who)
                );
                ensure!(
                    own[c] == partner,
                    Validation,
                    "channel {c} of {} is {} but the partner is {partner}",
                    LevelKey::of(who),
                    own[c]
                );
                Ok(c)
            }
        }
    };
    match (si.len(), sj.len()) {
        (1, 1) => {
            ensure!(
                si[0] == sj[0],
                Validation,
                "{} ({}) and {} ({}) differ in spin",
                LevelKey::of(i),
                si[0],
                LevelKey::of(j),
                sj[0]
            );
            Ok(vec![(0, 0)])
        }
        (2, 1) => Ok(vec![(pick(&si, sj[0], i)?, 0)]),
        (1, 2) => Ok(vec![(0, pick(&sj, si[0], j)?)]),
        _ => {
            // coupled to coupled: every spin-matched channel pair
            ensure!(
                rule == ChannelRule::BySpin,
                Validation,
                "a fixed channel is ambiguous between two coupled levels"
            );
            Ok((0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .filter(|&(a, b)| si[a] == sj[b])
                .collect())
        }
    }
}

/// `⟨ψ_i|D|ψ_j⟩²` restricted to the channels selected by `rule`.
pub fn dipole_element(
    level_i: &LevelView<'_>,
    level_j: &LevelView<'_>,
    dipole: &RadialCurve,
    rule: ChannelRule,
) -> Result<TransitionElement> {
    ensure!(
        dipole.kind() == CurveKind::Dipole,
        Validation,
        "'{}' is a {} curve, expected a dipole",
        dipole.label(),
        dipole.kind()
    );
    let (ai, aj) = (amplitudes(level_i), amplitudes(level_j));
    let mut mu = 0.0;
    for (ci, cj) in channel_pairs(level_i, level_j, rule)? {
        mu += weighted_dot(level_i.grid(), ai[ci], level_j.grid(), aj[cj], Some(dipole))?;
    }
    let nu = level_i.energy() - level_j.energy();
    let mu2 = mu * mu;
    Ok(TransitionElement {
        from: LevelKey::of(level_i),
        to: LevelKey::of(level_j),
        mu2,
        nu,
        a_partial: partial_rate(nu, mu2),
    })
}

/// Emission rates from `level_i` into every level of `target`.
pub fn einstein_a(
    level_i: &LevelView<'_>,
    target: &Manifold,
    dipole: &RadialCurve,
    rule: ChannelRule,
) -> Result<RateTable> {
    let mut elements = Vec::with_capacity(target.len());
    for level_j in target.levels() {
        elements.push(dipole_element(level_i, &level_j, dipole, rule)?);
    }
    let mut a_total = 0.0;
    for e in &elements {
        a_total += e.a_partial;
    }
    let branching = elements
        .iter()
        .map(|e| {
            if a_total > 0.0 {
                e.a_partial / a_total
            } else {
                0.0
            }
        })
        .collect();
    Ok(RateTable {
        source: LevelKey::of(level_i),
        target: target.label().to_string(),
        elements,
        a_total,
        branching,
    })
}

/// Normalized vibrational branching of `level_i` into `target`.
pub fn vib_distribution(
    level_i: &LevelView<'_>,
    target: &Manifold,
    dipole: &RadialCurve,
    rule: ChannelRule,
) -> Result<Vec<f64>> {
    let table = einstein_a(level_i, target, dipole, rule)?;
    if table.a_total > 0.0 {
        Ok(table.branching)
    } else {
        Err(Error::UndefinedDistribution(format!(
            "{} does not radiate into {}",
            table.source, table.target
        )))
    }
}

/// Target level with the largest squared dipole; ties go to the lower v.
pub fn strongest_transition(
    level_i: &LevelView<'_>,
    target: &Manifold,
    dipole: &RadialCurve,
    rule: ChannelRule,
) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for level_j in target.levels() {
        let e = dipole_element(level_i, &level_j, dipole, rule)?;
        if best.is_none_or(|(_, m)| e.mu2 > m) {
            best = Some((level_j.v(), e.mu2));
        }
    }
    best.ok_or_else(|| Error::Validation(format!("manifold '{}' has no levels", target.label())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::{solve_channel, solve_coupled, CoupledChannels, SolveOptions};
    use crate::grid::{build_uniform, MappedGrid};
    use std::sync::Arc;

    fn harmonic(label: &str, mu: f64, omega: f64, r0: f64, t: f64) -> RadialCurve {
        let k = mu * omega * omega;
        let rs: Vec<f64> = (0..4001).map(|i| 2.0 + i as f64 * 0.0015).collect();
        let vs = rs
            .iter()
            .map(|r| t + 0.5 * k * (r - r0) * (r - r0))
            .collect();
        RadialCurve::from_samples(CurveKind::Potential, label, rs, vs, None).unwrap()
    }

    fn linear_dipole(r0: f64) -> RadialCurve {
        let rs: Vec<f64> = (0..101).map(|i| 1.0 + i as f64 * 0.2).collect();
        let ds = rs.iter().map(|r| r - r0).collect();
        RadialCurve::from_samples(CurveKind::Dipole, "d", rs, ds, None).unwrap()
    }

    fn single(curve: &RadialCurve, mu: f64, ceiling: f64, spin: Spin) -> Manifold {
        let grid = Arc::new(build_uniform(2.0, 8.0, 256).unwrap());
        let levels = solve_channel(curve, &grid, mu, ceiling, &SolveOptions::default()).unwrap();
        Manifold::Single {
            label: curve.label().to_string(),
            spin,
            levels,
        }
    }

    const MU: f64 = 2000.0;
    const OMEGA: f64 = 0.01;

    #[test]
    fn conversion_factor_matches_si_expression() {
        // 16π³ν³|D|²/(3ε₀c³h) with SI constants only
        let pi = std::f64::consts::PI;
        let h = 6.626_070_15e-34;
        let c: f64 = 299_792_458.0;
        let eps0 = 8.854_187_812_8e-12;
        let e = 1.602_176_634e-19;
        let a0 = 5.291_772_109_03e-11;
        let e_h = 4.359_744_722_207_1e-18;
        let (de, mu2): (f64, f64) = (0.05, 3.0);
        let nu = de * e_h / h;
        let d = mu2.sqrt() * e * a0;
        let si = 16.0 * pi.powi(3) * nu.powi(3) * d * d / (3.0 * eps0 * c.powi(3) * h);
        let ours = partial_rate(de, mu2);
        assert!((ours / si - 1.0).abs() < 1e-9, "{ours} vs {si}");
        assert!((EINSTEIN_A_PER_S / 2.142_000_780_878_56e10 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn harmonic_matrix_element_and_rate() {
        let well = single(&harmonic("x", MU, OMEGA, 5.0, 0.0), MU, 0.1, Spin::Singlet);
        let d = linear_dipole(5.0);
        let up = well.level(1).unwrap();
        let down = well.level(0).unwrap();
        let e = dipole_element(&up, &down, &d, ChannelRule::BySpin).unwrap();
        let expect = 1.0 / (2.0 * MU * OMEGA);
        assert!((e.mu2 / expect - 1.0).abs() < 1e-9, "{}", e.mu2);
        let a_au = 4.0 / 3.0 * units::FINE_STRUCTURE.powi(3) * OMEGA.powi(3) * expect;
        assert!((e.a_partial / (a_au / units::AU_TIME_S) - 1.0).abs() < 1e-8);
        // reverse direction absorbs, no rate
        let r = dipole_element(&down, &up, &d, ChannelRule::BySpin).unwrap();
        assert_eq!(r.a_partial, 0.0);
        assert!((r.mu2 - e.mu2).abs() < 1e-15 * e.mu2.max(1.0));
    }

    #[test]
    fn zero_dipole_and_upward_only_targets() {
        let well = single(&harmonic("x", MU, OMEGA, 5.0, 0.0), MU, 0.05, Spin::Singlet);
        let zero = RadialCurve::constant(CurveKind::Dipole, "zero", 0.0);
        let lvl = well.level(3).unwrap();
        let t = einstein_a(&lvl, &well, &zero, ChannelRule::BySpin).unwrap();
        assert!(t.elements.iter().all(|e| e.mu2 == 0.0));
        assert_eq!(t.a_total, 0.0);
        let ground = well.level(0).unwrap();
        let t = einstein_a(&ground, &well, &linear_dipole(5.0), ChannelRule::BySpin).unwrap();
        assert_eq!(t.a_total, 0.0);
        assert!(matches!(
            vib_distribution(&ground, &well, &linear_dipole(5.0), ChannelRule::BySpin),
            Err(Error::UndefinedDistribution(_))
        ));
    }

    #[test]
    fn empty_target_gives_zero_rate_but_no_strongest() {
        let well = single(&harmonic("x", MU, OMEGA, 5.0, 0.0), MU, 0.05, Spin::Singlet);
        let empty = Manifold::Single {
            label: "none".into(),
            spin: Spin::Singlet,
            levels: vec![],
        };
        let lvl = well.level(0).unwrap();
        let d = linear_dipole(5.0);
        let t = einstein_a(&lvl, &empty, &d, ChannelRule::BySpin).unwrap();
        assert_eq!(t.a_total, 0.0);
        assert!(t.elements.is_empty());
        assert!(strongest_transition(&lvl, &empty, &d, ChannelRule::BySpin).is_err());
    }

    fn poisson(s: f64, n: usize) -> f64 {
        let mut p = (-s).exp();
        for k in 1..=n {
            p *= s / k as f64;
        }
        p
    }

    #[test]
    fn displaced_oscillator_follows_poisson() {
        let shift = 0.3;
        let upper = single(&harmonic("u", MU, OMEGA, 5.0, 0.3), MU, 0.34, Spin::Singlet);
        let lower = single(
            &harmonic("l", MU, OMEGA, 5.0 + shift, 0.0),
            MU,
            0.2,
            Spin::Singlet,
        );
        let d = RadialCurve::constant(CurveKind::Dipole, "d", 1.0);
        let s = shift * shift * MU * OMEGA / 2.0;
        let top = upper.level(0).unwrap();
        let table = einstein_a(&top, &lower, &d, ChannelRule::BySpin).unwrap();
        let mut weights = Vec::new();
        for (j, e) in table.elements.iter().enumerate() {
            let fcf = poisson(s, j);
            assert!((e.mu2 - fcf).abs() < 1e-9, "v={j}: {} vs {fcf}", e.mu2);
            weights.push(fcf * e.nu.powi(3));
        }
        let norm: f64 = weights.iter().sum();
        let b = vib_distribution(&top, &lower, &d, ChannelRule::BySpin).unwrap();
        for (bj, w) in b.iter().zip(&weights) {
            assert!((bj - w / norm).abs() < 1e-9);
        }
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (vj, _) = strongest_transition(&top, &lower, &d, ChannelRule::BySpin).unwrap();
        assert!(
            vj == s.round() as usize || vj == s.floor() as usize,
            "{vj} vs {s}"
        );
        // ⟨0|0'⟩² = exp(−s)
        assert!((table.elements[0].mu2 - (-s).exp()).abs() < 1e-9);
    }

    #[test]
    fn closure_sum_rule() {
        let m = crate::curves::make_morse(0.05, 1.0, 5.0, 0.0).unwrap();
        let grid = Arc::new(build_uniform(3.2, 14.0, 320).unwrap());
        let levels = solve_channel(&m, &grid, MU, 0.0, &SolveOptions::default()).unwrap();
        let well = Manifold::Single {
            label: "m".into(),
            spin: Spin::Triplet,
            levels,
        };
        let d = linear_dipole(4.0);
        let lvl = well.level(0).unwrap();
        let t = einstein_a(&lvl, &well, &d, ChannelRule::BySpin).unwrap();
        let sum: f64 = t.elements.iter().map(|e| e.mu2).sum();
        let Manifold::Single { levels, .. } = &well else {
            unreachable!()
        };
        let psi = &levels[0].psi;
        let d2: f64 = psi
            .iter()
            .zip(grid.points())
            .map(|(p, r)| p * p * (r - 4.0) * (r - 4.0))
            .sum();
        assert!((sum / d2 - 1.0).abs() < 1e-3, "{sum} vs {d2}");
    }

    #[test]
    fn rates_scale_with_cube_of_energy() {
        for (de, mu2) in [(0.01, 2.0), (0.037, 0.4), (1e-3, 7.0)] {
            let base = partial_rate(de, mu2);
            assert_eq!(partial_rate(2.0 * de, mu2), 8.0 * base);
            assert_eq!(partial_rate(0.5 * de, mu2), base / 8.0);
        }
        assert_eq!(partial_rate(5e-13, 1.0), 0.0);
    }

    #[test]
    fn spin_mismatch_is_rejected() {
        let a = single(&harmonic("a", MU, OMEGA, 5.0, 0.0), MU, 0.03, Spin::Triplet);
        let x = single(&harmonic("x", MU, OMEGA, 5.0, 0.0), MU, 0.03, Spin::Singlet);
        let d = linear_dipole(5.0);
        let r = dipole_element(
            &a.level(1).unwrap(),
            &x.level(0).unwrap(),
            &d,
            ChannelRule::BySpin,
        );
        assert!(matches!(r, Err(Error::Validation(_))));
        let pot = harmonic("p", MU, OMEGA, 5.0, 0.0);
        let r = dipole_element(
            &x.level(1).unwrap(),
            &x.level(0).unwrap(),
            &pot,
            ChannelRule::BySpin,
        );
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    fn coupled_manifold(xi: f64, grid: &Arc<MappedGrid>) -> Manifold {
        let first = harmonic("A", MU, OMEGA, 5.0, 0.1);
        let second = harmonic("b", MU, OMEGA, 5.3, 0.095);
        let coupling = RadialCurve::constant(CurveKind::Coupling, "xi", xi);
        let ch = CoupledChannels {
            first: &first,
            second: &second,
            coupling: &coupling,
            diagonal: None,
        };
        let levels = solve_coupled(ch, grid, MU, 0.2, "0u", &SolveOptions::default()).unwrap();
        Manifold::Coupled {
            label: "0u".into(),
            spins: [Spin::Singlet, Spin::Triplet],
            levels,
        }
    }

    #[test]
    fn coupled_projection_vanishes_with_coupling() {
        let grid = Arc::new(build_uniform(2.0, 8.0, 256).unwrap());
        let x = single(&harmonic("X", MU, OMEGA, 4.8, 0.0), MU, 0.05, Spin::Singlet);
        let d = RadialCurve::constant(CurveKind::Dipole, "AX", 1.0);
        let x0 = x.level(0).unwrap();

        // ξ = 0: the lowest coupled level is pure b, which the singlet dipole cannot see
        let pure = coupled_manifold(0.0, &grid);
        let lvl = pure.level(0).unwrap();
        let LevelView::Coupled(c, _) = lvl else {
            unreachable!()
        };
        assert!(c.f_first < 1e-10);
        let e = dipole_element(&lvl, &x0, &d, ChannelRule::BySpin).unwrap();
        assert!(e.mu2 < 1e-20);

        let mut last = f64::INFINITY;
        for xi in [4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4, 0.0] {
            let m = coupled_manifold(xi, &grid);
            let lvl = m.level(0).unwrap();
            let mu2 = dipole_element(&lvl, &x0, &d, ChannelRule::BySpin)
                .unwrap()
                .mu2;
            assert!(mu2 <= last, "ξ={xi}: {mu2} > {last}");
            last = mu2;
        }
        assert!(last < 1e-20);

        // fixed channel that disagrees with the partner spin
        let bad = dipole_element(&lvl, &x0, &d, ChannelRule::Channel(1));
        assert!(matches!(bad, Err(Error::Validation(_))));
        let ok = dipole_element(&lvl, &x0, &d, ChannelRule::Channel(0)).unwrap();
        assert_eq!(ok.mu2, e.mu2);
    }

    #[test]
    fn strongest_tie_goes_to_lower_v() {
        // every element ties at zero
        let well = single(&harmonic("x", MU, OMEGA, 5.0, 0.0), MU, 0.05, Spin::Singlet);
        let zero = RadialCurve::constant(CurveKind::Dipole, "zero", 0.0);
        let (vj, mu2) =
            strongest_transition(&well.level(2).unwrap(), &well, &zero, ChannelRule::BySpin)
                .unwrap();
        assert_eq!((vj, mu2), (0, 0.0));
    }

    #[test]
    fn single_pairs_are_symmetric() {
        let m = crate::curves::make_morse(0.05, 1.0, 5.0, 0.0).unwrap();
        let well = single(&m, MU, -0.01, Spin::Triplet);
        let d = linear_dipole(4.0);
        for i in 0..5 {
            for j in 0..5 {
                let a = dipole_element(
                    &well.level(i).unwrap(),
                    &well.level(j).unwrap(),
                    &d,
                    ChannelRule::BySpin,
                )
                .unwrap();
                let b = dipole_element(
                    &well.level(j).unwrap(),
                    &well.level(i).unwrap(),
                    &d,
                    ChannelRule::BySpin,
                )
                .unwrap();
                assert!((a.mu2 - b.mu2).abs() <= 1e-13 * a.mu2.max(b.mu2) + 1e-26);
            }
        }
    }
}
