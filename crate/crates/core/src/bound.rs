//! Vibrational eigenpairs of single electronic channels and of two channels
//! coupled by a spin-orbit function.

use std::fmt;
use std::sync::Arc;

use crate::curves::{CurveKind, RadialCurve};
use crate::eigen::{eigh, SymMatrix};
use crate::error::{ensure, Error, Result};
use crate::grid::{kinetic_matrix, MappedGrid};

/// Levels whose turning points come closer than this many grid points to a
/// box edge are flagged.
pub const EDGE_MARGIN: usize = 5;

/// Eigenvalues closer than this (hartree) are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Relative amplitude below which a grid value does not count as a lobe.
const LOBE_TOL: f64 = 1e-6;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Singlet,
    Triplet,
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Singlet => "singlet",
            Self::Triplet => "triplet",
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    /// Turn boundary-contamination warnings into errors.
    pub strict: bool,
}

/// Vibrational level of a single channel. `psi` carries the quadrature
/// weights, so `Σ psi² = 1` and overlaps are plain dot products.
#[derive(Debug, Clone)]
pub struct VibLevel {
    pub v: usize,
    pub energy: f64,
    pub psi: Vec<f64>,
    pub manifold: String,
    /// classical turning points (bohr)
    pub turning_points: (f64, f64),
    pub grid: Arc<MappedGrid>,
}

/// Level of the two-channel coupled system, indexed by global energy order.
#[derive(Debug, Clone)]
pub struct CoupledLevel {
    pub v: usize,
    pub energy: f64,
    /// amplitudes on the first (A) and second (b) channel
    pub psi: [Vec<f64>; 2],
    /// weight of the first channel, Σ psi[0]²
    pub f_first: f64,
    pub manifold: String,
    pub turning_points: (f64, f64),
    pub grid: Arc<MappedGrid>,
}

impl CoupledLevel {
    pub fn fractions(&self) -> [f64; 2] {
        [self.f_first, 1.0 - self.f_first]
    }
}

/// Number of sign changes, ignoring amplitudes below the lobe tolerance.
pub fn count_nodes(psi: &[f64]) -> usize {
    let peak = psi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut last = 0.0f64;
    let mut nodes = 0;
    for &x in psi {
        if x.abs() <= LOBE_TOL * peak {
            continue;
        }
        if last != 0.0 && (x > 0.0) != (last > 0.0) {
            nodes += 1;
        }
        last = x;
    }
    nodes
}

/// Flips the vector so its first significant lobe is positive.
fn fix_sign(components: &mut [&mut Vec<f64>]) {
    let peak = components
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let n = components[0].len();
    for k in 0..n {
        let lead = components
            .iter()
            .map(|c| c[k])
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if lead.abs() > LOBE_TOL * peak {
            if lead < 0.0 {
                for c in components.iter_mut() {
                    c.iter_mut().for_each(|x| *x = -*x);
                }
            }
            return;
        }
    }
}

fn normalize(components: &mut [&mut Vec<f64>]) {
    let norm: f64 = components
        .iter()
        .flat_map(|c| c.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    for c in components.iter_mut() {
        c.iter_mut().for_each(|x| *x /= norm);
    }
}

fn sample(curve: &RadialCurve, grid: &MappedGrid) -> Result<Vec<f64>> {
    for note in curve.extrapolation_notes(grid.range().0, grid.range().1) {
        log::debug!("{note}");
    }
    grid.points().iter().map(|&r| curve.eval(r)).collect()
}

/// Turning points of `energy` in the sampled potential, and whether either lies
/// within [`EDGE_MARGIN`] points of the box edges.
fn turning_points(grid: &MappedGrid, potential: &[f64], energy: f64) -> ((f64, f64), bool) {
    let r = grid.points();
    let n = r.len();
    let inside: Vec<usize> = (0..n).filter(|&k| potential[k] < energy).collect();
    let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
        return ((f64::NAN, f64::NAN), true);
    };
    let cross = |a: usize, b: usize| {
        let (va, vb) = (potential[a] - energy, potential[b] - energy);
        r[a] + (r[b] - r[a]) * va / (va - vb)
    };
    let inner = if first == 0 {
        grid.range().0
    } else {
        cross(first - 1, first)
    };
    let outer = if last + 1 == n {
        grid.range().1
    } else {
        cross(last, last + 1)
    };
    let near_edge = first < EDGE_MARGIN || last + EDGE_MARGIN >= n;
    ((inner, outer), near_edge)
}

/// Collects levels whose turning points touch the box edge; strict mode fails
/// on the first one, otherwise a single summary warning is logged.
struct EdgeReport<'a> {
    opts: &'a SolveOptions,
    manifold: &'a str,
    flagged: Vec<usize>,
}

impl<'a> EdgeReport<'a> {
    fn new(opts: &'a SolveOptions, manifold: &'a str) -> Self {
        Self {
            opts,
            manifold,
            flagged: Vec::new(),
        }
    }

    fn flag(&mut self, v: usize, energy: f64) -> Result<()> {
        if self.opts.strict {
            return Err(Error::Boundary(format!(
                "manifold '{}' level {v} (E = {energy:.6e} Eh) has a turning point within {EDGE_MARGIN} grid points of the box edge",
                self.manifold
            )));
        }
        self.flagged.push(v);
        Ok(())
    }

    fn finish(self) {
        if let (Some(first), Some(last)) = (self.flagged.first(), self.flagged.last()) {
            log::warn!(
                "manifold '{}': {} level(s) between v={first} and v={last} have a turning point within {EDGE_MARGIN} grid points of the box edge",
                self.manifold,
                self.flagged.len()
            );
        }
    }
}

fn check_potential(curve: &RadialCurve, role: &str) -> Result<()> {
    ensure!(
        curve.kind() == CurveKind::Potential,
        Validation,
        "{role} '{}' is a {} curve, expected a potential",
        curve.label(),
        curve.kind()
    );
    Ok(())
}

/// All eigenpairs of `T + V` below `min(ceiling, V(∞))`, ordered by energy.
pub fn solve_channel(
    potential: &RadialCurve,
    grid: &Arc<MappedGrid>,
    mu: f64,
    ceiling: f64,
    opts: &SolveOptions,
) -> Result<Vec<VibLevel>> {
    check_potential(potential, "channel")?;
    let v_grid = sample(potential, grid)?;
    let mut h = kinetic_matrix(grid, mu)?;
    for (k, v) in v_grid.iter().enumerate() {
        h.add_diag(k, *v);
    }
    let cap = ceiling.min(potential.asymptote());
    let eig = eigh(&h)?;
    let mut edges = EdgeReport::new(opts, potential.label());
    let mut levels = Vec::new();
    for (v, (energy, mut psi)) in eig
        .values
        .into_iter()
        .zip(eig.vectors)
        .take_while(|(e, _)| *e < cap)
        .enumerate()
    {
        normalize(&mut [&mut psi]);
        fix_sign(&mut [&mut psi]);
        let (tp, near_edge) = turning_points(grid, &v_grid, energy);
        if near_edge {
            edges.flag(v, energy)?;
        }
        levels.push(VibLevel {
            v,
            energy,
            psi,
            manifold: potential.label().to_string(),
            turning_points: tp,
            grid: Arc::clone(grid),
        });
    }
    edges.finish();
    Ok(levels)
}

/// Curves defining a two-channel spin-orbit coupled system.
#[derive(Debug, Clone, Copy)]
pub struct CoupledChannels<'a> {
    pub first: &'a RadialCurve,
    pub second: &'a RadialCurve,
    pub coupling: &'a RadialCurve,
    /// optional diagonal correction subtracted from the second channel
    pub diagonal: Option<&'a RadialCurve>,
}

impl CoupledChannels<'_> {
    fn validate(&self) -> Result<()> {
        check_potential(self.first, "first channel")?;
        check_potential(self.second, "second channel")?;
        ensure!(
            self.coupling.kind() == CurveKind::Coupling,
            Validation,
            "coupling '{}' is a {} curve",
            self.coupling.label(),
            self.coupling.kind()
        );
        if let Some(d) = self.diagonal {
            ensure!(
                d.kind() == CurveKind::Coupling,
                Validation,
                "diagonal correction '{}' is a {} curve",
                d.label(),
                d.kind()
            );
        }
        Ok(())
    }

    /// Lowest eigenvalue of the 2×2 potential matrix as R → ∞.
    pub fn lower_asymptote(&self) -> f64 {
        let a = self.first.asymptote();
        let d = self.second.asymptote() - self.diagonal.map_or(0.0, |c| c.asymptote());
        let c = self.coupling.asymptote();
        0.5 * (a + d) - (0.25 * (a - d) * (a - d) + c * c).sqrt()
    }

    /// Lower eigenvalue of the 2×2 potential matrix at every grid point.
    pub fn lower_adiabat(&self, grid: &MappedGrid) -> Result<Vec<f64>> {
        let v1 = sample(self.first, grid)?;
        let mut v2 = sample(self.second, grid)?;
        if let Some(d) = self.diagonal {
            for (v, dv) in v2.iter_mut().zip(sample(d, grid)?) {
                *v -= dv;
            }
        }
        let xi = sample(self.coupling, grid)?;
        Ok(v1
            .iter()
            .zip(&v2)
            .zip(&xi)
            .map(|((a, d), c)| 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + c * c).sqrt())
            .collect())
    }

    /// The 2N×2N Hamiltonian `[[T+V₁, −ξ], [−ξ, T+V₂−δ]]`.
    pub fn hamiltonian(&self, grid: &MappedGrid, mu: f64) -> Result<SymMatrix> {
        self.validate()?;
        let n = grid.len();
        let t = kinetic_matrix(grid, mu)?;
        let v1 = sample(self.first, grid)?;
        let mut v2 = sample(self.second, grid)?;
        if let Some(d) = self.diagonal {
            for (v, dv) in v2.iter_mut().zip(sample(d, grid)?) {
                *v -= dv;
            }
        }
        let xi = sample(self.coupling, grid)?;
        let mut h = SymMatrix::zeros(2 * n);
        for i in 0..n {
            for j in 0..=i {
                let tij = t.get(i, j);
                h.set(i, j, tij);
                h.set(n + i, n + j, tij);
            }
            h.add_diag(i, v1[i]);
            h.add_diag(n + i, v2[i]);
            h.set(i, n + i, -xi[i]);
        }
        Ok(h)
    }
}

/// Eigenpairs of the coupled two-channel Hamiltonian below `ceiling` (capped at
/// the lower dissociation limit), in global energy order.
pub fn solve_coupled(
    channels: CoupledChannels<'_>,
    grid: &Arc<MappedGrid>,
    mu: f64,
    ceiling: f64,
    manifold: &str,
    opts: &SolveOptions,
) -> Result<Vec<CoupledLevel>> {
    let h = channels.hamiltonian(grid, mu)?;
    let n = grid.len();
    let lower = channels.lower_adiabat(grid)?;
    let cap = ceiling.min(channels.lower_asymptote());

    let eig = eigh(&h)?;
    let mut raw: Vec<(f64, [Vec<f64>; 2], f64)> = eig
        .values
        .into_iter()
        .zip(eig.vectors)
        .take_while(|(e, _)| *e < cap)
        .map(|(e, vec)| {
            let mut first = vec[..n].to_vec();
            let mut second = vec[n..].to_vec();
            normalize(&mut [&mut first, &mut second]);
            fix_sign(&mut [&mut first, &mut second]);
            let f: f64 = first.iter().map(|x| x * x).sum();
            (e, [first, second], f.clamp(0.0, 1.0))
        })
        .collect();

    // Within a degenerate cluster, larger first-channel weight comes first.
    let mut start = 0;
    while start < raw.len() {
        let mut end = start + 1;
        while end < raw.len() && raw[end].0 - raw[end - 1].0 < DEGENERACY_TOL {
            end += 1;
        }
        raw[start..end].sort_by(|a, b| b.2.total_cmp(&a.2));
        start = end;
    }

    let mut edges = EdgeReport::new(opts, manifold);
    let mut levels = Vec::with_capacity(raw.len());
    for (v, (energy, psi, f_first)) in raw.into_iter().enumerate() {
        let (tp, near_edge) = turning_points(grid, &lower, energy);
        if near_edge {
            edges.flag(v, energy)?;
        }
        levels.push(CoupledLevel {
            v,
            energy,
            psi,
            f_first,
            manifold: manifold.to_string(),
            turning_points: tp,
            grid: Arc::clone(grid),
        });
    }
    edges.finish();
    Ok(levels)
}

/// `Σ_k bra_k·w(R_k)·ket_k` in increasing k; `w ≡ 1` without a weight.
pub fn overlap(bra: &VibLevel, ket: &VibLevel, weight: Option<&RadialCurve>) -> Result<f64> {
    weighted_dot(&bra.grid, &bra.psi, &ket.grid, &ket.psi, weight)
}

pub(crate) fn weighted_dot(
    grid_a: &MappedGrid,
    a: &[f64],
    grid_b: &MappedGrid,
    b: &[f64],
    weight: Option<&RadialCurve>,
) -> Result<f64> {
    ensure!(
        grid_a.same_points(grid_b),
        Validation,
        "levels live on different grids"
    );
    let mut acc = 0.0;
    match weight {
        None => {
            for (x, y) in a.iter().zip(b) {
                acc += x * y;
            }
        }
        Some(w) => {
            for ((x, y), &r) in a.iter().zip(b).zip(grid_a.points()) {
                acc += x * w.eval(r)? * y;
            }
        }
    }
    Ok(acc)
}

/// Electronic character of a manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Character {
    Single(Spin),
    /// spins of the (first, second) channels
    Coupled([Spin; 2]),
}

/// Solved levels of one electronic manifold.
#[derive(Debug, Clone)]
pub enum Manifold {
    Single {
        label: String,
        spin: Spin,
        levels: Vec<VibLevel>,
    },
    Coupled {
        label: String,
        spins: [Spin; 2],
        levels: Vec<CoupledLevel>,
    },
}

/// Borrowed view of one level together with its electronic character.
#[derive(Debug, Clone, Copy)]
pub enum LevelView<'a> {
    Single(&'a VibLevel, Spin),
    Coupled(&'a CoupledLevel, [Spin; 2]),
}

impl<'a> LevelView<'a> {
    pub fn energy(&self) -> f64 {
        match self {
            Self::Single(l, _) => l.energy,
            Self::Coupled(l, _) => l.energy,
        }
    }

    pub fn v(&self) -> usize {
        match self {
            Self::Single(l, _) => l.v,
            Self::Coupled(l, _) => l.v,
        }
    }

    pub fn manifold(&self) -> &'a str {
        match self {
            Self::Single(l, _) => &l.manifold,
            Self::Coupled(l, _) => &l.manifold,
        }
    }

    pub fn grid(&self) -> &'a MappedGrid {
        match self {
            Self::Single(l, _) => &l.grid,
            Self::Coupled(l, _) => &l.grid,
        }
    }
}

impl Manifold {
    pub fn label(&self) -> &str {
        match self {
            Self::Single { label, .. } | Self::Coupled { label, .. } => label,
        }
    }

    pub fn character(&self) -> Character {
        match self {
            Self::Single { spin, .. } => Character::Single(*spin),
            Self::Coupled { spins, .. } => Character::Coupled(*spins),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Single { levels, .. } => levels.len(),
            Self::Coupled { levels, .. } => levels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn level(&self, v: usize) -> Option<LevelView<'_>> {
        match self {
            Self::Single { levels, spin, .. } => levels.get(v).map(|l| LevelView::Single(l, *spin)),
            Self::Coupled { levels, spins, .. } => {
                levels.get(v).map(|l| LevelView::Coupled(l, *spins))
            }
        }
    }

    pub fn levels(&self) -> impl Iterator<Item = LevelView<'_>> {
        (0..self.len()).filter_map(move |v| self.level(v))
    }
}
