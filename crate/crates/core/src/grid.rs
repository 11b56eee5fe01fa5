//! Uniform and mapped radial grids, and the kinetic-energy operator on them.
//!
//! A grid is the image of the uniform working coordinate `x ∈ [0, N]` under a
//! smooth map `R(x)`, with collocation points at `x = k + ½`. The Jacobian
//! `J = dR/dx` is the local step. Mapped grids follow the local de Broglie
//! half-wavelength of an envelope potential,
//!
//! ```text
//! dR/dx = β·π / √(2μ·K(R)),   K ≈ |E_max − V_env(R)|
//! ```
//!
//! where `K = E_max − V_env` wherever that exceeds the local floor
//! `Δ(R) = A·(V_env'²/2μ)^{1/3}`, a fixed multiple of the Airy energy of the
//! local slope. Below `−Δ` the map holds `K = Δ/2`, and in between a C^∞ step
//! joins the two, so the map stays smooth through turning points and
//! classically forbidden stretches get a finite step. Flat regions have a
//! vanishing floor and follow `E_max − V_env` to within `ε_floor`.
//!
//! The kinetic operator uses a sine basis in `x` (wavefunctions vanish at both
//! box edges). With `φ(x) = √J·ψ(R(x))` it becomes
//!
//! ```text
//! T = J⁻¹·T_x·J⁻¹ + (1/2μ)·(s''/2 − s'²/4),   s(R) = ln √(2μ·K(R))
//! ```
//!
//! where `T_x` is the sine-collocation `−(1/2μ)d²/dx²` and the second term is
//! the exact remainder of symmetrizing `J^{-1/2}·d/dx·J⁻¹·d/dx·J^{-1/2}`.
//! On a uniform grid the remainder vanishes. On mapped grids the discrete
//! operator can carry a few slightly negative modes where the step grows
//! fast; they are projected out so `T` stays positive semi-definite.

use std::f64::consts::PI;

use crate::curves::RadialCurve;
use crate::eigen::{eigh, SymMatrix};
use crate::error::{ensure, Error, Result};

/// Smallest admissible local kinetic energy in the map, in hartree.
pub const KINETIC_FLOOR: f64 = 1e-8;

/// Floor width in units of the local Airy energy.
pub const AIRY_FLOOR_FACTOR: f64 = 32.0;

pub const DEFAULT_BETA: f64 = 0.7;
pub const DEFAULT_N_CAP: usize = 16384;

const MIN_POINTS: usize = 8;
const RK4_SUBSTEPS_PER_HALF: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct MappedGrid {
    points: Vec<f64>,
    jacobian: Vec<f64>,
    /// s''/2 − s'²/4 at each point (zero for uniform grids)
    map_curvature: Vec<f64>,
    r_min: f64,
    r_max: f64,
    e_max: Option<f64>,
    beta: Option<f64>,
}

impl MappedGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn jacobian(&self) -> &[f64] {
        &self.jacobian
    }

    /// Box edges; wavefunctions vanish here.
    pub fn range(&self) -> (f64, f64) {
        (self.r_min, self.r_max)
    }

    pub fn e_max(&self) -> Option<f64> {
        self.e_max
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn is_uniform(&self) -> bool {
        self.e_max.is_none()
    }

    /// True when both grids have bit-identical points.
    pub fn same_points(&self, other: &MappedGrid) -> bool {
        std::ptr::eq(self, other) || self.points == other.points
    }
}

/// `n` equally spaced points at cell centres of `[r_min, r_max]`.
pub fn build_uniform(r_min: f64, r_max: f64, n: usize) -> Result<MappedGrid> {
    ensure!(
        r_min > 0.0 && r_max > r_min && r_max.is_finite(),
        Validation,
        "uniform grid needs 0 < R_min < R_max (got {r_min}, {r_max})"
    );
    ensure!(
        n >= MIN_POINTS,
        Validation,
        "grid needs at least {MIN_POINTS} points, got {n}"
    );
    let step = (r_max - r_min) / n as f64;
    Ok(MappedGrid {
        points: (0..n).map(|k| r_min + (k as f64 + 0.5) * step).collect(),
        jacobian: vec![step; n],
        map_curvature: vec![0.0; n],
        r_min,
        r_max,
        e_max: None,
        beta: None,
    })
}

/// Parameters for [`build_mapped`].
#[derive(Debug, Clone, Copy)]
pub struct MappingParams {
    pub e_max: f64,
    pub beta: f64,
    pub mu: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub n_cap: usize,
}

impl MappingParams {
    pub fn new(e_max: f64, beta: f64, mu: f64, r_min: f64, r_max: f64) -> Self {
        Self {
            e_max,
            beta,
            mu,
            r_min,
            r_max,
            n_cap: DEFAULT_N_CAP,
        }
    }
}

/// C^∞ step rising from 0 at `t ≤ 0` to 1 at `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// `u` above `d`, `d/2` below `−d`, smooth in between.
fn soft_floor(u: f64, d: f64) -> f64 {
    0.5 * d + smooth_step(0.5 * (u / d + 1.0)) * (u - 0.5 * d)
}

struct LocalMomentum<'a> {
    envelope: &'a RadialCurve,
    e_max: f64,
    two_mu: f64,
    beta_pi: f64,
}

impl LocalMomentum<'_> {
    fn kinetic(&self, r: f64) -> Result<f64> {
        let [v, d1, _] = self.envelope.eval_derivs(r)?;
        let airy = (d1 * d1 / self.two_mu).cbrt();
        let floor = (AIRY_FLOOR_FACTOR * airy).max(2.0 * KINETIC_FLOOR);
        Ok(soft_floor(self.e_max - v, floor))
    }

    fn step(&self, r: f64) -> Result<f64> {
        Ok(self.beta_pi / (self.two_mu * self.kinetic(r)?).sqrt())
    }

    /// s''/2 − s'²/4 for s = ½·ln K, by central differences of the smooth K.
    fn curvature(&self, r: f64, h: f64) -> Result<f64> {
        let s = |x: f64| self.kinetic(x).map(|k| 0.5 * k.ln());
        let (sm, s0, sp) = (s(r - h)?, s(r)?, s(r + h)?);
        let s1 = (sp - sm) / (2.0 * h);
        let s2 = (sp - 2.0 * s0 + sm) / (h * h);
        Ok(0.5 * s2 - 0.25 * s1 * s1)
    }
}

/// Grid whose local step is a fixed fraction `beta` of the local de Broglie
/// half-wavelength in `envelope` at energy `e_max`.
///
/// The box starts at `r_min` and ends at the first whole step past `r_max`.
pub fn build_mapped(envelope: &RadialCurve, p: MappingParams) -> Result<MappedGrid> {
    ensure!(
        p.r_min > 0.0 && p.r_max > p.r_min && p.r_max.is_finite(),
        Validation,
        "mapped grid needs 0 < R_min < R_max (got {}, {})",
        p.r_min,
        p.r_max
    );
    ensure!(
        p.beta > 0.0 && p.beta <= 1.0,
        Validation,
        "beta must lie in (0, 1], got {}",
        p.beta
    );
    ensure!(p.mu > 0.0, Validation, "reduced mass must be positive");
    let lowest = (0..=2000)
        .map(|i| envelope.eval(p.r_min + (p.r_max - p.r_min) * i as f64 / 2000.0))
        .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))?;
    ensure!(
        p.e_max > lowest,
        Validation,
        "E_max = {} lies below the envelope everywhere (minimum {lowest})",
        p.e_max
    );

    let local = LocalMomentum {
        envelope,
        e_max: p.e_max,
        two_mu: 2.0 * p.mu,
        beta_pi: p.beta * PI,
    };

    // Integrate dR/dx = step(R) with RK4, recording R at every half-integer x.
    let h = 0.5 / RK4_SUBSTEPS_PER_HALF as f64;
    let mut r = p.r_min;
    let mut half_marks = Vec::new();
    while r < p.r_max {
        for _ in 0..2 {
            for _ in 0..RK4_SUBSTEPS_PER_HALF {
                let k1 = local.step(r)?;
                let k2 = local.step(r + 0.5 * h * k1)?;
                let k3 = local.step(r + 0.5 * h * k2)?;
                let k4 = local.step(r + h * k3)?;
                r += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
            }
            half_marks.push(r);
        }
        if half_marks.len() / 2 > p.n_cap {
            return Err(Error::Resource(format!(
                "mapped grid exceeds N_cap = {} points",
                p.n_cap
            )));
        }
    }
    let n = half_marks.len() / 2;
    ensure!(
        n >= MIN_POINTS,
        Validation,
        "mapped grid has only {n} points; lower beta or raise E_max"
    );

    let points: Vec<f64> = half_marks.iter().step_by(2).copied().collect();
    let r_max = half_marks[half_marks.len() - 1];
    let jacobian = points
        .iter()
        .map(|&r| local.step(r))
        .collect::<Result<Vec<_>>>()?;
    let map_curvature = points
        .iter()
        .zip(&jacobian)
        .map(|(&r, &j)| local.curvature(r, 1e-3 * j))
        .collect::<Result<Vec<_>>>()?;
    for note in envelope.extrapolation_notes(p.r_min, r_max) {
        log::debug!("mapped grid envelope: {note}");
    }
    Ok(MappedGrid {
        points,
        jacobian,
        map_curvature,
        r_min: p.r_min,
        r_max,
        e_max: Some(p.e_max),
        beta: Some(p.beta),
    })
}

/// Kinetic-energy matrix `−(1/2μ)d²/dR²` on the grid (hartree).
pub fn kinetic_matrix(grid: &MappedGrid, mu: f64) -> Result<SymMatrix> {
    let t = collocation_kinetic(grid, mu);
    if grid.is_uniform() {
        return Ok(t);
    }
    clip_negative_modes(t)
}

fn clip_negative_modes(mut t: SymMatrix) -> Result<SymMatrix> {
    let eig = eigh(&t)?;
    let negative: Vec<usize> = (0..t.dim()).take_while(|&i| eig.values[i] < 0.0).collect();
    if negative.is_empty() {
        return Ok(t);
    }
    log::debug!(
        "kinetic matrix: removing {} negative modes (lowest {:.3e} hartree)",
        negative.len(),
        eig.values[0]
    );
    let n = t.dim();
    for k in 0..n {
        for l in 0..=k {
            let fix: f64 = negative
                .iter()
                .map(|&i| eig.values[i] * eig.vectors[i][k] * eig.vectors[i][l])
                .sum();
            t.set(k, l, t.get(k, l) - fix);
        }
    }
    Ok(t)
}

fn collocation_kinetic(grid: &MappedGrid, mu: f64) -> SymMatrix {
    let n = grid.len();
    // cos(π r / n) for r in 0..2n
    let cos_table: Vec<f64> = (0..2 * n)
        .map(|r| (PI * r as f64 / n as f64).cos())
        .collect();
    // g(m) = Σ_{j=1}^{n} w_j j² cos(jπm/n), w_n = 1/2
    let g: Vec<f64> = (0..=2 * n)
        .map(|m| {
            let mut acc = 0.0;
            for j in 1..=n {
                let w = if j == n { 0.5 } else { 1.0 };
                acc += w * (j * j) as f64 * cos_table[(j * m) % (2 * n)];
            }
            acc
        })
        .collect();
    let pref = PI * PI / (2.0 * mu * (n as f64).powi(3));
    let inv_j: Vec<f64> = grid.jacobian.iter().map(|j| 1.0 / j).collect();
    let mut t = SymMatrix::zeros(n);
    for k in 0..n {
        for l in 0..=k {
            let tx = pref * (g[k - l] - g[k + l + 1]);
            t.set(k, l, tx * (inv_j[k] * inv_j[l]));
        }
    }
    for (k, c) in grid.map_curvature.iter().enumerate() {
        t.add_diag(k, c / (2.0 * mu));
    }
    t
}
