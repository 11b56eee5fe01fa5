//! Radial functions of the internuclear distance: potential curves, transition
//! dipole moments and spin-orbit couplings.
//!
//! A [`RadialCurve`] is either analytic (Morse, constant) or tabulated. Tabulated
//! curves are interpolated with a natural cubic spline inside the sample range.
//! Outside it they are extended by fixed rules:
//!
//! * below the first sample, potentials continue as an exponential wall
//!   `V∞ + A·exp(−bR)` matched in value and slope (linear continuation when the
//!   boundary slope is not repulsive); dipoles and couplings are clamped;
//! * above the last sample, a declared dispersion tail `V∞ − Σ Cₙ/Rⁿ` is used,
//!   otherwise the last value is held constant.
//!
//! A dispersion tail that does not pass exactly through the last sample gets a
//! short-range correction `c·(R_max/R)^m` (with `m` two above the highest
//! declared power) so the curve stays continuous.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{ensure, Error, Result};
use crate::spline::CubicSpline;
use crate::units::{self, CurveUnits, LengthUnit, ValueUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Potential,
    Dipole,
    Coupling,
}

impl fmt::Display for CurveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Potential => "potential",
            Self::Dipole => "dipole",
            Self::Coupling => "coupling",
        })
    }
}

/// Morse parameters in atomic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Morse {
    pub depth: f64,
    pub alpha: f64,
    pub r_eq: f64,
    /// energy of the dissociation limit
    pub t_e: f64,
}

impl Morse {
    fn derivs(&self, r: f64) -> [f64; 3] {
        let y = (-self.alpha * (r - self.r_eq)).exp();
        let one_minus = 1.0 - y;
        let value = self.t_e + self.depth * one_minus * one_minus - self.depth;
        let d1 = 2.0 * self.depth * self.alpha * one_minus * y;
        let d2 = -2.0 * self.depth * self.alpha * self.alpha * y * (1.0 - 2.0 * y);
        [value, d1, d2]
    }

    /// Harmonic frequency ωₑ = a·√(2Dₑ/μ).
    pub fn omega_e(&self, mu: f64) -> f64 {
        self.alpha * (2.0 * self.depth / mu).sqrt()
    }

    /// Anharmonicity ωₑxₑ = a²/2μ.
    pub fn omega_e_xe(&self, mu: f64) -> f64 {
        self.alpha * self.alpha / (2.0 * mu)
    }

    /// Exact bound-state energy of level `v`, measured from the curve's global zero.
    pub fn level_energy(&self, mu: f64, v: usize) -> f64 {
        let x = v as f64 + 0.5;
        self.t_e - self.depth + self.omega_e(mu) * x - self.omega_e_xe(mu) * x * x
    }
}

/// Dispersion tail `asymptote − Σ Cₙ/Rⁿ` (atomic units).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LongRange {
    pub asymptote: f64,
    /// (n, Cₙ) pairs
    pub terms: Vec<(u32, f64)>,
}

impl LongRange {
    fn derivs(&self, r: f64) -> [f64; 3] {
        let mut out = [self.asymptote, 0.0, 0.0];
        for &(n, c) in &self.terms {
            let nf = n as f64;
            let rn = r.powi(n as i32);
            out[0] -= c / rn;
            out[1] += nf * c / (rn * r);
            out[2] -= nf * (nf + 1.0) * c / (rn * r * r);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Inner {
    Clamp(f64),
    Wall { base: f64, amp: f64, rate: f64 },
    Linear { r0: f64, v0: f64, slope: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Outer {
    Clamp(f64),
    Tail {
        tail: LongRange,
        r_max: f64,
        correction: f64,
        power: i32,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Form {
    Sampled {
        spline: CubicSpline,
        inner: Inner,
        outer: Outer,
    },
    Morse(Morse),
    Constant(f64),
}

/// A potential, dipole or coupling function of R, evaluated in atomic units.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCurve {
    kind: CurveKind,
    label: String,
    form: Form,
    offset: f64,
    provenance: String,
}

impl RadialCurve {
    /// Builds a tabulated curve from samples already in atomic units.
    pub fn from_samples(
        kind: CurveKind,
        label: impl Into<String>,
        rs: Vec<f64>,
        values: Vec<f64>,
        long_range: Option<LongRange>,
    ) -> Result<Self> {
        let label = label.into();
        ensure!(
            rs.len() == values.len(),
            Validation,
            "curve '{label}': {} R values but {} function values",
            rs.len(),
            values.len()
        );
        ensure!(
            rs.len() >= 4,
            Validation,
            "curve '{label}': need at least 4 samples, got {}",
            rs.len()
        );
        for w in rs.windows(2) {
            ensure!(
                w[1] > w[0],
                Validation,
                "curve '{label}': R samples not strictly increasing at R = {}",
                w[1]
            );
        }
        ensure!(
            rs[0] > 0.0,
            Validation,
            "curve '{label}': R samples must be positive (first is {})",
            rs[0]
        );
        ensure!(
            values.iter().all(|v| v.is_finite()),
            Validation,
            "curve '{label}': non-finite sample value"
        );
        ensure!(
            long_range.is_none() || kind == CurveKind::Potential,
            Validation,
            "curve '{label}': dispersion tails apply to potentials only"
        );

        let spline = CubicSpline::natural(rs, values);
        let xs = spline.xs();
        let ys = spline.ys();
        let (r_lo, r_hi) = (xs[0], xs[xs.len() - 1]);
        let y_hi = ys[ys.len() - 1];

        let outer = match long_range {
            Some(tail) => {
                let power = tail.terms.iter().map(|t| t.0).max().unwrap_or(4) as i32 + 2;
                let correction = y_hi - tail.derivs(r_hi)[0];
                Outer::Tail {
                    tail,
                    r_max: r_hi,
                    correction,
                    power,
                }
            }
            None => Outer::Clamp(y_hi),
        };
        let inner = if kind == CurveKind::Potential {
            let [v0, slope, _] = spline.eval_derivs(r_lo);
            let base = match &outer {
                Outer::Clamp(c) => *c,
                Outer::Tail { tail, .. } => tail.asymptote,
            };
            if slope < 0.0 && v0 > base {
                let rate = -slope / (v0 - base);
                Inner::Wall {
                    base,
                    amp: (v0 - base) * (rate * r_lo).exp(),
                    rate,
                }
            } else {
                Inner::Linear {
                    r0: r_lo,
                    v0,
                    slope,
                }
            }
        } else {
            Inner::Clamp(ys[0])
        };

        Ok(Self {
            kind,
            label,
            form: Form::Sampled {
                spline,
                inner,
                outer,
            },
            offset: 0.0,
            provenance: String::new(),
        })
    }

    pub fn constant(kind: CurveKind, label: impl Into<String>, value: f64) -> Self {
        Self {
            kind,
            label: label.into(),
            form: Form::Constant(value),
            offset: 0.0,
            provenance: String::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn morse_params(&self) -> Option<Morse> {
        match &self.form {
            Form::Morse(m) => Some(Morse {
                t_e: m.t_e + self.offset,
                ..*m
            }),
            _ => None,
        }
    }

    /// Sample range `[R_min, R_max]` for tabulated curves, `None` for analytic ones.
    pub fn sample_range(&self) -> Option<(f64, f64)> {
        match &self.form {
            Form::Sampled { spline, .. } => {
                let xs = spline.xs();
                Some((xs[0], xs[xs.len() - 1]))
            }
            _ => None,
        }
    }

    pub fn samples(&self) -> Option<(&[f64], &[f64])> {
        match &self.form {
            Form::Sampled { spline, .. } => Some((spline.xs(), spline.ys())),
            _ => None,
        }
    }

    /// Value as R → ∞.
    pub fn asymptote(&self) -> f64 {
        self.offset
            + match &self.form {
                Form::Morse(m) => m.t_e,
                Form::Constant(c) => *c,
                Form::Sampled { outer, .. } => match outer {
                    Outer::Clamp(c) => *c,
                    Outer::Tail { tail, .. } => tail.asymptote,
                },
            }
    }

    /// Value and first two derivatives at `r`; `r` must be positive.
    pub fn eval_derivs(&self, r: f64) -> Result<[f64; 3]> {
        ensure!(
            r > 0.0 && r.is_finite(),
            Domain,
            "curve '{}' evaluated at R = {r}",
            self.label
        );
        let mut out = self.raw_derivs(r);
        out[0] += self.offset;
        Ok(out)
    }

    pub fn eval(&self, r: f64) -> Result<f64> {
        Ok(self.eval_derivs(r)?[0])
    }

    fn raw_derivs(&self, r: f64) -> [f64; 3] {
        match &self.form {
            Form::Morse(m) => m.derivs(r),
            Form::Constant(c) => [*c, 0.0, 0.0],
            Form::Sampled {
                spline,
                inner,
                outer,
            } => {
                let xs = spline.xs();
                if r < xs[0] {
                    match *inner {
                        Inner::Clamp(c) => [c, 0.0, 0.0],
                        Inner::Wall { base, amp, rate } => {
                            let e = amp * (-rate * r).exp();
                            [base + e, -rate * e, rate * rate * e]
                        }
                        Inner::Linear { r0, v0, slope } => [v0 + slope * (r - r0), slope, 0.0],
                    }
                } else if r > xs[xs.len() - 1] {
                    match outer {
                        Outer::Clamp(c) => [*c, 0.0, 0.0],
                        Outer::Tail {
                            tail,
                            r_max,
                            correction,
                            power,
                        } => {
                            let mut v = tail.derivs(r);
                            let p = *power as f64;
                            let s = correction * (r_max / r).powi(*power);
                            v[0] += s;
                            v[1] -= p * s / r;
                            v[2] += p * (p + 1.0) * s / (r * r);
                            v
                        }
                    }
                } else {
                    spline.eval_derivs(r)
                }
            }
        }
    }

    /// Human-readable notes for each extrapolation rule that evaluation over
    /// `[r_lo, r_hi]` will exercise.
    pub fn extrapolation_notes(&self, r_lo: f64, r_hi: f64) -> Vec<String> {
        let mut notes = Vec::new();
        if let Form::Sampled {
            spline,
            inner,
            outer,
        } = &self.form
        {
            let xs = spline.xs();
            if r_lo < xs[0] {
                let rule = match inner {
                    Inner::Clamp(_) => "constant clamp",
                    Inner::Wall { .. } => "exponential wall",
                    Inner::Linear { .. } => "linear continuation",
                };
                notes.push(format!(
                    "curve '{}': {rule} on [{r_lo:.4}, {:.4}) bohr",
                    self.label, xs[0]
                ));
            }
            if r_hi > xs[xs.len() - 1] {
                let rule = match outer {
                    Outer::Clamp(_) => "constant clamp",
                    Outer::Tail { .. } => "dispersion tail",
                };
                notes.push(format!(
                    "curve '{}': {rule} on ({:.4}, {r_hi:.4}] bohr",
                    self.label,
                    xs[xs.len() - 1]
                ));
            }
        }
        notes
    }
}

/// Analytic Morse potential `T_e + D_e(1 − e^{−a(R−R_e)})² − D_e` (atomic units).
pub fn make_morse(depth: f64, alpha: f64, r_eq: f64, t_e: f64) -> Result<RadialCurve> {
    ensure!(
        depth > 0.0 && alpha > 0.0 && r_eq > 0.0,
        Validation,
        "Morse parameters must be positive (D_e = {depth}, a = {alpha}, R_e = {r_eq})"
    );
    ensure!(t_e.is_finite(), Validation, "Morse T_e must be finite");
    Ok(RadialCurve {
        kind: CurveKind::Potential,
        label: "morse".into(),
        form: Form::Morse(Morse {
            depth,
            alpha,
            r_eq,
            t_e,
        }),
        offset: 0.0,
        provenance: "analytic Morse".into(),
    })
}

/// Returns a copy of a potential shifted rigidly by `delta` (hartree).
pub fn shift_curve(curve: &RadialCurve, delta: f64) -> Result<RadialCurve> {
    ensure!(
        curve.kind == CurveKind::Potential,
        Validation,
        "cannot shift {} curve '{}': only potentials are shifted",
        curve.kind,
        curve.label
    );
    let mut out = curve.clone();
    out.offset += delta;
    Ok(out)
}

/// Pointwise evaluation; see [`RadialCurve::eval`].
pub fn eval_curve(curve: &RadialCurve, r: f64) -> Result<f64> {
    curve.eval(r)
}

/// Reads a two-column `(R, value)` text file and converts it to atomic units.
///
/// A `# units: <R-unit> <value-unit>` comment overrides `units`. The curve is
/// labelled with the file stem.
pub fn load_curve(path: &Path, units: CurveUnits, kind: CurveKind) -> Result<RadialCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve(&text, path, units, kind)
}

fn parse_curve(text: &str, path: &Path, units: CurveUnits, kind: CurveKind) -> Result<RadialCurve> {
    let mut units = units;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(spec) = comment.trim().strip_prefix("units:") {
                units = CurveUnits::parse(spec).ok_or_else(|| {
                    Error::Config(format!(
                        "{}:{}: unknown unit declaration '{}'",
                        path.display(),
                        idx + 1,
                        spec.trim()
                    ))
                })?;
            }
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let mut cols = line.split_whitespace();
        let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(parse_err(format!("expected two columns, got '{line}'")));
        };
        let r: f64 = a
            .parse()
            .map_err(|_| parse_err(format!("invalid number '{a}'")))?;
        let v: f64 = b
            .parse()
            .map_err(|_| parse_err(format!("invalid number '{b}'")))?;
        if !r.is_finite() || !v.is_finite() {
            return Err(parse_err(format!("non-finite value in '{line}'")));
        }
        rows.push((r, v));
    }

    if rows.len() >= 2 && rows[1].0 < rows[0].0 {
        rows.reverse();
    }
    for w in rows.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::Validation(format!(
                "{}: duplicated R = {}",
                path.display(),
                w[1].0
            )));
        }
        if w[1].0 < w[0].0 {
            return Err(Error::Validation(format!(
                "{}: R not monotonic at R = {}",
                path.display(),
                w[1].0
            )));
        }
    }

    let rs = rows.iter().map(|&(r, _)| units.length.to_bohr(r)).collect();
    let vs = rows
        .iter()
        .map(|&(_, v)| units.value.to_atomic(v))
        .collect();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(RadialCurve::from_samples(kind, label, rs, vs, None)?
        .with_provenance(format!("file {}", path.display())))
}

/// Writes a curve's samples (or a uniform sampling of an analytic curve) back
/// to spectroscopic units.
pub fn curve_to_text(curve: &RadialCurve, units: CurveUnits, rs: &[f64]) -> Result<String> {
    let mut out = format!(
        "# {} '{}'\n# units: {} {}\n",
        curve.kind,
        curve.label,
        match units.length {
            LengthUnit::Angstrom => "angstrom",
            LengthUnit::Bohr => "bohr",
        },
        match units.value {
            ValueUnit::Wavenumber => "cm-1",
            ValueUnit::Atomic => "au",
            ValueUnit::Debye => "debye",
        }
    );
    for &r in rs {
        let v = curve.eval(r)?;
        out.push_str(&format!(
            "{:.12e} {:.12e}\n",
            units.length.from_bohr(r),
            units.value.from_atomic(v)
        ));
    }
    Ok(out)
}

/// Named curves plus the reduced mass of the nuclei.
#[derive(Debug, Clone)]
pub struct CurveSet {
    curves: BTreeMap<String, RadialCurve>,
    reduced_mass: f64,
}

impl CurveSet {
    /// `reduced_mass` in electron masses.
    pub fn new(reduced_mass: f64) -> Result<Self> {
        ensure!(
            reduced_mass > 0.0 && reduced_mass.is_finite(),
            Validation,
            "reduced mass must be positive, got {reduced_mass}"
        );
        Ok(Self {
            curves: BTreeMap::new(),
            reduced_mass,
        })
    }

    pub fn reduced_mass(&self) -> f64 {
        self.reduced_mass
    }

    pub fn insert(&mut self, name: impl Into<String>, curve: RadialCurve) -> Result<()> {
        let name = name.into();
        ensure!(
            !self.curves.contains_key(&name),
            Validation,
            "curve '{name}' declared twice"
        );
        self.curves.insert(name, curve);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&RadialCurve> {
        self.curves
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown curve '{name}'")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RadialCurve)> {
        self.curves.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Intersection of all tabulated sample ranges; `None` bounds mean unbounded.
    pub fn common_range(&self) -> Result<(Option<f64>, Option<f64>)> {
        let mut lo: Option<f64> = None;
        let mut hi: Option<f64> = None;
        for c in self.curves.values() {
            if let Some((a, b)) = c.sample_range() {
                lo = Some(lo.map_or(a, |l| l.max(a)));
                hi = Some(hi.map_or(b, |h| h.min(b)));
            }
        }
        if let (Some(l), Some(h)) = (lo, hi) {
            ensure!(
                l < h,
                Validation,
                "tabulated curves share no common R range ({l} ≥ {h})"
            );
        }
        Ok((lo, hi))
    }

    /// Pointwise minimum of the named potentials, tabulated on `[r_lo, r_hi]`
    /// with `n` samples and splined.
    pub fn envelope(&self, names: &[&str], r_lo: f64, r_hi: f64, n: usize) -> Result<RadialCurve> {
        ensure!(
            !names.is_empty(),
            Validation,
            "envelope needs at least one potential"
        );
        ensure!(
            n >= 4 && r_hi > r_lo && r_lo > 0.0,
            Validation,
            "bad envelope sampling"
        );
        let curves = names
            .iter()
            .map(|name| {
                let c = self.get(name)?;
                ensure!(
                    c.kind == CurveKind::Potential,
                    Validation,
                    "envelope member '{name}' is not a potential"
                );
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        let step = (r_hi - r_lo) / (n - 1) as f64;
        let rs: Vec<f64> = (0..n).map(|i| r_lo + step * i as f64).collect();
        let vs = rs
            .iter()
            .map(|&r| {
                curves
                    .iter()
                    .map(|c| c.eval(r))
                    .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(
            RadialCurve::from_samples(CurveKind::Potential, "envelope", rs, vs, None)?
                .with_provenance(format!("pointwise minimum of {}", names.join(", "))),
        )
    }
}

/// Converts a dispersion coefficient from cm⁻¹·Åⁿ to hartree·bohrⁿ.
pub fn dispersion_to_atomic(c_n: f64, n: u32) -> f64 {
    units::cm_to_hartree(c_n) / units::BOHR_TO_ANGSTROM.powi(n as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn sampled_morse(step: f64) -> (RadialCurve, RadialCurve) {
        let m = make_morse(0.02, 0.6, 8.0, 0.0).unwrap();
        let rs: Vec<f64> = (0..)
            .map(|i| 5.0 + step * i as f64)
            .take_while(|&r| r <= 20.0 + 1e-12)
            .collect();
        let vs = rs.iter().map(|&r| m.eval(r).unwrap()).collect();
        let s = RadialCurve::from_samples(CurveKind::Potential, "m", rs, vs, None).unwrap();
        (m, s)
    }

    #[test]
    fn nodes_reproduced_exactly() {
        let (_, s) = sampled_morse(0.1);
        let (rs, vs) = s.samples().unwrap();
        for (r, v) in rs.iter().zip(vs) {
            assert_eq!(s.eval(*r).unwrap(), *v);
        }
    }

    #[test]
    fn spline_of_morse_is_accurate_between_nodes() {
        let (m, s) = sampled_morse(0.02);
        let mut worst: f64 = 0.0;
        for i in 0..2000 {
            let r = 6.5 + 5.0 * (i as f64 + 0.37) / 2000.0;
            worst = worst.max((m.eval(r).unwrap() - s.eval(r).unwrap()).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn morse_minimum_and_asymptote() {
        let m = make_morse(0.015, 0.4, 9.0, 0.05).unwrap();
        assert_eq!(m.eval(9.0).unwrap(), 0.05 - 0.015);
        let far = m.eval(9.0 + 50.0 / 0.4).unwrap();
        assert!((far - 0.05).abs() <= 0.015 * 1e-20);
        assert_eq!(m.asymptote(), 0.05);
    }

    #[test]
    fn morse_rejects_non_positive_parameters() {
        assert!(matches!(
            make_morse(0.0, 1.0, 1.0, 0.0),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            make_morse(1.0, -1.0, 1.0, 0.0),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            make_morse(1.0, 1.0, 0.0, 0.0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn eval_rejects_non_positive_r() {
        let m = make_morse(0.015, 0.4, 9.0, 0.0).unwrap();
        assert!(matches!(m.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(m.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn dispersion_tail_scales_as_r_minus_six() {
        let c6 = 1e4;
        let rs: Vec<f64> = (0..30).map(|i| 1.0 + i as f64).collect();
        let vs: Vec<f64> = rs.iter().map(|r| -c6 / r.powi(6)).collect();
        let tail = LongRange {
            asymptote: 0.0,
            terms: vec![(6, c6)],
        };
        let c = RadialCurve::from_samples(CurveKind::Potential, "t", rs, vs, Some(tail)).unwrap();
        let ratio = c.eval(60.0).unwrap() / c.eval(30.0).unwrap();
        assert!((ratio - 2f64.powi(-6)).abs() < 1e-10, "{ratio}");
        // beyond the data, values follow the formula exactly
        let expect = -c6 / 45f64.powi(6);
        assert!((c.eval(45.0).unwrap() - expect).abs() <= 1e-16 * expect.abs());
    }

    #[test]
    fn tail_is_continuous_and_monotone_when_mismatched() {
        let rs: Vec<f64> = (0..20).map(|i| 6.0 + 0.5 * i as f64).collect();
        let vs: Vec<f64> = rs.iter().map(|r| -2e4 / r.powi(6) - 1e-6).collect();
        let tail = LongRange {
            asymptote: 0.0,
            terms: vec![(6, 2e4)],
        };
        let c = RadialCurve::from_samples(CurveKind::Potential, "t", rs, vs.clone(), Some(tail))
            .unwrap();
        let r_max = 15.5;
        let inside = c.eval(r_max).unwrap();
        let outside = c.eval(r_max * (1.0 + 1e-12)).unwrap();
        assert!((inside - outside).abs() < 1e-13, "{inside} {outside}");
        let mut prev = inside;
        for i in 1..400 {
            let v = c.eval(r_max + 0.25 * i as f64).unwrap();
            assert!(v >= prev, "tail not monotone at step {i}");
            prev = v;
        }
        assert!(prev < 0.0 && prev > -1e-8);
    }

    #[test]
    fn inner_wall_matches_value_and_slope() {
        let rs: Vec<f64> = (0..40).map(|i| 5.0 + 0.25 * i as f64).collect();
        let m = make_morse(0.02, 0.6, 8.0, 0.0).unwrap();
        let vs = rs.iter().map(|&r| m.eval(r).unwrap()).collect();
        let c = RadialCurve::from_samples(CurveKind::Potential, "w", rs, vs, None).unwrap();
        let [v_in, d_in, _] = c.eval_derivs(5.0).unwrap();
        let [v_out, d_out, _] = c.eval_derivs(5.0 - 1e-12).unwrap();
        assert!((v_in - v_out).abs() < 1e-12);
        assert!((d_in - d_out).abs() < 1e-9);
        assert!(c.eval(3.0).unwrap() > v_in);
    }

    #[test]
    fn dipoles_clamp_outside_samples() {
        let rs = vec![4.0, 5.0, 6.0, 7.0];
        let vs = vec![1.0, 2.0, 2.5, 2.7];
        let c = RadialCurve::from_samples(CurveKind::Dipole, "d", rs, vs, None).unwrap();
        assert_eq!(c.eval(1.0).unwrap(), 1.0);
        assert_eq!(c.eval(100.0).unwrap(), 2.7);
    }

    #[test]
    fn shift_moves_minimum_by_exactly_112_wavenumbers() {
        let pi_g = make_morse(0.003, 0.5, 10.0, 0.07).unwrap();
        let delta = units::cm_to_hartree(-112.0);
        let shifted = shift_curve(&pi_g, delta).unwrap();
        let before = pi_g.eval(10.0).unwrap();
        let after = shifted.eval(10.0).unwrap();
        assert!((units::hartree_to_cm(after - before) + 112.0).abs() < 1e-9);
        // input untouched
        assert_eq!(pi_g.eval(10.0).unwrap(), before);
    }

    #[test]
    fn shift_rejects_dipoles() {
        let d = RadialCurve::constant(CurveKind::Dipole, "d", 1.0);
        assert!(matches!(shift_curve(&d, 1.0), Err(Error::Validation(_))));
    }

    #[test]
    fn shift_by_zero_is_identity() {
        let (_, s) = sampled_morse(0.1);
        let z = shift_curve(&s, 0.0).unwrap();
        for r in [2.0, 7.3, 12.0, 40.0] {
            assert_eq!(z.eval(r).unwrap(), s.eval(r).unwrap());
        }
    }

    proptest! {
        #[test]
        fn shift_commutes_with_eval(delta in -0.1f64..0.1, r in 1.0f64..40.0) {
            let (_, s) = sampled_morse(0.1);
            let out = shift_curve(&s, delta).unwrap();
            prop_assert_eq!(out.eval(r).unwrap(), s.eval(r).unwrap() + delta);
        }

        #[test]
        fn shift_round_trip(delta in -0.1f64..0.1, r in 1.0f64..40.0) {
            let (_, s) = sampled_morse(0.1);
            let back = shift_curve(&shift_curve(&s, delta).unwrap(), -delta).unwrap();
            let a = back.eval(r).unwrap();
            let b = s.eval(r).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-3));
        }
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".dat").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_spectroscopic_file() {
        let mut text = String::from("# test curve\n");
        for i in 0..100 {
            let r = 3.0 + 0.1 * i as f64;
            text.push_str(&format!("{r} {}\n", -1000.0 + 10.0 * i as f64));
        }
        let f = write_tmp(&text);
        let c = load_curve(f.path(), CurveUnits::SPECTROSCOPIC, CurveKind::Potential).unwrap();
        let (rs, vs) = c.samples().unwrap();
        assert_eq!(rs.len(), 100);
        assert!((rs[0] - 3.0 / units::BOHR_TO_ANGSTROM).abs() < 1e-14);
        assert!((vs[0] + 1000.0 / units::HARTREE_TO_CM).abs() < 1e-18);
    }

    #[test]
    fn atomic_file_is_bit_identical() {
        let text = "0.5 -0.123456789012345\n1.25 0.1\n2.5 1e-3\n3.75 7.000000000000001\n";
        let f = write_tmp(text);
        let c = load_curve(f.path(), CurveUnits::ATOMIC, CurveKind::Potential).unwrap();
        let (rs, vs) = c.samples().unwrap();
        assert_eq!(rs, &[0.5, 1.25, 2.5, 3.75]);
        assert_eq!(vs, &[-0.123456789012345, 0.1, 1e-3, 7.000000000000001]);
    }

    #[test]
    fn header_overrides_declared_units() {
        let f = write_tmp("# units: bohr hartree\n1 1\n2 2\n3 3\n4 4\n");
        let c = load_curve(f.path(), CurveUnits::SPECTROSCOPIC, CurveKind::Potential).unwrap();
        assert_eq!(c.samples().unwrap().1, &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn descending_file_is_normalized() {
        let f = write_tmp("4 4\n3 3\n2 2\n1 1\n");
        let c = load_curve(f.path(), CurveUnits::ATOMIC, CurveKind::Potential).unwrap();
        assert_eq!(c.samples().unwrap().0, &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn load_errors() {
        let dup = write_tmp("1 1\n2 2\n2 3\n4 4\n5 5\n");
        match load_curve(dup.path(), CurveUnits::ATOMIC, CurveKind::Potential) {
            Err(Error::Validation(msg)) => assert!(msg.contains("R = 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let bad = write_tmp("# c\n1 1\n2 x\n");
        match load_curve(bad.path(), CurveUnits::ATOMIC, CurveKind::Potential) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let unit = write_tmp("# units: parsec cm-1\n1 1\n2 2\n3 3\n4 4\n");
        assert!(matches!(
            load_curve(unit.path(), CurveUnits::ATOMIC, CurveKind::Potential),
            Err(Error::Config(_))
        ));
        let shuffled = write_tmp("1 1\n3 3\n2 2\n4 4\n");
        assert!(matches!(
            load_curve(shuffled.path(), CurveUnits::ATOMIC, CurveKind::Potential),
            Err(Error::Validation(_))
        ));
        let short = write_tmp("1 1\n2 2\n3 3\n");
        assert!(matches!(
            load_curve(short.path(), CurveUnits::ATOMIC, CurveKind::Potential),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn curve_set_validation() {
        assert!(CurveSet::new(0.0).is_err());
        let mut set = CurveSet::new(100.0).unwrap();
        let a = RadialCurve::from_samples(
            CurveKind::Potential,
            "a",
            vec![1.0, 2.0, 3.0, 4.0],
            vec![0.0; 4],
            None,
        )
        .unwrap();
        let b = RadialCurve::from_samples(
            CurveKind::Potential,
            "b",
            vec![5.0, 6.0, 7.0, 8.0],
            vec![0.0; 4],
            None,
        )
        .unwrap();
        set.insert("a", a.clone()).unwrap();
        assert!(set.insert("a", a).is_err());
        set.insert("b", b).unwrap();
        assert!(set.common_range().is_err());
    }

    #[test]
    fn envelope_is_pointwise_minimum() {
        let mut set = CurveSet::new(1000.0).unwrap();
        set.insert("x", make_morse(0.02, 0.7, 8.0, 0.0).unwrap())
            .unwrap();
        set.insert("y", make_morse(0.01, 0.5, 10.0, 0.005).unwrap())
            .unwrap();
        let env = set.envelope(&["x", "y"], 5.0, 20.0, 301).unwrap();
        let (rs, vs) = env.samples().unwrap();
        for (r, v) in rs.iter().zip(vs) {
            let x = set.get("x").unwrap().eval(*r).unwrap();
            let y = set.get("y").unwrap().eval(*r).unwrap();
            assert_eq!(*v, x.min(y));
        }
    }
}
