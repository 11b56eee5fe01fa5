//! Declarative pipeline: a TOML configuration names curves, manifolds,
//! dipole transitions and cascade scenarios; the commands here solve them and
//! write CSV, JSON and stick-spectrum files.
//!
//! Energies in configs and outputs are cm⁻¹ and lengths Å. Dipoles are in
//! atomic units (e·a₀) unless a curve declares otherwise.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::bound::{
    solve_channel, solve_coupled, CoupledChannels, LevelView, Manifold, SolveOptions, Spin,
};
use crate::cascade::{
    pump_cycle, two_step_conversion, ConversionReport, Network, NetworkInputs, PopulationVector,
    Sink, Slot, DEFAULT_DARK_RATE, DEFAULT_MAX_INNER_STEPS,
};
use crate::curves::{
    load_curve, make_morse, shift_curve, CurveKind, CurveSet, LongRange, RadialCurve,
};
use crate::error::{ensure, Error, Result};
use crate::grid::{
    build_mapped, build_uniform, MappedGrid, MappingParams, DEFAULT_BETA, DEFAULT_N_CAP,
};
use crate::rates::{einstein_a, ChannelRule, RateTable};
use crate::units::{self, CurveUnits};

/// Spacing (bohr) of Morse samples in front of a dispersion tail.
const MORSE_SAMPLE_STEP: f64 = 0.01;

/// Samples used to tabulate the grid envelope.
const ENVELOPE_SAMPLES: usize = 4001;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// reduced mass of the nuclei in amu
    pub reduced_mass_amu: f64,
    #[serde(default)]
    pub mass_provenance: Option<String>,
    pub grid: GridConfig,
    #[serde(default, rename = "curve")]
    pub curves: Vec<CurveConfig>,
    #[serde(default, rename = "manifold")]
    pub manifolds: Vec<ManifoldConfig>,
    #[serde(default, rename = "transition")]
    pub transitions: Vec<TransitionConfig>,
    #[serde(default)]
    pub cascade: Option<CascadeConfig>,
    #[serde(default)]
    pub convert: Option<ConvertConfig>,
    #[serde(default)]
    pub pump: Option<PumpConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    #[default]
    Mapped,
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub kind: GridKind,
    /// Å
    pub r_min: f64,
    /// Å
    pub r_max: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// cm⁻¹ above each potential's own dissociation limit
    #[serde(default)]
    pub e_max: f64,
    #[serde(default = "default_n_cap")]
    pub n_cap: usize,
    /// point count of a uniform grid
    #[serde(default)]
    pub n: Option<usize>,
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_n_cap() -> usize {
    DEFAULT_N_CAP
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorseConfig {
    /// well depth, cm⁻¹
    pub de: f64,
    /// equilibrium distance, Å
    pub re: f64,
    /// dissociation limit, cm⁻¹
    #[serde(default)]
    pub te: f64,
    /// harmonic constant, cm⁻¹ (alternative to `alpha`)
    #[serde(default)]
    pub we: Option<f64>,
    /// range parameter, Å⁻¹
    #[serde(default)]
    pub alpha: Option<f64>,
    /// with a `long_range` tail: radius (Å) beyond which the tail replaces the
    /// Morse form
    #[serde(default)]
    pub switch: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    /// cm⁻¹
    pub asymptote: f64,
    /// `[n, Cₙ]` pairs with Cₙ in cm⁻¹·Åⁿ
    pub terms: Vec<(u32, f64)>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub name: String,
    pub kind: CurveKind,
    /// two-column data file, relative to the config file
    #[serde(default)]
    pub file: Option<PathBuf>,
    /// unit tag for `file` or `points`, e.g. "angstrom cm-1"
    #[serde(default)]
    pub units: Option<String>,
    #[serde(default)]
    pub points: Option<Vec<(f64, f64)>>,
    #[serde(default)]
    pub morse: Option<MorseConfig>,
    /// cm⁻¹ for potentials and couplings, e·a₀ for dipoles
    #[serde(default)]
    pub constant: Option<f64>,
    #[serde(default)]
    pub long_range: Option<TailConfig>,
    /// rigid shift of a potential, cm⁻¹
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub provenance: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub name: String,
    #[serde(default)]
    pub potential: Option<String>,
    #[serde(default)]
    pub spin: Option<Spin>,
    /// (first, second) channel potentials of a coupled manifold
    #[serde(default)]
    pub channels: Option<[String; 2]>,
    #[serde(default)]
    pub spins: Option<[Spin; 2]>,
    #[serde(default)]
    pub coupling: Option<String>,
    #[serde(default)]
    pub diagonal: Option<String>,
    /// highest level energy kept, cm⁻¹
    #[serde(default)]
    pub ceiling: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionConfig {
    pub from: String,
    pub to: String,
    pub dipole: String,
    #[serde(default)]
    pub rule: ChannelRule,
    /// source levels that get stick-spectrum files; all when absent
    #[serde(default)]
    pub sticks: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub lower: String,
    pub upper: String,
    pub coupled: String,
    pub ground: String,
    pub upper_lower: String,
    pub upper_coupled: String,
    pub coupled_ground: String,
    #[serde(default)]
    pub loss: f64,
    #[serde(default = "default_dark_rate")]
    pub dark_rate: f64,
}

fn default_dark_rate() -> f64 {
    DEFAULT_DARK_RATE
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertConfig {
    pub v_a: usize,
    /// lower level compared against `v_a` for excitation strength; defaults to
    /// the highest bound level
    #[serde(default)]
    pub high_v_a: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    /// inclusive range of pumped lower levels
    pub window: (usize, usize),
    pub n_cycles: usize,
    /// start as a delta on this lower level
    #[serde(default)]
    pub v_a: Option<usize>,
    /// two-column `(v, weight)` file giving the initial lower-manifold population
    #[serde(default)]
    pub initial: Option<PathBuf>,
    #[serde(default = "default_max_inner")]
    pub max_inner_steps: usize,
}

fn default_max_inner() -> usize {
    DEFAULT_MAX_INNER_STEPS
}

impl PipelineConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0),
            msg: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every cross-reference before any computation starts.
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.reduced_mass_amu > 0.0 && self.reduced_mass_amu.is_finite(),
            Config,
            "reduced_mass_amu must be positive"
        );
        let g = &self.grid;
        ensure!(
            g.r_min > 0.0 && g.r_max > g.r_min,
            Config,
            "grid range must satisfy 0 < r_min < r_max (got {} .. {} Å)",
            g.r_min,
            g.r_max
        );
        if g.kind == GridKind::Uniform {
            ensure!(
                g.n.is_some(),
                Config,
                "uniform grid needs a point count `n`"
            );
        }
        let mut kinds = BTreeMap::new();
        for c in &self.curves {
            ensure!(
                kinds.insert(c.name.as_str(), c.kind).is_none(),
                Config,
                "curve '{}' declared twice",
                c.name
            );
            let sources = [
                c.file.is_some(),
                c.points.is_some(),
                c.morse.is_some(),
                c.constant.is_some(),
            ];
            ensure!(
                sources.iter().filter(|s| **s).count() == 1,
                Config,
                "curve '{}' needs exactly one of file, points, morse, constant",
                c.name
            );
        }
        let curve = |name: &str, kind: CurveKind, who: &str| -> Result<()> {
            match kinds.get(name) {
                None => Err(Error::Config(format!(
                    "{who} references unknown curve '{name}'"
                ))),
                Some(k) if *k != kind => Err(Error::Config(format!(
                    "{who} needs a {kind} curve but '{name}' is a {k}"
                ))),
                Some(_) => Ok(()),
            }
        };
        let mut manifolds = BTreeMap::new();
        for m in &self.manifolds {
            let who = format!("manifold '{}'", m.name);
            ensure!(
                manifolds.insert(m.name.as_str(), m).is_none(),
                Config,
                "{who} declared twice"
            );
            match (&m.potential, &m.channels) {
                (Some(p), None) => {
                    curve(p, CurveKind::Potential, &who)?;
                    ensure!(m.spin.is_some(), Config, "{who} needs `spin`");
                }
                (None, Some([a, b])) => {
                    curve(a, CurveKind::Potential, &who)?;
                    curve(b, CurveKind::Potential, &who)?;
                    ensure!(m.spins.is_some(), Config, "{who} needs `spins`");
                    let c = m
                        .coupling
                        .as_deref()
                        .ok_or_else(|| Error::Config(format!("{who} needs `coupling`")))?;
                    curve(c, CurveKind::Coupling, &who)?;
                    if let Some(d) = &m.diagonal {
                        curve(d, CurveKind::Coupling, &who)?;
                    }
                }
                _ => {
                    return Err(Error::Config(format!(
                        "{who} needs either `potential` or `channels`"
                    )))
                }
            }
        }
        let manifold = |name: &str, who: &str| -> Result<()> {
            ensure!(
                manifolds.contains_key(name),
                Config,
                "{who} references unknown manifold '{name}'"
            );
            Ok(())
        };
        for t in &self.transitions {
            let who = format!("transition {} -> {}", t.from, t.to);
            manifold(&t.from, &who)?;
            manifold(&t.to, &who)?;
            curve(&t.dipole, CurveKind::Dipole, &who)?;
        }
        if let Some(c) = &self.cascade {
            for m in [&c.lower, &c.upper, &c.coupled, &c.ground] {
                manifold(m, "cascade")?;
            }
            ensure!(
                manifolds[c.coupled.as_str()].channels.is_some(),
                Config,
                "cascade: '{}' must be a coupled manifold",
                c.coupled
            );
            for d in [&c.upper_lower, &c.upper_coupled, &c.coupled_ground] {
                curve(d, CurveKind::Dipole, "cascade")?;
            }
            ensure!(
                (0.0..=crate::cascade::MAX_LOSS).contains(&c.loss),
                Config,
                "cascade loss {} outside [0, {}]",
                c.loss,
                crate::cascade::MAX_LOSS
            );
            ensure!(c.dark_rate >= 0.0, Config, "dark_rate must be non-negative");
        }
        if self.convert.is_some() || self.pump.is_some() {
            ensure!(
                self.cascade.is_some(),
                Config,
                "scenarios need a [cascade] block"
            );
        }
        if let Some(p) = &self.pump {
            ensure!(p.window.0 <= p.window.1, Config, "pump window is empty");
            ensure!(
                !(p.v_a.is_some() && p.initial.is_some()),
                Config,
                "pump takes `v_a` or `initial`, not both"
            );
        }
        Ok(())
    }
}

/// A configuration bound to its curves and grid, with manifolds solved on
/// demand.
#[derive(Debug)]
pub struct Pipeline {
    pub config: PipelineConfig,
    config_text: String,
    config_name: String,
    base_dir: PathBuf,
    pub curves: CurveSet,
    pub grid: Arc<MappedGrid>,
    manifolds: BTreeMap<String, Manifold>,
}

impl Pipeline {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&text, path, &base)
    }

    /// `origin` is only used in messages and the manifest; relative data paths
    /// resolve against `base_dir`.
    pub fn from_text(text: &str, origin: &Path, base_dir: &Path) -> Result<Self> {
        let config = PipelineConfig::parse(text, origin)?;
        let mu = units::amu_to_me(config.reduced_mass_amu);
        let mut curves = CurveSet::new(mu)?;
        for c in &config.curves {
            curves.insert(c.name.clone(), build_curve(c, base_dir, mu)?)?;
        }
        let grid = Arc::new(build_grid(&config, &curves)?);
        log::info!(
            "grid: {} points on [{:.4}, {:.4}] Å",
            grid.len(),
            units::bohr_to_angstrom(grid.range().0),
            units::bohr_to_angstrom(grid.range().1)
        );
        Ok(Self {
            config,
            config_text: text.to_string(),
            config_name: origin
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            base_dir: base_dir.to_path_buf(),
            curves,
            grid,
            manifolds: BTreeMap::new(),
        })
    }

    pub fn reduced_mass(&self) -> f64 {
        self.curves.reduced_mass()
    }

    /// Solves every declared manifold not solved yet, in declaration order.
    pub fn solve_all(&mut self, opts: &SolveOptions) -> Result<()> {
        let names: Vec<String> = self
            .config
            .manifolds
            .iter()
            .map(|m| m.name.clone())
            .collect();
        for name in names {
            self.solve(&name, opts)?;
        }
        Ok(())
    }

    pub fn solve(&mut self, name: &str, opts: &SolveOptions) -> Result<&Manifold> {
        if !self.manifolds.contains_key(name) {
            let m = self
                .config
                .manifolds
                .iter()
                .find(|m| m.name == name)
                .ok_or_else(|| Error::Validation(format!("unknown manifold '{name}'")))?;
            let mu = self.reduced_mass();
            let ceiling = m.ceiling.map_or(f64::INFINITY, units::cm_to_hartree);
            let solved = match (&m.potential, &m.channels) {
                (Some(p), _) => Manifold::Single {
                    label: m.name.clone(),
                    spin: m.spin.expect("validated"),
                    levels: solve_channel(self.curves.get(p)?, &self.grid, mu, ceiling, opts)?
                        .into_iter()
                        .map(|mut l| {
                            l.manifold = m.name.clone();
                            l
                        })
                        .collect(),
                },
                (None, Some([a, b])) => {
                    let channels = CoupledChannels {
                        first: self.curves.get(a)?,
                        second: self.curves.get(b)?,
                        coupling: self.curves.get(m.coupling.as_deref().expect("validated"))?,
                        diagonal: m
                            .diagonal
                            .as_deref()
                            .map(|d| self.curves.get(d))
                            .transpose()?,
                    };
                    Manifold::Coupled {
                        label: m.name.clone(),
                        spins: m.spins.expect("validated"),
                        levels: solve_coupled(channels, &self.grid, mu, ceiling, &m.name, opts)?,
                    }
                }
                (None, None) => unreachable!("validated"),
            };
            log::info!("manifold '{name}': {} levels", solved.len());
            self.manifolds.insert(name.to_string(), solved);
        }
        Ok(&self.manifolds[name])
    }

    pub fn manifold(&self, name: &str) -> Result<&Manifold> {
        self.manifolds
            .get(name)
            .ok_or_else(|| Error::Validation(format!("manifold '{name}' has not been solved")))
    }

    /// Rate tables from every level of `from` into `to`, using the declared
    /// transition between them.
    pub fn rate_tables(&self, from: &str, to: &str) -> Result<Vec<RateTable>> {
        let t = self.transition(from, to)?;
        let dipole = self.curves.get(&t.dipole)?;
        let (src, dst) = (self.manifold(from)?, self.manifold(to)?);
        src.levels()
            .map(|l| einstein_a(&l, dst, dipole, t.rule))
            .collect()
    }

    pub fn transition(&self, from: &str, to: &str) -> Result<&TransitionConfig> {
        self.config
            .transitions
            .iter()
            .find(|t| (t.from == from && t.to == to) || (t.from == to && t.to == from))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "no transition declared between '{from}' and '{to}'"
                ))
            })
    }

    /// Solves the cascade manifolds and assembles the branching network.
    pub fn network(&mut self, opts: &SolveOptions) -> Result<Network> {
        let c = self
            .config
            .cascade
            .clone()
            .ok_or_else(|| Error::Config("no [cascade] block".into()))?;
        for m in [&c.lower, &c.upper, &c.coupled, &c.ground] {
            self.solve(m, opts)?;
        }
        Network::build(NetworkInputs {
            lower: self.manifold(&c.lower)?,
            upper: self.manifold(&c.upper)?,
            coupled: self.manifold(&c.coupled)?,
            ground: self.manifold(&c.ground)?,
            d_upper_lower: self.curves.get(&c.upper_lower)?,
            d_upper_coupled: self.curves.get(&c.upper_coupled)?,
            d_coupled_ground: self.curves.get(&c.coupled_ground)?,
            loss: c.loss,
            dark_rate: c.dark_rate,
        })
    }

    fn manifest(&self, files: &BTreeMap<String, Vec<u8>>) -> Result<Vec<u8>> {
        let curves: Vec<_> = self
            .curves
            .iter()
            .map(|(name, c)| {
                serde_json::json!({
                    "name": name,
                    "kind": c.kind().to_string(),
                    "provenance": c.provenance(),
                })
            })
            .collect();
        let outputs: BTreeMap<&str, String> = files
            .iter()
            .map(|(name, bytes)| (name.as_str(), sha256_hex(bytes)))
            .collect();
        let m = serde_json::json!({
            "tool": concat!("vibcascade ", env!("CARGO_PKG_VERSION")),
            "constants": units::CONSTANTS_VERSION,
            "config": self.config_name,
            "config_sha256": sha256_hex(self.config_text.as_bytes()),
            "reduced_mass_amu": self.config.reduced_mass_amu,
            "reduced_mass_provenance": self.config.mass_provenance,
            "grid": {
                "points": self.grid.len(),
                "r_min_angstrom": units::bohr_to_angstrom(self.grid.range().0),
                "r_max_angstrom": units::bohr_to_angstrom(self.grid.range().1),
                "beta": self.grid.beta(),
            },
            "curves": curves,
            "outputs": outputs,
        });
        to_json(&m)
    }

    /// Writes `files` plus a manifest into `out`, creating it if needed.
    fn emit(&self, out: &Path, files: BTreeMap<String, Vec<u8>>) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let manifest = self.manifest(&files)?;
        let mut written = Vec::new();
        for (name, bytes) in files
            .iter()
            .chain([(&"manifest.json".to_string(), &manifest)])
        {
            let path = out.join(name);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn build_curve(c: &CurveConfig, base_dir: &Path, mu: f64) -> Result<RadialCurve> {
    let cm = units::cm_to_hartree;
    let units_tag =
        match &c.units {
            Some(tag) => Some(CurveUnits::parse(tag).ok_or_else(|| {
                Error::Config(format!("curve '{}': unknown units '{tag}'", c.name))
            })?),
            None => None,
        };
    let default_units = match c.kind {
        CurveKind::Dipole => CurveUnits {
            length: units::LengthUnit::Angstrom,
            value: units::ValueUnit::Atomic,
        },
        _ => CurveUnits::SPECTROSCOPIC,
    };
    let tail = c.long_range.as_ref().map(|t| LongRange {
        asymptote: cm(t.asymptote),
        terms: t
            .terms
            .iter()
            .map(|&(n, cn)| (n, crate::curves::dispersion_to_atomic(cn, n)))
            .collect(),
    });
    let mut curve = if let Some(file) = &c.file {
        let path = if file.is_absolute() {
            file.clone()
        } else {
            base_dir.join(file)
        };
        let loaded = load_curve(&path, units_tag.unwrap_or(default_units), c.kind)?;
        match tail {
            Some(t) => {
                let (rs, vs) = loaded.samples().expect("loaded curves are tabulated");
                RadialCurve::from_samples(c.kind, &c.name, rs.to_vec(), vs.to_vec(), Some(t))?
            }
            None => loaded,
        }
        .with_provenance(format!("file {}", file.display()))
    } else if let Some(points) = &c.points {
        let u = units_tag.unwrap_or(default_units);
        let rs = points.iter().map(|p| u.length.to_bohr(p.0)).collect();
        let vs = points.iter().map(|p| u.value.to_atomic(p.1)).collect();
        RadialCurve::from_samples(c.kind, &c.name, rs, vs, tail)?.with_provenance("inline samples")
    } else if let Some(m) = &c.morse {
        ensure!(
            c.kind == CurveKind::Potential,
            Config,
            "curve '{}': Morse form is only for potentials",
            c.name
        );
        let de = cm(m.de);
        let alpha = match (m.we, m.alpha) {
            (Some(we), None) => cm(we) * (mu / (2.0 * de)).sqrt(),
            (None, Some(a)) => a * units::BOHR_TO_ANGSTROM,
            _ => {
                return Err(Error::Config(format!(
                    "curve '{}': Morse needs exactly one of `we`, `alpha`",
                    c.name
                )))
            }
        };
        let morse = make_morse(de, alpha, units::angstrom_to_bohr(m.re), cm(m.te))?;
        let note = format!(
            "Morse D_e={} cm-1, R_e={} Å, T_e={} cm-1, a={:.6} bohr-1",
            m.de, m.re, m.te, alpha
        );
        match (m.switch, tail) {
            (None, None) => morse.with_provenance(note),
            (Some(sw), Some(t)) => {
                let (lo, hi) = (
                    0.5 * units::angstrom_to_bohr(m.re),
                    units::angstrom_to_bohr(sw),
                );
                ensure!(
                    hi > units::angstrom_to_bohr(m.re),
                    Config,
                    "curve '{}': switch radius must lie beyond R_e",
                    c.name
                );
                let n = ((hi - lo) / MORSE_SAMPLE_STEP).ceil() as usize + 1;
                let rs: Vec<f64> = (0..n)
                    .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect();
                let vs = rs
                    .iter()
                    .map(|&r| morse.eval(r))
                    .collect::<Result<Vec<_>>>()?;
                RadialCurve::from_samples(c.kind, &c.name, rs, vs, Some(t))?
                    .with_provenance(format!("{note}; dispersion tail beyond {sw} Å"))
            }
            _ => {
                return Err(Error::Config(format!(
                    "curve '{}': a Morse `switch` and `long_range` go together",
                    c.name
                )))
            }
        }
    } else {
        let v = c.constant.expect("validated");
        let value = if c.kind == CurveKind::Dipole {
            v
        } else {
            cm(v)
        };
        RadialCurve::constant(c.kind, &c.name, value).with_provenance("constant")
    };
    if c.shift != 0.0 {
        let note = format!("{}; shifted by {} cm-1", curve.provenance(), c.shift);
        curve = shift_curve(&curve, cm(c.shift))?.with_provenance(note);
    }
    if let Some(p) = &c.provenance {
        let note = format!("{}; {p}", curve.provenance());
        curve = curve.with_provenance(note);
    }
    Ok(curve.with_label(&c.name))
}

/// Mapped grids follow the pointwise minimum of all manifold potentials, each
/// measured from its own dissociation limit.
fn build_grid(cfg: &PipelineConfig, curves: &CurveSet) -> Result<MappedGrid> {
    let g = &cfg.grid;
    let (r_min, r_max) = (
        units::angstrom_to_bohr(g.r_min),
        units::angstrom_to_bohr(g.r_max),
    );
    if g.kind == GridKind::Uniform {
        return build_uniform(r_min, r_max, g.n.expect("validated"));
    }
    let mut names: Vec<&str> = Vec::new();
    for m in &cfg.manifolds {
        names.extend(m.potential.iter().map(String::as_str));
        names.extend(m.channels.iter().flatten().map(String::as_str));
    }
    names.sort_unstable();
    names.dedup();
    ensure!(
        !names.is_empty(),
        Config,
        "a mapped grid needs at least one manifold"
    );
    let mut shifted = CurveSet::new(curves.reduced_mass())?;
    for name in &names {
        let c = curves.get(name)?;
        shifted.insert(*name, shift_curve(c, -c.asymptote())?)?;
    }
    let envelope = shifted.envelope(&names, r_min, r_max, ENVELOPE_SAMPLES)?;
    let mut p = MappingParams::new(
        units::cm_to_hartree(g.e_max),
        g.beta,
        curves.reduced_mass(),
        r_min,
        r_max,
    );
    p.n_cap = g.n_cap;
    build_mapped(&envelope, p)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Output(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Manifold name made safe for file names.
fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_+".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn sci(x: f64) -> String {
    format!("{x:.10e}")
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Output(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Output(e.to_string()))
}

pub const LEVEL_HEADER: [&str; 6] = [
    "manifold",
    "v",
    "energy_cm-1",
    "f_A",
    "inner_turning_A",
    "outer_turning_A",
];

pub const RATE_HEADER: [&str; 8] = [
    "from_manifold",
    "v_i",
    "to_manifold",
    "v_j",
    "deltaE_cm-1",
    "mu2_au",
    "A_partial_s-1",
    "branching",
];

/// Level table of one manifold as CSV bytes.
pub fn level_table(m: &Manifold) -> Result<Vec<u8>> {
    let rows = m.levels().map(|l| {
        let (tp, f) = match l {
            LevelView::Single(s, _) => (s.turning_points, String::new()),
            LevelView::Coupled(c, _) => (c.turning_points, sci(c.f_first)),
        };
        vec![
            m.label().to_string(),
            l.v().to_string(),
            fixed(units::hartree_to_cm(l.energy())),
            f,
            fixed(units::bohr_to_angstrom(tp.0)),
            fixed(units::bohr_to_angstrom(tp.1)),
        ]
    });
    csv_bytes(&LEVEL_HEADER, rows)
}

/// All elements of `tables` as rate CSV bytes.
pub fn rate_csv(tables: &[RateTable]) -> Result<Vec<u8>> {
    let rows = tables.iter().flat_map(|t| {
        t.elements.iter().zip(&t.branching).map(|(e, b)| {
            vec![
                e.from.manifold.clone(),
                e.from.v.to_string(),
                e.to.manifold.clone(),
                e.to.v.to_string(),
                fixed(units::hartree_to_cm(e.nu)),
                sci(e.mu2),
                sci(e.a_partial),
                sci(*b),
            ]
        })
    });
    csv_bytes(&RATE_HEADER, rows)
}

/// Two-column `(v_j, value)` text.
pub fn stick_text(values: impl IntoIterator<Item = (usize, f64)>) -> Vec<u8> {
    let mut s = String::new();
    for (v, x) in values {
        let _ = writeln!(s, "{v} {}", sci(x));
    }
    s.into_bytes()
}

/// Writes one level table per manifold.
pub fn cmd_levels(p: &mut Pipeline, out: &Path, opts: &SolveOptions) -> Result<Vec<PathBuf>> {
    p.solve_all(opts)?;
    let mut files = BTreeMap::new();
    for m in &p.config.manifolds {
        let solved = p.manifold(&m.name)?;
        files.insert(
            format!("levels_{}.csv", file_stem(&m.name)),
            level_table(solved)?,
        );
    }
    p.emit(out, files)
}

/// Writes the rate table `from → to` and stick spectra of μ² and A.
pub fn cmd_rates(
    p: &mut Pipeline,
    from: &str,
    to: &str,
    out: &Path,
    opts: &SolveOptions,
) -> Result<Vec<PathBuf>> {
    let t = p.transition(from, to)?.clone();
    p.solve(from, opts)?;
    p.solve(to, opts)?;
    let tables = p.rate_tables(from, to)?;
    let (sf, st) = (file_stem(from), file_stem(to));
    let mut files = BTreeMap::new();
    files.insert(format!("rates_{sf}_to_{st}.csv"), rate_csv(&tables)?);
    let mut summary = Vec::new();
    for table in &tables {
        summary.push((table.source.v, table.a_total));
        let wanted = t
            .sticks
            .as_ref()
            .is_none_or(|s| s.contains(&table.source.v));
        if !wanted {
            continue;
        }
        let v = table.source.v;
        let mu2 = table.elements.iter().map(|e| (e.to.v, e.mu2));
        let a = table.elements.iter().map(|e| (e.to.v, e.a_partial));
        files.insert(format!("sticks/{sf}_v{v}_to_{st}_mu2.dat"), stick_text(mu2));
        files.insert(format!("sticks/{sf}_v{v}_to_{st}_A.dat"), stick_text(a));
    }
    files.insert(
        format!("sticks/{sf}_to_{st}_A_total.dat"),
        stick_text(summary),
    );
    p.emit(out, files)
}

#[derive(Debug, serde::Serialize)]
struct StepOne<'a> {
    source: String,
    a_total_lower: f64,
    a_total_coupled: f64,
    lifetime_s: f64,
    branching_lower: &'a [f64],
    branching_coupled: &'a [f64],
}

#[derive(Debug, serde::Serialize)]
struct StepTwo {
    v: usize,
    population: f64,
    f_first: f64,
    a_total: f64,
    lifetime_s: f64,
    branching_ground: Vec<f64>,
}

#[derive(Debug, serde::Serialize)]
struct ConversionFile<'a> {
    report: &'a ConversionReport,
    loss_parameter: f64,
    cooling_loss: f64,
    high_v_a: Option<usize>,
    high_v_a_excitation_mu2: Option<f64>,
    step_one: StepOne<'a>,
    step_two: Vec<StepTwo>,
}

/// Conversion scenario: efficiencies, final distributions and the branching
/// tables of both decay steps.
pub fn cmd_convert(p: &mut Pipeline, out: &Path, opts: &SolveOptions) -> Result<Vec<PathBuf>> {
    let conv = p
        .config
        .convert
        .clone()
        .ok_or_else(|| Error::Config("no [convert] block".into()))?;
    let casc = p.config.cascade.clone().expect("validated");
    let net = p.network(opts)?;
    let report = two_step_conversion(conv.v_a, &net)?;
    let loss = crate::cascade::cooling_loss(conv.v_a, &net)?;

    let find = |source: &crate::rates::LevelKey, target: &str| {
        net.tables
            .iter()
            .find(|t| &t.source == source && t.target == target)
            .ok_or_else(|| Error::Coverage(source.to_string()))
    };
    let to_lower = find(&report.excited, &casc.lower)?;
    let to_coupled = find(&report.excited, &casc.coupled)?;
    let a_sum = to_lower.a_total + to_coupled.a_total;

    // population of each coupled level right after the first decay
    let mut step_two = Vec::new();
    let coupled = p.manifold(&casc.coupled)?;
    for (e, b) in to_coupled.elements.iter().zip(&to_coupled.branching) {
        let pop = (1.0 - casc.loss) * b * to_coupled.a_total / a_sum;
        if pop <= 0.0 {
            continue;
        }
        let t = find(&e.to, &casc.ground)?;
        let f_first = match coupled.level(e.to.v) {
            Some(LevelView::Coupled(c, _)) => c.f_first,
            _ => f64::NAN,
        };
        step_two.push(StepTwo {
            v: e.to.v,
            population: pop,
            f_first,
            a_total: t.a_total,
            lifetime_s: t.lifetime(),
            branching_ground: t.branching.clone(),
        });
    }

    let lower = p.manifold(&casc.lower)?;
    let high = conv.high_v_a.or_else(|| lower.len().checked_sub(1));
    let high_mu2 = high.and_then(|v| net.excitation.get(&v)).map(|(_, m)| *m);
    let file = ConversionFile {
        report: &report,
        loss_parameter: casc.loss,
        cooling_loss: loss,
        high_v_a: high,
        high_v_a_excitation_mu2: high_mu2,
        step_one: StepOne {
            source: report.excited.to_string(),
            a_total_lower: to_lower.a_total,
            a_total_coupled: to_coupled.a_total,
            lifetime_s: 1.0 / a_sum,
            branching_lower: &to_lower.branching,
            branching_coupled: &to_coupled.branching,
        },
        step_two,
    };
    let mut files = BTreeMap::new();
    files.insert("conversion.json".into(), to_json(&file)?);
    let dist = |m: &str, xs: &[f64]| -> Result<Vec<u8>> {
        csv_bytes(
            &["manifold", "v", "population"],
            xs.iter()
                .enumerate()
                .map(|(v, x)| vec![m.to_string(), v.to_string(), sci(*x)]),
        )
    };
    files.insert(
        format!("conversion_{}.csv", file_stem(&casc.ground)),
        dist(&casc.ground, &report.p_x)?,
    );
    files.insert(
        format!("conversion_{}.csv", file_stem(&casc.lower)),
        dist(&casc.lower, &report.p_a)?,
    );
    p.emit(out, files)
}

/// Reads a two-column `(v, weight)` population file.
pub fn load_population(path: &Path, manifold: &str) -> Result<PopulationVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut weights = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: msg.to_string(),
        };
        let mut cols = line.split_whitespace();
        let v = cols
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| parse_err("expected a level index"))?;
        let w = cols
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .ok_or_else(|| parse_err("expected a weight"))?;
        if cols.next().is_some() {
            return Err(parse_err("more than two columns"));
        }
        if !(w >= 0.0 && w.is_finite()) {
            return Err(parse_err("weights must be finite and non-negative"));
        }
        weights.push((v, w));
    }
    PopulationVector::from_weights(manifold, &weights)
}

fn slot_names(slot: &Slot) -> (String, String) {
    match slot {
        Slot::Level(k) => (k.manifold.clone(), k.v.to_string()),
        Slot::Sink(Sink::Loss) => ("loss".into(), String::new()),
        Slot::Sink(Sink::Trapped) => ("trapped".into(), String::new()),
    }
}

/// Pumping scenario: full trajectory and per-cycle totals.
pub fn cmd_pump(p: &mut Pipeline, out: &Path, opts: &SolveOptions) -> Result<Vec<PathBuf>> {
    let pump = p
        .config
        .pump
        .clone()
        .ok_or_else(|| Error::Config("no [pump] block".into()))?;
    let casc = p.config.cascade.clone().expect("validated");
    let net = p.network(opts)?;
    let pop0 = match &pump.initial {
        Some(file) => load_population(&p.resolve(file), &casc.lower)?,
        None => {
            let v = pump
                .v_a
                .or_else(|| p.config.convert.as_ref().map(|c| c.v_a))
                .ok_or_else(|| {
                    Error::Config("pump needs `v_a`, `initial` or a [convert] block".into())
                })?;
            PopulationVector::delta(&casc.lower, v)
        }
    };
    for (slot, _) in pop0.iter() {
        if let Slot::Level(k) = slot {
            ensure!(
                k.v < net.lower.1,
                Validation,
                "initial population on {k}, which is not a bound level"
            );
        }
    }
    let window = pump.window.0..=pump.window.1;
    let traj = pump_cycle(
        &pop0,
        window.clone(),
        pump.n_cycles,
        &net,
        pump.max_inner_steps,
    )?;

    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (cycle, pop) in traj.iter().enumerate() {
        for (slot, x) in pop.iter() {
            let (m, v) = slot_names(slot);
            rows.push(vec![cycle.to_string(), m, v, sci(x)]);
        }
        let in_window: f64 = pop
            .distribution(&casc.lower, net.lower.1)
            .iter()
            .enumerate()
            .filter(|(v, _)| window.contains(v))
            .map(|(_, x)| x)
            .sum();
        summary.push(vec![
            cycle.to_string(),
            sci(pop.manifold_total(&casc.ground)),
            sci(pop.manifold_total(&casc.lower)),
            sci(in_window),
            sci(pop.sink(Sink::Loss)),
            sci(pop.sink(Sink::Trapped)),
            sci(pop.total()),
        ]);
    }
    let mut files = BTreeMap::new();
    files.insert(
        "pump_trajectory.csv".into(),
        csv_bytes(&["cycle", "manifold", "v", "population"], rows)?,
    );
    files.insert(
        "pump_summary.csv".into(),
        csv_bytes(
            &[
                "cycle",
                "ground_total",
                "lower_total",
                "in_window",
                "loss",
                "trapped",
                "total",
            ],
            summary,
        )?,
    );
    p.emit(out, files)
}
