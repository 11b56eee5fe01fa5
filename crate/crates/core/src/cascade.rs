//! Population transfer through the excitation / radiative-decay network.
//!
//! Populations live on vibronic levels plus two sinks: `Loss` collects the
//! configurable fraction that leaves through unsolved fine-structure channels,
//! `Trapped` collects levels that have no radiative route inside the model
//! (for example pure triplet components of a coupled manifold). Decay is
//! iterated to quiescence; time never enters, only branching ratios do.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use crate::bound::Manifold;
use crate::curves::RadialCurve;
use crate::error::{ensure, Error, Result};
use crate::rates::{einstein_a, strongest_transition, ChannelRule, LevelKey, RateTable};

/// Tolerance for row sums and conservation checks.
pub const ROW_TOL: f64 = 1e-12;

/// Levels whose total emission rate (s⁻¹) falls below this are treated as
/// non-radiating and routed to the trapped sink.
pub const DEFAULT_DARK_RATE: f64 = 1.0;

/// Default cap on decay sweeps per relaxation.
pub const DEFAULT_MAX_INNER_STEPS: usize = 50;

/// Largest loss fraction accepted for the upper-state decay.
pub const MAX_LOSS: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sink {
    Loss,
    Trapped,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Slot {
    Level(LevelKey),
    Sink(Sink),
}

impl Slot {
    pub fn level(manifold: &str, v: usize) -> Self {
        Self::Level(LevelKey::new(manifold, v))
    }

    pub fn manifold(&self) -> Option<&str> {
        match self {
            Self::Level(k) => Some(&k.manifold),
            Self::Sink(_) => None,
        }
    }
}

/// Occupations over levels and sinks. Zero entries are not stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PopulationVector {
    entries: BTreeMap<Slot, f64>,
}

impl PopulationVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit population on one level.
    pub fn delta(manifold: &str, v: usize) -> Self {
        let mut p = Self::new();
        p.entries.insert(Slot::level(manifold, v), 1.0);
        p
    }

    /// Population spread over the levels of one manifold. Weights must be
    /// non-negative; they are used as given, not renormalized.
    pub fn from_weights(manifold: &str, weights: &[(usize, f64)]) -> Result<Self> {
        let mut p = Self::new();
        for &(v, w) in weights {
            p.add(Slot::level(manifold, v), w)?;
        }
        Ok(p)
    }

    pub fn get(&self, slot: &Slot) -> f64 {
        self.entries.get(slot).copied().unwrap_or(0.0)
    }

    pub fn level(&self, manifold: &str, v: usize) -> f64 {
        self.get(&Slot::level(manifold, v))
    }

    pub fn sink(&self, sink: Sink) -> f64 {
        self.get(&Slot::Sink(sink))
    }

    pub fn add(&mut self, slot: Slot, amount: f64) -> Result<()> {
        ensure!(
            amount.is_finite() && amount >= 0.0,
            Validation,
            "occupation must be finite and non-negative, got {amount}"
        );
        if amount > 0.0 {
            *self.entries.entry(slot).or_insert(0.0) += amount;
        }
        Ok(())
    }

    fn take(&mut self, slot: &Slot, amount: f64) {
        if let Some(x) = self.entries.get_mut(slot) {
            *x -= amount;
            if *x <= 0.0 {
                self.entries.remove(slot);
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Slot, f64)> {
        self.entries.iter().map(|(s, x)| (s, *x))
    }

    /// Sum over all entries, sinks included, in slot order.
    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    pub fn manifold_total(&self, manifold: &str) -> f64 {
        self.iter()
            .filter(|(s, _)| s.manifold() == Some(manifold))
            .map(|(_, x)| x)
            .sum()
    }

    /// Occupations of `manifold` as a dense vector of length `len`.
    pub fn distribution(&self, manifold: &str, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (s, x) in self.iter() {
            if let Slot::Level(k) = s {
                if k.manifold == manifold && k.v < len {
                    out[k.v] = x;
                }
            }
        }
        out
    }

    fn populated_in(&self, manifold: &str) -> Vec<(usize, f64)> {
        self.iter()
            .filter_map(|(s, x)| match s {
                Slot::Level(k) if k.manifold == manifold => Some((k.v, x)),
                _ => None,
            })
            .collect()
    }
}

/// Fate of one source level.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BranchRow {
    pub targets: Vec<(LevelKey, f64)>,
    pub loss: f64,
    pub trapped: f64,
}

impl BranchRow {
    pub fn sum(&self) -> f64 {
        self.targets.iter().map(|(_, b)| b).sum::<f64>() + self.loss + self.trapped
    }

    /// Row built from emission tables into one or more manifolds. A fraction
    /// `loss` leaves through the loss sink; a level radiating slower than
    /// `dark_rate` is trapped.
    pub fn from_tables(tables: &[RateTable], loss: f64, dark_rate: f64) -> Result<Self> {
        ensure!(
            (0.0..=1.0).contains(&loss),
            Validation,
            "loss fraction {loss} outside [0, 1]"
        );
        let mut a_sum = 0.0;
        for t in tables {
            a_sum += t.a_total;
        }
        if a_sum < dark_rate {
            return Ok(Self {
                targets: vec![],
                loss: 0.0,
                trapped: 1.0,
            });
        }
        let mut targets = Vec::new();
        for t in tables {
            for e in t.elements.iter().filter(|e| e.a_partial > 0.0) {
                targets.push((e.to.clone(), (1.0 - loss) * e.a_partial / a_sum));
            }
        }
        Ok(Self {
            targets,
            loss,
            trapped: 0.0,
        })
    }
}

/// Branching rows for the levels of one source manifold.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BranchingMatrix {
    pub source: String,
    pub rows: BTreeMap<usize, BranchRow>,
}

impl BranchingMatrix {
    pub fn new(source: impl Into<String>, rows: BTreeMap<usize, BranchRow>) -> Result<Self> {
        let source = source.into();
        for (v, row) in &rows {
            let bad = row.targets.iter().any(|(_, b)| !(*b >= 0.0))
                || !(row.loss >= 0.0)
                || !(row.trapped >= 0.0);
            ensure!(!bad, Validation, "negative branching in {source}(v={v})");
            ensure!(
                (row.sum() - 1.0).abs() <= ROW_TOL,
                Validation,
                "row {source}(v={v}) sums to {}",
                row.sum()
            );
            ensure!(
                row.targets.iter().all(|(k, _)| k.manifold != source),
                Validation,
                "row {source}(v={v}) decays within its own manifold"
            );
        }
        Ok(Self { source, rows })
    }
}

/// Moves `fraction` of the population at `from` to `to`.
pub fn excite(
    pop: &PopulationVector,
    from: &LevelKey,
    to: &LevelKey,
    fraction: f64,
) -> Result<PopulationVector> {
    ensure!(
        (0.0..=1.0).contains(&fraction),
        Validation,
        "excitation fraction {fraction} outside [0, 1]"
    );
    let from_slot = Slot::Level(from.clone());
    ensure!(
        pop.entries.contains_key(&from_slot),
        Validation,
        "{from} is not populated"
    );
    let mut out = pop.clone();
    let moved = fraction * pop.get(&from_slot);
    if moved > 0.0 {
        // full transfer must leave exactly nothing behind
        if fraction == 1.0 {
            out.entries.remove(&from_slot);
        } else {
            out.take(&from_slot, moved);
        }
        out.add(Slot::Level(to.clone()), moved)?;
    }
    Ok(out)
}

/// Redistributes every populated level of `b.source` along its row.
pub fn decay_step(pop: &PopulationVector, b: &BranchingMatrix) -> Result<PopulationVector> {
    let sources = pop.populated_in(&b.source);
    let mut out = pop.clone();
    for (v, p) in sources {
        let row = b
            .rows
            .get(&v)
            .ok_or_else(|| Error::Coverage(LevelKey::new(b.source.clone(), v).to_string()))?;
        out.entries.remove(&Slot::level(&b.source, v));
        for (k, frac) in &row.targets {
            out.add(Slot::Level(k.clone()), frac * p)?;
        }
        out.add(Slot::Sink(Sink::Loss), row.loss * p)?;
        out.add(Slot::Sink(Sink::Trapped), row.trapped * p)?;
    }
    Ok(out)
}

/// Excitation and decay network of the triplet-to-singlet scheme: a lower
/// triplet manifold is pumped to an upper triplet manifold, which decays back
/// to the lower one or into a spin-orbit coupled manifold, which in turn
/// decays to the singlet ground manifold.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Network {
    /// pumped, non-radiating manifold and its level count
    pub lower: (String, usize),
    /// absorbing ground manifold and its level count
    pub ground: (String, usize),
    /// radiating manifolds in cascade order
    pub decays: Vec<BranchingMatrix>,
    /// strongest excitation target and its squared dipole, per lower level
    pub excitation: BTreeMap<usize, (LevelKey, f64)>,
    /// emission tables behind the branching rows
    pub tables: Vec<RateTable>,
}

/// Solved manifolds and dipoles for [`Network::build`].
#[derive(Debug, Clone, Copy)]
pub struct NetworkInputs<'a> {
    pub lower: &'a Manifold,
    pub upper: &'a Manifold,
    pub coupled: &'a Manifold,
    pub ground: &'a Manifold,
    /// upper ↔ lower
    pub d_upper_lower: &'a RadialCurve,
    /// upper ↔ coupled (acts on the triplet component)
    pub d_upper_coupled: &'a RadialCurve,
    /// coupled ↔ ground (acts on the singlet component)
    pub d_coupled_ground: &'a RadialCurve,
    /// fraction of upper-state decay lost to unsolved channels
    pub loss: f64,
    pub dark_rate: f64,
}

impl Network {
    pub fn build(inp: NetworkInputs<'_>) -> Result<Self> {
        ensure!(
            (0.0..=MAX_LOSS).contains(&inp.loss),
            Validation,
            "loss fraction {} outside [0, {MAX_LOSS}]",
            inp.loss
        );
        let rule = ChannelRule::BySpin;
        let mut tables = Vec::new();

        let mut upper_rows = BTreeMap::new();
        for lvl in inp.upper.levels() {
            let to_lower = einstein_a(&lvl, inp.lower, inp.d_upper_lower, rule)?;
            let to_coupled = einstein_a(&lvl, inp.coupled, inp.d_upper_coupled, rule)?;
            let pair = [to_lower, to_coupled];
            upper_rows.insert(
                lvl.v(),
                BranchRow::from_tables(&pair, inp.loss, inp.dark_rate)?,
            );
            tables.extend(pair);
        }

        let mut coupled_rows = BTreeMap::new();
        for lvl in inp.coupled.levels() {
            let to_ground = einstein_a(&lvl, inp.ground, inp.d_coupled_ground, rule)?;
            let row = BranchRow::from_tables(std::slice::from_ref(&to_ground), 0.0, inp.dark_rate)?;
            coupled_rows.insert(lvl.v(), row);
            tables.push(to_ground);
        }

        let mut excitation = BTreeMap::new();
        if !inp.upper.is_empty() {
            for lvl in inp.lower.levels() {
                let (vj, mu2) = strongest_transition(&lvl, inp.upper, inp.d_upper_lower, rule)?;
                excitation.insert(lvl.v(), (LevelKey::new(inp.upper.label(), vj), mu2));
            }
        }

        Ok(Self {
            lower: (inp.lower.label().to_string(), inp.lower.len()),
            ground: (inp.ground.label().to_string(), inp.ground.len()),
            decays: vec![
                BranchingMatrix::new(inp.upper.label(), upper_rows)?,
                BranchingMatrix::new(inp.coupled.label(), coupled_rows)?,
            ],
            excitation,
            tables,
        })
    }

    fn radiating(&self, pop: &PopulationVector) -> f64 {
        self.decays
            .iter()
            .map(|b| pop.manifold_total(&b.source))
            .sum()
    }

    /// Applies decay sweeps until no radiating manifold holds population.
    pub fn relax(&self, pop: &PopulationVector, max_steps: usize) -> Result<PopulationVector> {
        let mut cur = pop.clone();
        for _ in 0..max_steps {
            if self.radiating(&cur) == 0.0 {
                return Ok(cur);
            }
            for b in &self.decays {
                cur = decay_step(&cur, b)?;
            }
        }
        if self.radiating(&cur) == 0.0 {
            Ok(cur)
        } else {
            Err(Error::NonConvergence(max_steps))
        }
    }

    fn excitation_of(&self, v_a: usize) -> Result<&(LevelKey, f64)> {
        self.excitation.get(&v_a).ok_or_else(|| {
            Error::Validation(format!(
                "no excitation target for {}(v={v_a})",
                self.lower.0
            ))
        })
    }

    fn upper_row(&self, target: &LevelKey) -> Result<&BranchRow> {
        self.decays
            .iter()
            .find(|b| b.source == target.manifold)
            .and_then(|b| b.rows.get(&target.v))
            .ok_or_else(|| Error::Coverage(target.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConversionReport {
    pub v_a: usize,
    /// upper level reached by the excitation
    pub excited: LevelKey,
    pub excitation_mu2: f64,
    /// final ground-manifold distribution over v″
    pub p_x: Vec<f64>,
    /// final lower-manifold distribution over v_a′
    pub p_a: Vec<f64>,
    pub eta_x: f64,
    pub eta_a: f64,
    /// everything else: loss sink plus trapped population
    pub eta_loss: f64,
    /// part of `eta_loss` that sits in non-radiating levels
    pub trapped: f64,
}

impl ConversionReport {
    fn from_population(
        net: &Network,
        v_a: usize,
        excited: LevelKey,
        mu2: f64,
        pop: &PopulationVector,
    ) -> Self {
        let p_x = pop.distribution(&net.ground.0, net.ground.1);
        let p_a = pop.distribution(&net.lower.0, net.lower.1);
        let eta_x: f64 = p_x.iter().sum();
        let eta_a: f64 = p_a.iter().sum();
        let trapped = pop.sink(Sink::Trapped);
        Self {
            v_a,
            excited,
            excitation_mu2: mu2,
            p_x,
            p_a,
            eta_x,
            eta_a,
            eta_loss: pop.sink(Sink::Loss) + trapped,
            trapped,
        }
    }
}

/// Unit population at lower level `v_a`, excited to its strongest upper
/// target and relaxed to quiescence.
pub fn two_step_conversion(v_a: usize, net: &Network) -> Result<ConversionReport> {
    let (target, mu2) = net.excitation_of(v_a)?.clone();
    let pop = PopulationVector::delta(&net.lower.0, v_a);
    let pop = excite(&pop, &LevelKey::new(net.lower.0.clone(), v_a), &target, 1.0)?;
    let pop = net.relax(&pop, DEFAULT_MAX_INNER_STEPS)?;
    Ok(ConversionReport::from_population(
        net, v_a, target, mu2, &pop,
    ))
}

/// Repeated broadband pumping of the lower levels inside `window`. Returns the
/// population after every cycle, preceded by `pop0`.
pub fn pump_cycle(
    pop0: &PopulationVector,
    window: RangeInclusive<usize>,
    n_cycles: usize,
    net: &Network,
    max_inner: usize,
) -> Result<Vec<PopulationVector>> {
    ensure!(!window.is_empty(), Validation, "empty pumping window");
    let mut traj = vec![pop0.clone()];
    let mut cur = pop0.clone();
    for _ in 0..n_cycles {
        let pumped: Vec<usize> = cur
            .populated_in(&net.lower.0)
            .into_iter()
            .map(|(v, _)| v)
            .filter(|v| window.contains(v))
            .collect();
        for v in pumped {
            let (target, _) = net.excitation_of(v)?;
            cur = excite(&cur, &LevelKey::new(net.lower.0.clone(), v), target, 1.0)?;
        }
        cur = net.relax(&cur, max_inner)?;
        traj.push(cur.clone());
    }
    Ok(traj)
}

/// Fraction of molecules excited from `v_a` that do not return to the lower
/// manifold in one absorption-emission cycle.
pub fn cooling_loss(v_a: usize, net: &Network) -> Result<f64> {
    let (target, _) = net.excitation_of(v_a)?;
    let row = net.upper_row(target)?;
    let back: f64 = row
        .targets
        .iter()
        .filter(|(k, _)| k.manifold == net.lower.0)
        .map(|(_, b)| b)
        .sum();
    Ok(1.0 - back)
}
