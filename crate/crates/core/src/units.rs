//! Physical constants and unit conversions.
//!
//! Everything inside the crate works in atomic units (hartree, bohr, electron
//! mass, e·a₀). Conversions to and from spectroscopic units (cm⁻¹, Å, amu,
//! debye) happen only through this table. Values are CODATA 2018.

/// Identifier written into run manifests so outputs can be traced to the
/// constants they were produced with.
pub const CONSTANTS_VERSION: &str = "CODATA-2018";

/// 1 hartree in cm⁻¹.
pub const HARTREE_TO_CM: f64 = 2.194_746_313_632e5;

/// 1 bohr in Å.
pub const BOHR_TO_ANGSTROM: f64 = 0.529_177_210_903;

/// Unified atomic mass unit in electron masses.
pub const AMU_TO_ME: f64 = 1_822.888_486_209;

/// 1 debye in e·a₀.
pub const DEBYE_TO_AU: f64 = 0.393_430_307;

/// Fine-structure constant.
pub const FINE_STRUCTURE: f64 = 7.297_352_569_3e-3;

/// Atomic unit of time in seconds.
pub const AU_TIME_S: f64 = 2.418_884_326_585_7e-17;

/// Mass of ¹³³Cs in amu (AME 2016).
pub const CS133_MASS_AMU: f64 = 132.905_451_961;

#[inline]
pub fn cm_to_hartree(e: f64) -> f64 {
    e / HARTREE_TO_CM
}

#[inline]
pub fn hartree_to_cm(e: f64) -> f64 {
    e * HARTREE_TO_CM
}

#[inline]
pub fn angstrom_to_bohr(r: f64) -> f64 {
    r / BOHR_TO_ANGSTROM
}

#[inline]
pub fn bohr_to_angstrom(r: f64) -> f64 {
    r * BOHR_TO_ANGSTROM
}

#[inline]
pub fn amu_to_me(m: f64) -> f64 {
    m * AMU_TO_ME
}

/// Converts a rate in inverse atomic time units to s⁻¹.
#[inline]
pub fn per_au_time_to_per_s(rate: f64) -> f64 {
    rate / AU_TIME_S
}

/// Length unit accepted by curve files and configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    Angstrom,
    Bohr,
}

impl LengthUnit {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag.to_ascii_lowercase().as_str() {
            "angstrom" | "a" | "å" | "ang" => Some(Self::Angstrom),
            "bohr" | "au" | "a0" => Some(Self::Bohr),
            _ => None,
        }
    }

    pub fn to_bohr(self, r: f64) -> f64 {
        match self {
            Self::Angstrom => angstrom_to_bohr(r),
            Self::Bohr => r,
        }
    }

    pub fn from_bohr(self, r: f64) -> f64 {
        match self {
            Self::Angstrom => bohr_to_angstrom(r),
            Self::Bohr => r,
        }
    }
}

/// Unit of the tabulated value column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueUnit {
    /// cm⁻¹ (energies)
    Wavenumber,
    /// hartree or e·a₀, i.e. already atomic
    Atomic,
    /// debye (dipoles)
    Debye,
}

impl ValueUnit {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag.to_ascii_lowercase().as_str() {
            "cm-1" | "cm^-1" | "cm⁻¹" | "wavenumber" => Some(Self::Wavenumber),
            "au" | "hartree" | "ea0" => Some(Self::Atomic),
            "debye" | "d" => Some(Self::Debye),
            _ => None,
        }
    }

    pub fn to_atomic(self, x: f64) -> f64 {
        match self {
            Self::Wavenumber => cm_to_hartree(x),
            Self::Atomic => x,
            Self::Debye => x * DEBYE_TO_AU,
        }
    }

    pub fn from_atomic(self, x: f64) -> f64 {
        match self {
            Self::Wavenumber => hartree_to_cm(x),
            Self::Atomic => x,
            Self::Debye => x / DEBYE_TO_AU,
        }
    }
}

/// A pair of (length, value) units, written `"<R-unit> <value-unit>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurveUnits {
    pub length: LengthUnit,
    pub value: ValueUnit,
}

impl CurveUnits {
    pub const SPECTROSCOPIC: Self = Self {
        length: LengthUnit::Angstrom,
        value: ValueUnit::Wavenumber,
    };
    pub const ATOMIC: Self = Self {
        length: LengthUnit::Bohr,
        value: ValueUnit::Atomic,
    };

    /// Parses `"angstrom cm-1"`, `"bohr hartree"`, or the shorthand `"au"`.
    pub fn parse(spec: &str) -> Option<Self> {
        let mut parts = spec.split_whitespace();
        let first = parts.next()?;
        match parts.next() {
            None if first.eq_ignore_ascii_case("au") => Some(Self::ATOMIC),
            None => None,
            Some(second) if parts.next().is_none() => Some(Self {
                length: LengthUnit::parse(first)?,
                value: ValueUnit::parse(second)?,
            }),
            Some(_) => None,
        }
    }
}
