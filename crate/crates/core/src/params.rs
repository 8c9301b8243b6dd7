//! Physical and dimensionless parameter sets, and the regime checks that the
//! linearized, rotating-wave models rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Default laser wavelength (Nd:YAG), m.
pub const DEFAULT_WAVELENGTH: f64 = 1064e-9;

/// SI description of a Fabry–Pérot optomechanical cavity and its drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSetup {
    /// Cavity length, m.
    pub cavity_length: f64,
    /// Effective mirror mass, kg.
    pub mirror_mass: f64,
    /// Mechanical angular frequency Ω, rad/s.
    pub mech_freq: f64,
    /// Mechanical quality factor Q = Ω/Γ.
    pub quality_factor: f64,
    /// Cavity finesse.
    pub finesse: f64,
    /// Laser wavelength, m.
    #[serde(default = "default_wavelength")]
    pub laser_wavelength: f64,
    /// Drive power, W.
    pub drive_power: f64,
    /// Cavity–laser detuning Δ₀ = ω_c − ω_l, rad/s (any sign).
    pub detuning: f64,
    /// Bath temperature, K.
    pub bath_temperature: f64,
}

fn default_wavelength() -> f64 {
    DEFAULT_WAVELENGTH
}

impl PhysicalSetup {
    /// The 1 mm, 50 ng, 2π·10 MHz, Q = 10⁶ mirror used throughout the
    /// examples, with finesse 5·10⁴, 3 mW blue-detuned drive and a 0.1 K bath.
    pub fn reference() -> Self {
        let mech_freq = 2.0 * std::f64::consts::PI * 10e6;
        Self {
            cavity_length: 1e-3,
            mirror_mass: 50e-12,
            mech_freq,
            quality_factor: 1e6,
            finesse: 5e4,
            laser_wavelength: DEFAULT_WAVELENGTH,
            drive_power: 3e-3,
            detuning: -mech_freq,
            bath_temperature: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cavity_length", self.cavity_length),
            ("mirror_mass", self.mirror_mass),
            ("mech_freq", self.mech_freq),
            ("quality_factor", self.quality_factor),
            ("finesse", self.finesse),
            ("laser_wavelength", self.laser_wavelength),
            ("drive_power", self.drive_power),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::domain(name, value, "must be strictly positive"));
            }
        }
        if !(self.bath_temperature >= 0.0 && self.bath_temperature.is_finite()) {
            return Err(Error::domain(
                "bath_temperature",
                self.bath_temperature,
                "must be non-negative",
            ));
        }
        if !self.detuning.is_finite() {
            return Err(Error::domain("detuning", self.detuning, "must be finite"));
        }
        Ok(())
    }

    /// Cavity amplitude decay rate κ = πc/(L·F), rad/s.
    pub fn kappa(&self) -> f64 {
        std::f64::consts::PI * C_LIGHT / (self.cavity_length * self.finesse)
    }

    /// Mechanical damping rate Γ = Ω/Q, rad/s.
    pub fn gamma(&self) -> f64 {
        self.mech_freq / self.quality_factor
    }

    /// Zero-point amplitude √(ħ/(mΩ)), m.
    pub fn x_zpf(&self) -> f64 {
        (HBAR / (self.mirror_mass * self.mech_freq)).sqrt()
    }

    /// Laser angular frequency, rad/s.
    pub fn laser_freq(&self) -> f64 {
        2.0 * std::f64::consts::PI * C_LIGHT / self.laser_wavelength
    }

    /// Single-photon coupling g₀ = ω_c·x_zpf/L, rad/s.
    pub fn g0(&self) -> f64 {
        (self.laser_freq() + self.detuning) * self.x_zpf() / self.cavity_length
    }

    /// Bath occupation at the mechanical frequency.
    pub fn nbar(&self) -> f64 {
        bose_occupation(self.bath_temperature, self.mech_freq)
    }
}

/// Bose–Einstein occupation `1/(exp(ħΩ/k_B T) − 1)`; zero at `T = 0`.
pub fn bose_occupation(temperature: f64, mech_freq: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * mech_freq / (K_B * temperature)).exp_m1()
}

/// Which detuning enters the coupling and the dimensionless set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningMode {
    /// Blue-detuned drive, Δ = −Ω.
    Stokes,
    /// Red-detuned drive, Δ = +Ω.
    Antistokes,
    /// Use the setup's Δ₀ as given.
    Custom,
}

/// Every downstream physics operation consumes this set. Rates are in units of
/// Ω; occupations are plain numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    pub kappa: f64,
    pub g: f64,
    pub gamma: f64,
    pub delta: f64,
    pub nbar: f64,
    pub n0: f64,
}

impl DimensionlessParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("kappa", self.kappa),
            ("g", self.g),
            ("gamma", self.gamma),
            ("nbar", self.nbar),
            ("n0", self.n0),
        ];
        for (name, value) in nonneg {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::domain(
                    name,
                    value,
                    "must be non-negative and finite",
                ));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::domain("delta", self.delta, "must be finite"));
        }
        Ok(())
    }

    pub fn with_n0(mut self, n0: f64) -> Self {
        self.n0 = n0;
        self
    }

    pub fn with_nbar(mut self, nbar: f64) -> Self {
        self.nbar = nbar;
        self
    }
}

/// Converts an SI setup into dimensionless rates.
///
/// The enhanced coupling is `g = g₀·√(4κ/(Δ²+κ²) · P/(ħω_l))` with Δ chosen by
/// `mode`. The initial mechanical occupation defaults to the bath occupation;
/// use [`DimensionlessParams::with_n0`] for a precooled oscillator.
pub fn derive_dimensionless(
    setup: &PhysicalSetup,
    mode: DetuningMode,
) -> Result<DimensionlessParams> {
    setup.validate()?;
    let omega = setup.mech_freq;
    let delta = match mode {
        DetuningMode::Stokes => -omega,
        DetuningMode::Antistokes => omega,
        DetuningMode::Custom => setup.detuning,
    };
    let kappa = setup.kappa();
    let photon_flux = setup.drive_power / (HBAR * setup.laser_freq());
    let g = setup.g0() * (4.0 * kappa / (delta * delta + kappa * kappa) * photon_flux).sqrt();
    let nbar = setup.nbar();
    Ok(DimensionlessParams {
        kappa: kappa / omega,
        g: g / omega,
        gamma: setup.gamma() / omega,
        delta: delta / omega,
        nbar,
        n0: nbar,
    })
}

/// Clicks-on-light detector: efficiency η and dark-count probability d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub eta: f64,
    #[serde(default)]
    pub dark: f64,
}

impl DetectorModel {
    pub fn new(eta: f64, dark: f64) -> Result<Self> {
        let det = Self { eta, dark };
        det.validate()?;
        Ok(det)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::domain("eta", self.eta, "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.dark) {
            return Err(Error::domain("dark", self.dark, "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Pulsed,
    Cw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HierarchyStatus {
    Satisfied,
    Marginal,
    Violated,
}

/// A flag together with the number it was decided from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub protocol: Protocol,
    /// κ/Ω.
    pub sideband_resolved: Check,
    /// g/κ (infinite when κ = 0 and g > 0).
    pub weak_coupling: Check,
    pub hierarchy: HierarchyStatus,
    /// Ωτ, which must exceed 1.
    pub rwa_lower: Check,
    /// (Ω/g)², which Ωτ must stay below; infinite for g = 0.
    pub rwa_upper: f64,
    pub inside_rwa_window: bool,
    /// τ·n̄·Γ, which must be small for thermal decoherence to be negligible.
    pub thermal_decoherence: f64,
    pub thermal_decoherence_ok: bool,
}

/// Margin below which a "≪" relation counts as satisfied.
pub const STRONG_INEQUALITY: f64 = 0.1;
/// g/κ band accepted as "κ ≃ g".
pub const COMPARABLE_BAND: (f64, f64) = (1.0 / 3.0, 3.0);

impl RegimeReport {
    /// True when the approximations behind `protocol` are not violated. The
    /// rotating-wave window only constrains the pulsed protocol; the
    /// continuous-drive model keeps counter-rotating terms.
    pub fn is_valid(&self) -> bool {
        let window = match self.protocol {
            Protocol::Pulsed => self.inside_rwa_window,
            Protocol::Cw => true,
        };
        window && self.hierarchy != HierarchyStatus::Violated
    }
}

/// Reports where a parameter point sits relative to the regime hierarchy of
/// `protocol` and the rotating-wave window `1 ≪ Ωτ ≪ (Ω/g)²`.
pub fn check_regime(
    p: &DimensionlessParams,
    protocol: Protocol,
    duration: f64,
) -> Result<RegimeReport> {
    p.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::domain("duration", duration, "must be positive"));
    }
    let kappa_ratio = p.kappa;
    let g_ratio = if p.g == 0.0 {
        0.0
    } else if p.kappa == 0.0 {
        f64::INFINITY
    } else {
        p.g / p.kappa
    };

    let (sideband_ok, weak_ok, hierarchy) = match protocol {
        Protocol::Pulsed => {
            let s_ok = kappa_ratio <= STRONG_INEQUALITY;
            let w_ok = g_ratio <= STRONG_INEQUALITY;
            let status = if kappa_ratio >= 1.0 || g_ratio >= 1.0 {
                HierarchyStatus::Violated
            } else if s_ok && w_ok {
                HierarchyStatus::Satisfied
            } else {
                HierarchyStatus::Marginal
            };
            (s_ok, w_ok, status)
        }
        Protocol::Cw => {
            let s_ok = kappa_ratio < 1.0;
            let w_ok = p.g == 0.0 || (COMPARABLE_BAND.0..=COMPARABLE_BAND.1).contains(&g_ratio);
            let status = if !s_ok {
                HierarchyStatus::Violated
            } else if kappa_ratio <= 0.5 && w_ok {
                HierarchyStatus::Satisfied
            } else {
                HierarchyStatus::Marginal
            };
            (s_ok, w_ok, status)
        }
    };

    let rwa_upper = if p.g == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (p.g * p.g)
    };
    let thermal = duration * p.nbar * p.gamma;
    Ok(RegimeReport {
        protocol,
        sideband_resolved: Check {
            ok: sideband_ok,
            margin: kappa_ratio,
        },
        weak_coupling: Check {
            ok: weak_ok,
            margin: g_ratio,
        },
        hierarchy,
        rwa_lower: Check {
            ok: duration > 1.0,
            margin: duration,
        },
        rwa_upper,
        inside_rwa_window: duration > 1.0 && duration < rwa_upper,
        thermal_decoherence: thermal,
        thermal_decoherence_ok: thermal < STRONG_INEQUALITY,
    })
}
