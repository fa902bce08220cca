//! Plant configuration: manifold geometry, orifice coefficients, actuator
//! lags, static engine maps, and the synthetic emissions ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Surrogate airpath parameters. All defaults describe a 6.7 l six-cylinder
/// heavy-duty diesel at desk-scale fidelity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    /// Intake manifold volume (m^3).
    pub v_im: f64,
    /// Exhaust manifold volume (m^3).
    pub v_ex: f64,
    /// Intake manifold temperature (K), isothermal.
    pub t_im: f64,
    /// Exhaust manifold temperature (K), isothermal.
    pub t_ex: f64,
    /// Ambient pressure (kPa).
    pub p_amb: f64,
    /// Engine displacement (m^3).
    pub v_disp: f64,
    /// Volumetric efficiency (-).
    pub eta_vol: f64,
    /// Cylinder count.
    pub n_cyl: f64,
    /// EGR valve effective area at full open (m^2).
    pub egr_area: f64,
    /// Turbine effective area with vanes fully open (m^2).
    pub turb_area: f64,
    /// Fractional turbine-area reduction at 100% closed vanes.
    pub vgt_flow_k: f64,
    /// Orifice-law smoothing width (kPa); keeps the flow derivative bounded
    /// near zero pressure drop.
    pub dp_smooth: f64,
    /// Steady turbo speed per sqrt(kPa) of exhaust backpressure (krpm).
    pub turbo_gain: f64,
    /// Turbo speed ceiling (krpm).
    pub turbo_max: f64,
    /// Turbocharger lag (s).
    pub tau_turbo: f64,
    /// Compressor flow per krpm of turbo speed (kg/h).
    pub comp_gain: f64,
    /// Boost span over which compressor flow derates to the floor (kPa).
    pub comp_dp_span: f64,
    /// Compressor flow derate floor (-).
    pub comp_floor: f64,
    /// Compressor flow lag (s).
    pub tau_flow: f64,
    /// EGR flow lag (s).
    pub tau_egr: f64,
    /// Internal integration step (s).
    pub sample_period: f64,
    /// Outer controller period (s); must be a multiple of `sample_period`.
    pub control_period: f64,
    /// Engine speed envelope (rpm).
    pub n_idle: f64,
    pub n_redline: f64,
    /// Fueling envelope (mg/stroke).
    pub w_inj_max: f64,
    /// Hard state bounds used by the post-step clamp.
    pub p_min: f64,
    pub p_max: f64,
    pub flow_max: f64,
    pub maps: StaticMaps,
    pub emissions: EmissionsMap,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            v_im: 0.045,
            v_ex: 0.045,
            t_im: 310.0,
            t_ex: 750.0,
            p_amb: 101.0,
            v_disp: 0.0067,
            eta_vol: 0.90,
            n_cyl: 6.0,
            egr_area: 3.2e-4,
            turb_area: 9.0e-4,
            vgt_flow_k: 0.72,
            dp_smooth: 5.0,
            turbo_gain: 13.0,
            turbo_max: 180.0,
            tau_turbo: 0.6,
            comp_gain: 5.2,
            comp_dp_span: 300.0,
            comp_floor: 0.05,
            tau_flow: 0.15,
            tau_egr: 0.15,
            sample_period: 0.05,
            control_period: 0.2,
            n_idle: 600.0,
            n_redline: 2600.0,
            w_inj_max: 100.0,
            p_min: 50.5,
            p_max: 400.0,
            flow_max: 1500.0,
            maps: StaticMaps::default(),
            emissions: EmissionsMap::default(),
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_period <= 0.0 || self.sample_period > 0.1 {
            return Err(Error::config("sample period must be in (0, 0.1] s"));
        }
        let ratio = self.control_period / self.sample_period;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::config(
                "control period must be a positive multiple of the sample period",
            ));
        }
        if self.n_idle >= self.n_redline {
            return Err(Error::config("idle speed must be below redline"));
        }
        for (name, v) in [
            ("v_im", self.v_im),
            ("v_ex", self.v_ex),
            ("t_im", self.t_im),
            ("t_ex", self.t_ex),
            ("p_amb", self.p_amb),
            ("v_disp", self.v_disp),
            ("eta_vol", self.eta_vol),
            ("egr_area", self.egr_area),
            ("turb_area", self.turb_area),
            ("turbo_gain", self.turbo_gain),
            ("comp_gain", self.comp_gain),
            ("tau_turbo", self.tau_turbo),
            ("tau_flow", self.tau_flow),
            ("tau_egr", self.tau_egr),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be finite and > 0")));
            }
        }
        Ok(())
    }

    /// Plant substeps per controller tick.
    pub fn substeps_per_control(&self) -> usize {
        (self.control_period / self.sample_period).round() as usize
    }

    /// Fuel mass flow (kg/h) for a fueling rate in mg/stroke.
    pub fn fuel_flow(&self, n_e: f64, w_inj: f64) -> f64 {
        w_inj * self.n_cyl * n_e * (1e-6 * 3600.0 / 120.0)
    }
}

/// Static lookup-style maps for channels the controller does not manipulate:
/// torque, rail pressure, and injection timing as functions of speed/fueling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StaticMaps {
    /// Brake torque per mg/stroke (N*m).
    pub torque_gain: f64,
    /// Friction torque: constant, linear, quadratic speed coefficients.
    pub friction: [f64; 3],
    /// Rail pressure: constant, speed, fueling coefficients (bar).
    pub rail: [f64; 3],
    /// Injection timing: constant, speed, fueling coefficients (deg CA).
    pub timing: [f64; 3],
}

impl Default for StaticMaps {
    fn default() -> Self {
        StaticMaps {
            torque_gain: 9.2,
            friction: [28.0, 0.011, 3.5e-6],
            rail: [750.0, 0.32, 6.5],
            timing: [3.5, 0.0035, 0.06],
        }
    }
}

impl StaticMaps {
    pub fn torque(&self, n_e: f64, w_inj: f64) -> f64 {
        self.torque_gain * w_inj
            - (self.friction[0] + self.friction[1] * n_e + self.friction[2] * n_e * n_e)
    }

    pub fn rail_pressure(&self, n_e: f64, w_inj: f64) -> f64 {
        self.rail[0] + self.rail[1] * n_e + self.rail[2] * w_inj
    }

    pub fn injection_timing(&self, n_e: f64, w_inj: f64) -> f64 {
        self.timing[0] + self.timing[1] * n_e + self.timing[2] * w_inj
    }
}

/// Coefficients of the synthetic emissions ground truth: a smooth map that is
/// decreasing in EGR opening and increasing in fueling for NOx, and rising
/// super-linearly as the air-fuel ratio approaches the smoke limit for Soot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionsMap {
    /// NOx level at the reference point (ppm).
    pub nox_scale: f64,
    /// Exponential NOx decay per unit EGR opening fraction.
    pub nox_egr_k: f64,
    /// Fueling exponent.
    pub nox_fuel_exp: f64,
    /// Speed exponent.
    pub nox_speed_exp: f64,
    /// Air-fuel-ratio exponent (leaner -> hotter -> more NOx).
    pub nox_afr_exp: f64,
    /// Rail-pressure exponent.
    pub nox_rail_exp: f64,
    /// Timing sensitivity per degree about the reference.
    pub nox_timing_k: f64,
    /// Soot logistic ceiling (%).
    pub soot_scale: f64,
    /// AFR at the logistic midpoint.
    pub soot_afr_mid: f64,
    /// Logistic width in AFR units.
    pub soot_afr_width: f64,
    /// Linear Soot increase per unit EGR opening fraction.
    pub soot_egr_k: f64,
    /// Rail-pressure exponent (higher rail -> less soot).
    pub soot_rail_exp: f64,
    /// Fueling saturation constant (mg/stroke).
    pub soot_fuel_sat: f64,
    /// Multiplicative noise sigma used by the seeded dataset generator.
    pub noise_sigma: f64,
}

impl Default for EmissionsMap {
    fn default() -> Self {
        EmissionsMap {
            nox_scale: 1060.0,
            nox_egr_k: 2.0,
            nox_fuel_exp: 1.05,
            nox_speed_exp: 0.35,
            nox_afr_exp: 0.45,
            nox_rail_exp: 0.12,
            nox_timing_k: 0.015,
            soot_scale: 24.0,
            soot_afr_mid: 19.0,
            soot_afr_width: 2.0,
            soot_egr_k: 0.8,
            soot_rail_exp: 0.25,
            soot_fuel_sat: 6.0,
            noise_sigma: 0.03,
        }
    }
}
