//! Deterministic system model for a two-layer UAV edge-computing fleet.
//!
//! Lower-layer UAVs either compute their collected data locally and send the
//! results to the base station, or forward the raw data to a single
//! compute-rich upper-layer UAV which relays to the base station. This module
//! provides the Shannon-rate link model, transmission delays, per-node
//! computation power, and the aggregate power breakdown, plus the non-robust
//! minimum transmit power at nominal gain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Destination of a lower-layer transmission; selects which path loss applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Destination {
    /// Raw data forwarded to the upper-layer UAV.
    Upper,
    /// Locally computed results sent to the base station.
    BaseStation,
}

/// Parameters of one data-collecting UAV in the lower layer.
///
/// `gain_nominal` is the nominal transceiver gain magnitude; the realized
/// gain is `gain_nominal + e` where the error `e` has mean `gain_err_mean`
/// and variance `gain_err_var` but otherwise unknown distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerUavParams {
    /// Payload produced per task, in bits.
    pub data_len_bits: f64,
    /// Task complexity in CPU cycles.
    pub task_cycles: f64,
    /// Channel bandwidth in Hz.
    pub bandwidth_hz: f64,
    /// Computation power per cycle, in W/cycle.
    pub comp_coeff_w_per_cycle: f64,
    /// Nominal transceiver gain magnitude (dimensionless).
    pub gain_nominal: f64,
    /// Mean of the gain error (dimensionless).
    pub gain_err_mean: f64,
    /// Variance of the gain error (dimensionless).
    pub gain_err_var: f64,
    /// Path loss towards the upper-layer UAV (dimensionless, > 0).
    pub pathloss_to_upper: f64,
    /// Path loss towards the base station (dimensionless, > 0).
    pub pathloss_to_bs: f64,
    /// Transmission delay budget in seconds.
    pub delay_budget_s: f64,
}

impl LowerUavParams {
    /// Path loss for the given destination.
    pub fn pathloss(&self, dest: Destination) -> f64 {
        match dest {
            Destination::Upper => self.pathloss_to_upper,
            Destination::BaseStation => self.pathloss_to_bs,
        }
    }

    /// Mean of the realized gain, `gain_nominal + gain_err_mean`.
    pub fn gain_mean(&self) -> f64 {
        self.gain_nominal + self.gain_err_mean
    }
}

/// Parameters of the single compute-rich UAV in the upper layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpperUavParams {
    /// Channel bandwidth towards the base station, in Hz.
    pub bandwidth_hz: f64,
    /// Computation power per cycle, in W/cycle.
    pub comp_coeff_w_per_cycle: f64,
    /// Nominal transceiver gain magnitude (dimensionless).
    pub gain_nominal: f64,
    /// Mean of the gain error (dimensionless).
    pub gain_err_mean: f64,
    /// Variance of the gain error (dimensionless).
    pub gain_err_var: f64,
    /// Path loss towards the base station (dimensionless, > 0).
    pub pathloss_to_bs: f64,
    /// Relay transmission delay budget in seconds.
    pub delay_budget_s: f64,
}

impl UpperUavParams {
    /// Mean of the realized gain, `gain_nominal + gain_err_mean`.
    pub fn gain_mean(&self) -> f64 {
        self.gain_nominal + self.gain_err_mean
    }
}

/// A full problem instance: fleet parameters, noise, offload budget, and the
/// per-layer delay satisfaction targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Lower-layer fleet, in index order.
    pub lower: Vec<LowerUavParams>,
    /// The single upper-layer UAV.
    pub upper: UpperUavParams,
    /// Maximum number of UAVs the upper layer can serve simultaneously.
    pub max_offload: usize,
    /// White-noise variance at the receivers, in W.
    pub noise_var_w: f64,
    /// Minimum probability of meeting each lower-layer delay budget.
    pub alpha_lower: f64,
    /// Minimum probability of meeting the relay delay budget.
    pub alpha_upper: f64,
}

impl ScenarioConfig {
    /// Number of lower-layer UAVs.
    pub fn n_lower(&self) -> usize {
        self.lower.len()
    }

    /// Check every structural invariant, naming the offending field and bound.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, field: &str, bound: &str, got: f64) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Scenario(format!(
                    "field {field} must be {bound} (got {got})"
                )))
            }
        }
        for (i, u) in self.lower.iter().enumerate() {
            let f = |name: &str| format!("lower[{i}].{name}");
            check(
                u.data_len_bits >= 0.0 && u.data_len_bits.is_finite(),
                &f("data_len_bits"),
                ">= 0 and finite",
                u.data_len_bits,
            )?;
            check(
                u.task_cycles >= 0.0 && u.task_cycles.is_finite(),
                &f("task_cycles"),
                ">= 0 and finite",
                u.task_cycles,
            )?;
            check(
                u.bandwidth_hz > 0.0 && u.bandwidth_hz.is_finite(),
                &f("bandwidth_hz"),
                "> 0",
                u.bandwidth_hz,
            )?;
            check(
                u.comp_coeff_w_per_cycle >= 0.0 && u.comp_coeff_w_per_cycle.is_finite(),
                &f("comp_coeff_w_per_cycle"),
                ">= 0",
                u.comp_coeff_w_per_cycle,
            )?;
            check(
                u.gain_err_var >= 0.0 && u.gain_err_var.is_finite(),
                &f("gain_err_var"),
                ">= 0",
                u.gain_err_var,
            )?;
            check(
                u.pathloss_to_upper > 0.0 && u.pathloss_to_upper.is_finite(),
                &f("pathloss_to_upper"),
                "> 0",
                u.pathloss_to_upper,
            )?;
            check(
                u.pathloss_to_bs > 0.0 && u.pathloss_to_bs.is_finite(),
                &f("pathloss_to_bs"),
                "> 0",
                u.pathloss_to_bs,
            )?;
            check(
                u.delay_budget_s > 0.0 && u.delay_budget_s.is_finite(),
                &f("delay_budget_s"),
                "> 0",
                u.delay_budget_s,
            )?;
            check(u.gain_nominal.is_finite(), &f("gain_nominal"), "finite", u.gain_nominal)?;
            check(u.gain_err_mean.is_finite(), &f("gain_err_mean"), "finite", u.gain_err_mean)?;
        }
        let h = &self.upper;
        check(h.bandwidth_hz > 0.0 && h.bandwidth_hz.is_finite(), "upper.bandwidth_hz", "> 0", h.bandwidth_hz)?;
        check(
            h.comp_coeff_w_per_cycle >= 0.0 && h.comp_coeff_w_per_cycle.is_finite(),
            "upper.comp_coeff_w_per_cycle",
            ">= 0",
            h.comp_coeff_w_per_cycle,
        )?;
        check(h.gain_err_var >= 0.0 && h.gain_err_var.is_finite(), "upper.gain_err_var", ">= 0", h.gain_err_var)?;
        check(h.pathloss_to_bs > 0.0 && h.pathloss_to_bs.is_finite(), "upper.pathloss_to_bs", "> 0", h.pathloss_to_bs)?;
        check(h.delay_budget_s > 0.0 && h.delay_budget_s.is_finite(), "upper.delay_budget_s", "> 0", h.delay_budget_s)?;
        check(h.gain_nominal.is_finite(), "upper.gain_nominal", "finite", h.gain_nominal)?;
        check(h.gain_err_mean.is_finite(), "upper.gain_err_mean", "finite", h.gain_err_mean)?;
        check(
            self.noise_var_w > 0.0 && self.noise_var_w.is_finite(),
            "noise_var_w",
            "> 0",
            self.noise_var_w,
        )?;
        check(
            self.alpha_lower > 0.0 && self.alpha_lower < 1.0,
            "alpha_lower",
            "in (0, 1)",
            self.alpha_lower,
        )?;
        check(
            self.alpha_upper > 0.0 && self.alpha_upper < 1.0,
            "alpha_upper",
            "in (0, 1)",
            self.alpha_upper,
        )?;
        check(
            self.max_offload <= self.lower.len(),
            "max_offload",
            "<= number of lower-layer UAVs",
            self.max_offload as f64,
        )?;
        Ok(())
    }
}

/// Binary access decisions: `true` means the UAV offloads raw data to the
/// upper layer, `false` means it computes locally and reports to the base
/// station.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccessVector(pub Vec<bool>);

impl AccessVector {
    /// All-local pattern of the given length.
    pub fn all_local(n: usize) -> Self {
        AccessVector(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of offloading UAVs.
    pub fn offload_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Destination implied for UAV `i`.
    pub fn destination(&self, i: usize) -> Destination {
        if self.0[i] {
            Destination::Upper
        } else {
            Destination::BaseStation
        }
    }

    /// Check length and the offload budget against the scenario.
    pub fn validate_for(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.len() != cfg.n_lower() {
            return Err(Error::Shape(format!(
                "access vector has {} entries, scenario has {} lower UAVs",
                self.len(),
                cfg.n_lower()
            )));
        }
        if self.offload_count() > cfg.max_offload {
            return Err(Error::Domain(format!(
                "{} UAVs offload but max_offload is {}",
                self.offload_count(),
                cfg.max_offload
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for AccessVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.0 {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Transmit powers for every lower-layer UAV and the upper-layer relay.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Per-UAV transmit power in W, in fleet order.
    pub p_lower_w: Vec<f64>,
    /// Relay transmit power in W.
    pub p_upper_w: f64,
}

impl PowerAllocation {
    pub fn zeros(n: usize) -> Self {
        PowerAllocation {
            p_lower_w: vec![0.0; n],
            p_upper_w: 0.0,
        }
    }
}

/// Breakdown of the total system power into transmit and compute components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    /// Sum of lower-layer transmit powers, W.
    pub tx_lower_w: f64,
    /// Relay transmit power, W.
    pub tx_upper_w: f64,
    /// Computation power of locally-computing lower UAVs, W.
    pub comp_lower_w: f64,
    /// Computation power spent on offloaded tasks in the upper layer, W.
    pub comp_upper_w: f64,
    /// Sum of the four components, W.
    pub total_w: f64,
}

fn require_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite (got {v})")))
    }
}

/// Shannon transmission rate `B * log2(1 + pathloss * p * g^2 / noise)` in bit/s.
///
/// Strictly increasing in `power_w` and `gain_abs` when both are positive.
pub fn transmission_rate(
    bandwidth_hz: f64,
    pathloss: f64,
    power_w: f64,
    gain_abs: f64,
    noise_var_w: f64,
) -> Result<f64> {
    require_finite("bandwidth_hz", bandwidth_hz)?;
    require_finite("pathloss", pathloss)?;
    require_finite("power_w", power_w)?;
    require_finite("gain_abs", gain_abs)?;
    require_finite("noise_var_w", noise_var_w)?;
    if bandwidth_hz <= 0.0 {
        return Err(Error::Domain(format!("bandwidth_hz must be > 0 (got {bandwidth_hz})")));
    }
    if pathloss <= 0.0 {
        return Err(Error::Domain(format!("pathloss must be > 0 (got {pathloss})")));
    }
    if power_w < 0.0 {
        return Err(Error::Domain(format!("power_w must be >= 0 (got {power_w})")));
    }
    if gain_abs < 0.0 {
        return Err(Error::Domain(format!("gain_abs must be >= 0 (got {gain_abs})")));
    }
    if noise_var_w <= 0.0 {
        return Err(Error::Domain(format!("noise_var_w must be > 0 (got {noise_var_w})")));
    }
    let snr = pathloss * power_w * gain_abs * gain_abs / noise_var_w;
    Ok(bandwidth_hz * (1.0 + snr).log2())
}

/// Transmission delay of one lower-layer UAV towards `dest`, in seconds.
///
/// Zero payload is delivered in zero time regardless of rate, so idle nodes
/// are feasible at zero power.
pub fn transmission_delay_lower(
    params: &LowerUavParams,
    power_w: f64,
    gain_abs: f64,
    dest: Destination,
    noise_var_w: f64,
) -> Result<f64> {
    if params.data_len_bits == 0.0 {
        return Ok(0.0);
    }
    let rate = transmission_rate(
        params.bandwidth_hz,
        params.pathloss(dest),
        power_w,
        gain_abs,
        noise_var_w,
    )?;
    if rate <= 0.0 {
        return Err(Error::InfeasibleDelay {
            payload_bits: params.data_len_bits,
        });
    }
    Ok(params.data_len_bits / rate)
}

/// Sum of the payloads forwarded to the upper layer, in bits.
pub fn offloaded_bits(cfg: &ScenarioConfig, x: &AccessVector) -> f64 {
    cfg.lower
        .iter()
        .zip(&x.0)
        .filter(|(_, &xi)| xi)
        .map(|(u, _)| u.data_len_bits)
        .sum()
}

/// Relay transmission delay of the upper-layer UAV, in seconds.
pub fn transmission_delay_upper(
    cfg: &ScenarioConfig,
    x: &AccessVector,
    p_upper_w: f64,
    gain_abs: f64,
) -> Result<f64> {
    x.validate_for(cfg)?;
    let payload = offloaded_bits(cfg, x);
    if payload == 0.0 {
        return Ok(0.0);
    }
    let rate = transmission_rate(
        cfg.upper.bandwidth_hz,
        cfg.upper.pathloss_to_bs,
        p_upper_w,
        gain_abs,
        cfg.noise_var_w,
    )?;
    if rate <= 0.0 {
        return Err(Error::InfeasibleDelay { payload_bits: payload });
    }
    Ok(payload / rate)
}

/// Aggregate the total power of a decision into its four components.
///
/// Locally-computing UAVs pay their own computation power; offloaded task
/// cycles are paid at the upper layer's rate.
pub fn total_power(
    cfg: &ScenarioConfig,
    x: &AccessVector,
    p: &PowerAllocation,
) -> Result<PowerBreakdown> {
    if x.len() != cfg.n_lower() || p.p_lower_w.len() != cfg.n_lower() {
        return Err(Error::Shape(format!(
            "lengths disagree: scenario {}, access {}, powers {}",
            cfg.n_lower(),
            x.len(),
            p.p_lower_w.len()
        )));
    }
    let tx_lower_w: f64 = p.p_lower_w.iter().sum();
    let tx_upper_w = p.p_upper_w;
    let mut comp_lower_w = 0.0;
    let mut offloaded_cycles = 0.0;
    for (u, &xi) in cfg.lower.iter().zip(&x.0) {
        if xi {
            offloaded_cycles += u.task_cycles;
        } else {
            comp_lower_w += u.comp_coeff_w_per_cycle * u.task_cycles;
        }
    }
    let comp_upper_w = cfg.upper.comp_coeff_w_per_cycle * offloaded_cycles;
    Ok(PowerBreakdown {
        tx_lower_w,
        tx_upper_w,
        comp_lower_w,
        comp_upper_w,
        total_w: tx_lower_w + tx_upper_w + comp_lower_w + comp_upper_w,
    })
}

/// Smallest transmit power meeting the delay budget at the exact Shannon rate
/// and a fixed (nominal) gain:
/// `p = noise * (2^(L / (B * t_max)) - 1) / (pathloss * g^2)`.
///
/// This is the non-robust baseline allocator; it ignores gain uncertainty.
pub fn nominal_min_power(
    bandwidth_hz: f64,
    pathloss: f64,
    gain_abs: f64,
    noise_var_w: f64,
    data_len_bits: f64,
    delay_budget_s: f64,
) -> Result<f64> {
    if data_len_bits == 0.0 {
        return Ok(0.0);
    }
    for (name, v, lo_open) in [
        ("bandwidth_hz", bandwidth_hz, true),
        ("pathloss", pathloss, true),
        ("gain_abs", gain_abs, true),
        ("noise_var_w", noise_var_w, true),
        ("data_len_bits", data_len_bits, false),
        ("delay_budget_s", delay_budget_s, true),
    ] {
        require_finite(name, v)?;
        if (lo_open && v <= 0.0) || v < 0.0 {
            return Err(Error::Domain(format!("{name} must be positive (got {v})")));
        }
    }
    let spectral_load = data_len_bits / (bandwidth_hz * delay_budget_s);
    let snr_required = spectral_load.exp2() - 1.0;
    Ok(noise_var_w * snr_required / (pathloss * gain_abs * gain_abs))
}
