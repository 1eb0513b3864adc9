//! Tunable parameters, addressed by their conventional symbol names.
//!
//! Defaults suit a tracked ground robot of 0.47 m bounding radius driving at
//! 0.2 m/s. Values the method leaves open are fixed here, per field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    /// Maximum linear speed, m/s.
    pub v_max: f64,
    /// Robot bounding-sphere radius, m.
    pub r_b: f64,
    /// Safety distance, m. Two robot centres closer than this interfere.
    pub d_s: f64,
    /// Future trail crop radius, m.
    pub r_c: f64,
    /// Radius within which teammate trails are considered, m.
    pub r_t: f64,
    /// Wait between failed initial planning attempts, s.
    pub t_wait: f64,
    /// Path-planning failure duration that becomes critical, s.
    pub t_pcr: f64,
    /// Node-conflict duration that becomes critical, s.
    pub t_ncr: f64,
    /// Patrolling loop sleep, s.
    pub t_sleep: f64,
    /// Patrolling main loop rate, Hz. Informational in simulation.
    pub f_patrol: f64,
    /// Idleness broadcast period, s.
    pub t_idln: f64,
    /// Minimum spacing of repeated goal announcements, s. 0 announces every
    /// tick; keep it below `t_exp` or teammates expire the entry.
    pub t_sel: f64,
    /// Team model expiration time, s.
    pub t_exp: f64,
    /// Maximum number of initial planning attempts.
    pub l_max: u32,
    /// Node visit radius, m.
    pub r_v: f64,
    /// Default node priority weight.
    pub w: f64,
    /// Maximum edge length for the waypoint graph builder, m.
    pub d_max: f64,
    /// Maximum edge elevation angle for the waypoint graph builder, rad.
    pub alpha_max: f64,
    /// Maximum robot step (cap of the expansion safety radius), m.
    pub max_step: f64,
    /// Weight of the elevation change in the step cost.
    pub lambda_z: f64,
    /// Weight of the normalised traversability factor.
    pub lambda_t: f64,
    /// Division guard of the normalised traversability factor.
    pub epsilon: f64,
    /// Local planner horizon, m.
    pub r_l: f64,
    /// Consecutive critical replans before the random escape uses the full graph.
    pub d_full: u32,
    /// Neighbourhood radius for density and roughness, m.
    pub eps: f64,
    /// Clearance threshold for the traversable map, m. `None` means `d_s / 2`.
    pub exclusion: Option<f64>,
    /// Children sampled per A* expansion.
    pub children: usize,
    /// Node-expansion budget factor (budget = factor * sqrt(map size)).
    pub budget_factor: f64,
    /// Range at which teammates are sensed as obstacles, m.
    pub sense_range: f64,
    /// Deadlock detection window, s.
    pub deadlock_window: f64,
    /// Deadlock displacement threshold, m.
    pub eps_d: f64,
    /// Moving window width for idleness statistics, s.
    pub delta: f64,
    /// Interference check rate, Hz.
    pub interference_hz: f64,
    /// Metrics record rate, Hz.
    pub record_hz: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            v_max: 0.2,
            r_b: 0.47,
            d_s: 1.2,
            r_c: 1.5,
            r_t: 1.5,
            t_wait: 0.5,
            t_pcr: 5.0,
            t_ncr: 5.0,
            t_sleep: 0.1,
            f_patrol: 30.0,
            t_idln: 5.0,
            t_sel: 0.0,
            t_exp: 10.0,
            l_max: 5,
            r_v: 0.5,
            w: 1.0,
            d_max: 5.0,
            alpha_max: 30f64.to_radians(),
            max_step: 0.5,
            lambda_z: 2.0,
            lambda_t: 1.0,
            epsilon: 1e-6,
            r_l: 2.0,
            d_full: 4,
            eps: 0.3,
            exclusion: None,
            children: 5,
            budget_factor: 50.0,
            sense_range: 4.0,
            deadlock_window: 60.0,
            eps_d: 0.05,
            delta: 600.0,
            interference_hz: 2.0,
            record_hz: 0.2,
        }
    }
}

/// Symbol names accepted by [`Params::set`].
pub const SYMBOLS: &[&str] = &[
    "v_max",
    "R_b",
    "D_s",
    "R_c",
    "R_t",
    "T_wait",
    "T_pcr",
    "T_ncr",
    "T_sleep",
    "f_patrol",
    "T_idln",
    "T_sel",
    "T_exp",
    "l_max",
    "R_v",
    "w",
    "d_max",
    "alpha_max",
    "max_step",
    "lambda_z",
    "lambda_t",
    "epsilon",
    "R_l",
    "d_full",
    "eps",
    "exclusion",
    "children",
    "budget_factor",
    "sense_range",
    "deadlock_window",
    "eps_d",
    "Delta",
    "interference_hz",
    "record_hz",
];

impl Params {
    pub fn exclusion(&self) -> f64 {
        self.exclusion.unwrap_or(self.d_s / 2.0)
    }

    /// Set a parameter by symbol name. Angles are given in degrees.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: name.into(),
                reason: "value must be finite".into(),
            });
        }
        let count = |v: f64| -> Result<u32> {
            if v < 0.0 || v.fract() != 0.0 {
                Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: "expected a non-negative integer".into(),
                })
            } else {
                Ok(v as u32)
            }
        };
        let mut next = self.clone();
        match name {
            "v_max" => next.v_max = value,
            "R_b" => next.r_b = value,
            "D_s" => next.d_s = value,
            "R_c" => next.r_c = value,
            "R_t" => next.r_t = value,
            "T_wait" => next.t_wait = value,
            "T_pcr" => next.t_pcr = value,
            "T_ncr" => next.t_ncr = value,
            "T_sleep" => next.t_sleep = value,
            "f_patrol" => next.f_patrol = value,
            "T_idln" => next.t_idln = value,
            "T_sel" => next.t_sel = value,
            "T_exp" => next.t_exp = value,
            "l_max" => next.l_max = count(value)?,
            "R_v" => next.r_v = value,
            "w" => next.w = value,
            "d_max" => next.d_max = value,
            "alpha_max" => next.alpha_max = value.to_radians(),
            "max_step" => next.max_step = value,
            "lambda_z" => next.lambda_z = value,
            "lambda_t" => next.lambda_t = value,
            "epsilon" => next.epsilon = value,
            "R_l" => next.r_l = value,
            "d_full" => next.d_full = count(value)?,
            "eps" => next.eps = value,
            "exclusion" => next.exclusion = Some(value),
            "children" => next.children = count(value)? as usize,
            "budget_factor" => next.budget_factor = value,
            "sense_range" => next.sense_range = value,
            "deadlock_window" => next.deadlock_window = value,
            "eps_d" => next.eps_d = value,
            "Delta" => next.delta = value,
            "interference_hz" => next.interference_hz = value,
            "record_hz" => next.record_hz = value,
            _ => return Err(Error::UnknownParameter(name.into())),
        }
        next.validate()?;
        *self = next;
        Ok(())
    }

    /// Value of a parameter by symbol name, in the units [`Params::set`] takes.
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "v_max" => self.v_max,
            "R_b" => self.r_b,
            "D_s" => self.d_s,
            "R_c" => self.r_c,
            "R_t" => self.r_t,
            "T_wait" => self.t_wait,
            "T_pcr" => self.t_pcr,
            "T_ncr" => self.t_ncr,
            "T_sleep" => self.t_sleep,
            "f_patrol" => self.f_patrol,
            "T_idln" => self.t_idln,
            "T_sel" => self.t_sel,
            "T_exp" => self.t_exp,
            "l_max" => self.l_max as f64,
            "R_v" => self.r_v,
            "w" => self.w,
            "d_max" => self.d_max,
            // Rounded so that a value set in degrees reads back unchanged.
            "alpha_max" => (self.alpha_max.to_degrees() * 1e9).round() / 1e9,
            "max_step" => self.max_step,
            "lambda_z" => self.lambda_z,
            "lambda_t" => self.lambda_t,
            "epsilon" => self.epsilon,
            "R_l" => self.r_l,
            "d_full" => self.d_full as f64,
            "eps" => self.eps,
            "exclusion" => return self.exclusion,
            "children" => self.children as f64,
            "budget_factor" => self.budget_factor,
            "sense_range" => self.sense_range,
            "deadlock_window" => self.deadlock_window,
            "eps_d" => self.eps_d,
            "Delta" => self.delta,
            "interference_hz" => self.interference_hz,
            "record_hz" => self.record_hz,
            _ => return None,
        })
    }

    /// Parse and apply a `KEY=VAL` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::InvalidParameter {
            name: kv.into(),
            reason: "expected KEY=VAL".into(),
        })?;
        let value: f64 = v.trim().parse().map_err(|_| Error::InvalidParameter {
            name: k.into(),
            reason: format!("`{v}` is not a number"),
        })?;
        self.set(k.trim(), value)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_max", self.v_max),
            ("R_b", self.r_b),
            ("D_s", self.d_s),
            ("R_c", self.r_c),
            ("R_t", self.r_t),
            ("R_v", self.r_v),
            ("w", self.w),
            ("d_max", self.d_max),
            ("max_step", self.max_step),
            ("epsilon", self.epsilon),
            ("R_l", self.r_l),
            ("eps", self.eps),
            ("T_exp", self.t_exp),
            ("T_idln", self.t_idln),
            ("deadlock_window", self.deadlock_window),
            ("Delta", self.delta),
            ("interference_hz", self.interference_hz),
            ("record_hz", self.record_hz),
        ];
        for (name, v) in positive {
            if v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: "must be > 0".into(),
                });
            }
        }
        if self.r_t < self.r_c {
            return Err(Error::InvalidParameter {
                name: "R_t".into(),
                reason: format!("must be >= R_c ({})", self.r_c),
            });
        }
        if self.d_s < 2.0 * self.r_b {
            return Err(Error::InvalidParameter {
                name: "D_s".into(),
                reason: format!("must be >= 2 R_b ({})", 2.0 * self.r_b),
            });
        }
        if self.t_sel < 0.0 || self.t_sel >= self.t_exp {
            return Err(Error::InvalidParameter {
                name: "T_sel".into(),
                reason: format!("must be in [0, T_exp = {})", self.t_exp),
            });
        }
        if self.l_max == 0 || self.d_full == 0 || self.children == 0 {
            return Err(Error::InvalidParameter {
                name: "l_max/d_full/children".into(),
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        Params::default().validate().unwrap();
        assert_eq!(Params::default().exclusion(), 0.6);
    }

    #[test]
    fn every_symbol_is_settable() {
        for s in SYMBOLS {
            let mut p = Params::default();
            let value = match *s {
                "R_t" => 3.0,
                "R_c" => 1.0,
                "R_b" => 0.5,
                "D_s" => 2.0,
                "alpha_max" => 25.0,
                _ => 7.0,
            };
            p.set(s, value).unwrap_or_else(|e| panic!("{s}: {e}"));
        }
    }

    #[test]
    fn overrides() {
        let mut p = Params::default();
        p.apply_override("D_s=1.5").unwrap();
        assert_eq!(p.d_s, 1.5);
        assert!(matches!(
            p.apply_override("nope=1"),
            Err(Error::UnknownParameter(_))
        ));
        assert!(p.apply_override("D_s").is_err());
        assert!(p.apply_override("R_t=1.0").is_err());
        p.apply_override("alpha_max=25").unwrap();
        assert_eq!(p.get("alpha_max"), Some(25.0));
    }
}
