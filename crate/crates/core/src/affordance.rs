//! Task affordance functions for beating, cutting and picking, and the
//! viability predicate used to label learning data.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::metrics::MetricVector;

/// Stand-in for `+∞` when a beat grasp needs no hand effort at all.
pub const SCORE_CAP: f64 = 1e18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Task {
    Beat,
    Cut,
    Pick,
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "beat" => Ok(Task::Beat),
            "cut" => Ok(Task::Cut),
            "pick" => Ok(Task::Pick),
            other => Err(format!(
                "unknown task {other:?} (expected beat, cut or pick)"
            )),
        }
    }
}

/// Named threshold modes for the robustness gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Default,
    NoRobustness,
    ExtraRobustness,
}

impl Preset {
    pub fn tau_eps(self) -> f64 {
        match self {
            Preset::Default => 0.3,
            Preset::NoRobustness => f64::NEG_INFINITY,
            Preset::ExtraRobustness => 0.5,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "default" => Ok(Preset::Default),
            "no_robustness" => Ok(Preset::NoRobustness),
            "extra_robustness" => Ok(Preset::ExtraRobustness),
            other => Err(format!(
                "unknown preset {other:?} (expected default, no_robustness or extra_robustness)"
            )),
        }
    }
}

/// Gate thresholds for the affordance functions and the viability filter.
///
/// In JSON a `preset` fills in `tau_eps`; any explicit key overrides it.
/// Non-finite thresholds are written as the strings `"-inf"` / `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffordanceConfig {
    pub preset: Preset,
    pub tau_eps: f64,
    pub tau_ug: f64,
    pub tau_delta: f64,
    pub viab_eps: f64,
    pub viab_eh_sum: f64,
    pub viab_ei: f64,
}

impl Default for AffordanceConfig {
    fn default() -> Self {
        AffordanceConfig::preset(Preset::Default)
    }
}

impl AffordanceConfig {
    pub fn preset(preset: Preset) -> Self {
        AffordanceConfig {
            preset,
            tau_eps: preset.tau_eps(),
            tau_ug: 10.0,
            tau_delta: 0.95,
            viab_eps: 0.15,
            viab_eh_sum: 250.0,
            viab_ei: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("tau_eps", self.tau_eps),
            ("tau_ug", self.tau_ug),
            ("tau_delta", self.tau_delta),
            ("viab_eps", self.viab_eps),
            ("viab_eh_sum", self.viab_eh_sum),
            ("viab_ei", self.viab_ei),
        ] {
            if v.is_nan() || v == f64::INFINITY {
                return Err(format!("{name} must be finite or -inf, got {v}"));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RawAffordance {
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<Preset>,
    #[serde(with = "opt_ext", skip_serializing_if = "Option::is_none")]
    tau_eps: Option<f64>,
    #[serde(with = "opt_ext", skip_serializing_if = "Option::is_none")]
    tau_ug: Option<f64>,
    #[serde(with = "opt_ext", skip_serializing_if = "Option::is_none")]
    tau_delta: Option<f64>,
    #[serde(with = "opt_ext", skip_serializing_if = "Option::is_none")]
    viab_eps: Option<f64>,
    #[serde(with = "opt_ext", skip_serializing_if = "Option::is_none")]
    viab_eh_sum: Option<f64>,
    #[serde(with = "opt_ext", skip_serializing_if = "Option::is_none")]
    viab_ei: Option<f64>,
}

impl Serialize for AffordanceConfig {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawAffordance {
            preset: Some(self.preset),
            tau_eps: Some(self.tau_eps),
            tau_ug: Some(self.tau_ug),
            tau_delta: Some(self.tau_delta),
            viab_eps: Some(self.viab_eps),
            viab_eh_sum: Some(self.viab_eh_sum),
            viab_ei: Some(self.viab_ei),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AffordanceConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawAffordance::deserialize(d)?;
        let mut c = AffordanceConfig::preset(raw.preset.unwrap_or_default());
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut c.tau_eps, raw.tau_eps);
        set(&mut c.tau_ug, raw.tau_ug);
        set(&mut c.tau_delta, raw.tau_delta);
        set(&mut c.viab_eps, raw.viab_eps);
        set(&mut c.viab_eh_sum, raw.viab_eh_sum);
        set(&mut c.viab_ei, raw.viab_ei);
        c.validate().map_err(serde::de::Error::custom)?;
        Ok(c)
    }
}

/// Reals that may be infinite: numbers, or the strings `"inf"`, `"-inf"`.
pub mod ext_float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                other => other.parse().map_err(|_| {
                    de::Error::custom(format!(
                        "expected a number or \"inf\"/\"-inf\", got {other:?}"
                    ))
                }),
            },
        }
    }
}

mod opt_ext {
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::ext_float::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        super::ext_float::deserialize(d).map(Some)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TaskScore {
    pub task: Task,
    #[serde(with = "ext_float")]
    pub score: f64,
}

impl TaskScore {
    pub fn is_gated(&self) -> bool {
        self.score == f64::NEG_INFINITY
    }
}

/// Energy the wrist swing can put into the use point per unit hand effort.
pub fn f_beat(phi: &MetricVector, cfg: &AffordanceConfig) -> TaskScore {
    let score = if phi.eps < cfg.tau_eps
        || phi.discharge < cfg.tau_delta
        || phi.effort_hold_sum() == f64::INFINITY
    {
        f64::NEG_INFINITY
    } else if phi.effort_impact == 0.0 {
        SCORE_CAP
    } else if phi.effort_impact == f64::INFINITY {
        0.0
    } else {
        (phi.inertia / phi.effort_impact).min(SCORE_CAP)
    };
    TaskScore {
        task: Task::Beat,
        score,
    }
}

/// Force deliverable at a sharp use point.
pub fn f_cut(phi: &MetricVector, cfg: &AffordanceConfig) -> TaskScore {
    let score = if phi.eps < cfg.tau_eps || phi.use_geometry < cfg.tau_ug {
        f64::NEG_INFINITY
    } else {
        phi.use_force
    };
    TaskScore {
        task: Task::Cut,
        score,
    }
}

/// Negated total holding effort; any unholdable direction gates the grasp.
pub fn f_pick(phi: &MetricVector) -> TaskScore {
    let sum = phi.effort_hold_sum();
    let score = if sum == f64::INFINITY {
        f64::NEG_INFINITY
    } else {
        -sum
    };
    TaskScore {
        task: Task::Pick,
        score,
    }
}

pub fn score(task: Task, phi: &MetricVector, cfg: &AffordanceConfig) -> TaskScore {
    match task {
        Task::Beat => f_beat(phi, cfg),
        Task::Cut => f_cut(phi, cfg),
        Task::Pick => f_pick(phi),
    }
}

pub fn is_viable(phi: &MetricVector, cfg: &AffordanceConfig) -> bool {
    phi.eps > cfg.viab_eps
        && phi.effort_hold_sum() < cfg.viab_eh_sum
        && phi.effort_impact < cfg.viab_ei
}
