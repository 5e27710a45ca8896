//! Named experiment suites and their parameter presets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::experiments::*;
use super::report::ExperimentReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Uniformity,
    FgcEquivalence,
    Expansion,
    Concentration,
    Scaling,
    Contraction,
    Diameter,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Uniformity,
        Suite::FgcEquivalence,
        Suite::Expansion,
        Suite::Concentration,
        Suite::Scaling,
        Suite::Contraction,
        Suite::Diameter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Uniformity => "uniformity",
            Suite::FgcEquivalence => "fgc-equivalence",
            Suite::Expansion => "expansion",
            Suite::Concentration => "concentration",
            Suite::Scaling => "scaling",
            Suite::Contraction => "contraction",
            Suite::Diameter => "diameter",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite `{s}`")))
    }
}

/// Parameter preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Full-size acceptance parameters.
    #[default]
    Desk,
    /// Small and fast, for quick checks.
    Smoke,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "smoke" => Ok(Profile::Smoke),
            other => Err(Error::InvalidParameter(format!("unknown profile `{other}`"))),
        }
    }
}

/// Optional overrides of the preset values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub q: Option<f64>,
    pub psi: Option<f64>,
    pub epsilon: Option<f64>,
    pub t: Option<usize>,
    pub t_values: Option<Vec<usize>>,
}

impl Overrides {
    /// Fields set in `other` win.
    pub fn merged(self, other: Overrides) -> Overrides {
        Overrides {
            trials: other.trials.or(self.trials),
            n: other.n.or(self.n),
            n_list: other.n_list.or(self.n_list),
            q: other.q.or(self.q),
            psi: other.psi.or(self.psi),
            epsilon: other.epsilon.or(self.epsilon),
            t: other.t.or(self.t),
            t_values: other.t_values.or(self.t_values),
        }
    }
}

fn pick<T: Copy>(profile: Profile, desk: T, smoke: T) -> T {
    match profile {
        Profile::Desk => desk,
        Profile::Smoke => smoke,
    }
}

/// Runs one suite (or every suite) and returns its reports.
pub fn run_suite(suite: Suite, profile: Profile, seed: u64, o: &Overrides) -> Result<Vec<ExperimentReport>> {
    let trials = |desk: usize, smoke: usize| o.trials.unwrap_or(pick(profile, desk, smoke));
    let n = |desk: usize, smoke: usize| o.n.unwrap_or(pick(profile, desk, smoke));
    let q = o.q.unwrap_or(0.5);
    match suite {
        Suite::All => {
            let mut out = Vec::new();
            for s in Suite::EACH {
                out.extend(run_suite(s, profile, seed, o)?);
            }
            Ok(out)
        }
        Suite::Uniformity => {
            let n = n(5, 4);
            let t = trials(24_000, 6_000);
            // enough mixed operations to churn well past the target size
            let ops = (n - 2) + 12;
            Ok(vec![
                layer_uniformity_test(n, 2, t, ChurnScript::PureJoins, seed)?,
                layer_uniformity_test(n, 2, t, ChurnScript::Mixed { ops }, seed)?,
                layer_independence_test(4, trials(24_000, 6_000), seed)?,
            ])
        }
        Suite::FgcEquivalence => Ok(vec![fgc_equivalence_test(n(6, 5), q, trials(100_000, 10_000), seed)?]),
        Suite::Expansion => {
            let n = n(1000, 200);
            Ok(vec![expansion_mean_test(n, q, o.t.unwrap_or(n / 2), trials(10_000, 1_000), seed)?])
        }
        Suite::Concentration => {
            let n = n(1000, 200);
            let ts = o.t_values.clone().unwrap_or_else(|| vec![n / 4, n / 2]);
            Ok(vec![concentration_test(n, q, o.psi.unwrap_or(0.1), &ts, trials(10_000, 1_000), seed)?])
        }
        Suite::Scaling => {
            let list = o.n_list.clone().unwrap_or_else(|| match profile {
                Profile::Desk => vec![256, 512, 1024, 2048, 4096, 8192],
                Profile::Smoke => vec![64, 128, 256, 512],
            });
            let t = trials(200, 50);
            let qs = match o.q {
                Some(q) => vec![q],
                None => vec![1.0, 0.5, 0.0],
            };
            qs.into_iter().map(|q| depth_scaling_experiment(&list, q, t, seed)).collect()
        }
        Suite::Contraction => Ok(vec![contraction_test(n(2048, 512), q, o.epsilon.unwrap_or(0.1), trials(10_000, 1_000), seed)?]),
        Suite::Diameter => Ok(vec![diameter_symmetry_test(n(64, 32), q, trials(10_000, 2_000), seed)?]),
    }
}
