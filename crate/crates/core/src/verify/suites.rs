//! Groupings of the individual checks, and the dimension × seed sweep.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::sampling::{random_params, rng, unit_vector};
use super::{
    audit_trajectory, check_boundary_flow, check_jump_cover, check_lemma1, check_lemma3, check_lemma4,
    check_operator_identities, AuditConfig, PropertyReport,
};
use crate::controller::{ControlLaw, Mode};
use crate::geometry::VecN;
use crate::params::{validate, ParamError};
use crate::sim::{batch_simulate, SimConfig, TerminalReason};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemmas,
    Boundary,
    Trajectory,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Lemmas, Suite::Boundary, Suite::Trajectory];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Lemmas => "lemmas",
            Suite::Boundary => "boundary",
            Suite::Trajectory => "trajectory",
        })
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.to_string() == s)
            .ok_or_else(|| format!("unknown suite {s:?}"))
    }
}

fn failed_report(name: &str, dim: usize, seed: u64, why: String) -> PropertyReport {
    let mut r = PropertyReport::new(name, dim, Some(seed));
    r.record(&VecN::zeros(dim), f64::NEG_INFINITY, || why);
    r
}

/// Operator identities, cone disjointness of the two avoidance cones,
/// axis equilibria, the axis/flow-set exclusion and the jump cover.
pub fn lemma_reports(law: &ControlLaw, samples: usize, seed: u64) -> Vec<PropertyReport> {
    let p = law.params();
    let n = law.dim();
    let lemma1 = check_lemma1(
        p.center(),
        law.axis(Mode::AvoidPlus),
        law.axis(Mode::AvoidMinus),
        p.psi_bar(),
        p.psi_bar(),
        samples,
        seed.wrapping_add(1),
    )
    .unwrap_or_else(|e| failed_report("lemma1_cone_disjointness", n, seed, e.to_string()));
    vec![
        check_operator_identities(n, samples, seed),
        lemma1,
        check_lemma3(law, samples, seed.wrapping_add(2)),
        check_lemma4(law, samples, seed.wrapping_add(3)),
        check_jump_cover(law, samples, seed.wrapping_add(4)),
    ]
}

pub fn boundary_reports(law: &ControlLaw, samples: usize, seed: u64) -> Vec<PropertyReport> {
    vec![check_boundary_flow(law, samples, seed.wrapping_add(5))]
}

/// `count` seeded starts at distance `radius` from the origin, each at
/// least `ε_h` clear of the obstacle.
pub fn ring_starts(law: &ControlLaw, count: usize, radius: f64, seed: u64) -> Vec<(VecN, Mode)> {
    let mut rng = rng(seed);
    let c = law.params().center();
    let clear = 1.01 * law.params().eps_h();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = unit_vector(&mut rng, law.dim()).scale(radius);
        if x.dist(c) >= clear {
            out.push((x, Mode::Stabilize));
        }
    }
    out
}

/// Simulates every start and folds the per-run audits into one report per
/// property, plus a convergence report.
pub fn trajectory_reports(
    law: &ControlLaw,
    inits: &[(VecN, Mode)],
    sim: &SimConfig,
    audit: &AuditConfig,
    parallel: bool,
) -> Vec<PropertyReport> {
    let n = law.dim();
    let names = ["safety", "jump_bound", "jump_spacing", "lyapunov_decrease", "lyapunov_rate", "radius_drift"];
    let mut folded: Vec<PropertyReport> = names.iter().map(|s| PropertyReport::new(*s, n, None)).collect();
    let mut convergence = PropertyReport::new("convergence", n, None);
    let mut errors = PropertyReport::new("simulation_errors", n, None);
    for (i, (result, (x0, _))) in batch_simulate(law, inits, sim, parallel).into_iter().zip(inits).enumerate() {
        let traj = match result {
            Ok(t) => t,
            Err(e) => {
                errors.record(x0, f64::NEG_INFINITY, || format!("run {i}: {e}"));
                continue;
            }
        };
        errors.record(x0, 1.0, String::new);
        let reached = traj.terminal_reason() == Some(TerminalReason::GoalReached);
        convergence.record(x0, if reached { 1.0 } else { -1.0 }, || {
            format!("run {i}: ended with {:?}", traj.terminal_reason())
        });
        match audit_trajectory(&traj, law, audit) {
            Ok(a) => {
                for (dst, src) in folded.iter_mut().zip(a.reports()) {
                    dst.absorb(src.clone());
                }
            }
            Err(e) => errors.record(x0, f64::NEG_INFINITY, || format!("run {i}: {e}")),
        }
    }
    folded.push(convergence);
    folded.push(errors);
    folded
}

/// A random feasible scene in `ℝⁿ`, reproducible from `(n, seed)`.
pub fn random_law(n: usize, seed: u64) -> Result<ControlLaw, ParamError> {
    let mut rng = rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(n as u64));
    Ok(ControlLaw::new(validate(random_params(&mut rng, n))?))
}

/// Runs `suites` on a random scene for every `(n, seed)` pair, in parallel.
/// Reports come back in grid order.
pub fn dimension_sweep(dims: &[usize], seeds: &[u64], suites: &[Suite], samples: usize) -> Vec<PropertyReport> {
    let grid: Vec<(usize, u64)> = dims.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    grid.par_iter()
        .map(|&(n, seed)| {
            let law = match random_law(n, seed) {
                Ok(l) => l,
                Err(e) => return vec![failed_report("random_scene", n, seed, e.to_string())],
            };
            let mut out = Vec::new();
            for s in suites {
                match s {
                    Suite::Lemmas => out.extend(lemma_reports(&law, samples, seed)),
                    Suite::Boundary => out.extend(boundary_reports(&law, samples, seed)),
                    Suite::Trajectory => {
                        let starts = ring_starts(&law, 8, 2.0 * (law.params().center().norm() + law.params().eps_h()), seed);
                        let mut reports =
                            trajectory_reports(&law, &starts, &SimConfig::default(), &AuditConfig::default(), false);
                        for r in &mut reports {
                            r.seed = Some(seed);
                        }
                        out.extend(reports);
                    }
                }
            }
            out
        })
        .flatten()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{RawParams, ValidatedParams};

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn small_sweep_passes_and_is_ordered() {
        let reports = dimension_sweep(&[2, 4], &[1, 2], &[Suite::Lemmas, Suite::Boundary], 300);
        assert_eq!(reports.len(), 2 * 2 * 6);
        assert!(reports.iter().all(|r| r.passed), "{:?}", reports.iter().find(|r| !r.passed));
        assert_eq!(reports[0].dim, 2);
        assert_eq!(reports[reports.len() - 1].dim, 4);
        let again = dimension_sweep(&[2, 4], &[1, 2], &[Suite::Lemmas, Suite::Boundary], 300);
        assert_eq!(reports, again);
    }

    #[test]
    fn tampered_cones_fail_lemma1() {
        let mut raw = RawParams::reference_3d();
        raw.psi_bar = 0.4;
        let law = ControlLaw::new(ValidatedParams::new_unchecked(raw).unwrap());
        let reports = lemma_reports(&law, 200, 0);
        assert!(!reports[1].passed);
    }

    #[test]
    fn ring_starts_are_clear() {
        let law = ControlLaw::new(validate(RawParams::reference_3d()).unwrap());
        let starts = ring_starts(&law, 20, 4.0, 3);
        assert_eq!(starts.len(), 20);
        for (x, _) in starts {
            assert!((x.norm() - 4.0).abs() < 1e-12);
        }
    }
}
