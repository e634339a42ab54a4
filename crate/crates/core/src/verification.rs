//! The exact identity battery: operator identities on seeded random
//! polynomial forms, the flat example, the Hitchin layer and the expanded
//! equation cross-check.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{d, OperatorTable};
use crate::error::{CoreError, Result};
use crate::exterior::scalar::{format_rational, int, rat, Rational};
use crate::exterior::{standard_structures, Blade, ConstForm, Form, PolyForm, PolyScalar, DIM};
use crate::linalg::{det, RatMatrix};
use crate::mirror_potential::{flat_example_check, CheckLine};
use crate::pde_solvers::eq13_crosscheck;
use crate::stable_forms::{analyze_stable, hitchin_lambda, sample_rng, StabilityVerdict, DEFAULT_SEED};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    StarInvolution,
    DSquared,
    DsSquared,
    Anticommutation,
    Oracle,
    FlatExample,
    Hitchin,
    Eq13,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::StarInvolution,
        Suite::DSquared,
        Suite::DsSquared,
        Suite::Anticommutation,
        Suite::Oracle,
        Suite::FlatExample,
        Suite::Hitchin,
        Suite::Eq13,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::StarInvolution => "star-involution",
            Suite::DSquared => "d-squared",
            Suite::DsSquared => "ds-squared",
            Suite::Anticommutation => "anticommutation",
            Suite::Oracle => "oracle",
            Suite::FlatExample => "flat-example",
            Suite::Hitchin => "hitchin",
            Suite::Eq13 => "eq13",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CoreError::Parse(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub seed: u64,
    pub forms_per_degree: usize,
    pub eq13_samples: usize,
    pub gl_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: DEFAULT_SEED,
            forms_per_degree: 50,
            eq13_samples: 24,
            gl_samples: 20,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("forms_per_degree", self.forms_per_degree, 1, 10_000),
            ("eq13_samples", self.eq13_samples, 2, 10_000),
            ("gl_samples", self.gl_samples, 1, 10_000),
        ];
        for (name, v, lo, hi) in checks {
            if !(lo..=hi).contains(&v) {
                return Err(CoreError::InvalidParameter {
                    name,
                    reason: format!("{v} not in [{lo}, {hi}]"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub lines: Vec<CheckLine>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

/// Seeded polynomial form of the given degree: up to three blades, each with
/// up to three monomials of partial degree at most 2.
pub fn random_poly_form(degree: usize, seed: u64, index: u64) -> PolyForm {
    let mut rng = sample_rng(seed, (degree as u64) << 32 | index);
    let blades: Vec<Blade> = Blade::of_degree(degree).collect();
    let mut out = Form::zero(degree);
    for _ in 0..rng.random_range(1..=3) {
        let mut p = PolyScalar::zero();
        for _ in 0..rng.random_range(1..=3) {
            let e: [u8; DIM] = std::array::from_fn(|_| rng.random_range(0..=2));
            p.add_term(e, rat(rng.random_range(-5..=5), rng.random_range(1..=3)));
        }
        out.add_term(blades[rng.random_range(0..blades.len())], p);
    }
    out
}

/// Seeded invertible matrix `I + G/4`, `G` with entries in `−2..=2`.
pub fn random_gl(seed: u64, index: u64) -> [[Rational; DIM]; DIM] {
    let mut rng = sample_rng(seed ^ 0x9e37_79b9, index);
    loop {
        let g: [[Rational; DIM]; DIM] = std::array::from_fn(|i| {
            std::array::from_fn(|j| rat(rng.random_range(-2..=2), 4) + if i == j { int(1) } else { int(0) })
        });
        if det(&to_rows(&g)) != int(0) {
            return g;
        }
    }
}

fn to_rows(g: &[[Rational; DIM]; DIM]) -> RatMatrix {
    g.iter().map(|r| r.to_vec()).collect()
}

fn zero_equal(a: &PolyForm, b: &PolyForm) -> bool {
    a == b || (a.is_zero() && b.is_zero())
}

fn per_degree(
    cfg: &VerifyConfig,
    degrees: std::ops::RangeInclusive<usize>,
    label: &str,
    check: impl Fn(&PolyForm) -> Option<String>,
) -> Vec<CheckLine> {
    degrees
        .map(|k| {
            let failure = (0..cfg.forms_per_degree as u64).find_map(|i| {
                let a = random_poly_form(k, cfg.seed, i);
                check(&a).map(|diff| format!("form #{i}: {diff}"))
            });
            let detail = failure.clone().unwrap_or_else(|| format!("{} forms", cfg.forms_per_degree));
            CheckLine::new(format!("{label} on degree {k}"), failure.is_none(), detail)
        })
        .collect()
}

fn star_lines() -> Vec<CheckLine> {
    let t = OperatorTable::standard();
    let bad: Vec<String> = Blade::all()
        .filter(|b| {
            let f: ConstForm = Form::term(*b, int(1));
            t.star(&t.star(&f)) != f
        })
        .map(|b| b.to_string())
        .collect();
    vec![CheckLine::new(
        "⋆⋆ = id on basis blades",
        bad.is_empty(),
        if bad.is_empty() { "64 blades".to_string() } else { format!("fails on {}", bad.join(", ")) },
    )]
}

fn oracle_lines(cfg: &VerifyConfig) -> Vec<CheckLine> {
    let t = OperatorTable::standard();
    let signs = match t.calibrate_oracle() {
        Ok(s) => s,
        Err(e) => return vec![CheckLine::new("oracle calibration", false, e.to_string())],
    };
    let eps: Vec<String> = (1..=DIM).map(|k| signs.sign(k).to_string()).collect();
    let mut lines = vec![CheckLine::new("oracle calibration", true, format!("ε_k = [{}]", eps.join(", ")))];
    lines.extend(per_degree(cfg, 1..=DIM, "d^s = ε(Λd − dΛ)", |a| {
        let lhs = t.d_s(a);
        let rhs = signs.apply(t, a);
        (!zero_equal(&lhs, &rhs)).then(|| format!("difference {}", lhs.minus(&rhs)))
    }));
    lines
}

fn hitchin_lines(cfg: &VerifyConfig) -> Result<Vec<CheckLine>> {
    let s = standard_structures();
    let mut lines = Vec::new();
    let a = analyze_stable(&s.rho0)?;
    let dual_ok = a.dual_exact.as_ref() == Some(&s.sigma0);
    lines.push(CheckLine::new(
        "dual(ρ₀) = σ₀",
        dual_ok,
        match &a.dual_exact {
            Some(d) if !dual_ok => format!("dual {d}"),
            None => "no exact dual".into(),
            _ => String::new(),
        },
    ));
    let split = ConstForm::monomial(&[1, 2, 3], int(1))?.plus(&ConstForm::monomial(&[4, 5, 6], int(1))?);
    let l_split = hitchin_lambda(&split)?;
    lines.push(CheckLine::new(
        "λ(dx123 + dx456) > 0",
        l_split > int(0),
        format!("λ = {}", format_rational(&l_split)),
    ));
    let l0 = a.lambda.clone();
    lines.push(CheckLine::new("λ(ρ₀) < 0", l0 < int(0), format!("λ = {}", format_rational(&l0))));
    let l135 = hitchin_lambda(&ConstForm::monomial(&[1, 3, 5], int(1))?)?;
    lines.push(CheckLine::new(
        "λ(dx135) = 0",
        l135 == int(0),
        format!("λ = {}", format_rational(&l135)),
    ));

    let mut worst = 0.0f64;
    let mut all_stable = true;
    let mut equivariant = true;
    for i in 0..cfg.gl_samples as u64 {
        let g = random_gl(cfg.seed, i);
        let n = int(2 + (i % 6) as i64);
        let rho = s.rho0.pullback(&g).scaled(&n).plus(&s.sigma0.pullback(&g));
        let pushed = analyze_stable(&rho)?;
        all_stable &= pushed.verdict == StabilityVerdict::StableNegative;
        worst = worst.max(pushed.j_squared_defect().unwrap_or(f64::INFINITY));
        let dg = det(&to_rows(&g));
        let base = s.rho0.scaled(&n).plus(&s.sigma0);
        equivariant &= pushed.lambda == hitchin_lambda(&base)? * &dg * &dg;
    }
    lines.push(CheckLine::new(
        format!("J² = −I on {} pushed forms", cfg.gl_samples),
        all_stable && worst <= 1e-10,
        format!("max |J² + I| = {worst:.3e}"),
    ));
    lines.push(CheckLine::new("λ(g*ρ) = det(g)²λ(ρ)", equivariant, String::new()));
    Ok(lines)
}

fn eq13_lines(cfg: &VerifyConfig) -> Result<Vec<CheckLine>> {
    let r = eq13_crosscheck(cfg.eq13_samples, cfg.seed)?;
    let detail: Vec<String> = r
        .fits
        .iter()
        .map(|f| {
            let name = serde_json::to_value(f.reading).ok().and_then(|v| v.as_str().map(String::from));
            format!(
                "{}: {} (c1 = {}, c0 = {}, held out {})",
                name.unwrap_or_default(),
                f.status,
                f.c1.as_deref().unwrap_or("-"),
                f.c0.as_deref().unwrap_or("-"),
                f.held_out
            )
        })
        .collect();
    Ok(vec![CheckLine::new(
        "affine relation between expanded and determinant densities",
        r.status == "PASS",
        detail.join("; "),
    )])
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    let t = OperatorTable::standard();
    let lines = match suite {
        Suite::StarInvolution => star_lines(),
        Suite::DSquared => per_degree(cfg, 0..=DIM, "d² = 0", |a| {
            let r = d(&d(a));
            (!r.is_zero()).then(|| format!("d²a = {r}"))
        }),
        Suite::DsSquared => per_degree(cfg, 0..=DIM, "(d^s)² = 0", |a| {
            let r = t.d_s(&t.d_s(a));
            (!r.is_zero()).then(|| format!("(d^s)²a = {r}"))
        }),
        Suite::Anticommutation => per_degree(cfg, 0..=DIM - 1, "dd^s = −d^s d", |a| {
            let lhs = t.dd_s(a);
            let rhs = t.d_s(&d(a)).negated();
            (!zero_equal(&lhs, &rhs)).then(|| format!("difference {}", lhs.minus(&rhs)))
        }),
        Suite::Oracle => oracle_lines(cfg),
        Suite::FlatExample => flat_example_check().lines,
        Suite::Hitchin => hitchin_lines(cfg)?,
        Suite::Eq13 => eq13_lines(cfg)?,
    };
    Ok(SuiteReport {
        suite,
        passed: lines.iter().all(|l| l.pass),
        lines,
    })
}

/// Runs `only`, or every suite when it is empty.
pub fn verification_battery(only: &[Suite], cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let suites: Vec<Suite> = if only.is_empty() { Suite::ALL.to_vec() } else { only.to_vec() };
    let suites = suites.into_iter().map(|s| run_suite(s, cfg)).collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        config: cfg.clone(),
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_forms_are_deterministic_and_sized() {
        for k in 0..=DIM {
            let a = random_poly_form(k, 5, 3);
            assert_eq!(a, random_poly_form(k, 5, 3));
            assert_eq!(a.degree(), k);
        }
        assert_ne!(random_poly_form(3, 5, 3), random_poly_form(3, 5, 4));
    }

    #[test]
    fn identity_suites_pass() {
        let cfg = VerifyConfig {
            forms_per_degree: 10,
            ..VerifyConfig::default()
        };
        for s in [
            Suite::StarInvolution,
            Suite::DSquared,
            Suite::DsSquared,
            Suite::Anticommutation,
            Suite::Oracle,
            Suite::Hitchin,
            Suite::Eq13,
        ] {
            let r = run_suite(s, &cfg).unwrap();
            assert!(r.passed, "{s}: {:?}", r.lines);
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
            assert_eq!(serde_json::to_value(s).unwrap(), s.name());
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn rejects_empty_sample_counts() {
        let cfg = VerifyConfig {
            forms_per_degree: 0,
            ..VerifyConfig::default()
        };
        assert!(verification_battery(&[], &cfg).is_err());
    }
}
