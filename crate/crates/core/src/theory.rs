//! Monte Carlo checks of the selection criteria against their consistency
//! statements, using mixture sources whose Bayes posterior is known exactly.
//!
//! Draw `i` of a check uses the source's stream `i` for `(x, y)`, a stream
//! derived from the generation seed for `S`, and a stream derived from the
//! classifier seed for corruption, so every verdict is a deterministic
//! function of the inputs. Per-draw outcomes are computed in parallel and
//! summed in index order.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidate::CandidateSet;
use crate::datagen::{ambiguity_degree, factorizes, GenerationKind, GenerationModel, GaussianMixture};
use crate::error::{PllError, Result};
use crate::nn::argmax;
use crate::rng;

/// Absolute allowance added to every three-sigma tolerance.
pub const TOLERANCE_FLOOR: f64 = 0.005;

/// A classifier built from the source posterior, without training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleClassifier {
    Bayes,
    /// With probability `rate`, the Bayes argmax swaps places with a
    /// uniformly drawn wrong label. Draws at a lower rate are corrupted at
    /// every higher rate with the same seed.
    Corrupted { rate: f64, seed: u64 },
    /// One-hot on a fixed class.
    Constant { class: usize },
}

impl OracleClassifier {
    pub fn corrupted(rate: f64, seed: u64) -> Self {
        OracleClassifier::Corrupted { rate, seed }
    }

    /// Output for input `x`, which is draw `i` of the sample.
    pub fn predict_proba(&self, source: &GaussianMixture, x: &[f64], i: u64) -> Vec<f64> {
        match self {
            OracleClassifier::Bayes => source.posterior(x),
            OracleClassifier::Corrupted { rate, seed } => {
                let mut p = source.posterior(x);
                let mut r = rng::stream(rng::derive_seed(*seed, &[0xC0]), i);
                let u: f64 = r.random();
                if u < *rate && p.len() > 1 {
                    let top = argmax(&p);
                    let mut wrong = r.random_range(0..p.len() - 1);
                    if wrong >= top {
                        wrong += 1;
                    }
                    p.swap(top, wrong);
                }
                p
            }
            OracleClassifier::Constant { class } => {
                let mut p = vec![0.0; source.num_classes()];
                p[*class] = 1.0;
                p
            }
        }
    }

    fn validate(&self, q: usize) -> Result<()> {
        match self {
            OracleClassifier::Corrupted { rate, .. } if !(0.0..=1.0).contains(rate) => {
                Err(PllError::InvalidGeneration(format!("corruption rate {rate} outside [0, 1]")))
            }
            OracleClassifier::Constant { class } if *class >= q => Err(PllError::LabelOutOfRange {
                index: 0,
                label: *class,
                q,
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Outcome {
    correct: f64,
    covered: f64,
    aa: f64,
}

fn candidates_for(gen: &GenerationModel, y: usize, q: usize, i: u64) -> CandidateSet {
    let mut r = rng::stream(rng::derive_seed(gen.seed, &[0x5E7]), i);
    gen.sample(y, q, &mut r)
}

fn simulate(source: &GaussianMixture, gen: &GenerationModel, clf: &OracleClassifier, n: usize) -> Result<Vec<Outcome>> {
    source.validate()?;
    let q = source.num_classes();
    gen.validate(Some(q))?;
    clf.validate(q)?;
    if n == 0 {
        return Err(PllError::Empty("Monte Carlo sample"));
    }
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = source.draw(i);
            let s = candidates_for(gen, y, q, i);
            let p = clf.predict_proba(source, &x, i);
            let pred = argmax(&p);
            let mass: f64 = s.iter().map(|j| p[j]).sum();
            let covered = s.contains(pred);
            let aa = if covered && mass >= 1e-12 { p[pred] / mass } else { 0.0 };
            Outcome {
                correct: f64::from(u8::from(pred == y)),
                covered: f64::from(u8::from(covered)),
                aa,
            }
        })
        .collect())
}

/// Sample mean and standard error of `f` over the outcomes, summed in order.
fn mean_se(outcomes: &[Outcome], f: impl Fn(&Outcome) -> f64) -> (f64, f64) {
    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(&f).sum::<f64>() / n;
    let var = outcomes.iter().map(|o| (f(o) - mean).powi(2)).sum::<f64>() / n;
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AaReport {
    pub n: usize,
    pub aa: f64,
    pub acc: f64,
    /// Binomial standard error of the accuracy estimate.
    pub sigma: f64,
    pub tolerance: f64,
    /// Whether the generation process satisfies `p(S|x,y) = C(x,S)·I(y∈S)`.
    pub hypothesis_holds: bool,
    pub pass: bool,
    /// Set when the check failed but the generation process breaks the
    /// factorization, so no agreement was promised.
    pub hypothesis_violated: bool,
}

/// Compares approximated accuracy with true accuracy on `n` fresh draws.
/// Passes iff `|AA - ACC| ≤ 3·sqrt(ACC(1-ACC)/n) + 0.005`.
pub fn validate_thm_aa(source: &GaussianMixture, gen: &GenerationModel, clf: &OracleClassifier, n: usize) -> Result<AaReport> {
    let out = simulate(source, gen, clf, n)?;
    let (aa, _) = mean_se(&out, |o| o.aa);
    let (acc, _) = mean_se(&out, |o| o.correct);
    let sigma = (acc * (1.0 - acc) / n as f64).sqrt();
    let tolerance = 3.0 * sigma + TOLERANCE_FLOOR;
    let pass = (aa - acc).abs() <= tolerance;
    let hypothesis_holds = factorizes(gen, source.num_classes());
    Ok(AaReport {
        n,
        aa,
        acc,
        sigma,
        tolerance,
        hypothesis_holds,
        pass,
        hypothesis_violated: !pass && !hypothesis_holds,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrClassifierReport {
    pub classifier: OracleClassifier,
    pub cr: f64,
    pub acc: f64,
    /// `(CR - c) / (1 - c)`.
    pub predicted_acc: f64,
    /// Standard error of `ACC - predicted_acc` on the shared sample.
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrPairReport {
    pub first: usize,
    pub second: usize,
    pub cr_diff: f64,
    pub acc_diff: f64,
    pub sigma: f64,
    /// `|cr_diff| > 3·sigma`; unseparated pairs are skipped.
    pub separated: bool,
    pub consistent: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrReport {
    pub n: usize,
    /// Probability that a given wrong label is a candidate.
    pub c: f64,
    pub classifiers: Vec<CrClassifierReport>,
    pub pairs: Vec<CrPairReport>,
    pub ranking_pass: bool,
    pub affine_pass: bool,
    pub pass: bool,
}

fn constant_inclusion(gen: &GenerationModel, q: usize) -> Result<f64> {
    match gen.kind {
        GenerationKind::Uss { .. } | GenerationKind::FpsConstant { .. } => Ok(ambiguity_degree(gen, q)),
        GenerationKind::FpsMatrix { .. } => Err(PllError::InvalidGeneration(
            "covering-rate consistency needs USS or constant FPS".into(),
        )),
    }
}

/// Checks that covering rate ranks classifiers like accuracy does and that
/// `ACC ≈ (CR - c)/(1 - c)` for each classifier, all on one shared sample.
pub fn validate_thm_cr(
    source: &GaussianMixture,
    gen: &GenerationModel,
    classifiers: &[OracleClassifier],
    n: usize,
) -> Result<CrReport> {
    let q = source.num_classes();
    let c = constant_inclusion(gen, q)?;
    if classifiers.len() < 2 {
        return Err(PllError::InvalidState("ranking needs at least two classifiers".into()));
    }
    let runs: Vec<Vec<Outcome>> = classifiers
        .iter()
        .map(|clf| simulate(source, gen, clf, n))
        .collect::<Result<_>>()?;
    let mut reports = Vec::new();
    for (clf, out) in classifiers.iter().zip(&runs) {
        let (cr, _) = mean_se(out, |o| o.covered);
        let (acc, _) = mean_se(out, |o| o.correct);
        let (_, sigma) = mean_se(out, |o| o.correct - (o.covered - c) / (1.0 - c));
        let predicted_acc = (cr - c) / (1.0 - c);
        reports.push(CrClassifierReport {
            classifier: clf.clone(),
            cr,
            acc,
            predicted_acc,
            sigma,
            pass: (acc - predicted_acc).abs() <= 3.0 * sigma + TOLERANCE_FLOOR,
        });
    }
    let mut pairs = Vec::new();
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            let paired: Vec<Outcome> = runs[a]
                .iter()
                .zip(&runs[b])
                .map(|(x, y)| Outcome {
                    correct: x.correct - y.correct,
                    covered: x.covered - y.covered,
                    aa: 0.0,
                })
                .collect();
            let (cr_diff, sigma) = mean_se(&paired, |o| o.covered);
            let (acc_diff, _) = mean_se(&paired, |o| o.correct);
            let separated = cr_diff.abs() > 3.0 * sigma;
            pairs.push(CrPairReport {
                first: a,
                second: b,
                cr_diff,
                acc_diff,
                sigma,
                separated,
                consistent: separated.then(|| cr_diff.signum() == acc_diff.signum()),
            });
        }
    }
    let ranking_pass = pairs.iter().all(|p| p.consistent != Some(false));
    let affine_pass = reports.iter().all(|r| r.pass);
    Ok(CrReport {
        n,
        c,
        classifiers: reports,
        pairs,
        ranking_pass,
        affine_pass,
        pass: ranking_pass && affine_pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub n: usize,
    pub gamma: f64,
    pub cr: f64,
    pub oa: f64,
    /// `CR - OA`.
    pub gap: f64,
    /// `(1 - OA)·γ`.
    pub bound: f64,
    /// Standard error of `gap - bound`.
    pub sigma: f64,
    pub pass: bool,
}

/// Checks `CR - OA ≤ (1 - OA)·γ + 3σ` on one sample.
pub fn validate_prop1(source: &GaussianMixture, gen: &GenerationModel, clf: &OracleClassifier, n: usize) -> Result<Prop1Report> {
    let gamma = ambiguity_degree(gen, source.num_classes());
    let out = simulate(source, gen, clf, n)?;
    Ok(prop1_from(&out, gamma))
}

fn prop1_from(out: &[Outcome], gamma: f64) -> Prop1Report {
    let (cr, _) = mean_se(out, |o| o.covered);
    let (oa, _) = mean_se(out, |o| o.correct);
    let (_, sigma) = mean_se(out, |o| o.covered - o.correct - gamma * (1.0 - o.correct));
    let gap = cr - oa;
    let bound = (1.0 - oa) * gamma;
    Prop1Report {
        n: out.len(),
        gamma,
        cr,
        oa,
        gap,
        bound,
        sigma,
        pass: gap <= bound + 3.0 * sigma + 1e-12,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackReport {
    pub rates: Vec<f64>,
    /// `bound - gap` per corruption rate.
    pub slack: Vec<f64>,
    pub pass: bool,
}

/// Gap-bound slack for corrupted oracles at increasing `rates` (same seed,
/// same sample); passes iff the slack is non-decreasing in the rate.
pub fn slack_monotonicity(
    source: &GaussianMixture,
    gen: &GenerationModel,
    rates: &[f64],
    seed: u64,
    n: usize,
) -> Result<SlackReport> {
    let mut rates = rates.to_vec();
    rates.sort_by(f64::total_cmp);
    let slack: Vec<f64> = rates
        .iter()
        .map(|&r| validate_prop1(source, gen, &OracleClassifier::corrupted(r, seed), n).map(|p| p.bound - p.gap))
        .collect::<Result<_>>()?;
    let pass = slack.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    Ok(SlackReport { rates, slack, pass })
}

/// Which group of checks to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoryCheck {
    Prop1,
    ThmCr,
    ThmAa,
}

impl std::str::FromStr for TheoryCheck {
    type Err = PllError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "prop1" => Ok(TheoryCheck::Prop1),
            "thm-cr" => Ok(TheoryCheck::ThmCr),
            "thm-aa" => Ok(TheoryCheck::ThmAa),
            _ => Err(PllError::Unknown {
                kind: "theory check",
                value: s.into(),
            }),
        }
    }
}

/// One entry of the suite report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub details: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoryReport {
    pub n: usize,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

/// The default suite: a 3-class planar mixture with USS and constant FPS
/// (c = 0.5) candidates, and corrupted oracles at rates 0, 0.2 and 0.4.
pub fn run_suite(which: Option<TheoryCheck>, n: usize, seed: u64) -> Result<TheoryReport> {
    let source = GaussianMixture::on_circle(3, 2, 1.5, 1.0, rng::derive_seed(seed, &[1]));
    let uss = GenerationModel::uss(rng::derive_seed(seed, &[2]));
    let fps = GenerationModel::fps(0.5, rng::derive_seed(seed, &[3]));
    let clf_seed = rng::derive_seed(seed, &[4]);
    let rates = [0.0, 0.2, 0.4];
    let oracles: Vec<OracleClassifier> = rates.iter().map(|&r| OracleClassifier::corrupted(r, clf_seed)).collect();
    let wants = |c: TheoryCheck| which.is_none_or(|w| w == c);
    let mut checks = Vec::new();
    let mut push = |name: String, pass: bool, details: serde_json::Value| {
        checks.push(CheckResult { name, pass, details });
    };
    if wants(TheoryCheck::ThmAa) {
        for (label, gen) in [("uss", &uss), ("fps-0.5", &fps)] {
            let r = validate_thm_aa(&source, gen, &OracleClassifier::Bayes, n)?;
            push(format!("thm-aa/{label}/bayes"), r.pass, serde_json::to_value(&r)?);
        }
    }
    if wants(TheoryCheck::ThmCr) {
        for (label, gen) in [("uss", &uss), ("fps-0.5", &fps)] {
            let r = validate_thm_cr(&source, gen, &oracles, n)?;
            push(format!("thm-cr/{label}"), r.pass, serde_json::to_value(&r)?);
        }
    }
    if wants(TheoryCheck::Prop1) {
        for (label, gen) in [("uss", &uss), ("fps-0.5", &fps)] {
            for clf in &oracles {
                let r = validate_prop1(&source, gen, clf, n)?;
                let rate = match clf {
                    OracleClassifier::Corrupted { rate, .. } => *rate,
                    _ => 0.0,
                };
                push(format!("prop1/{label}/rate-{rate}"), r.pass, serde_json::to_value(&r)?);
            }
        }
        let skewed = GenerationModel::fps_matrix(
            vec![vec![0.0, 0.2, 0.8], vec![0.8, 0.0, 0.2], vec![0.2, 0.8, 0.0]],
            rng::derive_seed(seed, &[5]),
        );
        let r = slack_monotonicity(&source, &skewed, &rates, clf_seed, n)?;
        push("prop1/slack-monotone".to_string(), r.pass, serde_json::to_value(&r)?);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(TheoryReport { n, checks, pass })
}
