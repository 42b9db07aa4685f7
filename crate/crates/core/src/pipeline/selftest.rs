use std::fmt::Write;
use std::path::Path;

use super::{run_full, ModelSource, ReportOptions};
use crate::analysis::GroupMeans;
use crate::corpus::{generate_synthetic_corpus, Corpus, SyntheticProfile, MORTALITY};
use crate::error::Result;
use crate::inference::{logistic, logit, MockLexicalModel};
use crate::par::Execution;
use crate::perturb::{builtin, CharacteristicSpec};

pub const SELFTEST_NOTES: usize = 2000;

/// Base mortality probability of every self-test mock model.
const BASE_P: f64 = 0.3;

/// One expected-vs-actual comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SelftestCase {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
}

impl SelftestCase {
    pub fn passed(&self) -> bool {
        (self.actual - self.expected).abs() <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelftestReport {
    pub cases: Vec<SelftestCase>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(SelftestCase::passed)
    }

    pub fn render(&self) -> String {
        let width = self.cases.iter().map(|c| c.name.len()).max().unwrap_or(4);
        let mut out = String::new();
        let _ = writeln!(out, "result  {:width$}  {:>14}  {:>14}  {:>9}", "case", "expected", "actual", "tolerance");
        for c in &self.cases {
            let _ = writeln!(
                out,
                "{:6}  {:width$}  {:>+14.9}  {:>+14.9}  {:>9.0e}",
                if c.passed() { "PASS" } else { "FAIL" },
                c.name,
                c.expected,
                c.actual,
                c.tolerance
            );
        }
        let failed = self.cases.iter().filter(|c| !c.passed()).count();
        let _ = writeln!(out, "{} of {} checks passed", self.cases.len() - failed, self.cases.len());
        out
    }

    fn check(&mut self, name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) {
        self.cases.push(SelftestCase {
            name: name.into(),
            expected,
            actual,
            tolerance,
        });
    }
}

/// Mock model with mortality probability [`BASE_P`], shifted to
/// `BASE_P + shift` by `token`.
fn shifted_model(token: Option<(&str, f64)>) -> MockLexicalModel {
    let base = logit(BASE_P);
    let model = MockLexicalModel::new([(MORTALITY.to_string(), base)]);
    match token {
        Some((t, shift)) => model.with_weight(t, MORTALITY, logit(BASE_P + shift) - base),
        None => model,
    }
}

struct Scenario<'a> {
    corpus: &'a Corpus,
    out: &'a Path,
    exec: Execution,
}

impl Scenario<'_> {
    fn run(&self, dir: &str, spec: CharacteristicSpec, model: MockLexicalModel) -> Result<(GroupMeans, Vec<Vec<f64>>)> {
        let summary = run_full(
            self.corpus,
            &spec,
            &ModelSource::Mock(model),
            &self.out.join(dir),
            &ReportOptions::default(),
            self.exec,
        )?;
        let dev = summary.analysis.deviation_matrix()?;
        Ok((summary.analysis.group_means()?, dev.cells))
    }
}

/// Runs the pipeline on a synthetic corpus against mock models with known
/// injected biases and compares every recovered value with its closed
/// form. Artifacts of each scenario are left under `out`.
pub fn selftest(seed: u64, notes: usize, out: &Path, exec: Execution) -> Result<SelftestReport> {
    let corpus = generate_synthetic_corpus(seed, notes, &SyntheticProfile::default())?;
    let s = Scenario {
        corpus: &corpus,
        out,
        exec,
    };
    let mut report = SelftestReport::default();
    let p0 = logistic(logit(BASE_P));

    // no lexicon: every group sees the same model output
    let (_, dev) = s.run("zero", builtin::gender(), shifted_model(None))?;
    let max_abs = dev.iter().flatten().fold(0.0_f64, |m, c| m.max(c.abs()));
    report.check("zero lexicon: max |c|", 0.0, max_abs, 1e-9);

    // the transgender modifier is the only token unique to one gender group
    for (dir, shift) in [("gender_up", 0.05), ("gender_down", -0.05)] {
        let (means, dev) = s.run(dir, builtin::gender(), shifted_model(Some(("transgender", shift))))?;
        for (g, group) in means.groups.iter().enumerate() {
            let expected = if group == "transgender" { shift } else { -shift / 2.0 };
            report.check(format!("gender {shift:+}: c[{group}]"), expected, dev[g][0], 1e-6);
        }
    }

    let shift = 0.04;
    let (means, dev) = s.run("ethnicity", builtin::ethnicity(), shifted_model(Some(("hispanic", shift))))?;
    for (g, group) in means.groups.iter().enumerate() {
        let expected = if group == "hispanic" { shift } else { -shift / 4.0 };
        report.check(format!("ethnicity {shift:+}: c[{group}]"), expected, dev[g][0], 1e-6);
    }

    // "over" only occurs in the de-identified over-90 token
    let age = || builtin::age(builtin::DEFAULT_OVER90_TOKEN);
    for (dir, token, spike_group) in [("age_deid", "over", builtin::OVER90), ("age_numeral", "58", "58")] {
        let shift = 0.1;
        let (means, _) = s.run(dir, age(), shifted_model(Some((token, shift))))?;
        let spike = means.mean(spike_group, MORTALITY).unwrap_or(f64::NAN);
        report.check(format!("age token {token:?}: p[{spike_group}]"), p0 + shift, spike, 1e-6);
        let off_spike = means
            .groups
            .iter()
            .zip(&means.means)
            .filter(|(g, _)| *g != spike_group)
            .fold(0.0_f64, |m, (_, row)| m.max((row[0] - p0).abs()));
        report.check(format!("age token {token:?}: max |p - p0| elsewhere"), 0.0, off_spike, 1e-9);
    }
    Ok(report)
}
