//! Acceptance checks, one line per criterion. Run with
//! `cargo test -p noteprobe-core --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::stub::{oracle, Mode, Stub, BAD_MARKER, LABELS};
use noteprobe_core::analysis::{auroc, deviation, GroupMeans};
use noteprobe_core::corpus::{generate_synthetic_corpus, Corpus, SyntheticProfile, MORTALITY};
use noteprobe_core::inference::{logit, predict_remote, MockLexicalModel, ModelEndpoint, PredictionRecord};
use noteprobe_core::perturb::{builtin, generate_groups_with, GroupedDataset};
use noteprobe_core::pipeline::{run_full, ModelSource, ReportOptions};
use noteprobe_core::{Error, Execution};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn means(groups: &[(&str, f64)]) -> GroupMeans {
    GroupMeans::new(
        "c",
        groups.iter().map(|(g, _)| g.to_string()).collect(),
        vec![MORTALITY.to_string()],
        groups.iter().map(|(_, p)| vec![*p]).collect(),
        1,
    )
    .unwrap()
}

/// Deviation recomputed from its definition: own mean minus the mean of
/// the other groups' means.
fn oracle_deviation(ps: &[f64]) -> Vec<f64> {
    (0..ps.len())
        .map(|i| {
            let others: Vec<f64> = ps.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p).collect();
            ps[i] - others.iter().sum::<f64>() / others.len() as f64
        })
        .collect()
}

fn reference_means() -> Outcome {
    let gender = [("female", 0.335), ("male", 0.333), ("transgender", 0.326)];
    let ethnicity = [
        ("no_mention", 0.333),
        ("white", 0.329),
        ("african_american", 0.329),
        ("hispanic", 0.331),
        ("asian", 0.330),
    ];
    let (gm, em) = (means(&gender), means(&ethnicity));
    let start = Instant::now();
    let gd = deviation(&gm).map_err(|e| e.to_string())?;
    let ed = deviation(&em).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    for (got, want) in gd.cells.iter().map(|r| r[0]).zip([0.0055, 0.0025, -0.0080]) {
        ensure((got - want).abs() <= 1e-12, || format!("gender: {got} vs expected {want}"))?;
    }
    let ps: Vec<f64> = ethnicity.iter().map(|(_, p)| *p).collect();
    for (got, want) in ed.cells.iter().map(|r| r[0]).zip(oracle_deviation(&ps)) {
        ensure((got - want).abs() <= 1e-12, || format!("ethnicity: {got} vs {want}"))?;
    }
    let c_none = ed.get("no_mention", MORTALITY).unwrap();
    ensure((c_none - 0.00325).abs() <= 1e-12, || format!("no mention c = {c_none}"))?;
    let others_below = ed.cells[1..].iter().all(|r| r[0] < c_none);
    ensure(others_below, || "no mention is not the unique maximum".into())?;
    ensure(elapsed < Duration::from_millis(1), || format!("took {elapsed:?}"))?;
    Ok(format!("gender (+0.0055, +0.0025, -0.0080), no mention max at +0.00325, {elapsed:?}"))
}

fn zero_sum_sweep() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let start = Instant::now();
    for case in 0..10_000 {
        let g = rng.random_range(2..=10);
        let l = rng.random_range(1..=50);
        let cells: Vec<Vec<f64>> = (0..g).map(|_| (0..l).map(|_| rng.random::<f64>()).collect()).collect();
        let m = GroupMeans::new(
            "c",
            (0..g).map(|i| format!("g{i}")).collect(),
            (0..l).map(|i| format!("l{i}")).collect(),
            cells,
            1,
        )
        .unwrap();
        let d = deviation(&m).map_err(|e| e.to_string())?;
        let k: f64 = rng.random_range(-0.5..0.5);
        let mut shifted = m.clone();
        shifted.means.iter_mut().flatten().for_each(|p| *p += k);
        let ds = deviation(&shifted).map_err(|e| e.to_string())?;
        for li in 0..l {
            let sum: f64 = d.cells.iter().map(|r| r[li]).sum();
            ensure(sum.abs() <= 1e-12 * g as f64, || format!("case {case}: label sum {sum}"))?;
            for i in 0..g {
                let moved = (d.cells[i][li] - ds.cells[i][li]).abs();
                ensure(moved <= 1e-12, || format!("case {case}: offset changed c by {moved}"))?;
            }
            let mut by_p: Vec<usize> = (0..g).collect();
            by_p.sort_by(|&a, &b| m.means[a][li].total_cmp(&m.means[b][li]));
            for w in by_p.windows(2) {
                if m.means[w[1]][li] > m.means[w[0]][li] + 1e-12 {
                    ensure(d.cells[w[1]][li] > d.cells[w[0]][li], || format!("case {case}: order flipped"))?;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("10000 random matrices, {elapsed:?}"))
}

fn run_gender(corpus: &Corpus, model: MockLexicalModel, out: &Path) -> Result<Vec<(String, f64)>, String> {
    let summary = run_full(
        corpus,
        &builtin::gender(),
        &ModelSource::Mock(model),
        out,
        &ReportOptions::default(),
        Execution::Sequential,
    )
    .map_err(|e| e.to_string())?;
    let d = summary.analysis.deviation_matrix().map_err(|e| e.to_string())?;
    Ok(d.groups.iter().cloned().zip(d.cells.iter().map(|r| r[0])).collect())
}

fn bias_recovery() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let corpus = generate_synthetic_corpus(2024, 2000, &SyntheticProfile::default()).map_err(|e| e.to_string())?;
    let base = logit(0.3);
    let flat = MockLexicalModel::new([(MORTALITY.to_string(), base)]);
    let zero = run_gender(&corpus, flat.clone(), &dir.path().join("zero"))?;
    let biased = flat.with_weight("transgender", MORTALITY, logit(0.35) - base);
    let shifted = run_gender(&corpus, biased, &dir.path().join("biased"))?;
    let elapsed = start.elapsed();

    let worst = zero.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
    ensure(worst < 1e-9, || format!("zero lexicon: max |c| = {worst}"))?;
    let want: BTreeMap<&str, f64> = [("female", -0.025), ("male", -0.025), ("transgender", 0.05)].into();
    ensure(shifted.len() == 3, || format!("{} groups", shifted.len()))?;
    for (g, c) in &shifted {
        let w = want[g.as_str()];
        ensure((c - w).abs() <= 1e-6, || format!("c[{g}] = {c}, expected {w}"))?;
    }
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let shown: Vec<String> = shifted.iter().map(|(g, c)| format!("{g} {c:+.9}")).collect();
    Ok(format!("{}; zero lexicon max |c| {worst:.1e}; {elapsed:.1?} single-threaded", shown.join(", ")))
}

fn perturbation_properties() -> Outcome {
    let corpus = generate_synthetic_corpus(99, 1000, &SyntheticProfile::default()).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let mut counts = Vec::new();
    for (name, groups) in [("gender", 3), ("age", 73), ("ethnicity", 5)] {
        let spec = builtin::builtin(name).unwrap().compile().unwrap();
        let n = spec.spec().groups.len();
        ensure(n == groups, || format!("{name}: {n} groups, expected {groups}"))?;
        counts.push(format!("{name} {n}"));
        // notes are independent; spread them over a few threads
        let chunks: Vec<&[noteprobe_core::corpus::PatientNote]> = corpus.notes().chunks(125).collect();
        let per_chunk: Vec<Vec<String>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunks
                .iter()
                .map(|chunk| {
                    let spec = &spec;
                    s.spawn(move || chunk.iter().flat_map(|note| common::invariants::check_note(note, spec)).collect())
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        failures.extend(per_chunk.into_iter().flatten());
        let ds = generate_groups_with(&corpus, &spec, Execution::default()).map_err(|e| e.to_string())?;
        failures.extend(common::invariants::check_cohort(&corpus, &ds));
    }
    ensure(failures.is_empty(), || {
        format!("{} failures, first: {}", failures.len(), failures[..failures.len().min(3)].join(" | "))
    })?;
    Ok(format!("1000 notes, groups: {}, 0 failures", counts.join(", ")))
}

fn brute_force_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, si) in scores.iter().enumerate() {
        for (j, sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

fn auroc_oracle() -> Outcome {
    let fixed = auroc(&[0.8, 0.4, 0.6, 0.2], &[true, true, false, false]).map_err(|e| e.to_string())?;
    ensure(fixed == 0.75, || format!("fixed example gave {fixed}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 500 {
        let n = rng.random_range(2..=200);
        // coarse scores so ties are common
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..25) as f64 / 25.0).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let got = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        let want = brute_force_auroc(&scores, &labels);
        ensure((got - want).abs() <= 1e-12, || format!("n = {n}: {got} vs {want}"))?;
        checked += 1;
    }
    Ok("500 random instances and the 4-sample example (0.75)".into())
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), std::fs::read(e.path()).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let corpus = generate_synthetic_corpus(3, 300, &SyntheticProfile::default()).map_err(|e| e.to_string())?;
    let model = MockLexicalModel::new([(MORTALITY.to_string(), -1.0), ("Hypertension".to_string(), -0.5)])
        .with_weight("female", MORTALITY, 0.2)
        .with_weight("hispanic", "Hypertension", 0.3)
        .with_weight("over", MORTALITY, 0.7)
        .with_weight("she", "Hypertension", -0.1);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    // the second run is sequential, so parallel execution is covered too
    for (dir, exec) in dirs.iter().zip([Execution::default(), Execution::Sequential]) {
        for name in builtin::BUILTIN_NAMES {
            run_full(
                &corpus,
                &builtin::builtin(name).unwrap(),
                &ModelSource::Mock(model.clone()),
                dir.path(),
                &ReportOptions::default(),
                exec,
            )
            .map_err(|e| e.to_string())?;
        }
    }
    let (a, b) = (tree(dirs[0].path()), tree(dirs[1].path()));
    let kinds = |ext: &str| a.keys().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    ensure(kinds("csv") > 0 && kinds("svg") > 0 && kinds("json") > 0, || "artifacts missing".into())?;
    ensure(a.keys().eq(b.keys()), || "file lists differ".into())?;
    if let Some((path, _)) = a.iter().find(|(p, bytes)| b[*p] != **bytes) {
        return Err(format!("{} differs", path.display()));
    }
    Ok(format!("{} files byte-identical across two runs", a.len()))
}

fn stub_dataset() -> GroupedDataset {
    let corpus = generate_synthetic_corpus(8, 40, &SyntheticProfile::default()).unwrap();
    generate_groups_with(&corpus, &builtin::gender().compile().unwrap(), Execution::default()).unwrap()
}

fn remote_robustness() -> Outcome {
    let ds = stub_dataset();
    let mut want: Vec<PredictionRecord> = ds
        .groups
        .iter()
        .flat_map(|g| {
            g.samples.iter().map(|s| PredictionRecord {
                sample_id: s.id.clone(),
                group: g.name.clone(),
                probabilities: LABELS.iter().map(|l| l.to_string()).zip(oracle(&s.text)).collect(),
            })
        })
        .collect();
    want.sort_by(|a, b| (&a.group, &a.sample_id).cmp(&(&b.group, &b.sample_id)));

    let stub = Stub::start(Mode::ShuffledFailOnce);
    let mut endpoint = ModelEndpoint::new(stub.url.clone());
    endpoint.max_batch = 3;
    endpoint.max_parallel = 8;
    let got = predict_remote(&ds, &endpoint).map_err(|e| e.to_string())?;
    ensure(got == want, || "records differ from the stub oracle".into())?;
    let retried = stub.predict_calls() - ds.cohort_size().div_ceil(3) * 3;
    ensure(retried == 1, || format!("{retried} retried requests"))?;

    let bad = Stub::start(Mode::OutOfRange);
    endpoint.base_url = bad.url.clone();
    let first_bad = want
        .iter()
        .find(|r| ds.group(&r.group).unwrap().samples.iter().any(|s| s.id == r.sample_id && s.text.contains(BAD_MARKER)))
        .ok_or("no note mentions the bad marker")?;
    match predict_remote(&ds, &endpoint) {
        Err(Error::Protocol(msg)) if msg.contains(&format!("({}, {})", first_bad.group, first_bad.sample_id)) => {
            Ok(format!("{} ordered records with a retried 503; p = 1.2 rejected: {msg}", got.len()))
        }
        other => Err(format!("p = 1.2 gave {other:?}")),
    }
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("deviation on reference means", reference_means),
        ("zero-sum, offset invariance, order", zero_sum_sweep),
        ("bias recovery on synthetic corpus", bias_recovery),
        ("perturbation property suite", perturbation_properties),
        ("AUROC against pair counting", auroc_oracle),
        ("pipeline determinism", determinism),
        ("remote robustness", remote_robustness),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
