//! Acceptance suite. Prints one line per criterion.
//!
//! Criteria listed in `KNOWN_FAILING` are evaluated in full and reported as FAIL, but
//! do not fail the process unless `CROWDSPAM_ACCEPTANCE_STRICT=1` is set. Any other
//! failing criterion exits non-zero.
//!
//! Criterion 2 needs the real phishing dataset: point `CROWDSPAM_PHISHING_DATASET` at
//! a `url,label` CSV and optionally `CROWDSPAM_PHISHING_WHOIS` at its whois fixture.

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdspam::cli::{cmd_curve, cmd_simulate, simulate_trace};
use crowdspam::config::RunConfig;
use crowdspam::features::{partition_dataset, FeatureVector, Label, LabeledUrl};
use crowdspam::ledger::{LedgerParams, LedgerState};
use crowdspam::model::{train, FeatureMatrix, LogisticObjective, ModelSnapshot, TrainConfig, PARAM_COUNT};
use crowdspam::oracle::{calculate_weight, Oracle, Submission, SubmissionHistory, Verdict};
use crowdspam::sim::{ActorSpec, SimulationTrace, Strategy, TRACE_FILES};
use crowdspam::ContributorId;

const KNOWN_FAILING: &[u8] = &[3, 4, 5];

type Criterion = (u8, &'static str, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn default_trace(config: &RunConfig) -> SimulationTrace {
    simulate_trace(config).expect("default simulation runs")
}

fn criterion_1_curve_saturation() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        out_dir: dir.path().to_path_buf(),
        curve_sizes: vec![10, 50, 100, 200, 500, 1000],
        ..RunConfig::default()
    };
    let start = Instant::now();
    cmd_curve(&config, &mut Vec::new()).expect("curve runs");
    let elapsed = start.elapsed();
    let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let points: Vec<(usize, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let (s, a) = l.split_once(',').unwrap();
            (s.parse().unwrap(), a.parse().unwrap())
        })
        .collect();
    let max = points.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let worst = points
        .iter()
        .filter(|p| p.0 >= 200)
        .map(|p| max - p.1)
        .fold(0.0, f64::max);
    let shown: Vec<String> = points.iter().map(|(s, a)| format!("{s}:{a:.3}")).collect();
    check(
        worst <= 0.02 && elapsed < Duration::from_secs(30),
        format!(
            "max={max:.4} worst_gap={worst:.4} time={elapsed:.2?} [{}]",
            shown.join(" ")
        ),
    )
}

fn criterion_2_base_accuracy() -> Outcome {
    let Some(dataset) = std::env::var_os("CROWDSPAM_PHISHING_DATASET") else {
        return Outcome::Skip("CROWDSPAM_PHISHING_DATASET not set".into());
    };
    let config = RunConfig {
        dataset_path: Some(PathBuf::from(dataset)),
        whois_fixture_path: std::env::var_os("CROWDSPAM_PHISHING_WHOIS").map(PathBuf::from),
        ..RunConfig::default()
    };
    let (rows, _) = match config.load_rows() {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(format!("cannot load dataset: {e}")),
    };
    let whois = config.whois().expect("whois client");
    let partition = partition_dataset(
        &rows,
        config.partition.base_fraction,
        config.partition.good_fraction,
        config.seed,
    )
    .expect("partition");
    let oracle = Oracle::new(&partition.base_set, whois, config.train).expect("base model");
    let accuracy = oracle.accuracy();
    check(
        (accuracy - 0.83).abs() <= 0.03,
        format!("base accuracy {accuracy:.4} on {} rows", partition.base_set.len()),
    )
}

fn criterion_3_good_enrichment() -> Outcome {
    let config = RunConfig::default();
    let start = Instant::now();
    let trace = default_trace(&config);
    let elapsed = start.elapsed();
    let mut ok = elapsed < Duration::from_secs(60);
    let mut parts = Vec::new();
    for actor in config.actors.iter().filter(|a| a.strategy == Strategy::Good) {
        let end = trace.final_balance(&actor.id).unwrap();
        let accepted = trace.records_for(&actor.id).filter(|r| r.verdict.is_accepted()).count();
        let submitted = trace.records_for(&actor.id).count();
        ok &= end > actor.initial_balance;
        parts.push(format!(
            "{} {}->{} accepted {accepted}/{submitted}",
            actor.id, actor.initial_balance, end
        ));
    }
    check(ok, format!("{} time={elapsed:.2?}", parts.join(", ")))
}

fn criterion_4_bad_ruin() -> Outcome {
    let config = RunConfig::default();
    let trace = default_trace(&config);
    let mut ok = true;
    let mut parts = Vec::new();
    for actor in config.actors.iter().filter(|a| a.strategy == Strategy::Bad) {
        let mut before = actor.initial_balance;
        let mut violations = 0;
        let mut last_round = 0;
        for record in trace.records_for(&actor.id) {
            let after = record.balances[&actor.id];
            if before.checked_sub(actor.stake_per_round) != Some(after) {
                violations += 1;
            }
            before = after;
            last_round = record.round;
        }
        let must_bench = actor.initial_balance / actor.stake_per_round < 50;
        let benched = last_round < config.rounds;
        ok &= violations == 0 && (!must_bench || benched);
        parts.push(format!(
            "{} rounds={} non-slashed={violations} last_round={last_round} final={}",
            actor.id,
            trace.records_for(&actor.id).count(),
            trace.final_balance(&actor.id).unwrap()
        ));
    }
    check(ok, parts.join(", "))
}

fn criterion_5_repeat_slashing() -> Outcome {
    let mut config = RunConfig::default();
    config
        .actors
        .push(ActorSpec::new("repeat-1", Strategy::RepeatSubmitter, 1_000, 100, 1));
    let trace = default_trace(&config);
    let id = ContributorId::from("repeat-1");
    let records: Vec<_> = trace.records_for(&id).collect();
    let Some(first) = records.first() else {
        return Outcome::Fail("repeat submitter never submitted".into());
    };
    let gained = first.reward_paid > first.stake;
    let slashed = records[1..].iter().all(|r| r.reward_paid == 0);
    let balances: Vec<u64> = records.iter().map(|r| r.balances[&id]).collect();
    let decreasing = balances.windows(2).all(|w| w[1] < w[0]);
    check(
        gained && slashed && decreasing,
        format!(
            "first verdict={} reward={} stake={}, later slashed={slashed}, strictly decreasing={decreasing}, balances={:?}",
            first.verdict, first.reward_paid, first.stake, balances
        ),
    )
}

fn criterion_6_monotone_accuracy() -> Outcome {
    let seeds: Vec<u64> = (1..=20).chain([42]).collect();
    let mut bad = Vec::new();
    for &seed in &seeds {
        let config = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let trace = default_trace(&config);
        let mut series = vec![trace.initial_accuracy];
        series.extend(trace.accuracy_series());
        if series.windows(2).any(|w| w[1] < w[0]) {
            bad.push(seed);
        }
    }
    check(
        bad.is_empty(),
        format!("{} seeds, decreasing at {:?}", seeds.len(), bad),
    )
}

type Fingerprint = (u64, Vec<(ContributorId, u64)>, Vec<(ContributorId, u64)>, usize, usize);

fn fingerprint(ledger: &LedgerState) -> Fingerprint {
    (
        ledger.contract_balance(),
        ledger.balances().iter().map(|(k, v)| (k.clone(), *v)).collect(),
        ledger
            .active_stakes()
            .iter()
            .map(|(k, v)| (k.clone(), v.amount))
            .collect(),
        ledger.events().len(),
        ledger
            .history()
            .global_domain_counts()
            .values()
            .map(|c| *c as usize)
            .sum(),
    )
}

fn criterion_7_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ledger = LedgerState::genesis(&LedgerParams::default()).unwrap();
    let ids: Vec<ContributorId> = (0..6).map(|i| ContributorId::from(format!("c{i}"))).collect();
    let urls = ["http://a.com/", "http://b.a.com/x", "http://c.org/", "http://d.net/p"];
    let ops = 20_000;
    let mut violations = 0;
    let mut errors = 0;
    for _ in 0..ops {
        let id = &ids[rng.gen_range(0..ids.len())];
        let before = fingerprint(&ledger);
        let result = match rng.gen_range(0..5) {
            0 => ledger.fund_account(id, rng.gen_range(0..300)),
            1 => ledger.place_stake(id, rng.gen_range(0..400)),
            2 => ledger.pay_inference_fee(id),
            _ => {
                let weight: f64 = rng.gen_range(-0.5..0.5);
                let verdict = if weight > 0.0 {
                    Verdict::Accepted
                } else {
                    Verdict::RejectedNegativeWeight
                };
                let batch = [LabeledUrl::new(urls[rng.gen_range(0..urls.len())], Label::Spam)];
                ledger
                    .settle(id, verdict, weight, rng.gen_range(0..4), &batch)
                    .map(|_| ())
            }
        };
        if result.is_err() {
            errors += 1;
            if fingerprint(&ledger) != before {
                violations += 1;
            }
        }
        if !ledger.is_conserved() {
            violations += 1;
        }
    }
    check(
        violations == 0,
        format!(
            "{ops} operations ({errors} refused), violations={violations}, minted={}",
            ledger.total_minted()
        ),
    )
}

fn random_fv(rng: &mut ChaCha8Rng) -> FeatureVector {
    FeatureVector {
        domain_length: rng.gen_range(4..40),
        has_dash: rng.gen_bool(0.3),
        is_redirect: rng.gen_bool(0.2),
        num_subdomains: rng.gen_range(0..4),
        active_duration_days: rng.gen_range(0..5000),
    }
}

fn brute_accuracy(model: &ModelSnapshot, rows: &[(FeatureVector, Label)]) -> f64 {
    let mut correct = 0usize;
    for (fv, label) in rows {
        let predicted = if model.score(fv) >= 0.5 {
            Label::Spam
        } else {
            Label::Ham
        };
        if predicted == *label {
            correct += 1;
        }
    }
    correct as f64 / rows.len() as f64
}

fn criterion_8_algorithm_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = TrainConfig::default();
    let url_pool: Vec<String> = (0..6).map(|i| format!("http://site{i}.example.com/p")).collect();
    let mut mismatches = 0;
    let mut accepted = 0;
    let instances = 100;
    for _ in 0..instances {
        let base_rows: Vec<(FeatureVector, Label)> = loop {
            let n = rng.gen_range(2..=20);
            let rows: Vec<_> = (0..n)
                .map(|_| (random_fv(&mut rng), Label::from_bit(rng.gen_range(0..2)).unwrap()))
                .collect();
            let spam = rows.iter().filter(|r| r.1 == Label::Spam).count();
            if spam > 0 && spam < rows.len() {
                break rows;
            }
        };
        let base = FeatureMatrix::new(base_rows.clone());
        let base_model = train(&base, &config).unwrap();

        let mut history = SubmissionHistory::new();
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for _ in 0..rng.gen_range(0..4) {
            let who = ContributorId::from(format!("h{}", rng.gen_range(0..3)));
            let url = url_pool[rng.gen_range(0..url_pool.len())].clone();
            let was_accepted = rng.gen_bool(0.5);
            history.record(&who, &[LabeledUrl::new(url.clone(), Label::Ham)], was_accepted);
            seen.insert(url);
        }

        let k = rng.gen_range(1..=3);
        let points: Vec<(LabeledUrl, FeatureVector)> = (0..k)
            .map(|_| {
                let url = url_pool[rng.gen_range(0..url_pool.len())].clone();
                let label = Label::from_bit(rng.gen_range(0..2)).unwrap();
                (LabeledUrl::new(url, label), random_fv(&mut rng))
            })
            .collect();
        let submission = Submission::from_parts(points.clone());
        let report = calculate_weight(&submission, &base_model, &base, &base, &history, &config).unwrap();

        let accuracy_base = brute_accuracy(&base_model, &base_rows);
        let mut combined_rows = base_rows.clone();
        for (u, fv) in &points {
            combined_rows.push((*fv, u.label));
        }
        let new_model = train(&FeatureMatrix::new(combined_rows), &config).unwrap();
        let accuracy_new = brute_accuracy(&new_model, &base_rows);
        let base_weight = (accuracy_new - accuracy_base) / accuracy_base;
        let mut penalty_factor = 1.0;
        for (u, _) in &points {
            if seen.contains(&u.url) {
                penalty_factor *= 0.9;
            }
        }
        let final_weight = base_weight * penalty_factor;

        if report.final_weight != final_weight
            || report.accuracy_base != accuracy_base
            || report.accuracy_new != accuracy_new
            || report.penalty_factor != penalty_factor
        {
            mismatches += 1;
        }
        if report.verdict.is_accepted() {
            accepted += 1;
        }
    }
    check(
        mismatches == 0,
        format!("{instances} instances, {mismatches} mismatches, {accepted} accepted"),
    )
}

fn criterion_9_reward_table() -> Outcome {
    let table: [(u64, f64, u32, u64); 20] = [
        (100, 0.06, 3, 102),
        (100, 0.05, 1, 105),
        (10, 0.25, 1, 13),
        (10, 0.25, 2, 11),
        (10, 0.75, 2, 14),
        (2, 0.25, 1, 3),
        (6, 0.25, 1, 8),
        (100, 0.5, 4, 113),
        (1000, 0.001, 1, 1001),
        (100, 0.004, 1, 100),
        (100, 0.0081, 1, 101),
        (50, 0.1, 5, 51),
        (1, 0.5, 1, 2),
        (3, 0.5, 1, 5),
        (8, 0.0625, 1, 9),
        (8, 0.1875, 1, 10),
        (100, 1.0, 1, 200),
        (100, 2.5, 2, 225),
        (7, 0.125, 2, 7),
        (200, 0.0405, 1, 208),
    ];
    let mut wrong = Vec::new();
    for (i, &(stake, weight, divisor, expected)) in table.iter().enumerate() {
        let mut ledger = LedgerState::genesis(&LedgerParams::default()).unwrap();
        let id = ContributorId::from("c");
        ledger.fund_account(&id, stake).unwrap();
        ledger.place_stake(&id, stake).unwrap();
        let batch = [LabeledUrl::new("http://x.example.com/", Label::Ham)];
        let s = ledger.settle(&id, Verdict::Accepted, weight, divisor, &batch).unwrap();
        if s.reward_paid != expected || s.duplicate_divisor != divisor || !ledger.is_conserved() {
            wrong.push(format!("case {i}: got {} want {expected}", s.reward_paid));
        }
    }
    check(wrong.is_empty(), format!("{} cases, wrong: {:?}", table.len(), wrong))
}

fn criterion_10_gradient() -> Outcome {
    let rows: Vec<(FeatureVector, Label)> = vec![
        (
            FeatureVector {
                domain_length: 11,
                has_dash: false,
                is_redirect: false,
                num_subdomains: 0,
                active_duration_days: 4000,
            },
            Label::Ham,
        ),
        (
            FeatureVector {
                domain_length: 26,
                has_dash: true,
                is_redirect: true,
                num_subdomains: 2,
                active_duration_days: 30,
            },
            Label::Spam,
        ),
        (
            FeatureVector {
                domain_length: 18,
                has_dash: true,
                is_redirect: false,
                num_subdomains: 1,
                active_duration_days: 200,
            },
            Label::Spam,
        ),
        (
            FeatureVector {
                domain_length: 9,
                has_dash: false,
                is_redirect: false,
                num_subdomains: 1,
                active_duration_days: 2500,
            },
            Label::Ham,
        ),
        (
            FeatureVector {
                domain_length: 31,
                has_dash: false,
                is_redirect: true,
                num_subdomains: 3,
                active_duration_days: 12,
            },
            Label::Spam,
        ),
        (
            FeatureVector {
                domain_length: 14,
                has_dash: true,
                is_redirect: false,
                num_subdomains: 0,
                active_duration_days: 900,
            },
            Label::Ham,
        ),
    ];
    let objective = LogisticObjective::new(&FeatureMatrix::new(rows), 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut params = [0.0; PARAM_COUNT];
        for p in params.iter_mut() {
            *p = rng.gen_range(-2.0..2.0);
        }
        let analytic = objective.gradient(&params);
        for j in 0..PARAM_COUNT {
            let mut up = params;
            let mut down = params;
            up[j] += h;
            down[j] -= h;
            let numeric = (objective.value(&up) - objective.value(&down)) / (2.0 * h);
            let rel = (analytic[j] - numeric).abs() / analytic[j].abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    check(worst <= 1e-4, format!("10 points, worst relative error {worst:.2e}"))
}

fn criterion_11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = RunConfig {
        out_dir: dir.path().join("run"),
        ..RunConfig::default()
    };
    let read_all = || -> Vec<Vec<u8>> {
        TRACE_FILES
            .iter()
            .map(|f| fs::read(config.out_dir.join(f)).unwrap())
            .collect()
    };
    cmd_simulate(&config, &mut Vec::new()).unwrap();
    let first = read_all();
    fs::remove_dir_all(&config.out_dir).unwrap();
    cmd_simulate(&config, &mut Vec::new()).unwrap();
    let second = read_all();
    let bytes: usize = first.iter().map(Vec::len).sum();
    check(
        first == second,
        format!("{} files, {bytes} bytes compared", TRACE_FILES.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (1, "accuracy saturation", criterion_1_curve_saturation),
        (2, "base accuracy on real dataset", criterion_2_base_accuracy),
        (3, "good-actor enrichment", criterion_3_good_enrichment),
        (4, "bad-actor ruin", criterion_4_bad_ruin),
        (5, "repeat-submitter slashing", criterion_5_repeat_slashing),
        (6, "monotone production accuracy", criterion_6_monotone_accuracy),
        (7, "ledger conservation", criterion_7_conservation),
        (8, "weight oracle equivalence", criterion_8_algorithm_equivalence),
        (9, "reward table exactness", criterion_9_reward_table),
        (10, "gradient correctness", criterion_10_gradient),
        (11, "determinism", criterion_11_determinism),
    ];
    let strict = std::env::var("CROWDSPAM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let mut fatal = 0;
    let mut failed = 0;
    for (id, name, run) in criteria {
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Skip(d) => ("SKIP", d),
            Outcome::Fail(d) => {
                failed += 1;
                if strict || !KNOWN_FAILING.contains(&id) {
                    fatal += 1;
                    ("FAIL", d)
                } else {
                    ("FAIL (known)", d)
                }
            }
        };
        println!("criterion {id:>2} {name}: {tag} | {detail}");
    }
    println!("acceptance: {failed} failing, {fatal} unexpected");
    if fatal == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
