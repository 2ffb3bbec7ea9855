//! Acceptance criteria 1-9. Runs as a plain binary and prints one line per
//! criterion; the process fails if any criterion fails.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use chaoslab::chaos::{
    adapted_integral, adapted_integrand, decoupled_adapted_integral, eval_multiple_integral, product_formula_check,
    AdaptedIntegrand,
};
use chaoslab::clt::{
    calibration, check_assumption_n, check_gstar, clt_pipeline, findev_identity, negative_control_kernel, CltConfig,
};
use chaoslab::harness::{execute, Command, LambdaGrid, RunConfig};
use chaoslab::kernels::{factorial, kernel_norm_sq, SymmetricKernel};
use chaoslab::partition::{uniform_partition, Resolution};
use chaoslab::poc::{build_tangent_pair, conditional_cf_decoupled, estimate_stable_cf, poc_verdict, IntegrandSpec, PocConfig, PocReport};
use chaoslab::rmeasure::{levy_exponent, sample_measure, sample_measure_stream, FirstOrderKernel, MeasureLaw};
use chaoslab::scenarios::{
    block_example_closed_form, block_example_kernel, pair_terminal, refined_block_kernel, switching_study,
    BlockScenario, SwitchingScenario, BLOCK_REFINEMENT,
};
use chaoslab::stats::{mc_collect, mc_moments, relative_gap, Trend};
use num_complex::Complex64;

const SIGMAS: f64 = 4.0;
const LAWS: [MeasureLaw; 2] = [MeasureLaw::Gaussian, MeasureLaw::CompensatedPoisson];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for n in [1, 10, 100, 1000] {
        let f = block_example_kernel(n).unwrap();
        let a = check_assumption_n(&f).unwrap();
        let (c11, c21) = check_gstar(&f).unwrap();
        let q = 0.25 / n as f64;
        for (got, want) in [(a.norm_half, 1.0), (a.fourth_power, q), (c11, q), (c21, q)] {
            worst = worst.max(rel(got, want));
        }
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e} (tol 1e-12)"))
}

fn criterion_2() -> Outcome {
    const TRIALS: u64 = 1000;
    let mut worst = [0.0f64; 3];
    for k in 0..4u64 {
        let f1 = common::random_kernel(100 + k, 5, 1, 4, true);
        let g1 = common::build_kernel(f1.partition().clone(), 1, vec![(vec![0], 0.7), (vec![2], -1.1), (vec![4], 0.4)], true);
        let f2 = common::random_kernel(200 + k, 5, 2, 6, true);
        let g2 = common::build_kernel(f2.partition().clone(), 2, vec![(vec![0, 1], 0.5), (vec![1, 3], -0.8), (vec![2, 4], 1.3)], true);
        for (f, g) in [(&f1, &g1), (&f1, &f1), (&f2, &g2), (&f2, &f2)] {
            for t in 0..TRIALS {
                let s = sample_measure(f.partition(), MeasureLaw::CompensatedPoisson, 2, t);
                let (lhs, rhs) = product_formula_check(&s, f, g).unwrap();
                worst[0] = worst[0].max(relative_gap(lhs, rhs));
            }
        }
    }
    for n in [1, 10, 100] {
        let f = block_example_kernel(n).unwrap();
        for t in 0..TRIALS {
            let s = sample_measure(f.partition(), MeasureLaw::CompensatedPoisson, 2, t);
            let x = eval_multiple_integral(&s, &f).unwrap();
            worst[1] = worst[1].max(relative_gap(x, block_example_closed_form(&s, n).unwrap()));
        }
    }
    let mut kernels: Vec<SymmetricKernel> = [1, 2, 3].iter().map(|&n| refined_block_kernel(n, 3).unwrap()).collect();
    kernels.extend((0..4).map(|k| common::random_kernel(300 + k, 10, 2, 16, true)));
    for f in &kernels {
        let res = Resolution::forward(f.partition().clone());
        for law in LAWS {
            for t in 0..TRIALS {
                let s = sample_measure(f.partition(), law, 2, t);
                let j = adapted_integral(&adapted_integrand(f, &res, &s).unwrap(), &s).unwrap();
                worst[2] = worst[2].max(relative_gap(j, eval_multiple_integral(&s, f).unwrap()));
            }
        }
    }
    outcome(
        worst.iter().all(|&w| w <= 1e-10),
        format!("product {:.1e}, closed form {:.1e}, Clark-Ocone {:.1e} (tol 1e-10, 1000 trials)", worst[0], worst[1], worst[2]),
    )
}

fn criterion_3() -> Outcome {
    const TRIALS: u64 = 100_000;
    let f1 = common::random_kernel(31, 6, 1, 6, false);
    let f2 = common::build_kernel(
        f1.partition().clone(),
        2,
        vec![(vec![0, 1], 0.8), (vec![1, 1], -0.6), (vec![2, 5], 0.5), (vec![3, 4], -1.0), (vec![0, 4], 0.3)],
        false,
    );
    let mut worst = 0.0f64;
    for law in LAWS {
        let ms = mc_moments(TRIALS, 3, |t, row| {
            let s = sample_measure(f1.partition(), law, 3, t);
            let (a, b) = (eval_multiple_integral(&s, &f1)?, eval_multiple_integral(&s, &f2)?);
            row[0] = a * a;
            row[1] = b * b;
            row[2] = a * b;
            Ok(())
        })
        .unwrap();
        worst = worst.max(ms[0].estimate().z_score(kernel_norm_sq(&f1)));
        worst = worst.max(ms[1].estimate().z_score(factorial(2) as f64 * kernel_norm_sq(&f2)));
        worst = worst.max(ms[2].estimate().z_score(0.0));
    }
    outcome(worst <= SIGMAS, format!("max |z| {worst:.2} over Var I1, Var I2, Cov(I1, I2), both laws (tol 4)"))
}

fn cf_z(est: &chaoslab::poc::CharFnEstimate, target: impl Fn(f64) -> Complex64) -> f64 {
    est.lambda
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let d = est.values[i] - target(l);
            let (a, b) = est.std_err[i];
            (d.re.abs() / a.max(1e-300)).max(d.im.abs() / b.max(1e-300))
        })
        .fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    const TRIALS: u64 = 100_000;
    let lambda = LambdaGrid::default().points();
    let p = common::random_kernel(41, 6, 1, 1, false).partition().clone();
    let h = FirstOrderKernel::new(p.clone(), common::random_values(42, 6, 1.0)).unwrap();
    let f = common::random_kernel(43, 6, 2, 8, true);
    let res = Resolution::forward(f.partition().clone());
    let mut worst = 0.0f64;
    for law in LAWS {
        let xs = mc_collect(TRIALS, |t| chaoslab::rmeasure::integrate_first_order(&sample_measure(&p, law, 4, t), &h)).unwrap();
        let est = estimate_stable_cf(&xs, None, &lambda).unwrap();
        worst = worst.max(cf_z(&est, |l| levy_exponent(law, &h, l).exp()));

        let main = sample_measure(f.partition(), law, 4, 0);
        let u: AdaptedIntegrand = adapted_integrand(&f, &res, &main).unwrap();
        let uh = FirstOrderKernel::new(f.partition().clone(), u.values().to_vec()).unwrap();
        let xs = mc_collect(TRIALS, |c| {
            decoupled_adapted_integral(&u, &sample_measure_stream(f.partition(), law, 4, 0, 1 + c))
        })
        .unwrap();
        let est = estimate_stable_cf(&xs, None, &lambda).unwrap();
        worst = worst.max(cf_z(&est, |l| levy_exponent(law, &uh, l).exp()));
    }
    outcome(worst <= SIGMAS, format!("max |z| {worst:.2} at 21 lambda, X(h) and decoupled J, both laws (tol 4)"))
}

fn criterion_5() -> Outcome {
    const TRIALS: u64 = 1_000_000;
    let mut kernels: Vec<(String, SymmetricKernel)> =
        [1, 4, 16, 64].iter().map(|&n| (format!("block n={n}"), block_example_kernel(n).unwrap())).collect();
    for k in 0..10u64 {
        let n = 2 + (k as usize % 5);
        kernels.push((format!("random {k}"), common::random_kernel(500 + k, n, 2, 2 * n, false)));
    }
    let mut worst = 0.0f64;
    let mut printed_worst = 0.0f64;
    let mut printed_block = Vec::new();
    for (i, (name, f)) in kernels.iter().enumerate() {
        let r = findev_identity(f, 5 + i as u64, TRIALS).unwrap();
        worst = worst.max(r.lhs.z_score(r.rhs));
        printed_worst = printed_worst.max(r.lhs.z_score(r.rhs_printed));
        if name.starts_with("block") {
            printed_block.push(format!("{name}: lhs {:.4} +- {:.4}, rhs {:.4}, printed {:.4}", r.lhs.mean, r.lhs.std_err, r.rhs, r.rhs_printed));
        }
    }
    println!("    info: printed coefficients (3 + 37/n for the block family) reach |z| = {printed_worst:.1}");
    for line in printed_block {
        println!("    info: {line}");
    }
    outcome(worst <= SIGMAS, format!("max |z| {worst:.2} over 4 block kernels and 10 random kernels, 1e6 trials (tol 4)"))
}

fn criterion_6() -> Outcome {
    const TRIALS: u64 = 100_000;
    let ns = vec![4, 16, 64, 256];
    let cc = CltConfig { n_values: ns.clone(), trials: TRIALS, seed: 6, poc_family: None, poc_trials: 0, poc_lambda: Vec::new() };
    let report = clt_pipeline(&block_example_kernel, &cc).unwrap();
    let ks: Vec<f64> = report.records.iter().map(|r| r.ks).collect();
    let m4: Vec<f64> = report.records.iter().map(|r| (r.fourth_moment.mean - 3.0).abs()).collect();
    let last = report.records.last().unwrap();
    let ks_ok = Trend::of(&ks).is_decreasing(1) && last.ks < calibration::KS_256;
    let m4_ok = Trend::of(&m4).is_decreasing(1) && m4[3] < calibration::FOURTH_MOMENT_256;

    let control = negative_control_kernel();
    let mut control_ks = Vec::new();
    for &n in &ns {
        let cfg = CltConfig { n_values: vec![n], trials: TRIALS, seed: 600 + n as u64, poc_family: None, poc_trials: 0, poc_lambda: Vec::new() };
        control_ks.push(clt_pipeline(&|_| Ok(control.clone()), &cfg).unwrap().records[0].ks);
    }
    let floor = control_ks.iter().copied().fold(f64::INFINITY, f64::min);
    let plateau = floor >= calibration::NEGATIVE_CONTROL_KS_FLOOR && control_ks[3] >= 0.5 * control_ks[0];
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    outcome(
        ks_ok && m4_ok && plateau,
        format!(
            "KS {} (<{}), |E F^4 - 3| {} (<{}), control KS {}",
            fmt(&ks),
            calibration::KS_256,
            fmt(&m4),
            calibration::FOURTH_MOMENT_256,
            fmt(&control_ks)
        ),
    )
}

fn criterion_7() -> Outcome {
    const TRIALS: u64 = 100_000;
    let lambda = [0.5, 1.0, 2.0];
    let mut dist = Vec::new();
    let mut gaps = Vec::new();
    for n in [25, 50, 100, 200] {
        let stage = switching_study(n, 2000, 7, TRIALS, &[0.0, 1.0], &lambda).unwrap();
        if n != 50 {
            dist.push(stage.cf_distance());
        }
        gaps.push(stage.norm_gap.mean);
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    let ok = Trend::of(&dist).is_decreasing(0) && Trend::of(&gaps).is_decreasing(0);
    outcome(ok, format!("CF distance n=25,100,200: {}; E|‖u‖²-W1²| n=25,50,100,200: {}", fmt(&dist), fmt(&gaps)))
}

fn poc_summary(report: &PocReport) -> (Vec<f64>, Vec<f64>) {
    (report.stages.iter().map(|s| s.cp2_max()).collect(), report.stages.iter().map(|s| s.original_max()).collect())
}

fn criterion_8() -> Outcome {
    const TRIALS: u64 = 100_000;
    let lambda = vec![0.5, 1.0, 1.5, 2.0];
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");

    let block_ns = vec![4, 16, 64, 256];
    let blocks: Vec<BlockScenario> = block_ns.iter().map(|&n| BlockScenario::new(n, BLOCK_REFINEMENT).unwrap()).collect();
    let cfg = PocConfig { n_values: block_ns.clone(), trials: TRIALS, lambda: lambda.clone() };
    let block = poc_verdict(
        &cfg,
        |n, t| blocks.iter().find(|s| s.n() == n).unwrap().pair(8, t),
        |_, _, l| Complex64::new((-0.5 * l * l).exp(), 0.0),
    )
    .unwrap();
    let (b_cp2, b_orig) = poc_summary(&block);

    let sw_ns = vec![25, 100, 200];
    let switches: Vec<SwitchingScenario> = sw_ns.iter().map(|&n| SwitchingScenario::new(n, 2000).unwrap()).collect();
    let cfg = PocConfig { n_values: sw_ns.clone(), trials: TRIALS, lambda: lambda.clone() };
    let switching = poc_verdict(
        &cfg,
        |n, t| Ok(switches.iter().find(|s| s.n() == n).unwrap().pair(8, t)?.1),
        |_, pair, l| {
            let w1 = pair_terminal(pair);
            Complex64::new((-0.5 * l * l * w1 * w1).exp(), 0.0)
        },
    )
    .unwrap();
    let (s_cp2, s_orig) = poc_summary(&switching);

    // deterministic control: Gaussian, coefficients vanish on the head
    let p = Arc::new(uniform_partition(40, 1.0 / 40.0).unwrap());
    let res = Resolution::forward(p.clone());
    let mut values = common::random_values(81, 40, 1.0);
    values[..20].fill(0.0);
    let spec = IntegrandSpec::Deterministic(values);
    let cfg = PocConfig { n_values: vec![10, 20, 40], trials: TRIALS, lambda: lambda.clone() };
    let control = poc_verdict(
        &cfg,
        |_, t| build_tangent_pair(&spec, &res, MeasureLaw::Gaussian, 8, t, 0.5),
        |_, pair, l| conditional_cf_decoupled(pair, l),
    )
    .unwrap();
    let control_ok = control.stages.iter().all(|s| {
        s.rows.iter().all(|r| {
            r.cp2_distance.mean == 0.0
                && r.head_cf_distance.mean == 0.0
                && r.original_cf_distance.mean <= SIGMAS * r.original_cf_distance.std_err
        })
    });

    let together = |cp2: &[f64], orig: &[f64]| Trend::of(cp2).is_decreasing(1) && Trend::of(orig).is_decreasing(1);
    let ok = together(&b_cp2, &b_orig) && together(&s_cp2, &s_orig) && control_ok;
    outcome(
        ok,
        format!(
            "block CP2 {} / original {}; switching CP2 {} / original {}; control at noise floor: {}",
            fmt(&b_cp2),
            fmt(&b_orig),
            fmt(&s_cp2),
            fmt(&s_orig),
            control_ok
        ),
    )
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path
    };
    let part = r#"{"cells":[{"mass":1.0,"tau":0.2},{"mass":0.5,"tau":0.5},{"mass":2.0,"tau":0.7},{"mass":0.8,"tau":1.0}]}"#;
    let k1 = write("k1.json", &format!(r#"{{"order":1,"entries":[[0,0.5],[1,-1.0],[3,2.0]],"partition":{part}}}"#));
    let k2 = write(
        "k2.json",
        &format!(r#"{{"order":2,"offdiag_only":true,"entries":[[0,1,0.5],[1,2,-1.0],[0,3,0.3]],"partition":{part}}}"#),
    );
    let u = write("u.json", &format!(r#"{{"linear":[[1,0,1.0],[2,1,0.5],[3,0,-1.0]],"partition":{part}}}"#));
    let small = |c: Command| {
        let mut cfg = RunConfig::new(c);
        cfg.trials = 9000;
        cfg.seed = 99;
        cfg.lambda = "-2:2:5".parse().unwrap();
        cfg
    };
    let mut configs = Vec::new();
    let mut c = small(Command::Lk);
    c.kernel = Some(k1.clone());
    configs.push(c);
    let mut c = small(Command::Simulate);
    c.kernel = Some(k2.clone());
    c.law = Some("gaussian".into());
    configs.push(c);
    let mut c = small(Command::ChaosCheck);
    c.kernel = Some(k2.clone());
    configs.push(c);
    let mut c = small(Command::PocVerify);
    c.integrand = Some(u);
    configs.push(c);
    let mut c = small(Command::Clt);
    c.n_list = vec![4, 16];
    configs.push(c);
    let mut c = small(Command::ScenarioBlock);
    c.n_list = vec![4, 16];
    configs.push(c);
    let mut c = small(Command::ScenarioSwitching);
    c.n_list = vec![25];
    c.steps = 500;
    configs.push(c);

    let mut failures = Vec::new();
    for cfg in &mut configs {
        let mut outputs = Vec::new();
        for workers in [1, 4, 8, 1] {
            cfg.workers = workers;
            outputs.push(execute(cfg).unwrap());
        }
        if outputs.iter().any(|o| o != &outputs[0]) {
            failures.push(cfg.command.name());
        }
    }
    // the binary writes the same bytes
    let bin_out = dir.path().join("lk.csv");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_chaoslab"))
        .args(["lk", "--kernel", k1.to_str().unwrap(), "--seed", "99", "--trials", "9000", "--lambda", "-2:2:5", "--workers", "8", "--out"])
        .arg(&bin_out)
        .status()
        .unwrap();
    let same_bytes = status.success() && std::fs::read_to_string(&bin_out).unwrap() == execute(&configs[0]).unwrap();
    if !same_bytes {
        failures.push("binary lk");
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "7 subcommands byte-identical across workers 1, 4, 8 and repeated runs".to_string()
        } else {
            format!("differences in {}", failures.join(", "))
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 9] = [
        ("block-family analytic values", criterion_1, Some(Duration::from_secs(1))),
        ("per-trial algebraic identities", criterion_2, Some(Duration::from_secs(10))),
        ("isometry and orthogonality", criterion_3, Some(Duration::from_secs(60))),
        ("Levy-Khinchine and decoupled CF", criterion_4, None),
        ("fourth-moment expansion", criterion_5, Some(Duration::from_secs(600))),
        ("CLT trend and negative control", criterion_6, None),
        ("switching scenario", criterion_7, Some(Duration::from_secs(600))),
        ("conditioning verdict coherence", criterion_8, None),
        ("determinism", criterion_9, None),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = Vec::new();
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let k = i + 1;
        if only.is_some_and(|o| o != k) {
            continue;
        }
        let start = Instant::now();
        let mut out = run();
        let elapsed = start.elapsed();
        if let Some(b) = budget {
            if elapsed > *b {
                out.pass = false;
                out.detail.push_str(&format!("; over the {} s budget", b.as_secs()));
            }
        }
        println!("criterion {k} [{}] {name}: {} ({:.1} s)", if out.pass { "PASS" } else { "FAIL" }, out.detail, elapsed.as_secs_f64());
        if !out.pass {
            failed.push(k);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
