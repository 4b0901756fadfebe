//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use pleiovb::benchmark::{run_benchmark, BenchConfig, BenchRow, Method};
use pleiovb::inference::{fdr_select, lrt_p_value, pleiotropy_lrt};
use pleiovb::metrics::auc;
use pleiovb::model::{FitConfig, GroupProbs};
use pleiovb::simulate::SimConfig;
use pleiovb::special::chisq1_survival;
use pleiovb::vb::binary::bohning_coefficients;
use pleiovb::vb::{group_log_odds, softmax_groups};
use pleiovb::{fit_joint, fit_single, Family};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::Rng;
use rayon::prelude::*;

const CASES: u32 = 1000;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, name: &str, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("{} {id:<3} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn info(&self, detail: String) {
        println!("     info {detail}");
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn criterion_1(r: &mut Report) {
    let p1 = chisq1_survival(72.5).unwrap();
    let p2 = chisq1_survival(4.73).unwrap();
    let p3 = lrt_p_value(-8.87e-2).unwrap();
    let pass = rel_err(p1, 1.68e-17) <= 0.05 && rel_err(p2, 2.96e-2) <= 0.02 && p3 == 1.0;
    r.line(
        "1",
        pass,
        "chi-square mapping",
        format!("p(72.5) = {p1:.4e} (paper 1.68e-17), p(4.73) = {p2:.4e} (paper 2.96e-2), p(-0.0887) = {p3}"),
    );
}

fn criterion_2(r: &mut Report) {
    let start = Instant::now();
    let worst: Vec<(Family, f64)> = [Family::Quant, Family::Binary]
        .into_iter()
        .flat_map(|family| (0..50u64).map(move |i| (family, i)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(family, i)| {
            let mut rng = rng(1000 + i);
            let config = SimConfig {
                family,
                n: 200,
                n_test: 20,
                p: 100,
                alpha1: rng.random_range(0.02..0.1),
                g: rng.random_range(0.0..=1.0),
                h_sq: rng.random_range(0.2..0.8),
                seed: 2024,
                ..SimConfig::default()
            };
            let (d1, d2) = sim_pair(&config, i);
            let joint = fit_joint(&d1, &d2, &FitConfig::default()).unwrap();
            let s1 = fit_single(&d1, &FitConfig::default()).unwrap();
            let s2 = fit_single(&d2, &FitConfig::default()).unwrap();
            let w = [&joint.elbo_trace, &s1.elbo_trace, &s2.elbo_trace]
                .iter()
                .map(|t| worst_decrease(t))
                .fold(f64::NEG_INFINITY, f64::max);
            (family, w)
        })
        .collect();
    let max_of = |f: Family| {
        worst
            .iter()
            .filter(|w| w.0 == f)
            .map(|w| w.1)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (q, b) = (max_of(Family::Quant), max_of(Family::Binary));
    r.line(
        "2",
        q <= 1e-8 && b <= 1e-8,
        "ELBO monotonicity",
        format!(
            "largest relative decrease {q:.2e} (quant, 50 instances), {b:.2e} (binary, 50 instances), limit 1e-8, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_3(r: &mut Report) {
    let start = Instant::now();
    let gaps: Vec<(f64, f64)> = (0..20u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng(3000 + i);
            let p = rng.random_range(3..=8);
            let n = rng.random_range(40..=100);
            let causal = rng.random_range(0..=2);
            let (d1, d2) = random_pair(3100 + i, n, p, causal, Family::Quant);
            let fit = fit_joint(&d1, &d2, &FitConfig::default()).unwrap();
            let exact = exact_log_evidence(&d1, &d2, &fit.params);
            let elbo = final_elbo(&fit);
            (exact - elbo, exact - (elbo - bound_constant(p)))
        })
        .collect();
    let min_gap = gaps.iter().map(|g| g.0).fold(f64::INFINITY, f64::min);
    let min_textbook = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    r.line(
        "3",
        min_gap >= -1e-9,
        "enumeration-oracle bound",
        format!(
            "min(log-evidence − ELBO) = {min_gap:.4e} over 20 instances, tolerance 1e-9, {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
    r.info(format!(
        "same gap with the per-SNP constant removed: min {min_textbook:.4e}"
    ));
}

fn bench(family: Family) -> Vec<BenchRow> {
    let config = BenchConfig {
        sim: desk_scale(family),
        g_grid: vec![0.0, 0.5, 1.0],
        replicates: 20,
        tau: 0.2,
        fit: FitConfig::default(),
        threads: None,
    };
    run_benchmark(&config).unwrap()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn column(rows: &[BenchRow], g: f64, method: Method, f: impl Fn(&BenchRow) -> f64) -> Vec<f64> {
    rows.iter().filter(|r| r.g == g && r.method == method).map(f).collect()
}

fn summarize(r: &Report, family: Family, rows: &[BenchRow]) {
    for g in [0.0, 0.5, 1.0] {
        let stat = |m: Method, f: fn(&BenchRow) -> f64| mean(column(rows, g, m, f).into_iter());
        r.info(format!(
            "{family:?} g={g}: joint auc {:.3} power {:.3} fdr {:.3} pred {:.3} | separate auc {:.3} power {:.3} fdr {:.3} pred {:.3}",
            stat(Method::Joint, |r| r.auc),
            stat(Method::Joint, |r| r.power),
            stat(Method::Joint, |r| r.fdr),
            stat(Method::Joint, |r| r.prediction),
            stat(Method::Separate, |r| r.auc),
            stat(Method::Separate, |r| r.power),
            stat(Method::Separate, |r| r.fdr),
            stat(Method::Separate, |r| r.prediction),
        ));
    }
}

fn criteria_4_to_6(r: &mut Report) {
    let start = Instant::now();
    let quant = bench(Family::Quant);
    let binary = bench(Family::Binary);
    let secs = start.elapsed().as_secs_f64();
    summarize(r, Family::Quant, &quant);
    summarize(r, Family::Binary, &binary);

    let power = |rows: &[BenchRow], g: f64, m: Method| column(rows, g, m, |r| r.power);
    let families = [("quant", &quant), ("binary", &binary)];

    let diffs: Vec<(&str, f64)> = families
        .iter()
        .map(|(name, rows)| {
            let d = mean(power(rows, 0.0, Method::Joint).into_iter())
                - mean(power(rows, 0.0, Method::Separate).into_iter());
            (*name, d)
        })
        .collect();
    r.line(
        "4",
        diffs.iter().all(|(_, d)| d.abs() <= 0.05),
        "joint/separate equivalence at g=0",
        format!(
            "mean power joint − separate: {}, limit ±0.05 (desk scale, 20 replicates)",
            diffs
                .iter()
                .map(|(k, d)| format!("{k} {d:+.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );

    let mut pass = true;
    let mut detail = Vec::new();
    for (name, rows) in families {
        let (pj, ps) = (power(rows, 1.0, Method::Joint), power(rows, 1.0, Method::Separate));
        let wins = pj.iter().zip(&ps).filter(|(a, b)| a >= b).count();
        let frac = wins as f64 / pj.len() as f64;
        let auc_j = mean(column(rows, 1.0, Method::Joint, |r| r.auc).into_iter());
        let auc_s = mean(column(rows, 1.0, Method::Separate, |r| r.auc).into_iter());
        pass &= frac >= 0.8 && auc_j >= auc_s;
        detail.push(format!(
            "{name}: power ≥ separate in {wins}/{}, mean AUC {auc_j:.4} vs {auc_s:.4}",
            pj.len()
        ));
    }
    r.line(
        "5",
        pass,
        "pleiotropy gain at g=1",
        format!("{} (need 80% of replicates)", detail.join("; ")),
    );

    let fdr = |rows: &[BenchRow], m: Method| mean(rows.iter().filter(|r| r.method == m).map(|r| r.fdr));
    let fdrs = [
        ("quant joint", fdr(&quant, Method::Joint)),
        ("quant separate", fdr(&quant, Method::Separate)),
        ("binary joint", fdr(&binary, Method::Joint)),
        ("binary separate", fdr(&binary, Method::Separate)),
    ];
    r.line(
        "6",
        fdrs.iter().all(|(_, v)| *v <= 0.25),
        "FDR control at τ=0.2",
        format!(
            "mean empirical FDR {} (limit 0.25, g ∈ {{0, 0.5, 1}}, {secs:.1}s for both benchmarks)",
            fdrs.iter()
                .map(|(k, v)| format!("{k} {v:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

fn criterion_7(r: &mut Report) {
    let start = Instant::now();
    let config = SimConfig {
        g: 0.0,
        seed: 7,
        ..desk_scale(Family::Quant)
    };
    let tests: Vec<(f64, bool)> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let (d1, d2) = sim_pair(&config, i);
            let t = pleiotropy_lrt(&d1, &d2, &FitConfig::default()).unwrap();
            (t.p_value, t.converged())
        })
        .collect();
    let rejected = tests.iter().filter(|t| t.0 < 0.05).count();
    let unconverged = tests.iter().filter(|t| !t.1).count();
    let rate = rejected as f64 / tests.len() as f64;
    r.line(
        "7",
        rate <= 0.07,
        "LRT calibration under H0",
        format!(
            "rejection rate at 0.05 = {rate:.3} ({rejected}/100), limit 0.07; {unconverged} unconverged; {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    );
}

fn run_property<S: Strategy>(
    r: &mut Report,
    id: &str,
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) {
    let mut runner = TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let start = Instant::now();
    let result = runner.run(&strategy, test);
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(()) => r.line(id, true, name, format!("{CASES} cases, {secs:.1}s")),
        Err(e) => r.line(id, false, name, format!("{e}")),
    }
}

fn group_probs() -> impl Strategy<Value = GroupProbs> {
    prop::array::uniform4(1e-6f64..1.0).prop_map(|a| {
        let s: f64 = a.iter().sum();
        GroupProbs::from_array(a.map(|v| v / s))
    })
}

fn small_instance() -> impl Strategy<Value = (u64, usize, usize, Family, usize)> {
    (
        any::<u64>(),
        10usize..40,
        2usize..15,
        prop_oneof![Just(Family::Quant), Just(Family::Binary)],
        1usize..5,
    )
}

fn fixed(iters: usize) -> FitConfig {
    FitConfig {
        max_iter: iters,
        rel_tol: 1e-300,
        ..FitConfig::default()
    }
}

fn criterion_8(r: &mut Report) {
    run_property(
        r,
        "8a",
        "group posterior normalization",
        (
            prop::array::uniform2(-1e3f64..1e3),
            prop::array::uniform2(1e-8f64..10.0),
            prop::array::uniform2(1e-6f64..10.0),
            group_probs(),
        ),
        |(mu, s2, sb, prior)| {
            let g = softmax_groups(group_log_odds(mu, s2, sb, &prior)).expect("finite log-odds");
            let a = g.to_array();
            prop_assert!(a.iter().all(|&v| v >= 0.0), "{a:?}");
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() <= 1e-10, "{a:?}");
            Ok(())
        },
    );

    run_property(
        r,
        "8b",
        "residual-cache consistency",
        small_instance(),
        |(seed, n, p, family, iters)| {
            let (d1, d2) = random_pair(seed, n, p, 2, family);
            let fit = fit_joint(&d1, &d2, &fixed(iters)).unwrap();
            for (k, d) in [&d1, &d2].into_iter().enumerate() {
                let diff = max_abs_diff(&fitted_from_posterior(d, &fit.state, k), &fit.state.fitted[k]);
                prop_assert!(diff < 1e-8, "trait {k}: {diff}");
            }
            Ok(())
        },
    );

    run_property(
        r,
        "8c",
        "permutation equivariance",
        small_instance().prop_flat_map(|inst| {
            let order: Vec<usize> = (0..inst.2).collect();
            (Just(inst), Just(order).prop_shuffle())
        }),
        |((seed, n, p, family, iters), perm)| {
            let (d1, d2) = random_pair(seed, n, p, 2, family);
            let (q1, q2) = (d1.permute_snps(&perm), d2.permute_snps(&perm));
            let mut inverse = vec![0; p];
            for (dst, &src) in perm.iter().enumerate() {
                inverse[src] = dst;
            }
            let base = fit_joint(&d1, &d2, &fixed(iters)).unwrap();
            let moved = fit_joint(
                &q1,
                &q2,
                &FitConfig {
                    sweep_order: Some(inverse),
                    ..fixed(iters)
                },
            )
            .unwrap();
            let (a, b) = (final_elbo(&base), final_elbo(&moved));
            prop_assert!((a - b).abs() <= 1e-8 * a.abs(), "ELBO {a} vs {b}");
            let pa = base.params.group_probs.to_array();
            let pb = moved.params.group_probs.to_array();
            prop_assert!(max_abs_diff(&pa, &pb) < 1e-8);
            prop_assert!(max_abs_diff(&base.params.sigma_beta_sq, &moved.params.sigma_beta_sq) < 1e-8);
            for (dst, &src) in perm.iter().enumerate() {
                for k in 0..2 {
                    prop_assert!((base.state.mu[k][src] - moved.state.mu[k][dst]).abs() < 1e-8);
                    prop_assert!((base.state.s_sq[k][src] - moved.state.s_sq[k][dst]).abs() < 1e-8);
                    prop_assert!((base.lfdr[k][src] - moved.lfdr[k][dst]).abs() < 1e-8);
                }
            }
            Ok(())
        },
    );

    run_property(r, "8d", "Bohning pointwise bound", -50.0f64..50.0, |psi| {
        let (b, c) = bohning_coefficients(psi);
        let bound = |eta: f64| -0.125 * eta * eta + (1.0 + b) * eta - c;
        for i in 0..=400 {
            let eta = -60.0 + 0.3 * i as f64;
            let gap = bound(eta) - log_sigmoid(eta);
            prop_assert!(gap <= 1e-12, "ψ={psi} η={eta}: bound exceeds log σ by {gap}");
        }
        let touch = (bound(psi) - log_sigmoid(psi)).abs();
        prop_assert!(touch <= 1e-12, "ψ={psi}: |bound − log σ| = {touch} at the anchor");
        Ok(())
    });

    let lfdrs = prop::collection::vec(
        prop_oneof![(0u32..=20).prop_map(|v| v as f64 / 20.0), 0.0f64..=1.0],
        0..80,
    );
    run_property(
        r,
        "8e",
        "fdr_select monotone in τ",
        (lfdrs, 0.001f64..0.999, 0.001f64..0.999),
        |(l, t1, t2)| {
            let (lo, hi) = (t1.min(t2), t1.max(t2));
            let small = fdr_select(&l, lo).unwrap();
            let large = fdr_select(&l, hi).unwrap();
            prop_assert!(small.selected.iter().all(|j| large.selected.contains(j)));
            prop_assert!(small.estimated_fdr <= lo && large.estimated_fdr <= hi);
            Ok(())
        },
    );

    let scored = prop::collection::vec((-40i32..40, any::<bool>()), 2..120)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1));
    run_property(r, "8f", "AUC monotone-transform invariance", scored, |v| {
        let s: Vec<f64> = v.iter().map(|x| x.0 as f64 / 4.0).collect();
        let labels: Vec<bool> = v.iter().map(|x| x.1).collect();
        let base = auc(&s, &labels).unwrap();
        let transforms: [fn(f64) -> f64; 3] = [|x| x.exp(), |x| x * x * x + x, |x| 3.0 * x - 7.0];
        for f in transforms {
            let t: Vec<f64> = s.iter().map(|&x| f(x)).collect();
            let other = auc(&t, &labels).unwrap();
            prop_assert!((other - base).abs() <= 1e-12, "{base} vs {other}");
        }
        Ok(())
    });
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and filters from other targets should not run the suite.
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut r = Report { failed: 0 };
    criterion_1(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criteria_4_to_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    println!(
        "acceptance: {} failing line(s), {:.1}s total",
        r.failed,
        start.elapsed().as_secs_f64()
    );
    if r.failed > 0 {
        std::process::exit(1);
    }
}
