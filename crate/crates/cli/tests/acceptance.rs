//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run with `cargo test -p lipdiff --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lipdiff_core::derived::{default_cluster_tol, derived_set_estimate, StepSchedule, Verdict as SetVerdict};
use lipdiff_core::func::{catalog_get, EvaluableMap, MapPair, OpenDomain, Side};
use lipdiff_core::karcher::{
    geometric_mean_two, karcher_mean, karcher_mean_batch, karcher_regularity_pipeline, karcher_residual,
    RegularityConfig, SpdMatrix,
};
use lipdiff_core::par::Exec;
use lipdiff_core::regularity::{
    default_fd_step, fd_jacobian, lipschitz_estimate, FdScheme, LipschitzOptions, LipschitzVerdict,
};
use lipdiff_core::rng;
use lipdiff_core::theorem::{
    chain_rule_check, converse_ift_certify, density_probe, CertificateReason, CertificateStatus, LabConfig,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;
use serde_json::Value;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn pair(name: &str) -> MapPair {
    catalog_get(name).unwrap().into_pair().unwrap()
}

fn scenario(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run_cli(path: &Path) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_lipdiff")).arg("run").arg(path).output().unwrap();
    (out.status.code().unwrap_or(-1), serde_json::from_slice(&out.stdout).unwrap_or(Value::Null))
}

fn random_spd<R: Rng>(r: &mut R, d: usize, shift: f64) -> SpdMatrix {
    let b = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    SpdMatrix::new(&b * b.transpose() + DMatrix::identity(d, d) * shift).unwrap()
}

fn ac1_counterexample() -> Check {
    let (code, json) = run_cli(&scenario("cube-certify.json"));
    ensure!(code == 2, "cube certify exit code {code}");
    ensure!(json["reason"] == "jacobian-singular", "reason {}", json["reason"]);
    let sigma_min = json["report"]["jacobian"]["invertibility"]["sigma_min"].as_f64().unwrap();
    ensure!(sigma_min <= 1e-10, "sigma_min {sigma_min:e}");

    let root = pair("cube").f().clone();
    let est = lipschitz_estimate(&root, &v(&[0.0]), &LipschitzOptions::new(vec![1e-2, 1e-4, 1e-6])).unwrap();
    let growth = est.profile[2].estimate / est.profile[0].estimate;
    ensure!(est.verdict == LipschitzVerdict::Blowup, "verdict {:?}", est.verdict);
    ensure!(growth >= 100.0, "M(1e-6)/M(1e-2) = {growth}");
    Ok(format!("exit 2 (jacobian-singular), sigma_min = {sigma_min:.1e}, M(1e-6)/M(1e-2) = {growth:.1}"))
}

fn ac2_theorem_conclusion() -> Check {
    let cfg = LabConfig::default();
    let mut worst: f64 = 0.0;
    for (k, (name, dim, lo, hi)) in
        [("exp-log", 1, -0.9, 0.9), ("affine", 2, -2.0, 2.0), ("shear", 2, -1.0, 1.0)].into_iter().enumerate()
    {
        let p = pair(name);
        let mut r = rng::rng(100 + k as u64);
        for _ in 0..10 {
            let x = DVector::from_fn(dim, |_, _| r.random_range(lo..hi));
            let c = converse_ift_certify(&p, &x, &cfg).map_err(|e| format!("{name}: {e}"))?;
            ensure!(c.is_certified(), "{name} at {:?}: {:?}", x.as_slice(), c.reason);
            let jg = fd_jacobian(p.g(), &x, default_fd_step(), FdScheme::Central).unwrap().matrix;
            let jf = fd_jacobian(p.f(), &p.g().evaluate(&x).unwrap(), default_fd_step(), FdScheme::Central)
                .unwrap()
                .matrix;
            let inv = jg.try_inverse().ok_or(format!("{name}: singular"))?;
            let rel = (&jf - &inv).norm() / inv.norm();
            ensure!(rel <= 1e-5, "{name}: relative inverse gap {rel:e}");
            worst = worst.max(rel);
        }
    }
    Ok(format!("30/30 certified, max relative gap {worst:.1e}"))
}

fn ac3_chain_rule() -> Check {
    let cfg = LabConfig::default();
    let cases = [
        ("exp-log", v(&[0.2]), v(&[1.0])),
        ("exp-log", v(&[-0.5]), v(&[-2.0])),
        ("affine", v(&[0.3, -0.7]), v(&[1.0, 1.0])),
        ("shear", v(&[0.3, -0.2]), v(&[1.0, 0.5])),
        ("shear", v(&[-0.4, 0.8]), v(&[0.0, -1.0])),
        ("cube", v(&[0.5]), v(&[1.0])),
    ];
    let mut worst: f64 = 0.0;
    for (name, x, dir) in cases {
        let r = chain_rule_check(&pair(name), &x, &dir, &cfg.schedule, default_cluster_tol(&dir), &cfg)
            .map_err(|e| format!("{name}: {e}"))?;
        ensure!(r.lhs.verdict == SetVerdict::Singleton, "{name}: lhs {:?}", r.lhs.verdict);
        ensure!(r.hausdorff_gap <= 1e-6, "{name}: gap {:e}", r.hausdorff_gap);
        worst = worst.max(r.hausdorff_gap);
    }
    let s = StepSchedule::new(0.1, 0.7, 46).unwrap();
    let r = chain_rule_check(&pair("tsinlog-chain"), &v(&[0.0]), &v(&[1.0]), &s, 0.05, &cfg).map_err(|e| e.to_string())?;
    ensure!(r.lhs.verdict == SetVerdict::Multivalued && r.rhs.verdict == SetVerdict::Multivalued, "tsinlog verdicts");
    let hull = r.hull_gap.ok_or("no hull")?;
    ensure!(hull <= 0.05, "tsinlog hull gap {hull}");
    Ok(format!("smooth max gap {worst:.1e}; tsinlog both multivalued, hull gap {hull:.1e}"))
}

fn ac4_derived_set_oracle() -> Check {
    let f = catalog_get("tsinlog").unwrap().into_map(Side::G);
    let s = StepSchedule::new(0.1, 0.7, 46).unwrap();
    let sample = derived_set_estimate(&f, &v(&[0.0]), &v(&[1.0]), &s, 0.05).map_err(|e| e.to_string())?;
    let (lo, hi) = sample.hull().ok_or("empty hull")?;
    let (lo, hi) = (lo[0], hi[0]);
    ensure!(lo <= -0.9 && hi >= 0.9, "hull [{lo}, {hi}] misses [-0.9, 0.9]");
    ensure!(lo >= -1.001 && hi <= 1.001, "hull [{lo}, {hi}] exceeds [-1.001, 1.001]");
    // oracle: sin(log t) evaluated directly on the same tail steps
    let tail: Vec<f64> = s.steps()[s.tail_start()..].iter().map(|t| t.ln().sin()).collect();
    let olo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let ohi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure!((olo - lo).abs() <= 1e-12 && (ohi - hi).abs() <= 1e-12, "oracle [{olo}, {ohi}] vs [{lo}, {hi}]");
    Ok(format!("hull [{lo:.4}, {hi:.4}] matches direct evaluation"))
}

fn ac5_density_probe() -> Check {
    let cfg = LabConfig::default();
    let r = density_probe(&pair("exp-log"), &v(&[0.0]), &v(&[1.0]), &cfg.schedule, &cfg).map_err(|e| e.to_string())?;
    ensure!(r.trace.iter().all(|e| e.step1_residual <= 1e-9), "step 1 residual {:e}", r.max_step1_residual);
    ensure!(r.gap_decreasing, "gap not monotone");
    let last = r.trace.last().unwrap().step2_gap;
    ensure!(last <= 1e-4, "final gap {last:e}");

    let c = density_probe(&pair("cube"), &v(&[0.0]), &v(&[1.0]), &cfg.schedule, &cfg).map_err(|e| e.to_string())?;
    ensure!(!c.bound_check_passed, "cube bound check passed");
    ensure!(c.zt_unbounded, "cube z_t not flagged unbounded");
    let growth = c.max_zt / c.trace[0].z_norm;
    ensure!(growth >= 100.0, "cube z_t growth {growth}");
    Ok(format!(
        "exp-log step-1 max {:.1e}, final gap {last:.1e}; cube bound fails, max|z_t| = {:.1e}",
        r.max_step1_residual, c.max_zt
    ))
}

fn sharp_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let pow = |m: &DMatrix<f64>, p: f64| {
        let e = m.clone().symmetric_eigen();
        &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(|x| x.powf(p))) * e.eigenvectors.transpose()
    };
    let (ah, aih) = (pow(a, 0.5), pow(a, -0.5));
    let inner = &aih * b * &aih;
    &ah * pow(&((&inner + inner.transpose()) * 0.5), 0.5) * &ah
}

fn ac6_karcher_oracle() -> Check {
    let mut r = rng::rng(6);
    let problems: Vec<Vec<SpdMatrix>> = (0..50)
        .map(|i| {
            let d = 2 + i % 5;
            vec![random_spd(&mut r, d, 0.1), random_spd(&mut r, d, 0.1)]
        })
        .collect();
    let mut worst_rel: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for (ops, trace) in problems.iter().zip(karcher_mean_batch(&problems, 1e-10, 500, Exec::default())) {
        let trace = trace.map_err(|e| e.to_string())?;
        ensure!(trace.converged, "no convergence for d = {}", ops[0].size());
        ensure!(trace.final_residual() <= 1e-10, "residual {:e}", trace.final_residual());
        let mean = trace.mean().unwrap();
        let oracle = sharp_oracle(ops[0].as_matrix(), ops[1].as_matrix());
        let rel = (mean.as_matrix() - &oracle).norm() / oracle.norm();
        ensure!(rel <= 1e-8, "relative gap {rel:e}");
        let sharp = geometric_mean_two(&ops[0], &ops[1]).unwrap();
        ensure!(karcher_residual(&sharp, ops).unwrap().norm <= 1e-10, "A#B residual");
        worst_rel = worst_rel.max(rel);
        worst_res = worst_res.max(trace.final_residual());
    }
    Ok(format!("50 pairs, max relative gap {worst_rel:.1e}, max residual {worst_res:.1e}"))
}

fn ac7_karcher_regularity() -> Check {
    let mut r = rng::rng(7);
    let fixed = [random_spd(&mut r, 3, 0.5), random_spd(&mut r, 3, 0.5)];
    let y0 = random_spd(&mut r, 3, 0.5);
    let run = karcher_regularity_pipeline(&fixed, &y0, &RegularityConfig::default()).map_err(|e| e.to_string())?;
    let c = &run.certificate;
    ensure!(c.status == CertificateStatus::Certified, "status {:?} reason {:?}", c.status, c.reason);
    ensure!(c.jacobian.invertibility.invertible, "jacobian singular");
    ensure!(run.condition_number.is_finite(), "condition {}", run.condition_number);
    let cons = c.inverse_consistency.ok_or("no consistency figure")?;
    ensure!(cons <= 1e-4, "consistency {cons:e}");
    ensure!(c.reason != Some(CertificateReason::InverseInconsistent), "inconsistent");
    Ok(format!("certified, condition {:.3}, inverse consistency {cons:.1e}", run.condition_number))
}

fn ac8_invariants() -> Check {
    let mut runner = TestRunner::new(Config { cases: 32, failure_persistence: None, ..Config::default() });

    // linear-map derived-set oracle
    runner
        .run(&(1usize..4, 1usize..4, any::<u64>()), |(m, n, seed)| {
            let mut r = rng::rng(seed);
            let l = DMatrix::from_fn(m, n, |_, _| r.random_range(-2.0..2.0));
            let y = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
            let dir = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
            prop_assume!(dir.norm() > 1e-3);
            let lv = &l * &dir;
            let map = EvaluableMap::new("linear", OpenDomain::whole(n).unwrap(), m, move |x| &l * x);
            let s = StepSchedule::new(0.2, 0.7, 6).unwrap();
            let sample = derived_set_estimate(&map, &y, &dir, &s, default_cluster_tol(&dir)).unwrap();
            prop_assert_eq!(sample.verdict, SetVerdict::Singleton);
            prop_assert!(sample.clusters[0].spread <= 1e-12);
            prop_assert!((sample.limit().unwrap() - &lv).norm() <= 1e-12 * (1.0 + lv.norm()));
            Ok(())
        })
        .map_err(|e| format!("linear-map oracle: {e}"))?;

    // Lipschitz scaling law, exact for power-of-two factors
    runner
        .run(&(-8i32..9, any::<bool>(), any::<u64>()), |(k, neg, seed)| {
            let c = if neg { -(2f64.powi(k)) } else { 2f64.powi(k) };
            let f = pair("shear").f().clone();
            let opts = LipschitzOptions { seed, pairs_per_radius: 64, ..LipschitzOptions::new(vec![0.5, 0.05]) };
            let a = lipschitz_estimate(&f, &v(&[0.1, 0.2]), &opts).unwrap();
            let b = lipschitz_estimate(&f.scaled(c), &v(&[0.1, 0.2]), &opts).unwrap();
            for (p, q) in a.profile.iter().zip(&b.profile) {
                prop_assert_eq!(q.estimate, c.abs() * p.estimate);
            }
            Ok(())
        })
        .map_err(|e| format!("Lipschitz scaling: {e}"))?;

    // Karcher permutation invariance and idempotence
    runner
        .run(&(any::<u64>(), 1usize..5, 2usize..5), |(seed, d, n)| {
            let mut r = rng::rng(seed);
            let ops: Vec<SpdMatrix> = (0..n).map(|_| random_spd(&mut r, d, 0.5)).collect();
            let mut perm = ops.clone();
            perm.reverse();
            let a = karcher_mean(&ops, 1e-12, 500).unwrap().mean().unwrap();
            let b = karcher_mean(&perm, 1e-12, 500).unwrap().mean().unwrap();
            prop_assert!(a.frobenius_distance(&b) <= 1e-9);
            let same = karcher_mean(&vec![ops[0].clone(); n], 1e-12, 500).unwrap().mean().unwrap();
            prop_assert!(same.frobenius_distance(&ops[0]) <= 1e-10);
            Ok(())
        })
        .map_err(|e| format!("Karcher permutation/idempotence: {e}"))?;

    // CLI determinism
    let mut det = TestRunner::new(Config { cases: 4, failure_persistence: None, ..Config::default() });
    det.run(&prop::sample::select(vec!["shear-certify.json", "cube-root-lipschitz.json", "karcher-mean.json"]), |name| {
        let strip = |mut j: Value| {
            j.as_object_mut().unwrap().remove("wall_time_ms");
            j
        };
        let (c1, a) = run_cli(&scenario(name));
        let (c2, b) = run_cli(&scenario(name));
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(strip(a), strip(b));
        Ok(())
    })
    .map_err(|e| format!("CLI determinism: {e}"))?;

    Ok("linear-map oracle, Lipschitz scaling, Karcher permutation/idempotence, CLI determinism".into())
}

fn main() {
    let criteria: [(&str, &str, fn() -> Check); 8] = [
        ("AC1", "counterexample refutation", ac1_counterexample),
        ("AC2", "theorem conclusion", ac2_theorem_conclusion),
        ("AC3", "chain rule", ac3_chain_rule),
        ("AC4", "derived-set oracle", ac4_derived_set_oracle),
        ("AC5", "density probe", ac5_density_probe),
        ("AC6", "Karcher n=2 oracle", ac6_karcher_oracle),
        ("AC7", "Karcher regularity", ac7_karcher_regularity),
        ("AC8", "invariant suites", ac8_invariants),
    ];
    let mut failed = 0;
    for (id, title, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("{id} PASS {title} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {title} ({secs:.2}s): {detail}");
            }
        }
    }
    println!("acceptance: {}/8 passed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
