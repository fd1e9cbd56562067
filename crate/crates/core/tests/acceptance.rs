//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use ota_coord::linalg::{downdate_remove_device, gram_inverse};
use ota_coord::sim::{checktime_sweep, run_sweep, sweep_trials, Fading, Solver, SweepAxis, SweepSpec};
use ota_coord::tree::{enumerate_feasible, exhaustive_optimum, golden_lines};
use ota_coord::zf::{zf_closed_form_error, zf_receiver_for_subset};
use ota_coord::{example_network, mmse, to_db, zf, CoordinationProblem, DeviceSubset, Mode};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

/// Instances with strong path-loss spread, where the weakest device often
/// dominates.
fn asymmetric_instance(rng: &mut ChaCha8Rng) -> CoordinationProblem {
    let l = rng.random_range(2..=6usize);
    let pathloss: Vec<f64> = (0..l).map(|_| 10f64.powf(-rng.random_range(0.0..1.5))).collect();
    let h = random_channel(rng, 2 * l, &pathloss);
    let snr_db: f64 = rng.random_range(0.0..30.0);
    CoordinationProblem::new(h, vec![1.0 / l as f64; l], 1.0, 10f64.powf(-snr_db / 10.0)).unwrap()
}

fn shortcut_equivalence() -> Outcome {
    const WANTED: usize = 100;
    const MAX_DRAWS: usize = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut zf_n, mut mmse_n, mut worst, mut draws) = (0, 0, 0.0f64, 0);
    while (zf_n < WANTED || mmse_n < WANTED) && draws < MAX_DRAWS {
        draws += 1;
        let p = asymmetric_instance(&mut rng);
        if zf_n < WANTED {
            if let Some(s) = zf::closed_form_shortcut(&p) {
                let opt = exhaustive_optimum(&p, Mode::Zf).unwrap();
                worst = worst.max(rel(s.error, opt.error));
                zf_n += 1;
            }
        }
        if mmse_n < WANTED {
            if let Some(s) = mmse::closed_form_shortcut(&p) {
                let opt = exhaustive_optimum(&p, Mode::Mmse).unwrap();
                worst = worst.max(rel(s.error, opt.error));
                mmse_n += 1;
            }
        }
    }
    outcome(
        zf_n == WANTED && mmse_n == WANTED && worst <= 1e-9,
        format!("{zf_n} zf + {mmse_n} mmse filtered instances from {draws} draws, worst relative gap {worst:.2e}"),
    )
}

fn dual_formula() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut n, mut worst) = (0, 0.0f64);
    while n < 1000 {
        let l = rng.random_range(1..=6);
        let antennas = rng.random_range(l..=2 * l);
        let p = random_general_problem(&mut rng, antennas, l);
        let feasible = enumerate_feasible(&p, Mode::Zf).unwrap();
        let Some(entry) = feasible.choose(&mut rng) else { continue };
        let closed = zf_closed_form_error(&p, entry.subset).unwrap();
        let m = zf_receiver_for_subset(&p, entry.subset).unwrap();
        worst = worst.max(rel(closed, p.noise_variance() * norm_sqr(&m)));
        n += 1;
    }
    outcome(worst <= 1e-10, format!("1000 feasible subsets, worst relative gap {worst:.2e}"))
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let (mut pairs, mut worst) = (0usize, f64::NEG_INFINITY);
    for _ in 0..100 {
        let p = random_general_problem(&mut rng, 10, 5);
        for mode in [Mode::Zf, Mode::Mmse] {
            let f = enumerate_feasible(&p, mode).unwrap();
            for a in &f {
                for b in &f {
                    if a.subset.is_strict_subset_of(b.subset) {
                        pairs += 1;
                        worst = worst.max((a.error - b.error) / b.error);
                    }
                }
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{pairs} nested feasible pairs, largest relative excess {worst:.2e}"),
    )
}

fn structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut failures = Vec::new();
    let (mut max_dev, mut zf_dev, mut span_dev, mut two_device_checks) = (0.0f64, 0.0f64, 0.0f64, 0);
    for i in 0..300 {
        let p = if i % 2 == 0 {
            let snr_db: f64 = rng.random_range(-10.0..30.0);
            random_problem(&mut rng, 8, 4, 10f64.powf(-snr_db / 10.0))
        } else {
            random_general_problem(&mut rng, 8, 4)
        };
        for mode in [Mode::Zf, Mode::Mmse] {
            let opt = exhaustive_optimum(&p, mode).unwrap();
            let ratio: Vec<f64> = opt.scalings.iter().map(|b| b.norm_sqr() / p.power()).collect();
            let peak = ratio.iter().cloned().fold(0.0, f64::max);
            max_dev = max_dev.max((peak - 1.0).abs());
            if !ratio.iter().any(|r| *r >= 1.0 - 1e-9) {
                failures.push(format!("instance {i} {mode:?}: no device at full power"));
            }
            let proj = p.projections(&opt.receiver);
            for (l, r) in ratio.iter().enumerate() {
                if *r < 1.0 - 1e-9 {
                    let miss = (proj[l] * opt.scalings[l] - p.weights()[l]).norm() / p.weights()[l];
                    zf_dev = zf_dev.max(miss);
                }
            }
            if mode == Mode::Mmse {
                let members: Vec<usize> = opt.subset.iter().collect();
                let r = span_residual(&p, &members, &opt.receiver);
                span_dev = span_dev.max(norm_sqr(&r).sqrt() / norm_sqr(&opt.receiver).sqrt());
            }
        }
        // the two-device claim needs equal weights
        if i % 2 == 0 && zf::closed_form_shortcut(&p).is_none() {
            two_device_checks += 1;
            let opt = exhaustive_optimum(&p, Mode::Zf).unwrap();
            if opt.subset.len() < 2 {
                failures.push(format!("instance {i}: single-device ZF optimum without dominant device"));
            }
        }
    }
    let pass = failures.is_empty() && max_dev <= 1e-9 && zf_dev <= 1e-9 && span_dev < 1e-9;
    let mut detail = format!(
        "600 optima: peak power deviation {max_dev:.1e}, zero-forcing miss {zf_dev:.1e}, span residual {span_dev:.1e}, {two_device_checks} multi-device checks"
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; {} failures, first: {f}", failures.len()));
    }
    outcome(pass, detail)
}

fn reference_sweep(grid: Vec<f64>, solvers: Vec<Solver>, seed: u64) -> SweepSpec {
    SweepSpec {
        axis: SweepAxis::SnrDb,
        grid,
        trials: 10_000,
        devices: 4,
        antennas: 8,
        fading: Fading::Real,
        solvers,
        seed,
        ..SweepSpec::default()
    }
}

fn error_vs_snr() -> Outcome {
    let start = Instant::now();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let r = single
        .install(|| run_sweep(&reference_sweep(vec![-10.0, 10.0], Solver::ALL.to_vec(), 105)))
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let db = |snr: f64, s: Solver| r.point(snr, s).unwrap().mean_error_db;
    let checks = [
        (db(10.0, Solver::ZfOpt), -14.00),
        (db(10.0, Solver::MmseOpt), -14.72),
        (db(10.0, Solver::Azf), -13.95),
        (db(10.0, Solver::Ammse), -14.70),
        (db(-10.0, Solver::MmseOpt), -6.41),
    ];
    let pass = checks.iter().all(|(v, t)| within(*v, *t, 0.3)) && secs < 300.0;
    outcome(
        pass,
        format!(
            "10 dB: zf-opt {:.2}, mmse-opt {:.2}, azf {:.2}, ammse {:.2}; -10 dB: mmse-opt {:.2} (dB); {secs:.0} s single-threaded",
            checks[0].0, checks[1].0, checks[2].0, checks[3].0, checks[4].0
        ),
    )
}

fn asymmetric_pathloss() -> Outcome {
    let mut spec = reference_sweep(vec![-10.0], vec![Solver::ZfOpt, Solver::MmseOpt], 106);
    spec.pathloss = vec![0.1, 1.0, 1.0, 1.0];
    let r = run_sweep(&spec).unwrap();
    let zf_db = r.point(-10.0, Solver::ZfOpt).unwrap().mean_error_db;
    let mmse_db = r.point(-10.0, Solver::MmseOpt).unwrap().mean_error_db;
    let pass = within(zf_db, 19.26, 0.5) && within(mmse_db, -6.32, 0.5) && zf_db - mmse_db > 20.0;
    outcome(
        pass,
        format!("-10 dB: zf-opt {zf_db:.2} dB, mmse-opt {mmse_db:.2} dB, gap {:.2} dB", zf_db - mmse_db),
    )
}

fn check_time() -> Outcome {
    let grid: Vec<f64> = (-5..=15).map(|k| 2.0 * k as f64).collect();
    let spec = reference_sweep(grid.clone(), vec![Solver::Azf, Solver::Ammse], 107);
    let trials = sweep_trials(&spec).unwrap();
    let flat = (0..spec.trials as usize).all(|t| {
        let c = trials[0].records[0][t].check_count;
        trials.iter().all(|pt| pt.records[0][t].check_count == c)
    });
    let r = checktime_sweep(&spec).unwrap();
    let azf: Vec<f64> = grid.iter().map(|&g| r.point(g, Solver::Azf).unwrap().mean_check_count).collect();
    let ammse_low: Vec<f64> = grid
        .iter()
        .filter(|&&g| g <= -4.0)
        .map(|&g| r.point(g, Solver::Ammse).unwrap().mean_check_count)
        .collect();

    let load = SweepSpec {
        axis: SweepAxis::Load,
        grid: vec![8.0],
        snr_db: 10.0,
        ..reference_sweep(vec![], vec![Solver::Azf, Solver::Ammse], 108)
    };
    let lr = checktime_sweep(&load).unwrap();
    let load_azf = lr.point(8.0, Solver::Azf).unwrap().mean_check_count;
    let load_ammse = lr.point(8.0, Solver::Ammse).unwrap().mean_check_count;

    let pass = flat
        && azf.iter().all(|c| (6.6..=7.0).contains(c))
        && ammse_low.iter().all(|c| within(*c, 5.0, 0.02))
        && load_azf <= 5.1
        && load_ammse <= 5.1;
    outcome(
        pass,
        format!(
            "azf {:.3} (per-trial flat: {flat}), ammse at <= -4 dB {:.3}..{:.3}, load 8: azf {load_azf:.3}, ammse {load_ammse:.3}",
            azf[0],
            ammse_low.iter().cloned().fold(f64::INFINITY, f64::min),
            ammse_low.iter().cloned().fold(0.0, f64::max),
        ),
    )
}

fn downdate_chains() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let (mut worst, mut steps) = (0.0f64, 0);
    for _ in 0..1000 {
        let l = rng.random_range(2..=8);
        let n = rng.random_range(l..=2 * l);
        let p = random_general_problem(&mut rng, n, l);
        let lambda = if rng.random_bool(0.5) { 0.0 } else { p.noise_to_power() };
        let mut state = gram_inverse(&p, DeviceSubset::full(l), lambda).unwrap();
        let mut order: Vec<usize> = (0..l).collect();
        order.shuffle(&mut rng);
        for &d in &order[..l - 1] {
            state = downdate_remove_device(&state, &p, d).unwrap();
            let fresh = gram_inverse(&p, state.subset(), lambda).unwrap();
            worst = worst.max(state.inverse().relative_distance(fresh.inverse()));
            steps += 1;
        }
    }
    outcome(worst <= 1e-8, format!("1000 chains, {steps} downdates, worst relative Frobenius {worst:.2e}"))
}

fn greedy_gap() -> Outcome {
    let spec = SweepSpec {
        grid: vec![10.0],
        trials: 10_000,
        solvers: Solver::ALL.to_vec(),
        seed: 110,
        ..SweepSpec::default()
    };
    let trials = sweep_trials(&spec).unwrap();
    let rec = &trials[0].records;
    let dominated = (0..10_000).all(|t| {
        rec[0][t].error >= rec[2][t].error * (1.0 - 1e-12) && rec[1][t].error >= rec[3][t].error * (1.0 - 1e-12)
    });
    let mean = |s: usize| rec[s].iter().map(|r| r.error).sum::<f64>() / rec[s].len() as f64;
    let zf_gap = to_db(mean(0)) - to_db(mean(2));
    let mmse_gap = to_db(mean(1)) - to_db(mean(3));
    outcome(
        dominated && zf_gap <= 0.1 && mmse_gap <= 0.1,
        format!("per-trial dominance: {dominated}; mean gap azf {zf_gap:.3} dB, ammse {mmse_gap:.3} dB"),
    )
}

fn golden_file() -> Outcome {
    let p = example_network(0.1);
    let a = enumerate_feasible(&p, Mode::Zf).unwrap();
    let b = enumerate_feasible(&p, Mode::Zf).unwrap();
    let golden = include_str!("golden/example_network_zf.txt");
    let expected: Vec<(u64, f64)> = golden
        .lines()
        .map(|l| {
            let (m, e) = l.split_once(' ').unwrap();
            (m.parse().unwrap(), e.parse().unwrap())
        })
        .collect();
    let matches = a.len() == expected.len()
        && a.iter().zip(&expected).all(|(x, (m, e))| x.subset.bits() == *m && rel(x.error, *e) <= 1e-9);
    let stable = golden_lines(&a) == golden_lines(&b);
    let root = a.iter().any(|e| e.subset == DeviceSubset::full(4));
    outcome(
        matches && stable && root,
        format!("{} feasible subsets, golden match {matches}, stable {stable}, root feasible {root}", a.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("shortcut equals exhaustive optimum", shortcut_equivalence),
        ("closed-form ZF error equals noise times receiver norm", dual_formula),
        ("nested feasible subsets have ordered errors", monotonicity),
        ("structure of exhaustive optima", structure),
        ("error against SNR, equal path loss", error_vs_snr),
        ("error with one weak device", asymmetric_pathloss),
        ("check time against SNR and load", check_time),
        ("downdates agree with fresh inversion", downdate_chains),
        ("greedy against exhaustive", greedy_gap),
        ("example network golden enumeration", golden_file),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
