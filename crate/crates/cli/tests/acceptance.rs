//! Acceptance suite. Prints one PASS/FAIL line per criterion with the
//! measured value and the wall time against its budget.
//!
//! Three criteria fail as stated and are run literally anyway:
//!
//! - 3: exchange dominates direct only for small total occupation; strictly
//!   fractional matrices with large trace have `X < D` (the `tr γ ≤ 1`
//!   variant is printed alongside).
//! - 8: with one electron per orbital H₂ behaves like the triplet and does not
//!   bind at short range (occupations up to 2 are printed alongside).
//! - 9: a separated pair of neutral atoms approaches the asymptote itself,
//!   not the asymptote plus `1/R`.
//!
//! The runner fails if any other criterion fails, or if one of these starts
//! passing.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use muller_core::checks::{
    fractional_slacks, free_and_exchange_bounds, gradient_audits, lieb_thirring_minimizers, projection_oracle_errors,
    rank_one_errors, Occupations,
};
use muller_core::energy::default_lieb_thirring_constant;
use muller_core::experiments::{atom_system, dissociation_scan, refine_curve_minimum, united_atom_check, ExperimentOptions};
use muller_core::solver::{minimize_system, SolveOptions};
use muller_core::thomas_fermi::{default_kinetic_prefactor, tf_atom, tf_gamma_estimate, tf_universal_slope, TfGridSpec};

const LITERAL_FAILURES: [u32; 3] = [3, 8, 9];
const SEED: u64 = 20_240_601;

struct Outcome {
    id: u32,
    pass: bool,
}

fn report(id: u32, title: &str, pass: bool, detail: String, elapsed: Duration, budget: f64) -> Outcome {
    let secs = elapsed.as_secs_f64();
    let pass = pass && secs < budget;
    println!(
        "criterion {id:>2} {} {title}: {detail} [{secs:.1} s, budget {budget} s]",
        if pass { "PASS" } else { "FAIL" }
    );
    Outcome { id, pass }
}

fn info(title: &str, detail: String) {
    println!("     info    {title}: {detail}");
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `χ'(0)` by shooting on `χ'' = χ^{3/2}/√x` rewritten in `t = √x`, where
/// it becomes the smooth system `dχ/dt = 2tψ`, `dψ/dt = 2χ^{3/2}`, and
/// integrated with classical RK4 at step `dt`.
fn shooting_oracle(dt: f64) -> f64 {
    let shoot = |s: f64| -> bool {
        let f = |t: f64, y: [f64; 2]| [2.0 * t * y[1], 2.0 * y[0].max(0.0).powf(1.5)];
        let (mut t, mut y) = (0.0, [1.0, s]);
        while t < 40.0 {
            let k1 = f(t, y);
            let k2 = f(t + dt / 2.0, [y[0] + dt / 2.0 * k1[0], y[1] + dt / 2.0 * k1[1]]);
            let k3 = f(t + dt / 2.0, [y[0] + dt / 2.0 * k2[0], y[1] + dt / 2.0 * k2[1]]);
            let k4 = f(t + dt, [y[0] + dt * k3[0], y[1] + dt * k3[1]]);
            for i in 0..2 {
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            t += dt;
            if y[0] < 0.0 {
                return true;
            }
            if y[1] > 0.0 {
                return false;
            }
        }
        false
    };
    let (mut lo, mut hi) = (-1.7, -1.5);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if shoot(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn relaxed(shift: bool, cap: f64) -> ExperimentOptions {
    let mut o = ExperimentOptions::default();
    o.solve = SolveOptions {
        occupation_cap: cap,
        ..SolveOptions::relaxed(shift)
    };
    o
}

fn h2_binding(cap: f64) -> (f64, f64, f64, bool, bool) {
    let r_list: Vec<f64> = (0..=14).map(|i| 0.6 + 0.4 * i as f64).collect();
    let opts = relaxed(true, cap);
    let curve = dissociation_scan(1.0, 1.0, 2.0, (1.0, 1.0), &r_list, &opts).unwrap();
    let m = refine_curve_minimum(&curve, &opts).unwrap();
    let converged = m.converged && curve.points.iter().all(|p| p.converged);
    (m.r_star, m.energy - curve.asymptote, curve.asymptote, m.dissociative, converged)
}

fn criterion_1_2(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let samples = free_and_exchange_bounds(500, SEED).unwrap();
    let elapsed = t.elapsed();
    let free = min(&samples.iter().map(|s| s.free_slack).collect::<Vec<_>>());
    out.push(report(1, "free lower bound", free >= -1e-9, format!("min slack {free:.3e} over 500 matrices"), elapsed, 30.0));
    let exch = min(&samples.iter().flat_map(|s| s.exchange_slacks.iter().map(|e| e.1)).collect::<Vec<_>>());
    out.push(report(
        2,
        "exchange bound",
        exch >= -1e-9,
        format!("min slack {exch:.3e} over 500 matrices x 3 epsilons"),
        elapsed,
        30.0,
    ));
}

fn criterion_3(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let rank_one = max(&rank_one_errors(100, SEED).unwrap());
    let fractional = min(&fractional_slacks(100, SEED, Occupations::StrictlyFractional).unwrap());
    let elapsed = t.elapsed();
    out.push(report(
        3,
        "rank-one identity and fractional dominance",
        rank_one <= 1e-10 && fractional >= -1e-10,
        format!("max rank-one error {rank_one:.3e}, min X - D {fractional:.3e}"),
        elapsed,
        10.0,
    ));
    let unit = min(&fractional_slacks(100, SEED, Occupations::FractionalUnitTrace).unwrap());
    info("fractional dominance with tr γ ≤ 1", format!("min X - D {unit:.3e}"));
}

fn criterion_4(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let err = max(&gradient_audits(20, SEED, 6).unwrap());
    out.push(report(4, "gradient audit", err < 1e-6, format!("max relative error {err:.3e}"), t.elapsed(), 60.0));
}

fn criterion_5(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let err = max(&projection_oracle_errors(200, SEED).unwrap());
    out.push(report(5, "capped-simplex projection", err <= 1e-8, format!("max deviation {err:.3e}"), t.elapsed(), 5.0));
}

fn criterion_6(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let res = minimize_system(&atom_system(1.0, 8).unwrap(), 1.0, &SolveOptions::default()).unwrap();
    let e = res.breakdown.total_electronic;
    out.push(report(
        6,
        "hydrogen atom",
        res.converged && (-1.46..=-0.49).contains(&e),
        format!("E = {e:.8}, converged = {}", res.converged),
        t.elapsed(),
        10.0,
    ));
}

fn criterion_7(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let opts = ExperimentOptions {
        solve: SolveOptions::default(),
        ..ExperimentOptions::default()
    };
    let rep = united_atom_check(1.0, 1.0, 2.0, &[1.0, 1.4, 2.0], &opts).unwrap();
    let slacks: Vec<f64> = rep.points.iter().map(|p| p.slack).collect();
    let converged = rep.united_converged && rep.points.iter().all(|p| p.converged);
    out.push(report(
        7,
        "united atom bound",
        converged && min(&slacks) >= -1e-6,
        format!("E_ua = {:.6}, slacks {:?}", rep.united_energy, slacks.iter().map(|s| format!("{s:.4e}")).collect::<Vec<_>>()),
        t.elapsed(),
        60.0,
    ));
}

fn criterion_8(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let (r_star, margin, asymptote, dissociative, converged) = h2_binding(1.0);
    out.push(report(
        8,
        "H2 binding",
        converged && margin < -1e-3 && r_star > 0.5 && r_star < 4.0,
        format!("R* = {r_star:.4}, E* - asymptote = {margin:.4e}, asymptote = {asymptote:.6}, dissociative = {dissociative}"),
        t.elapsed(),
        300.0,
    ));
    let t = Instant::now();
    let (r_star, margin, asymptote, _, converged) = h2_binding(2.0);
    info(
        "H2 binding with occupations up to 2",
        format!(
            "R* = {r_star:.4}, E* - asymptote = {margin:.4e}, asymptote = {asymptote:.6}, converged = {converged} [{:.1} s]",
            t.elapsed().as_secs_f64()
        ),
    );
}

fn criterion_9(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let curve = dissociation_scan(1.0, 1.0, 2.0, (1.0, 1.0), &[50.0], &relaxed(true, 1.0)).unwrap();
    let p = curve.points[0];
    let total = p.value(true);
    let dev = (total - (curve.asymptote + 1.0 / p.r)).abs();
    out.push(report(
        9,
        "large-R additivity",
        p.converged && dev <= 1e-3,
        format!("|total - (asymptote + 1/R)| = {dev:.4e}"),
        t.elapsed(),
        30.0,
    ));
    info("large-R additivity without 1/R", format!("|total - asymptote| = {:.3e}", (total - curve.asymptote).abs()));
}

fn criterion_10(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let sys = atom_system(1.0, 6).unwrap();
    let one = minimize_system(&sys, 1.0, &SolveOptions::relaxed(false)).unwrap();
    let three = minimize_system(&sys, 3.0, &SolveOptions::relaxed(true)).unwrap();
    out.push(report(
        10,
        "trace saturation",
        one.converged && three.converged && (one.trace_at_solution - 1.0).abs() <= 1e-6 && three.trace_at_solution < 3.0,
        format!("tr(N=1) = {:.10}, tr(N=3, shifted) = {:.6}", one.trace_at_solution, three.trace_at_solution),
        t.elapsed(),
        30.0,
    ));
}

fn criterion_11(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let slope = tf_universal_slope().unwrap();
    let oracle = shooting_oracle(5e-4);
    let ck = default_kinetic_prefactor();
    let scaled: Vec<f64> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&z: &f64| tf_atom(z, z, ck).unwrap().energy / z.powf(7.0 / 3.0))
        .collect();
    let spread = (max(&scaled) - min(&scaled)) / scaled[0].abs();
    let elapsed = t.elapsed();
    out.push(report(
        11,
        "Thomas-Fermi slope and scaling",
        (slope + 1.588071).abs() <= 1e-4 && (slope - oracle).abs() <= 1e-4 && spread <= 1e-6,
        format!("slope {slope:.8}, oracle {oracle:.8}, E/Z^(7/3) {:.8} relative spread {spread:.2e}", scaled[0]),
        elapsed,
        10.0,
    ));
}

fn criterion_12(out: &mut Vec<Outcome>) {
    let spec = TfGridSpec {
        points: 96,
        half_width: 8.0,
        ..TfGridSpec::default()
    };
    let t = Instant::now();
    let mut rows = Vec::new();
    let mut slowest = 0.0f64;
    for r in [1.5, 2.0, 2.5, 3.0] {
        let s = Instant::now();
        let est = tf_gamma_estimate(1.0, 1.0, r, &spec).unwrap();
        slowest = slowest.max(s.elapsed().as_secs_f64());
        rows.push(est);
    }
    let positive = rows.iter().all(|e| e.converged && e.gamma > 0.0 && e.gamma_fine > 0.0);
    let scaled: Vec<(f64, f64)> = rows.iter().map(|e| (e.gamma * e.r.powi(7), e.error_bar * e.r.powi(7))).collect();
    let nondecreasing = scaled.windows(2).all(|w| w[1].0 >= w[0].0 - (w[0].1 + w[1].1));
    let detail = rows
        .iter()
        .zip(&scaled)
        .map(|(e, s)| format!("R={} Γ={:.4e} ΓR^7={:.4}±{:.4}", e.r, e.gamma, s.0, s.1))
        .collect::<Vec<_>>()
        .join("; ");
    out.push(report(
        12,
        "Thomas-Fermi no binding",
        positive && nondecreasing && slowest < 120.0,
        format!("{detail}; slowest R {slowest:.1} s"),
        t.elapsed(),
        480.0,
    ));
}

fn criterion_13(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let l = default_lieb_thirring_constant();
    let cases = [(1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (2.0, 1.0), (1.0, 0.5), (4.0, 4.0)];
    let recs = lieb_thirring_minimizers(&cases, 8, l, &SolveOptions::default()).unwrap();
    let slack = min(&recs.iter().map(|r| r.slack).collect::<Vec<_>>());
    out.push(report(
        13,
        "Lieb-Thirring slack",
        recs.iter().all(|r| r.converged) && slack >= 0.0,
        format!("min slack {slack:.4e} over {} minimisers, L = {l:.6}", recs.len()),
        t.elapsed(),
        30.0,
    ));
}

fn criterion_14(out: &mut Vec<Outcome>) {
    let t = Instant::now();
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_muller"))
            .args(["atom", "solve", "--Z", "2", "--N", "2", "--relaxed", "--shift", "--seed", "7"])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    let same = a.status.success() && b.status.success() && !a.stdout.is_empty() && a.stdout == b.stdout;
    out.push(report(
        14,
        "reproducible CLI output",
        same,
        format!("{} bytes, identical = {}", a.stdout.len(), a.stdout == b.stdout),
        t.elapsed(),
        10.0,
    ));
}

fn main() -> ExitCode {
    let mut out = Vec::new();
    criterion_1_2(&mut out);
    criterion_3(&mut out);
    criterion_4(&mut out);
    criterion_5(&mut out);
    criterion_6(&mut out);
    criterion_7(&mut out);
    criterion_8(&mut out);
    criterion_9(&mut out);
    criterion_10(&mut out);
    criterion_11(&mut out);
    criterion_12(&mut out);
    criterion_13(&mut out);
    criterion_14(&mut out);

    let passed = out.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", out.len());
    let unexpected: Vec<u32> = out
        .iter()
        .filter(|o| o.pass == LITERAL_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    if unexpected.is_empty() {
        println!("acceptance: only criteria {LITERAL_FAILURES:?} fail, as documented in the README");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
