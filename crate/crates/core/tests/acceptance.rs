//! Acceptance criteria AC1 to AC11, each printed as one PASS/FAIL line.
//!
//! Runs as a plain binary (`harness = false`). Pass criterion names such as
//! `AC5` as arguments to run a subset. Exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use collapse_lab::distributions::{sample_mixture, Convention, MixtureSpec};
use collapse_lab::experiments::hutter_run::HutterPlan;
use collapse_lab::experiments::phase::PhaseSweep;
use collapse_lab::experiments::simulation::SimulationPlan;
use collapse_lab::experiments::{self, Cell, Config, ExperimentKind, Table};
use collapse_lab::labelers::{flip_channel, generate_labels, LabelMode, LinearWeights};
use collapse_lab::orthant::{phi2, phi_psi_from_angles, pkl_integrals, AngleTriple};
use collapse_lab::proxy::{estimate_phi_psi, ScoredSelection};
use collapse_lab::pruning::{measure_phi_psi, measure_rates, prune_margin, prune_phi_psi, Channel, PruneParams, SurvivalCounts};
use collapse_lab::rng::{derive, rng_from};
use collapse_lab::theory::{acc_hat, concentration_condition, perfect_accuracy_condition, solve_fixed_point, threshold_pair, Regime, SolveMode};
use collapse_lab::trainer::{gradient, isotropic_agreement, objective, train, TrainConfig};
use collapse_lab::Execution;
use rand::Rng as _;
use rand_distr::StandardNormal;

const PHASE_CFG: &str = include_str!("../../../configs/phase_sweep.cfg");
const ORACLE_CFG: &str = include_str!("../../../configs/oracle.cfg");
const SIMULATE_CFG: &str = include_str!("../../../configs/simulate.cfg");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn num(table: &Table, row: &[Cell], col: &str) -> Option<f64> {
    match row[table.column(col).expect("known column")] {
        Cell::Num(v) => Some(v),
        Cell::Int(v) => Some(v as f64),
        _ => None,
    }
}

fn text<'a>(table: &Table, row: &'a [Cell], col: &str) -> &'a str {
    match &row[table.column(col).expect("known column")] {
        Cell::Text(s) => s,
        _ => "",
    }
}

fn aggregates<'a>(table: &'a Table) -> impl Iterator<Item = &'a Vec<Cell>> + 'a {
    table.rows.iter().filter(move |r| text(table, r, "row") == "aggregate")
}

fn ac1() -> Outcome {
    let sweep = PhaseSweep::from_config(&Config::parse(PHASE_CFG).unwrap()).unwrap();
    let table = sweep.run(Execution::default()).unwrap();
    let mut checked = 0;
    let mut failures = Vec::new();
    for row in aggregates(&table) {
        let p = num(&table, row, "p").unwrap();
        let p_star = num(&table, row, "p_star").unwrap();
        let psi = num(&table, row, "psi").unwrap();
        let acc = num(&table, row, "acc_mean");
        let band = if p <= p_star - 0.10 + 1e-9 {
            Some(acc.is_some_and(|a| a >= 0.99))
        } else if p >= p_star + 0.10 - 1e-9 {
            Some(acc.is_some_and(|a| a <= 0.01))
        } else {
            None
        };
        if let Some(ok) = band {
            checked += 1;
            if !ok {
                failures.push(format!("psi={psi} p={p} acc={acc:?}"));
            }
        }
    }
    outcome(
        failures.is_empty() && checked > 0,
        format!("{checked} (channel, p) cells outside the ±0.10 band checked; failures: {failures:?}"),
    )
}

fn ac2() -> Outcome {
    let sweep = PhaseSweep::from_config(&Config::parse(ORACLE_CFG).unwrap()).unwrap();
    let table = sweep.run(Execution::default()).unwrap();
    let accs: Vec<f64> = aggregates(&table).map(|r| num(&table, r, "acc_mean").unwrap_or(f64::NAN)).collect();
    let worst = accs.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(accs.len() == 9 && worst >= 0.99, format!("min mean accuracy over p = 0.1..0.9 is {worst:.6}"))
}

fn random_counts(rng: &mut collapse_lab::rng::Rng) -> SurvivalCounts {
    loop {
        let c = SurvivalCounts::new(
            rng.random_range(0..2000),
            rng.random_range(0..2000),
            rng.random_range(0..2000),
            rng.random_range(0..2000),
        );
        if c.kept() > 0 {
            return c;
        }
    }
}

fn ac3() -> Outcome {
    let mut rng = rng_from(3);
    let mut counterexamples = 0;
    let mut worst_residual: f64 = 0.0;
    for regime in [Regime::Symmetric, Regime::Skewed] {
        for _ in 0..500 {
            let counts = random_counts(&mut rng);
            let a: f64 = rng.random_range(0.05..0.95);
            let gamma = counts.kept() as f64 * 10f64.powf(rng.random_range(-3.0..0.0));
            let fp = match solve_fixed_point(&counts, a, regime.b(a), gamma, SolveMode::Simplified) {
                Ok(fp) => fp,
                Err(_) => {
                    counterexamples += 1;
                    continue;
                }
            };
            worst_residual = worst_residual.max(fp.residual);
            let acc = acc_hat(&counts, &fp).unwrap();
            let predicted = perfect_accuracy_condition(&counts, regime);
            let binary = regime == Regime::Skewed || acc == 0.0 || acc == 1.0;
            if !binary || (acc == 1.0) != predicted || fp.residual > 1e-10 {
                counterexamples += 1;
            }
        }
    }
    outcome(
        counterexamples == 0,
        format!("2 × 500 configurations, {counterexamples} counterexamples, max residual {worst_residual:.2e}"),
    )
}

fn ac4() -> Outcome {
    let mut rng = rng_from(4);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let phi: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let psi: f64 = rng.random();
        let p: f64 = rng.random();
        let t: f64 = rng.random_range(1e-6..1.0);
        let params = PruneParams::new(phi, psi, p).unwrap();
        let (lower, _) = threshold_pair(phi, psi, t).unwrap();
        if concentration_condition(params, t).unwrap() != (p < lower) {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("1000 random tuples, {mismatches} disagreements"))
}

fn ac5() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    for beta in [1.5, 2.0] {
        let cfg = format!(
            "beta = {beta}\nm = 10\npi = 0.9\nt_grid = geom:1024:1048576:2\nseeds = 1:10:1\nn_test = 1000000\n"
        );
        let plan = HutterPlan::from_config(&Config::parse(&cfg).unwrap()).unwrap();
        let table = plan.run(Execution::default()).unwrap();
        let summary = table.rows.last().unwrap();
        let slope = num(&table, summary, "slope").unwrap();
        let target = num(&table, summary, "target_slope").unwrap();
        let bayes_ok = table
            .rows
            .iter()
            .all(|r| num(&table, r, "bayes_error").is_some_and(|v| (v - 0.09).abs() < 1e-12));
        let measured = num(&table, summary, "bayes_pred_error").unwrap();
        let se = num(&table, summary, "bayes_pred_se").unwrap();
        let ok = (slope - target).abs() <= 0.10 && bayes_ok && (measured - 0.09).abs() <= 3.0 * se;
        pass &= ok;
        lines.push(format!(
            "beta={beta}: slope {slope:.4} (target {target:.4}, full grid {:.4}), Bayes predictor {measured:.5} ± {se:.5}",
            num(&table, summary, "slope_full").unwrap()
        ));
    }
    outcome(pass, lines.join("; "))
}

fn ac6() -> Outcome {
    // Sheppard's formula.
    let sheppard = (-9..=9)
        .map(|k| {
            let rho = k as f64 / 10.0;
            (phi2(0.0, 0.0, rho) - (0.25 + rho.asin() / (2.0 * PI))).abs()
        })
        .fold(0.0, f64::max);

    // 5×5×5 grid against 10⁷ shared draws per correlation.
    const N: usize = 10_000_000;
    let cs = [-2.0, -1.0, 0.0, 0.5, 1.5];
    let rhos: [f64; 5] = [-0.8, -0.4, 0.0, 0.3, 0.8];
    let mut grid_err: f64 = 0.0;
    for (ri, &rho) in rhos.iter().enumerate() {

        let delta = (1.0 - rho * rho).sqrt();
        let counts: Vec<[u64; 25]> = Execution::default().chunked(N, derive(6, ri as u64), |rng, len| {
            let mut c = [0u64; 25];
            for _ in 0..len {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let (x, y) = (z1, rho * z1 + delta * z2);
                for (i, &c1) in cs.iter().enumerate() {
                    if x <= c1 {
                        for (j, &c2) in cs.iter().enumerate() {
                            c[i * 5 + j] += u64::from(y <= c2);
                        }
                    }
                }
            }
            c
        });
        for (i, &c1) in cs.iter().enumerate() {
            for (j, &c2) in cs.iter().enumerate() {
                let hits: u64 = counts.iter().map(|c| c[i * 5 + j]).sum();
                grid_err = grid_err.max((phi2(c1, c2, rho) - hits as f64 / N as f64).abs());
            }
        }
    }

    // pkl integrals against 4·10⁷ draws of the two projections.
    const M: usize = 40_000_000;
    let mut rng = rng_from(66);
    let mut pkl_err: f64 = 0.0;
    for k in 0..10 {
        let unit = |rng: &mut collapse_lab::rng::Rng| {
            let v: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
        };
        let (wg, wp) = (unit(&mut rng), unit(&mut rng));
        let scale = rng.random_range(0.2..1.5);
        let mu: Vec<f64> = unit(&mut rng).into_iter().map(|v| v * scale).collect();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (mg, mp, rho) = (dot(&mu, &wg), dot(&mu, &wp), dot(&wg, &wp));
        let delta = (1.0 - rho * rho).sqrt();
        let (p00, p01) = pkl_integrals(&wg, &wp, &mu).unwrap();
        let hits = Execution::default().chunked(M, derive(67, k), |rng, len| {
            let (mut h00, mut h01) = (0u64, 0u64);
            for _ in 0..len {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                if rng.random::<bool>() {
                    continue; // class 1
                }
                let u = -mg + z1;
                let v = -mp + rho * z1 + delta * z2;
                h00 += u64::from(u <= 0.0 && v <= 0.0);
                h01 += u64::from(u > 0.0 && v > 0.0);
            }
            (h00, h01)
        });
        let (h00, h01) = hits.iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        pkl_err = pkl_err.max((p00 - h00 as f64 / M as f64).abs());
        pkl_err = pkl_err.max((p01 - h01 as f64 / M as f64).abs());
    }
    outcome(
        sheppard <= 1e-7 && grid_err <= 1e-3 && pkl_err <= 3e-4,
        format!("Sheppard max error {sheppard:.1e}, grid max error {grid_err:.1e}, pkl max error {pkl_err:.1e}"),
    )
}

fn ac7() -> Outcome {
    let d = 100;
    let spec = MixtureSpec::new(d, 0.15, Convention::Simulation).unwrap();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for &tg in &[PI / 12.0, PI / 6.0, PI / 3.0] {
        for &tp in &[0.0, PI / 12.0, PI / 4.0] {
            let lo = (tg - tp).abs();
            let hi = tg + tp;
            for theta in [lo, 0.5 * (lo + hi), hi] {
                let triple = AngleTriple::new(tg, tp, theta).unwrap();
                let k = phi_psi_from_angles(triple, spec.tau, d, spec.convention).unwrap();
                let (_, gen, prune) = triple.realize(d).unwrap();
                let seed = 7000 + count as u64;
                let samples = sample_mixture(&spec, 200_000, seed).unwrap();
                let labeled = generate_labels(&LinearWeights::new(gen).unwrap(), samples, LabelMode::Deterministic, 0).unwrap();
                let pruned = prune_margin(labeled, &LinearWeights::new(prune).unwrap()).unwrap();
                let m = measure_phi_psi(&pruned).unwrap();
                worst = worst.max((m.phi.unwrap() - k.phi).abs()).max((m.psi.unwrap() - k.psi).abs());
                count += 1;
            }
        }
    }
    let self_pruner = phi_psi_from_angles(AngleTriple::new(PI / 5.0, PI / 5.0, 0.0).unwrap(), 0.15, d, Convention::Simulation).unwrap();
    let oracle = phi_psi_from_angles(AngleTriple::new(PI / 3.0, 0.0, PI / 3.0).unwrap(), 2.0, d, Convention::Simulation).unwrap();
    let degenerate_err = [
        (self_pruner.phi - 1.0).abs(),
        (self_pruner.psi - 1.0).abs(),
        (oracle.phi - 1.0).abs(),
        oracle.psi.abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    outcome(
        worst <= 0.02 && degenerate_err <= 1e-3,
        format!("{count} triples, max |closed form − Monte Carlo| {worst:.4}; degenerate cases off by {degenerate_err:.1e}"),
    )
}

fn ac8() -> Outcome {
    let spec = MixtureSpec::new(10, 0.7, Convention::UnitTrace).unwrap();
    let data = flip_channel(sample_mixture(&spec, 300, 81).unwrap(), 0.2, 82).unwrap();
    let data = prune_phi_psi(data, Channel::new(1.0, 0.5).unwrap(), 83).unwrap();
    let lambda = 1e-2;
    let mut rng = rng_from(84);
    let mut worst_fd: f64 = 0.0;
    for _ in 0..10 {
        let w: Vec<f64> = (0..10).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let g = gradient(&w, &data, lambda).unwrap();
        let h = 1e-5;
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[i] += h;
            down[i] -= h;
            let fd = (objective(&up, &data, lambda).unwrap() - objective(&down, &data, lambda).unwrap()) / (2.0 * h);
            err = err.max((fd - g[i]).abs());
            scale = scale.max(g[i].abs());
        }
        worst_fd = worst_fd.max(err / scale);
    }

    let mut cfg = TrainConfig::new(lambda);
    cfg.gtol = 1e-10;
    let zero = train(&data, &cfg, None).unwrap();
    let start: Vec<f64> = (0..10).map(|_| 5.0 * rng.sample::<f64, _>(StandardNormal)).collect();
    let other = train(&data, &cfg, Some(&start)).unwrap();
    let gap = zero
        .weights
        .as_slice()
        .iter()
        .zip(other.weights.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let mut angle_err: f64 = 0.0;
    for (k, theta) in [PI / 12.0, PI / 6.0, PI / 3.0].into_iter().enumerate() {
        let mut u = vec![0.0; 20];
        u[0] = 1.0;
        let mut v = vec![0.0; 20];
        v[0] = theta.cos();
        v[1] = theta.sin();
        let est = isotropic_agreement(&LinearWeights::new(v).unwrap(), &LinearWeights::new(u).unwrap(), 1_000_000, 85 + k as u64).unwrap();
        angle_err = angle_err.max((est.value - (1.0 - theta / PI)).abs());
    }
    outcome(
        worst_fd <= 1e-5 && gap <= 1e-6 && angle_err <= 0.01,
        format!("gradient rel. error {worst_fd:.1e}, two-init gap {gap:.1e}, angle law error {angle_err:.4}"),
    )
}

struct SimulationSummary {
    /// Per strategy label: per `n′`, the accuracy of every seed.
    curves: Vec<(String, Vec<Vec<f64>>)>,
    pstar: Vec<(String, Option<f64>)>,
    n_prime: Vec<usize>,
}

fn simulation() -> SimulationSummary {
    let plan = SimulationPlan::from_config(&Config::parse(SIMULATE_CFG).unwrap()).unwrap();
    let table = plan.run(Execution::default()).unwrap();
    let label = |r: &[Cell]| match num(&table, r, "prune_angle") {
        Some(a) => format!("verifier({a:.4})"),
        None => text(&table, r, "strategy").to_string(),
    };
    let mut curves: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    let mut pstar = Vec::new();
    for r in table.rows.iter() {
        let name = label(r);
        let ni = plan.n_prime.iter().position(|&n| Some(n as f64) == num(&table, r, "n_prime")).unwrap();
        if text(&table, r, "row") == "aggregate" {
            if ni + 1 == plan.n_prime.len() {
                pstar.push((name, num(&table, r, "proxy_pstar")));
            }
            continue;
        }
        if curves.last().map(|c| &c.0) != Some(&name) {
            curves.push((name.clone(), vec![Vec::new(); plan.n_prime.len()]));
        }
        let acc = num(&table, r, "acc_mean").expect("every simulation cell succeeds");
        curves.last_mut().unwrap().1[ni].push(acc);
    }
    SimulationSummary {
        curves,
        pstar,
        n_prime: plan.n_prime.clone(),
    }
}

/// Mean and standard error of the paired differences `a − b`.
fn paired(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn curve<'a>(s: &'a SimulationSummary, name: &str) -> &'a [Vec<f64>] {
    &s.curves.iter().find(|c| c.0 == name).unwrap_or_else(|| panic!("no curve {name}")).1
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            for k in i..=j {
                r[idx[k]] = (i + j) as f64 / 2.0;
            }
            i = j + 1;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn ac9(sim: &SimulationSummary) -> Outcome {
    let mut rng = rng_from(9);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..500);
        let truth: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let flip = rng.random::<f64>();
        let fake: Vec<u8> = truth.iter().map(|&y| if rng.random::<f64>() < flip { 1 - y } else { y }).collect();
        let keep_rate = rng.random::<f64>();
        let mask: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < keep_rate).collect();
        let m = measure_rates(&truth, &fake, &mask).unwrap();
        let correct: Vec<bool> = truth.iter().zip(&fake).map(|(a, b)| a == b).collect();
        let r = estimate_phi_psi(&ScoredSelection::from_binary(&correct, &mask).unwrap());
        let same = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
        if !(same(m.phi, r.phi) && same(m.psi, r.psi) && m.p.to_bits() == r.p.to_bits()) {
            mismatches += 1;
        }
    }
    let last = sim.n_prime.len() - 1;
    let names = ["verifier(0.0000)", "verifier(0.1309)", "verifier(0.2618)", "random"];
    let acc: Vec<f64> = names.iter().map(|n| mean(&curve(sim, n)[last])).collect();
    let ps: Vec<f64> = names
        .iter()
        .map(|n| sim.pstar.iter().find(|p| p.0 == *n).and_then(|p| p.1).unwrap_or(f64::NAN))
        .collect();
    let rho = spearman(&ps, &acc);
    outcome(
        mismatches == 0 && rho >= 0.9,
        format!(
            "binary reduction: {mismatches}/100 mismatches; rank correlation {rho:.3} (p* {ps:.4?}, accuracy at n'={} {acc:.5?})",
            sim.n_prime[last]
        ),
    )
}

fn ac10(sim: &SimulationSummary) -> Outcome {
    let oracle = curve(sim, "verifier(0.0000)");
    let clean = curve(sim, "clean");
    // The oracle verifier may do better than clean labels, which still carry the
    // mixture's Bayes noise; the check is that it never falls behind.
    let mut worst_z = f64::INFINITY;
    let mut two_sided = true;
    for (o, c) in oracle.iter().zip(clean) {
        let (d, se) = paired(o, c);
        worst_z = worst_z.min(d / se);
        two_sided &= d.abs() <= 2.0 * se;
    }
    let dominate_or_match = worst_z >= -2.0;

    let weak = curve(sim, "verifier(0.2618)");
    let last = weak.len() - 1;
    let mut best = (0usize, f64::NEG_INFINITY, 0.0);
    for i in 0..last {
        let (d, se) = paired(&weak[i], &weak[last]);
        if d / se > best.1 {
            best = (i, d / se, d);
        }
    }
    let sweet_spot = best.1 > 2.0;
    outcome(
        dominate_or_match && sweet_spot,
        format!(
            "oracle − clean: min z {worst_z:.1} over n' (dominates or matches: {dominate_or_match}; two-sided |z| <= 2: {two_sided}); \
             pi/12 sweet spot at n'={} beats n'={} by {:.5} (z = {:.1})",
            sim.n_prime[best.0], sim.n_prime[last], best.2, best.1
        ),
    )
}

fn ac11() -> Outcome {
    let dir = std::env::temp_dir().join(format!("collapse-lab-ac11-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let scores = dir.join("scores.csv");
    std::fs::write(&scores, "s,q\n0.9,1\n0.1,0\n0.7,1\n0.3,1\n1,0\n").unwrap();
    let runs = [
        (ExperimentKind::PhaseSweep, "d = 30\nN = 600\nlambda = 1e-2\ntau = 0.7\np_grid = 0.2, 0.6\nphi = 1\npsi = 0.5\nprune_angles = pi/8\nseeds = 1, 2\nn_test = 20000\n".to_string()),
        (ExperimentKind::PhaseSweep, "d = 30\nN = 600\nlambda = 1e-2\ntau = 0.7\np_grid = 0.2, 0.4\nphi = 1\npsi = 0.5\nseeds = 1\nlabel_mode = generator\n".to_string()),
        (ExperimentKind::SimulationScaling, "d = 10\ntau = 0.4\nn0 = 100\nn1 = 100000\nn_prime = 100, 1000\nprune_angles = 0, pi/12\nseeds = 1, 2\n".to_string()),
        (ExperimentKind::HutterScaling, "beta = 2\nm = 10\npi = 0.9\nk = 100000\nt_grid = geom:256:4096:2\nseeds = 1, 2, 3\nn_test = 100000\n".to_string()),
        (ExperimentKind::ProxyEval, format!("input = {}\n", scores.display())),
    ];
    let mut identical = 0;
    let mut differing = Vec::new();
    for (kind, text) in &runs {
        let render = |exec| experiments::run(*kind, &Config::parse(text).unwrap(), exec).unwrap().render();
        let first = render(Execution::Parallel);
        let (again, seq) = (render(Execution::Parallel), render(Execution::Sequential));
        if first == again && first == seq {
            identical += 1;
        } else {
            let other = if first != again { &again } else { &seq };
            let line = first.lines().zip(other.lines()).find(|(a, b)| a != b);
            differing.push(format!("{}: {line:?}", kind.name()));
        }
    }
    std::fs::remove_dir_all(&dir).ok();
    outcome(
        identical == runs.len(),
        format!(
            "{identical}/{} configurations byte-identical across reruns and execution modes{}",
            runs.len(),
            if differing.is_empty() { String::new() } else { format!("; differing: {differing:?}") }
        ),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut sim: Option<SimulationSummary> = None;
    let mut failed = 0;
    let criteria: [(&str, &str); 11] = [
        ("AC1", "phase transition at the breakdown point"),
        ("AC2", "oracle pruning"),
        ("AC3", "fixed point against the count condition"),
        ("AC4", "concentration condition against the threshold"),
        ("AC5", "noisy Zipf excess-error scaling"),
        ("AC6", "orthant numerics"),
        ("AC7", "angles to keep rates"),
        ("AC8", "trainer correctness"),
        ("AC9", "proxy breakdown point"),
        ("AC10", "simulation replication"),
        ("AC11", "determinism"),
    ];
    for (name, title) in criteria {
        if !wanted(name) {
            continue;
        }
        let start = Instant::now();
        let result = match name {
            "AC1" => ac1(),
            "AC2" => ac2(),
            "AC3" => ac3(),
            "AC4" => ac4(),
            "AC5" => ac5(),
            "AC6" => ac6(),
            "AC7" => ac7(),
            "AC8" => ac8(),
            "AC9" => ac9(sim.get_or_insert_with(simulation)),
            "AC10" => ac10(sim.get_or_insert_with(simulation)),
            _ => ac11(),
        };
        if !result.pass {
            failed += 1;
        }
        println!(
            "{name:<5} {} {title}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
