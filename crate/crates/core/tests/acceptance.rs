//! Acceptance suite: one line per criterion, nonzero exit on any failure.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use ecoplan::geometry::{on_pareto_chain, FeasibleSet, OutcomePoint};
use ecoplan::harness::{
    compute_feasible_sets, load_scenario, run_budget_sweep, run_budget_sweep_with, sweep_budgets,
    write_sweep_csv, Population, ScenarioConfig, SweepReport,
};
use ecoplan::lp::{solve_lp, vertex_enum_oracle, LinearProgram, LpStatus};
use ecoplan::mechanism::{nominal_outcome, optimal_incentives, Participant, Theta};
use ecoplan::microsim::{simulate_trip, trip_outcome, DrivingStyle, TrafficCondition};
use ecoplan::netgraph::Network;
use ecoplan::prefs::{estimate_theta, DEFAULT_GRID, DEFAULT_REFINEMENTS};
use ecoplan::MechanismKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn benchmark() -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/benchmark.scenario");
    load_scenario(&path).expect("bundled scenario loads").0
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_points(rng: &mut ChaCha8Rng, max: usize) -> Vec<OutcomePoint<f64>> {
    let m = rng.random_range(1..=max);
    (0..m)
        .map(|_| OutcomePoint::new(rng.random_range(1.0..100.0), rng.random_range(1.0..100.0)))
        .collect()
}

fn random_set(rng: &mut ChaCha8Rng, max: usize) -> FeasibleSet<f64> {
    FeasibleSet::from_points(&random_points(rng, max)).unwrap()
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let cfg = benchmark();
    let net = Network::build(&cfg.network).map_err(|e| e.to_string())?;
    let routes = net
        .k_shortest_routes("origin", "destination", 2)
        .map_err(|e| e.to_string())?;
    if routes.len() != 2 {
        return Err(format!("expected 2 routes, found {}", routes.len()));
    }
    let car = cfg.vehicle("car").unwrap();
    let out: Vec<OutcomePoint<f64>> = routes
        .iter()
        .map(|r| {
            simulate_trip(
                &net,
                r,
                car,
                DrivingStyle::NORMAL,
                &TrafficCondition::default(),
                &cfg.sim,
            )
            .map(|t| trip_outcome(&t))
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    check(
        out[0].travel_time < out[1].travel_time
            && out[0].emissions > out[1].emissions
            && elapsed < 5.0,
        format!(
            "route 1 ({:.1} s, {:.1} g), route 2 ({:.1} s, {:.1} g), {elapsed:.3} s",
            out[0].travel_time, out[0].emissions, out[1].travel_time, out[1].emissions
        ),
    )
}

fn thresholds_low_high(report: &SweepReport) -> (f64, f64) {
    let lo = report
        .thresholds
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = report
        .thresholds
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn ac2(report: &SweepReport) -> Outcome {
    let n = report.population.len() as f64;
    let (lo, hi) = thresholds_low_high(report);
    let step = report.budgets[1] - report.budgets[0];
    let series: Vec<(f64, f64)> = report
        .series(MechanismKind::Baseline)
        .map(|p| (p.row.budget, p.row.compliance_ratio))
        .collect();
    let jumps: Vec<(f64, f64)> = series
        .windows(2)
        .filter(|w| w[1].1 != w[0].1)
        .map(|w| (w[1].0, w[1].1))
        .collect();
    let levels_ok = series
        .iter()
        .all(|&(_, c)| c == 0.0 || c == 0.5 || c == 1.0)
        && series[0].1 == 0.0;
    let ok = levels_ok
        && jumps.len() == 2
        && jumps[0].1 == 0.5
        && jumps[1].1 == 1.0
        && (jumps[0].0 - n * lo).abs() <= step
        && (jumps[1].0 - n * hi).abs() <= step
        && jumps[0].0 >= n * lo
        && jumps[1].0 >= n * hi;
    check(
        ok,
        format!(
            "jumps {:?}, expected at n*low = {:.2} and n*high = {:.2} (step {step:.2})",
            jumps
                .iter()
                .map(|j| format!("{:.2}->{}", j.0, j.1))
                .collect::<Vec<_>>(),
            n * lo,
            n * hi
        ),
    )
}

fn ac3(report: &SweepReport) -> Outcome {
    let n = report.population.len() as f64;
    let (lo, hi) = thresholds_low_high(report);
    let b_star: f64 = report.thresholds.iter().sum();
    let at_star = sweep_budgets(report.population.clone(), &[b_star], 0.02, None)
        .map_err(|e| e.to_string())?;
    let star_ratio = at_star
        .series(MechanismKind::Optimal)
        .next()
        .unwrap()
        .row
        .compliance_ratio;
    let below = sweep_budgets(report.population.clone(), &[b_star * 0.99], 0.02, None)
        .map_err(|e| e.to_string())?;
    let below_ratio = below
        .series(MechanismKind::Optimal)
        .next()
        .unwrap()
        .row
        .compliance_ratio;

    let mut dominance = true;
    let mut full_after_star = true;
    for (b, o) in report
        .series(MechanismKind::Baseline)
        .zip(report.series(MechanismKind::Optimal))
    {
        let (eb, eo) = (b.row.total_emissions_g, o.row.total_emissions_g);
        dominance &= eo <= eb * (1.0 + 1e-6);
        if o.row.budget >= b_star {
            full_after_star &= o.row.compliance_ratio == 1.0;
        }
    }
    check(
        lo < hi && star_ratio == 1.0 && below_ratio < 1.0 && b_star < n * hi && dominance && full_after_star,
        format!(
            "B* = {b_star:.2} < n*high = {:.2}; compliance {star_ratio} at B*, {below_ratio} just below; emissions dominance {dominance}",
            n * hi
        ),
    )
}

fn ac4(cfg: &ScenarioConfig) -> Outcome {
    let start = Instant::now();
    let report = run_budget_sweep(cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let opt: Vec<_> = report.series(MechanismKind::Optimal).collect();
    let mut ok = opt.len() == 50 && report.population.len() == 20;
    for w in opt.windows(2) {
        ok &= w[1].result.total_emissions <= w[0].result.total_emissions + 1e-9;
        ok &= w[1].result.mean_travel_time >= w[0].result.mean_travel_time - 1e-9;
    }
    check(
        ok && elapsed < 60.0,
        format!(
            "{} budgets, emissions {:.1} -> {:.1} g, mean time {:.1} -> {:.1} s, {elapsed:.3} s",
            opt.len(),
            opt[0].result.total_emissions,
            opt.last().unwrap().result.total_emissions,
            opt[0].result.mean_travel_time,
            opt.last().unwrap().result.mean_travel_time
        ),
    )
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 3];
    for case in 0..500 {
        let set = random_set(&mut rng, 12);
        let (normals, mut rhs) = set.matrix_form();
        let mut rows: Vec<Vec<f64>> = normals.iter().map(|n| n.to_vec()).collect();
        match case % 3 {
            // extra cut, possibly emptying the set
            1 => {
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let n = [a.cos(), a.sin()];
                let c = set.centroid();
                rows.push(n.to_vec());
                rhs.push(n[0] * c.travel_time + n[1] * c.emissions - rng.random_range(-20.0..80.0));
            }
            // dropped rows, possibly unbounded
            2 if rows.len() > 1 => {
                let keep = rng.random_range(1..rows.len());
                rows.truncate(keep);
                rhs.truncate(keep);
            }
            _ => {}
        }
        let c = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let lp = LinearProgram::new(c, rows, rhs).map_err(|e| e.to_string())?;
        let got = solve_lp(&lp).map_err(|e| e.to_string())?;
        let want = vertex_enum_oracle(&lp).map_err(|e| e.to_string())?;
        if got.status != want.status {
            return Err(format!(
                "case {case}: status {:?} vs oracle {:?}",
                got.status, want.status
            ));
        }
        if got.status == LpStatus::Optimal && (got.objective - want.objective).abs() > 1e-9 {
            return Err(format!(
                "case {case}: objective {} vs oracle {}",
                got.objective, want.objective
            ));
        }
        counts[got.status as usize] += 1;
    }
    Ok(format!(
        "500 programs agree (optimal {}, infeasible {}, unbounded {})",
        counts[0], counts[1], counts[2]
    ))
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for h in 0..200 {
        let set = random_set(&mut rng, 30);
        for _ in 0..10 {
            let v = if rng.random_bool(0.1) {
                rng.random_range(0..=1) as f64
            } else {
                rng.random_range(0.0..=1.0)
            };
            let nom = nominal_outcome(&set, &Theta::from_tradeoff(v).unwrap())
                .map_err(|e| e.to_string())?;
            if !on_pareto_chain(&set, &nom, 1e-9) {
                return Err(format!("hull {h}, tradeoff {v}: {nom:?} off the chain"));
            }
            let d = set
                .pareto
                .iter()
                .map(|p| p.distance(&nom))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    Ok(format!("2000 nominal outcomes on the Pareto chain (largest distance to a chain vertex {worst:.2e})"))
}

fn random_population(rng: &mut ChaCha8Rng) -> Population {
    let n = rng.random_range(1..=6);
    let participants: Vec<Participant<f64>> = (0..n)
        .map(|i| {
            let set = Arc::new(random_set(rng, 15));
            let eco = *set.pareto.last().unwrap();
            Participant::new(
                format!("r{i}"),
                Theta::from_tradeoff(rng.random_range(0.0..=1.0)).unwrap(),
                set,
                Some(eco),
            )
            .unwrap()
        })
        .collect();
    Population {
        profiles: Vec::new(),
        participants,
    }
}

fn ac7(report: &SweepReport) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut reports = vec![report.clone()];
    for _ in 0..100 {
        let pop = random_population(&mut rng);
        let budgets: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..60.0)).collect();
        reports.push(sweep_budgets(pop, &budgets, 0.02, None).map_err(|e| e.to_string())?);
    }
    let mut checked = 0;
    for r in &reports {
        for p in r.series(MechanismKind::Optimal) {
            let res = &p.result;
            let spend: f64 = res.offers.iter().map(|o| o.payment).sum();
            if spend > res.budget + 1e-9 {
                return Err(format!("spend {spend} exceeds budget {}", res.budget));
            }
            for (o, u) in res.offers.iter().zip(&r.population.participants) {
                let worst = u
                    .feasible
                    .halfspaces
                    .iter()
                    .map(|h| h.residual(&o.recommended))
                    .fold(f64::NEG_INFINITY, f64::max);
                if o.payment < 0.0 || worst > 1e-9 {
                    return Err(format!(
                        "user {}: payment {}, halfspace residual {worst:e}",
                        o.user_id, o.payment
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} offers over {} populations satisfy the budget, sign and membership constraints",
        reports.len()
    ))
}

fn ac8() -> Outcome {
    let pts = [OutcomePoint::new(10.0, 5.0), OutcomePoint::new(12.0, 3.0)];
    let set = Arc::new(FeasibleSet::from_points(&pts).unwrap());
    let user = [
        Participant::new("u", Theta::from_tradeoff(0.3).unwrap(), set, None)
            .map_err(|e| e.to_string())?,
    ];
    let cases: [(f64, f64, f64, f64); 4] = [
        (0.0, 10.0, 5.0, 0.0),
        (0.5, 11.25, 3.75, 0.5),
        (0.8, 12.0, 3.0, 0.8),
        (1.0, 12.0, 3.0, 0.8),
    ];
    let mut detail = Vec::new();
    for (b, t, e, g) in cases {
        let r = optimal_incentives(&user, b).map_err(|e| e.to_string())?;
        let o = &r.offers[0];
        let err = (o.recommended.travel_time - t)
            .abs()
            .max((o.recommended.emissions - e).abs())
            .max((o.payment - g).abs());
        if err > 1e-9 {
            return Err(format!(
                "B = {b}: got {:?} paying {}, expected ({t}, {e}) paying {g}",
                o.recommended, o.payment
            ));
        }
        detail.push(format!(
            "B={b}: e={:.4} g={:.4}",
            o.recommended.emissions, o.payment
        ));
    }
    Ok(detail.join(", "))
}

/// Exact ϑ interval on which chain vertex `k` minimizes the cost.
fn optimality_interval(chain: &[OutcomePoint<f64>], k: usize) -> (f64, f64) {
    let crossover = |a: &OutcomePoint<f64>, b: &OutcomePoint<f64>| {
        let dt = b.travel_time - a.travel_time;
        let de = a.emissions - b.emissions;
        dt / (dt + de)
    };
    let lo = if k == 0 {
        0.0
    } else {
        crossover(&chain[k - 1], &chain[k])
    };
    let hi = if k + 1 == chain.len() {
        1.0
    } else {
        crossover(&chain[k], &chain[k + 1])
    };
    (lo, hi)
}

fn ac9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut exact, mut within_cell) = (0, 0);
    for h in 0..100 {
        let set = random_set(&mut rng, 20);
        let truth = nominal_outcome(
            &set,
            &Theta::from_tradeoff(rng.random_range(0.0..=1.0)).unwrap(),
        )
        .unwrap();
        let est = estimate_theta(&set, truth.travel_time, DEFAULT_GRID, DEFAULT_REFINEMENTS)
            .map_err(|e| e.to_string())?;
        if !est.residual_history.windows(2).all(|w| w[1] <= w[0]) {
            return Err(format!(
                "hull {h}: residual history {:?} not monotone",
                est.residual_history
            ));
        }
        let nom = nominal_outcome(&set, &est.theta).map_err(|e| e.to_string())?;
        if (nom.travel_time - truth.travel_time).abs() <= 1e-9 * truth.travel_time {
            exact += 1;
            continue;
        }
        let k = set
            .pareto
            .iter()
            .position(|p| p.distance(&truth) <= 1e-9)
            .ok_or("truth is not a chain vertex")?;
        let (lo, hi) = optimality_interval(&set.pareto, k);
        let gap = (lo - est.tradeoff).max(est.tradeoff - hi).max(0.0);
        if gap > est.cell {
            return Err(format!(
                "hull {h}: estimate {} is {gap:e} from the optimality interval [{lo}, {hi}] (cell {})",
                est.tradeoff, est.cell
            ));
        }
        within_cell += 1;
    }
    Ok(format!("{exact} exact travel-time matches, {within_cell} within one final grid cell of the optimality interval"))
}

fn ac10(cfg: &ScenarioConfig) -> Outcome {
    let render = || -> Result<Vec<u8>, String> {
        let classes = compute_feasible_sets(cfg).map_err(|e| e.to_string())?;
        let report = run_budget_sweep_with(cfg, &classes).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_sweep_csv(&report.rows(), &mut buf).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let (a, b) = (render()?, render()?);
    check(a == b, format!("{} bytes, identical = {}", a.len(), a == b))
}

fn main() {
    let cfg = benchmark();
    let report = run_budget_sweep(&cfg).expect("benchmark sweep runs");

    let results: Vec<(&str, &str, Outcome)> = vec![
        ("AC1", "benchmark route ordering", ac1()),
        ("AC2", "baseline plateau", ac2(&report)),
        ("AC3", "optimal dominance", ac3(&report)),
        ("AC4", "optimal monotonicity", ac4(&cfg)),
        ("AC5", "LP oracle equivalence", ac5()),
        ("AC6", "nominal outcome on the Pareto chain", ac6()),
        ("AC7", "mechanism constraints", ac7(&report)),
        ("AC8", "single-user closed forms", ac8()),
        ("AC9", "trade-off estimation consistency", ac9()),
        ("AC10", "determinism", ac10(&cfg)),
    ];
    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
