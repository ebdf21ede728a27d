use std::path::PathBuf;

use ecoplan::harness::{load_scenario, ScenarioConfig};
use ecoplan::microsim::{
    generate_outcome_cloud, simulate_trip, trip_outcome, DrivingStyle, SimConfig, TrafficCondition,
};
use ecoplan::netgraph::{Control, Network, Route};
use ecoplan::OutcomePoint;

fn setup() -> (ScenarioConfig, Network, Vec<Route>) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/benchmark.scenario");
    let (cfg, _) = load_scenario(&path).unwrap();
    let net = Network::build(&cfg.network).unwrap();
    let routes = net.k_shortest_routes("origin", "destination", 2).unwrap();
    (cfg, net, routes)
}

fn free_flow(cfg: &ScenarioConfig, net: &Network, route: &Route, sim: &SimConfig) -> OutcomePoint {
    let car = cfg.vehicle("car").unwrap();
    trip_outcome(
        &simulate_trip(
            net,
            route,
            car,
            DrivingStyle::NORMAL,
            &TrafficCondition::default(),
            sim,
        )
        .unwrap(),
    )
}

#[test]
fn routes_are_the_urban_and_boulevard_paths() {
    let (_, net, routes) = setup();
    assert_eq!(routes.len(), 2);
    assert_eq!(
        routes[0].link_ids(&net),
        [
            "origin",
            "urban1",
            "urban2",
            "urban3",
            "urban4",
            "destination"
        ]
    );
    assert_eq!(
        routes[1].link_ids(&net),
        ["origin", "boulevard", "destination"]
    );
}

#[test]
fn shorter_route_is_faster_but_dirtier() {
    let (cfg, net, routes) = setup();
    let r1 = free_flow(&cfg, &net, &routes[0], &cfg.sim);
    let r2 = free_flow(&cfg, &net, &routes[1], &cfg.sim);
    assert!(r1.travel_time < r2.travel_time);
    assert!(r1.emissions > r2.emissions);
}

#[test]
fn step_halving_changes_outcomes_by_under_one_percent() {
    let (cfg, net, routes) = setup();
    let fine = SimConfig {
        dt: cfg.sim.dt / 2.0,
        ..cfg.sim
    };
    for route in &routes {
        let a = free_flow(&cfg, &net, route, &cfg.sim);
        let b = free_flow(&cfg, &net, route, &fine);
        assert!(
            (a.travel_time - b.travel_time).abs() / b.travel_time < 0.01,
            "{a:?} vs {b:?}"
        );
        assert!(
            (a.emissions - b.emissions).abs() / b.emissions < 0.01,
            "{a:?} vs {b:?}"
        );
    }
}

#[test]
fn boulevard_golden_value() {
    // Pinned from the first run that passed the step-halving check.
    let (cfg, net, routes) = setup();
    let r2 = free_flow(&cfg, &net, &routes[1], &cfg.sim);
    assert!((r2.travel_time - 208.47237227972303).abs() < 1e-9, "{r2:?}");
    assert!((r2.emissions - 104.44026419527115).abs() < 1e-9, "{r2:?}");
}

#[test]
fn vehicles_stop_at_every_stop_sign() {
    let (cfg, net, routes) = setup();
    let car = cfg.vehicle("car").unwrap();
    let lines: Vec<f64> = routes[0]
        .segments(&net)
        .iter()
        .filter(|s| s.control == Control::StopSign)
        .map(|s| s.end)
        .collect();
    assert_eq!(lines.len(), 2);
    for style in &cfg.styles {
        for cond in cfg.traffic_conditions() {
            let traj = simulate_trip(&net, &routes[0], car, *style, &cond, &cfg.sim).unwrap();
            for &line in &lines {
                let slowest = (0..traj.len())
                    .filter(|&i| (traj.position[i] - line).abs() <= 2.0)
                    .map(|i| traj.speed[i])
                    .fold(f64::INFINITY, f64::min);
                assert!(slowest < 0.1, "style {style:?} line {line}: {slowest}");
            }
        }
    }
}

#[test]
fn cloud_is_reproducible_and_sized() {
    let (cfg, net, _) = setup();
    let car = cfg.vehicle("car").unwrap();
    let conditions = cfg.traffic_conditions();
    let styles: Vec<DrivingStyle> = cfg.styles.iter().step_by(3).copied().collect();
    assert_eq!(styles.len(), 5);
    let a = generate_outcome_cloud(
        &net,
        "origin",
        "destination",
        car,
        2,
        &styles,
        &conditions[..3],
        &cfg.sim,
    )
    .unwrap();
    let b = generate_outcome_cloud(
        &net,
        "origin",
        "destination",
        car,
        2,
        &styles,
        &conditions[..3],
        &cfg.sim,
    )
    .unwrap();
    assert_eq!(a.len(), 2);
    assert!(a.iter().all(|c| c.points.len() == 15));
    for (x, y) in a.iter().zip(&b) {
        for (p, q) in x.points.iter().zip(&y.points) {
            assert_eq!(p.travel_time.to_bits(), q.travel_time.to_bits());
            assert_eq!(p.emissions.to_bits(), q.emissions.to_bits());
        }
    }
}
