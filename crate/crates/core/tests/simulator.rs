mod common;

use std::collections::{HashMap, VecDeque};

use common::*;
use fluidloss::simulator::{
    empirical_acceptance, replicate, simulate_finite_buffer, simulate_zero_buffer, split,
    Discipline, EventKind, ReplicationOptions, SimPath,
};
use fluidloss::{Grid, ServiceDistribution};

fn erlang_b(servers: u32, load: f64) -> f64 {
    (1..=servers).fold(1.0, |b, k| load * b / (k as f64 + load * b))
}

fn busy_path() -> SimPath {
    let mut cfg = config(
        sinusoid(1.5, 10.0),
        ServiceDistribution::lognormal(-0.5, 1.2),
        1.0,
        0.5,
        0.6,
    );
    cfg.initial_dist = ServiceDistribution::exponential(2.0);
    simulate_finite_buffer(&cfg, 60, None, 17).unwrap()
}

#[test]
fn erlang_b_recursion_values() {
    assert!((erlang_b(1, 1.0) - 0.5).abs() < 1e-15);
    assert!((erlang_b(2, 1.0) - 0.2).abs() < 1e-15);
}

#[test]
fn same_seed_same_log() {
    let cfg = periodic_finite();
    let a = simulate_finite_buffer(&cfg, 200, None, 5).unwrap();
    let b = simulate_finite_buffer(&cfg, 200, None, 5).unwrap();
    assert_eq!(a, b);
    let c = simulate_finite_buffer(&cfg, 200, None, 6).unwrap();
    assert_ne!(a.events, c.events);
}

#[test]
fn counts_stay_in_range_and_balance() {
    let p = busy_path();
    let mut accepted = 0u64;
    let initial = (p.initial_servers + p.initial_buffer) as u64;
    let mut last_time = 0.0;
    for (k, e) in p.events.iter().enumerate() {
        assert!(e.time >= last_time);
        last_time = e.time;
        assert!(e.servers <= p.servers && e.buffer <= p.buffer);
        // a departure and its promotion share one instant; judge the state after both
        let settled = p.events.get(k + 1).is_none_or(|next| next.time > e.time);
        assert!(
            !settled || e.buffer == 0 || e.servers == p.servers,
            "idle server with waiting customer at {}",
            e.time
        );
        if matches!(
            e.kind,
            EventKind::ArrivalToService | EventKind::ArrivalToBuffer
        ) {
            accepted += 1;
        }
        assert_eq!(
            accepted + initial,
            e.servers as u64 + e.buffer as u64 + e.departures
        );
    }
    assert!(p.events.iter().any(|e| e.kind == EventKind::ArrivalBlocked));
    assert!(p.events.iter().any(|e| e.kind == EventKind::Promotion));
}

#[test]
fn blocking_only_when_full() {
    let p = busy_path();
    let mut prev = (p.initial_servers, p.initial_buffer);
    for e in &p.events {
        if e.kind == EventKind::ArrivalBlocked {
            assert_eq!(prev, (p.servers, p.buffer), "blocked at {}", e.time);
        }
        prev = (e.servers, e.buffer);
    }
}

#[test]
fn buffer_is_first_in_first_out() {
    let p = busy_path();
    let mut line: VecDeque<u64> = VecDeque::new();
    // initial waiting customers carry the ids right after those in service
    for k in 0..p.initial_buffer as u64 {
        line.push_back(p.initial_servers as u64 + k);
    }
    for e in &p.events {
        match e.kind {
            EventKind::ArrivalToBuffer => line.push_back(e.customer),
            EventKind::Promotion => assert_eq!(line.pop_front(), Some(e.customer)),
            _ => {}
        }
    }
}

#[test]
fn every_departure_follows_one_service_start() {
    let p = busy_path();
    let mut started: HashMap<u64, f64> = (0..p.initial_servers as u64).map(|c| (c, 0.0)).collect();
    let mut departed = 0;
    for e in &p.events {
        match e.kind {
            EventKind::ArrivalToService | EventKind::Promotion => {
                assert!(started.insert(e.customer, e.time).is_none());
            }
            EventKind::Departure => {
                let start = started
                    .remove(&e.customer)
                    .expect("departure without service start");
                assert!(e.time >= start);
                departed += 1;
            }
            _ => {}
        }
    }
    assert!(departed > 0);
}

#[test]
fn promotion_shares_the_departure_instant() {
    let p = busy_path();
    for pair in p.events.windows(2) {
        if pair[1].kind == EventKind::Promotion {
            assert_eq!(pair[0].kind, EventKind::Departure);
            assert_eq!(pair[0].time, pair[1].time);
        }
    }
}

#[test]
fn no_buffer_reproduces_zero_buffer_statistics() {
    let cfg = periodic_finite();
    let grid = Grid::new(10.0, 500).unwrap();
    let opts = ReplicationOptions::new(20, 3);
    let a = replicate(&cfg, 100, Discipline::ZeroBuffer, &grid, &opts).unwrap();
    let b = replicate(&cfg, 100, Discipline::FiniteBuffer(Some(0)), &grid, &opts).unwrap();
    assert_eq!(a.samples, b.samples);
    assert_eq!(a.summary().unwrap().servers, b.summary().unwrap().servers);
    assert!(b.samples.iter().all(|s| s.buffer.iter().all(|&q| q == 0.0)));
}

#[test]
fn single_server_blocking_matches_two_state_chain() {
    // stationary blocked fraction of an M/M/1/1 queue is λ/(λ+μ)
    let (lambda, mu) = (1.5, 1.0);
    let cfg = config(
        constant(lambda, 400.0),
        ServiceDistribution::exponential(mu),
        1.0,
        0.0,
        0.0,
    );
    let fractions: Vec<f64> = (0..100)
        .map(|r| {
            let p = simulate_zero_buffer(&cfg, 1, split(2024, r)).unwrap();
            let arrivals = p.events.iter().filter(|e| e.kind.is_arrival()).count();
            p.blocked_count() as f64 / arrivals as f64
        })
        .collect();
    let n = fractions.len() as f64;
    let mean = fractions.iter().sum::<f64>() / n;
    let sd = (fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let expected = lambda / (lambda + mu);
    assert!(
        (mean - expected).abs() < 3.0 * sd / n.sqrt(),
        "{mean} vs {expected}"
    );
}

#[test]
fn full_buffer_drains_in_beta_over_mu() {
    // no arrivals and every server busy: the buffer empties after
    // ⌊nβ⌋ exponential gaps of rate nμ
    let (n, beta) = (100u64, 0.5);
    let cfg = config(
        constant(0.0, 5.0),
        ServiceDistribution::exponential(1.0),
        1.0,
        beta,
        1.0 + beta,
    );
    let times: Vec<f64> = (0..200)
        .map(|r| {
            let p = simulate_finite_buffer(&cfg, n, None, split(11, r)).unwrap();
            p.events
                .iter()
                .filter(|e| e.kind == EventKind::Promotion)
                .map(|e| e.time)
                .next_back()
                .unwrap()
        })
        .collect();
    let r = times.len() as f64;
    let mean = times.iter().sum::<f64>() / r;
    let sd = (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt();
    assert!((mean - beta).abs() < 3.0 * sd / r.sqrt(), "{mean}");
}

#[test]
fn late_acceptance_matches_erlang_b() {
    let cfg = mm(2.0, 1.0, 0.0, 20.0);
    let grid = Grid::new(20.0, 200).unwrap();
    let reps = replicate(
        &cfg,
        100,
        Discipline::ZeroBuffer,
        &grid,
        &ReplicationOptions::new(200, 42),
    )
    .unwrap();
    let acc = empirical_acceptance(&reps).unwrap();
    let expected = 1.0 - erlang_b(100, 200.0);
    let got = *acc.last().unwrap();
    assert!((got - expected).abs() < 0.05, "{got} vs {expected}");
}

#[test]
fn replication_seeds_follow_the_split() {
    let cfg = mm(1.0, 1.0, 0.0, 2.0);
    let grid = Grid::new(2.0, 20).unwrap();
    let mut opts = ReplicationOptions::new(3, 77);
    opts.keep_paths = true;
    let reps = replicate(&cfg, 10, Discipline::ZeroBuffer, &grid, &opts).unwrap();
    for (r, path) in reps.paths.unwrap().iter().enumerate() {
        assert_eq!(path.seed, split(77, r as u64));
        assert_eq!(
            path,
            &simulate_zero_buffer(&cfg, 10, split(77, r as u64)).unwrap()
        );
    }
}
