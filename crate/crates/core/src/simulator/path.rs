//! Event-driven simulation of one sample path of the n-th system.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::nhpp::generate_nhpp;
use super::seeding::{stream, StreamRole};
use crate::error::{config, Result};
use crate::export::fmt_f64;
use crate::model::{Grid, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    ArrivalToService,
    ArrivalToBuffer,
    ArrivalBlocked,
    Departure,
    Promotion,
}

impl EventKind {
    pub fn is_arrival(self) -> bool {
        matches!(
            self,
            EventKind::ArrivalToService | EventKind::ArrivalToBuffer | EventKind::ArrivalBlocked
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::ArrivalToService => "arrival-accepted-to-service",
            EventKind::ArrivalToBuffer => "arrival-accepted-to-buffer",
            EventKind::ArrivalBlocked => "arrival-blocked",
            EventKind::Departure => "departure",
            EventKind::Promotion => "promotion",
        })
    }
}

/// One log record; counts are the system state right after the event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub customer: u64,
    pub servers: u32,
    pub buffer: u32,
    pub departures: u64,
}

/// A simulated path of the system with `servers` servers and `buffer`
/// waiting places, scaled by `scale` (the system index `n`).
#[derive(Clone, Debug, PartialEq)]
pub struct SimPath {
    pub scale: u64,
    pub servers: u32,
    pub buffer: u32,
    pub seed: u64,
    pub initial_servers: u32,
    pub initial_buffer: u32,
    pub events: Vec<EventRecord>,
}

/// Scaled counters `(S̄, Q̄, D̄)` at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledState {
    pub servers: f64,
    pub buffer: f64,
    pub departures: f64,
}

/// A path sampled on a grid: right-continuous values at `t_i` and the
/// admission indicator at `t_i⁻`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSample {
    pub servers: Vec<f64>,
    pub buffer: Vec<f64>,
    pub departures: Vec<f64>,
    pub admits: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Completion {
    time: f64,
    seq: u64,
    customer: u64,
}

impl Eq for Completion {}

impl Ord for Completion {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Completion {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Zero-buffer system `M_t/G/⌊nc⌋/⌊nc⌋`.
pub fn simulate_zero_buffer(cfg: &SystemConfig, n: u64, seed: u64) -> Result<SimPath> {
    simulate_finite_buffer(cfg, n, Some(0), seed)
}

/// Finite-buffer system with `⌊nc⌋` servers and `b` waiting places
/// (`⌊nβ⌋` when `b` is `None`). Waiting customers are served FIFO; a
/// departure with a nonempty buffer promotes the head of the line at the
/// same instant with a freshly drawn service time.
pub fn simulate_finite_buffer(
    cfg: &SystemConfig,
    n: u64,
    b: Option<u32>,
    seed: u64,
) -> Result<SimPath> {
    cfg.validate()?;
    if n == 0 {
        return config("system index n must be at least 1");
    }
    let servers = (n as f64 * cfg.capacity).floor() as u32;
    let buffer = b.unwrap_or_else(|| (n as f64 * cfg.buffer_ratio).floor() as u32);
    if servers == 0 {
        return config(format!(
            "capacity {} gives no servers at n = {n}",
            cfg.capacity
        ));
    }

    let mut arrivals_rng = stream(seed, StreamRole::Arrivals);
    let mut services_rng = stream(seed, StreamRole::Services);
    let mut initial_rng = stream(seed, StreamRole::Initial);

    let arrivals = generate_nhpp(&cfg.rate, n, &mut arrivals_rng)?;
    let initial_total = (n as f64 * cfg.initial_fraction).floor() as u64;
    let initial_servers = initial_total.min(servers as u64) as u32;
    let initial_buffer = (initial_total - initial_servers as u64).min(buffer as u64) as u32;

    let mut seq = 0u64;
    let mut next_customer = 0u64;
    let mut pending: BinaryHeap<Reverse<Completion>> = BinaryHeap::new();
    for _ in 0..initial_servers {
        let time = cfg.initial_dist.sample(&mut initial_rng);
        pending.push(Reverse(Completion {
            time,
            seq,
            customer: next_customer,
        }));
        seq += 1;
        next_customer += 1;
    }
    let mut queue: VecDeque<u64> = (0..initial_buffer as u64)
        .map(|k| next_customer + k)
        .collect();
    next_customer += initial_buffer as u64;

    let horizon = cfg.horizon();
    let mut busy = initial_servers;
    let mut departures = 0u64;
    let mut events = Vec::with_capacity(arrivals.len() * 2);
    let mut next_arrival = 0usize;

    loop {
        let arrival_time = arrivals.get(next_arrival).copied();
        let completion = pending.peek().map(|r| r.0).filter(|c| c.time <= horizon);
        // departures (and their promotions) precede arrivals at equal times
        let take_departure = match (completion, arrival_time) {
            (Some(c), Some(a)) => c.time <= a,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => break,
        };
        if take_departure {
            let Reverse(done) = pending.pop().expect("peeked");
            busy -= 1;
            departures += 1;
            events.push(EventRecord {
                time: done.time,
                kind: EventKind::Departure,
                customer: done.customer,
                servers: busy,
                buffer: queue.len() as u32,
                departures,
            });
            if let Some(customer) = queue.pop_front() {
                busy += 1;
                let service = cfg.service.sample(&mut services_rng);
                pending.push(Reverse(Completion {
                    time: done.time + service,
                    seq,
                    customer,
                }));
                seq += 1;
                events.push(EventRecord {
                    time: done.time,
                    kind: EventKind::Promotion,
                    customer,
                    servers: busy,
                    buffer: queue.len() as u32,
                    departures,
                });
            }
        } else {
            let time = arrival_time.expect("checked above");
            next_arrival += 1;
            let customer = next_customer;
            next_customer += 1;
            let kind = if busy < servers {
                busy += 1;
                let service = cfg.service.sample(&mut services_rng);
                pending.push(Reverse(Completion {
                    time: time + service,
                    seq,
                    customer,
                }));
                seq += 1;
                EventKind::ArrivalToService
            } else if (queue.len() as u32) < buffer {
                queue.push_back(customer);
                EventKind::ArrivalToBuffer
            } else {
                EventKind::ArrivalBlocked
            };
            events.push(EventRecord {
                time,
                kind,
                customer,
                servers: busy,
                buffer: queue.len() as u32,
                departures,
            });
        }
    }

    Ok(SimPath {
        scale: n,
        servers,
        buffer,
        seed,
        initial_servers,
        initial_buffer,
        events,
    })
}

impl SimPath {
    fn counts_after(&self, k: usize) -> (u32, u32, u64) {
        if k == 0 {
            (self.initial_servers, self.initial_buffer, 0)
        } else {
            let e = &self.events[k - 1];
            (e.servers, e.buffer, e.departures)
        }
    }

    fn scaled(&self, (s, q, d): (u32, u32, u64)) -> ScaledState {
        let n = self.scale as f64;
        ScaledState {
            servers: s as f64 / n,
            buffer: q as f64 / n,
            departures: d as f64 / n,
        }
    }

    /// Right-continuous scaled state at `t`.
    pub fn state_at(&self, t: f64) -> ScaledState {
        let k = self.events.partition_point(|e| e.time <= t);
        self.scaled(self.counts_after(k))
    }

    /// Scaled state just before `t`.
    pub fn state_before(&self, t: f64) -> ScaledState {
        let k = self.events.partition_point(|e| e.time < t);
        self.scaled(self.counts_after(k))
    }

    /// Whether an arrival at `t` would be admitted, judged on the state at `t⁻`.
    pub fn admits_at(&self, t: f64) -> bool {
        let k = self.events.partition_point(|e| e.time < t);
        let (s, q, _) = self.counts_after(k);
        self.admits(s, q)
    }

    fn admits(&self, s: u32, q: u32) -> bool {
        s < self.servers || q < self.buffer
    }

    pub fn sample(&self, grid: &Grid) -> PathSample {
        let n = grid.len();
        let mut out = PathSample {
            servers: Vec::with_capacity(n),
            buffer: Vec::with_capacity(n),
            departures: Vec::with_capacity(n),
            admits: Vec::with_capacity(n),
        };
        let (mut before, mut upto) = (0usize, 0usize);
        for t in grid.points() {
            while before < self.events.len() && self.events[before].time < t {
                before += 1;
            }
            upto = upto.max(before);
            while upto < self.events.len() && self.events[upto].time <= t {
                upto += 1;
            }
            let (s, q, _) = self.counts_after(before);
            out.admits.push(self.admits(s, q));
            let st = self.scaled(self.counts_after(upto));
            out.servers.push(st.servers);
            out.buffer.push(st.buffer);
            out.departures.push(st.departures);
        }
        out
    }

    /// Event log as CSV `time,kind,server_count,buffer_count,departures`.
    pub fn write_events_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,kind,server_count,buffer_count,departures")?;
        for e in &self.events {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(e.time),
                e.kind,
                e.servers,
                e.buffer,
                e.departures
            )?;
        }
        Ok(())
    }

    pub fn blocked_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::ArrivalBlocked)
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{RateFunction, ServiceDistribution};

    fn cfg(rate: f64, r0: f64, beta: f64, horizon: f64) -> SystemConfig {
        SystemConfig {
            rate: RateFunction::constant(rate, horizon).unwrap(),
            service: ServiceDistribution::exponential(1.0),
            initial_fraction: r0,
            initial_dist: ServiceDistribution::exponential(1.0),
            capacity: 1.0,
            buffer_ratio: beta,
        }
    }

    #[test]
    fn empty_system_has_no_events() {
        let p = simulate_zero_buffer(&cfg(0.0, 0.0, 0.0, 5.0), 100, 3).unwrap();
        assert!(p.events.is_empty());
        assert_eq!(p.state_at(2.0).servers, 0.0);
        assert!(p.admits_at(4.0));
    }

    #[test]
    fn zero_buffer_equals_finite_with_b_zero() {
        let c = cfg(2.0, 0.3, 0.5, 4.0);
        let a = simulate_zero_buffer(&c, 50, 11).unwrap();
        let b = simulate_finite_buffer(&c, 50, Some(0), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn left_and_right_limits_at_an_event() {
        let p = simulate_zero_buffer(&cfg(2.0, 0.0, 0.0, 3.0), 10, 5).unwrap();
        let e = p.events[0];
        assert_eq!(e.kind, EventKind::ArrivalToService);
        assert_eq!(p.state_before(e.time).servers, 0.0);
        assert_eq!(p.state_at(e.time).servers, 0.1);
    }

    #[test]
    fn initial_population_is_split() {
        let p = simulate_finite_buffer(&cfg(0.0, 1.4, 0.5, 10.0), 10, None, 1).unwrap();
        assert_eq!((p.initial_servers, p.initial_buffer), (10, 4));
        let promotions = p
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Promotion)
            .count();
        assert_eq!(promotions, 4);
    }

    #[test]
    fn event_log_csv_header() {
        let p = simulate_zero_buffer(&cfg(1.0, 0.0, 0.0, 1.0), 5, 2).unwrap();
        let mut buf = Vec::new();
        p.write_events_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,kind,server_count,buffer_count,departures\n"));
        assert_eq!(text.lines().count(), p.events.len() + 1);
    }
}
