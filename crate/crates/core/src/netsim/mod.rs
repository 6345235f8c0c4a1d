//! Slot-level discrete-event simulation of NR cells under UDP flood.
//!
//! Each (gNB, carrier) pair is a shared uplink resource served round-robin
//! among the UEs configured on it. A slot carries one head-of-line packet of
//! the scheduled UE (partially, if the packet exceeds the slot capacity) and
//! lasts `tti(μ)` of that UE's carrier. Legitimate UEs are saturated: they
//! receive one packet per arrival interval and are topped up whenever their
//! turn comes with an empty queue. The attacker sends only flood bursts.

mod config_file;
mod engine;
mod types;

pub use config_file::{parse_sim_config, sim_config_from, KeyValues};
pub use engine::{apply_numerology, build_topology, inject_flood, run, Network, QueuedPacket, UeState};
pub use types::*;

#[cfg(test)]
mod tests {
    use super::*;

    fn single_carrier(ue_count: usize, mu: u8, duration_s: f64) -> SimConfig {
        SimConfig {
            ue_count,
            carriers_per_gnb: 1,
            carriers_min: 1,
            carriers_max: 1,
            duration: Tick::from_seconds(duration_s).unwrap(),
            initial_numerology: InitialNumerology::Uniform(Numerology::new(mu).unwrap()),
            ..SimConfig::default()
        }
    }

    fn flood() -> AttackConfig {
        AttackConfig {
            carriers: AttackCarriers::All,
            ..AttackConfig::default()
        }
    }

    #[test]
    fn tti_table() {
        assert_eq!(tti_duration(0).unwrap(), 0.001);
        assert_eq!(tti_duration(1).unwrap(), 0.0005);
        assert_eq!(tti_duration(2).unwrap(), 0.00025);
        assert_eq!(tti_duration(3).unwrap(), 0.000125);
        assert_eq!(tti_duration(4).unwrap(), 0.0000625);
        assert!(matches!(tti_duration(5), Err(crate::Error::Domain(_))));
        assert!(matches!(tti_duration(-1), Err(crate::Error::Domain(_))));
        for mu in Numerology::ALL {
            assert_eq!(mu.tti_ticks().as_seconds(), mu.tti_seconds());
        }
    }

    #[test]
    fn single_cell_attaches_everyone() {
        let net = build_topology(&SimConfig::default()).unwrap();
        assert_eq!(net.ues().len(), 10);
        assert!(net.ues().iter().all(|u| u.attached_gnb == GnbId(0)));
        assert!(net.ues().iter().all(|u| (1..=5).contains(&u.carriers.len())));
    }

    #[test]
    fn two_cells_are_laid_out_on_a_row() {
        let cfg = SimConfig {
            gnb_count: 2,
            ue_count: 200,
            ..SimConfig::default()
        };
        let net = build_topology(&cfg).unwrap();
        assert_eq!(net.gnbs()[0].position, Position::new(250.0, 500.0));
        assert_eq!(net.gnbs()[1].position, Position::new(750.0, 500.0));
        for ue in net.ues() {
            let expect = if ue.position.x < 500.0 { GnbId(0) } else { GnbId(1) };
            assert_eq!(ue.attached_gnb, expect, "UE at {:?}", ue.position);
        }
    }

    #[test]
    fn zero_gnbs_is_a_config_error() {
        let cfg = SimConfig {
            gnb_count: 0,
            ..SimConfig::default()
        };
        assert!(matches!(build_topology(&cfg), Err(crate::Error::Config(_))));
    }

    #[test]
    fn placement_is_deterministic() {
        let cfg = SimConfig {
            seed: 99,
            ue_count: 50,
            gnb_count: 4,
            ..SimConfig::default()
        };
        assert_eq!(build_topology(&cfg).unwrap(), build_topology(&cfg).unwrap());
        let other = SimConfig { seed: 100, ..cfg.clone() };
        assert_ne!(build_topology(&cfg).unwrap().ues()[0].position, build_topology(&other).unwrap().ues()[0].position);
    }

    #[test]
    fn slot_count_matches_duration() {
        // Slots end at k * TTI; those ending strictly before the horizon count.
        for mu in 0..=4u8 {
            let r = run(&single_carrier(1, mu, 1.0)).unwrap();
            let tti = tti_duration(i64::from(mu)).unwrap();
            let completed = (1..).take_while(|k| (*k as f64) * tti < 1.0 - 1e-12).count() as u64;
            let kpi = r.per_ue[&UeId(0)];
            assert_eq!(kpi.delivered, completed, "mu={mu}");
            assert!((kpi.mean_delay - tti).abs() < 1e-12);
            assert_eq!(kpi.dropped, 0);
        }
    }

    #[test]
    fn zero_duration_run_is_empty() {
        let r = run(&single_carrier(3, 0, 0.0)).unwrap();
        for k in r.per_ue.values() {
            assert_eq!((k.sent, k.delivered, k.dropped), (0, 0, 0));
        }
        assert_eq!(r.network.mean_delay, 0.0);
    }

    #[test]
    fn silent_attacker_changes_nothing() {
        let base = single_carrier(4, 0, 0.5);
        let silent = SimConfig {
            attack: Some(AttackConfig {
                burst_size: 0,
                ..flood()
            }),
            ..base.clone()
        };
        let a = run(&base).unwrap();
        let b = run(&silent).unwrap();
        assert_eq!(a.network, b.network);
        for (id, k) in &a.per_ue {
            assert_eq!(k, &b.per_ue[id]);
        }
        assert_eq!(b.per_ue.len(), a.per_ue.len() + 1);
    }

    #[test]
    fn flood_takes_half_the_carrier() {
        let solo = run(&single_carrier(1, 0, 1.0)).unwrap();
        let attacked = run(&SimConfig {
            attack: Some(flood()),
            ..single_carrier(1, 0, 1.0)
        })
        .unwrap();
        let ratio = attacked.per_ue[&UeId(0)].throughput / solo.per_ue[&UeId(0)].throughput;
        assert!((ratio - 0.5).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn late_attack_leaves_early_window_untouched() {
        let base = single_carrier(5, 0, 1.0);
        let late = SimConfig {
            attack: Some(AttackConfig {
                start: Tick::from_seconds(0.5).unwrap(),
                stop: Tick::from_seconds(1.0).unwrap(),
                ..flood()
            }),
            ..base.clone()
        };
        let mut a = build_topology(&base).unwrap();
        let mut b = build_topology(&late).unwrap();
        a.run_until(base.duration);
        b.run_until(late.duration);
        let half = Tick::from_seconds(0.5).unwrap();
        for ue in 0..5 {
            let ca = a.window_counters(UeId(ue), Tick::ZERO, half).unwrap();
            let cb = b.window_counters(UeId(ue), Tick::ZERO, half).unwrap();
            assert_eq!(ca, cb);
            let later_a = a.window_counters(UeId(ue), half, base.duration).unwrap();
            let later_b = b.window_counters(UeId(ue), half, base.duration).unwrap();
            assert!(later_b.mean_delay() >= later_a.mean_delay());
        }
    }

    #[test]
    fn numerology_change_takes_effect_next_slot() {
        let cfg = single_carrier(1, 0, 0.01);
        let mut net = build_topology(&cfg).unwrap();
        net.run_until(Tick(5 * TICKS_PER_MS));
        let before = net.ue(UeId(0)).unwrap().counters.delivered;
        net.run_for(Tick(TICKS_PER_MS));
        let mid = net.ue(UeId(0)).unwrap().counters.delivered;
        assert_eq!(mid - before, 1);

        net.apply_numerology(UeId(0), CcId(1), Numerology::new(4).unwrap()).unwrap();
        assert_eq!(net.numerology(UeId(0), CcId(1)).unwrap().index(), 4);
        // the μ = 0 slot started at 6 ms is still in flight
        net.run_for(Tick(TICKS_PER_MS));
        net.run_for(Tick(TICKS_PER_MS));
        let after = net.ue(UeId(0)).unwrap().counters.delivered;
        net.run_for(Tick(TICKS_PER_MS));
        assert_eq!(net.ue(UeId(0)).unwrap().counters.delivered - after, 16);
    }

    #[test]
    fn reapplying_current_numerology_is_a_no_op() {
        let cfg = SimConfig {
            trace: true,
            ..single_carrier(3, 1, 0.05)
        };
        let mut a = build_topology(&cfg).unwrap();
        let mut b = a.clone();
        a.run_until(Tick(100));
        b.run_until(Tick(100));
        b.apply_numerology(UeId(1), CcId(1), Numerology::new(1).unwrap()).unwrap();
        a.run_until(cfg.duration);
        b.run_until(cfg.duration);
        assert_eq!(a.result().trace_text(), b.result().trace_text());
    }

    #[test]
    fn lookup_errors() {
        let mut net = build_topology(&single_carrier(1, 0, 0.01)).unwrap();
        let mu = Numerology::new(2).unwrap();
        assert!(matches!(net.apply_numerology(UeId(7), CcId(1), mu), Err(crate::Error::Lookup(_))));
        assert!(matches!(net.apply_numerology(UeId(0), CcId(3), mu), Err(crate::Error::Lookup(_))));
        let bad = AttackConfig::default().profile_for(UeId(42));
        assert!(matches!(net.inject_flood(bad), Err(crate::Error::Config(_))));
    }

    #[test]
    fn trace_lines_are_tab_separated() {
        let cfg = SimConfig {
            trace: true,
            ..single_carrier(1, 0, 0.002)
        };
        let r = run(&cfg).unwrap();
        let text = r.trace_text();
        let first = text.lines().next().unwrap();
        assert_eq!(first.split('\t').count(), 5);
        assert!(text.contains("\tdeliver\t0\t1\t0.001"));
    }

    #[test]
    fn oversized_packets_span_several_slots() {
        let cfg = SimConfig {
            packet_size: 3000,
            ..single_carrier(1, 0, 0.1)
        };
        let r = run(&cfg).unwrap();
        let k = r.per_ue[&UeId(0)];
        // two 1 ms slots per packet: completions at 2, 4, ..., 98 ms
        assert_eq!(k.delivered, 49);
        assert!(k.mean_delay >= 0.002);
    }
}
