use proptest::prelude::*;
use voipsim::config::{emit, parse_scenario_str};
use voipsim::runner::spec_hash;
use voipsim_core::metrics::EModelParams;
use voipsim_core::net::{IpCloud, UmtsCell, WifiCell};
use voipsim_core::scenario::{CallParams, CellSpec, ScenarioSpec, SipParams, SubnetSpec};
use voipsim_core::traffic::CodecProfile;
use voipsim_core::SimDuration;

fn dur(max_us: u64) -> impl Strategy<Value = SimDuration> {
    (0..=max_us).prop_map(SimDuration::from_micros)
}

fn pos_dur(max_us: u64) -> impl Strategy<Value = SimDuration> {
    (1..=max_us).prop_map(SimDuration::from_micros)
}

fn wifi() -> impl Strategy<Value = CellSpec> {
    (1_000_000u64..60_000_000, 1u64..50, 1u64..30, 10u64..100, 3u32..64, 1u32..10, 0u32..100, 1usize..200).prop_map(
        |(rate, slot, sifs, difs, cw_min, retry, overhead, cap)| {
            CellSpec::Wifi(WifiCell {
                data_rate_bps: rate,
                slot: SimDuration::from_micros(slot),
                sifs: SimDuration::from_micros(sifs),
                difs: SimDuration::from_micros(difs),
                cw_min,
                cw_max: cw_min * 32 + 1,
                retry_limit: retry,
                phy_mac_overhead_bytes: overhead,
                queue_cap: cap,
            })
        },
    )
}

fn umts() -> impl Strategy<Value = CellSpec> {
    (pos_dur(50_000), 8_000u64..2_000_000, 0.0f64..0.99, 0u32..5, dur(100_000), dur(50_000), dur(50_000), dur(50_000), dur(80_000), 1usize..200)
        .prop_map(|(tti, rate, bler, retx, rd, nr, rp, cn, ai, cap)| {
            CellSpec::Umts(UmtsCell {
                tti,
                bearer_rate_bps: rate,
                bler,
                max_rlc_retx: retx,
                rlc_retx_delay: rd,
                nodeb_rnc_delay: nr,
                rnc_proc_delay: rp,
                cn_delay: cn,
                air_interleave_delay: ai,
                queue_cap: cap,
            })
        })
}

fn subnet(name: &'static str) -> impl Strategy<Value = SubnetSpec> {
    (1u16..20, prop_oneof![wifi(), umts()]).prop_map(move |(n, cell)| SubnetSpec { name: name.into(), station_count: n, cell })
}

fn codec() -> impl Strategy<Value = CodecProfile> {
    let custom = (1_000u32..200_000, prop::sample::select(vec![10u64, 20, 30]), 0.0f64..40.0, 0.5f64..40.0, dur(50_000), dur(50_000), dur(5_000), dur(5_000))
        .prop_map(|(rate, ms, ie, bpl, de, dd, dc, dde)| {
            let interval = SimDuration::from_millis(ms);
            CodecProfile {
                name: "custom".into(),
                bitrate_bps: rate,
                frame_interval: interval,
                payload_bytes: (rate as u64 * interval.as_micros()).div_ceil(8_000_000) as u32,
                ie,
                bpl,
                encode_delay: de,
                decode_delay: dd,
                compress_delay: dc,
                decompress_delay: dde,
            }
        });
    prop_oneof![Just(CodecProfile::g711()), Just(CodecProfile::g729()), Just(CodecProfile::g723_1()), custom]
}

prop_compose! {
    fn scenario()(
        a in subnet("alpha"),
        b in subnet("beta"),
        codec in codec(),
        base in dur(200_000),
        half in dur(20_000),
        loss in 0.0f64..0.5,
        ia in pos_dur(600_000_000),
        cd in pos_dur(600_000_000),
        answer in dur(10_000_000),
        proxy in dur(10_000),
        timeout in pos_dur(60_000_000),
        bytes in 1u32..2000,
        is in 0.0f64..20.0,
        adv in 0.0f64..20.0,
        warm in 0u64..1_000_000_000,
        extra in 1u64..5_000_000_000,
        width in pos_dur(100_000_000),
        seed in any::<u32>(),
        reps in 1u32..10,
    ) -> ScenarioSpec {
        let mut s = ScenarioSpec::two_subnets("prop", a, b);
        s.codec = codec;
        s.cloud = IpCloud { base_delay: base, jitter_half_width: half, loss_prob: loss };
        s.calls = CallParams { inter_arrival_mean: ia, duration_mean: cd };
        s.sip = SipParams { answer_delay: answer, proxy_delay: proxy, transaction_timeout: timeout, message_bytes: bytes };
        s.emodel = EModelParams { is, a: adv };
        s.warm_up = SimDuration::from_micros(warm);
        s.run_length = SimDuration::from_micros(warm + extra);
        s.bucket_width = width;
        s.master_seed = seed as u64;
        s.repetitions = reps;
        s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn parse_of_emit_is_identity(spec in scenario()) {
        prop_assert!(spec.validate().is_ok());
        let text = emit(&spec);
        let back = parse_scenario_str(&text, "emitted").unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn hash_tracks_every_field(spec in scenario(), which in 0usize..6) {
        let mut other = spec.clone();
        match which {
            0 => other.master_seed += 1,
            1 => other.cloud.jitter_half_width += SimDuration::from_micros(1),
            2 => other.subnets[0].station_count += 1,
            3 => other.calls.duration_mean += SimDuration::from_micros(1),
            4 => other.emodel.is += 0.5,
            _ => other.run_length += SimDuration::from_micros(1),
        }
        prop_assert_eq!(spec_hash(&spec), spec_hash(&spec.clone()));
        prop_assert_ne!(spec_hash(&spec), spec_hash(&other));
    }
}
