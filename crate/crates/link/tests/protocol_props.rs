use fallwatch_link::{decode_datagram, fragment, parse_telemetry, Reassembler, StreamEnd, VideoPacket};
use proptest::prelude::*;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..=p.len() {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn every_ordering_of_small_frames_gives_the_same_bytes() {
    for count in 1..=4usize {
        let frame: Vec<u8> = (0..count * 1400 - 7).map(|i| (i * 31 % 253) as u8).collect();
        let packets = fragment(7, &frame).unwrap();
        assert_eq!(packets.len(), count);
        let orders = permutations(count);
        assert_eq!(orders.len(), (1..=count).product::<usize>());
        for order in orders {
            let mut r = Reassembler::new();
            let mut out = Vec::new();
            for &i in &order {
                out.extend(r.push(packets[i].clone()));
            }
            assert_eq!(out.len(), 1, "{order:?}");
            assert_eq!(out[0].bytes, frame, "{order:?}");
            assert_eq!(r.dropped(), 0);
        }
    }
}

#[test]
fn partial_frame_then_frame_plus_two_is_dropped() {
    let mut r = Reassembler::new();
    let p = fragment(7, &[1u8; 3000]).unwrap();
    let mut out = Vec::new();
    out.extend(r.push(p[0].clone()));
    out.extend(r.push(p[2].clone()));
    for q in fragment(9, &[2u8; 10]).unwrap() {
        out.extend(r.push(q));
    }
    assert_eq!(out.iter().filter(|f| f.id == 7).count(), 0);
    assert_eq!(r.dropped(), 1);
}

/// Frames with random sizes, packets shuffled within each frame and some
/// dropped entirely.
fn stream() -> impl Strategy<Value = Vec<(Vec<u8>, Vec<usize>, Vec<bool>)>> {
    prop::collection::vec(
        (1usize..5000).prop_flat_map(|len| {
            let n = len.div_ceil(1400);
            (
                prop::collection::vec(any::<u8>(), len),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
                prop::collection::vec(prop::bool::weighted(0.9), n),
            )
        }),
        1..12,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn telemetry_parser_is_total(bytes in prop::collection::vec(any::<u8>(), 0..96)) {
        let _ = parse_telemetry(&bytes);
    }

    #[test]
    fn datagram_decoder_is_total(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode_datagram(&bytes);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn telemetry_like_lines_parse_or_fail_cleanly(line in "([a-z]{1,5}:-?[0-9a-e.]{0,4};){0,8}\r?\n?") {
        match parse_telemetry(line.as_bytes()) {
            Ok(t) => {
                prop_assert_eq!(t.raw, line);
                prop_assert!(t.battery.is_none_or(|b| b <= 100));
            }
            Err(e) => prop_assert!(!e.to_string().is_empty()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reassembly_never_emits_damaged_frames(frames in stream()) {
        let mut r = Reassembler::new();
        let mut out = Vec::new();
        let mut complete = Vec::new();
        for (id, (bytes, order, keep)) in frames.iter().enumerate() {
            let packets = fragment(id as u32, bytes).unwrap();
            if keep.iter().all(|&k| k) {
                complete.push(id as u32);
            }
            for &i in order {
                if keep[i] {
                    out.extend(r.push(packets[i].clone()));
                }
            }
        }
        r.finish(StreamEnd { first_id: 0, end_id: frames.len() as u32 });
        for f in &out {
            prop_assert_eq!(&f.bytes, &frames[f.id as usize].0);
        }
        let ids: Vec<u32> = out.iter().map(|f| f.id).collect();
        prop_assert_eq!(ids, complete);
        prop_assert_eq!(out.len() as u64 + r.dropped(), frames.len() as u64);
    }

    #[test]
    fn packets_round_trip_through_bytes(id in any::<u32>(), count in 1u16..50, payload in prop::collection::vec(any::<u8>(), 1..1400)) {
        let index = count - 1;
        let p = VideoPacket::new(id, index, count, payload).unwrap();
        prop_assert_eq!(decode_datagram(&p.encode()).unwrap(), fallwatch_link::Datagram::Packet(p));
    }
}
