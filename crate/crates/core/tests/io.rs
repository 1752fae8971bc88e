use krflow::analysis::MonitorRecord;
use krflow::flow::FlowState;
use krflow::io::{monitors_header, monitors_to_string, read_monitors, read_snapshot, write_snapshot, SnapshotHeader};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE / 3.0),
        Just(f64::MAX),
    ]
}

#[test]
fn header_lists_the_record_fields_in_order() {
    assert_eq!(
        monitors_header(),
        "t,sup_phi,sup_phidot,volume_ratio_min,volume_ratio_max,trace_min,trace_max,s_max,rm2_max,grad2_max,\
         fiber_dev0,fiber_dev1,fiber_dev2,distance_to_limit,eig_min,eig_max,laplace_psi_residual"
    );
}

#[test]
fn snapshot_starts_with_the_documented_header() {
    let state = FlowState { t: 1.5, phi: vec![0.25; 16], phidot: vec![], eig_range: (0.9, 1.1), steps: 7 };
    let h = SnapshotHeader { m: 1, n: 1, nb: 2, nf: 2 };
    let mut buf = Vec::new();
    write_snapshot(&mut buf, h, &state).unwrap();
    assert_eq!(&buf[..4], b"KRFL");
    let u32_at = |k: usize| u32::from_le_bytes(buf[4 + 4 * k..8 + 4 * k].try_into().unwrap());
    assert_eq!([u32_at(0), u32_at(1), u32_at(2), u32_at(3), u32_at(4)], [1, 1, 1, 2, 2]);
    assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 1.5);
    assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 0.25);
}

proptest! {
    #[test]
    fn csv_round_trip_is_bit_exact(rows in prop::collection::vec(prop::collection::vec(finite(), 17), 0..20)) {
        let records: Vec<MonitorRecord> = rows.iter().map(|r| MonitorRecord::from_row(&r.clone().try_into().unwrap())).collect();
        let back = read_monitors(&monitors_to_string(&records)).unwrap();
        prop_assert_eq!(back.len(), records.len());
        for (a, b) in records.iter().zip(&back) {
            prop_assert_eq!(a.to_row().map(f64::to_bits), b.to_row().map(f64::to_bits));
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact(nb in 1u32..4, nf in 1u32..4, t in finite(), seed in prop::collection::vec(finite(), 81),
                                        with_dot in any::<bool>(), steps in any::<u64>()) {
        let count = (nb * nb * nf * nf) as usize;
        let phi = seed[..count].to_vec();
        let phidot = if with_dot { seed[81 - count..].to_vec() } else { Vec::new() };
        let state = FlowState { t, phi, phidot, eig_range: (seed[0], seed[1]), steps };
        let h = SnapshotHeader { m: 1, n: 1, nb, nf };
        let mut buf = Vec::new();
        write_snapshot(&mut buf, h, &state).unwrap();
        let (h2, back) = read_snapshot(&buf[..]).unwrap();
        prop_assert_eq!(h2, h);
        prop_assert_eq!(back.t.to_bits(), state.t.to_bits());
        prop_assert_eq!(back.steps, state.steps);
        prop_assert_eq!(back.phi.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), state.phi.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back.phidot.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), state.phidot.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!((back.eig_range.0.to_bits(), back.eig_range.1.to_bits()), (state.eig_range.0.to_bits(), state.eig_range.1.to_bits()));
    }
}
