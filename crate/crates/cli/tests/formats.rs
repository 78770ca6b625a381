//! Property tests for the persisted formats and scenario loading.

use std::collections::BTreeMap;
use std::path::Path;

use proptest::prelude::*;
use wavepot_cli::diagnostics::{Diagnostics, DiagnosticsWriter};
use wavepot_cli::scenario::{parse_scenario, Physics};
use wavepot_cli::snapshot::{Header, Snapshot, SnapshotWriter};

fn physics(points: Vec<usize>) -> Physics {
    let lengths = points.iter().map(|&n| n as f64 * 0.5).collect();
    Physics {
        points,
        lengths,
        backend: "spectral".into(),
        hbar: 1.0,
        m: 1.0,
        c: 1.0,
        potential: "0".into(),
        constants: BTreeMap::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn snapshots_round_trip_bit_exactly(
        nx in prop::sample::select(vec![4usize, 6, 8]),
        frames in 1usize..4,
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 48),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wpt");
        let header = Header::new("phi", &["phi", "phi_dot"], "verlet", 0.1, 3, "h", physics(vec![nx]), None);
        let mut w = SnapshotWriter::create(&path, &header).unwrap();
        let data: Vec<Vec<f64>> = (0..frames).map(|f| values.iter().cycle().skip(f).take(nx).copied().collect()).collect();
        for (f, d) in data.iter().enumerate() {
            w.write_frame(f as f64 * 0.3, &[d, d]).unwrap();
        }
        w.finish().unwrap();
        let s = Snapshot::read(&path).unwrap();
        prop_assert_eq!(&s.header, &header);
        prop_assert_eq!(s.frames.len(), frames);
        for (f, d) in data.iter().enumerate() {
            let got: Vec<u64> = s.frames[f].fields[1].iter().map(|v| v.to_bits()).collect();
            let want: Vec<u64> = d.iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn diagnostics_round_trip_exactly(rows in prop::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 1..20)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut w = DiagnosticsWriter::create(&path, &[("k", "v".into())], &["step", "time", "a", "b"]).unwrap();
        for (i, (a, b)) in rows.iter().enumerate() {
            w.row(i, i as f64 * 0.25, &[*a, *b]).unwrap();
        }
        w.finish().unwrap();
        let d = Diagnostics::read(&path).unwrap();
        prop_assert_eq!(d.column("a").unwrap(), rows.iter().map(|r| r.0).collect::<Vec<_>>());
        prop_assert_eq!(d.column("b").unwrap(), rows.iter().map(|r| r.1).collect::<Vec<_>>());
    }

    #[test]
    fn scenario_hash_depends_only_on_resolved_content(steps in 1usize..1000, other in 1usize..1000) {
        let text = |n: usize| format!(
            "kind = \"phi\"\n[grid]\npoints = [16]\nlengths = [4.0]\n[initial]\ntype = \"random\"\n[integrator]\nsteps = {n}\n"
        );
        let a = parse_scenario(&text(steps), Path::new("."), &[], None).unwrap();
        let b = parse_scenario(&text(other), Path::new("."), &[format!("integrator.steps={steps}")], None).unwrap();
        // an override to the same value resolves to the same document
        prop_assert_eq!(&a.hash, &b.hash);
        prop_assert_eq!(a.integrator.unwrap().steps, steps);
    }
}
