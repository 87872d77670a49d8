//! Property tests for the interchange formats: CSV and binary round trips
//! are exact for arbitrary finite payloads, and both decoders are total —
//! any byte soup parses to a value or an error, never a panic.

use faer::c64;
use proptest::prelude::*;
use qsl_core::container::{parse_report_csv, report_csv, Container, PayloadKind, ReportRow};
use qsl_core::linalg::CMat;
use qsl_core::space::build_space;

fn finite_f64() -> impl Strategy<Value = f64> {
    any::<u64>().prop_map(|bits| {
        let v = f64::from_bits(bits);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    })
}

fn report_row() -> impl Strategy<Value = ReportRow> {
    (
        "[a-z][a-z0-9-]{0,15}",
        1usize..=1024,
        prop::collection::vec(finite_f64(), 11),
        any::<u64>(),
    )
        .prop_map(|(experiment, k, v, seed)| ReportRow {
            experiment,
            k,
            hbar: v[0],
            fidelity: v[1],
            ell_q: v[2],
            ell_cl: v[3],
            gamma_q: v[4],
            gamma_cl: v[5],
            b: v[6],
            c: v[7],
            slack_qsl: v[8],
            slack_thm32_lo: v[9],
            slack_thm32_hi: v[10],
            seed,
        })
}

fn container_case() -> impl Strategy<Value = (usize, bool, Vec<(f64, f64)>)> {
    (2usize..=16, any::<bool>()).prop_flat_map(|(k, is_state)| {
        let dim = k + 1;
        let n = if is_state { dim } else { dim * dim };
        (
            Just(k),
            Just(is_state),
            prop::collection::vec((finite_f64(), finite_f64()), n),
        )
    })
}

proptest! {
    #[test]
    fn report_tables_round_trip(rows in prop::collection::vec(report_row(), 0..12)) {
        let text = report_csv(&rows).unwrap();
        let back = parse_report_csv(&text).unwrap();
        prop_assert_eq!(back, rows);
    }

    #[test]
    fn containers_round_trip((k, is_state, entries) in container_case()) {
        let space = build_space(k, 1.5).unwrap();
        let dim = space.dim;
        let data: Vec<c64> = entries.iter().map(|&(re, im)| c64::new(re, im)).collect();
        let packed = if is_state {
            Container::state(&space, &data).unwrap()
        } else {
            let mat = CMat::from_fn(dim, dim, |i, j| data[i * dim + j]);
            Container::operator(&space, &mat).unwrap()
        };
        let back = Container::from_bytes(&packed.to_bytes()).unwrap();
        prop_assert_eq!(back.k(), k);
        if is_state {
            prop_assert_eq!(back.kind(), PayloadKind::State);
            prop_assert_eq!(back.vector().unwrap(), &data[..]);
        } else {
            prop_assert_eq!(back.kind(), PayloadKind::Operator);
            let mat = back.matrix().unwrap();
            for i in 0..dim {
                for j in 0..dim {
                    prop_assert_eq!(mat[(i, j)], data[i * dim + j]);
                }
            }
        }
    }

    #[test]
    fn container_decoder_is_total(bytes in prop::collection::vec(any::<u8>(), 0..2048)) {
        let _ = Container::from_bytes(&bytes);
    }

    #[test]
    fn report_parser_is_total(text in ".*") {
        let _ = parse_report_csv(&text);
    }
}
