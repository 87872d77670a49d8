//! Flat-file interchange: a binary container for operators and state
//! vectors, plus the CSV tables the experiment harness writes and reads
//! back.
//!
//! The binary layout is deliberately dumb — three little-endian `u32` header
//! words (level k, dimension, payload kind) followed by the payload as
//! row-major complex doubles, little-endian, real part first.  Decoding
//! validates every header field before touching the payload, so arbitrary
//! bytes yield a [`CoreError::Container`] instead of a panic or an oversized
//! allocation.
//!
//! CSV tables are plain comma-separated text with a fixed header row and no
//! quoting; numeric cells use the shortest representation that parses back
//! to the same bits, so a write → read round trip is exact and repeated runs
//! with the same seed produce byte-identical files.

use std::fmt::Write as _;

use faer::c64;

use crate::error::{CoreError, Result};
use crate::linalg::CMat;
use crate::space::{QuantumSpace, MAX_LEVEL, MIN_LEVEL};

/// Bytes occupied by the three-word header.
const HEADER_BYTES: usize = 12;

/// What the payload of a [`Container`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PayloadKind {
    /// A dim×dim operator, row-major.
    Operator,
    /// A single state vector of length dim.
    State,
}

impl PayloadKind {
    fn code(self) -> u32 {
        match self {
            PayloadKind::Operator => 0,
            PayloadKind::State => 1,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        match code {
            0 => Ok(PayloadKind::Operator),
            1 => Ok(PayloadKind::State),
            other => Err(CoreError::Container(format!("unknown payload kind {other}"))),
        }
    }

    fn entries(self, dim: usize) -> usize {
        match self {
            PayloadKind::Operator => dim * dim,
            PayloadKind::State => dim,
        }
    }
}

/// An operator or state vector tagged with the level it lives at.
#[derive(Clone, Debug)]
pub struct Container {
    k: usize,
    kind: PayloadKind,
    data: Vec<c64>,
}

impl Container {
    /// Package an operator on the given space.
    pub fn operator(space: &QuantumSpace, mat: &CMat) -> Result<Self> {
        let dim = space.dim;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(CoreError::InvalidArgument(format!(
                "operator is {}×{}, space has dimension {dim}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(mat[(i, j)]);
            }
        }
        Ok(Container { k: space.k, kind: PayloadKind::Operator, data })
    }

    /// Package a state vector on the given space.
    pub fn state(space: &QuantumSpace, psi: &[c64]) -> Result<Self> {
        if psi.len() != space.dim {
            return Err(CoreError::InvalidArgument(format!(
                "state has {} entries, space has dimension {}",
                psi.len(),
                space.dim
            )));
        }
        Ok(Container { k: space.k, kind: PayloadKind::State, data: psi.to_vec() })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.k + 1
    }

    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    /// The payload as a matrix; errors when the container holds a vector.
    pub fn matrix(&self) -> Result<CMat> {
        if self.kind != PayloadKind::Operator {
            return Err(CoreError::Container("payload is a state, not an operator".into()));
        }
        let dim = self.dim();
        Ok(CMat::from_fn(dim, dim, |i, j| self.data[i * dim + j]))
    }

    /// The payload as a vector; errors when the container holds an operator.
    pub fn vector(&self) -> Result<&[c64]> {
        if self.kind != PayloadKind::State {
            return Err(CoreError::Container("payload is an operator, not a state".into()));
        }
        Ok(&self.data)
    }

    /// Serialize: header words k, dim, kind, then the payload entries.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 16 * self.data.len());
        out.extend_from_slice(&(self.k as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        out.extend_from_slice(&self.kind.code().to_le_bytes());
        for z in &self.data {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    /// Decode and validate a serialized container.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES {
            return Err(CoreError::Container(format!(
                "truncated header: {} bytes, need {HEADER_BYTES}",
                bytes.len()
            )));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
        let k = word(0) as usize;
        let dim = word(1) as usize;
        let kind = PayloadKind::from_code(word(2))?;
        if !(MIN_LEVEL..=MAX_LEVEL).contains(&k) {
            return Err(CoreError::Container(format!(
                "level k = {k} outside supported range [{MIN_LEVEL}, {MAX_LEVEL}]"
            )));
        }
        if dim != k + 1 {
            return Err(CoreError::Container(format!(
                "dimension {dim} does not match level {k} (want {})",
                k + 1
            )));
        }
        let entries = kind.entries(dim);
        let want = HEADER_BYTES + 16 * entries;
        if bytes.len() != want {
            return Err(CoreError::Container(format!(
                "payload length mismatch: {} bytes, want {want}",
                bytes.len()
            )));
        }
        let mut data = Vec::with_capacity(entries);
        for (idx, chunk) in bytes[HEADER_BYTES..].chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
            let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
            if !re.is_finite() || !im.is_finite() {
                return Err(CoreError::Container(format!(
                    "non-finite payload entry at index {idx}"
                )));
            }
            data.push(c64::new(re, im));
        }
        Ok(Container { k, kind, data })
    }
}

/// Column order of the shared dislocation report table.
pub const REPORT_COLUMNS: [&str; 14] = [
    "experiment",
    "k",
    "hbar",
    "fidelity",
    "ell_q",
    "ell_cl",
    "gamma_q",
    "gamma_cl",
    "b",
    "c",
    "slack_qsl",
    "slack_thm32_lo",
    "slack_thm32_hi",
    "seed",
];

/// One line of the shared report table.  Cells that do not apply to an
/// experiment are carried as NaN rather than dropped, so every row has the
/// same shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub k: usize,
    pub hbar: f64,
    pub fidelity: f64,
    pub ell_q: f64,
    pub ell_cl: f64,
    pub gamma_q: f64,
    pub gamma_cl: f64,
    pub b: f64,
    pub c: f64,
    pub slack_qsl: f64,
    pub slack_thm32_lo: f64,
    pub slack_thm32_hi: f64,
    pub seed: u64,
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() {
        return Err(CoreError::InvalidArgument("empty CSV label".into()));
    }
    if label.contains([',', '\n', '\r']) {
        return Err(CoreError::InvalidArgument(format!(
            "CSV label {label:?} contains a separator"
        )));
    }
    Ok(())
}

/// Render the report table, header row first.
pub fn report_csv(rows: &[ReportRow]) -> Result<String> {
    let mut out = REPORT_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        check_label(&r.experiment)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.k,
            r.hbar,
            r.fidelity,
            r.ell_q,
            r.ell_cl,
            r.gamma_q,
            r.gamma_cl,
            r.b,
            r.c,
            r.slack_qsl,
            r.slack_thm32_lo,
            r.slack_thm32_hi,
            r.seed
        )
        .unwrap();
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.parse().map_err(|_| {
        CoreError::Container(format!("line {line}: cannot parse {what} from {s:?}"))
    })
}

/// Parse a report table produced by [`report_csv`].  The header row must
/// match exactly; rows must have all fourteen cells.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CoreError::Container("empty report table".into()))?;
    let want = REPORT_COLUMNS.join(",");
    if header != want {
        return Err(CoreError::Container(format!(
            "unexpected report header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != REPORT_COLUMNS.len() {
            return Err(CoreError::Container(format!(
                "line {lineno}: {} cells, want {}",
                fields.len(),
                REPORT_COLUMNS.len()
            )));
        }
        if fields[0].is_empty() {
            return Err(CoreError::Container(format!("line {lineno}: empty experiment name")));
        }
        rows.push(ReportRow {
            experiment: fields[0].to_string(),
            k: parse_num(fields[1], lineno, "k")?,
            hbar: parse_num(fields[2], lineno, "hbar")?,
            fidelity: parse_num(fields[3], lineno, "fidelity")?,
            ell_q: parse_num(fields[4], lineno, "ell_q")?,
            ell_cl: parse_num(fields[5], lineno, "ell_cl")?,
            gamma_q: parse_num(fields[6], lineno, "gamma_q")?,
            gamma_cl: parse_num(fields[7], lineno, "gamma_cl")?,
            b: parse_num(fields[8], lineno, "b")?,
            c: parse_num(fields[9], lineno, "c")?,
            slack_qsl: parse_num(fields[10], lineno, "slack_qsl")?,
            slack_thm32_lo: parse_num(fields[11], lineno, "slack_thm32_lo")?,
            slack_thm32_hi: parse_num(fields[12], lineno, "slack_thm32_hi")?,
            seed: parse_num(fields[13], lineno, "seed")?,
        });
    }
    Ok(rows)
}

/// Column order of the small-scale sweep table.
pub const SWEEP_COLUMNS: [&str; 10] = [
    "experiment",
    "k",
    "hbar",
    "s",
    "s2inv_hbar",
    "overlap",
    "fidelity",
    "ell_q",
    "displaced",
    "slope_window_id",
];

/// One line of a small-scale sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub experiment: String,
    pub k: usize,
    pub hbar: f64,
    pub s: f64,
    pub s2inv_hbar: f64,
    pub overlap: f64,
    pub fidelity: f64,
    pub ell_q: f64,
    pub displaced: bool,
    pub slope_window_id: u32,
}

/// Render a sweep table, header row first.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut out = SWEEP_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        check_label(&r.experiment)?;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.k,
            r.hbar,
            r.s,
            r.s2inv_hbar,
            r.overlap,
            r.fidelity,
            r.ell_q,
            r.displaced,
            r.slope_window_id
        )
        .unwrap();
    }
    Ok(out)
}

/// One microsupport probe sample: mass left in a region at a given ℏ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRow {
    pub hbar: f64,
    pub mass: f64,
    pub region_id: u32,
}

/// Render probe samples as CSV (hbar, mass, region_id).
pub fn probe_csv(rows: &[ProbeRow]) -> String {
    let mut out = String::from("hbar,mass,region_id\n");
    for r in rows {
        writeln!(out, "{},{},{}", r.hbar, r.mass, r.region_id).unwrap();
    }
    out
}

/// Render plain (x, y) pairs as a two-column CSV with the given headers —
/// sampled profiles, plot data, and similar diagnostics.
pub fn xy_csv(x_name: &str, y_name: &str, pairs: &[(f64, f64)]) -> Result<String> {
    check_label(x_name)?;
    check_label(y_name)?;
    let mut out = format!("{x_name},{y_name}\n");
    for (x, y) in pairs {
        writeln!(out, "{x},{y}").unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_space;

    fn sample_rows() -> Vec<ReportRow> {
        vec![
            ReportRow {
                experiment: "cap-dislocation".into(),
                k: 128,
                hbar: 1.0 / 128.0,
                fidelity: 0.9312,
                ell_q: 0.0123,
                ell_cl: 0.0119,
                gamma_q: 0.371,
                gamma_cl: 0.3689,
                b: 3.0,
                c: 0.0,
                slack_qsl: 1.7e-3,
                slack_thm32_lo: 2.0e-4,
                slack_thm32_hi: 4.0e-4,
                seed: 42,
            },
            ReportRow {
                experiment: "speed-limit".into(),
                k: 64,
                hbar: 1.0 / 64.0,
                fidelity: 0.25,
                ell_q: 0.5,
                ell_cl: f64::NAN,
                gamma_q: 0.3,
                gamma_cl: f64::NAN,
                b: f64::NAN,
                c: f64::NAN,
                slack_qsl: 0.0,
                slack_thm32_lo: f64::NAN,
                slack_thm32_hi: f64::NAN,
                seed: 7,
            },
        ]
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let space = build_space(8, 1.5).unwrap();
        let mat = CMat::from_fn(space.dim, space.dim, |i, j| {
            c64::new((i as f64 + 0.25) / (j as f64 + 1.5), (i * j) as f64 - 3.5)
        });
        let bytes = Container::operator(&space, &mat).unwrap().to_bytes();
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back.k(), 8);
        assert_eq!(back.kind(), PayloadKind::Operator);
        let got = back.matrix().unwrap();
        for i in 0..space.dim {
            for j in 0..space.dim {
                assert_eq!(got[(i, j)], mat[(i, j)]);
            }
        }
        assert!(back.vector().is_err());

        let psi: Vec<c64> = (0..space.dim).map(|m| c64::new(m as f64, -1.0)).collect();
        let bytes = Container::state(&space, &psi).unwrap().to_bytes();
        let back = Container::from_bytes(&bytes).unwrap();
        assert_eq!(back.vector().unwrap(), &psi[..]);
        assert!(back.matrix().is_err());
    }

    #[test]
    fn decoder_rejects_malformed_bytes() {
        let space = build_space(4, 1.5).unwrap();
        let psi = vec![c64::new(1.0, 0.0); space.dim];
        let good = Container::state(&space, &psi).unwrap().to_bytes();

        let cases: Vec<Vec<u8>> = vec![
            vec![],
            good[..HEADER_BYTES - 1].to_vec(),
            {
                let mut b = good.clone();
                b[0..4].copy_from_slice(&1u32.to_le_bytes()); // k below MIN_LEVEL
                b
            },
            {
                let mut b = good.clone();
                b[4..8].copy_from_slice(&9u32.to_le_bytes()); // dim ≠ k + 1
                b
            },
            {
                let mut b = good.clone();
                b[8..12].copy_from_slice(&9u32.to_le_bytes()); // unknown kind
                b
            },
            good[..good.len() - 8].to_vec(), // short payload
            {
                let mut b = good.clone();
                b.extend_from_slice(&[0u8; 4]); // trailing garbage
                b
            },
            {
                let mut b = good.clone();
                b[HEADER_BYTES..HEADER_BYTES + 8]
                    .copy_from_slice(&f64::NAN.to_le_bytes());
                b
            },
        ];
        for (i, bytes) in cases.iter().enumerate() {
            match Container::from_bytes(bytes) {
                Err(CoreError::Container(_)) => {}
                other => panic!("case {i} produced {other:?}"),
            }
        }
    }

    #[test]
    fn mismatched_shapes_are_rejected_at_encode_time() {
        let space = build_space(4, 1.5).unwrap();
        let psi = vec![c64::new(1.0, 0.0); space.dim + 1];
        assert!(Container::state(&space, &psi).is_err());
        let mat = CMat::zeros(space.dim, space.dim + 2);
        assert!(Container::operator(&space, &mat).is_err());
    }

    #[test]
    fn report_csv_round_trips_exactly() {
        let rows = sample_rows();
        let text = report_csv(&rows).unwrap();
        assert!(text.starts_with("experiment,k,hbar,"));
        let back = parse_report_csv(&text).unwrap();
        assert_eq!(back.len(), rows.len());
        assert_eq!(back[0], rows[0]);
        // NaN cells survive as NaN (PartialEq cannot see that)
        assert_eq!(back[1].experiment, "speed-limit");
        assert!(back[1].ell_cl.is_nan() && back[1].b.is_nan());
        assert_eq!(back[1].seed, 7);
        // identical input → identical bytes
        assert_eq!(text, report_csv(&rows).unwrap());
    }

    #[test]
    fn report_parser_rejects_malformed_tables() {
        let good = report_csv(&sample_rows()).unwrap();
        let header = good.lines().next().unwrap();

        for bad in [
            String::new(),
            "not,the,header\n".to_string(),
            format!("{header}\nshort,row\n"),
            format!("{header}\n,1,{}\n", vec!["2"; 12].join(",")),
            good.replace("42", "4x2"),
            good.replace("0.9312", "0.93.12"),
            format!("{header}\n\n"),
        ] {
            assert!(
                matches!(parse_report_csv(&bad), Err(CoreError::Container(_))),
                "accepted {bad:?}"
            );
        }
    }

    #[test]
    fn sweep_and_diagnostic_tables_have_the_stated_shapes() {
        let row = SweepRow {
            experiment: "grid-superposition".into(),
            k: 256,
            hbar: 1.0 / 256.0,
            s: 0.25,
            s2inv_hbar: 1.0 / 16.0,
            overlap: 0.44,
            fidelity: 0.19,
            ell_q: 0.8,
            displaced: true,
            slope_window_id: 2,
        };
        let text = sweep_csv(std::slice::from_ref(&row)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
        let cells: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(cells.len(), SWEEP_COLUMNS.len());
        assert_eq!(cells[8], "true");

        let probe = probe_csv(&[ProbeRow { hbar: 0.5, mass: 1e-7, region_id: 3 }]);
        assert_eq!(probe, "hbar,mass,region_id\n0.5,0.0000001,3\n");

        let xy = xy_csv("theta", "value", &[(0.0, 1.0), (1.5, -2.0)]).unwrap();
        assert_eq!(xy, "theta,value\n0,1\n1.5,-2\n");
        assert!(xy_csv("a,b", "y", &[]).is_err());
        assert!(xy_csv("x", "", &[]).is_err());

        let bad = SweepRow { experiment: "grid\nbreak".into(), ..row };
        assert!(sweep_csv(&[bad]).is_err());
    }
}
