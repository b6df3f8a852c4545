//! CSV export/import of sample banks, for cross-implementation checks.
//!
//! Layout (no header row, variable-length records):
//!
//! ```text
//! bank,v1,<rho>,<n_series>,<slots_per_frame>
//! <series>,<slot>,bu,<rows>,<cols>,re,im,re,im,...
//! <series>,<slot>,ur,<rows>,<cols>,re,im,re,im,...
//! ```
//!
//! One `bu` record (H̃_d, N_t×N_r) and one `ur` record (H̃_r, N×N_r) per
//! stored slot, slots 0..=T in order. Entries are row-major with real and
//! imaginary parts interleaved, printed in shortest round-trip form.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{ChannelSample, ChannelSampleBank};
use crate::error::{Error, Result};
use crate::linalg::CMat;

fn matrix_record(series: usize, slot: usize, link: &str, m: &CMat) -> Vec<String> {
    let mut rec = vec![series.to_string(), slot.to_string(), link.to_string(), m.nrows().to_string(), m.ncols().to_string()];
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            rec.push(z.re.to_string());
            rec.push(z.im.to_string());
        }
    }
    rec
}

pub fn write_bank_csv<W: Write>(bank: &ChannelSampleBank, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).flexible(true).from_writer(out);
    w.write_record(["bank".to_string(), "v1".into(), bank.rho.to_string(), bank.n_series().to_string(), bank.slots_per_frame().to_string()])?;
    for (s, series) in bank.series.iter().enumerate() {
        for (t, smp) in series.iter().enumerate() {
            w.write_record(matrix_record(s, t, "bu", &smp.nlos_bu))?;
            w.write_record(matrix_record(s, t, "ur", &smp.nlos_ur))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::BankFormat(format!("record {:?}: bad or missing {what}", rec.position().map(|p| p.line()))))
}

fn parse_matrix(rec: &csv::StringRecord, expect_link: &str, series: usize, slot: usize) -> Result<CMat> {
    let s: usize = field(rec, 0, "series")?;
    let t: usize = field(rec, 1, "slot")?;
    let link = rec.get(2).unwrap_or_default();
    if s != series || t != slot || link != expect_link {
        return Err(Error::BankFormat(format!("expected ({series},{slot},{expect_link}), found ({s},{t},{link})")));
    }
    let rows: usize = field(rec, 3, "rows")?;
    let cols: usize = field(rec, 4, "cols")?;
    if rec.len() != 5 + 2 * rows * cols {
        return Err(Error::BankFormat(format!("({s},{t},{link}): expected {} values, found {}", 2 * rows * cols, rec.len() - 5)));
    }
    let mut m = CMat::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let k = 5 + 2 * (r * cols + c);
            m[(r, c)] = Complex64::new(field(rec, k, "real part")?, field(rec, k + 1, "imaginary part")?);
        }
    }
    Ok(m)
}

pub fn read_bank_csv<R: Read>(input: R) -> Result<ChannelSampleBank> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = rdr.records();
    let head = records.next().ok_or_else(|| Error::BankFormat("empty input".into()))??;
    if head.get(0) != Some("bank") || head.get(1) != Some("v1") {
        return Err(Error::BankFormat("missing `bank,v1` header".into()));
    }
    let rho: f64 = field(&head, 2, "rho")?;
    let n_series: usize = field(&head, 3, "series count")?;
    let slots: usize = field(&head, 4, "slots per frame")?;

    let mut series = Vec::with_capacity(n_series);
    for s in 0..n_series {
        let mut seq = Vec::with_capacity(slots + 1);
        for t in 0..=slots {
            let mut next = |link: &str| -> Result<CMat> {
                let rec = records.next().ok_or_else(|| Error::BankFormat(format!("truncated at series {s} slot {t}")))??;
                parse_matrix(&rec, link, s, t)
            };
            let nlos_bu = next("bu")?;
            let nlos_ur = next("ur")?;
            seq.push(ChannelSample { nlos_bu, nlos_ur, slot_index: t });
        }
        series.push(seq);
    }
    if records.next().is_some() {
        return Err(Error::BankFormat("trailing records".into()));
    }
    Ok(ChannelSampleBank { series, rho })
}
