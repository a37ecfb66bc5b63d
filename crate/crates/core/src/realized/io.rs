//! Intraday CSV `day,tick,asset,logprice` with 0-based indices.

use std::io::{Read, Write};

use super::IntradayPanel;
use crate::error::{Error, Result};
use crate::model::fmt_f64;

const HEADER: [&str; 4] = ["day", "tick", "asset", "logprice"];

pub fn write_intraday_csv<W: Write>(panel: &IntradayPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::from(e);
    w.write_record(HEADER).map_err(io)?;
    for l in 0..panel.l_days() {
        for m in 0..panel.m_ticks() {
            for i in 0..panel.n() {
                w.write_record([l.to_string(), m.to_string(), i.to_string(), fmt_f64(panel.get(l, m, i))])
                    .map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a complete `L × M × N` grid. The start price is set to the first
/// tick of day 0, so the first daily return runs from the open.
pub fn read_intraday_csv<R: Read>(input: R, path: &str) -> Result<IntradayPanel> {
    let perr = |line: u64, msg: String| Error::Parse { path: path.into(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let got = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if got.iter().ne(HEADER.iter().copied()) {
        return Err(perr(1, format!("expected header `{}`", HEADER.join(","))));
    }
    let mut cells = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(perr(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let idx = |k: usize| rec[k].parse::<usize>().map_err(|e| perr(line, format!("`{}`: {e}", &rec[k])));
        let v = rec[3].parse::<f64>().map_err(|e| perr(line, format!("`{}`: {e}", &rec[3])))?;
        if !v.is_finite() {
            return Err(perr(line, format!("log price must be finite, got {v}")));
        }
        cells.push((idx(0)?, idx(1)?, idx(2)?, v, line));
    }
    let l = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let m = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let n = cells.iter().map(|c| c.2 + 1).max().unwrap_or(0);
    let mut logp = vec![0.0; l * m * n];
    let mut seen = vec![false; l * m * n];
    for (d, t, i, v, line) in cells {
        let k = (d * m + t) * n + i;
        if std::mem::replace(&mut seen[k], true) {
            return Err(perr(line, format!("duplicate entry for day {d} tick {t} asset {i}")));
        }
        logp[k] = v;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let (d, t, i) = (k / (m * n), (k / n) % m, k % n);
        return Err(perr(0, format!("missing entry for day {d} tick {t} asset {i}")));
    }
    let start = logp[..n].to_vec();
    IntradayPanel::new(l, m, n, start, logp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realized::{simulate_diffusion, DiffusionSpec};

    #[test]
    fn round_trip_keeps_ticks() {
        let spec = DiffusionSpec { tau: vec![0.2, 0.5], kappa: 0.5, noise_sd: 0.0 };
        let p = simulate_diffusion(&spec, 3, 5, 8).unwrap();
        let mut buf = Vec::new();
        write_intraday_csv(&p, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("day,tick,asset,logprice\n0,0,0,"));
        let back = read_intraday_csv(&buf[..], "i.csv").unwrap();
        assert_eq!(back.logp, p.logp);
        assert_eq!(back.start(), &[p.get(0, 0, 0), p.get(0, 0, 1)]);
    }

    #[test]
    fn reports_missing_and_bad_rows() {
        let err = read_intraday_csv("day,tick,asset,logprice\n0,0,0,1\n0,1,0,x\n".as_bytes(), "a.csv").unwrap_err();
        assert!(err.to_string().starts_with("a.csv:3:"), "{err}");
        let err = read_intraday_csv("day,tick,asset,logprice\n0,0,0,1\n1,1,0,1\n".as_bytes(), "a.csv").unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }
}
