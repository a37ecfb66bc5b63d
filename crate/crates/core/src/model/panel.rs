//! Day-major panels and their CSV forms.

use std::io::{Read, Write};
use std::ops::Range;

use crate::error::{invalid, Error, Result};

/// `T × N` array stored day by day.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    t_len: usize,
    n: usize,
    data: Vec<f64>,
}

impl Panel {
    pub fn zeros(t_len: usize, n: usize) -> Self {
        Self { t_len, n, data: vec![0.0; t_len * n] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let t_len = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return invalid("ragged panel rows");
        }
        Ok(Self { t_len, n, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_vec(t_len: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != t_len * n {
            return invalid(format!("panel data has {} entries, expected {t_len}x{n}", data.len()));
        }
        Ok(Self { t_len, n, data })
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.n..(t + 1) * self.n]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.data[t * self.n..(t + 1) * self.n]
    }

    pub fn get(&self, t: usize, i: usize) -> f64 {
        self.data[t * self.n + i]
    }

    pub fn set(&mut self, t: usize, i: usize, v: f64) {
        self.data[t * self.n + i] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1)).take(self.t_len)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        (0..self.t_len).map(|t| self.get(t, i)).collect()
    }

    /// Per-asset time averages.
    pub fn column_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for row in self.rows() {
            for (acc, x) in m.iter_mut().zip(row) {
                *acc += x;
            }
        }
        m.iter_mut().for_each(|x| *x /= self.t_len as f64);
        m
    }

    pub fn days(&self, range: Range<usize>) -> Panel {
        Panel { t_len: range.len(), n: self.n, data: self.data[range.start * self.n..range.end * self.n].to_vec() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Panel {
        Panel { t_len: self.t_len, n: self.n, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// Aligned daily squared returns and realized measures.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    pub r2: Panel,
    pub rm: Panel,
}

impl PanelSeries {
    /// Checks shapes and that every entry is finite and nonnegative.
    pub fn new(r2: Panel, rm: Panel) -> Result<Self> {
        if r2.t_len != rm.t_len || r2.n != rm.n {
            return invalid(format!("r2 panel is {}x{} but rm panel is {}x{}", r2.t_len, r2.n, rm.t_len, rm.n));
        }
        for (name, p) in [("r2", &r2), ("rm", &rm)] {
            if let Some(k) = p.data.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::Data(format!("{name} at day {} asset {} is {}", k / p.n, k % p.n, p.data[k])));
            }
        }
        Ok(Self { r2, rm })
    }

    pub fn t_len(&self) -> usize {
        self.r2.t_len
    }

    pub fn n(&self) -> usize {
        self.r2.n
    }

    pub fn days(&self, range: Range<usize>) -> PanelSeries {
        PanelSeries { r2: self.r2.days(range.clone()), rm: self.rm.days(range) }
    }

    /// Long CSV `day,asset,r2,rm`, 0-based indices, day-major order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_long(out, ["day", "asset", "r2", "rm"], &self.r2, &self.rm)
    }

    pub fn read_csv<R: Read>(input: R, path: &str) -> Result<Self> {
        let (a, b) = read_long(input, path, ["day", "asset", "r2", "rm"])?;
        Self::new(a, b).map_err(|e| match e {
            Error::Data(msg) | Error::InvalidInput(msg) => Error::Parse { path: path.into(), line: 0, msg },
            other => other,
        })
    }
}

/// Filtered conditional variances `h` and realized-measure means `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPanels {
    pub h: Panel,
    pub mu: Panel,
}

impl LatentPanels {
    /// Long CSV `day,asset,h,mu`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_long(out, ["day", "asset", "h", "mu"], &self.h, &self.mu)
    }

    pub fn read_csv<R: Read>(input: R, path: &str) -> Result<Self> {
        let (h, mu) = read_long(input, path, ["day", "asset", "h", "mu"])?;
        Ok(Self { h, mu })
    }
}

/// Floats are written with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_long<W: Write>(out: W, header: [&str; 4], a: &Panel, b: &Panel) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::from(e);
    w.write_record(header).map_err(io)?;
    for t in 0..a.t_len {
        for i in 0..a.n {
            w.write_record([t.to_string(), i.to_string(), fmt_f64(a.get(t, i)), fmt_f64(b.get(t, i))]).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_long<R: Read>(input: R, path: &str, header: [&str; 4]) -> Result<(Panel, Panel)> {
    let perr = |line: u64, msg: String| Error::Parse { path: path.into(), line, msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let got = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    if got.iter().ne(header.iter().copied()) {
        return Err(perr(1, format!("expected header `{}`", header.join(","))));
    }
    let mut cells: Vec<(usize, usize, f64, f64, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| perr(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 4 {
            return Err(perr(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let idx = |k: usize| rec[k].parse::<usize>().map_err(|e| perr(line, format!("`{}`: {e}", &rec[k])));
        let val = |k: usize| {
            let v = rec[k].parse::<f64>().map_err(|e| perr(line, format!("`{}`: {e}", &rec[k])))?;
            if v.is_nan() {
                return Err(perr(line, format!("{} is NaN", header[k])));
            }
            Ok(v)
        };
        cells.push((idx(0)?, idx(1)?, val(2)?, val(3)?, line));
    }
    let t_len = cells.iter().map(|c| c.0 + 1).max().unwrap_or(0);
    let n = cells.iter().map(|c| c.1 + 1).max().unwrap_or(0);
    let mut a = Panel::zeros(t_len, n);
    let mut b = Panel::zeros(t_len, n);
    let mut seen = vec![false; t_len * n];
    for (t, i, x, y, line) in cells {
        if std::mem::replace(&mut seen[t * n + i], true) {
            return Err(perr(line, format!("duplicate entry for day {t} asset {i}")));
        }
        a.set(t, i, x);
        b.set(t, i, y);
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        return Err(perr(0, format!("missing entry for day {} asset {}", k / n, k % n)));
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panel_csv_round_trip_is_exact() {
        let r2 = Panel::from_rows(vec![vec![0.1, 1.0 / 3.0], vec![2e-9, 7.25]]).unwrap();
        let rm = Panel::from_rows(vec![vec![0.2, 0.3], vec![std::f64::consts::PI, 0.0]]).unwrap();
        let p = PanelSeries::new(r2, rm).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("day,asset,r2,rm\n0,0,"));
        assert_eq!(PanelSeries::read_csv(&buf[..], "p.csv").unwrap(), p);
    }

    #[test]
    fn panel_validation() {
        let ok = Panel::from_rows(vec![vec![1.0]]).unwrap();
        let nan = Panel::from_rows(vec![vec![f64::NAN]]).unwrap();
        let neg = Panel::from_rows(vec![vec![-1.0]]).unwrap();
        assert!(matches!(PanelSeries::new(ok.clone(), nan), Err(Error::Data(_))));
        assert!(matches!(PanelSeries::new(neg, ok.clone()), Err(Error::Data(_))));
        assert!(PanelSeries::new(ok, Panel::zeros(2, 1)).is_err());

        let err = PanelSeries::read_csv("day,asset,r2,rm\n0,0,1,1\n0,0,1,2\n".as_bytes(), "p.csv").unwrap_err();
        assert!(err.to_string().contains("p.csv:3"), "{err}");
        let err = PanelSeries::read_csv("day,asset,r2,rm\n0,0,1,1\n1,1,1,2\n".as_bytes(), "p.csv").unwrap_err();
        assert!(err.to_string().contains("missing"), "{err}");
    }
}
