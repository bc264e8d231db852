//! Observed series `(X_t, Z_t)` and panels `(X_{t,i}, Z_{t,i})`, plus their CSV form.
//!
//! CSV layout: header `t,i,x,z1..zd` (`i` omitted for a single series), one row per observation,
//! `t` and `i` zero-based, `x` empty when the sample carries no response.

use std::io::{Read, Write};

use thiserror::Error;

use crate::processes::ProcessSpec;
use crate::scalar::Scalar;
use crate::table::{format_real, Table};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("sample needs at least one observation")]
    Empty,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("{what}: expected {expected}, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("malformed sample csv: {0}")]
    Csv(String),
}

impl SampleError {
    pub fn code(&self) -> &'static str {
        match self {
            SampleError::Empty => "empty-sample",
            SampleError::ZeroDimension => "invalid-dimension",
            SampleError::LengthMismatch { .. } => "length-mismatch",
            SampleError::Csv(_) => "bad-sample-file",
        }
    }
}

/// One series of `T` observations of a `d`-dimensional design, optionally with a response.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<S> {
    x: Option<Vec<S>>,
    /// Row-major `T × d`.
    z: Vec<S>,
    d: usize,
    seed: u64,
    spec: Option<ProcessSpec>,
}

impl<S: Scalar> Sample<S> {
    pub fn new(z: Vec<S>, d: usize, x: Option<Vec<S>>) -> Result<Self, SampleError> {
        if d == 0 {
            return Err(SampleError::ZeroDimension);
        }
        if z.is_empty() {
            return Err(SampleError::Empty);
        }
        if !z.len().is_multiple_of(d) {
            return Err(SampleError::LengthMismatch { what: "design values", expected: d, got: z.len() % d });
        }
        let t = z.len() / d;
        if let Some(x) = &x {
            if x.len() != t {
                return Err(SampleError::LengthMismatch { what: "response length", expected: t, got: x.len() });
            }
        }
        Ok(Sample { x, z, d, seed: 0, spec: None })
    }

    /// One-dimensional design from a plain slice.
    pub fn univariate(z: &[S], x: Option<&[S]>) -> Result<Self, SampleError> {
        Self::new(z.to_vec(), 1, x.map(<[S]>::to_vec))
    }

    pub fn with_provenance(mut self, seed: u64, spec: ProcessSpec) -> Self {
        self.seed = seed;
        self.spec = Some(spec);
        self
    }

    pub fn len(&self) -> usize {
        self.z.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn x(&self) -> Option<&[S]> {
        self.x.as_deref()
    }

    pub fn z_flat(&self) -> &[S] {
        &self.z
    }

    #[inline]
    pub fn z_row(&self, t: usize) -> &[S] {
        &self.z[t * self.d..(t + 1) * self.d]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> Option<&ProcessSpec> {
        self.spec.as_ref()
    }

    /// Per-coordinate sample standard deviation of `Z` (divisor `T`).
    pub fn z_std(&self) -> Vec<S> {
        let n = S::from_usize_lossy(self.len());
        (0..self.d)
            .map(|k| {
                let mean = self.z.iter().skip(k).step_by(self.d).fold(S::zero(), |a, &v| a + v) / n;
                let ss = self.z.iter().skip(k).step_by(self.d).fold(S::zero(), |a, &v| a + (v - mean) * (v - mean));
                (ss / n).sqrt()
            })
            .collect()
    }

    /// Same observations in another precision.
    pub fn cast<T: Scalar>(&self) -> Sample<T> {
        let conv = |v: &S| T::from_f64(v.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(T::nan);
        Sample {
            x: self.x.as_ref().map(|x| x.iter().map(conv).collect()),
            z: self.z.iter().map(conv).collect(),
            d: self.d,
            seed: self.seed,
            spec: self.spec.clone(),
        }
    }

    /// Same observations with every design point shifted and scaled: `λ (Z_t + shift)`.
    pub fn map_design(&self, shift: &[S], scale: S) -> Sample<S> {
        let z = self
            .z
            .chunks_exact(self.d)
            .flat_map(|row| row.iter().zip(shift).map(move |(&v, &s)| (v + s) * scale))
            .collect();
        Sample { z, ..self.clone() }
    }

    /// Observations reordered by `perm` (`perm[k]` is the source index of row `k`).
    pub fn permuted(&self, perm: &[usize]) -> Sample<S> {
        let z = perm.iter().flat_map(|&t| self.z_row(t).iter().copied()).collect();
        let x = self.x.as_ref().map(|x| perm.iter().map(|&t| x[t]).collect());
        Sample { z, x, ..self.clone() }
    }
}

/// `N` individuals observed over the same `T` times.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSample<S> {
    individuals: Vec<Sample<S>>,
    seed: u64,
    spec: Option<ProcessSpec>,
}

impl<S: Scalar> PanelSample<S> {
    pub fn new(individuals: Vec<Sample<S>>) -> Result<Self, SampleError> {
        let first = individuals.first().ok_or(SampleError::Empty)?;
        let (t, d) = (first.len(), first.dim());
        for s in &individuals {
            if s.len() != t {
                return Err(SampleError::LengthMismatch { what: "panel series length", expected: t, got: s.len() });
            }
            if s.dim() != d {
                return Err(SampleError::LengthMismatch { what: "panel dimension", expected: d, got: s.dim() });
            }
            if s.x().is_none() {
                return Err(SampleError::LengthMismatch { what: "panel response length", expected: t, got: 0 });
            }
        }
        Ok(PanelSample { individuals, seed: 0, spec: None })
    }

    pub fn with_provenance(mut self, seed: u64, spec: ProcessSpec) -> Self {
        self.seed = seed;
        self.spec = Some(spec);
        self
    }

    pub fn n(&self) -> usize {
        self.individuals.len()
    }

    pub fn t(&self) -> usize {
        self.individuals[0].len()
    }

    pub fn dim(&self) -> usize {
        self.individuals[0].dim()
    }

    pub fn individuals(&self) -> &[Sample<S>] {
        &self.individuals
    }

    pub fn individual(&self, i: usize) -> &Sample<S> {
        &self.individuals[i]
    }

    pub fn x_at(&self, t: usize, i: usize) -> S {
        self.individuals[i].x().expect("panel members carry responses")[t]
    }

    pub fn z_at(&self, t: usize, i: usize) -> &[S] {
        self.individuals[i].z_row(t)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> Option<&ProcessSpec> {
        self.spec.as_ref()
    }

    /// Pooled per-coordinate standard deviation of all `Z_{t,i}`.
    pub fn z_std(&self) -> Vec<S> {
        let d = self.dim();
        let count = S::from_usize_lossy(self.n() * self.t());
        (0..d)
            .map(|k| {
                let values = || self.individuals.iter().flat_map(move |s| s.z_flat().iter().skip(k).step_by(d));
                let mean = values().fold(S::zero(), |a, &v| a + v) / count;
                let ss = values().fold(S::zero(), |a, &v| a + (v - mean) * (v - mean));
                (ss / count).sqrt()
            })
            .collect()
    }
}

/// Either shape of sample file.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleFile {
    Series(Sample<f64>),
    Panel(PanelSample<f64>),
}

fn header(d: usize, panel: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    if panel {
        h.push("i".to_string());
    }
    h.push("x".to_string());
    h.extend((1..=d).map(|k| format!("z{k}")));
    h
}

pub fn sample_table(sample: &Sample<f64>) -> Table {
    let mut table = Table::new(header(sample.dim(), false));
    for t in 0..sample.len() {
        let mut row = vec![t.to_string()];
        row.push(sample.x().map(|x| format_real(x[t])).unwrap_or_default());
        row.extend(sample.z_row(t).iter().map(|&v| format_real(v)));
        table.push(row);
    }
    table
}

/// Rows ordered by time, then individual.
pub fn panel_table(panel: &PanelSample<f64>) -> Table {
    let mut table = Table::new(header(panel.dim(), true));
    for t in 0..panel.t() {
        for i in 0..panel.n() {
            let mut row = vec![t.to_string(), i.to_string(), format_real(panel.x_at(t, i))];
            row.extend(panel.z_at(t, i).iter().map(|&v| format_real(v)));
            table.push(row);
        }
    }
    table
}

pub fn write_sample_csv<W: Write>(sample: &SampleFile, w: W) -> std::io::Result<()> {
    match sample {
        SampleFile::Series(s) => sample_table(s).write_to(w),
        SampleFile::Panel(p) => panel_table(p).write_to(w),
    }
}

pub fn read_sample_csv<R: Read>(r: R) -> Result<SampleFile, SampleError> {
    let bad = |m: String| SampleError::Csv(m);
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers: Vec<String> = reader.headers().map_err(|e| bad(e.to_string()))?.iter().map(str::to_string).collect();
    let panel = headers.get(1).map(String::as_str) == Some("i");
    let x_col = if panel { 2 } else { 1 };
    if headers.first().map(String::as_str) != Some("t") || headers.get(x_col).map(String::as_str) != Some("x") {
        return Err(bad(format!("unexpected header {}", headers.join(","))));
    }
    let d = headers.len() - x_col - 1;
    for (k, name) in headers[x_col + 1..].iter().enumerate() {
        if *name != format!("z{}", k + 1) {
            return Err(bad(format!("unexpected column `{name}`")));
        }
    }
    if d == 0 {
        return Err(SampleError::ZeroDimension);
    }
    let parse_real = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("bad number `{s}`")));
    let parse_index = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(format!("bad index `{s}`")));

    // (t, i, x, z)
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != headers.len() {
            return Err(bad(format!("row has {} fields, header has {}", record.len(), headers.len())));
        }
        let t = parse_index(&record[0])?;
        let i = if panel { parse_index(&record[1])? } else { 0 };
        let x = match record[x_col].trim() {
            "" => None,
            v => Some(parse_real(v)?),
        };
        let z = (x_col + 1..record.len()).map(|k| parse_real(&record[k])).collect::<Result<Vec<_>, _>>()?;
        rows.push((t, i, x, z));
    }
    if rows.is_empty() {
        return Err(SampleError::Empty);
    }
    let n = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    let t_len = rows.iter().map(|r| r.0).max().unwrap_or(0) + 1;
    if rows.len() != n * t_len {
        return Err(bad(format!("expected {} rows for T={t_len}, N={n}, got {}", n * t_len, rows.len())));
    }
    let mut z = vec![vec![f64::NAN; t_len * d]; n];
    let mut x: Vec<Vec<Option<f64>>> = vec![vec![None; t_len]; n];
    let mut seen = vec![false; n * t_len];
    for (t, i, xv, zv) in rows {
        if std::mem::replace(&mut seen[i * t_len + t], true) {
            return Err(bad(format!("duplicate row t={t}, i={i}")));
        }
        z[i][t * d..(t + 1) * d].copy_from_slice(&zv);
        x[i][t] = xv;
    }
    let columns = z
        .into_iter()
        .zip(x)
        .map(|(z, x)| {
            let x = if x.iter().all(Option::is_none) {
                None
            } else {
                Some(x.into_iter().collect::<Option<Vec<_>>>().ok_or_else(|| bad("partially missing x".into()))?)
            };
            Sample::new(z, d, x)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if panel {
        Ok(SampleFile::Panel(PanelSample::new(columns)?))
    } else {
        Ok(SampleFile::Series(columns.into_iter().next().expect("n >= 1")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_mismatched_lengths() {
        assert_eq!(Sample::<f64>::new(vec![1.0, 2.0], 1, Some(vec![1.0])).unwrap_err().code(), "length-mismatch");
        assert_eq!(Sample::<f64>::new(vec![], 1, None).unwrap_err().code(), "empty-sample");
        assert_eq!(Sample::<f64>::new(vec![1.0, 2.0, 3.0], 2, None).unwrap_err().code(), "length-mismatch");
        let a = Sample::new(vec![1.0, 2.0], 1, Some(vec![0.0, 0.0])).unwrap();
        let b = Sample::new(vec![1.0], 1, Some(vec![0.0])).unwrap();
        assert!(PanelSample::new(vec![a, b]).is_err());
    }

    #[test]
    fn series_header_omits_individual() {
        let s = Sample::new(vec![0.5, -1.0, 2.0, 3.0], 2, None).unwrap();
        let text = sample_table(&s).to_csv_string();
        assert!(text.starts_with("t,x,z1,z2\n0,,5.0000000000000000e-1,"));
    }

    proptest! {
        #[test]
        fn panel_csv_round_trips(
            n in 1usize..4,
            t in 1usize..6,
            d in 1usize..3,
            values in proptest::collection::vec(-1e6f64..1e6, 4 * 6 * 3 * 2),
        ) {
            let mut it = values.into_iter();
            let cols: Vec<Sample<f64>> = (0..n)
                .map(|_| {
                    let z: Vec<f64> = (0..t * d).map(|_| it.next().unwrap()).collect();
                    let x: Vec<f64> = (0..t).map(|_| it.next().unwrap()).collect();
                    Sample::new(z, d, Some(x)).unwrap()
                })
                .collect();
            let panel = PanelSample::new(cols).unwrap();
            let mut buf = Vec::new();
            write_sample_csv(&SampleFile::Panel(panel.clone()), &mut buf).unwrap();
            match read_sample_csv(&buf[..]).unwrap() {
                SampleFile::Panel(p) => prop_assert_eq!(p, panel),
                SampleFile::Series(_) => prop_assert!(false, "expected a panel"),
            }
        }

        #[test]
        fn series_csv_round_trips(z in proptest::collection::vec(-1e3f64..1e3, 1..40), with_x in any::<bool>()) {
            let x = with_x.then(|| z.iter().map(|v| v * 2.0 + 1.0).collect::<Vec<_>>());
            let s = Sample::new(z, 1, x).unwrap();
            let mut buf = Vec::new();
            write_sample_csv(&SampleFile::Series(s.clone()), &mut buf).unwrap();
            prop_assert_eq!(read_sample_csv(&buf[..]).unwrap(), SampleFile::Series(s));
        }
    }
}
