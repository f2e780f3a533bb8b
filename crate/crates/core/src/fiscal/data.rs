//! Quarterly fiscal dataset: parsing, sample window and deterministic terms.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::likelihood::ProxySet;
use crate::var::{DeterministicDesign, TermKind, TimeSeriesPanel};

/// A calendar quarter, written `YYYYQ#`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    year: i32,
    quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::InvalidInput(format!("quarter must be 1-4, got {quarter}")));
        }
        if !(0..=9999).contains(&year) {
            return Err(Error::InvalidInput(format!("year {year} outside 0-9999")));
        }
        Ok(Self { year, quarter })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn quarter(&self) -> u8 {
        self.quarter
    }

    pub fn next(&self) -> Self {
        if self.quarter == 4 {
            Self { year: self.year + 1, quarter: 1 }
        } else {
            Self { year: self.year, quarter: self.quarter + 1 }
        }
    }

    /// Quarters elapsed since 0000Q1.
    pub fn ordinal(&self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("`{s}` is not a quarter of the form YYYYQ#"));
        let s = s.trim();
        let b = s.as_bytes();
        if b.len() != 6 || !(b[4] == b'Q' || b[4] == b'q') || !b[..4].iter().all(u8::is_ascii_digit) {
            return Err(bad());
        }
        let year: i32 = s[..4].parse().map_err(|_| bad())?;
        let quarter = match b[5] {
            c @ b'1'..=b'4' => c - b'0',
            _ => return Err(bad()),
        };
        Self::new(year, quarter)
    }
}

/// Column names and sample window for [`load_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaConfig {
    pub date: String,
    pub tax: String,
    pub spend: String,
    pub output: String,
    pub tax_proxy: String,
    pub tfp_proxy: String,
    /// Inclusive window; `None` keeps every row.
    pub sample: Option<(Quarter, Quarter)>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            date: "date".into(),
            tax: "tax".into(),
            spend: "spend".into(),
            output: "output".into(),
            tax_proxy: "tax_proxy".into(),
            tfp_proxy: "tfp_proxy".into(),
            sample: Some((Quarter { year: 1950, quarter: 2 }, Quarter { year: 2006, quarter: 4 })),
        }
    }
}

/// Variables in the order (τ, g, y) and both proxies, normalized to mean
/// zero and unit variance over the sample window.
#[derive(Debug, Clone, PartialEq)]
pub struct FiscalDataset {
    dates: Vec<Quarter>,
    values: DMatrix<f64>,
    tax_proxy: Vec<f64>,
    tfp_proxy: Vec<f64>,
}

pub const VARIABLES: [&str; 3] = ["tax", "spend", "output"];
pub const TAX: usize = 0;
pub const SPEND: usize = 1;
pub const OUTPUT: usize = 2;

impl FiscalDataset {
    /// Builds a dataset from already-windowed columns; normalizes the proxies.
    pub fn new(dates: Vec<Quarter>, values: DMatrix<f64>, tax_proxy: Vec<f64>, tfp_proxy: Vec<f64>) -> Result<Self> {
        let t = dates.len();
        if t == 0 {
            return Err(Error::InvalidInput("dataset has no observations".into()));
        }
        if values.shape() != (t, 3) || tax_proxy.len() != t || tfp_proxy.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "{t} dates, {}×{} values, {} / {} proxy rows",
                values.nrows(),
                values.ncols(),
                tax_proxy.len(),
                tfp_proxy.len()
            )));
        }
        check_contiguous(&dates, |i| i + 2)?;
        for (i, v) in values.row_iter().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data { row: i + 2, message: "non-finite variable".into() });
            }
        }
        Ok(Self {
            dates,
            values,
            tax_proxy: normalize(tax_proxy, "tax_proxy")?,
            tfp_proxy: normalize(tfp_proxy, "tfp_proxy")?,
        })
    }

    pub fn nobs(&self) -> usize {
        self.dates.len()
    }

    pub fn dates(&self) -> &[Quarter] {
        &self.dates
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn tax_proxy(&self) -> &[f64] {
        &self.tax_proxy
    }

    pub fn tfp_proxy(&self) -> &[f64] {
        &self.tfp_proxy
    }

    /// Panel with the first `lags` quarters as presample.
    pub fn panel(&self, lags: usize) -> Result<TimeSeriesPanel> {
        TimeSeriesPanel::with_leading_presample(&self.values, VARIABLES.iter().map(|s| s.to_string()).collect(), lags)
    }

    /// Dates of the effective sample (after the presample).
    pub fn effective_dates(&self, lags: usize) -> &[Quarter] {
        &self.dates[lags.min(self.nobs())..]
    }

    /// Proxy columns over the effective sample, each paired with its target shock.
    pub fn proxy_set(&self, lags: usize, columns: &[(ProxyColumn, usize)]) -> Result<ProxySet> {
        let t = self.nobs().saturating_sub(lags);
        let z = DMatrix::from_fn(t, columns.len(), |r, k| self.proxy(columns[k].0)[lags + r]);
        ProxySet::new(z, columns.iter().map(|c| c.1).collect(), 3)
    }

    pub fn proxy(&self, which: ProxyColumn) -> &[f64] {
        match which {
            ProxyColumn::Tax => &self.tax_proxy,
            ProxyColumn::Tfp => &self.tfp_proxy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProxyColumn {
    Tax,
    Tfp,
}

impl ProxyColumn {
    pub fn name(&self) -> &'static str {
        match self {
            ProxyColumn::Tax => "tax_proxy",
            ProxyColumn::Tfp => "tfp_proxy",
        }
    }
}

fn normalize(mut z: Vec<f64>, name: &str) -> Result<Vec<f64>> {
    let n = z.len() as f64;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name} contains non-finite values")));
    }
    let mean = z.iter().sum::<f64>() / n;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 1e-300) {
        return Err(Error::Degenerate(format!("{name} has zero variance and cannot be normalized")));
    }
    let sd = var.sqrt();
    z.iter_mut().for_each(|v| *v = (*v - mean) / sd);
    Ok(z)
}

fn check_contiguous(dates: &[Quarter], row: impl Fn(usize) -> usize) -> Result<()> {
    for i in 1..dates.len() {
        let expected = dates[i - 1].next();
        if dates[i] != expected {
            let message = if dates[i] > expected {
                format!("date gap: quarter {expected} is missing (found {})", dates[i])
            } else {
                format!("dates out of order: {} follows {}", dates[i], dates[i - 1])
            };
            return Err(Error::Data { row: row(i), message });
        }
    }
    Ok(())
}

/// Reads the CSV file at `path`.
pub fn load_dataset(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<FiscalDataset> {
    let file = std::fs::File::open(path.as_ref())?;
    parse_dataset(file, schema)
}

/// Parses CSV text with a header row. Row numbers in errors count the header as row 1.
pub fn parse_dataset<R: Read>(reader: R, schema: &SchemaConfig) -> Result<FiscalDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(false).from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Data { row: 1, message: format!("unreadable header: {e}") })?
        .clone();
    let names = [
        &schema.date,
        &schema.tax,
        &schema.spend,
        &schema.output,
        &schema.tax_proxy,
        &schema.tfp_proxy,
    ];
    let mut idx = [0usize; 6];
    let missing: Vec<&str> = names
        .iter()
        .enumerate()
        .filter_map(|(k, name)| match header.iter().position(|h| h == name.as_str()) {
            Some(p) => {
                idx[k] = p;
                None
            }
            None => Some(name.as_str()),
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data { row: 1, message: format!("missing column(s): {}", missing.join(", ")) });
    }

    let mut dates = Vec::new();
    let mut rows: Vec<[f64; 5]> = Vec::new();
    let mut lines = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data { row: line, message: e.to_string() })?;
        let date: Quarter = rec[idx[0]]
            .parse()
            .map_err(|e: Error| Error::Data { row: line, message: e.to_string() })?;
        let mut vals = [0.0; 5];
        for k in 0..5 {
            let field = &rec[idx[k + 1]];
            let v: f64 = field.parse().map_err(|_| Error::Data {
                row: line,
                message: format!("column `{}`: `{field}` is not a number", names[k + 1]),
            })?;
            if !v.is_finite() {
                return Err(Error::Data { row: line, message: format!("column `{}` is not finite", names[k + 1]) });
            }
            vals[k] = v;
        }
        dates.push(date);
        rows.push(vals);
        lines.push(line);
    }
    if dates.is_empty() {
        return Err(Error::Data { row: 2, message: "no data rows".into() });
    }
    check_contiguous(&dates, |i| lines[i])?;

    let (lo, hi) = match schema.sample {
        Some((start, end)) => {
            if start > end {
                return Err(Error::InvalidInput(format!("sample start {start} is after its end {end}")));
            }
            let lo = dates
                .iter()
                .position(|d| *d == start)
                .ok_or_else(|| Error::InvalidInput(format!("sample start {start} is not in the file")))?;
            let hi = dates
                .iter()
                .position(|d| *d == end)
                .ok_or_else(|| Error::InvalidInput(format!("sample end {end} is not in the file")))?;
            (lo, hi)
        }
        None => (0, dates.len() - 1),
    };
    let rows = &rows[lo..=hi];
    let values = DMatrix::from_fn(rows.len(), 3, |r, c| rows[r][c]);
    FiscalDataset::new(
        dates[lo..=hi].to_vec(),
        values,
        rows.iter().map(|r| r[3]).collect(),
        rows.iter().map(|r| r[4]).collect(),
    )
}

pub const DUMMY_QUARTER: Quarter = Quarter { year: 1975, quarter: 2 };

/// Constant, linear and quadratic trend (1-based over the effective sample)
/// and a 1975Q2 dummy. The dummy is dropped, with a warning, when that quarter
/// lies outside the effective sample.
pub fn build_design(dataset: &FiscalDataset, lags: usize) -> Result<(DeterministicDesign, Vec<String>)> {
    let dates = dataset.effective_dates(lags);
    let t = dates.len();
    let mut cols = vec![
        ("const", TermKind::Constant, vec![1.0; t]),
        ("trend", TermKind::LinearTrend, (1..=t).map(|k| k as f64).collect()),
        ("trend2", TermKind::QuadraticTrend, (1..=t).map(|k| (k * k) as f64).collect()),
    ];
    let mut warnings = Vec::new();
    match dates.iter().position(|d| *d == DUMMY_QUARTER) {
        Some(p) => {
            let mut d = vec![0.0; t];
            d[p] = 1.0;
            cols.push(("d1975q2", TermKind::Dummy, d));
        }
        None => warnings.push(format!("{DUMMY_QUARTER} is outside the estimation sample; dummy omitted")),
    }
    let terms = DMatrix::from_fn(t, cols.len(), |r, c| cols[c].2[r]);
    let design = DeterministicDesign::new(
        terms,
        cols.iter().map(|c| c.0.to_string()).collect(),
        cols.iter().map(|c| c.1).collect(),
    )?;
    Ok((design, warnings))
}
