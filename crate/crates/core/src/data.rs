//! Observation tables and sequence tensors with per-feature domains.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::error::{AceError, Result};

/// Closed interval of values a doer may set a feature to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub low: f64,
    pub high: f64,
}

impl Domain {
    pub fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low && x <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }

    pub fn shifted(&self, by: f64) -> Self {
        Self::new(self.low + by, self.high + by)
    }
}

/// Domain overrides keyed by feature name, read from `{"feature": [low, high]}`.
pub type DomainMap = HashMap<String, Domain>;

pub fn read_domain_map(text: &str) -> Result<DomainMap> {
    let raw: HashMap<String, [f64; 2]> = serde_json::from_str(text)?;
    raw.into_iter()
        .map(|(name, [low, high])| {
            if !(low.is_finite() && high.is_finite()) || low > high {
                return Err(AceError::Parse(format!("bad domain for `{name}`: [{low}, {high}]")));
            }
            Ok((name, Domain::new(low, high)))
        })
        .collect()
}

pub fn load_domain_map(path: impl AsRef<Path>) -> Result<DomainMap> {
    read_domain_map(&std::fs::read_to_string(path)?)
}

fn observed_domain(values: impl Iterator<Item = f64>) -> Domain {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Domain::new(lo, hi)
}

fn merge_domains(names: &[String], observed: Vec<Domain>, given: Option<&DomainMap>) -> Result<Vec<Domain>> {
    names
        .iter()
        .zip(observed)
        .map(|(name, obs)| match given.and_then(|g| g.get(name)) {
            None => Ok(obs),
            Some(d) if d.low <= obs.low && d.high >= obs.high => Ok(*d),
            Some(d) => Err(AceError::Parse(format!(
                "domain [{}, {}] of `{name}` does not cover observed range [{}, {}]",
                d.low, d.high, obs.low, obs.high
            ))),
        })
        .collect()
}

fn parse_field(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| AceError::Parse(format!("line {line}: `{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(AceError::NonFinite("dataset entry"));
    }
    Ok(v)
}

/// Real-valued observation table, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub rows: Array2<f64>,
    pub domains: Vec<Domain>,
}

impl Dataset {
    /// Builds a dataset; features without a given domain use the observed range.
    pub fn new(feature_names: Vec<String>, rows: Array2<f64>, given: Option<&DomainMap>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(AceError::EmptyData);
        }
        if feature_names.len() != rows.ncols() {
            return Err(AceError::Shape { expected: rows.ncols(), got: feature_names.len() });
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(AceError::NonFinite("dataset entry"));
        }
        let observed = rows.columns().into_iter().map(|c| observed_domain(c.iter().copied())).collect();
        let domains = merge_domains(&feature_names, observed, given)?;
        Ok(Self { feature_names, rows, domains })
    }

    /// Dataset with generated names `x0, x1, ...`.
    pub fn from_rows(rows: Array2<f64>) -> Result<Self> {
        let names = (0..rows.ncols()).map(|i| format!("x{i}")).collect();
        Self::new(names, rows, None)
    }

    pub fn read_csv<R: Read>(reader: R, given: Option<&DomainMap>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut flat = Vec::new();
        let mut n = 0;
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(AceError::Parse(format!("line {}: expected {} fields", line + 2, names.len())));
            }
            for field in rec.iter() {
                flat.push(parse_field(field, line + 2)?);
            }
            n += 1;
        }
        let rows = Array2::from_shape_vec((n, names.len()), flat).map_err(|e| AceError::Parse(e.to_string()))?;
        Self::new(names, rows, given)
    }

    pub fn load_csv(path: impl AsRef<Path>, given: Option<&DomainMap>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, given)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.feature_names)?;
        for row in self.rows.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn num_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| AceError::Parse(format!("unknown feature `{name}`")))
    }

    pub fn check_feature(&self, i: usize) -> Result<()> {
        if i >= self.num_features() {
            return Err(AceError::FeatureIndex { index: i, features: self.num_features() });
        }
        Ok(())
    }

    /// Removes a column (e.g. a label) and returns it.
    pub fn take_column(&mut self, name: &str) -> Result<Array1<f64>> {
        let i = self.feature_index(name)?;
        let col = self.rows.column(i).to_owned();
        self.rows.remove_index(Axis(1), i);
        self.feature_names.remove(i);
        self.domains.remove(i);
        if self.rows.ncols() == 0 {
            return Err(AceError::EmptyData);
        }
        Ok(col)
    }

    /// Rows contracted toward the column means by factor `s`; domains follow.
    pub fn contracted(&self, s: f64) -> Self {
        let mean = self.rows.mean_axis(Axis(0)).expect("non-empty");
        let rows = (&self.rows - &mean) * s + &mean;
        let domains = self
            .domains
            .iter()
            .zip(mean.iter())
            .map(|(d, &m)| Domain::new(m + s * (d.low - m), m + s * (d.high - m)))
            .collect();
        Self { feature_names: self.feature_names.clone(), rows, domains }
    }

    /// Every row and domain moved by `offset`.
    pub fn shifted(&self, offset: &Array1<f64>) -> Self {
        let rows = &self.rows + offset;
        let domains = self.domains.iter().zip(offset).map(|(d, &c)| d.shifted(c)).collect();
        Self { feature_names: self.feature_names.clone(), rows, domains }
    }
}

/// Variable-length multivariate sequences sharing a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    /// One `steps x features` matrix per sequence.
    pub sequences: Vec<Array2<f64>>,
    /// Feature-level domain overrides, applied at every step.
    pub domains: Option<Vec<Domain>>,
}

impl SequenceDataset {
    pub fn new(feature_names: Vec<String>, ids: Vec<String>, sequences: Vec<Array2<f64>>) -> Result<Self> {
        if sequences.is_empty() {
            return Err(AceError::EmptyData);
        }
        if ids.len() != sequences.len() {
            return Err(AceError::Shape { expected: sequences.len(), got: ids.len() });
        }
        for s in &sequences {
            if s.ncols() != feature_names.len() {
                return Err(AceError::Shape { expected: feature_names.len(), got: s.ncols() });
            }
            if s.nrows() == 0 {
                return Err(AceError::EmptyData);
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(AceError::NonFinite("sequence entry"));
            }
        }
        Ok(Self { feature_names, ids, sequences, domains: None })
    }

    pub fn with_domains(mut self, given: &DomainMap) -> Result<Self> {
        let k = self.num_features();
        let observed = (0..k)
            .map(|f| observed_domain(self.sequences.iter().flat_map(|s| s.column(f).to_vec())))
            .collect();
        self.domains = Some(merge_domains(&self.feature_names, observed, Some(given))?);
        Ok(self)
    }

    /// Reads `seq_id,step,<features...>` rows; steps of each sequence must be `0..T`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.len() < 3 || header[0] != "seq_id" || header[1] != "step" {
            return Err(AceError::Parse("sequence csv must start with `seq_id,step` and list features".into()));
        }
        let names = header[2..].to_vec();
        let mut order: Vec<String> = Vec::new();
        let mut rows: HashMap<String, Vec<(usize, Vec<f64>)>> = HashMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(AceError::Parse(format!("line {}: expected {} fields", line + 2, header.len())));
            }
            let id = rec[0].to_string();
            let step: usize = rec[1]
                .parse()
                .map_err(|_| AceError::Parse(format!("line {}: bad step `{}`", line + 2, &rec[1])))?;
            let values = rec.iter().skip(2).map(|f| parse_field(f, line + 2)).collect::<Result<Vec<_>>>()?;
            if !rows.contains_key(&id) {
                order.push(id.clone());
            }
            rows.entry(id).or_default().push((step, values));
        }
        let mut sequences = Vec::with_capacity(order.len());
        for id in &order {
            let mut steps = rows.remove(id).expect("recorded id");
            steps.sort_by_key(|(s, _)| *s);
            if steps.iter().enumerate().any(|(i, (s, _))| *s != i) {
                return Err(AceError::Parse(format!("sequence `{id}` steps are not contiguous from 0")));
            }
            let t = steps.len();
            let flat: Vec<f64> = steps.into_iter().flat_map(|(_, v)| v).collect();
            sequences.push(Array2::from_shape_vec((t, names.len()), flat).map_err(|e| AceError::Parse(e.to_string()))?);
        }
        Self::new(names, order, sequences)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["seq_id".to_string(), "step".to_string()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for (id, seq) in self.ids.iter().zip(&self.sequences) {
            for (step, row) in seq.rows().into_iter().enumerate() {
                let mut rec = vec![id.clone(), step.to_string()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn min_len(&self) -> usize {
        self.sequences.iter().map(|s| s.nrows()).min().unwrap_or(0)
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| AceError::Parse(format!("unknown feature `{name}`")))
    }

    /// Sequence `s` as a list of step vectors.
    pub fn steps(&self, s: usize) -> Vec<Array1<f64>> {
        self.sequences[s].rows().into_iter().map(|r| r.to_owned()).collect()
    }

    /// Domain of `feature` at `step`: the override if given, else the range
    /// observed over sequences that reach `step`.
    pub fn domain(&self, step: usize, feature: usize) -> Result<Domain> {
        if feature >= self.num_features() {
            return Err(AceError::FeatureIndex { index: feature, features: self.num_features() });
        }
        if let Some(d) = &self.domains {
            return Ok(d[feature]);
        }
        let values: Vec<f64> = self
            .sequences
            .iter()
            .filter(|s| s.nrows() > step)
            .map(|s| s[(step, feature)])
            .collect();
        if values.is_empty() {
            return Err(AceError::SequenceLength { needed: step, available: self.min_len() });
        }
        Ok(observed_domain(values.into_iter()))
    }

    /// Keeps the first `steps` steps of every sequence long enough.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        let (ids, sequences): (Vec<_>, Vec<_>) = self
            .ids
            .iter()
            .zip(&self.sequences)
            .filter(|(_, s)| s.nrows() >= steps)
            .map(|(id, s)| (id.clone(), s.slice(ndarray::s![..steps, ..]).to_owned()))
            .unzip();
        let mut out = Self::new(self.feature_names.clone(), ids, sequences)?;
        out.domains = self.domains.clone();
        Ok(out)
    }
}

/// Reads `seq_id,label` rows.
pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(AceError::Parse(format!("line {}: expected `seq_id,label`", line + 2)));
        }
        out.push((rec[0].to_string(), parse_field(&rec[1], line + 2)?));
    }
    Ok(out)
}

/// Writes `seq_id,label` rows.
pub fn write_labels<W: std::io::Write>(writer: W, ids: &[String], labels: &[f64]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(AceError::Shape { expected: ids.len(), got: labels.len() });
    }
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["seq_id", "label"])?;
    for (id, l) in ids.iter().zip(labels) {
        w.write_record([id.clone(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
