//! Labeled datasets: union-of-subspaces generator, file formats, stratified splits.
//!
//! File formats:
//! - CSV: comma separated, optional header line, final column is the integer label.
//! - raw-f64: little endian; three u64 header words (N, n, K), then N·n f64
//!   values in row-major order, then N u64 labels.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::geometry::{self, SubspaceBasis};
use crate::seed::{self, TAG_DATA, TAG_SPLIT};

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Generated(UnionSpec),
    File(PathBuf),
    Derived(String),
    Unknown,
}

/// N samples in ℝⁿ (rows of `vectors`) with class ids in 1..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    vectors: DMatrix<f64>,
    labels: Vec<usize>,
    provenance: Provenance,
    bases: Option<Vec<SubspaceBasis>>,
}

impl LabeledDataset {
    pub fn new(vectors: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        Self::with_provenance(vectors, labels, Provenance::Unknown, None)
    }

    pub(crate) fn derived(
        vectors: DMatrix<f64>,
        labels: Vec<usize>,
        note: String,
        bases: Option<Vec<SubspaceBasis>>,
    ) -> Result<Self> {
        Self::with_provenance(vectors, labels, Provenance::Derived(note), bases)
    }

    fn with_provenance(
        vectors: DMatrix<f64>,
        labels: Vec<usize>,
        provenance: Provenance,
        bases: Option<Vec<SubspaceBasis>>,
    ) -> Result<Self> {
        ensure(vectors.nrows() == labels.len(), || {
            format!("{} samples but {} labels", vectors.nrows(), labels.len())
        })?;
        ensure(labels.iter().all(|&l| l >= 1), || "class ids start at 1".to_string())?;
        if let Some(b) = &bases {
            ensure(b.iter().all(|b| b.ambient_dim() == vectors.ncols()), || {
                "bases do not match the dataset dimension".to_string()
            })?;
        }
        Ok(Self { vectors, labels, provenance, bases })
    }

    /// An empty dataset of ambient dimension n.
    pub fn empty(n: usize) -> Self {
        Self {
            vectors: DMatrix::zeros(0, n),
            labels: Vec::new(),
            provenance: Provenance::Unknown,
            bases: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Ground-truth bases, in class order, when the dataset came from the generator.
    pub fn bases(&self) -> Option<&[SubspaceBasis]> {
        self.bases.as_deref()
    }

    /// K, the largest class id.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Distinct class ids present, ascending.
    pub fn classes(&self) -> Vec<usize> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.vectors.row(i).transpose()
    }

    pub fn rows(&self, indices: &[usize]) -> DMatrix<f64> {
        self.vectors.select_rows(indices)
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            vectors: self.rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: self.provenance.clone(),
            bases: self.bases.clone(),
        }
    }
}

/// Parameters of the union-of-subspaces generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnionSpec {
    pub n: usize,
    /// dᵢ for each class; K = dims.len().
    pub dims: Vec<usize>,
    /// Nᵢ for each class.
    pub counts: Vec<usize>,
    pub seed: u64,
    pub coeff_scale: f64,
    /// Orthonormalize all bases jointly, making the subspaces mutually orthogonal.
    #[serde(default)]
    pub orthogonal: bool,
}

impl UnionSpec {
    /// K classes of equal dimension d and count per class.
    pub fn uniform(n: usize, k: usize, d: usize, per_class: usize, seed: u64) -> Self {
        Self {
            n,
            dims: vec![d; k],
            counts: vec![per_class; k],
            seed,
            coeff_scale: 1.0,
            orthogonal: false,
        }
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        ensure(self.n >= 1, || "ambient dimension must be positive".to_string())?;
        ensure(!self.dims.is_empty(), || "need at least one class".to_string())?;
        ensure(self.dims.len() == self.counts.len(), || {
            format!("{} dims but {} counts", self.dims.len(), self.counts.len())
        })?;
        ensure(self.dims.iter().all(|&d| d >= 1), || "subspace dims must be positive".to_string())?;
        ensure(self.total_dim() <= self.n, || {
            format!(
                "sum of subspace dims {} exceeds ambient dimension {}; independence impossible",
                self.total_dim(),
                self.n
            )
        })?;
        ensure(self.dims.iter().zip(&self.counts).all(|(d, c)| c >= d), || {
            "each class needs at least as many samples as its subspace dimension".to_string()
        })?;
        ensure(self.coeff_scale > 0.0 && self.coeff_scale.is_finite(), || {
            "coefficient scale must be positive".to_string()
        })
    }
}

fn orthonormal_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    m.qr().q().columns(0, cols).into_owned()
}

/// Samples a K-class dataset from independent random subspaces.
///
/// Bases are orthonormalized Gaussian n×dᵢ blocks; each sample is Bᵢ·w with
/// w ~ N(0, coeff_scale²·I). Rows are ordered class by class.
pub fn generate_union(spec: &UnionSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = seed::stream(&[spec.seed, TAG_DATA]);
    let n = spec.n;
    let total = spec.total_dim();
    let raw = DMatrix::from_fn(n, total, |_, _| rng.sample::<f64, _>(StandardNormal));

    let mut bases = Vec::with_capacity(spec.dims.len());
    if spec.orthogonal {
        let q = orthonormal_columns(raw);
        let mut offset = 0;
        for &d in &spec.dims {
            bases.push(SubspaceBasis::from_orthonormal(q.columns(offset, d).into_owned()));
            offset += d;
        }
    } else {
        let mut offset = 0;
        for &d in &spec.dims {
            let q = orthonormal_columns(raw.columns(offset, d).into_owned());
            bases.push(SubspaceBasis::from_orthonormal(q));
            offset += d;
        }
    }
    if !geometry::check_independence(&bases)? {
        // probability-zero event for Gaussian blocks
        return Err(Error::invalid("generated subspaces are not independent"));
    }

    let count: usize = spec.counts.iter().sum();
    let mut vectors = DMatrix::zeros(count, n);
    let mut labels = Vec::with_capacity(count);
    let mut row = 0;
    for (class, (basis, &ni)) in bases.iter().zip(&spec.counts).enumerate() {
        for _ in 0..ni {
            let w = DVector::from_fn(basis.dim(), |_, _| {
                spec.coeff_scale * rng.sample::<f64, _>(StandardNormal)
            });
            let x = basis.columns() * w;
            vectors.row_mut(row).copy_from(&x.transpose());
            labels.push(class + 1);
            row += 1;
        }
    }
    LabeledDataset::with_provenance(vectors, labels, Provenance::Generated(spec.clone()), Some(bases))
}

/// Draws `count` fresh samples from subspace `class` (1-based) of a generated dataset.
pub fn sample_from_class(
    data: &LabeledDataset,
    class: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let bases = data
        .bases()
        .ok_or_else(|| Error::invalid("dataset carries no ground-truth bases"))?;
    ensure(class >= 1 && class <= bases.len(), || format!("no subspace for class {class}"))?;
    let basis = &bases[class - 1];
    let mut rng = seed::stream(&[seed, TAG_DATA, class as u64]);
    Ok((0..count)
        .map(|_| {
            let w = DVector::from_fn(basis.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
            basis.columns() * w
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Csv,
    RawF64,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(DataFormat::Csv),
            "raw-f64" | "raw" => Ok(DataFormat::RawF64),
            other => Err(Error::invalid(format!("unknown data format '{other}'"))),
        }
    }
}

impl DataFormat {
    /// Guesses the format from a file extension; anything but `.csv` is raw.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => DataFormat::Csv,
            _ => DataFormat::RawF64,
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn load_matrix(path: &Path, format: DataFormat) -> Result<LabeledDataset> {
    let mut ds = match format {
        DataFormat::Csv => load_csv(path)?,
        DataFormat::RawF64 => load_raw(path)?,
    };
    ds.provenance = Provenance::File(path.to_path_buf());
    Ok(ds)
}

fn parse_label(field: &str) -> Option<usize> {
    let field = field.trim();
    if let Ok(v) = field.parse::<usize>() {
        return Some(v);
    }
    // tolerate "3.0"
    let f: f64 = field.parse().ok()?;
    (f.fract() == 0.0 && f >= 0.0 && f < u32::MAX as f64).then_some(f as usize)
}

fn load_csv(path: &Path) -> Result<LabeledDataset> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parsed: Option<Vec<f64>> = fields[..fields.len() - 1]
            .iter()
            .map(|f| f.trim().parse::<f64>().ok())
            .collect();
        let label = parse_label(fields[fields.len() - 1]);
        let (row, label) = match (parsed, label) {
            (Some(r), Some(l)) => (r, l),
            _ if labels.is_empty() && width.is_none() => {
                // header line
                width = Some(fields.len().saturating_sub(1));
                continue;
            }
            (None, _) => return Err(parse_err(path, lineno, "non-numeric feature value")),
            (Some(_), None) => return Err(parse_err(path, lineno, "label is not a non-negative integer")),
        };
        if label == 0 {
            return Err(parse_err(path, lineno, "unknown label 0 (class ids start at 1)"));
        }
        match width {
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("ragged row: {} features, expected {w}", row.len()),
                ))
            }
            _ => width = Some(row.len()),
        }
        ensure(!row.is_empty(), || format!("line {lineno} has no feature columns"))?;
        values.extend(row);
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_err(path, 1, "file contains no samples"));
    }
    let n = width.unwrap_or(0);
    LabeledDataset::new(DMatrix::from_row_slice(labels.len(), n, &values), labels)
}

fn load_raw(path: &Path) -> Result<LabeledDataset> {
    let bytes = fs::read(path)?;
    let word = |i: usize| -> Option<[u8; 8]> { bytes.get(i * 8..i * 8 + 8)?.try_into().ok() };
    if bytes.is_empty() {
        return Err(parse_err(path, 0, "empty file"));
    }
    let header: Vec<u64> = (0..3)
        .map(|i| word(i).map(u64::from_le_bytes))
        .collect::<Option<_>>()
        .ok_or_else(|| parse_err(path, 0, "truncated header"))?;
    let (count, n, k) = (header[0] as usize, header[1] as usize, header[2] as usize);
    let expected = 3 + count * n + count;
    if bytes.len() != expected * 8 {
        return Err(parse_err(
            path,
            0,
            format!("expected {} bytes for N={count}, n={n}, got {}", expected * 8, bytes.len()),
        ));
    }
    if count == 0 {
        return Err(parse_err(path, 0, "file contains no samples"));
    }
    let values: Vec<f64> = (0..count * n)
        .map(|i| f64::from_le_bytes(word(3 + i).expect("length checked")))
        .collect();
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let l = u64::from_le_bytes(word(3 + count * n + i).expect("length checked")) as usize;
        if l == 0 || l > k {
            // raw has no lines; report the 1-based sample index
            return Err(parse_err(path, i + 1, format!("label {l} outside 1..={k}")));
        }
        labels.push(l);
    }
    LabeledDataset::new(DMatrix::from_row_slice(count, n, &values), labels)
}

pub fn save_matrix(data: &LabeledDataset, path: &Path, format: DataFormat) -> Result<()> {
    let mut out = fs::File::create(path)?;
    write_matrix(data, &mut out, format)
}

pub fn write_matrix(data: &LabeledDataset, out: &mut impl Write, format: DataFormat) -> Result<()> {
    let mut buf = Vec::new();
    match format {
        DataFormat::Csv => {
            let header: Vec<String> = (0..data.ambient_dim())
                .map(|j| format!("x{j}"))
                .chain(std::iter::once("label".to_string()))
                .collect();
            writeln!(buf, "{}", header.join(","))?;
            for i in 0..data.len() {
                let mut fields: Vec<String> =
                    data.vectors().row(i).iter().map(|v| format!("{v:?}")).collect();
                fields.push(data.labels()[i].to_string());
                writeln!(buf, "{}", fields.join(","))?;
            }
        }
        DataFormat::RawF64 => {
            for w in [data.len(), data.ambient_dim(), data.num_classes()] {
                buf.extend_from_slice(&(w as u64).to_le_bytes());
            }
            for i in 0..data.len() {
                for v in data.vectors().row(i).iter() {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
            for &l in data.labels() {
                buf.extend_from_slice(&(l as u64).to_le_bytes());
            }
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Stratified train/test split. Each class contributes round(fraction·Nᵢ)
/// samples to training, clamped so both sides get at least one.
pub fn split(
    data: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    ensure(train_fraction > 0.0 && train_fraction < 1.0, || {
        format!("train fraction must lie in (0, 1), got {train_fraction}")
    })?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in data.classes() {
        let mut idx = data.class_indices(class);
        ensure(idx.len() >= 2, || {
            format!("class {class} has {} sample(s); need at least 2 to split", idx.len())
        })?;
        let mut rng = seed::stream(&[seed, TAG_SPLIT, class as u64]);
        idx.shuffle(&mut rng);
        let k = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_rejects_oversized_union() {
        let spec = UnionSpec::uniform(5, 3, 2, 4, 1);
        assert!(generate_union(&spec).is_err());
        let spec = UnionSpec::uniform(10, 2, 3, 2, 1);
        assert!(generate_union(&spec).is_err());
    }

    #[test]
    fn generator_construction() {
        let spec = UnionSpec::uniform(50, 3, 3, 15, 42);
        let ds = generate_union(&spec).unwrap();
        assert_eq!(ds.len(), 45);
        assert_eq!(ds.num_classes(), 3);
        let bases = ds.bases().unwrap();
        assert!(geometry::check_independence(bases).unwrap());
        for i in 0..ds.len() {
            let b = &bases[ds.labels()[i] - 1];
            assert!(b.relative_residual(&ds.sample(i)).unwrap() <= 1e-10);
        }
        assert_eq!(generate_union(&spec).unwrap(), ds);
    }

    #[test]
    fn orthogonal_generator_has_zero_margins() {
        let spec = UnionSpec {
            orthogonal: true,
            ..UnionSpec::uniform(3, 3, 1, 2, 9)
        };
        let ds = generate_union(&spec).unwrap();
        let report = geometry::margin_report(ds.bases().unwrap(), Some(&ds)).unwrap();
        for i in 0..3 {
            assert!(report.max_off_diagonal(i) < 1e-12);
        }
    }

    #[test]
    fn csv_parsing_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "a,b,label\n1,2,1\n3,4,5,2\n").unwrap();
        match load_matrix(&p, DataFormat::Csv) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&p, "1,2,1\n3,4,0\n").unwrap();
        assert!(matches!(load_matrix(&p, DataFormat::Csv), Err(Error::Parse { line: 2, .. })));
        fs::write(&p, "").unwrap();
        assert!(matches!(load_matrix(&p, DataFormat::Csv), Err(Error::Parse { .. })));
        fs::write(&p, "1,2,1\n3,x,2\n").unwrap();
        assert!(matches!(load_matrix(&p, DataFormat::Csv), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("two.csv");
        fs::write(&p, "0.5,1.5,1\n-2,3e-3,2\n").unwrap();
        let ds = load_matrix(&p, DataFormat::Csv).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.ambient_dim(), 2);
        assert_eq!(ds.labels(), &[1, 2]);
        assert_eq!(ds.vectors()[(1, 1)], 3e-3);
    }

    #[test]
    fn raw_rejects_truncation_and_bad_labels() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.bin");
        let ds = LabeledDataset::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), vec![1, 2])
            .unwrap();
        save_matrix(&ds, &p, DataFormat::RawF64).unwrap();
        let mut bytes = fs::read(&p).unwrap();
        bytes.pop();
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(load_matrix(&p, DataFormat::RawF64), Err(Error::Parse { .. })));
    }

    #[test]
    fn split_is_stratified() {
        let spec = UnionSpec::uniform(20, 2, 2, 64, 3);
        let ds = generate_union(&spec).unwrap();
        let (train, test) = split(&ds, 0.5, 7).unwrap();
        for c in [1, 2] {
            assert_eq!(train.class_indices(c).len(), 32);
            assert_eq!(test.class_indices(c).len(), 32);
        }
        let again = split(&ds, 0.5, 7).unwrap();
        assert_eq!(again.0, train);
        assert!(split(&ds, 1.0, 7).is_err());

        let spec = UnionSpec::uniform(40, 10, 2, 10, 3);
        let (train, test) = split(&generate_union(&spec).unwrap(), 0.7, 1).unwrap();
        for c in 1..=10 {
            assert_eq!(train.class_indices(c).len(), 7);
            assert_eq!(test.class_indices(c).len(), 3);
        }
    }

    #[test]
    fn split_needs_two_per_class() {
        let ds = LabeledDataset::new(DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]), vec![1, 1, 2])
            .unwrap();
        assert!(split(&ds, 0.5, 0).is_err());
    }
}
