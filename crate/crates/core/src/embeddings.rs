//! Labeled embedding sets and their on-disk formats.
//!
//! EMB1 layout (little-endian):
//!
//! ```text
//! "EMB1" | u32 N | u32 D | u32 C | u32 reserved (0) | N*D f32 row-major | N u32 labels
//! ```
//!
//! Features are held as `f64` in memory. EMB1 stores `f32`, so sets read from
//! EMB1 (or produced by [`crate::synth`]) round-trip bit-exactly; sets whose
//! values are not representable in `f32` are rounded on save.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const EMB1_MAGIC: &[u8; 4] = b"EMB1";
const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    features: DMatrix<f64>,
    labels: Vec<u32>,
    class_count: usize,
    model_id: String,
    dataset_id: String,
    /// Original label value for each dense class index, when labels were remapped.
    label_names: Option<Vec<i64>>,
}

impl EmbeddingSet {
    /// Builds a validated set. `features` is N x D, one row per sample.
    pub fn new(features: DMatrix<f64>, labels: Vec<u32>, class_count: usize) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                n,
                labels.len()
            )));
        }
        if n < 2 {
            return Err(Error::TooSmall {
                what: "samples",
                needed: 2,
                got: n,
            });
        }
        if features.ncols() < 1 {
            return Err(Error::TooSmall {
                what: "feature dimensions",
                needed: 1,
                got: 0,
            });
        }
        if class_count < 2 {
            return Err(Error::SingleClass);
        }
        let mut seen = vec![false; class_count];
        for (row, &label) in labels.iter().enumerate() {
            if label as usize >= class_count {
                return Err(Error::LabelOutOfRange {
                    row,
                    label,
                    class_count,
                });
            }
            seen[label as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::EmptyClass(missing));
        }
        check_finite(&features)?;
        Ok(Self {
            features,
            labels,
            class_count,
            model_id: String::new(),
            dataset_id: String::new(),
            label_names: None,
        })
    }

    /// Builds a set from row-major data.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u32>, class_count: usize) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("ragged feature rows".into()));
        }
        let features = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(features, labels, class_count)
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    pub fn with_dataset_id(mut self, id: impl Into<String>) -> Self {
        self.dataset_id = id.into();
        self
    }

    /// Same labels and identifiers over a new feature matrix (e.g. after reduction).
    pub fn with_features(&self, features: DMatrix<f64>) -> Result<Self> {
        if features.nrows() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: features.nrows(),
            });
        }
        if features.ncols() < 1 {
            return Err(Error::TooSmall {
                what: "feature dimensions",
                needed: 1,
                got: 0,
            });
        }
        check_finite(&features)?;
        Ok(Self {
            features,
            labels: self.labels.clone(),
            class_count: self.class_count,
            model_id: self.model_id.clone(),
            dataset_id: self.dataset_id.clone(),
            label_names: self.label_names.clone(),
        })
    }

    /// Same features with a different labelling (used for shuffled-label controls).
    pub fn with_labels(&self, labels: Vec<u32>) -> Result<Self> {
        let mut out = Self::new(self.features.clone(), labels, self.class_count)?;
        out.model_id = self.model_id.clone();
        out.dataset_id = self.dataset_id.clone();
        Ok(out)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn label_names(&self) -> Option<&[i64]> {
        self.label_names.as_deref()
    }

    /// Number of samples in each class.
    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.class_count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    pub fn partition(&self) -> ClassPartition {
        partition(self)
    }
}

fn check_finite(features: &DMatrix<f64>) -> Result<()> {
    for col in 0..features.ncols() {
        for row in 0..features.nrows() {
            if !features[(row, col)].is_finite() {
                return Err(Error::NonFinite { row, col });
            }
        }
    }
    Ok(())
}

/// Row indices of each class, in row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    classes: Vec<Vec<usize>>,
}

impl ClassPartition {
    pub fn class(&self, u: usize) -> &[usize] {
        &self.classes[u]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.classes.iter().map(Vec::as_slice)
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
}

pub fn partition(set: &EmbeddingSet) -> ClassPartition {
    let mut classes = vec![Vec::new(); set.class_count()];
    for (i, &l) in set.labels().iter().enumerate() {
        classes[l as usize].push(i);
    }
    ClassPartition { classes }
}

/// Serializes a set to EMB1 bytes.
pub fn encode_emb1(set: &EmbeddingSet) -> Vec<u8> {
    let (n, d) = set.features.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * d + 4 * n);
    out.extend_from_slice(EMB1_MAGIC);
    for v in [n as u32, d as u32, set.class_count as u32, 0u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for i in 0..n {
        for j in 0..d {
            out.extend_from_slice(&(set.features[(i, j)] as f32).to_le_bytes());
        }
    }
    for &l in &set.labels {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out
}

/// Parses EMB1 bytes. Identifiers are left empty.
pub fn decode_emb1(bytes: &[u8]) -> Result<EmbeddingSet> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != EMB1_MAGIC {
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        return Err(Error::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let word = |k: usize| {
        let off = 4 + 4 * k;
        u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
    };
    let (n, d, c, reserved) = (word(0) as usize, word(1) as usize, word(2) as usize, word(3));
    if reserved != 0 {
        return Err(Error::ReservedField(reserved));
    }
    let expected = n
        .checked_mul(d)
        .and_then(|nd| nd.checked_add(n))
        .and_then(|w| w.checked_mul(4))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Shape(format!("header sizes overflow: N={n}, D={d}")))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::TrailingBytes {
            expected,
            actual: bytes.len(),
        });
    }
    let payload = &bytes[HEADER_LEN..];
    let read_f32 = |k: usize| f32::from_le_bytes(payload[4 * k..4 * k + 4].try_into().unwrap());
    let features = DMatrix::from_fn(n, d, |i, j| read_f32(i * d + j) as f64);
    let label_base = 4 * n * d;
    let labels = (0..n)
        .map(|i| {
            let off = label_base + 4 * i;
            u32::from_le_bytes(payload[off..off + 4].try_into().unwrap())
        })
        .collect();
    EmbeddingSet::new(features, labels, c)
}

/// Loads an EMB1 file; the model id is taken from the file stem.
pub fn load_emb1(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::file(path, e))?;
    let set = decode_emb1(&bytes)?;
    Ok(set.with_model_id(file_stem(path)))
}

pub fn save_emb1(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&encode_emb1(set)))
        .map_err(|e| Error::file(path, e))
}

/// Loads a CSV with a header row. Every column except `label_column` is a
/// feature; labels are remapped to a dense `0..C` range in ascending order of
/// their original values.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let set = read_csv(file, label_column)?;
    Ok(set.with_model_id(file_stem(path)))
}

pub fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<EmbeddingSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingColumn(label_column.to_string()))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut features = Vec::with_capacity(headers.len().saturating_sub(1));
        for (j, cell) in record.iter().enumerate() {
            let bad = || Error::NonNumeric {
                row,
                column: headers.get(j).unwrap_or_default().to_string(),
                value: cell.to_string(),
            };
            if j == label_idx {
                raw_labels.push(cell.parse().map_err(|_| bad())?);
            } else {
                features.push(cell.parse().map_err(|_| bad())?);
            }
        }
        rows.push(features);
    }

    let mut dense: BTreeMap<i64, u32> = raw_labels.iter().map(|&l| (l, 0)).collect();
    if dense.len() == 1 && rows.len() >= 2 {
        return Err(Error::SingleClass);
    }
    for (k, v) in dense.values_mut().enumerate() {
        *v = k as u32;
    }
    let labels = raw_labels.iter().map(|l| dense[l]).collect();
    let mut set = EmbeddingSet::from_rows(&rows, labels, dense.len())?;
    set.label_names = Some(dense.into_keys().collect());
    Ok(set)
}

/// Writes the set as CSV: feature columns `f0..f{D-1}` then `label`
/// (original label values when the set carries a remapping).
pub fn save_csv(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = (0..set.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..set.len() {
        let mut rec: Vec<String> = (0..set.dim())
            .map(|j| set.features[(i, j)].to_string())
            .collect();
        let l = set.labels[i];
        rec.push(match &set.label_names {
            Some(names) => names[l as usize].to_string(),
            None => l.to_string(),
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> EmbeddingSet {
        EmbeddingSet::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap()
    }

    #[test]
    fn smallest_valid_set_round_trips() {
        let set = tiny();
        let back = decode_emb1(&encode_emb1(&set)).unwrap();
        assert_eq!(back.features(), set.features());
        assert_eq!(back.labels(), &[0, 1]);
        assert_eq!(back.class_count(), 2);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_emb1(&tiny());
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_emb1(&bytes), Err(Error::BadMagic { found }) if &found == b"XXXX"));
    }

    #[test]
    fn truncation_and_trailing_bytes_are_distinct_errors() {
        let bytes = encode_emb1(&tiny());
        assert!(matches!(
            decode_emb1(&bytes[..bytes.len() - 1]),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(decode_emb1(&bytes[..10]), Err(Error::Truncated { .. })));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_emb1(&long), Err(Error::TrailingBytes { .. })));
    }

    #[test]
    fn label_out_of_range_and_non_finite_are_rejected() {
        let mut bytes = encode_emb1(&tiny());
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            decode_emb1(&bytes),
            Err(Error::LabelOutOfRange { row: 1, label: 7, .. })
        ));

        let mut bytes = encode_emb1(&tiny());
        bytes[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_emb1(&bytes), Err(Error::NonFinite { row: 0, col: 0 })));
    }

    #[test]
    fn header_is_sixteen_bytes_after_magic() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64; 4]).collect();
        let labels = (0..10).map(|i| i % 3).collect();
        let set = EmbeddingSet::from_rows(&rows, labels, 3).unwrap();
        let bytes = encode_emb1(&set);
        assert_eq!(bytes.len(), 4 + 16 + 10 * 4 * 4 + 10 * 4);
        assert_eq!(&bytes[4..20], &[10, 0, 0, 0, 4, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(encode_emb1(&set), bytes);
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            EmbeddingSet::from_rows(&[vec![0.0]], vec![0], 2),
            Err(Error::TooSmall { .. })
        ));
        assert!(matches!(
            EmbeddingSet::from_rows(&[vec![0.0], vec![1.0]], vec![0, 0], 2),
            Err(Error::EmptyClass(1))
        ));
        assert!(matches!(
            EmbeddingSet::from_rows(&[vec![0.0], vec![1.0]], vec![0, 0], 1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn csv_labels_are_densified() {
        let text = "a,label,b\n1.0,5,2.0\n3.0,9,4.0\n5.0,5,6.0\n";
        let set = read_csv(text.as_bytes(), "label").unwrap();
        assert_eq!(set.labels(), &[0, 1, 0]);
        assert_eq!(set.class_count(), 2);
        assert_eq!(set.label_names(), Some(&[5i64, 9][..]));
        assert_eq!(set.features()[(1, 0)], 3.0);
        assert_eq!(set.features()[(1, 1)], 4.0);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(
            read_csv("a,label\n1.0,0\n".as_bytes(), "label"),
            Err(Error::TooSmall { .. })
        ));
        assert!(matches!(
            read_csv("a,b\n1.0,0\n2.0,1\n".as_bytes(), "label"),
            Err(Error::MissingColumn(_))
        ));
        assert!(matches!(
            read_csv("a,label\n1.0,0\nx,1\n".as_bytes(), "label"),
            Err(Error::NonNumeric { row: 1, .. })
        ));
        assert!(matches!(
            read_csv("a,label\n1.0,3\n2.0,3\n".as_bytes(), "label"),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn partition_small() {
        let set =
            EmbeddingSet::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0], 2).unwrap();
        let p = set.partition();
        assert_eq!(p.class(0), &[0, 2]);
        assert_eq!(p.class(1), &[1]);
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_and_complete(raw in proptest::collection::vec(0u32..5, 2..200)) {
            // force every class to occur
            let mut labels = raw.clone();
            for c in 0..5u32 { labels.push(c); }
            let rows: Vec<Vec<f64>> = (0..labels.len()).map(|i| vec![i as f64]).collect();
            let set = EmbeddingSet::from_rows(&rows, labels.clone(), 5).unwrap();
            let p = set.partition();
            let mut all: Vec<usize> = p.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for (u, idx) in p.iter().enumerate() {
                prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(idx.iter().all(|&i| labels[i] == u as u32));
            }
        }

        #[test]
        fn emb1_round_trip_is_bit_exact(
            vals in proptest::collection::vec(-1e6f32..1e6, 6..60),
        ) {
            let d = 3;
            let n = vals.len() / d;
            let features = DMatrix::from_fn(n, d, |i, j| vals[i * d + j] as f64);
            let labels = (0..n).map(|i| (i % 2) as u32).collect();
            let set = EmbeddingSet::new(features, labels, 2).unwrap();
            let back = decode_emb1(&encode_emb1(&set)).unwrap();
            for (a, b) in set.features().iter().zip(back.features().iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back.labels(), set.labels());
        }
    }
}
