use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Vanilla,
    Lbft,
    Lft,
    Synthetic,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Vanilla => "vanilla",
            Regime::Lbft => "lbft",
            Regime::Lft => "lft",
            Regime::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vanilla" => Ok(Regime::Vanilla),
            "lbft" => Ok(Regime::Lbft),
            "lft" => Ok(Regime::Lft),
            "synthetic" => Ok(Regime::Synthetic),
            other => Err(Error::InvalidConfig(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pool {
    Supervised,
    SelfSupervised,
}

impl Pool {
    pub fn as_str(self) -> &'static str {
        match self {
            Pool::Supervised => "supervised",
            Pool::SelfSupervised => "self_supervised",
        }
    }
}

impl fmt::Display for Pool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Pool {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "supervised" => Ok(Pool::Supervised),
            "self_supervised" | "self-supervised" => Ok(Pool::SelfSupervised),
            other => Err(Error::InvalidConfig(format!("unknown pool {other:?}"))),
        }
    }
}

/// One row of a truth CSV: `model,dataset,regime,pool,accuracy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub model: String,
    pub dataset: String,
    pub regime: Regime,
    pub pool: Pool,
    /// Percent.
    pub accuracy: f64,
}

type Key = (String, String, Regime, Pool);

/// Fine-tuning accuracies keyed by (model, dataset, regime, pool).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthTable {
    records: Vec<TruthRecord>,
    index: BTreeMap<Key, usize>,
}

/// Published fine-tuning accuracy tables shipped with the crate, as (file name, contents).
pub const BUNDLED_TRUTH: [(&str, &str); 6] = [
    ("vanilla_supervised.csv", include_str!("../../data/truth/vanilla_supervised.csv")),
    ("lbft_supervised.csv", include_str!("../../data/truth/lbft_supervised.csv")),
    ("lft_supervised.csv", include_str!("../../data/truth/lft_supervised.csv")),
    ("vanilla_self_supervised.csv", include_str!("../../data/truth/vanilla_self_supervised.csv")),
    ("lbft_self_supervised.csv", include_str!("../../data/truth/lbft_self_supervised.csv")),
    ("lft_self_supervised.csv", include_str!("../../data/truth/lft_self_supervised.csv")),
];

impl TruthTable {
    pub fn new(records: Vec<TruthRecord>) -> Result<Self> {
        let mut table = TruthTable::default();
        for r in records {
            table.insert(r)?;
        }
        Ok(table)
    }

    fn insert(&mut self, r: TruthRecord) -> Result<()> {
        let key = (r.model.clone(), r.dataset.clone(), r.regime, r.pool);
        let label = format!("({}, {}, {}, {})", r.model, r.dataset, r.regime, r.pool);
        if !(r.accuracy > 0.0 && r.accuracy <= 100.0) {
            return Err(Error::AccuracyOutOfRange {
                key: label,
                accuracy: r.accuracy,
            });
        }
        if self.index.contains_key(&key) {
            return Err(Error::DuplicateKey(label));
        }
        self.index.insert(key, self.records.len());
        self.records.push(r);
        Ok(())
    }

    /// Every bundled table merged into one.
    pub fn bundled() -> Self {
        let mut table = TruthTable::default();
        for (_, text) in BUNDLED_TRUTH {
            table
                .merge(Self::from_reader(text.as_bytes()).expect("bundled truth parses"))
                .expect("bundled truth keys are unique");
        }
        table
    }

    pub fn merge(&mut self, other: TruthTable) -> Result<()> {
        for r in other.records {
            self.insert(r)?;
        }
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        for col in ["model", "dataset", "regime", "pool", "accuracy"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::MissingColumn(col.into()));
            }
        }
        let records = rdr
            .deserialize::<TruthRecord>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(records)
    }

    pub fn records(&self) -> &[TruthRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, model: &str, dataset: &str, regime: Regime, pool: Pool) -> Option<f64> {
        self.index
            .get(&(model.to_string(), dataset.to_string(), regime, pool))
            .map(|&i| self.records[i].accuracy)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<TruthTable> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
    TruthTable::from_reader(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_spot_checks() {
        let t = TruthTable::bundled();
        assert_eq!(t.len(), 3 * 121 + 3 * 132);
        assert_eq!(t.get("ResNet-50", "Aircraft", Regime::Vanilla, Pool::Supervised), Some(84.64));
        assert_eq!(t.get("BYOL", "DTD", Regime::Vanilla, Pool::SelfSupervised), Some(76.37));
        assert_eq!(t.get("InceptionV3", "Cars", Regime::Lft, Pool::Supervised), Some(27.6));
        assert_eq!(t.get("InceptionV3", "Cars", Regime::Lft, Pool::SelfSupervised), None);
    }

    #[test]
    fn duplicate_and_range_errors() {
        let dup = "model,dataset,regime,pool,accuracy\na,d,vanilla,supervised,50\na,d,vanilla,supervised,60\n";
        assert!(matches!(TruthTable::from_reader(dup.as_bytes()), Err(Error::DuplicateKey(_))));
        let bad = "model,dataset,regime,pool,accuracy\na,d,vanilla,supervised,0\n";
        assert!(matches!(
            TruthTable::from_reader(bad.as_bytes()),
            Err(Error::AccuracyOutOfRange { .. })
        ));
        let missing = "model,dataset,pool,accuracy\na,d,supervised,50\n";
        assert!(matches!(TruthTable::from_reader(missing.as_bytes()), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn csv_round_trip() {
        let t = TruthTable::bundled();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(TruthTable::from_reader(buf.as_slice()).unwrap(), t);
    }
}
