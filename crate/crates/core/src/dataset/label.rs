use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jpeg_sim::QualityFactor;

/// Number of output classes of every classifier.
pub const NUM_CLASSES: usize = 9;

/// Identifier of the class ordering shared by models and reports.
pub const CLASS_ORDER_ID: &str = "u-s-d_asc/v1";

/// Compression history of a patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "qf1", rename_all = "lowercase")]
pub enum CompressionLabel {
    Uncompressed,
    Single,
    /// Double compression whose first pass used this quality factor.
    Double(QualityFactor),
}

/// The seven primary quality factors for a bank trained at `qf2`, ascending.
pub fn primary_qfs(qf2: QualityFactor) -> impl Iterator<Item = QualityFactor> {
    QualityFactor::GRID.into_iter().filter(move |&q| q != qf2)
}

impl CompressionLabel {
    /// All nine labels for a bank at `qf2`, in class-index order:
    /// 0 = Uncompressed, 1 = Single, 2..=8 = Double with ascending qf1.
    pub fn all(qf2: QualityFactor) -> Vec<CompressionLabel> {
        let mut v = vec![CompressionLabel::Uncompressed, CompressionLabel::Single];
        v.extend(primary_qfs(qf2).map(CompressionLabel::Double));
        v
    }

    pub fn index(self, qf2: QualityFactor) -> Result<usize> {
        match self {
            CompressionLabel::Uncompressed => Ok(0),
            CompressionLabel::Single => Ok(1),
            CompressionLabel::Double(q1) => primary_qfs(qf2)
                .position(|q| q == q1)
                .map(|p| p + 2)
                .ok_or_else(|| Error::invalid(format!("Double({q1}) is not a class of the qf2={qf2} bank"))),
        }
    }

    pub fn from_index(index: usize, qf2: QualityFactor) -> Result<CompressionLabel> {
        Self::all(qf2)
            .get(index)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class index {index} out of range")))
    }

    pub fn is_double(self) -> bool {
        matches!(self, CompressionLabel::Double(_))
    }

    /// Directory name in the patch store.
    pub fn dir_name(self) -> String {
        match self {
            CompressionLabel::Uncompressed => "uncompressed".into(),
            CompressionLabel::Single => "single".into(),
            CompressionLabel::Double(q) => format!("double{q}"),
        }
    }

    pub fn from_dir_name(name: &str) -> Result<CompressionLabel> {
        match name {
            "uncompressed" => Ok(CompressionLabel::Uncompressed),
            "single" => Ok(CompressionLabel::Single),
            other => other
                .strip_prefix("double")
                .and_then(|q| q.parse::<u8>().ok())
                .map(|q| QualityFactor::new(q).map(CompressionLabel::Double))
                .unwrap_or_else(|| Err(Error::invalid(format!("unknown class directory {other}")))),
        }
    }
}

impl fmt::Display for CompressionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompressionLabel::Uncompressed => write!(f, "Uncompressed"),
            CompressionLabel::Single => write!(f, "Single"),
            CompressionLabel::Double(q) => write!(f, "Double({q})"),
        }
    }
}

/// True when class index `i` denotes a double-compressed class.
pub fn is_double_index(i: usize) -> bool {
    (2..NUM_CLASSES).contains(&i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_classes_for_every_grid_qf2() {
        for qf2 in QualityFactor::GRID {
            let all = CompressionLabel::all(qf2);
            assert_eq!(all.len(), NUM_CLASSES);
            assert!(!all.contains(&CompressionLabel::Double(qf2)));
            for (i, l) in all.iter().enumerate() {
                assert_eq!(l.index(qf2).unwrap(), i);
                assert_eq!(CompressionLabel::from_index(i, qf2).unwrap(), *l);
                assert_eq!(CompressionLabel::from_dir_name(&l.dir_name()).unwrap(), *l);
            }
        }
    }

    #[test]
    fn same_qf_double_is_not_a_class() {
        let q90 = QualityFactor::new(90).unwrap();
        assert!(CompressionLabel::Double(q90).index(q90).is_err());
        let q60 = QualityFactor::new(60).unwrap();
        assert_eq!(CompressionLabel::Double(q60).index(q90).unwrap(), 2);
        let q95 = QualityFactor::new(95).unwrap();
        assert_eq!(CompressionLabel::Double(q95).index(q90).unwrap(), 8);
    }

    #[test]
    fn serde_shape() {
        let l = CompressionLabel::Double(QualityFactor::new(60).unwrap());
        assert_eq!(serde_json::to_string(&l).unwrap(), r#"{"kind":"double","qf1":60}"#);
    }
}
