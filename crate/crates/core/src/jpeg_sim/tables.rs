//! Quality factors and IJG-scaled quantization tables.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zig-zag scan order: entry `k` is the natural (row-major) index of the
/// `k`-th coefficient in scan order.
pub const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54,
    47, 55, 62, 63,
];

/// Annex K luminance table (natural order), the table used at quality 50.
pub const BASE_LUMA: [u8; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

/// Annex K chrominance table (natural order).
pub const BASE_CHROMA: [u8; 64] = [
    17, 18, 24, 47, 99, 99, 99, 99, //
    18, 21, 26, 66, 99, 99, 99, 99, //
    24, 26, 56, 99, 99, 99, 99, 99, //
    47, 66, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99, //
    99, 99, 99, 99, 99, 99, 99, 99,
];

/// A JPEG quality factor in `1..=100`.
///
/// Detection models are trained on the grid 60, 65, ..., 95; the codec
/// accepts any value in range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QualityFactor(u8);

impl QualityFactor {
    /// The eight quality factors used for both first and second compression.
    pub const GRID: [QualityFactor; 8] = [
        QualityFactor(60),
        QualityFactor(65),
        QualityFactor(70),
        QualityFactor(75),
        QualityFactor(80),
        QualityFactor(85),
        QualityFactor(90),
        QualityFactor(95),
    ];

    pub fn new(value: u8) -> Result<Self> {
        if (1..=100).contains(&value) {
            Ok(QualityFactor(value))
        } else {
            Err(Error::invalid(format!("quality factor {value} outside 1..=100")))
        }
    }

    /// Like [`QualityFactor::new`] but only accepts values on the training grid.
    pub fn grid_value(value: u8) -> Result<Self> {
        let qf = Self::new(value)?;
        if qf.is_grid() {
            Ok(qf)
        } else {
            Err(Error::invalid(format!(
                "quality factor {value} is not on the grid 60:5:95"
            )))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_grid(self) -> bool {
        Self::GRID.contains(&self)
    }

    /// Nearest grid value; ties go to the higher grid entry.
    pub fn snap_to_grid(self) -> QualityFactor {
        let mut best = Self::GRID[0];
        for g in Self::GRID {
            let d = (g.0 as i32 - self.0 as i32).abs();
            let bd = (best.0 as i32 - self.0 as i32).abs();
            if d <= bd {
                best = g;
            }
        }
        best
    }
}

impl TryFrom<u8> for QualityFactor {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        QualityFactor::new(value)
    }
}

impl From<QualityFactor> for u8 {
    fn from(qf: QualityFactor) -> u8 {
        qf.0
    }
}

impl fmt::Display for QualityFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Luma and chroma quantization tables, natural (row-major) order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QuantTables {
    luma: [u8; 64],
    chroma: [u8; 64],
}

impl QuantTables {
    /// Entries must all be non-zero.
    pub fn new(luma: [u8; 64], chroma: [u8; 64]) -> Result<Self> {
        if luma.contains(&0) || chroma.contains(&0) {
            return Err(Error::invalid("quantization table entries must be in 1..=255"));
        }
        Ok(QuantTables { luma, chroma })
    }

    pub fn luma(&self) -> &[u8; 64] {
        &self.luma
    }

    pub fn chroma(&self) -> &[u8; 64] {
        &self.chroma
    }

    /// Table used for component `channel` (0 = Y, 1 = Cb, 2 = Cr).
    pub fn for_channel(&self, channel: usize) -> &[u8; 64] {
        if channel == 0 {
            &self.luma
        } else {
            &self.chroma
        }
    }

    /// Sum of absolute entry differences over both tables.
    pub fn l1_distance(&self, other: &QuantTables) -> u32 {
        let d = |a: &[u8; 64], b: &[u8; 64]| -> u32 { a.iter().zip(b).map(|(&x, &y)| x.abs_diff(y) as u32).sum() };
        d(&self.luma, &other.luma) + d(&self.chroma, &other.chroma)
    }
}

fn scale_table(base: &[u8; 64], scale: u32) -> [u8; 64] {
    let mut out = [0u8; 64];
    for (o, &b) in out.iter_mut().zip(base) {
        let v = (b as u32 * scale + 50) / 100;
        *o = v.clamp(1, 255) as u8;
    }
    out
}

/// IJG quality scaling of the Annex K tables.
pub fn tables_for_quality(qf: QualityFactor) -> QuantTables {
    let q = qf.value() as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    QuantTables {
        luma: scale_table(&BASE_LUMA, scale),
        chroma: scale_table(&BASE_CHROMA, scale),
    }
}

/// Quality factor whose IJG tables are nearest in L1 distance; ties go to
/// the higher quality.
pub fn estimate_qf(tables: &QuantTables) -> QualityFactor {
    let mut best = (u32::MAX, QualityFactor(1));
    for q in 1..=100u8 {
        let qf = QualityFactor(q);
        let d = tables.l1_distance(&tables_for_quality(qf));
        if d <= best.0 {
            best = (d, qf);
        }
    }
    best.1
}
