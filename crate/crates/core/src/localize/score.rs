use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{CompressionLabel, PATCH_SIZE};
use crate::error::{Error, Result};

use super::{select_qf2, Forgery, LocalizationMap};

/// Coarse compression history, ignoring the primary quality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Uncompressed,
    Single,
    Double,
}

impl From<CompressionLabel> for Category {
    fn from(l: CompressionLabel) -> Self {
        match l {
            CompressionLabel::Uncompressed => Category::Uncompressed,
            CompressionLabel::Single => Category::Single,
            CompressionLabel::Double(_) => Category::Double,
        }
    }
}

/// Window-level agreement between a scan and a forgery's ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationScore {
    /// Windows whose predicted label equals the true label, qf1 included.
    pub window_accuracy: f64,
    /// Same, comparing categories only.
    pub category_accuracy: f64,
    /// Spliced windows predicted in the splice's category.
    pub splice_hit_rate: Option<f64>,
    /// Background windows predicted in the background's category.
    pub background_hit_rate: Option<f64>,
    /// Per-category intersection over union; `None` when neither truth nor
    /// prediction contains the category.
    pub iou: BTreeMap<Category, Option<f64>>,
}

/// True label of each window of `map`: the splice label when at least half
/// of the window lies on spliced tiles, otherwise the background label.
pub fn window_truth(map: &LocalizationMap, forgery: &Forgery) -> Vec<CompressionLabel> {
    let half = PATCH_SIZE * PATCH_SIZE / 2;
    map.windows
        .iter()
        .map(|w| {
            let (r0, c0) = w.offset;
            let covered = (r0..r0 + PATCH_SIZE)
                .flat_map(|y| (c0..c0 + PATCH_SIZE).map(move |x| (y, x)))
                .filter(|&(y, x)| forgery.truth.covers(y, x))
                .count();
            if covered >= half {
                forgery.splice_label
            } else {
                forgery.background_label
            }
        })
        .collect()
}

fn rate(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Scores a scan of `forgery.artifact`. Class indices are read against the
/// bank quality recorded in the map, or estimated from the artifact.
pub fn score(map: &LocalizationMap, forgery: &Forgery) -> Result<LocalizationScore> {
    if (map.width, map.height) != (forgery.artifact.width(), forgery.artifact.height()) {
        return Err(Error::invalid("map and forgery dimensions differ"));
    }
    let qf2 = match &map.selection {
        Some(s) => s.qf2,
        None => select_qf2(&forgery.artifact).qf2,
    };
    let truth = window_truth(map, forgery);
    let predicted: Vec<CompressionLabel> = map
        .windows
        .iter()
        .map(|w| CompressionLabel::from_index(w.class, qf2))
        .collect::<Result<_>>()?;

    let n = truth.len();
    let exact = truth.iter().zip(&predicted).filter(|(t, p)| t == p).count();
    let coarse = |l: &CompressionLabel| Category::from(*l);
    let same_cat = truth
        .iter()
        .zip(&predicted)
        .filter(|(t, p)| coarse(t) == coarse(p))
        .count();

    let hit_rate = |label: CompressionLabel| {
        let idx: Vec<usize> = (0..n).filter(|&i| truth[i] == label).collect();
        let hits = idx
            .iter()
            .filter(|&&i| coarse(&predicted[i]) == Category::from(label))
            .count();
        rate(hits, idx.len())
    };

    let mut iou = BTreeMap::new();
    for cat in [Category::Uncompressed, Category::Single, Category::Double] {
        let t: Vec<bool> = truth.iter().map(|l| coarse(l) == cat).collect();
        let p: Vec<bool> = predicted.iter().map(|l| coarse(l) == cat).collect();
        let inter = t.iter().zip(&p).filter(|(a, b)| **a && **b).count();
        let union = t.iter().zip(&p).filter(|(a, b)| **a || **b).count();
        iou.insert(cat, rate(inter, union));
    }

    Ok(LocalizationScore {
        window_accuracy: exact as f64 / n as f64,
        category_accuracy: same_cat as f64 / n as f64,
        splice_hit_rate: hit_rate(forgery.splice_label),
        background_hit_rate: hit_rate(forgery.background_label),
        iou,
    })
}
