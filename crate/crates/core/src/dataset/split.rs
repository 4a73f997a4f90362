use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::mix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];
}

/// Image ids per split.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitAssignment {
    pub fn get(&self, split: Split) -> &[String] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Seeded 90/5/5 partition by image. Validation and test each receive
/// `round(n / 20)` images (at least one); training takes the remainder.
pub fn split(ids: &[String], seed: u64) -> Result<SplitAssignment> {
    if ids.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 source images to split, got {}",
            ids.len()
        )));
    }
    let mut shuffled = ids.to_vec();
    shuffled.sort();
    shuffled.dedup();
    if shuffled.len() != ids.len() {
        return Err(Error::invalid("duplicate image ids"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, 0x5350_4c54]));
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let held = ((n as f64 * 0.05).round() as usize).max(1);
    let test = shuffled.split_off(n - held);
    let val = shuffled.split_off(n - 2 * held);
    Ok(SplitAssignment {
        train: shuffled,
        val,
        test,
    })
}
