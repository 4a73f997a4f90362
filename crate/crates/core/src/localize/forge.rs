use serde::{Deserialize, Serialize};

use crate::dataset::{CompressionLabel, PATCH_SIZE};
use crate::error::{Error, Result};
use crate::jpeg_sim::{compress, JpegArtifact, QualityFactor, RawImage};

/// How the splice and the background acquire their compression histories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForgeMode {
    /// Donor tile compressed at qf1 before pasting into the raw host; the
    /// splice ends up double compressed and the background single.
    DoubleSplice,
    /// Host compressed at qf1 before a raw donor tile is pasted; the splice
    /// ends up single compressed and the background double.
    SingleSplice,
}

/// Splice location over the 64x64 tile grid of the forged image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major; true for spliced tiles.
    pub spliced: Vec<bool>,
}

impl TruthGrid {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.spliced[row * self.cols + col]
    }

    /// Whether pixel `(y, x)` lies in a spliced tile. Margins beyond the
    /// last whole tile count as background.
    pub fn covers(&self, y: usize, x: usize) -> bool {
        let (r, c) = (y / PATCH_SIZE, x / PATCH_SIZE);
        r < self.rows && c < self.cols && self.get(r, c)
    }
}

/// A forged JPEG with its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Forgery {
    pub artifact: JpegArtifact,
    pub truth: TruthGrid,
    pub splice_label: CompressionLabel,
    pub background_label: CompressionLabel,
}

/// Pastes the 64x64 donor tile at `offset` (row, col) into the host at the
/// same position and compresses the result at `qf2`.
pub fn forge(
    host: &RawImage,
    donor: &RawImage,
    offset: (usize, usize),
    qf1: QualityFactor,
    qf2: QualityFactor,
    mode: ForgeMode,
) -> Result<Forgery> {
    let (r, c) = offset;
    if r % PATCH_SIZE != 0 || c % PATCH_SIZE != 0 {
        return Err(Error::invalid(format!(
            "splice offset ({r}, {c}) is not {PATCH_SIZE}-aligned"
        )));
    }
    for (name, img) in [("host", host), ("donor", donor)] {
        if r + PATCH_SIZE > img.height() || c + PATCH_SIZE > img.width() {
            return Err(Error::invalid(format!(
                "{name} {}x{} cannot hold a tile at ({r}, {c})",
                img.width(),
                img.height()
            )));
        }
    }
    if qf1 == qf2 {
        return Err(Error::invalid("qf1 must differ from qf2"));
    }
    let tile_of = |img: &RawImage| img.crop(c, r, PATCH_SIZE, PATCH_SIZE);
    let (mut canvas, tile, splice_label, background_label) = match mode {
        ForgeMode::DoubleSplice => {
            let donor_tile = RawImage::new(PATCH_SIZE, PATCH_SIZE, tile_of(donor))?;
            let pre = compress(&donor_tile, qf1);
            (
                host.clone(),
                pre.decoded().samples().to_vec(),
                CompressionLabel::Double(qf1),
                CompressionLabel::Single,
            )
        }
        ForgeMode::SingleSplice => (
            compress(host, qf1).decoded().clone(),
            tile_of(donor),
            CompressionLabel::Single,
            CompressionLabel::Double(qf1),
        ),
    };
    canvas.paste(c, r, PATCH_SIZE, PATCH_SIZE, &tile);
    let artifact = compress(&canvas, qf2);
    let rows = host.height() / PATCH_SIZE;
    let cols = host.width() / PATCH_SIZE;
    let mut spliced = vec![false; rows * cols];
    spliced[(r / PATCH_SIZE) * cols + c / PATCH_SIZE] = true;
    Ok(Forgery {
        artifact,
        truth: TruthGrid { rows, cols, spliced },
        splice_label,
        background_label,
    })
}
