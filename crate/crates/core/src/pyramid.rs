//! Recursive low-band encoder, base-patch slicing, per-level decoding and
//! the NSBC / NSBD containers.
//!
//! Level `l` (1-based) is the `l`-th application of [`dwt2d`]; its bands are
//! `N / 2^l` on a side. Encoding keeps only the level-`L` `tl`. Decoding
//! walks back from level `L` to 1, asking a [`BandPredictor`] for the
//! missing `tr`/`bl`/`br` bands and inverting the transform.

use crate::container::{check_finite, to_u32, to_u8, Reader, Writer};
use crate::error::{geometry, invalid, FormatError, Result};
use crate::image::Image;
use crate::wavelet::{dwt2d, idwt2d, FilterBank, QuadDecomposition};

pub const DEFAULT_LEVELS: usize = 2;
pub const DEFAULT_BASE_PATCH: usize = 32;

pub const CODE_MAGIC: &[u8; 4] = b"NSBC";
pub const CODE_VERSION: u16 = 1;
pub const DATASET_MAGIC: &[u8; 4] = b"NSBD";
pub const DATASET_VERSION: u16 = 1;

fn check_divisible(h: usize, w: usize, levels: usize) -> Result<()> {
    if levels == 0 {
        return Err(invalid("levels must be at least 1"));
    }
    let f = 1usize
        .checked_shl(levels as u32)
        .filter(|f| *f <= h.max(w))
        .ok_or_else(|| geometry(format!("{levels} levels exceed a {h}x{w} image")))?;
    if !h.is_multiple_of(f) {
        return Err(geometry(format!("height {h} is not divisible by 2^{levels} = {f}")));
    }
    if !w.is_multiple_of(f) {
        return Err(geometry(format!("width {w} is not divisible by 2^{levels} = {f}")));
    }
    Ok(())
}

/// The lossy latent: the level-`L` low band plus what is needed to decode it.
#[derive(Debug, Clone, PartialEq)]
pub struct PyramidCode {
    pub levels: usize,
    pub tl: Image,
    pub original_height: usize,
    pub original_width: usize,
    pub channels: usize,
    pub wavelet_name: String,
}

impl PyramidCode {
    /// `4^levels`: the original sample count divided by the latent's.
    pub fn compression_ratio(&self) -> usize {
        (self.original_height * self.original_width * self.channels) / self.tl.len()
    }
}

/// Applies [`dwt2d`] `levels` times, keeping only the `tl` band each time.
pub fn encode(image: &Image, levels: usize, fb: &FilterBank) -> Result<PyramidCode> {
    let (h, w, c) = image.dims();
    check_divisible(h, w, levels)?;
    let mut tl = image.clone();
    for _ in 0..levels {
        tl = dwt2d(&tl, fb)?.tl;
    }
    Ok(PyramidCode {
        levels,
        tl,
        original_height: h,
        original_width: w,
        channels: c,
        wavelet_name: fb.name.clone(),
    })
}

/// All `levels` quad decompositions; entry `l - 1` is the transform of the
/// level-`(l - 1)` `tl` (the image itself for `l = 1`).
pub fn full_decompose(image: &Image, levels: usize, fb: &FilterBank) -> Result<Vec<QuadDecomposition>> {
    check_divisible(image.height(), image.width(), levels)?;
    let mut out: Vec<QuadDecomposition> = Vec::with_capacity(levels);
    for _ in 0..levels {
        let src = out.last().map_or(image, |q| &q.tl);
        let q = dwt2d(src, fb)?;
        out.push(q);
    }
    Ok(out)
}

/// Inverts a [`full_decompose`] result level by level.
pub fn recompose(levels: &[QuadDecomposition], fb: &FilterBank) -> Result<Image> {
    let last = levels.last().ok_or_else(|| invalid("no levels to recompose"))?;
    let mut cur = last.tl.clone();
    for q in levels.iter().rev() {
        let quad = QuadDecomposition::new(cur, q.tr.clone(), q.bl.clone(), q.br.clone())?;
        cur = idwt2d(&quad, fb)?;
    }
    Ok(cur)
}

/// Band and patch extents of one decoder level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelGeometry {
    pub band_extent: usize,
    pub base_patch: usize,
    pub channels: usize,
}

impl LevelGeometry {
    pub fn new(band_extent: usize, base_patch: usize, channels: usize) -> Result<Self> {
        let g = LevelGeometry {
            band_extent,
            base_patch,
            channels,
        };
        g.validate()?;
        Ok(g)
    }

    /// Geometry of level `level` for a square `image_extent` image.
    pub fn for_level(image_extent: usize, level: usize, base_patch: usize, channels: usize) -> Result<Self> {
        check_divisible(image_extent, image_extent, level)?;
        Self::new(image_extent >> level, base_patch, channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_patch == 0 || self.channels == 0 {
            return Err(geometry("base patch and channels must be positive"));
        }
        if self.band_extent < self.base_patch {
            return Err(geometry(format!(
                "band extent {} is smaller than base patch {}",
                self.band_extent, self.base_patch
            )));
        }
        let r = self.band_extent / self.base_patch;
        if !self.band_extent.is_multiple_of(self.base_patch) || !r.is_power_of_two() {
            return Err(geometry(format!(
                "band extent {} is not a power-of-two multiple of base patch {}",
                self.band_extent, self.base_patch
            )));
        }
        Ok(())
    }

    /// Patches per side of one band's grid.
    pub fn grid_side(&self) -> usize {
        self.band_extent / self.base_patch
    }

    pub fn patches_per_band(&self) -> usize {
        self.grid_side() * self.grid_side()
    }

    /// One head per base patch over the three detail bands.
    pub fn head_count(&self) -> usize {
        3 * self.patches_per_band()
    }

    /// Wavelet levels between a band and its base patches.
    pub fn slice_depth(&self) -> usize {
        self.grid_side().trailing_zeros() as usize
    }
}

/// Base patches of one band in depth-first `(tl, tr, bl, br)` leaf order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub patches: Vec<Image>,
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub base_size: usize,
}

impl PatchGrid {
    pub fn zeros(g: &LevelGeometry) -> Self {
        PatchGrid {
            patches: vec![Image::zeros(g.base_patch, g.base_patch, g.channels); g.patches_per_band()],
            grid_rows: g.grid_side(),
            grid_cols: g.grid_side(),
            base_size: g.base_patch,
        }
    }
}

fn slice_rec(img: &Image, p: usize, fb: &FilterBank, out: &mut Vec<Image>) -> Result<()> {
    if img.height() == p {
        out.push(img.clone());
        return Ok(());
    }
    let q = dwt2d(img, fb)?;
    for b in q.bands() {
        slice_rec(b, p, fb, out)?;
    }
    Ok(())
}

/// Recursively transforms `band` until every leaf is `p x p`.
pub fn slice_to_base_patches(band: &Image, p: usize, fb: &FilterBank) -> Result<PatchGrid> {
    let (h, w, _) = band.dims();
    if p == 0 || h % p != 0 || w % p != 0 || h / p != w / p || !(h / p).is_power_of_two() {
        return Err(geometry(format!(
            "a {h}x{w} band is not a power-of-two multiple of {p}x{p} patches"
        )));
    }
    let side = h / p;
    let mut patches = Vec::with_capacity(side * side);
    slice_rec(band, p, fb, &mut patches)?;
    Ok(PatchGrid {
        patches,
        grid_rows: side,
        grid_cols: side,
        base_size: p,
    })
}

fn assemble_rec<'a>(
    it: &mut impl Iterator<Item = &'a Image>,
    extent: usize,
    p: usize,
    fb: &FilterBank,
) -> Result<Image> {
    if extent == p {
        return Ok(it.next().expect("patch count checked").clone());
    }
    let half = extent / 2;
    let tl = assemble_rec(it, half, p, fb)?;
    let tr = assemble_rec(it, half, p, fb)?;
    let bl = assemble_rec(it, half, p, fb)?;
    let br = assemble_rec(it, half, p, fb)?;
    idwt2d(&QuadDecomposition::new(tl, tr, bl, br)?, fb)
}

/// Inverse of [`slice_to_base_patches`].
pub fn assemble_from_patches(grid: &PatchGrid, fb: &FilterBank) -> Result<Image> {
    let p = grid.base_size;
    let side = grid.grid_rows;
    if side == 0 || grid.grid_cols != side || !side.is_power_of_two() {
        return Err(geometry(format!(
            "patch grid must be square with a power-of-two side, got {}x{}",
            grid.grid_rows, grid.grid_cols
        )));
    }
    if grid.patches.len() != side * side {
        return Err(geometry(format!(
            "{}x{} grid holds {} patches",
            side,
            side,
            grid.patches.len()
        )));
    }
    let c = grid.patches[0].channels();
    if let Some(bad) = grid.patches.iter().position(|q| q.dims() != (p, p, c)) {
        return Err(geometry(format!(
            "patch {bad} is {:?}, expected {p}x{p}x{c}",
            grid.patches[bad].dims()
        )));
    }
    assemble_rec(&mut grid.patches.iter(), side * p, p, fb)
}

/// Anything that can fill in the detail bands of one level from its `tl`.
pub trait BandPredictor {
    fn geometry(&self) -> LevelGeometry;

    /// Base patches for `(tr, bl, br)`.
    fn predict(&self, tl: &Image) -> Result<[PatchGrid; 3]>;
}

/// Predicts all-zero detail bands: decoding reduces to low-pass upsampling.
#[derive(Debug, Clone, Copy)]
pub struct ZeroPredictor(pub LevelGeometry);

impl BandPredictor for ZeroPredictor {
    fn geometry(&self) -> LevelGeometry {
        self.0
    }

    fn predict(&self, _tl: &Image) -> Result<[PatchGrid; 3]> {
        let z = PatchGrid::zeros(&self.0);
        Ok([z.clone(), z.clone(), z])
    }
}

/// Returns the true detail bands of a known decomposition level.
#[derive(Debug, Clone)]
pub struct OraclePredictor {
    geometry: LevelGeometry,
    patches: [PatchGrid; 3],
}

impl OraclePredictor {
    pub fn new(truth: &QuadDecomposition, base_patch: usize, fb: &FilterBank) -> Result<Self> {
        let geometry = LevelGeometry::new(truth.tl.height(), base_patch, truth.tl.channels())?;
        let [tr, bl, br] = truth.details();
        Ok(OraclePredictor {
            geometry,
            patches: [
                slice_to_base_patches(tr, base_patch, fb)?,
                slice_to_base_patches(bl, base_patch, fb)?,
                slice_to_base_patches(br, base_patch, fb)?,
            ],
        })
    }

    /// One oracle per level of `image`'s decomposition.
    pub fn for_image(image: &Image, levels: usize, base_patch: usize, fb: &FilterBank) -> Result<Vec<Self>> {
        full_decompose(image, levels, fb)?
            .iter()
            .map(|q| Self::new(q, base_patch, fb))
            .collect()
    }
}

impl BandPredictor for OraclePredictor {
    fn geometry(&self) -> LevelGeometry {
        self.geometry
    }

    fn predict(&self, _tl: &Image) -> Result<[PatchGrid; 3]> {
        Ok(self.patches.clone())
    }
}

/// Reconstructs the level-`(l - 1)` `tl` from the level-`l` one.
pub fn decode_level(tl: &Image, model: &dyn BandPredictor, fb: &FilterBank) -> Result<Image> {
    let g = model.geometry();
    if tl.dims() != (g.band_extent, g.band_extent, g.channels) {
        return Err(geometry(format!(
            "tl is {:?} but the model expects {}x{}x{}",
            tl.dims(),
            g.band_extent,
            g.band_extent,
            g.channels
        )));
    }
    let [tr, bl, br] = model.predict(tl)?;
    let quad = QuadDecomposition::new(
        tl.clone(),
        assemble_from_patches(&tr, fb)?,
        assemble_from_patches(&bl, fb)?,
        assemble_from_patches(&br, fb)?,
    )?;
    idwt2d(&quad, fb)
}

/// Decodes a latent with one predictor per level; `models[l - 1]` serves level `l`.
pub fn decode(code: &PyramidCode, models: &[&dyn BandPredictor], fb: &FilterBank) -> Result<Image> {
    if models.len() != code.levels {
        return Err(geometry(format!(
            "code has {} levels but {} models were supplied",
            code.levels,
            models.len()
        )));
    }
    if fb.name != code.wavelet_name {
        return Err(invalid(format!(
            "code was encoded with {:?}, decoder uses {:?}",
            code.wavelet_name, fb.name
        )));
    }
    let mut cur = code.tl.clone();
    for l in (1..=code.levels).rev() {
        cur = decode_level(&cur, models[l - 1], fb)
            .map_err(|e| geometry(format!("level {l}: {e}")))?;
    }
    if cur.dims() != (code.original_height, code.original_width, code.channels) {
        return Err(geometry(format!(
            "decoded {:?}, code records {}x{}x{}",
            cur.dims(),
            code.original_height,
            code.original_width,
            code.channels
        )));
    }
    Ok(cur)
}

/// Deterministic reconstruction from `tl` alone (all detail bands zero).
pub fn low_pass_decode(code: &PyramidCode, fb: &FilterBank) -> Result<Image> {
    let mut cur = code.tl.clone();
    for _ in 0..code.levels {
        cur = idwt2d(&QuadDecomposition::low_only(cur), fb)?;
    }
    Ok(cur)
}

/// NSBC container: magic, u16 version, u8-prefixed wavelet name, u8 levels,
/// u32 height, u32 width, u8 channels, then `tl` as f32 (row-major,
/// channel-interleaved).
pub fn serialize_code(code: &PyramidCode) -> Result<Vec<u8>, FormatError> {
    let mut w = Writer::with_header(CODE_MAGIC, CODE_VERSION);
    w.short_str(&code.wavelet_name)?;
    w.u8(to_u8(code.levels, "levels")?);
    w.u32(to_u32(code.original_height, "height")?);
    w.u32(to_u32(code.original_width, "width")?);
    w.u8(to_u8(code.channels, "channels")?);
    w.f32s(code.tl.data());
    Ok(w.finish())
}

pub fn deserialize_code(bytes: &[u8]) -> Result<PyramidCode, FormatError> {
    let mut r = Reader::header(bytes, CODE_MAGIC, CODE_VERSION)?;
    let wavelet_name = r.short_str()?;
    let levels = r.u8()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u8()? as usize;
    check_divisible(h, w, levels).map_err(|e| FormatError::Malformed(e.to_string()))?;
    if c == 0 {
        return Err(FormatError::Malformed("zero channels".into()));
    }
    let (th, tw) = (h >> levels, w >> levels);
    let values = r.f32s(th * tw * c)?;
    r.expect_end()?;
    check_finite(&values, "tl")?;
    let tl = Image::new(th, tw, c, values).map_err(|e| FormatError::Malformed(e.to_string()))?;
    Ok(PyramidCode {
        levels,
        tl,
        original_height: h,
        original_width: w,
        channels: c,
        wavelet_name,
    })
}

/// Training tuples of one level, tagged with the index of the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDataset {
    pub level: usize,
    pub wavelet_name: String,
    pub examples: Vec<QuadDecomposition>,
    pub image_ids: Vec<usize>,
}

impl LevelDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Band extents shared by every tuple.
    pub fn band_dims(&self) -> Option<(usize, usize, usize)> {
        self.examples.first().map(|q| q.tl.dims())
    }

    /// Keeps the examples whose source id satisfies `keep`.
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> LevelDataset {
        let (examples, image_ids) = self
            .examples
            .iter()
            .zip(&self.image_ids)
            .filter(|(_, id)| keep(**id))
            .map(|(q, id)| (q.clone(), *id))
            .unzip();
        LevelDataset {
            level: self.level,
            wavelet_name: self.wavelet_name.clone(),
            examples,
            image_ids,
        }
    }
}

/// One dataset per level from a corpus of equally sized images.
pub fn build_level_datasets(images: &[Image], levels: usize, fb: &FilterBank) -> Result<Vec<LevelDataset>> {
    let mut sets: Vec<LevelDataset> = (1..=levels)
        .map(|level| LevelDataset {
            level,
            wavelet_name: fb.name.clone(),
            examples: Vec::with_capacity(images.len()),
            image_ids: Vec::with_capacity(images.len()),
        })
        .collect();
    let dims = images.first().map(|i| i.dims());
    for (id, img) in images.iter().enumerate() {
        if Some(img.dims()) != dims {
            return Err(geometry(format!(
                "image {id} is {:?}, corpus images are {:?}",
                img.dims(),
                dims.unwrap()
            )));
        }
        for (set, q) in sets.iter_mut().zip(full_decompose(img, levels, fb)?) {
            set.examples.push(q);
            set.image_ids.push(id);
        }
    }
    Ok(sets)
}

/// NSBD container: magic, u16 version, u8-prefixed wavelet name, u8 level,
/// u32 band height, u32 band width, u8 channels, u32 count, then per tuple
/// u32 image id followed by `tl, tr, bl, br` as f32.
pub fn serialize_dataset(ds: &LevelDataset) -> Result<Vec<u8>, FormatError> {
    let (h, w, c) = ds
        .band_dims()
        .ok_or_else(|| FormatError::Malformed("empty dataset".into()))?;
    let mut wr = Writer::with_header(DATASET_MAGIC, DATASET_VERSION);
    wr.short_str(&ds.wavelet_name)?;
    wr.u8(to_u8(ds.level, "level")?);
    wr.u32(to_u32(h, "height")?);
    wr.u32(to_u32(w, "width")?);
    wr.u8(to_u8(c, "channels")?);
    wr.u32(to_u32(ds.len(), "count")?);
    for (q, id) in ds.examples.iter().zip(&ds.image_ids) {
        wr.u32(to_u32(*id, "image id")?);
        for b in q.bands() {
            if b.dims() != (h, w, c) {
                return Err(FormatError::Malformed("bands differ in extent".into()));
            }
            wr.f32s(b.data());
        }
    }
    Ok(wr.finish())
}

pub fn deserialize_dataset(bytes: &[u8]) -> Result<LevelDataset, FormatError> {
    let mut r = Reader::header(bytes, DATASET_MAGIC, DATASET_VERSION)?;
    let wavelet_name = r.short_str()?;
    let level = r.u8()? as usize;
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let c = r.u8()? as usize;
    let n = r.u32()? as usize;
    if h == 0 || w == 0 || c == 0 {
        return Err(FormatError::Malformed("zero band extent".into()));
    }
    let mut examples = Vec::with_capacity(n);
    let mut image_ids = Vec::with_capacity(n);
    for _ in 0..n {
        image_ids.push(r.u32()? as usize);
        let mut bands = Vec::with_capacity(4);
        for _ in 0..4 {
            let v = r.f32s(h * w * c)?;
            check_finite(&v, "band")?;
            bands.push(Image::new(h, w, c, v).map_err(|e| FormatError::Malformed(e.to_string()))?);
        }
        let br = bands.pop().unwrap();
        let bl = bands.pop().unwrap();
        let tr = bands.pop().unwrap();
        let tl = bands.pop().unwrap();
        examples.push(QuadDecomposition { tl, tr, bl, br });
    }
    r.expect_end()?;
    Ok(LevelDataset {
        level,
        wavelet_name,
        examples,
        image_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::make_filter_bank;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_img(seed: u64, h: usize, w: usize, c: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(h, w, c, |_, _, _| rng.random_range(0.0..1.0))
    }

    fn bior() -> FilterBank {
        make_filter_bank("bior2.2").unwrap()
    }

    #[test]
    fn encode_geometry_and_ratio() {
        let code = encode(&rand_img(0, 256, 256, 3), 2, &bior()).unwrap();
        assert_eq!(code.tl.dims(), (64, 64, 3));
        assert_eq!(code.compression_ratio(), 16);
        assert_eq!(code.wavelet_name, "bior2.2");
    }

    #[test]
    fn encode_rejects_zero_levels_and_indivisible() {
        let fb = bior();
        assert!(encode(&rand_img(0, 8, 8, 1), 0, &fb).is_err());
        let msg = encode(&rand_img(0, 12, 16, 1), 3, &fb).unwrap_err().to_string();
        assert!(msg.contains("height 12"), "{msg}");
        let msg = encode(&rand_img(0, 16, 12, 1), 3, &fb).unwrap_err().to_string();
        assert!(msg.contains("width 12"), "{msg}");
    }

    #[test]
    fn haar_level_one_of_constant() {
        let fb = make_filter_bank("haar").unwrap();
        let code = encode(&Image::filled(8, 8, 1, 0.25), 1, &fb).unwrap();
        assert!(code.tl.data().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn encode_is_prefix_composition() {
        let fb = bior();
        let x = rand_img(1, 32, 32, 3);
        let two = encode(&x, 2, &fb).unwrap();
        let one = encode(&x, 1, &fb).unwrap();
        let again = encode(&one.tl, 1, &fb).unwrap();
        assert_eq!(two.tl, again.tl);
    }

    #[test]
    fn full_decompose_shapes_and_shared_recursion() {
        let fb = bior();
        let x = rand_img(2, 256, 256, 1);
        let levels = full_decompose(&x, 2, &fb).unwrap();
        assert_eq!(levels[0].tl.dims(), (128, 128, 1));
        assert_eq!(levels[1].br.dims(), (64, 64, 1));
        assert_eq!(levels[1].tl, encode(&x, 2, &fb).unwrap().tl);
        assert!(recompose(&levels, &fb).unwrap().max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn head_counts_follow_geometry() {
        assert_eq!(LevelGeometry::new(64, 32, 3).unwrap().head_count(), 12);
        assert_eq!(LevelGeometry::new(128, 32, 3).unwrap().head_count(), 48);
        assert_eq!(LevelGeometry::new(32, 32, 3).unwrap().head_count(), 3);
        assert!(LevelGeometry::new(16, 32, 3).is_err());
        assert!(LevelGeometry::new(96, 32, 3).is_err());
    }

    #[test]
    fn slice_counts_and_identity() {
        let fb = bior();
        assert_eq!(slice_to_base_patches(&rand_img(3, 64, 64, 3), 32, &fb).unwrap().patches.len(), 4);
        let g = slice_to_base_patches(&rand_img(3, 128, 128, 3), 32, &fb).unwrap();
        assert_eq!((g.patches.len(), g.grid_rows, g.grid_cols), (16, 4, 4));
        let x = rand_img(4, 32, 32, 3);
        let g = slice_to_base_patches(&x, 32, &fb).unwrap();
        assert_eq!(g.patches, vec![x.clone()]);
        assert_eq!(assemble_from_patches(&g, &fb).unwrap(), x);
        assert!(slice_to_base_patches(&rand_img(3, 96, 96, 1), 32, &fb).is_err());
        assert!(slice_to_base_patches(&rand_img(3, 64, 32, 1), 32, &fb).is_err());
    }

    #[test]
    fn slice_order_is_depth_first() {
        let fb = bior();
        let x = rand_img(5, 128, 128, 1);
        let g = slice_to_base_patches(&x, 32, &fb).unwrap();
        let q = dwt2d(&x, &fb).unwrap();
        // Leaves 4..8 are the four sub-bands of the top-level tr.
        let sub = dwt2d(&q.tr, &fb).unwrap();
        for (i, b) in sub.bands().iter().enumerate() {
            assert_eq!(&g.patches[4 + i], *b);
        }
    }

    #[test]
    fn assemble_edge_cases() {
        let fb = bior();
        let g = LevelGeometry::new(64, 16, 2).unwrap();
        let z = assemble_from_patches(&PatchGrid::zeros(&g), &fb).unwrap();
        assert!(z.data().iter().all(|v| *v == 0.0));
        assert_eq!(z.dims(), (64, 64, 2));
        let mut bad = PatchGrid::zeros(&g);
        bad.patches.pop();
        assert!(assemble_from_patches(&bad, &fb).is_err());
        let mut bad = PatchGrid::zeros(&g);
        bad.patches[3] = Image::zeros(8, 8, 2);
        assert!(assemble_from_patches(&bad, &fb).is_err());
    }

    #[test]
    fn decode_level_with_oracle_and_zero() {
        let fb = bior();
        let x = rand_img(6, 128, 128, 3);
        let q = dwt2d(&x, &fb).unwrap();
        let oracle = OraclePredictor::new(&q, 32, &fb).unwrap();
        let out = decode_level(&q.tl, &oracle, &fb).unwrap();
        assert_eq!(out.dims(), (128, 128, 3));
        assert!(out.max_abs_diff(&x) < 1e-6);

        let zero = ZeroPredictor(oracle.geometry());
        let lp = decode_level(&q.tl, &zero, &fb).unwrap();
        assert_eq!(lp, idwt2d(&QuadDecomposition::low_only(q.tl.clone()), &fb).unwrap());

        let wrong = ZeroPredictor(LevelGeometry::new(32, 32, 3).unwrap());
        assert!(decode_level(&q.tl, &wrong, &fb).is_err());
    }

    #[test]
    fn decode_with_oracles_and_model_count() {
        let fb = bior();
        let x = rand_img(7, 128, 128, 3);
        let code = encode(&x, 2, &fb).unwrap();
        let oracles = OraclePredictor::for_image(&x, 2, 32, &fb).unwrap();
        let refs: Vec<&dyn BandPredictor> = oracles.iter().map(|o| o as &dyn BandPredictor).collect();
        let out = decode(&code, &refs, &fb).unwrap();
        assert_eq!(out.dims(), (128, 128, 3));
        assert!(out.max_abs_diff(&x) < 1e-5);
        assert!(decode(&code, &refs[..1], &fb).is_err());
        // Swapped levels do not chain.
        let swapped = [refs[1], refs[0]];
        assert!(decode(&code, &swapped, &fb).is_err());

        let zeros: Vec<ZeroPredictor> = oracles.iter().map(|o| ZeroPredictor(o.geometry())).collect();
        let zrefs: Vec<&dyn BandPredictor> = zeros.iter().map(|z| z as &dyn BandPredictor).collect();
        assert_eq!(decode(&code, &zrefs, &fb).unwrap(), low_pass_decode(&code, &fb).unwrap());
    }

    #[test]
    fn code_container_faults() {
        let code = encode(&rand_img(8, 32, 32, 3), 2, &bior()).unwrap();
        let bytes = serialize_code(&code).unwrap();
        let back = deserialize_code(&bytes).unwrap();
        assert_eq!(serialize_code(&back).unwrap(), bytes);
        assert_eq!(back.tl.dims(), (8, 8, 3));
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(matches!(deserialize_code(&bad), Err(FormatError::BadMagic { .. })));
        assert!(matches!(
            deserialize_code(&bytes[..bytes.len() - 1]),
            Err(FormatError::Truncated { .. })
        ));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(deserialize_code(&v), Err(FormatError::VersionMismatch { .. })));
    }

    #[test]
    fn dataset_container_round_trip() {
        let fb = bior();
        let imgs: Vec<Image> = (0..3).map(|i| rand_img(i, 16, 16, 3)).collect();
        let sets = build_level_datasets(&imgs, 2, &fb).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[1].band_dims(), Some((4, 4, 3)));
        let bytes = serialize_dataset(&sets[0]).unwrap();
        let back = deserialize_dataset(&bytes).unwrap();
        assert_eq!(back.image_ids, vec![0, 1, 2]);
        assert_eq!(serialize_dataset(&back).unwrap(), bytes);
        assert!(deserialize_dataset(&bytes[..bytes.len() - 2]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn slice_assemble_inverse(depth in 0u32..3, p in prop::sample::select(vec![2usize, 4, 8]), c in 1usize..4, seed in any::<u64>()) {
            let fb = bior();
            let n = p << depth;
            let x = rand_img(seed, n, n, c);
            let g = slice_to_base_patches(&x, p, &fb).unwrap();
            prop_assert_eq!(g.patches.len(), 1 << (2 * depth));
            let y = assemble_from_patches(&g, &fb).unwrap();
            prop_assert!(y.max_abs_diff(&x) < 1e-8);
        }

        #[test]
        fn latent_has_quarter_samples_per_level(l in 1usize..4, k in 1usize..4, c in 1usize..4) {
            let n = k << l;
            let code = encode(&rand_img(0, n, 2 * n, c), l, &bior()).unwrap();
            prop_assert_eq!(code.tl.len() * (1 << (2 * l)), n * 2 * n * c);
        }
    }
}
