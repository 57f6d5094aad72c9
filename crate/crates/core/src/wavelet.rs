//! Periodized discrete wavelet transform with biorthogonal filter banks.
//!
//! Analysis computes `approx[k] = Σ_i lo[i] · x[(2k + lo.start + i) mod n]`
//! (and likewise `detail` with the high-pass taps). Synthesis scatters each
//! coefficient back through the synthesis taps at `2k + start + i`. Under
//! periodization half-size bands reconstruct exactly for every even length.
//!
//! The 2D transform filters rows first, then columns, per channel. Bands
//! follow the block layout `[[tl, tr], [bl, br]]`: `tr` is high-pass along
//! rows and low-pass along columns, `bl` the opposite, `br` high in both.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{geometry, invalid, Result};
use crate::image::Image;

/// Filter taps together with the index of the first tap relative to the
/// output position `2k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub taps: Vec<f64>,
    pub start: isize,
}

impl Filter {
    fn new(taps: Vec<f64>, start: isize) -> Self {
        Filter { taps, start }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub name: String,
    pub analysis_low: Filter,
    pub analysis_high: Filter,
    pub synthesis_low: Filter,
    pub synthesis_high: Filter,
}

pub const SUPPORTED_WAVELETS: [&str; 2] = ["haar", "bior2.2"];
pub const DEFAULT_WAVELET: &str = "bior2.2";

/// Looks up a filter bank by name (`"haar"` or `"bior2.2"`).
pub fn make_filter_bank(name: &str) -> Result<FilterBank> {
    let h = FRAC_1_SQRT_2;
    match name {
        "haar" => Ok(FilterBank {
            name: name.into(),
            analysis_low: Filter::new(vec![h, h], 0),
            analysis_high: Filter::new(vec![h, -h], 0),
            synthesis_low: Filter::new(vec![h, h], 0),
            synthesis_high: Filter::new(vec![h, -h], 0),
        }),
        // CDF 5/3 spline pair, normalized so the low-pass DC gain is √2.
        "bior2.2" => {
            let s = SQRT_2;
            Ok(FilterBank {
                name: name.into(),
                analysis_low: Filter::new(
                    vec![-s / 8.0, s / 4.0, 3.0 * s / 4.0, s / 4.0, -s / 8.0],
                    -2,
                ),
                analysis_high: Filter::new(vec![s / 4.0, -s / 2.0, s / 4.0], 0),
                synthesis_low: Filter::new(vec![s / 4.0, s / 2.0, s / 4.0], -1),
                synthesis_high: Filter::new(
                    vec![s / 8.0, s / 4.0, -3.0 * s / 4.0, s / 4.0, s / 8.0],
                    -1,
                ),
            })
        }
        other => Err(invalid(format!(
            "unknown wavelet {other:?}; supported: {}",
            SUPPORTED_WAVELETS.join(", ")
        ))),
    }
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

fn analyze_into(x: &[f64], f: &Filter, out: &mut [f64]) {
    let n = x.len();
    for (k, o) in out.iter_mut().enumerate() {
        let base = 2 * k as isize + f.start;
        let mut acc = 0.0;
        for (i, t) in f.taps.iter().enumerate() {
            acc += t * x[wrap(base + i as isize, n)];
        }
        *o = acc;
    }
}

fn synthesize_into(c: &[f64], f: &Filter, out: &mut [f64]) {
    let n = out.len();
    for (k, &v) in c.iter().enumerate() {
        let base = 2 * k as isize + f.start;
        for (i, t) in f.taps.iter().enumerate() {
            out[wrap(base + i as isize, n)] += t * v;
        }
    }
}

/// One analysis level on an even-length signal.
pub fn dwt1d(signal: &[f64], fb: &FilterBank) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = signal.len();
    if n == 0 || !n.is_multiple_of(2) {
        return Err(geometry(format!("dwt1d needs a positive even length, got {n}")));
    }
    let mut approx = vec![0.0; n / 2];
    let mut detail = vec![0.0; n / 2];
    analyze_into(signal, &fb.analysis_low, &mut approx);
    analyze_into(signal, &fb.analysis_high, &mut detail);
    Ok((approx, detail))
}

/// Exact inverse of [`dwt1d`].
pub fn idwt1d(approx: &[f64], detail: &[f64], fb: &FilterBank) -> Result<Vec<f64>> {
    if approx.len() != detail.len() {
        return Err(geometry(format!(
            "idwt1d halves differ in length: {} vs {}",
            approx.len(),
            detail.len()
        )));
    }
    if approx.is_empty() {
        return Err(geometry("idwt1d needs non-empty halves"));
    }
    let mut out = vec![0.0; 2 * approx.len()];
    synthesize_into(approx, &fb.synthesis_low, &mut out);
    synthesize_into(detail, &fb.synthesis_high, &mut out);
    Ok(out)
}

/// The four half-size bands of one 2D level.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadDecomposition {
    pub tl: Image,
    pub tr: Image,
    pub bl: Image,
    pub br: Image,
}

impl QuadDecomposition {
    pub fn new(tl: Image, tr: Image, bl: Image, br: Image) -> Result<Self> {
        for (name, b) in [("tr", &tr), ("bl", &bl), ("br", &br)] {
            if !b.same_dims(&tl) {
                return Err(geometry(format!(
                    "band {name} is {:?} but tl is {:?}",
                    b.dims(),
                    tl.dims()
                )));
            }
        }
        Ok(QuadDecomposition { tl, tr, bl, br })
    }

    /// `tl` kept, detail bands replaced by zeros.
    pub fn low_only(tl: Image) -> Self {
        let (h, w, c) = tl.dims();
        QuadDecomposition {
            tr: Image::zeros(h, w, c),
            bl: Image::zeros(h, w, c),
            br: Image::zeros(h, w, c),
            tl,
        }
    }

    /// Bands in `(tl, tr, bl, br)` order.
    pub fn bands(&self) -> [&Image; 4] {
        [&self.tl, &self.tr, &self.bl, &self.br]
    }

    /// Detail bands in `(tr, bl, br)` order.
    pub fn details(&self) -> [&Image; 3] {
        [&self.tr, &self.bl, &self.br]
    }
}

/// Separable 2D analysis: rows, then columns, each channel independently.
pub fn dwt2d(image: &Image, fb: &FilterBank) -> Result<QuadDecomposition> {
    let (h, w, ch) = image.dims();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(geometry(format!("dwt2d needs even extents, got {h}x{w}")));
    }
    let (hh, hw) = (h / 2, w / 2);
    let mut bands = [
        Image::zeros(hh, hw, ch),
        Image::zeros(hh, hw, ch),
        Image::zeros(hh, hw, ch),
        Image::zeros(hh, hw, ch),
    ];
    let mut row = vec![0.0; w];
    let mut col = vec![0.0; h];
    for c in 0..ch {
        // Row pass: low half in columns [0, w/2), high half in [w/2, w).
        let mut rows_lo = vec![0.0; h * hw];
        let mut rows_hi = vec![0.0; h * hw];
        for y in 0..h {
            for (x, v) in row.iter_mut().enumerate() {
                *v = image.get(y, x, c);
            }
            let (lo, hi) = dwt1d(&row, fb)?;
            rows_lo[y * hw..(y + 1) * hw].copy_from_slice(&lo);
            rows_hi[y * hw..(y + 1) * hw].copy_from_slice(&hi);
        }
        // Column pass on each half.
        for (half, (top, bottom)) in [(&rows_lo, (0, 2)), (&rows_hi, (1, 3))] {
            for x in 0..hw {
                for (y, v) in col.iter_mut().enumerate() {
                    *v = half[y * hw + x];
                }
                let (lo, hi) = dwt1d(&col, fb)?;
                for y in 0..hh {
                    bands[top].set(y, x, c, lo[y]);
                    bands[bottom].set(y, x, c, hi[y]);
                }
            }
        }
    }
    let [tl, tr, bl, br] = bands;
    Ok(QuadDecomposition { tl, tr, bl, br })
}

/// Exact inverse of [`dwt2d`].
pub fn idwt2d(quad: &QuadDecomposition, fb: &FilterBank) -> Result<Image> {
    let (hh, hw, ch) = quad.tl.dims();
    for (name, b) in [("tr", &quad.tr), ("bl", &quad.bl), ("br", &quad.br)] {
        if b.dims() != (hh, hw, ch) {
            return Err(geometry(format!(
                "band {name} is {:?} but tl is {:?}",
                b.dims(),
                quad.tl.dims()
            )));
        }
    }
    let (h, w) = (2 * hh, 2 * hw);
    let mut out = Image::zeros(h, w, ch);
    let mut lo = vec![0.0; hh];
    let mut hi = vec![0.0; hh];
    for c in 0..ch {
        let mut rows_lo = vec![0.0; h * hw];
        let mut rows_hi = vec![0.0; h * hw];
        for (top, bottom, dst) in [
            (&quad.tl, &quad.bl, &mut rows_lo),
            (&quad.tr, &quad.br, &mut rows_hi),
        ] {
            for x in 0..hw {
                for y in 0..hh {
                    lo[y] = top.get(y, x, c);
                    hi[y] = bottom.get(y, x, c);
                }
                let col = idwt1d(&lo, &hi, fb)?;
                for (y, v) in col.into_iter().enumerate() {
                    dst[y * hw + x] = v;
                }
            }
        }
        for y in 0..h {
            let row = idwt1d(&rows_lo[y * hw..(y + 1) * hw], &rows_hi[y * hw..(y + 1) * hw], fb)?;
            for (x, v) in row.into_iter().enumerate() {
                out.set(y, x, c, v);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn banks() -> Vec<FilterBank> {
        SUPPORTED_WAVELETS.iter().map(|n| make_filter_bank(n).unwrap()).collect()
    }

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
        Image::from_fn(h, w, c, |_, _, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn haar_coefficients_and_sign_convention() {
        let fb = make_filter_bank("haar").unwrap();
        let r = FRAC_1_SQRT_2;
        assert_eq!(fb.analysis_low.taps, vec![r, r]);
        assert_eq!(fb.synthesis_low.taps, vec![r, r]);
        assert_eq!(fb.analysis_high.taps, vec![r, -r]);
    }

    #[test]
    fn high_pass_kills_dc() {
        for fb in banks() {
            assert!(fb.analysis_high.sum().abs() < 1e-12, "{}", fb.name);
            assert!(fb.synthesis_high.sum().abs() < 1e-12, "{}", fb.name);
            assert!((fb.analysis_low.sum() - SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn bior22_matches_cdf53_table() {
        // Published bior2.2 decomposition filters (magnitudes, √2-normalized).
        let fb = make_filter_bank("bior2.2").unwrap();
        let lo = [-0.1767766952966369, 0.3535533905932738, 1.0606601717798214, 0.3535533905932738, -0.1767766952966369];
        let hi = [0.3535533905932738, -std::f64::consts::FRAC_1_SQRT_2, 0.3535533905932738];
        for (a, b) in fb.analysis_low.taps.iter().zip(lo) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in fb.analysis_high.taps.iter().zip(hi) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unknown_bank_lists_supported() {
        let msg = make_filter_bank("db4").unwrap_err().to_string();
        assert!(msg.contains("haar") && msg.contains("bior2.2"), "{msg}");
    }

    #[test]
    fn haar_constant_and_alternating() {
        let fb = make_filter_bank("haar").unwrap();
        let (a, d) = dwt1d(&[1.0; 4], &fb).unwrap();
        for v in &a {
            assert!((v - SQRT_2).abs() < 1e-15);
        }
        assert_eq!(d, vec![0.0, 0.0]);
        let (a, d) = dwt1d(&[1.0, -1.0, 1.0, -1.0], &fb).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
        for v in &d {
            assert!((v - SQRT_2).abs() < 1e-15);
        }
        let back = idwt1d(&[SQRT_2, SQRT_2], &[0.0, 0.0], &fb).unwrap();
        for v in back {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert_eq!(idwt1d(&[0.0; 3], &[0.0; 3], &fb).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn odd_and_mismatched_lengths_rejected() {
        let fb = make_filter_bank("haar").unwrap();
        assert!(dwt1d(&[1.0, 2.0, 3.0], &fb).is_err());
        assert!(idwt1d(&[1.0], &[1.0, 2.0], &fb).is_err());
        assert!(dwt2d(&Image::zeros(3, 4, 1), &fb).is_err());
        let q = QuadDecomposition::low_only(Image::zeros(2, 2, 1));
        let bad = QuadDecomposition {
            br: Image::zeros(2, 3, 1),
            ..q
        };
        assert!(idwt2d(&bad, &fb).is_err());
    }

    #[test]
    fn short_signals_still_reconstruct() {
        // Periodization wraps taps longer than the signal.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for fb in banks() {
            for n in [2, 4] {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (a, d) = dwt1d(&x, &fb).unwrap();
                let y = idwt1d(&a, &d, &fb).unwrap();
                for (p, q) in x.iter().zip(&y) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn haar_constant_image_bands() {
        let fb = make_filter_bank("haar").unwrap();
        let c = 0.37;
        let q = dwt2d(&Image::filled(8, 6, 3, c), &fb).unwrap();
        for v in q.tl.data() {
            assert!((v - 2.0 * c).abs() < 1e-10);
        }
        for b in q.details() {
            assert!(b.data().iter().all(|v| v.abs() < 1e-10));
        }
        let back = idwt2d(&QuadDecomposition::low_only(Image::filled(4, 3, 3, 2.0 * c)), &fb).unwrap();
        assert!(back.data().iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn constant_inputs_have_zero_detail_for_all_banks() {
        for fb in banks() {
            let q = dwt2d(&Image::filled(16, 16, 1, 0.8), &fb).unwrap();
            for b in q.details() {
                assert!(b.data().iter().all(|v| v.abs() < 1e-10), "{}", fb.name);
            }
        }
    }

    #[test]
    fn dwt2d_is_rows_then_columns_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let img = random_image(&mut rng, 8, 12, 1);
        for fb in banks() {
            let q = dwt2d(&img, &fb).unwrap();
            // Compose dwt1d by hand.
            let mut lo_rows = vec![];
            let mut hi_rows = vec![];
            for y in 0..8 {
                let row: Vec<f64> = (0..12).map(|x| img.get(y, x, 0)).collect();
                let (l, h) = dwt1d(&row, &fb).unwrap();
                lo_rows.push(l);
                hi_rows.push(h);
            }
            for x in 0..6 {
                let cl: Vec<f64> = lo_rows.iter().map(|r| r[x]).collect();
                let ch: Vec<f64> = hi_rows.iter().map(|r| r[x]).collect();
                let (ll, lh) = dwt1d(&cl, &fb).unwrap();
                let (hl, hh) = dwt1d(&ch, &fb).unwrap();
                for y in 0..4 {
                    assert_eq!(q.tl.get(y, x, 0).to_bits(), ll[y].to_bits());
                    assert_eq!(q.bl.get(y, x, 0).to_bits(), lh[y].to_bits());
                    assert_eq!(q.tr.get(y, x, 0).to_bits(), hl[y].to_bits());
                    assert_eq!(q.br.get(y, x, 0).to_bits(), hh[y].to_bits());
                }
            }
        }
    }

    #[test]
    fn tr_responds_to_vertical_edges() {
        // A left/right step varies along rows only: energy lands in tr, not bl.
        let fb = make_filter_bank("haar").unwrap();
        let img = Image::from_fn(8, 8, 1, |_, x, _| if x % 2 == 0 { 1.0 } else { 0.0 });
        let q = dwt2d(&img, &fb).unwrap();
        let energy = |b: &Image| b.data().iter().map(|v| v * v).sum::<f64>();
        assert!(energy(&q.tr) > 1.0);
        assert!(energy(&q.bl) < 1e-20);
    }

    #[test]
    fn random_64x64x3_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_image(&mut rng, 64, 64, 3);
        for fb in banks() {
            let back = idwt2d(&dwt2d(&img, &fb).unwrap(), &fb).unwrap();
            assert!(back.max_abs_diff(&img) < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn dwt1d_round_trip(half in 1usize..40, seed in any::<u64>(), which in 0usize..2) {
            let fb = make_filter_bank(SUPPORTED_WAVELETS[which]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..2 * half).map(|_| rng.random_range(-10.0..10.0)).collect();
            let (a, d) = dwt1d(&x, &fb).unwrap();
            let y = idwt1d(&a, &d, &fb).unwrap();
            for (p, q) in x.iter().zip(&y) {
                prop_assert!((p - q).abs() < 1e-8);
            }
        }

        #[test]
        fn dwt2d_linear_and_invertible(h in 1usize..9, w in 1usize..9, c in 1usize..4,
                                       a in -3.0f64..3.0, b in -3.0f64..3.0, seed in any::<u64>(), which in 0usize..2) {
            let fb = make_filter_bank(SUPPORTED_WAVELETS[which]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_image(&mut rng, 2 * h, 2 * w, c);
            let y = random_image(&mut rng, 2 * h, 2 * w, c);
            let qx = dwt2d(&x, &fb).unwrap();
            let qy = dwt2d(&y, &fb).unwrap();
            let qz = dwt2d(&x.axpby(a, &y, b).unwrap(), &fb).unwrap();
            for ((bz, bx), by) in qz.bands().iter().zip(qx.bands()).zip(qy.bands()) {
                let expect = bx.axpby(a, by, b).unwrap();
                prop_assert!(bz.max_abs_diff(&expect) < 1e-8);
            }
            let back = idwt2d(&qx, &fb).unwrap();
            prop_assert!(back.max_abs_diff(&x) < 1e-8);
        }
    }
}
