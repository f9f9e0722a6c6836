//! Maximal overlap discrete wavelet transform over circularly extended
//! series, with the seven supported orthogonal mother wavelets.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Decomposition depth used by the feature pipeline.
pub const PIPELINE_DEPTH: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveletError {
    #[error("unknown wavelet '{0}'")]
    Unknown(String),
    #[error("cannot transform an empty series")]
    EmptySeries,
    #[error("decomposition depth must be at least 1")]
    ZeroDepth,
}

/// Supported mother wavelets, named by filter width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MotherWavelet {
    Haar,
    Db4,
    Db8,
    La8,
    La16,
    C6,
    C12,
}

// Scaling (low-pass) filters, unit norm, sum sqrt(2).
const HAAR: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
const DB4: [f64; 4] = [
    0.48296291314453416,
    0.8365163037378079,
    0.2241438680420134,
    -0.12940952255126037,
];
const DB8: [f64; 8] = [
    0.2303778133088965,
    0.7148465705529157,
    0.6308807679298589,
    -0.027983769416859854,
    -0.18703481171909309,
    0.030841381835560764,
    0.0328830116668852,
    -0.010597401785069032,
];
const LA8: [f64; 8] = [
    0.0322231006040427,
    -0.012603967262037833,
    -0.09921954357684722,
    0.29785779560527736,
    0.8037387518059161,
    0.49761866763201545,
    -0.02963552764599851,
    -0.07576571478927333,
];
const LA16: [f64; 16] = [
    0.0018899503327594609,
    -0.0003029205147213668,
    -0.01495225833704823,
    0.003808752013890615,
    0.049137179673607506,
    -0.027219029917056003,
    -0.05194583810770904,
    0.3644418948353314,
    0.7771857517005235,
    0.4813596512583722,
    -0.061273359067658524,
    -0.1432942383508097,
    0.007607487324917605,
    0.03169508781149298,
    -0.0005421323317911481,
    -0.0033824159510061256,
];
const C6: [f64; 6] = [
    -0.07273261951252645,
    0.3378976624574818,
    0.8525720202116004,
    0.3848648468648578,
    -0.07273261951252645,
    -0.015655728135791993,
];
const C12: [f64; 12] = [
    0.01638733646320364,
    -0.04146493678687178,
    -0.0673725547237256,
    0.3861100668227629,
    0.8127236354494135,
    0.4170051844232391,
    -0.07648859907828076,
    -0.05943441864643109,
    0.02368017194684777,
    0.005611434819368834,
    -0.0018232088709110323,
    -0.000720549445520347,
];

impl MotherWavelet {
    pub const ALL: [MotherWavelet; 7] = [
        MotherWavelet::Haar,
        MotherWavelet::Db4,
        MotherWavelet::Db8,
        MotherWavelet::La8,
        MotherWavelet::La16,
        MotherWavelet::C6,
        MotherWavelet::C12,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotherWavelet::Haar => "Haar",
            MotherWavelet::Db4 => "DB4",
            MotherWavelet::Db8 => "DB8",
            MotherWavelet::La8 => "LA8",
            MotherWavelet::La16 => "LA16",
            MotherWavelet::C6 => "C6",
            MotherWavelet::C12 => "C12",
        }
    }

    pub fn scaling_coefficients(self) -> &'static [f64] {
        match self {
            MotherWavelet::Haar => &HAAR,
            MotherWavelet::Db4 => &DB4,
            MotherWavelet::Db8 => &DB8,
            MotherWavelet::La8 => &LA8,
            MotherWavelet::La16 => &LA16,
            MotherWavelet::C6 => &C6,
            MotherWavelet::C12 => &C12,
        }
    }

    pub fn width(self) -> usize {
        self.scaling_coefficients().len()
    }

    pub fn filter_bank(self) -> FilterBank {
        let g = self.scaling_coefficients().to_vec();
        let h = quadrature_mirror(&g);
        FilterBank { wavelet: self, g, h }
    }
}

impl fmt::Display for MotherWavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotherWavelet {
    type Err = WaveletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase();
        let w = match key.as_str() {
            "HAAR" => MotherWavelet::Haar,
            "DB4" => MotherWavelet::Db4,
            "DB8" => MotherWavelet::Db8,
            "LA8" => MotherWavelet::La8,
            "LA16" => MotherWavelet::La16,
            "C6" | "COIF6" => MotherWavelet::C6,
            "C12" | "COIF12" => MotherWavelet::C12,
            _ => return Err(WaveletError::Unknown(s.to_string())),
        };
        Ok(w)
    }
}

impl TryFrom<String> for MotherWavelet {
    type Error = WaveletError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<MotherWavelet> for String {
    fn from(w: MotherWavelet) -> String {
        w.name().to_string()
    }
}

/// Low-pass `g` and high-pass `h` filters of a mother wavelet.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    pub wavelet: MotherWavelet,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl FilterBank {
    pub fn width(&self) -> usize {
        self.g.len()
    }
}

/// Looks up a filter bank by wavelet name.
pub fn filter_bank(name: &str) -> Result<FilterBank, WaveletError> {
    Ok(name.parse::<MotherWavelet>()?.filter_bank())
}

/// `h(k) = (-1)^k g(L-1-k)`.
pub fn quadrature_mirror(g: &[f64]) -> Vec<f64> {
    let l = g.len();
    (0..l)
        .map(|k| if k % 2 == 0 { g[l - 1 - k] } else { -g[l - 1 - k] })
        .collect()
}

/// Width of the level-`j` equivalent filter for a mother filter of width `l`.
pub fn level_width(l: usize, j: usize) -> usize {
    ((1usize << j) - 1) * (l - 1) + 1
}

fn upsample(filter: &[f64], factor: usize) -> Vec<f64> {
    let mut out = vec![0.0; (filter.len() - 1) * factor + 1];
    for (k, &c) in filter.iter().enumerate() {
        out[k * factor] = c;
    }
    out
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Level-`j` MODWT filters `(g~_j, h~_j)`.
///
/// Built by the time-domain cascade: the mother filters are upsampled by
/// `2^(i)` and convolved onto the running scaling product, each stage carrying
/// a `1/sqrt(2)` rescale, so level `j` is scaled by `2^(-j/2)` overall.
pub fn level_filters(bank: &FilterBank, j: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(j >= 1, "level must be at least 1");
    let g: Vec<f64> = bank.g.iter().map(|c| c * FRAC_1_SQRT_2).collect();
    let h: Vec<f64> = bank.h.iter().map(|c| c * FRAC_1_SQRT_2).collect();
    let mut prev = vec![1.0];
    for i in 0..j - 1 {
        prev = convolve(&upsample(&g, 1 << i), &prev);
    }
    let up = 1 << (j - 1);
    (convolve(&upsample(&g, up), &prev), convolve(&upsample(&h, up), &prev))
}

/// Wavelet coefficients for levels `1..=J` and the level-`J` scaling
/// coefficients, each the length of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ModwtPyramid {
    pub wavelet: MotherWavelet,
    /// `details[j-1]` holds the level-`j` wavelet coefficients.
    pub details: Vec<Vec<f64>>,
    pub smooth: Vec<f64>,
}

impl ModwtPyramid {
    pub fn depth(&self) -> usize {
        self.details.len()
    }

    pub fn len(&self) -> usize {
        self.smooth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.smooth.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.details.iter().chain(std::iter::once(&self.smooth)).flatten().map(|v| v * v).sum()
    }

    /// `(band, index, value)` rows, bands labelled `W1..WJ` then `VJ`.
    pub fn rows(&self) -> Vec<(String, usize, f64)> {
        let mut rows = Vec::with_capacity(self.len() * (self.depth() + 1));
        for (j, band) in self.details.iter().enumerate() {
            rows.extend(band.iter().enumerate().map(|(k, &v)| (format!("W{}", j + 1), k, v)));
        }
        let label = format!("V{}", self.depth());
        rows.extend(self.smooth.iter().enumerate().map(|(k, &v)| (label.clone(), k, v)));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,index,value\n");
        for (band, k, v) in self.rows() {
            out.push_str(&format!("{band},{k},{v:e}\n"));
        }
        out
    }
}

/// MODWT of `x` to depth `depth`.
///
/// Uses the pyramid recursion: level `j` filters the level `j-1` scaling
/// series with the rescaled mother filters upsampled by `2^(j-1)`. This is
/// algebraically the circular convolution of `x` with the cascaded level
/// filters from [`level_filters`] (see [`modwt_direct`]) at `O(N L)` per level.
pub fn modwt(x: &[f64], wavelet: MotherWavelet, depth: usize) -> Result<ModwtPyramid, WaveletError> {
    if x.is_empty() {
        return Err(WaveletError::EmptySeries);
    }
    if depth == 0 {
        return Err(WaveletError::ZeroDepth);
    }
    let bank = wavelet.filter_bank();
    let g: Vec<f64> = bank.g.iter().map(|c| c * FRAC_1_SQRT_2).collect();
    let h: Vec<f64> = bank.h.iter().map(|c| c * FRAC_1_SQRT_2).collect();
    let n = x.len();
    let mut v = x.to_vec();
    let mut details = Vec::with_capacity(depth);
    for j in 1..=depth {
        let stride = (1usize << (j - 1)) % n;
        let mut w_next = vec![0.0; n];
        let mut v_next = vec![0.0; n];
        for k in 0..n {
            let mut idx = k;
            let (mut wk, mut vk) = (0.0, 0.0);
            for (gl, hl) in g.iter().zip(&h) {
                wk += hl * v[idx];
                vk += gl * v[idx];
                idx = if idx >= stride { idx - stride } else { idx + n - stride };
            }
            w_next[k] = wk;
            v_next[k] = vk;
        }
        details.push(w_next);
        v = v_next;
    }
    Ok(ModwtPyramid { wavelet, details, smooth: v })
}

/// MODWT evaluated literally as circular convolutions of `x` with each
/// level's cascaded filter. Quadratic in the filter width; used as a cross
/// check of [`modwt`].
pub fn modwt_direct(
    x: &[f64],
    wavelet: MotherWavelet,
    depth: usize,
) -> Result<ModwtPyramid, WaveletError> {
    if x.is_empty() {
        return Err(WaveletError::EmptySeries);
    }
    if depth == 0 {
        return Err(WaveletError::ZeroDepth);
    }
    let bank = wavelet.filter_bank();
    let n = x.len();
    let circular = |filter: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|k| {
                filter
                    .iter()
                    .enumerate()
                    .map(|(l, c)| c * x[(k + n - l % n) % n])
                    .sum()
            })
            .collect()
    };
    let mut details = Vec::with_capacity(depth);
    let mut smooth = Vec::new();
    for j in 1..=depth {
        let (gj, hj) = level_filters(&bank, j);
        details.push(circular(&hj));
        if j == depth {
            smooth = circular(&gj);
        }
    }
    Ok(ModwtPyramid { wavelet, details, smooth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    /// Autocorrelation form of the QMF identity: sum_k g(k) g(k+2m) = delta(m).
    fn qmf_residual(g: &[f64]) -> f64 {
        let l = g.len() as isize;
        let mut worst: f64 = 0.0;
        for m in -(l / 2)..=(l / 2) {
            let s: f64 = (0..l)
                .filter_map(|k| {
                    let k2 = k + 2 * m;
                    (0..l).contains(&k2).then(|| g[k as usize] * g[k2 as usize])
                })
                .sum();
            let target = if m == 0 { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
        worst
    }

    #[test]
    fn haar_filters() {
        let bank = filter_bank("Haar").unwrap();
        assert_eq!(bank.g, vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        assert_eq!(bank.h, vec![FRAC_1_SQRT_2, -FRAC_1_SQRT_2]);
    }

    #[test]
    fn all_tables_satisfy_qmf_and_sums() {
        for w in MotherWavelet::ALL {
            let bank = w.filter_bank();
            assert!(qmf_residual(&bank.g) < 1e-10, "{w}: {}", qmf_residual(&bank.g));
            assert!((bank.g.iter().sum::<f64>() - SQRT_2).abs() < 1e-10, "{w}");
            assert!(bank.h.iter().sum::<f64>().abs() < 1e-10, "{w}");
        }
    }

    #[test]
    fn db4_vanishing_moments() {
        let bank = filter_bank("DB4").unwrap();
        assert_eq!(bank.width(), 4);
        // Two vanishing moments: sum h(k) = sum k h(k) = 0.
        let m1: f64 = bank.h.iter().enumerate().map(|(k, c)| k as f64 * c).sum();
        assert!(m1.abs() < 1e-10);
    }

    #[test]
    fn unknown_wavelet_rejected() {
        let err = filter_bank("DB5").unwrap_err();
        assert_eq!(err, WaveletError::Unknown("DB5".into()));
        assert_eq!(err.to_string(), "unknown wavelet 'DB5'");
    }

    #[test]
    fn name_aliases_round_trip() {
        assert_eq!("Coif12".parse::<MotherWavelet>().unwrap(), MotherWavelet::C12);
        assert_eq!("haar".parse::<MotherWavelet>().unwrap(), MotherWavelet::Haar);
        for w in MotherWavelet::ALL {
            assert_eq!(w.name().parse::<MotherWavelet>().unwrap(), w);
        }
    }

    #[test]
    fn level_filter_widths() {
        let haar = MotherWavelet::Haar.filter_bank();
        let (g3, h3) = level_filters(&haar, 3);
        assert_eq!(level_width(2, 3), 8);
        assert_eq!((g3.len(), h3.len()), (8, 8));
        let db4 = MotherWavelet::Db4.filter_bank();
        assert_eq!(level_width(4, 2), 10);
        assert_eq!(level_filters(&db4, 2).1.len(), 10);
    }

    #[test]
    fn level_one_is_mother_over_sqrt2() {
        for w in MotherWavelet::ALL {
            let bank = w.filter_bank();
            let (g1, h1) = level_filters(&bank, 1);
            for k in 0..bank.width() {
                assert_eq!(g1[k], bank.g[k] * FRAC_1_SQRT_2);
                assert_eq!(h1[k], bank.h[k] * FRAC_1_SQRT_2);
            }
        }
    }

    #[test]
    fn constant_series_has_zero_details() {
        for w in MotherWavelet::ALL {
            let p = modwt(&[2.5; 23], w, 5).unwrap();
            for band in &p.details {
                assert!(band.iter().all(|v| v.abs() < 1e-10), "{w}");
            }
            // Scaling gain per level is (sum g / sqrt 2) = 1.
            assert!(p.smooth.iter().all(|v| (v - 2.5).abs() < 1e-10), "{w}");
        }
    }

    #[test]
    fn empty_series_rejected() {
        assert_eq!(modwt(&[], MotherWavelet::Haar, 5).unwrap_err(), WaveletError::EmptySeries);
        assert_eq!(modwt(&[1.0], MotherWavelet::Haar, 0).unwrap_err(), WaveletError::ZeroDepth);
    }

    #[test]
    fn pyramid_matches_direct_convolution() {
        let x: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 10.0 - 5.0).collect();
        for w in MotherWavelet::ALL {
            let fast = modwt(&x, w, 5).unwrap();
            let slow = modwt_direct(&x, w, 5).unwrap();
            for (a, b) in fast.details.iter().flatten().zip(slow.details.iter().flatten()) {
                assert!((a - b).abs() < 1e-10, "{w}");
            }
            for (a, b) in fast.smooth.iter().zip(&slow.smooth) {
                assert!((a - b).abs() < 1e-10, "{w}");
            }
        }
    }

    #[test]
    fn short_series_wraps_filters() {
        // N smaller than the level width still works and agrees with the literal form.
        let x = [1.0, -2.0, 0.5];
        let fast = modwt(&x, MotherWavelet::C12, 5).unwrap();
        let slow = modwt_direct(&x, MotherWavelet::C12, 5).unwrap();
        assert_eq!(fast.len(), 3);
        for (a, b) in fast.details.iter().flatten().zip(slow.details.iter().flatten()) {
            assert!((a - b).abs() < 1e-10);
        }
        let e: f64 = x.iter().map(|v| v * v).sum();
        assert!((fast.energy() - e).abs() < 1e-10);
    }

    #[test]
    fn csv_dump_layout() {
        let p = modwt(&[1.0, 2.0, 3.0, 4.0], MotherWavelet::Haar, 2).unwrap();
        let csv = p.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "level,index,value");
        assert_eq!(lines.len(), 1 + 3 * 4);
        assert!(lines[1].starts_with("W1,0,"));
        assert!(lines.last().unwrap().starts_with("V2,3,"));
    }
}
