//! Multi-level discrete wavelet transform (Mallat pyramid) over a small
//! bank of orthogonal wavelets, plus energy-to-entropy mother wavelet
//! selection.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const HAAR: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];
const DB2: [f64; 4] = [
    -0.12940952255126037,
    0.2241438680420134,
    0.8365163037378079,
    0.48296291314453416,
];
const DB4: [f64; 8] = [
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
];
const DB8: [f64; 16] = [
    -0.00011747678412476953,
    0.0006754494064505693,
    -0.00039174037337694705,
    -0.004870352993451574,
    0.008746094047405777,
    0.013981027917398282,
    -0.044088253930794755,
    -0.017369301001807547,
    0.12874742662047847,
    0.0004724845739132828,
    -0.2840155429615469,
    -0.015829105256349306,
    0.5853546836542067,
    0.6756307362972898,
    0.31287159091429995,
    0.05441584224310401,
];
const SYM4: [f64; 8] = [
    -0.07576571478927333,
    -0.02963552764599851,
    0.49761866763201545,
    0.8037387518059161,
    0.29785779560527736,
    -0.09921954357684722,
    -0.012603967262037833,
    0.0322231006040427,
];
const COIF1: [f64; 6] = [
    -0.015655728135791993,
    -0.07273261951252645,
    0.3848648468648578,
    0.8525720202116004,
    0.3378976624574818,
    -0.07273261951252645,
];

/// Names of the built-in wavelets, in bank order.
pub const BUILTIN_WAVELETS: [&str; 6] = ["haar", "db2", "db4", "db8", "sym4", "coif1"];

/// An orthogonal wavelet given by its decomposition low-pass filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    name: String,
    dec_lo: Vec<f64>,
    dec_hi: Vec<f64>,
}

impl Wavelet {
    /// Builds a wavelet from its low-pass decomposition filter. The
    /// high-pass filter is the quadrature mirror `(-1)^(j+1) lo[F-1-j]`.
    pub fn from_lowpass(name: impl Into<String>, dec_lo: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let f = dec_lo.len();
        if f < 2 || !f.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "wavelet `{name}`: filter length {f} must be even and >= 2"
            )));
        }
        let norm: f64 = dec_lo.iter().map(|c| c * c).sum();
        let dc: f64 = dec_lo.iter().sum();
        if (norm - 1.0).abs() > 1e-10 || (dc - std::f64::consts::SQRT_2).abs() > 1e-10 {
            return Err(Error::Argument(format!(
                "wavelet `{name}`: low-pass filter is not orthonormal"
            )));
        }
        let dec_hi = (0..f)
            .map(|j| if j % 2 == 0 { -dec_lo[f - 1 - j] } else { dec_lo[f - 1 - j] })
            .collect();
        Ok(Self { name, dec_lo, dec_hi })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let lo: &[f64] = match name {
            "haar" => &HAAR,
            "db2" => &DB2,
            "db4" => &DB4,
            "db8" => &DB8,
            "sym4" => &SYM4,
            "coif1" => &COIF1,
            other => {
                return Err(Error::Argument(format!(
                    "unknown wavelet `{other}` (built-in: {})",
                    BUILTIN_WAVELETS.join(", ")
                )))
            }
        };
        Self::from_lowpass(name, lo.to_vec())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn dec_lo(&self) -> &[f64] {
        &self.dec_lo
    }

    pub fn dec_hi(&self) -> &[f64] {
        &self.dec_hi
    }
}

/// An ordered set of candidate wavelets; extensible with user filters.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBank {
    wavelets: Vec<Wavelet>,
}

impl Default for WaveletBank {
    fn default() -> Self {
        Self {
            wavelets: BUILTIN_WAVELETS
                .iter()
                .map(|n| Wavelet::builtin(n).expect("built-in filters are valid"))
                .collect(),
        }
    }
}

impl WaveletBank {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Argument("wavelet bank is empty".into()));
        }
        let wavelets = names
            .iter()
            .map(|n| Wavelet::builtin(n.as_ref()))
            .collect::<Result<_>>()?;
        Ok(Self { wavelets })
    }

    pub fn register(&mut self, wavelet: Wavelet) -> Result<()> {
        if self.get(wavelet.name()).is_some() {
            return Err(Error::Argument(format!(
                "wavelet `{}` already registered",
                wavelet.name()
            )));
        }
        self.wavelets.push(wavelet);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Wavelet> {
        self.wavelets.iter().find(|w| w.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Wavelet> {
        self.wavelets.iter()
    }

    pub fn len(&self) -> usize {
        self.wavelets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelets.is_empty()
    }

    pub fn max_filter_len(&self) -> usize {
        self.wavelets.iter().map(Wavelet::filter_len).max().unwrap_or(2)
    }
}

/// Boundary handling for the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Half-sample symmetric extension; band length `floor((n + F - 1) / 2)`.
    #[default]
    Symmetric,
    /// Circular extension; band length `ceil(n / 2)`. Orthogonal (energy
    /// preserving) whenever every level sees an even length.
    Periodization,
}

/// Coefficient bands of a multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub wavelet: String,
    pub extension: Extension,
    /// Approximation coefficients at the deepest level.
    pub approx: Vec<f64>,
    /// `details[l]` holds the detail band of level `l + 1`.
    pub details: Vec<Vec<f64>>,
    input_lengths: Vec<usize>,
}

impl Decomposition {
    pub fn depth(&self) -> usize {
        self.details.len()
    }

    /// All detail coefficients, level 1 first.
    pub fn detail_coefficients(&self) -> impl Iterator<Item = f64> + '_ {
        self.details.iter().flatten().copied()
    }

    /// Inverts the decomposition.
    pub fn reconstruct(&self, wavelet: &Wavelet) -> Result<Vec<f64>> {
        if wavelet.name() != self.wavelet {
            return Err(Error::Argument(format!(
                "decomposition used `{}`, not `{}`",
                self.wavelet,
                wavelet.name()
            )));
        }
        let mut approx = self.approx.clone();
        for level in (0..self.depth()).rev() {
            approx = idwt_single(
                &approx,
                &self.details[level],
                wavelet,
                self.extension,
                self.input_lengths[level],
            );
        }
        Ok(approx)
    }
}

/// Deepest level allowed for a signal of `n` samples: `floor(log2(n / F))`.
pub fn max_depth(n: usize, filter_len: usize) -> usize {
    if filter_len == 0 || n < filter_len {
        return 0;
    }
    let ratio = n / filter_len;
    (usize::BITS - 1 - ratio.leading_zeros()) as usize
}

fn symmetric_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

fn dwt_single(x: &[f64], w: &Wavelet, ext: Extension) -> (Vec<f64>, Vec<f64>) {
    let f = w.filter_len();
    match ext {
        Extension::Symmetric => {
            let n = x.len();
            let out = (n + f - 1) / 2;
            let mut a = vec![0.0; out];
            let mut d = vec![0.0; out];
            for k in 0..out {
                let mut sa = 0.0;
                let mut sd = 0.0;
                for j in 0..f {
                    let v = x[symmetric_index(2 * k as isize + 1 - j as isize, n)];
                    sa += w.dec_lo[j] * v;
                    sd += w.dec_hi[j] * v;
                }
                a[k] = sa;
                d[k] = sd;
            }
            (a, d)
        }
        Extension::Periodization => {
            let padded;
            let x = if x.len() % 2 == 1 {
                padded = x.iter().chain(x.last()).copied().collect::<Vec<_>>();
                &padded[..]
            } else {
                x
            };
            let n = x.len() as isize;
            let out = x.len() / 2;
            let mut a = vec![0.0; out];
            let mut d = vec![0.0; out];
            for k in 0..out {
                let mut sa = 0.0;
                let mut sd = 0.0;
                for j in 0..f {
                    let v = x[(2 * k as isize + (f / 2) as isize - j as isize).rem_euclid(n) as usize];
                    sa += w.dec_lo[j] * v;
                    sd += w.dec_hi[j] * v;
                }
                a[k] = sa;
                d[k] = sd;
            }
            (a, d)
        }
    }
}

fn idwt_single(a: &[f64], d: &[f64], w: &Wavelet, ext: Extension, n: usize) -> Vec<f64> {
    let f = w.filter_len();
    match ext {
        Extension::Symmetric => {
            // adjoint of the analysis step restricted to [0, n)
            let mut x = vec![0.0; n];
            for k in 0..a.len() {
                for j in 0..f {
                    let t = 2 * k as isize + 1 - j as isize;
                    if t >= 0 && (t as usize) < n {
                        x[t as usize] += w.dec_lo[j] * a[k] + w.dec_hi[j] * d[k];
                    }
                }
            }
            x
        }
        Extension::Periodization => {
            let m = 2 * a.len();
            let mut x = vec![0.0; m];
            for k in 0..a.len() {
                for j in 0..f {
                    let t = (2 * k as isize + (f / 2) as isize - j as isize).rem_euclid(m as isize);
                    x[t as usize] += w.dec_lo[j] * a[k] + w.dec_hi[j] * d[k];
                }
            }
            x.truncate(n);
            x
        }
    }
}

/// Decomposes `samples` with a built-in wavelet and symmetric extension.
pub fn dwt_decompose(samples: &[f64], wavelet_name: &str, depth: usize) -> Result<Decomposition> {
    let wavelet = Wavelet::builtin(wavelet_name)?;
    decompose(samples, &wavelet, depth, Extension::Symmetric)
}

pub fn decompose(
    samples: &[f64],
    wavelet: &Wavelet,
    depth: usize,
    extension: Extension,
) -> Result<Decomposition> {
    if depth == 0 {
        return Err(Error::Argument("DWT depth must be >= 1".into()));
    }
    if samples.len() < wavelet.filter_len() {
        return Err(Error::Argument(format!(
            "{} samples is shorter than the {} filter ({} taps)",
            samples.len(),
            wavelet.name(),
            wavelet.filter_len()
        )));
    }
    let mut approx = samples.to_vec();
    let mut details = Vec::with_capacity(depth);
    let mut input_lengths = Vec::with_capacity(depth);
    for _ in 0..depth {
        input_lengths.push(approx.len());
        let (a, d) = dwt_single(&approx, wavelet, extension);
        details.push(d);
        approx = a;
    }
    Ok(Decomposition {
        wavelet: wavelet.name().to_string(),
        extension,
        approx,
        details,
        input_lengths,
    })
}

/// Result of mother wavelet selection for one signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletChoice {
    pub wavelet_name: String,
    /// Energy-to-entropy score of the chosen wavelet.
    pub ratio: f64,
    /// Score of every candidate, in bank order.
    pub per_candidate_scores: Vec<(String, f64)>,
    pub depth: usize,
}

/// Entropy below this is treated as this value, so a wavelet that packs all
/// detail energy into a single coefficient gets a large finite score.
const ENTROPY_FLOOR: f64 = 1e-12;

const ZERO_DETAIL_RELATIVE: f64 = 1e-20;

/// Energy-to-entropy score over all detail coefficients.
///
/// Returns `(energy, entropy, score)`; entropy uses `p_i = d_i^2 / E` and the
/// natural log. A zero-energy decomposition scores 0.
pub fn energy_entropy_score(decomposition: &Decomposition) -> (f64, f64, f64) {
    let energy: f64 = decomposition.detail_coefficients().map(|d| d * d).sum();
    if energy <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let entropy: f64 = -decomposition
        .detail_coefficients()
        .map(|d| d * d / energy)
        .filter(|&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>();
    let entropy = entropy.max(0.0);
    (energy, entropy, energy / entropy.max(ENTROPY_FLOOR))
}

/// Picks the bank member with the highest detail energy-to-entropy ratio.
///
/// `depth` is clamped so every candidate can be applied at the same depth
/// (`floor(log2(n / F_max))`, at least 1). Ties go to the earlier candidate.
pub fn select_mother_wavelet(
    samples: &[f64],
    bank: &WaveletBank,
    depth: usize,
) -> Result<WaveletChoice> {
    if bank.is_empty() {
        return Err(Error::Argument("wavelet bank is empty".into()));
    }
    if depth == 0 || depth >= usize::BITS as usize || samples.len() < (1usize << depth) {
        return Err(Error::Argument(format!(
            "{} samples is too short for depth {depth}",
            samples.len()
        )));
    }
    let depth = depth.min(max_depth(samples.len(), bank.max_filter_len()).max(1));
    // detail energy at round-off level relative to the signal counts as none
    let floor = ZERO_DETAIL_RELATIVE * samples.iter().map(|v| v * v).sum::<f64>();
    let mut scores = Vec::with_capacity(bank.len());
    let mut best: Option<(usize, f64)> = None;
    let mut any_energy = false;
    for (i, w) in bank.iter().enumerate() {
        let dec = decompose(samples, w, depth, Extension::Symmetric)?;
        let (energy, _, score) = energy_entropy_score(&dec);
        let score = if energy > floor { score } else { 0.0 };
        any_energy |= energy > floor;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
        scores.push((w.name().to_string(), score));
    }
    if !any_energy {
        return Err(Error::Degenerate(
            "all detail coefficients are zero for every candidate wavelet".into(),
        ));
    }
    let (idx, ratio) = best.expect("bank is non-empty");
    Ok(WaveletChoice {
        wavelet_name: scores[idx].0.clone(),
        ratio,
        per_candidate_scores: scores,
        depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture20() -> Vec<f64> {
        (0..20).map(|i| (0.7 * i as f64).sin() + 0.05 * i as f64).collect()
    }

    #[test]
    fn haar_constant_input() {
        let dec = dwt_decompose(&[1.0, 1.0, 1.0, 1.0], "haar", 1).unwrap();
        assert!(dec.details[0].iter().all(|&d| d.abs() < 1e-15));
        for a in &dec.approx {
            assert!((a - std::f64::consts::SQRT_2).abs() < 1e-15);
        }
    }

    // Reference coefficients from PyWavelets 1.x, pywt.dwt(x, 'db2', mode=...).
    #[test]
    fn db2_matches_reference_symmetric() {
        let a_ref = [
            0.24544301713270655, 0.6929023743797598, 1.504754740677891, 0.12780280851954368,
            -0.917353984673275, 0.3390820641867027, 2.0461132930478714, 1.604724430555088,
            -0.017581261292698575, 0.10709901923690393, 2.0478987360619083,
        ];
        let d_ref = [
            -0.42511977603684614, 0.2630492110004431, 0.12862867326475444, -0.21932391482072497,
            -0.20318439160830357, 0.15025457377355145, 0.25426107283227195, -0.06382251757344817,
            -0.2759565347615901, -0.02998456998270784, 0.4200548606070541,
        ];
        let dec = dwt_decompose(&fixture20(), "db2", 1).unwrap();
        assert_eq!(dec.approx.len(), 11);
        for (x, y) in dec.approx.iter().zip(a_ref) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in dec.details[0].iter().zip(d_ref) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn db2_matches_reference_periodization() {
        let a_ref = [
            0.7973292367607066, 1.4011498981027442, 0.9882462625758135, -0.6386392834443873,
            -0.5440010793378074, 1.349823981749958, 2.1337305919604557, 0.7411510092940263,
            -0.28137240202536395, 1.2559887073325902,
        ];
        let d_ref = [
            -0.15309529961401222, 0.2560514383076978, -0.05929016669306482, -0.2762061987774962,
            -0.034601790222029485, 0.264443863930952, 0.1244953262417173, -0.22212363411947633,
            -0.20000276516552998, 1.1155253644181427,
        ];
        let w = Wavelet::builtin("db2").unwrap();
        let dec = decompose(&fixture20(), &w, 1, Extension::Periodization).unwrap();
        for (x, y) in dec.approx.iter().zip(a_ref) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in dec.details[0].iter().zip(d_ref) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn band_lengths_follow_recursion() {
        let x = vec![0.5; 100];
        let dec = dwt_decompose(&x, "db4", 3).unwrap();
        // 100 -> 53 -> 30 -> 18
        let lens: Vec<usize> = dec.details.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![53, 30, 18]);
        assert_eq!(dec.approx.len(), 18);
    }

    #[test]
    fn perfect_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for name in BUILTIN_WAVELETS {
            let w = Wavelet::builtin(name).unwrap();
            for n in [64usize, 65, 257, 300] {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                for ext in [Extension::Symmetric, Extension::Periodization] {
                    let depth = max_depth(n, w.filter_len()).clamp(1, 4);
                    let dec = decompose(&x, &w, depth, ext).unwrap();
                    let y = dec.reconstruct(&w).unwrap();
                    assert_eq!(y.len(), n);
                    let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(err < 1e-8, "{name} n={n} {ext:?}: {err}");
                }
            }
        }
    }

    #[test]
    fn periodization_conserves_energy_on_chirp() {
        let x: Vec<f64> = (0..64)
            .map(|i| {
                let t = i as f64 / 64.0;
                (2.0 * std::f64::consts::PI * (2.0 + 10.0 * t) * t).sin()
            })
            .collect();
        let w = Wavelet::builtin("db4").unwrap();
        let dec = decompose(&x, &w, 3, Extension::Periodization).unwrap();
        let signal: f64 = x.iter().map(|v| v * v).sum();
        let bands: f64 = dec.approx.iter().chain(dec.detail_coefficients().collect::<Vec<_>>().iter()).map(|v| v * v).sum();
        assert!(((bands - signal) / signal).abs() < 1e-6);
    }

    #[test]
    fn unknown_wavelet_and_short_input() {
        assert!(matches!(dwt_decompose(&[0.0; 32], "db99", 2), Err(Error::Argument(_))));
        assert!(matches!(dwt_decompose(&[0.0; 4], "db4", 1), Err(Error::Argument(_))));
        assert!(Wavelet::from_lowpass("bad", vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn max_depth_clamp() {
        assert_eq!(max_depth(64, 2), 5);
        assert_eq!(max_depth(130, 8), 4);
        assert_eq!(max_depth(16, 16), 0);
        assert_eq!(max_depth(10, 16), 0);
    }

    #[test]
    fn singleton_bank_picks_it() {
        let bank = WaveletBank::from_names(&["haar"]).unwrap();
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin()).collect();
        assert_eq!(select_mother_wavelet(&x, &bank, 4).unwrap().wavelet_name, "haar");
    }

    #[test]
    fn constant_signal_is_degenerate() {
        let bank = WaveletBank::default();
        let err = select_mother_wavelet(&[5.0; 128], &bank, 4).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(matches!(
            select_mother_wavelet(&[1.0; 16], &bank, 5),
            Err(Error::Argument(_))
        ));
    }

    // Step of 65 samples at +1 then 65 at -1; the step falls inside a Haar
    // pair. Expected scores computed with PyWavelets (mode='symmetric',
    // level=4): haar 3.2983949983120926, db4 3.013856382792684.
    #[test]
    fn haar_wins_on_step() {
        let x: Vec<f64> = (0..130).map(|i| if i < 65 { 1.0 } else { -1.0 }).collect();
        let bank = WaveletBank::from_names(&["haar", "db4"]).unwrap();
        let choice = select_mother_wavelet(&x, &bank, 4).unwrap();
        assert_eq!(choice.wavelet_name, "haar");
        assert_eq!(choice.depth, 4);
        assert!((choice.per_candidate_scores[0].1 - 3.2983949983120926).abs() < 1e-9);
        assert!((choice.per_candidate_scores[1].1 - 3.013856382792684).abs() < 1e-9);
    }
}
