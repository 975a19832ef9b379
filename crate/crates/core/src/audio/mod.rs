//! Audio primitives shared by every module: waveform container, STFT/ISTFT,
//! energy measurement and SNR-based gain computation.

mod stft;
mod wav;

pub use stft::{
    hann_window, istft_from_reim, istft_vjp, stft_reim, stft_vjp, synthesis_envelope, StftConfig,
};
pub use wav::{read_wav, resample_linear, write_wav};

use ndarray::{Array2, Array3, ArrayView1, Axis};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Multichannel audio buffer. Samples are laid out `[channels, frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        let channels = samples.nrows();
        if sample_rate == 0 {
            return Err(CoreError::Input("sample_rate must be positive".into()));
        }
        if channels == 0 || channels > 2 {
            return Err(CoreError::Input(format!(
                "waveform must have 1 or 2 channels, got {channels}"
            )));
        }
        if samples.ncols() == 0 {
            return Err(CoreError::Input("waveform must have at least 1 frame".into()));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(CoreError::Numeric("waveform contains non-finite samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn from_mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let n = samples.len();
        let arr = Array2::from_shape_vec((1, n), samples)
            .map_err(|e| CoreError::Internal(e.to_string()))?;
        Self::new(arr, sample_rate)
    }

    pub fn zeros(channels: usize, frames: usize, sample_rate: u32) -> Self {
        Self { samples: Array2::zeros((channels, frames)), sample_rate }
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut Array2<f64> {
        &mut self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn channel(&self, i: usize) -> ArrayView1<'_, f64> {
        self.samples.row(i)
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn frames(&self) -> usize {
        self.samples.ncols()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    /// Mean across channels, keeping the sample rate.
    pub fn to_mono(&self) -> Waveform {
        if self.channels() == 1 {
            return self.clone();
        }
        let mono = self.samples.mean_axis(Axis(0)).expect("non-empty");
        Waveform {
            samples: mono.insert_axis(Axis(0)),
            sample_rate: self.sample_rate,
        }
    }

    /// Pad with trailing zeros or crop so the waveform has exactly `frames` frames.
    pub fn fit_frames(&self, frames: usize) -> Waveform {
        let mut out = Array2::zeros((self.channels(), frames));
        let keep = self.frames().min(frames);
        out.slice_mut(ndarray::s![.., ..keep])
            .assign(&self.samples.slice(ndarray::s![.., ..keep]));
        Waveform { samples: out, sample_rate: self.sample_rate }
    }
}

/// Complex one-sided spectrogram, `[channels, freq_bins, time_frames]`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub bins: Array3<Complex64>,
    pub fft_size: usize,
    pub hop_size: usize,
    pub window: &'static str,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn freq_bins(&self) -> usize {
        self.bins.shape()[1]
    }

    pub fn time_frames(&self) -> usize {
        self.bins.shape()[2]
    }

    pub fn channels(&self) -> usize {
        self.bins.shape()[0]
    }
}

/// Root-mean-square level per channel.
pub fn rms(w: &Waveform) -> Vec<f64> {
    w.samples()
        .rows()
        .into_iter()
        .map(|row| (row.iter().map(|v| v * v).sum::<f64>() / row.len() as f64).sqrt())
        .collect()
}

/// RMS of the mean-across-channels downmix.
pub fn mono_rms(w: &Waveform) -> f64 {
    rms(&w.to_mono())[0]
}

/// Threshold below which a signal is treated as silent for SNR scaling.
pub const SILENCE_RMS_FLOOR: f64 = 1e-8;

/// Scalar gain `g` such that after scaling `interferer` by `g`,
/// `20*log10(rms(anchor) / rms(g * interferer)) == snr_db`.
/// Energy is measured on the mean across channels.
pub fn gain_for_snr(anchor: &Waveform, interferer: &Waveform, snr_db: f64) -> Result<f64> {
    let ra = mono_rms(anchor);
    let ri = mono_rms(interferer);
    if ra < SILENCE_RMS_FLOOR {
        return Err(CoreError::Degenerate("silent anchor in SNR scaling".into()));
    }
    if ri < SILENCE_RMS_FLOOR {
        return Err(CoreError::Degenerate("silent interferer in SNR scaling".into()));
    }
    Ok(ra / ri * 10f64.powf(-snr_db / 20.0))
}

/// Measured SNR in dB between two signals (mean-across-channels energy).
pub fn measured_snr_db(anchor: &Waveform, interferer: &Waveform) -> f64 {
    20.0 * (mono_rms(anchor) / mono_rms(interferer)).log10()
}

/// One-sided STFT with a periodic Hann analysis window, center padding.
/// `time_frames = 1 + floor(frames / hop_size)`.
pub fn stft(w: &Waveform, fft_size: usize, hop_size: usize) -> Result<Spectrogram> {
    let cfg = StftConfig::new(fft_size, hop_size)?;
    let bins = stft::stft_complex(w.samples(), &cfg);
    Ok(Spectrogram {
        bins,
        fft_size,
        hop_size,
        window: "hann",
        sample_rate: w.sample_rate(),
    })
}

/// Weighted overlap-add inverse of [`stft`], producing exactly `out_frames` frames.
pub fn istft(s: &Spectrogram, out_frames: usize) -> Result<Waveform> {
    let cfg = StftConfig::new(s.fft_size, s.hop_size)?;
    cfg.check_reconstruction(out_frames)?;
    let expected_bins = s.fft_size / 2 + 1;
    if s.freq_bins() != expected_bins {
        return Err(CoreError::Config(format!(
            "spectrogram has {} freq bins, expected {expected_bins}",
            s.freq_bins()
        )));
    }
    let samples = stft::istft_complex(&s.bins, &cfg, out_frames);
    Waveform::new(samples, s.sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;
    use num_complex::Complex64;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn noise(channels: usize, n: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..channels * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Waveform::new(Array2::from_shape_vec((channels, n), data).unwrap(), 16000).unwrap()
    }

    #[test]
    fn rms_hand_values() {
        let w = Waveform::from_mono(vec![0.5; 100], 16000).unwrap();
        assert_abs_diff_eq!(rms(&w)[0], 0.5, epsilon = 1e-12);
        let z = Waveform::from_mono(vec![0.0; 10], 16000).unwrap();
        assert_eq!(rms(&z)[0], 0.0);
        let w = Waveform::from_mono(vec![3.0, 4.0], 16000).unwrap();
        assert_abs_diff_eq!(rms(&w)[0], 12.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gain_for_snr_examples() {
        let a = Waveform::from_mono(vec![0.3, -0.3, 0.3, -0.3], 16000).unwrap();
        let b = Waveform::from_mono(vec![-0.3, 0.3, -0.3, 0.3], 16000).unwrap();
        assert_abs_diff_eq!(gain_for_snr(&a, &b, 0.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gain_for_snr(&a, &b, 20.0).unwrap(), 0.1, epsilon = 1e-12);

        let a = Waveform::from_mono(vec![0.2; 64], 16000).unwrap();
        let b = Waveform::from_mono(vec![0.1; 64], 16000).unwrap();
        assert_abs_diff_eq!(gain_for_snr(&a, &b, 0.0).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gain_for_snr_rejects_silence() {
        let a = Waveform::from_mono(vec![0.0; 16], 16000).unwrap();
        let b = Waveform::from_mono(vec![0.1; 16], 16000).unwrap();
        assert!(matches!(gain_for_snr(&a, &b, 0.0), Err(CoreError::Degenerate(_))));
        assert!(matches!(gain_for_snr(&b, &a, 0.0), Err(CoreError::Degenerate(_))));
    }

    #[test]
    fn gain_then_mix_hits_requested_snr() {
        let a = noise(1, 4096, 1);
        let b = noise(1, 4096, 2);
        for snr in [-5.0, -1.5, 0.0, 3.25, 5.0] {
            let g = gain_for_snr(&a, &b, snr).unwrap();
            let scaled = Waveform::new(b.samples() * g, 16000).unwrap();
            assert_abs_diff_eq!(measured_snr_db(&a, &scaled), snr, epsilon = 0.01);
        }
    }

    #[test]
    fn stft_zero_input_is_zero() {
        let w = Waveform::zeros(1, 16000, 16000);
        let s = stft(&w, 1024, 256).unwrap();
        assert!(s.bins.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn stft_shapes() {
        let w = noise(2, 160000, 3);
        let s = stft(&w, 1024, 256).unwrap();
        assert_eq!(s.freq_bins(), 513);
        assert_eq!(s.time_frames(), 1 + 160000 / 256);
        assert_eq!(s.channels(), 2);
    }

    #[test]
    fn stft_pure_tone_peaks_at_expected_bin() {
        // 1 kHz at 16 kHz with fft 1024: bin = 1000 / (16000/1024) = 64.
        let n = 16000;
        let samples: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16000.0).sin())
            .collect();
        let w = Waveform::from_mono(samples, 16000).unwrap();
        let s = stft(&w, 1024, 256).unwrap();
        let t_frames = s.time_frames();
        // Interior frames only; edge frames see the zero padding.
        for t in 3..t_frames - 3 {
            let col = s.bins.slice(ndarray::s![0, .., t]);
            let argmax = col
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .0;
            assert_eq!(argmax, 64, "frame {t}");
        }
    }

    #[test]
    fn stft_matches_direct_dft_on_interior_frame() {
        let w = noise(1, 4096, 7);
        let fft = 512;
        let hop = 128;
        let s = stft(&w, fft, hop).unwrap();
        // Reconstruct the analysis frame the implementation should have seen.
        let t = 10usize;
        let start = t * hop; // position in padded signal; padding is fft/2
        let win = hann_window(fft);
        let mut frame = vec![0.0f64; fft];
        for (i, f) in frame.iter_mut().enumerate() {
            let idx = start + i;
            // padded index -> original index
            if idx >= fft / 2 && idx - fft / 2 < w.frames() {
                *f = w.samples()[[0, idx - fft / 2]] * win[i];
            }
        }
        // Naive DFT oracle.
        for f in 0..=fft / 2 {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &v) in frame.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (f * n) as f64 / fft as f64;
                acc += Complex64::new(ang.cos(), ang.sin()) * v;
            }
            let got = s.bins[[0, f, t]];
            assert_abs_diff_eq!(got.re, acc.re, epsilon = 1e-8);
            assert_abs_diff_eq!(got.im, acc.im, epsilon = 1e-8);
        }
    }

    #[test]
    fn istft_round_trip() {
        for (fft, hop, n) in [(1024, 256, 16000), (512, 128, 7777), (256, 64, 4001)] {
            let w = noise(2, n, fft as u64);
            let s = stft(&w, fft, hop).unwrap();
            let r = istft(&s, n).unwrap();
            let num: f64 = (r.samples() - w.samples()).iter().map(|v| v * v).sum();
            let den: f64 = w.samples().iter().map(|v| v * v).sum();
            let rel = (num / den).sqrt();
            assert!(rel < 1e-4, "relative L2 error {rel} for fft={fft} hop={hop} n={n}");
        }
    }

    #[test]
    fn istft_zero_spectrogram_is_zero() {
        let w = Waveform::zeros(1, 8000, 16000);
        let mut s = stft(&w, 512, 128).unwrap();
        s.bins.fill(Complex64::new(0.0, 0.0));
        let r = istft(&s, 8000).unwrap();
        assert!(r.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stft_rejects_bad_config() {
        let w = noise(1, 1024, 0);
        assert!(matches!(stft(&w, 1000, 256), Err(CoreError::Config(_))));
        assert!(matches!(stft(&w, 1024, 0), Err(CoreError::Config(_))));
        assert!(matches!(stft(&w, 1024, 2048), Err(CoreError::Config(_))));
    }

    #[test]
    fn parseval_energy_consistency() {
        // Hann with hop = fft/4: window normalization is a fixed constant, so
        // spectrogram energy tracks waveform energy.
        let fft = 512;
        let hop = 128;
        let w = noise(1, 32000, 11);
        let s = stft(&w, fft, hop).unwrap();
        // Sum |X|^2 with one-sided doubling.
        let mut spec_energy = 0.0;
        for t in 0..s.time_frames() {
            for f in 0..s.freq_bins() {
                let m = s.bins[[0, f, t]].norm_sqr();
                let c = if f == 0 || f == fft / 2 { 1.0 } else { 2.0 };
                spec_energy += c * m;
            }
        }
        // Expected: sum_t ||w . x_frame||^2 * fft ~= E * fft * (sum w^2)/hop.
        let win = hann_window(fft);
        let wsum: f64 = win.iter().map(|v| v * v).sum();
        let wave_energy: f64 = w.samples().iter().map(|v| v * v).sum();
        let expected = wave_energy * fft as f64 * wsum / hop as f64;
        let rel = (spec_energy - expected).abs() / expected;
        assert!(rel < 0.01, "relative energy mismatch {rel}");
    }

    #[test]
    fn waveform_validation() {
        assert!(Waveform::new(Array2::zeros((3, 4)), 16000).is_err());
        assert!(Waveform::new(Array2::zeros((1, 0)), 16000).is_err());
        assert!(Waveform::new(Array2::zeros((1, 4)), 0).is_err());
        let mut bad = Array2::zeros((1, 4));
        bad[[0, 0]] = f64::NAN;
        assert!(Waveform::new(bad, 16000).is_err());
    }

    #[test]
    fn mono_downmix_averages() {
        let s = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let w = Waveform::new(s, 16000).unwrap();
        let m = w.to_mono();
        assert_eq!(m.channels(), 1);
        assert_eq!(m.samples()[[0, 0]], 0.5);
        assert_eq!(m.samples()[[0, 1]], 0.5);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(16))]
        #[test]
        fn stft_round_trip_property(n in 600usize..5000, seed in 0u64..1000) {
            let w = noise(1, n, seed);
            let s = stft(&w, 256, 64).unwrap();
            let r = istft(&s, n).unwrap();
            let num: f64 = (r.samples() - w.samples()).iter().map(|v| v * v).sum();
            let den: f64 = w.samples().iter().map(|v| v * v).sum();
            proptest::prop_assert!((num / den).sqrt() < 1e-4);
        }

        #[test]
        fn gain_for_snr_property(snr in -10.0f64..10.0, seed in 0u64..1000) {
            let a = noise(1, 2048, seed);
            let b = noise(1, 2048, seed.wrapping_add(7919));
            let g = gain_for_snr(&a, &b, snr).unwrap();
            let scaled = Waveform::new(b.samples() * g, 16000).unwrap();
            proptest::prop_assert!((measured_snr_db(&a, &scaled) - snr).abs() < 0.01);
        }
    }

    #[allow(dead_code)]
    fn _assert_send_sync()
    where
        Waveform: Send + Sync,
        Spectrogram: Send + Sync,
    {
    }

    #[test]
    fn fit_frames_pads_and_crops() {
        let w = Waveform::from_mono(vec![1.0, 2.0, 3.0], 16000).unwrap();
        let padded = w.fit_frames(5);
        assert_eq!(padded.samples().row(0).to_vec(), vec![1.0, 2.0, 3.0, 0.0, 0.0]);
        let cropped = w.fit_frames(2);
        assert_eq!(cropped.samples().row(0).to_vec(), vec![1.0, 2.0]);
        let _ = Array1::<f64>::zeros(1); // keep ndarray prelude import exercised
    }
}
