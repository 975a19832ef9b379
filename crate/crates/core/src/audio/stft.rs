//! STFT/ISTFT kernels and their adjoints.
//!
//! The forward transforms back the public `audio::stft`/`audio::istft` API;
//! the `*_reim` / `*_vjp` variants carry real/imag parts as separate planes so
//! the autodiff tape can treat spectrograms as plain real arrays.

use ndarray::{Array2, Array3, Array4, ArrayView2, ArrayView4};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{CoreError, Result};

/// Analysis/synthesis configuration: periodic Hann window, center padding of
/// `fft_size/2` on both sides, `time_frames = 1 + floor(n / hop)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop_size: usize,
}

impl StftConfig {
    pub fn new(fft_size: usize, hop_size: usize) -> Result<Self> {
        if fft_size == 0 || !fft_size.is_power_of_two() {
            return Err(CoreError::Config(format!(
                "fft_size must be a power of two, got {fft_size}"
            )));
        }
        if hop_size == 0 {
            return Err(CoreError::Config("hop_size must be positive".into()));
        }
        if hop_size > fft_size {
            return Err(CoreError::Config(format!(
                "hop_size {hop_size} exceeds fft_size {fft_size}"
            )));
        }
        Ok(Self { fft_size, hop_size })
    }

    pub fn freq_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn num_frames(&self, n: usize) -> usize {
        1 + n / self.hop_size
    }

    fn padded_len(&self, n: usize) -> usize {
        n + self.fft_size
    }

    /// Reconstruction requires the squared-window overlap to stay bounded away
    /// from zero over the output region.
    pub fn check_reconstruction(&self, out_frames: usize) -> Result<()> {
        let env = synthesis_envelope(self, out_frames);
        let min = env.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < 1e-3 {
            return Err(CoreError::Config(format!(
                "window/hop pair (hann, fft={}, hop={}) does not satisfy the \
                 reconstruction condition (envelope min {min:.2e})",
                self.fft_size, self.hop_size
            )));
        }
        Ok(())
    }
}

/// Periodic Hann window of length `n`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Squared-window overlap-add envelope on the *cropped* output axis.
pub fn synthesis_envelope(cfg: &StftConfig, out_frames: usize) -> Vec<f64> {
    synthesis_envelope_frames(cfg, cfg.num_frames(out_frames), out_frames)
}

fn ola_buffer_len(cfg: &StftConfig, n_frames: usize, out_frames: usize) -> usize {
    cfg.padded_len(out_frames)
        .max((n_frames - 1) * cfg.hop_size + cfg.fft_size)
}

fn synthesis_envelope_frames(cfg: &StftConfig, n_frames: usize, out_frames: usize) -> Vec<f64> {
    let win = hann_window(cfg.fft_size);
    let mut env = vec![0.0f64; ola_buffer_len(cfg, n_frames, out_frames)];
    for t in 0..n_frames {
        let start = t * cfg.hop_size;
        for (i, w) in win.iter().enumerate() {
            env[start + i] += w * w;
        }
    }
    env[cfg.fft_size / 2..cfg.fft_size / 2 + out_frames].to_vec()
}

fn forward_frame(
    planner: &mut FftPlanner<f64>,
    frame: &[f64],
) -> Vec<Complex64> {
    let n = frame.len();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex64> = frame.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf
}

/// Complex one-sided STFT of `[channels, n]` samples.
pub fn stft_complex(x: &Array2<f64>, cfg: &StftConfig) -> Array3<Complex64> {
    let (channels, n) = x.dim();
    let n_frames = cfg.num_frames(n);
    let fft = cfg.fft_size;
    let win = hann_window(fft);
    let mut planner = FftPlanner::new();
    let mut out = Array3::zeros((channels, cfg.freq_bins(), n_frames));
    let mut frame = vec![0.0f64; fft];
    for c in 0..channels {
        for t in 0..n_frames {
            let start = t * cfg.hop_size; // position on the padded axis
            for i in 0..fft {
                let idx = start + i;
                // padded index -> original index (padding = fft/2 zeros each side)
                frame[i] = if idx >= fft / 2 && idx - fft / 2 < n {
                    x[[c, idx - fft / 2]] * win[i]
                } else {
                    0.0
                };
            }
            let spec = forward_frame(&mut planner, &frame);
            for (f, v) in spec.iter().enumerate() {
                out[[c, f, t]] = *v;
            }
        }
    }
    out
}

/// Real frame from a one-sided spectrum (conjugate-symmetric inverse, 1/N).
fn inverse_frame(
    planner: &mut FftPlanner<f64>,
    spec: &[Complex64],
    fft_size: usize,
) -> Vec<f64> {
    let ifft = planner.plan_fft_inverse(fft_size);
    let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
    buf[0] = Complex64::new(spec[0].re, 0.0);
    for f in 1..fft_size / 2 {
        buf[f] = spec[f];
        buf[fft_size - f] = spec[f].conj();
    }
    buf[fft_size / 2] = Complex64::new(spec[fft_size / 2].re, 0.0);
    ifft.process(&mut buf);
    buf.iter().map(|v| v.re / fft_size as f64).collect()
}

/// Weighted overlap-add ISTFT producing exactly `out_frames` samples.
pub fn istft_complex(bins: &Array3<Complex64>, cfg: &StftConfig, out_frames: usize) -> Array2<f64> {
    let (channels, freq_bins, n_frames) = bins.dim();
    debug_assert_eq!(freq_bins, cfg.freq_bins());
    let fft = cfg.fft_size;
    let win = hann_window(fft);
    let env = synthesis_envelope_frames(cfg, n_frames, out_frames);
    let mut planner = FftPlanner::new();
    let mut out = Array2::zeros((channels, out_frames));
    let mut spec = vec![Complex64::new(0.0, 0.0); freq_bins];
    for c in 0..channels {
        let mut acc = vec![0.0f64; ola_buffer_len(cfg, n_frames, out_frames)];
        for t in 0..n_frames {
            for f in 0..freq_bins {
                spec[f] = bins[[c, f, t]];
            }
            let frame = inverse_frame(&mut planner, &spec, fft);
            let start = t * cfg.hop_size;
            for i in 0..fft {
                acc[start + i] += frame[i] * win[i];
            }
        }
        for i in 0..out_frames {
            let e = env[i].max(1e-12);
            out[[c, i]] = acc[fft / 2 + i] / e;
        }
    }
    out
}

/// STFT with real/imag planes: `[channels, n] -> [channels, 2, freq_bins, frames]`.
pub fn stft_reim(x: &ArrayView2<f64>, cfg: &StftConfig) -> Array4<f64> {
    let owned = x.to_owned();
    let c = stft_complex(&owned, cfg);
    let (channels, freq_bins, frames) = c.dim();
    let mut out = Array4::zeros((channels, 2, freq_bins, frames));
    for ch in 0..channels {
        for f in 0..freq_bins {
            for t in 0..frames {
                out[[ch, 0, f, t]] = c[[ch, f, t]].re;
                out[[ch, 1, f, t]] = c[[ch, f, t]].im;
            }
        }
    }
    out
}

/// Adjoint of [`stft_reim`]: maps a spectrogram cotangent back to the signal.
pub fn stft_vjp(g: &ArrayView4<f64>, cfg: &StftConfig, n: usize) -> Array2<f64> {
    let (channels, planes, freq_bins, n_frames) = g.dim();
    debug_assert_eq!(planes, 2);
    debug_assert_eq!(freq_bins, cfg.freq_bins());
    let fft = cfg.fft_size;
    let win = hann_window(fft);
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(fft);
    let mut out = Array2::zeros((channels, n));
    for c in 0..channels {
        let mut pad_grad = vec![0.0f64; cfg.padded_len(n)];
        for t in 0..n_frames {
            // d frame[m] = Re( sum_{f<=N/2} G[f] e^{+i 2 pi f m / N} ),
            // realized as an unnormalized inverse FFT with zeroed upper bins.
            let mut buf = vec![Complex64::new(0.0, 0.0); fft];
            for f in 0..freq_bins {
                buf[f] = Complex64::new(g[[c, 0, f, t]], g[[c, 1, f, t]]);
            }
            ifft.process(&mut buf);
            let start = t * cfg.hop_size;
            for i in 0..fft {
                pad_grad[start + i] += buf[i].re * win[i];
            }
        }
        for i in 0..n {
            out[[c, i]] = pad_grad[fft / 2 + i];
        }
    }
    out
}

/// ISTFT with real/imag planes: `[channels, 2, freq_bins, frames] -> [channels, out_frames]`.
pub fn istft_from_reim(spec: &ArrayView4<f64>, cfg: &StftConfig, out_frames: usize) -> Array2<f64> {
    let (channels, planes, freq_bins, frames) = spec.dim();
    debug_assert_eq!(planes, 2);
    let mut bins = Array3::zeros((channels, freq_bins, frames));
    for c in 0..channels {
        for f in 0..freq_bins {
            for t in 0..frames {
                bins[[c, f, t]] = Complex64::new(spec[[c, 0, f, t]], spec[[c, 1, f, t]]);
            }
        }
    }
    istft_complex(&bins, cfg, out_frames)
}

/// Adjoint of [`istft_from_reim`].
pub fn istft_vjp(
    g: &ArrayView2<f64>,
    cfg: &StftConfig,
    n_frames: usize,
) -> Array4<f64> {
    let (channels, out_frames) = g.dim();
    let fft = cfg.fft_size;
    let freq_bins = cfg.freq_bins();
    let win = hann_window(fft);
    let env = synthesis_envelope_frames(cfg, n_frames, out_frames);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft);
    let mut out = Array4::zeros((channels, 2, freq_bins, n_frames));
    for c in 0..channels {
        // Adjoint of crop + envelope division.
        let mut gdiv = vec![0.0f64; ola_buffer_len(cfg, n_frames, out_frames)];
        for i in 0..out_frames {
            gdiv[fft / 2 + i] = g[[c, i]] / env[i].max(1e-12);
        }
        for t in 0..n_frames {
            let start = t * cfg.hop_size;
            let mut buf: Vec<Complex64> = (0..fft)
                .map(|i| Complex64::new(gdiv[start + i] * win[i], 0.0))
                .collect();
            fwd.process(&mut buf);
            for f in 0..freq_bins {
                let cfac = if f == 0 || f == fft / 2 { 1.0 } else { 2.0 };
                let scale = cfac / fft as f64;
                out[[c, 0, f, t]] = buf[f].re * scale;
                out[[c, 1, f, t]] = if f == 0 || f == fft / 2 {
                    0.0
                } else {
                    buf[f].im * scale
                };
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array4;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rand2(shape: (usize, usize), seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    fn rand4(shape: (usize, usize, usize, usize), seed: u64) -> Array4<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array4::from_shape_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    /// <A x, y> == <x, A^T y> for the STFT as a real-linear operator.
    #[test]
    fn stft_adjoint_dot_test() {
        let cfg = StftConfig::new(128, 32).unwrap();
        let n = 500;
        let x = rand2((2, n), 1);
        let y = rand4((2, 2, cfg.freq_bins(), cfg.num_frames(n)), 2);
        let ax = stft_reim(&x.view(), &cfg);
        let aty = stft_vjp(&y.view(), &cfg, n);
        let lhs: f64 = ax.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(aty.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn istft_adjoint_dot_test() {
        let cfg = StftConfig::new(128, 32).unwrap();
        let n = 500;
        let frames = cfg.num_frames(n);
        let x = rand4((1, 2, cfg.freq_bins(), frames), 3);
        let y = rand2((1, n), 4);
        let ax = istft_from_reim(&x.view(), &cfg, n);
        let aty = istft_vjp(&y.view(), &cfg, frames);
        let lhs: f64 = ax.iter().zip(y.iter()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(aty.iter()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn reim_round_trip_matches_complex_path() {
        let cfg = StftConfig::new(256, 64).unwrap();
        let x = rand2((2, 3000), 5);
        let spec = stft_reim(&x.view(), &cfg);
        let back = istft_from_reim(&spec.view(), &cfg, 3000);
        let num: f64 = (&back - &x).iter().map(|v| v * v).sum();
        let den: f64 = x.iter().map(|v| v * v).sum();
        assert!((num / den).sqrt() < 1e-10);
    }

    #[test]
    fn envelope_constant_for_quarter_hop() {
        let cfg = StftConfig::new(256, 64).unwrap();
        let env = synthesis_envelope(&cfg, 2048);
        // Hann with hop = fft/4 overlaps to a constant 1.5 away from the edges;
        // edge samples see fewer frames and are corrected by the division.
        for &e in &env[256..2048 - 256] {
            assert!((e - 1.5).abs() < 1e-9, "{e}");
        }
        assert!(env.iter().all(|&e| e > 0.5));
    }
}
