//! STFT/ISTFT as differentiable tape nodes, backed by the exact adjoints in
//! `audio::stft`.

use ndarray::{Ix2, Ix4};

use super::{Tape, Var};
use crate::audio::{istft_from_reim, istft_vjp, stft_reim, stft_vjp, StftConfig};

impl Tape {
    /// `x: [channels, n] -> [channels, 2, freq_bins, frames]` (real/imag planes).
    pub fn stft_node(&mut self, x: Var, cfg: StftConfig) -> Var {
        let vx = self.rc_value(x);
        let x2 = vx.view().into_dimensionality::<Ix2>().expect("stft input 2-D");
        let n = x2.shape()[1];
        let value = stft_reim(&x2, &cfg);
        self.push(
            value.into_dyn(),
            vec![x],
            Box::new(move |g| {
                let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
                vec![stft_vjp(&g4, &cfg, n).into_dyn()]
            }),
        )
    }

    /// `spec: [channels, 2, freq_bins, frames] -> [channels, out_len]`.
    pub fn istft_node(&mut self, spec: Var, cfg: StftConfig, out_len: usize) -> Var {
        let vs = self.rc_value(spec);
        let s4 = vs.view().into_dimensionality::<Ix4>().expect("istft input 4-D");
        let n_frames = s4.shape()[3];
        let value = istft_from_reim(&s4, &cfg, out_len);
        self.push(
            value.into_dyn(),
            vec![spec],
            Box::new(move |g| {
                let g2 = g.view().into_dimensionality::<Ix2>().unwrap();
                vec![istft_vjp(&g2, &cfg, n_frames).into_dyn()]
            }),
        )
    }
}
