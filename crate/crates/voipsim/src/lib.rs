//! File formats, run orchestration and the command-line front end for
//! `voipsim-core`.

pub mod builtin;
pub mod compare;
pub mod config;
pub mod output;
pub mod runner;

use voipsim_core::metrics::{classify, id_from_delay, mos_from_r, mos_label, r_factor, EModelInputs, EModelParams};
use voipsim_core::traffic::CodecProfile;

/// Exit status for configuration and input errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for a simulation fault.
pub const EXIT_FAULT: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MosInput {
    R(f64),
    DelayLoss { delay_ms: f64, loss_pct: f64 },
}

/// R, MOS and quality labels as printed by `voipsim mos`.
pub fn mos_report(input: MosInput, codec: &CodecProfile) -> Result<String, String> {
    let (r, delay) = match input {
        MosInput::R(r) => (r, None),
        MosInput::DelayLoss { delay_ms, loss_pct } => {
            if !(delay_ms >= 0.0 && delay_ms.is_finite()) {
                return Err(format!("delay must be a non-negative number of ms, got {delay_ms}"));
            }
            if !(0.0..=100.0).contains(&loss_pct) {
                return Err(format!("loss must be a percentage in [0, 100], got {loss_pct}"));
            }
            let e = EModelParams::default();
            let inputs = EModelInputs {
                is: e.is,
                ie: codec.ie,
                ppl: loss_pct,
                bpl: codec.bpl,
                id: id_from_delay(delay_ms),
                a: e.a,
            };
            (r_factor(&inputs), Some(delay_ms))
        }
    };
    let mos = mos_from_r(r).map_err(|e| e.to_string())?;
    let label = mos_label(mos).map_err(|e| e.to_string())?;
    let mut s = format!("R      {r:.3}\nMOS    {mos:.3}\nlabel  {} ({})\n", label.quality, label.effort);
    if let Some(d) = delay {
        s.push_str(&format!("delay  {}\n", classify(d, 0.0).delay_class.as_str()));
    }
    Ok(s)
}
