//! Per-step training telemetry and its CSV form.

use std::io::Write;

use crate::error::Result;

pub const CSV_HEADER: &str = "step,return_mean,sigma_min,sigma_mean,sigma_max,kl,td_loss,ms";

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    /// Mean return of the latest deterministic evaluation.
    pub return_mean: f64,
    pub sigma_min: f64,
    pub sigma_mean: f64,
    pub sigma_max: f64,
    /// Batch-mean KL from the most recent policy update.
    pub kl: f64,
    /// Pre-step critic loss from the most recent critic update.
    pub td_loss: f64,
    pub ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    /// `(env_step, mean return)` for every deterministic evaluation.
    pub evaluations: Vec<(usize, f64)>,
    /// Policy mean action at the first reset observation after training.
    pub final_mean_action: Vec<f64>,
    /// Number of gradient updates performed.
    pub updates: usize,
}

impl TrainLog {
    pub fn final_return(&self) -> Option<f64> {
        self.evaluations.last().map(|e| e.1)
    }

    pub fn best_return(&self) -> Option<f64> {
        self.evaluations.iter().map(|e| e.1).reduce(f64::max)
    }

    pub fn sigma_trace(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.sigma_mean).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let fields = [r.return_mean, r.sigma_min, r.sigma_mean, r.sigma_max, r.kl, r.td_loss, r.ms];
            out.push_str(&r.step.to_string());
            for f in fields {
                out.push(',');
                out.push_str(&format_sig9(f));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
