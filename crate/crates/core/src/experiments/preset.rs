//! Closed-form curves that need no Monte Carlo.

use crate::analytic::{avg_rate_conv, avg_rate_pass_closed_form, avg_rate_pass_high_snr, rate_gain, LinearCaseParams};
use crate::error::{Error, Result};
use crate::model::{SystemConfig, SystemParams};

use super::output::format_sig;

/// Names accepted by [`analytic_preset`].
pub const PRESETS: [&str; 1] = ["fig3"];

/// Side lengths (m) of the single-antenna linear-distribution sweep.
pub const FIG3_DX: [f64; 10] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0];

const FIG3_USERS: usize = 6;
const FIG3_PT_DBM: f64 = 10.0;
const FIG3_Y_HAT: f64 = 2.5;

/// Average rates (bits/s/Hz) at one side length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fig3Row {
    pub dx: f64,
    pub pass_closed_form: f64,
    pub pass_high_snr: f64,
    pub conv_exact: f64,
    pub conv_high_snr: f64,
    pub rate_gain: f64,
}

/// One movable antenna against one fixed at the middle, six users on a line
/// 2.5 m off the waveguide, 10 dBm, over [`FIG3_DX`].
pub fn fig3_rows() -> Result<Vec<Fig3Row>> {
    FIG3_DX
        .iter()
        .map(|&dx| {
            let params = SystemParams::derive(&SystemConfig {
                dx,
                pt_dbm: FIG3_PT_DBM,
                users: FIG3_USERS,
                waveguides: 1,
                pas_per_waveguide: 1,
                ..SystemConfig::default()
            })?;
            let lin = LinearCaseParams::from_params(&params, FIG3_Y_HAT, 0.0)?;
            let (conv_exact, conv_high_snr) = avg_rate_conv(&lin, dx, FIG3_USERS)?;
            Ok(Fig3Row {
                dx,
                pass_closed_form: avg_rate_pass_closed_form(&lin, dx),
                pass_high_snr: avg_rate_pass_high_snr(&lin, dx),
                conv_exact,
                conv_high_snr,
                rate_gain: rate_gain(&lin, dx, FIG3_USERS)?,
            })
        })
        .collect()
}

/// CSV rendering of [`fig3_rows`].
pub fn fig3_table(rows: &[Fig3Row]) -> String {
    let mut out = String::from("dx,pass_closed_form,pass_high_snr,conv_exact,conv_high_snr,rate_gain\n");
    for r in rows {
        let cells = [r.pass_closed_form, r.pass_high_snr, r.conv_exact, r.conv_high_snr, r.rate_gain]
            .map(|v| format_sig(v, 9));
        out.push_str(&format!("{},{}\n", r.dx, cells.join(",")));
    }
    out
}

/// CSV text of a named preset.
pub fn analytic_preset(name: &str) -> Result<String> {
    match name {
        "fig3" => Ok(fig3_table(&fig3_rows()?)),
        other => Err(Error::UnknownName { kind: "preset", name: other.to_string() }),
    }
}
