use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts a power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Raw scalar inputs, as they appear in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub carrier_hz: f64,
    pub n_eff: f64,
    /// Common noise power (dBm), used when `noise_dbm_per_user` is absent.
    pub noise_dbm: f64,
    pub noise_dbm_per_user: Option<Vec<f64>>,
    pub pt_dbm: f64,
    pub height: f64,
    pub dx: f64,
    pub dy: f64,
    pub waveguides: usize,
    pub pas_per_waveguide: usize,
    pub users: usize,
    /// y-coordinate of the waveguide when there is only one.
    pub single_waveguide_y: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            n_eff: 1.44,
            noise_dbm: -90.0,
            noise_dbm_per_user: None,
            pt_dbm: 10.0,
            height: 5.0,
            dx: 30.0,
            dy: 5.0,
            waveguides: 1,
            pas_per_waveguide: 6,
            users: 4,
            single_waveguide_y: 0.0,
        }
    }
}

/// Physical constants of one system instance, with all derived quantities
/// precomputed. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    pub carrier_hz: f64,
    pub c: f64,
    /// Free-space wavelength (m).
    pub lambda: f64,
    /// Free-space wavenumber (rad/m).
    pub kappa: f64,
    pub n_eff: f64,
    /// Guided wavelength (m).
    pub lambda_g: f64,
    /// Guided wavenumber (rad/m).
    pub kappa_g: f64,
    /// Channel gain factor (m^2).
    pub eta: f64,
    /// Per-user noise power (W).
    pub sigma2: Vec<f64>,
    /// Transmit power budget (W).
    pub pt: f64,
    pub height: f64,
    pub dx: f64,
    pub dy: f64,
    pub delta_min: f64,
    pub waveguides: usize,
    pub pas_per_waveguide: usize,
    pub users: usize,
    /// Per-antenna power fraction, 1/N.
    pub rho: f64,
    pub single_waveguide_y: f64,
}

impl SystemParams {
    pub fn derive(cfg: &SystemConfig) -> Result<Self> {
        positive("carrier_hz", cfg.carrier_hz)?;
        positive("height", cfg.height)?;
        positive("dx", cfg.dx)?;
        positive("dy", cfg.dy)?;
        if !cfg.pt_dbm.is_finite() {
            return Err(invalid("pt_dbm", "must be finite"));
        }
        if !(cfg.n_eff.is_finite() && cfg.n_eff >= 1.0) {
            return Err(invalid("n_eff", format!("must be >= 1, got {}", cfg.n_eff)));
        }
        if cfg.waveguides == 0 {
            return Err(invalid("waveguides", "must be >= 1"));
        }
        if cfg.pas_per_waveguide == 0 {
            return Err(invalid("pas_per_waveguide", "must be >= 1"));
        }
        if cfg.users == 0 {
            return Err(invalid("users", "must be >= 1"));
        }
        let sigma2 = match &cfg.noise_dbm_per_user {
            Some(v) => {
                if v.len() != cfg.users {
                    return Err(invalid(
                        "noise_dbm_per_user",
                        format!("expected {} entries, got {}", cfg.users, v.len()),
                    ));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("noise_dbm_per_user", "entries must be finite"));
                }
                v.iter().map(|&d| dbm_to_watts(d)).collect()
            }
            None => {
                if !cfg.noise_dbm.is_finite() {
                    return Err(invalid("noise_dbm", "must be finite"));
                }
                vec![dbm_to_watts(cfg.noise_dbm); cfg.users]
            }
        };

        let c = SPEED_OF_LIGHT;
        let lambda = c / cfg.carrier_hz;
        let lambda_g = lambda / cfg.n_eff;
        Ok(Self {
            carrier_hz: cfg.carrier_hz,
            c,
            lambda,
            kappa: 2.0 * PI / lambda,
            n_eff: cfg.n_eff,
            lambda_g,
            kappa_g: 2.0 * PI / lambda_g,
            eta: (lambda / (4.0 * PI)).powi(2),
            sigma2,
            pt: dbm_to_watts(cfg.pt_dbm),
            height: cfg.height,
            dx: cfg.dx,
            dy: cfg.dy,
            delta_min: lambda / 2.0,
            waveguides: cfg.waveguides,
            pas_per_waveguide: cfg.pas_per_waveguide,
            users: cfg.users,
            rho: 1.0 / cfg.pas_per_waveguide as f64,
            single_waveguide_y: cfg.single_waveguide_y,
        })
    }

    /// Copy with a different user count, keeping the common noise power of user 0.
    pub fn with_users(&self, users: usize) -> Self {
        let mut p = self.clone();
        p.users = users;
        p.sigma2 = vec![self.sigma2[0]; users];
        p
    }

    /// Copy with a different array size.
    pub fn with_array(&self, waveguides: usize, pas_per_waveguide: usize) -> Self {
        let mut p = self.clone();
        p.waveguides = waveguides;
        p.pas_per_waveguide = pas_per_waveguide;
        p.rho = 1.0 / pas_per_waveguide as f64;
        p
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be > 0, got {v}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn params_with(f: impl FnOnce(&mut SystemConfig)) -> Result<SystemParams> {
        let mut cfg = SystemConfig::default();
        f(&mut cfg);
        SystemParams::derive(&cfg)
    }

    #[test]
    fn wavelengths_at_28ghz() {
        let p = params_with(|_| {}).unwrap();
        assert!((p.lambda - 1.0707e-2).abs() < 1e-6);
        assert!((p.lambda_g - 7.435e-3).abs() < 1e-6);
        assert!((p.kappa_g - 2.0 * PI * p.n_eff / p.lambda).abs() < 1e-9 * p.kappa_g);
        assert!((p.delta_min - p.lambda / 2.0).abs() == 0.0);
        assert!((p.rho - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn eta_at_28ghz() {
        let p = params_with(|_| {}).unwrap();
        // c^2 / (16 pi^2 fc^2) by hand
        let by_hand = SPEED_OF_LIGHT * SPEED_OF_LIGHT / (16.0 * PI * PI * 28e9 * 28e9);
        assert!((p.eta - by_hand).abs() < 1e-20);
        assert!((p.eta - 7.259e-7).abs() < 1e-10);
    }

    #[test]
    fn vacuum_index_keeps_wavelength() {
        let p = params_with(|c| c.n_eff = 1.0).unwrap();
        assert_eq!(p.lambda_g, p.lambda);
        assert_eq!(p.kappa_g, p.kappa);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        for (field, f) in [
            ("height", Box::new(|c: &mut SystemConfig| c.height = 0.0) as Box<dyn Fn(&mut SystemConfig)>),
            ("dx", Box::new(|c: &mut SystemConfig| c.dx = -1.0)),
            ("dy", Box::new(|c: &mut SystemConfig| c.dy = 0.0)),
            ("carrier_hz", Box::new(|c: &mut SystemConfig| c.carrier_hz = 0.0)),
            ("users", Box::new(|c: &mut SystemConfig| c.users = 0)),
            ("n_eff", Box::new(|c: &mut SystemConfig| c.n_eff = 0.5)),
        ] {
            match params_with(|c| f(c)) {
                Err(Error::InvalidParameter { field: got, .. }) => assert_eq!(got, field),
                other => panic!("expected error for {field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn per_user_noise_length_checked() {
        let err = params_with(|c| c.noise_dbm_per_user = Some(vec![-90.0])).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { field: "noise_dbm_per_user", .. }));
        let p = params_with(|c| c.noise_dbm_per_user = Some(vec![-90.0, -80.0, -90.0, -85.0]))
            .unwrap();
        assert!((p.sigma2[1] / p.sigma2[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn dbm_roundtrip() {
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((dbm_to_watts(-90.0) - 1e-12).abs() < 1e-24);
        assert!((watts_to_dbm(dbm_to_watts(7.5)) - 7.5).abs() < 1e-12);
    }
}
