//! TOML run configuration.

use crate::error::CliError;
use capeuler::wave::{init_state, SimConfig};
use std::path::Path;

/// Command-line values that replace entries of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub n_theta: Option<usize>,
    pub n_r: Option<usize>,
    pub dt: Option<f64>,
    pub eps: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SimConfig) {
        if let Some(n) = self.n_theta {
            cfg.n_theta = n;
        }
        if let Some(n) = self.n_r {
            cfg.n_r = n;
        }
        if let Some(dt) = self.dt {
            cfg.dt = Some(dt);
        }
        if let Some(e) = self.eps {
            cfg.eps = e;
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParsedConfig {
    pub config: SimConfig,
    /// Step size actually used: the configured one or the stability bound.
    pub dt: f64,
}

/// Parse and validate a configuration held in memory. `origin` names it in messages.
pub fn parse_config_str(text: &str, origin: &str, ov: &Overrides) -> Result<ParsedConfig, CliError> {
    // toml reports line, column and the offending snippet
    let cfg: SimConfig = toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    prepare(cfg, origin, ov)
}

/// Apply overrides, validate, and resolve the time step.
pub fn prepare(mut cfg: SimConfig, origin: &str, ov: &Overrides) -> Result<ParsedConfig, CliError> {
    ov.apply(&mut cfg);
    cfg.validate().map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    let state = init_state(&cfg).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    let dt = cfg.resolve_dt(&state).map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
    Ok(ParsedConfig { config: cfg, dt })
}

pub fn parse_config(path: &Path, ov: &Overrides) -> Result<ParsedConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, &path.display().to_string(), ov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let p = parse_config_str("eps = 0.5\n[geometry]\nkind = \"circle\"\n", "mem", &Overrides::default()).unwrap();
        assert_eq!(p.config.n_theta, 256);
        assert_eq!(p.config.n_r, 64);
        assert!(p.config.dt.is_none());
        assert!(p.dt > 0.0);
    }

    #[test]
    fn unknown_key_has_line_context() {
        let e = parse_config_str("eps = 0.5\nn_thta = 64\n[geometry]\nkind = \"circle\"\n", "mem", &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2") && e.contains("n_thta"), "{e}");
    }

    #[test]
    fn type_error_has_line_context() {
        let e = parse_config_str("eps = 0.5\n\n[geometry]\nkind = \"circle\"\nradius = \"big\"\n", "mem", &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 5"), "{e}");
    }

    #[test]
    fn annulus_without_inner_radius() {
        let e = parse_config_str("eps = 0.1\n[geometry]\nkind = \"annulus\"\nouter = 2.0\n", "mem", &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(e.contains("inner"), "{e}");
    }

    #[test]
    fn dt_above_bound_names_the_bound() {
        let e = parse_config_str("eps = 0.5\ndt = 0.5\nn_theta = 32\nn_r = 8\n[geometry]\nkind = \"circle\"\n", "mem", &Overrides::default())
            .unwrap_err()
            .to_string();
        assert!(e.contains("stability bound"), "{e}");
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides { n_theta: Some(32), n_r: Some(8), dt: None, eps: Some(0.1) };
        let p = parse_config_str("eps = 0.5\n[geometry]\nkind = \"circle\"\n", "mem", &ov).unwrap();
        assert_eq!((p.config.n_theta, p.config.n_r, p.config.eps), (32, 8, 0.1));
    }
}
