use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{MraiError, Result};

/// Gradient-echo acquisition settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionProtocol {
    pub name: String,
    /// Main field strength in tesla.
    pub b0: f64,
    pub flip_deg: f64,
    pub tr_ms: f64,
    pub te_ms: f64,
    /// Per-channel noise standard deviation as a fraction of the mean WM signal.
    #[serde(default = "default_noise")]
    pub noise_sigma: f64,
}

fn default_noise() -> f64 {
    0.02
}

impl AcquisitionProtocol {
    pub fn brainweb_1_5t() -> Self {
        Self {
            name: "Brainweb1.5T".into(),
            b0: 1.5,
            flip_deg: 20.0,
            tr_ms: 13.8,
            te_ms: 2.8,
            noise_sigma: default_noise(),
        }
    }

    pub fn brainweb_3_0t() -> Self {
        Self {
            name: "Brainweb3.0T".into(),
            b0: 3.0,
            flip_deg: 90.0,
            tr_ms: 7.9,
            te_ms: 4.5,
            noise_sigma: default_noise(),
        }
    }

    pub fn presets() -> Vec<Self> {
        vec![Self::brainweb_1_5t(), Self::brainweb_3_0t()]
    }

    /// Look up a shipped preset by (case-insensitive) name.
    pub fn preset(name: &str) -> Option<Self> {
        Self::presets().into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn with_noise(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MraiError::InvalidArgument(format!("protocol {}: {msg}", self.name)));
        if !(self.flip_deg > 0.0 && self.flip_deg <= 180.0) {
            return bad(format!("flip angle {} outside (0, 180]", self.flip_deg));
        }
        if !(self.te_ms > 0.0 && self.te_ms < self.tr_ms) {
            return bad(format!("need 0 < TE < TR, got TE={} TR={}", self.te_ms, self.tr_ms));
        }
        if !(self.b0 > 0.0) {
            return bad(format!("B0 {} must be positive", self.b0));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma {} must be finite and >= 0", self.noise_sigma));
        }
        Ok(())
    }
}

/// Structured text file holding one or more protocols:
///
/// ```toml
/// [[protocol]]
/// name = "Brainweb1.5T"
/// b0 = 1.5
/// flip_deg = 20.0
/// tr_ms = 13.8
/// te_ms = 2.8
/// noise_sigma = 0.02
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProtocolFile {
    pub protocol: Vec<AcquisitionProtocol>,
}

impl ProtocolFile {
    pub fn parse(text: &str) -> Result<Vec<AcquisitionProtocol>> {
        let file: ProtocolFile =
            toml::from_str(text).map_err(|e| MraiError::Config(format!("protocol file: {e}")))?;
        for p in &file.protocol {
            p.validate()?;
        }
        Ok(file.protocol)
    }
}

pub fn load_protocols(path: &Path) -> Result<Vec<AcquisitionProtocol>> {
    ProtocolFile::parse(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_acquisition_table() {
        let p = AcquisitionProtocol::brainweb_1_5t();
        assert_eq!((p.b0, p.flip_deg, p.tr_ms, p.te_ms), (1.5, 20.0, 13.8, 2.8));
        let p = AcquisitionProtocol::brainweb_3_0t();
        assert_eq!((p.b0, p.flip_deg, p.tr_ms, p.te_ms), (3.0, 90.0, 7.9, 4.5));
        for p in AcquisitionProtocol::presets() {
            p.validate().unwrap();
        }
        assert!(AcquisitionProtocol::preset("brainweb3.0t").is_some());
    }

    #[test]
    fn rejects_bad_timing() {
        let mut p = AcquisitionProtocol::brainweb_1_5t();
        p.te_ms = 20.0;
        assert!(p.validate().is_err());
        let mut p = AcquisitionProtocol::brainweb_1_5t();
        p.flip_deg = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn parses_protocol_file() {
        let text = r#"
            [[protocol]]
            name = "custom"
            b0 = 3.0
            flip_deg = 15.0
            tr_ms = 20.0
            te_ms = 5.0

            [[protocol]]
            name = "noisy"
            b0 = 1.5
            flip_deg = 30.0
            tr_ms = 10.0
            te_ms = 2.0
            noise_sigma = 0.1
        "#;
        let ps = ProtocolFile::parse(text).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].noise_sigma, 0.02);
        assert_eq!(ps[1].noise_sigma, 0.1);
        assert!(ProtocolFile::parse("[[protocol]]\nname = 1").is_err());
    }
}
