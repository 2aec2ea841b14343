use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tissue and field parameters of one voxel. Times in ms, off-resonance in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TissueParams {
    pub t1: f64,
    pub t2: f64,
    pub b0: f64,
    pub pd: f64,
}

impl TissueParams {
    pub fn new(t1: f64, t2: f64, b0: f64, pd: f64) -> Self {
        TissueParams { t1, t2, b0, pd }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(Error::InvalidParameter(format!("T1 must be positive, got {}", self.t1)));
        }
        if !(self.t2 > 0.0 && self.t2.is_finite()) {
            return Err(Error::InvalidParameter(format!("T2 must be positive, got {}", self.t2)));
        }
        if self.t2 > self.t1 {
            return Err(Error::InvalidParameter(format!(
                "T2 ({}) exceeds T1 ({})",
                self.t2, self.t1
            )));
        }
        if !self.b0.is_finite() {
            return Err(Error::InvalidParameter("B0 must be finite".into()));
        }
        if !(self.pd >= 0.0 && self.pd.is_finite()) {
            return Err(Error::InvalidParameter(format!("proton density must be ≥ 0, got {}", self.pd)));
        }
        Ok(())
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::T1 => self.t1,
            Label::T2 => self.t2,
            Label::B0 => self.b0,
        }
    }
}

/// A regression target. Each gets its own network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    T1,
    T2,
    B0,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::T1, Label::T2, Label::B0];

    pub fn name(self) -> &'static str {
        match self {
            Label::T1 => "t1",
            Label::T2 => "t2",
            Label::B0 => "b0",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Label::T1 => 0,
            Label::T2 => 1,
            Label::B0 => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Label::ALL.into_iter().find(|l| l.code() == code)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(Label::T1),
            "t2" => Ok(Label::T2),
            "b0" => Ok(Label::B0),
            other => Err(Error::InvalidConfig(format!("unknown label '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TissueParams::new(830.0, 80.0, 0.0, 1.0).validate().is_ok());
        assert!(TissueParams::new(80.0, 830.0, 0.0, 1.0).validate().is_err());
        assert!(TissueParams::new(0.0, 0.0, 0.0, 1.0).validate().is_err());
        assert!(TissueParams::new(100.0, 50.0, 0.0, -1.0).validate().is_err());
    }

    #[test]
    fn labels() {
        let p = TissueParams::new(1.0, 0.5, -3.0, 1.0);
        assert_eq!(Label::ALL.map(|l| p.get(l)), [1.0, 0.5, -3.0]);
        for l in Label::ALL {
            assert_eq!(l.name().parse::<Label>().unwrap(), l);
            assert_eq!(Label::from_code(l.code()), Some(l));
        }
    }
}
