use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Gray-labelled square constellations with unit average energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constellation {
    #[serde(rename = "QPSK", alias = "qpsk")]
    Qpsk,
    #[serde(rename = "QAM16", alias = "qam16", alias = "16qam")]
    Qam16,
}

/// Gray order of the 16-QAM per-axis levels: label bits `00, 01, 11, 10`.
const PAM4_LEVELS: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];

impl Constellation {
    pub fn bits_per_symbol(self) -> u32 {
        match self {
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
        }
    }

    pub fn size(self) -> u16 {
        1 << self.bits_per_symbol()
    }

    /// Point for a bit label. The high half of the label drives the in-phase
    /// axis, the low half the quadrature axis.
    pub fn point(self, label: u16) -> Complex64 {
        match self {
            Constellation::Qpsk => {
                let axis = |b: u16| if b == 0 { -1.0 } else { 1.0 };
                Complex64::new(axis((label >> 1) & 1), axis(label & 1)) * std::f64::consts::FRAC_1_SQRT_2
            }
            Constellation::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                Complex64::new(
                    PAM4_LEVELS[((label >> 2) & 3) as usize],
                    PAM4_LEVELS[(label & 3) as usize],
                ) * scale
            }
        }
    }

    /// Nearest-point hard decision.
    pub fn decide(self, z: Complex64) -> u16 {
        match self {
            Constellation::Qpsk => ((z.re >= 0.0) as u16) << 1 | (z.im >= 0.0) as u16,
            Constellation::Qam16 => {
                let s = 10f64.sqrt();
                (pam4_label(z.re * s) << 2) | pam4_label(z.im * s)
            }
        }
    }
}

fn pam4_label(x: f64) -> u16 {
    if x < -2.0 {
        0b00
    } else if x < 0.0 {
        0b01
    } else if x < 2.0 {
        0b11
    } else {
        0b10
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constellation::Qpsk => "QPSK",
            Constellation::Qam16 => "QAM16",
        })
    }
}

impl FromStr for Constellation {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Constellation::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Constellation::Qam16),
            _ => Err(crate::Error::InvalidParameter(format!("unknown constellation `{s}`"))),
        }
    }
}
