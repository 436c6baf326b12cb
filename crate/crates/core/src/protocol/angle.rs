use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Angle in radians. Parses plain numbers and multiples of pi such as
/// `pi/4`, `-3pi/4`, `0.5*pi`, `3π/4`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Angle(pub f64);

impl Angle {
    pub fn radians(self) -> f64 {
        self.0
    }
}

impl From<f64> for Angle {
    fn from(x: f64) -> Self {
        Angle(x)
    }
}

impl FromStr for Angle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::Config(format!("cannot parse angle {s:?}"));
        let t: String = s
            .trim()
            .to_ascii_lowercase()
            .replace('π', "pi")
            .split_whitespace()
            .collect();
        if let Ok(x) = t.parse::<f64>() {
            return Ok(Angle(x));
        }
        let (coef, rest) = t.split_once("pi").ok_or_else(bad)?;
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c.parse::<f64>().map_err(|_| bad())?,
        };
        let d = match rest {
            "" => 1.0,
            r => r
                .strip_prefix('/')
                .and_then(|d| d.parse::<f64>().ok())
                .filter(|d| *d != 0.0)
                .ok_or_else(bad)?,
        };
        Ok(Angle(c * PI / d))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Float(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Float(x) => Ok(Angle(x)),
            Raw::Int(i) => Ok(Angle(i as f64)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_forms() {
        let cases = [
            ("0", 0.0),
            ("1.5", 1.5),
            ("pi", PI),
            ("-pi", -PI),
            ("pi/4", PI / 4.0),
            ("-3pi/4", -3.0 * PI / 4.0),
            ("3*pi/4", 3.0 * PI / 4.0),
            ("0.5pi", 0.5 * PI),
            (" 3π/4 ", 3.0 * PI / 4.0),
        ];
        for (s, v) in cases {
            assert_eq!(s.parse::<Angle>().unwrap().0, v, "{s}");
        }
        for s in ["", "pie", "pi/0", "x*pi", "pi/"] {
            assert!(s.parse::<Angle>().is_err(), "{s}");
        }
    }

    #[test]
    fn display_round_trips() {
        let a: Angle = "-3pi/4".parse().unwrap();
        assert_eq!(a.to_string().parse::<Angle>().unwrap(), a);
    }
}
