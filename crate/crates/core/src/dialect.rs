use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The 18 varieties the dialect identifier distinguishes: MSA plus 17
/// country-level dialects. Declaration order is the tie-breaking order for
/// ranked predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DialectLabel {
    Msa,
    Alg,
    Egy,
    Ira,
    Jor,
    Ksa,
    Kuw,
    Leb,
    Lib,
    Mau,
    Mor,
    Oma,
    Pal,
    Qat,
    Sud,
    Syr,
    Uae,
    Yem,
}

impl DialectLabel {
    pub const ALL: [DialectLabel; 18] = [
        DialectLabel::Msa,
        DialectLabel::Alg,
        DialectLabel::Egy,
        DialectLabel::Ira,
        DialectLabel::Jor,
        DialectLabel::Ksa,
        DialectLabel::Kuw,
        DialectLabel::Leb,
        DialectLabel::Lib,
        DialectLabel::Mau,
        DialectLabel::Mor,
        DialectLabel::Oma,
        DialectLabel::Pal,
        DialectLabel::Qat,
        DialectLabel::Sud,
        DialectLabel::Syr,
        DialectLabel::Uae,
        DialectLabel::Yem,
    ];

    pub const COUNT: usize = Self::ALL.len();

    pub fn code(self) -> &'static str {
        match self {
            DialectLabel::Msa => "MSA",
            DialectLabel::Alg => "ALG",
            DialectLabel::Egy => "EGY",
            DialectLabel::Ira => "IRA",
            DialectLabel::Jor => "JOR",
            DialectLabel::Ksa => "KSA",
            DialectLabel::Kuw => "KUW",
            DialectLabel::Leb => "LEB",
            DialectLabel::Lib => "LIB",
            DialectLabel::Mau => "MAU",
            DialectLabel::Mor => "MOR",
            DialectLabel::Oma => "OMA",
            DialectLabel::Pal => "PAL",
            DialectLabel::Qat => "QAT",
            DialectLabel::Sud => "SUD",
            DialectLabel::Syr => "SYR",
            DialectLabel::Uae => "UAE",
            DialectLabel::Yem => "YEM",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DialectLabel::Msa => "Modern Standard Arabic",
            DialectLabel::Alg => "Algerian",
            DialectLabel::Egy => "Egyptian",
            DialectLabel::Ira => "Iraqi",
            DialectLabel::Jor => "Jordanian",
            DialectLabel::Ksa => "Saudi",
            DialectLabel::Kuw => "Kuwaiti",
            DialectLabel::Leb => "Lebanese",
            DialectLabel::Lib => "Libyan",
            DialectLabel::Mau => "Mauritanian",
            DialectLabel::Mor => "Moroccan",
            DialectLabel::Oma => "Omani",
            DialectLabel::Pal => "Palestinian",
            DialectLabel::Qat => "Qatari",
            DialectLabel::Sud => "Sudanese",
            DialectLabel::Syr => "Syrian",
            DialectLabel::Uae => "Emirati",
            DialectLabel::Yem => "Yemeni",
        }
    }

    /// Position in [`DialectLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown dialect label {0:?}")]
pub struct UnknownDialect(pub String);

impl FromStr for DialectLabel {
    type Err = UnknownDialect;

    /// Accepts the three-letter code in any letter case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DialectLabel::ALL
            .into_iter()
            .find(|d| d.code().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownDialect(s.to_string()))
    }
}

impl fmt::Display for DialectLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for DialectLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for DialectLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What the caller asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DialectSelection {
    Auto,
    Other,
    Dialect(DialectLabel),
}

impl FromStr for DialectSelection {
    type Err = UnknownDialect;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("auto") {
            Ok(DialectSelection::Auto)
        } else if t.eq_ignore_ascii_case("other") {
            Ok(DialectSelection::Other)
        } else {
            t.parse().map(DialectSelection::Dialect)
        }
    }
}

impl fmt::Display for DialectSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DialectSelection::Auto => f.write_str("auto"),
            DialectSelection::Other => f.write_str("other"),
            DialectSelection::Dialect(d) => f.write_str(d.code()),
        }
    }
}

/// The variety a transcription was attributed to: a label, or `OTHER` when
/// the user declared the speech outside the covered set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DialectUsed {
    Dialect(DialectLabel),
    Other,
}

impl fmt::Display for DialectUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DialectUsed::Dialect(d) => f.write_str(d.code()),
            DialectUsed::Other => f.write_str("OTHER"),
        }
    }
}

impl FromStr for DialectUsed {
    type Err = UnknownDialect;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "OTHER" {
            Ok(DialectUsed::Other)
        } else {
            s.parse().map(DialectUsed::Dialect)
        }
    }
}

impl Serialize for DialectUsed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DialectUsed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighteen_stable_codes() {
        assert_eq!(DialectLabel::COUNT, 18);
        for (i, d) in DialectLabel::ALL.iter().enumerate() {
            assert_eq!(d.index(), i);
            assert_eq!(d.code().len(), 3);
            assert_eq!(d.code(), d.code().to_ascii_uppercase());
            assert_eq!(d.code().parse::<DialectLabel>().unwrap(), *d);
        }
        assert_eq!(DialectLabel::Mor.display_name(), "Moroccan");
    }

    #[test]
    fn selection_parsing() {
        assert_eq!("auto".parse(), Ok(DialectSelection::Auto));
        assert_eq!("Other".parse(), Ok(DialectSelection::Other));
        assert_eq!("egy".parse(), Ok(DialectSelection::Dialect(DialectLabel::Egy)));
        assert!("XYZ".parse::<DialectSelection>().is_err());
        assert!("".parse::<DialectSelection>().is_err());
    }

    #[test]
    fn serde_forms() {
        assert_eq!(serde_json::to_string(&DialectLabel::Uae).unwrap(), "\"UAE\"");
        assert_eq!(serde_json::to_string(&DialectUsed::Other).unwrap(), "\"OTHER\"");
        let u: DialectUsed = serde_json::from_str("\"JOR\"").unwrap();
        assert_eq!(u, DialectUsed::Dialect(DialectLabel::Jor));
    }
}
