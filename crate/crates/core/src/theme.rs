//! Shared domain vocabulary: the four policy themes, label sets over them,
//! and ISO3 country codes used as panel keys.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// One of the four climate-policy themes.
///
/// The declaration order is the canonical order used for score vectors,
/// model heads and report rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Theme {
    Mitigation,
    Adaptation,
    DisasterRiskManagement,
    LossAndDamage,
}

impl Theme {
    pub const ALL: [Theme; 4] = [
        Theme::Mitigation,
        Theme::Adaptation,
        Theme::DisasterRiskManagement,
        Theme::LossAndDamage,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Theme> {
        Theme::ALL.get(i).copied()
    }

    /// Label string as it appears in corpus files.
    pub fn label(self) -> &'static str {
        match self {
            Theme::Mitigation => "Mitigation",
            Theme::Adaptation => "Adaptation",
            Theme::DisasterRiskManagement => "Disaster Risk Management",
            Theme::LossAndDamage => "Loss and Damage",
        }
    }

    /// Whitespace-free identifier used in the model file.
    pub fn slug(self) -> &'static str {
        match self {
            Theme::Mitigation => "mitigation",
            Theme::Adaptation => "adaptation",
            Theme::DisasterRiskManagement => "drm",
            Theme::LossAndDamage => "loss_and_damage",
        }
    }

    pub fn from_slug(s: &str) -> Option<Theme> {
        Theme::ALL.into_iter().find(|t| t.slug() == s)
    }
}

impl fmt::Display for Theme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThemeParseError {
    #[error("unknown theme label {0:?}")]
    UnknownTheme(String),
    #[error("theme {0:?} listed twice")]
    Repeated(String),
}

impl FromStr for Theme {
    type Err = ThemeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Theme::ALL
            .into_iter()
            .find(|t| t.label() == s)
            .ok_or_else(|| ThemeParseError::UnknownTheme(s.to_string()))
    }
}

/// A subset of the four themes, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ThemeSet(u8);

impl ThemeSet {
    pub const EMPTY: ThemeSet = ThemeSet(0);
    pub const FULL: ThemeSet = ThemeSet(0b1111);

    pub fn from_bits(bits: u8) -> ThemeSet {
        ThemeSet(bits & 0b1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn insert(&mut self, theme: Theme) {
        self.0 |= 1 << theme.index();
    }

    pub fn with(mut self, theme: Theme) -> ThemeSet {
        self.insert(theme);
        self
    }

    pub fn contains(self, theme: Theme) -> bool {
        self.0 & (1 << theme.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersection(self, other: ThemeSet) -> ThemeSet {
        ThemeSet(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = Theme> {
        Theme::ALL.into_iter().filter(move |t| self.contains(*t))
    }

    /// Parse a pipe-separated label cell. An empty (or all-blank) cell is the
    /// empty set.
    pub fn parse_labels(cell: &str) -> Result<ThemeSet, ThemeParseError> {
        let mut set = ThemeSet::EMPTY;
        if cell.trim().is_empty() {
            return Ok(set);
        }
        for part in cell.split('|') {
            let theme: Theme = part.trim().parse()?;
            if set.contains(theme) {
                return Err(ThemeParseError::Repeated(part.trim().to_string()));
            }
            set.insert(theme);
        }
        Ok(set)
    }

    /// Inverse of [`ThemeSet::parse_labels`], in canonical theme order.
    pub fn to_labels(self) -> String {
        self.iter().map(Theme::label).collect::<Vec<_>>().join("|")
    }
}

impl FromIterator<Theme> for ThemeSet {
    fn from_iter<I: IntoIterator<Item = Theme>>(iter: I) -> Self {
        iter.into_iter().fold(ThemeSet::EMPTY, ThemeSet::with)
    }
}

/// Three-letter uppercase ISO3 country (or economy) code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 3]);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid ISO3 code {0:?}: expected three uppercase ASCII letters")]
pub struct CountryCodeError(pub String);

impl CountryCode {
    pub fn as_str(&self) -> &str {
        // Constructed only from validated ASCII.
        std::str::from_utf8(&self.0).expect("ascii country code")
    }

    /// The G7 members, the default always-include list for the country biplot.
    pub fn g7() -> Vec<CountryCode> {
        ["CAN", "FRA", "DEU", "ITA", "JPN", "GBR", "USA"]
            .iter()
            .map(|c| c.parse().expect("static code"))
            .collect()
    }
}

impl FromStr for CountryCode {
    type Err = CountryCodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 3 && b.iter().all(u8::is_ascii_uppercase) {
            Ok(CountryCode([b[0], b[1], b[2]]))
        } else {
            Err(CountryCodeError(s.to_string()))
        }
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
