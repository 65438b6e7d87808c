use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MdpError;

/// The five per-step reward components.
///
/// Suppression, ecology, air and recreation are costs or penalties and never
/// positive; timber is revenue and never negative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardVector {
    pub suppression: f64,
    pub timber: f64,
    pub ecology: f64,
    pub air: f64,
    pub recreation: f64,
}

impl RewardVector {
    pub fn weighted(&self, w: &ConstituencyWeights) -> f64 {
        w.suppression * self.suppression
            + w.timber * self.timber
            + w.ecology * self.ecology
            + w.air * self.air
            + w.recreation * self.recreation
    }

    pub fn has_valid_signs(&self) -> bool {
        self.suppression <= 0.0
            && self.timber >= 0.0
            && self.ecology <= 0.0
            && self.air <= 0.0
            && self.recreation <= 0.0
    }
}

impl AddAssign for RewardVector {
    fn add_assign(&mut self, o: Self) {
        self.suppression += o.suppression;
        self.timber += o.timber;
        self.ecology += o.ecology;
        self.air += o.air;
        self.recreation += o.recreation;
    }
}

/// Nonnegative weights over the five reward components, at least one nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct ConstituencyWeights {
    pub suppression: f64,
    pub timber: f64,
    pub ecology: f64,
    pub air: f64,
    pub recreation: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    #[serde(default)]
    suppression: f64,
    #[serde(default)]
    timber: f64,
    #[serde(default)]
    ecology: f64,
    #[serde(default)]
    air: f64,
    #[serde(default)]
    recreation: f64,
}

impl TryFrom<RawWeights> for ConstituencyWeights {
    type Error = MdpError;

    fn try_from(r: RawWeights) -> Result<Self, MdpError> {
        Self::new(r.suppression, r.timber, r.ecology, r.air, r.recreation)
    }
}

impl ConstituencyWeights {
    pub const COMPONENTS: [&'static str; 5] = ["suppression", "timber", "ecology", "air", "recreation"];

    pub fn new(
        suppression: f64,
        timber: f64,
        ecology: f64,
        air: f64,
        recreation: f64,
    ) -> Result<Self, MdpError> {
        let w = Self { suppression, timber, ecology, air, recreation };
        let values = w.as_array();
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(MdpError::InvalidWeights(format!(
                "{} weight must be a finite nonnegative number, got {}",
                Self::COMPONENTS[i],
                values[i]
            )));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(MdpError::InvalidWeights("at least one weight must be nonzero".into()));
        }
        Ok(w)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.suppression, self.timber, self.ecology, self.air, self.recreation]
    }

    fn flags(s: bool, t: bool, e: bool, a: bool, r: bool) -> Self {
        let f = |b: bool| if b { 1.0 } else { 0.0 };
        Self { suppression: f(s), timber: f(t), ecology: f(e), air: f(a), recreation: f(r) }
    }
}

/// Stakeholder presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constituency {
    Composite,
    Politics,
    HomeOwners,
    Timber,
}

impl Constituency {
    pub const ALL: [Constituency; 4] =
        [Constituency::Composite, Constituency::Politics, Constituency::HomeOwners, Constituency::Timber];

    pub fn name(self) -> &'static str {
        match self {
            Constituency::Composite => "composite",
            Constituency::Politics => "politics",
            Constituency::HomeOwners => "home_owners",
            Constituency::Timber => "timber",
        }
    }

    pub fn weights(self) -> ConstituencyWeights {
        use ConstituencyWeights as W;
        match self {
            Constituency::Composite => W::flags(true, true, true, true, true),
            // Not responsible for funding firefighting.
            Constituency::Politics => W::flags(false, true, true, true, true),
            Constituency::HomeOwners => W::flags(false, false, false, true, true),
            Constituency::Timber => W::flags(true, true, false, false, false),
        }
    }
}

impl fmt::Display for Constituency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Constituency {
    type Err = MdpError;

    fn from_str(s: &str) -> Result<Self, MdpError> {
        Constituency::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| MdpError::UnknownConstituency(s.to_string()))
    }
}

/// Weights of a named constituency.
pub fn constituency(name: &str) -> Result<ConstituencyWeights, MdpError> {
    Ok(name.parse::<Constituency>()?.weights())
}
