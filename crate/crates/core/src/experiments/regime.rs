use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position of a corpus in the four-corpus design. `B-tgt` is always the
/// evaluation target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "A-src")]
    ASrc,
    #[serde(rename = "A-tgt")]
    ATgt,
    #[serde(rename = "B-src")]
    BSrc,
    #[serde(rename = "B-tgt")]
    BTgt,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::ASrc, Role::ATgt, Role::BSrc, Role::BTgt];

    pub fn name(self) -> &'static str {
        match self {
            Role::ASrc => "A-src",
            Role::ATgt => "A-tgt",
            Role::BSrc => "B-src",
            Role::BTgt => "B-tgt",
        }
    }

    pub fn file_name(self) -> String {
        format!("{}.json", self.name())
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Role::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("role", format!("unknown corpus role {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "direct")]
    Direct,
    #[serde(rename = "CLT")]
    Clt,
    #[serde(rename = "COT")]
    Cot,
    #[serde(rename = "CL/COT")]
    ClCot,
    #[serde(rename = "CLPT")]
    Clpt,
    #[serde(rename = "COPT")]
    Copt,
    #[serde(rename = "CL/COPT")]
    ClCopt,
}

impl Regime {
    pub const ALL: [Regime; 7] = [
        Regime::Direct,
        Regime::Clt,
        Regime::Cot,
        Regime::ClCot,
        Regime::Clpt,
        Regime::Copt,
        Regime::ClCopt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Direct => "direct",
            Regime::Clt => "CLT",
            Regime::Cot => "COT",
            Regime::ClCot => "CL/COT",
            Regime::Clpt => "CLPT",
            Regime::Copt => "COPT",
            Regime::ClCopt => "CL/COPT",
        }
    }

    /// File-system friendly name.
    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase().replace('/', "-")
    }

    pub fn target(self) -> Role {
        Role::BTgt
    }

    /// Corpora whose training splits are mixed into one stream.
    pub fn joint_roles(self) -> &'static [Role] {
        match self {
            Regime::Direct | Regime::Clpt | Regime::Copt | Regime::ClCopt => &[Role::BTgt],
            Regime::Clt => &[Role::BTgt, Role::BSrc],
            Regime::Cot => &[Role::BTgt, Role::ASrc],
            Regime::ClCot => &[Role::BTgt, Role::BSrc, Role::ASrc, Role::ATgt],
        }
    }

    /// Corpora trained on before fine-tuning on the target; empty for joint regimes.
    pub fn pretrain_roles(self) -> &'static [Role] {
        match self {
            Regime::Clpt => &[Role::BSrc],
            Regime::Copt => &[Role::ASrc],
            Regime::ClCopt => &[Role::ASrc, Role::ATgt],
            _ => &[],
        }
    }

    /// Every role the regime reads.
    pub fn roles(self) -> Vec<Role> {
        let mut roles: Vec<Role> = self.joint_roles().iter().chain(self.pretrain_roles()).copied().collect();
        roles.sort();
        roles.dedup();
        roles
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s) || r.slug() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid("regime", format!("unknown regime {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_matrix() {
        assert_eq!(Regime::Direct.roles(), vec![Role::BTgt]);
        assert_eq!(Regime::Clt.roles(), vec![Role::BSrc, Role::BTgt]);
        assert_eq!(Regime::Cot.roles(), vec![Role::ASrc, Role::BTgt]);
        assert_eq!(Regime::ClCot.roles(), Role::ALL.to_vec());
        assert_eq!(Regime::ClCot.joint_roles().len(), 4);
        assert_eq!(Regime::Clpt.pretrain_roles(), &[Role::BSrc]);
        assert_eq!(Regime::Copt.pretrain_roles(), &[Role::ASrc]);
        assert_eq!(Regime::ClCopt.pretrain_roles(), &[Role::ASrc, Role::ATgt]);
        for r in Regime::ALL {
            assert!(r.joint_roles().contains(&r.target()));
        }
    }

    #[test]
    fn names_parse_back() {
        for r in Regime::ALL {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
            assert_eq!(r.slug().parse::<Regime>().unwrap(), r);
        }
        assert_eq!("cl/cot".parse::<Regime>().unwrap(), Regime::ClCot);
        assert!("CLX".parse::<Regime>().is_err());
        for r in Role::ALL {
            assert_eq!(r.name().parse::<Role>().unwrap(), r);
        }
    }
}
