//! The permission algebra: action classes, grants, scopes and dominance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::encoding::{tag, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError};
use super::types::Timestamp;

/// Resource class that matches every other class. Only master scopes carry it.
pub const WILDCARD_RESOURCE: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionClass {
    Read,
    Transact,
    Contract,
    Delegate,
    Admin,
}

impl ActionClass {
    pub const ALL: [ActionClass; 5] = [
        ActionClass::Read,
        ActionClass::Transact,
        ActionClass::Contract,
        ActionClass::Delegate,
        ActionClass::Admin,
    ];

    /// ADMIN dominates everything; every other class only itself.
    pub fn dominates(self, other: ActionClass) -> bool {
        self == ActionClass::Admin || self == other
    }

    pub fn code(self) -> u8 {
        match self {
            ActionClass::Read => 0,
            ActionClass::Transact => 1,
            ActionClass::Contract => 2,
            ActionClass::Delegate => 3,
            ActionClass::Admin => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionClass::Read => "READ",
            ActionClass::Transact => "TRANSACT",
            ActionClass::Contract => "CONTRACT",
            ActionClass::Delegate => "DELEGATE",
            ActionClass::Admin => "ADMIN",
        }
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionClass {
    type Err = ScopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ScopeError::UnknownActionClass(s.to_owned()))
    }
}

impl CanonicalEncode for ActionClass {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.enum_code(self.code());
    }
}

impl CanonicalDecode for ActionClass {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let code = dec.enum_code()?;
        Self::from_code(code).ok_or_else(|| EncodingError::Invalid(format!("action class {code}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScopeError {
    #[error("READ grants must carry a zero monetary cap")]
    ReadWithCap,
    #[error("resource class must be non-empty")]
    EmptyResourceClass,
    #[error("a non-empty scope needs at least one grant")]
    EmptyScope,
    #[error("unknown action class {0:?}")]
    UnknownActionClass(String),
    #[error("malformed grant spec {0:?}")]
    MalformedGrantSpec(String),
}

/// One positive permission: an action class over a resource class, up to a
/// per-action monetary cap in minor units (0 means non-monetary).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grant {
    action: ActionClass,
    resource_class: String,
    monetary_cap: u64,
    market_tag: Option<String>,
}

impl Grant {
    pub fn new(
        action: ActionClass,
        resource_class: impl Into<String>,
        monetary_cap: u64,
    ) -> Result<Self, ScopeError> {
        let resource_class = resource_class.into();
        if resource_class.is_empty() {
            return Err(ScopeError::EmptyResourceClass);
        }
        if action == ActionClass::Read && monetary_cap != 0 {
            return Err(ScopeError::ReadWithCap);
        }
        Ok(Self {
            action,
            resource_class,
            monetary_cap,
            market_tag: None,
        })
    }

    pub fn with_market_tag(mut self, tag: impl Into<String>) -> Self {
        self.market_tag = Some(tag.into());
        self
    }

    pub fn action(&self) -> ActionClass {
        self.action
    }

    pub fn resource_class(&self) -> &str {
        &self.resource_class
    }

    pub fn monetary_cap(&self) -> u64 {
        self.monetary_cap
    }

    pub fn market_tag(&self) -> Option<&str> {
        self.market_tag.as_deref()
    }

    pub fn is_wildcard(&self) -> bool {
        self.resource_class == WILDCARD_RESOURCE
    }

    fn resource_matches(&self, resource: &str) -> bool {
        self.is_wildcard() || self.resource_class == resource
    }

    pub fn dominates(&self, child: &Grant) -> bool {
        self.action.dominates(child.action)
            && self.resource_matches(&child.resource_class)
            && self.monetary_cap >= child.monetary_cap
            && (self.market_tag.is_none() || self.market_tag == child.market_tag)
    }

    pub fn covers(&self, request: &ActionRequest) -> bool {
        self.action.dominates(request.action)
            && self.resource_matches(&request.resource_class)
            && request.amount <= self.monetary_cap
            && (self.market_tag.is_none() || self.market_tag == request.market)
    }
}

impl fmt::Display for Grant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.action, self.resource_class, self.monetary_cap)?;
        if let Some(m) = &self.market_tag {
            write!(f, ":{m}")?;
        }
        Ok(())
    }
}

/// Parses `ACTION:resource:cap[:market]`.
impl FromStr for Grant {
    type Err = ScopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(ScopeError::MalformedGrantSpec(s.to_owned()));
        }
        let action = parts[0].parse()?;
        let cap = parts[2]
            .parse()
            .map_err(|_| ScopeError::MalformedGrantSpec(s.to_owned()))?;
        let grant = Grant::new(action, parts[1], cap)?;
        Ok(match parts.get(3) {
            Some(m) => grant.with_market_tag(*m),
            None => grant,
        })
    }
}

impl CanonicalEncode for Grant {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::GRANT, |e| {
            e.value(&self.action);
            e.str(&self.resource_class);
            e.u64(self.monetary_cap);
            e.option(self.market_tag.as_ref());
        });
    }
}

impl CanonicalDecode for Grant {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::GRANT, |d| {
            let action = d.value()?;
            let resource = d.str()?;
            let cap = d.u64()?;
            let market_tag = d.option::<String>()?;
            let grant = Grant::new(action, resource, cap)
                .map_err(|e| EncodingError::Invalid(e.to_string()))?;
            Ok(Self { market_tag, ..grant })
        })
    }
}

/// A concrete request checked against a scope at verification time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionRequest {
    pub action: ActionClass,
    pub resource_class: String,
    pub amount: u64,
    pub market: Option<String>,
}

impl ActionRequest {
    pub fn new(action: ActionClass, resource_class: impl Into<String>, amount: u64) -> Self {
        Self {
            action,
            resource_class: resource_class.into(),
            amount,
            market: None,
        }
    }
}

/// Parses `ACTION:resource:amount[:market]`.
impl FromStr for ActionRequest {
    type Err = ScopeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) || parts[1].is_empty() {
            return Err(ScopeError::MalformedGrantSpec(s.to_owned()));
        }
        let amount = parts[2]
            .parse()
            .map_err(|_| ScopeError::MalformedGrantSpec(s.to_owned()))?;
        Ok(Self {
            action: parts[0].parse()?,
            resource_class: parts[1].to_owned(),
            amount,
            market: parts.get(3).map(|m| m.to_string()),
        })
    }
}

impl CanonicalEncode for ActionRequest {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::ACTION_REQUEST, |e| {
            e.value(&self.action);
            e.str(&self.resource_class);
            e.u64(self.amount);
            e.option(self.market.as_ref());
        });
    }
}

impl CanonicalDecode for ActionRequest {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::ACTION_REQUEST, |d| {
            Ok(Self {
                action: d.value()?,
                resource_class: d.str()?,
                amount: d.u64()?,
                market: d.option()?,
            })
        })
    }
}

/// A deduplicated set of grants with an expiry. The distinguished EMPTY
/// scope has no grants and `valid_until = 0`, so it sits below every scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scope {
    grants: Vec<Grant>,
    valid_until: Timestamp,
}

impl Scope {
    pub fn new(grants: impl IntoIterator<Item = Grant>, valid_until: Timestamp) -> Result<Self, ScopeError> {
        let mut keyed: Vec<(Vec<u8>, Grant)> = grants
            .into_iter()
            .map(|g| (g.canonical_bytes(), g))
            .collect();
        if keyed.is_empty() {
            return Err(ScopeError::EmptyScope);
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        Ok(Self {
            grants: keyed.into_iter().map(|(_, g)| g).collect(),
            valid_until,
        })
    }

    pub fn empty() -> Self {
        Self {
            grants: Vec::new(),
            valid_until: 0,
        }
    }

    /// Master scope: ADMIN over every resource, per-action cap `cap`, never expiring.
    pub fn master(cap: u64) -> Self {
        let grant = Grant::new(ActionClass::Admin, WILDCARD_RESOURCE, cap).expect("admin grant is valid");
        Self {
            grants: vec![grant],
            valid_until: Timestamp::MAX,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn grants(&self) -> &[Grant] {
        &self.grants
    }

    pub fn valid_until(&self) -> Timestamp {
        self.valid_until
    }

    pub fn has_wildcard(&self) -> bool {
        self.grants.iter().any(Grant::is_wildcard)
    }

    pub fn can_delegate(&self) -> bool {
        self.grants
            .iter()
            .any(|g| matches!(g.action, ActionClass::Delegate | ActionClass::Admin))
    }

    pub fn covers(&self, request: &ActionRequest) -> bool {
        self.grants.iter().any(|g| g.covers(request))
    }

    pub fn dominates(&self, child: &Scope) -> bool {
        scope_dominates(self, child)
    }
}

/// True iff `child` is an attenuation of `parent`: it expires no later and
/// every child grant is dominated by some parent grant.
pub fn scope_dominates(parent: &Scope, child: &Scope) -> bool {
    child.valid_until <= parent.valid_until
        && child
            .grants
            .iter()
            .all(|g| parent.grants.iter().any(|p| p.dominates(g)))
}

impl CanonicalEncode for Scope {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::SCOPE, |e| {
            e.set(self.grants.iter());
            e.u64(self.valid_until);
        });
    }
}

impl CanonicalDecode for Scope {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::SCOPE, |d| {
            let grants: Vec<Grant> = d.set()?;
            let valid_until = d.u64()?;
            if grants.is_empty() && valid_until != 0 {
                return Err(EncodingError::Invalid("empty scope must have valid_until 0".into()));
            }
            Ok(Self { grants, valid_until })
        })
    }
}
