//! Python bindings. Build with `--features extension-module` and import the
//! resulting shared library as `acorp`.

use acorp_core::audit::IntegrityReport;
use acorp_core::capability::{verify_credential as verify_offline, Credential, RevocationList, RevocationRecord};
use acorp_core::governance::{
    AcorpId, ActionRequest, CanonicalDecode, CanonicalEncode, Grant, OwnerRecord, Scope, SecretKey,
};
use acorp_core::ledger::{BurnOutcome, CorporateAction, LedgerConfig};
use acorp_core::registry::MasterKeyRecord;
use acorp_core::sim::{self, ExfiltrationConfig, SimConfig};
use acorp_core::{capability, AuthorityConfig};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

create_exception!(acorp, AcorpError, PyException, "A refused or failed governance operation.");

fn refused(e: acorp_core::Error) -> PyErr {
    AcorpError::new_err(format!("{}: {e}", e.name()))
}

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn acorp_id(s: &str) -> PyResult<AcorpId> {
    AcorpId::parse(s).map_err(invalid)
}

fn decode<T: CanonicalDecode>(bytes: &[u8]) -> PyResult<T> {
    T::from_canonical_bytes(bytes).map_err(invalid)
}

fn request(spec: Option<&str>) -> PyResult<Option<ActionRequest>> {
    spec.map(|s| s.parse::<ActionRequest>().map_err(invalid)).transpose()
}

/// Any serializable value as a plain Python object, via JSON.
fn to_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(invalid)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// An Ed25519 signing key.
#[pyclass(frozen, module = "acorp")]
struct Key(SecretKey);

#[pymethods]
impl Key {
    #[new]
    fn new(seed: &[u8]) -> PyResult<Self> {
        let bytes: [u8; 32] = seed.try_into().map_err(|_| invalid("a key seed is 32 bytes"))?;
        Ok(Self(SecretKey::from_bytes(bytes)))
    }

    /// Hex-encoded public key.
    #[getter]
    fn public_key(&self) -> String {
        self.0.public_key().to_string()
    }
}

/// A signed capability token.
#[pyclass(frozen, module = "acorp")]
struct Token(capability::Token);

#[pymethods]
impl Token {
    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        decode(data).map(Self)
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.canonical_bytes())
    }

    #[getter]
    fn token_id(&self) -> String {
        self.0.token_id.to_string()
    }

    #[getter]
    fn acorp_id(&self) -> String {
        self.0.acorp_id.to_string()
    }

    #[getter]
    fn parent_token_id(&self) -> Option<String> {
        self.0.parent_token_id.map(|id| id.to_string())
    }

    #[getter]
    fn grants(&self) -> Vec<String> {
        self.0.scope.grants().iter().map(Grant::to_string).collect()
    }

    #[getter]
    fn valid_until(&self) -> u64 {
        self.0.scope.valid_until()
    }

    #[getter]
    fn issued_at(&self) -> u64 {
        self.0.issued_at
    }

    #[getter]
    fn is_master(&self) -> bool {
        self.0.is_master()
    }

    fn __repr__(&self) -> String {
        format!("Token({}, grants={:?})", self.0.token_id, self.grants())
    }
}

#[pyclass(frozen, get_all, module = "acorp")]
struct Verdict {
    allowed: bool,
    /// Failure reason name, `None` when allowed.
    reason: Option<String>,
    chain_depth: u32,
}

impl From<capability::Verdict> for Verdict {
    fn from(v: capability::Verdict) -> Self {
        Self {
            allowed: v.allowed,
            reason: v.failure_reason.map(|r| r.name().to_owned()),
            chain_depth: v.chain_depth,
        }
    }
}

#[pymethods]
impl Verdict {
    fn __bool__(&self) -> bool {
        self.allowed
    }

    fn __repr__(&self) -> String {
        format!(
            "Verdict({}, depth={})",
            self.reason.as_deref().unwrap_or("ALLOWED"),
            self.chain_depth
        )
    }
}

/// An in-memory registry, capability store, ledger and audit log.
#[pyclass(module = "acorp")]
struct Authority(acorp_core::Authority);

#[pymethods]
impl Authority {
    #[new]
    #[pyo3(signature = (compute_price = 1, repurchase_batch = 100, id_seed = 0))]
    fn new(compute_price: u64, repurchase_batch: u64, id_seed: u64) -> PyResult<Self> {
        let config = AuthorityConfig {
            ledger: LedgerConfig {
                compute_price,
                repurchase_batch,
            },
            id_seed,
        };
        acorp_core::Authority::new(config).map(Self).map_err(refused)
    }

    /// Registers an A-corp and returns its id with the master token.
    #[allow(clippy::too_many_arguments)]
    fn register(
        &mut self,
        owner_name: &str,
        owner_id: &str,
        stake: u64,
        master_key: &Key,
        capital: u64,
        compute: u64,
        as_of: u64,
    ) -> PyResult<(String, Token)> {
        let owner = OwnerRecord::new(owner_name, owner_id, stake);
        let (record, token) = self
            .0
            .register_acorp(owner, &master_key.0, capital, compute, as_of)
            .map_err(refused)?;
        Ok((record.id.to_string(), Token(token)))
    }

    /// Issues a child of `parent` to `holder`. Grants are `CLASS:resource:cap`.
    fn delegate(
        &mut self,
        parent: &Token,
        issuer_key: &Key,
        holder: &Key,
        grants: Vec<String>,
        valid_until: u64,
        as_of: u64,
    ) -> PyResult<Token> {
        let grants = grants
            .iter()
            .map(|g| g.parse::<Grant>().map_err(invalid))
            .collect::<PyResult<Vec<_>>>()?;
        let scope = Scope::new(grants, valid_until).map_err(invalid)?;
        self.0
            .delegate(&parent.0, &issuer_key.0, holder.0.public_key(), scope, as_of)
            .map(Token)
            .map_err(refused)
    }

    fn revoke(&mut self, target_token_id: &str, revoker: &Token, key: &Key, reason: &str, as_of: u64) -> PyResult<()> {
        let target = target_token_id.parse().map_err(invalid)?;
        self.0
            .revoke(&target, &revoker.0, &key.0, reason, as_of)
            .map(drop)
            .map_err(refused)
    }

    /// `request` is `CLASS:resource:amount`, or `None` to check validity only.
    #[pyo3(signature = (token, request, as_of))]
    fn verify(&self, token: &Token, request: Option<&str>, as_of: u64) -> PyResult<Verdict> {
        Ok(self.0.verify(&token.0, crate::request(request)?.as_ref(), as_of).into())
    }

    /// Executes `transfer`, `contract` or `compute` and returns the action id.
    #[allow(clippy::too_many_arguments)]
    fn execute(
        &mut self,
        kind: &str,
        acorp_id: &str,
        token: &Token,
        holder_key: &Key,
        counterparty: &str,
        amount: u64,
        as_of: u64,
    ) -> PyResult<String> {
        let action = match kind {
            "transfer" => CorporateAction::Transfer,
            "contract" => CorporateAction::Contract,
            "compute" => CorporateAction::ComputePurchase,
            other => return Err(invalid(format!("unknown action kind {other:?}"))),
        };
        self.0
            .execute_action(action, &crate::acorp_id(acorp_id)?, &token.0, &holder_key.0, counterparty, amount, as_of)
            .map(|record| record.action_id.to_string())
            .map_err(refused)
    }

    fn deposit(&mut self, acorp_id: &str, source: &str, amount: u64, as_of: u64) -> PyResult<()> {
        self.0
            .deposit(&crate::acorp_id(acorp_id)?, source, amount, as_of)
            .map(drop)
            .map_err(refused)
    }

    /// Burns compute; returns `True` if the A-corp died.
    fn burn(&mut self, acorp_id: &str, units: u64, as_of: u64) -> PyResult<bool> {
        self.0
            .burn_compute(&crate::acorp_id(acorp_id)?, units, as_of)
            .map(|o| matches!(o, BurnOutcome::Died(_)))
            .map_err(refused)
    }

    /// Returns `(collected, shortfall)`.
    fn confiscate(&mut self, acorp_id: &str, amount: u64, legal_order: &str, as_of: u64) -> PyResult<(u64, u64)> {
        self.0
            .confiscate(&crate::acorp_id(acorp_id)?, amount, legal_order, as_of)
            .map(|r| (r.collected, r.shortfall))
            .map_err(refused)
    }

    /// Returns `(from_assets, from_owner_stake, unpaid)`.
    fn payout(&mut self, acorp_id: &str, claim: u64, as_of: u64) -> PyResult<(u64, u64, u64)> {
        self.0
            .liability_payout(&crate::acorp_id(acorp_id)?, claim, as_of)
            .map(|r| (r.from_assets, r.from_owner_stake, r.unpaid))
            .map_err(refused)
    }

    /// Returns `(money, compute_credits)`.
    fn account(&self, acorp_id: &str) -> PyResult<(u64, u64)> {
        let account = self.0.account(&crate::acorp_id(acorp_id)?).map_err(refused)?;
        Ok((account.money, account.compute_credits))
    }

    fn status(&self, acorp_id: &str) -> PyResult<String> {
        let record = self.0.lookup_acorp(&crate::acorp_id(acorp_id)?).map_err(refused)?;
        Ok(record.status.to_string())
    }

    /// Both sides of the money conservation identity.
    fn conservation(&self) -> (u128, u128) {
        self.0.ledger().conservation_sides()
    }

    /// The provenance chain of an action as a dict.
    fn trace(&self, py: Python<'_>, action_id: &str) -> PyResult<Py<PyAny>> {
        let id = action_id.parse().map_err(invalid)?;
        to_py(py, &self.0.trace(&id).map_err(refused)?)
    }

    /// The full chain behind a token, canonically encoded.
    fn credential<'py>(&self, py: Python<'py>, token_id: &str) -> PyResult<Bound<'py, PyBytes>> {
        let credential = self.0.credential(&token_id.parse().map_err(invalid)?).map_err(refused)?;
        Ok(PyBytes::new(py, &credential.canonical_bytes()))
    }

    fn master_key_record<'py>(&self, py: Python<'py>, acorp_id: &str) -> PyResult<Bound<'py, PyBytes>> {
        let record = self.0.master_key_record(&crate::acorp_id(acorp_id)?).map_err(refused)?;
        Ok(PyBytes::new(py, &record.canonical_bytes()))
    }

    fn revocations<'py>(&self, py: Python<'py>, acorp_id: &str) -> PyResult<Bound<'py, PyBytes>> {
        let list = self.0.revocation_list(Some(&crate::acorp_id(acorp_id)?));
        Ok(PyBytes::new(py, &list.canonical_bytes()))
    }

    /// Returns `(intact, last_seq)` for the hash-chained log.
    fn integrity(&self) -> (bool, u64) {
        let IntegrityReport { intact, last_seq, .. } = self.0.verify_log_integrity();
        (intact, last_seq)
    }
}

/// Verifies exported credential files without any registry access.
#[pyfunction]
#[pyo3(signature = (credential, master, revocations = None, request = None, as_of = 0))]
fn verify_credential(
    credential: &[u8],
    master: &[u8],
    revocations: Option<&[u8]>,
    request: Option<&str>,
    as_of: u64,
) -> PyResult<Verdict> {
    let credential: Credential = decode(credential)?;
    let master: MasterKeyRecord = decode(master)?;
    let revocations: Vec<RevocationRecord> = revocations.map(decode).transpose()?.unwrap_or_default();
    let request = crate::request(request)?;
    Ok(verify_offline(&credential, &master, &RevocationList::new(&revocations), request.as_ref(), as_of).into())
}

/// Runs the selection experiment. `config` overrides default fields by name.
#[pyfunction]
#[pyo3(signature = (seeds, config = None))]
fn run_experiment(py: Python<'_>, seeds: Vec<u64>, config: Option<&str>) -> PyResult<Py<PyAny>> {
    let config = overridden::<SimConfig>(config)?;
    let metrics = py
        .detach(|| sim::run_experiment(&config, &seeds))
        .map_err(invalid)?;
    to_py(py, &metrics)
}

/// Runs the exfiltration scenario with the verification mandate on or off.
#[pyfunction]
#[pyo3(signature = (mandate = true))]
fn exfiltration(py: Python<'_>, mandate: bool) -> PyResult<Py<PyAny>> {
    let config = ExfiltrationConfig {
        mandate,
        ..ExfiltrationConfig::default()
    };
    to_py(py, &sim::exfiltration_scenario(&config).map_err(invalid)?)
}

/// Defaults merged with a JSON object of overrides.
fn overridden<T: Default + serde::Serialize + serde::de::DeserializeOwned>(json: Option<&str>) -> PyResult<T> {
    let Some(json) = json else {
        return Ok(T::default());
    };
    let mut base = serde_json::to_value(T::default()).map_err(invalid)?;
    let patch: serde_json::Value = serde_json::from_str(json).map_err(invalid)?;
    let (Some(base_map), serde_json::Value::Object(patch)) = (base.as_object_mut(), patch) else {
        return Err(invalid("config overrides must be a JSON object"));
    };
    base_map.extend(patch);
    serde_json::from_value(base).map_err(invalid)
}

#[pymodule]
fn acorp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AcorpError", m.py().get_type::<AcorpError>())?;
    m.add_class::<Key>()?;
    m.add_class::<Token>()?;
    m.add_class::<Verdict>()?;
    m.add_class::<Authority>()?;
    m.add_function(wrap_pyfunction!(verify_credential, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(exfiltration, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_replace_only_named_fields() {
        let config: SimConfig = overridden(Some(r#"{"population": 7}"#)).unwrap();
        assert_eq!(config.population, 7);
        assert_eq!(config.generations, SimConfig::default().generations);
        assert_eq!(overridden::<SimConfig>(None).unwrap(), SimConfig::default());
    }

    #[test]
    fn non_object_overrides_are_rejected() {
        Python::initialize();
        assert!(overridden::<SimConfig>(Some("[1, 2]")).is_err());
        assert!(overridden::<SimConfig>(Some(r#"{"population": "many"}"#)).is_err());
    }
}
