//! Log events. Each mutation of the authority is one event; state is the
//! fold of the event sequence, so replaying the log rebuilds it exactly.

use serde::{Deserialize, Serialize};

use crate::capability::{RevocationRecord, RevocationRequest, Token};
use crate::governance::encoding::tag;
use crate::governance::{
    AcorpId, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError, SignatureEnvelope, Timestamp,
};
use crate::ledger::{ActionRecord, PayoutReport};
use crate::registry::{AcorpRecord, AcorpStatus, TransferPayload};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Event {
    AcorpRegistered {
        record: AcorpRecord,
        master_token: Token,
        initial_capital: u64,
        initial_compute: u64,
    },
    OwnershipTransferred {
        payload: TransferPayload,
        signature: SignatureEnvelope,
        as_of: Timestamp,
    },
    StatusChanged {
        acorp_id: AcorpId,
        status: AcorpStatus,
        legal_order: String,
        as_of: Timestamp,
    },
    TokenDelegated {
        token: Token,
    },
    TokenRevoked {
        record: RevocationRecord,
        request: RevocationRequest,
        signature: SignatureEnvelope,
    },
    ActionExecuted {
        record: ActionRecord,
        /// Internal recipient of a transfer; `None` means money left the system.
        credit_to: Option<AcorpId>,
        money_moved: u64,
        compute_units: u64,
    },
    Confiscated {
        record: ActionRecord,
        collected: u64,
        shortfall: u64,
        legal_order: String,
    },
    LiabilityPaid {
        record: ActionRecord,
        report: PayoutReport,
    },
    ComputeBurned {
        acorp_id: AcorpId,
        /// Bought before burning to cover a deficit.
        cover_units: u64,
        cover_cost: u64,
        burned: u64,
        /// Bought after the balance reached zero.
        refill_units: u64,
        refill_cost: u64,
        as_of: Timestamp,
    },
    Deposited {
        acorp_id: AcorpId,
        source: String,
        amount: u64,
        as_of: Timestamp,
    },
}

impl Event {
    pub fn as_of(&self) -> Timestamp {
        match self {
            Event::AcorpRegistered { record, .. } => record.registered_at,
            Event::OwnershipTransferred { as_of, .. }
            | Event::StatusChanged { as_of, .. }
            | Event::ComputeBurned { as_of, .. }
            | Event::Deposited { as_of, .. } => *as_of,
            Event::TokenDelegated { token } => token.issued_at,
            Event::TokenRevoked { record, .. } => record.revoked_at,
            Event::ActionExecuted { record, .. }
            | Event::Confiscated { record, .. }
            | Event::LiabilityPaid { record, .. } => record.as_of,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Event::AcorpRegistered { .. } => "AcorpRegistered",
            Event::OwnershipTransferred { .. } => "OwnershipTransferred",
            Event::StatusChanged { .. } => "StatusChanged",
            Event::TokenDelegated { .. } => "TokenDelegated",
            Event::TokenRevoked { .. } => "TokenRevoked",
            Event::ActionExecuted { .. } => "ActionExecuted",
            Event::Confiscated { .. } => "Confiscated",
            Event::LiabilityPaid { .. } => "LiabilityPaid",
            Event::ComputeBurned { .. } => "ComputeBurned",
            Event::Deposited { .. } => "Deposited",
        }
    }

    pub fn action_record(&self) -> Option<&ActionRecord> {
        match self {
            Event::ActionExecuted { record, .. }
            | Event::Confiscated { record, .. }
            | Event::LiabilityPaid { record, .. } => Some(record),
            _ => None,
        }
    }
}

impl CanonicalEncode for Event {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::EVENT, |e| match self {
            Event::AcorpRegistered {
                record,
                master_token,
                initial_capital,
                initial_compute,
            } => {
                e.enum_code(0);
                e.value(record);
                e.value(master_token);
                e.u64(*initial_capital);
                e.u64(*initial_compute);
            }
            Event::OwnershipTransferred { payload, signature, as_of } => {
                e.enum_code(1);
                e.value(payload);
                e.value(signature);
                e.u64(*as_of);
            }
            Event::StatusChanged {
                acorp_id,
                status,
                legal_order,
                as_of,
            } => {
                e.enum_code(2);
                e.value(acorp_id);
                e.value(status);
                e.str(legal_order);
                e.u64(*as_of);
            }
            Event::TokenDelegated { token } => {
                e.enum_code(3);
                e.value(token);
            }
            Event::TokenRevoked {
                record,
                request,
                signature,
            } => {
                e.enum_code(4);
                e.value(record);
                e.value(request);
                e.value(signature);
            }
            Event::ActionExecuted {
                record,
                credit_to,
                money_moved,
                compute_units,
            } => {
                e.enum_code(5);
                e.value(record);
                e.option(credit_to.as_ref());
                e.u64(*money_moved);
                e.u64(*compute_units);
            }
            Event::Confiscated {
                record,
                collected,
                shortfall,
                legal_order,
            } => {
                e.enum_code(6);
                e.value(record);
                e.u64(*collected);
                e.u64(*shortfall);
                e.str(legal_order);
            }
            Event::LiabilityPaid { record, report } => {
                e.enum_code(7);
                e.value(record);
                e.value(report);
            }
            Event::ComputeBurned {
                acorp_id,
                cover_units,
                cover_cost,
                burned,
                refill_units,
                refill_cost,
                as_of,
            } => {
                e.enum_code(8);
                e.value(acorp_id);
                for v in [cover_units, cover_cost, burned, refill_units, refill_cost, as_of] {
                    e.u64(*v);
                }
            }
            Event::Deposited {
                acorp_id,
                source,
                amount,
                as_of,
            } => {
                e.enum_code(9);
                e.value(acorp_id);
                e.str(source);
                e.u64(*amount);
                e.u64(*as_of);
            }
        });
    }
}

impl CanonicalDecode for Event {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::EVENT, |d| {
            let kind = d.enum_code()?;
            Ok(match kind {
                0 => Event::AcorpRegistered {
                    record: d.value()?,
                    master_token: d.value()?,
                    initial_capital: d.u64()?,
                    initial_compute: d.u64()?,
                },
                1 => Event::OwnershipTransferred {
                    payload: d.value()?,
                    signature: d.value()?,
                    as_of: d.u64()?,
                },
                2 => Event::StatusChanged {
                    acorp_id: d.value()?,
                    status: d.value()?,
                    legal_order: d.str()?,
                    as_of: d.u64()?,
                },
                3 => Event::TokenDelegated { token: d.value()? },
                4 => Event::TokenRevoked {
                    record: d.value()?,
                    request: d.value()?,
                    signature: d.value()?,
                },
                5 => Event::ActionExecuted {
                    record: d.value()?,
                    credit_to: d.option()?,
                    money_moved: d.u64()?,
                    compute_units: d.u64()?,
                },
                6 => Event::Confiscated {
                    record: d.value()?,
                    collected: d.u64()?,
                    shortfall: d.u64()?,
                    legal_order: d.str()?,
                },
                7 => Event::LiabilityPaid {
                    record: d.value()?,
                    report: d.value()?,
                },
                8 => Event::ComputeBurned {
                    acorp_id: d.value()?,
                    cover_units: d.u64()?,
                    cover_cost: d.u64()?,
                    burned: d.u64()?,
                    refill_units: d.u64()?,
                    refill_cost: d.u64()?,
                    as_of: d.u64()?,
                },
                9 => Event::Deposited {
                    acorp_id: d.value()?,
                    source: d.str()?,
                    amount: d.u64()?,
                    as_of: d.u64()?,
                },
                other => return Err(EncodingError::EncodingUnsupported(other)),
            })
        })
    }
}
