use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::governance::encoding::tag;
use crate::governance::{AcorpId, CanonicalDecode, CanonicalEncode, Decoder, Encoder, EncodingError, PublicKey, Scope, Timestamp};

use super::token::{RevocationRecord, Token, TokenId};
use super::verify::MAX_CHAIN_DEPTH;

/// Every issued token and revocation, indexed for chain walks.
#[derive(Debug, Clone, Default)]
pub struct CapabilityStore {
    tokens: BTreeMap<TokenId, Token>,
    revocations: BTreeMap<TokenId, RevocationRecord>,
    children: HashMap<TokenId, Vec<TokenId>>,
    masters: HashMap<AcorpId, TokenId>,
}

impl CapabilityStore {
    pub fn get(&self, id: &TokenId) -> Option<&Token> {
        self.tokens.get(id)
    }

    pub fn contains(&self, id: &TokenId) -> bool {
        self.tokens.contains_key(id)
    }

    pub fn master_of(&self, acorp: &AcorpId) -> Option<&Token> {
        self.masters.get(acorp).and_then(|id| self.tokens.get(id))
    }

    pub fn revocation(&self, id: &TokenId) -> Option<&RevocationRecord> {
        self.revocations.get(id)
    }

    pub fn revocations(&self) -> &BTreeMap<TokenId, RevocationRecord> {
        &self.revocations
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token followed by its ancestors up to the master, or `None` if any link
    /// is missing.
    pub fn chain(&self, id: &TokenId) -> Option<Vec<Token>> {
        let mut chain = Vec::new();
        let mut cursor = Some(*id);
        while let Some(current) = cursor {
            let token = self.tokens.get(&current)?;
            chain.push(token.clone());
            if chain.len() > MAX_CHAIN_DEPTH + 1 {
                return None;
            }
            cursor = token.parent_token_id;
        }
        Some(chain)
    }

    /// Number of delegation links between `id` and its master.
    pub fn depth(&self, id: &TokenId) -> Option<usize> {
        let mut depth = 0;
        let mut token = self.tokens.get(id)?;
        while let Some(parent) = token.parent_token_id {
            token = self.tokens.get(&parent)?;
            depth += 1;
        }
        Some(depth)
    }

    /// True iff `ancestor` lies strictly above `id` in the delegation tree.
    pub fn is_strict_ancestor(&self, ancestor: &TokenId, id: &TokenId) -> bool {
        let mut cursor = self.tokens.get(id).and_then(|t| t.parent_token_id);
        while let Some(current) = cursor {
            if current == *ancestor {
                return true;
            }
            cursor = self.tokens.get(&current).and_then(|t| t.parent_token_id);
        }
        false
    }

    pub fn children(&self, id: &TokenId) -> &[TokenId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn tokens_of<'a>(&'a self, acorp: &'a AcorpId) -> impl Iterator<Item = &'a Token> + 'a {
        self.tokens.values().filter(move |t| &t.acorp_id == acorp)
    }

    pub(crate) fn apply_token(&mut self, token: Token) {
        match token.parent_token_id {
            Some(parent) => {
                let key = (token.issued_at, token.token_id);
                let siblings = self.children.entry(parent).or_default();
                let pos = siblings
                    .partition_point(|id| (self.tokens[id].issued_at, *id) < key);
                siblings.insert(pos, token.token_id);
            }
            None => {
                self.masters.insert(token.acorp_id.clone(), token.token_id);
            }
        }
        self.tokens.insert(token.token_id, token);
    }

    pub(crate) fn apply_revocation(&mut self, record: RevocationRecord) {
        self.revocations.entry(record.token_id).or_insert(record);
    }

    /// Delegation tree rooted at the A-corp's master token.
    pub fn delegation_tree(&self, acorp: &AcorpId) -> Option<DelegationTree> {
        let master = self.masters.get(acorp)?;
        let mut nodes = Vec::new();
        let mut stack = vec![(*master, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            let token = &self.tokens[&id];
            nodes.push(TreeNode {
                token_id: id,
                parent_token_id: token.parent_token_id,
                holder_public_key: token.holder_public_key,
                scope: token.scope.clone(),
                issued_at: token.issued_at,
                depth: depth as u64,
                revoked_at: self.revocations.get(&id).map(|r| r.revoked_at),
            });
            for child in self.children(&id).iter().rev() {
                stack.push((*child, depth + 1));
            }
        }
        Some(DelegationTree {
            acorp_id: acorp.clone(),
            nodes,
        })
    }

    pub(crate) fn encode_state(&self, enc: &mut Encoder) {
        enc.list(self.tokens.values());
        enc.list(self.revocations.values());
    }

    pub(crate) fn decode_state(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        let mut store = CapabilityStore::default();
        let mut tokens: Vec<Token> = dec.list()?;
        // Parents first, so sibling ordering can look up issuance times.
        tokens.sort_by_key(|t| t.issued_at);
        for token in tokens {
            store.apply_token(token);
        }
        for record in dec.list::<RevocationRecord>()? {
            store.apply_revocation(record);
        }
        Ok(store)
    }
}

/// Token metadata in pre-order (parents before children).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationTree {
    pub acorp_id: AcorpId,
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub token_id: TokenId,
    pub parent_token_id: Option<TokenId>,
    pub holder_public_key: PublicKey,
    pub scope: Scope,
    pub issued_at: Timestamp,
    pub depth: u64,
    /// Set only on tokens revoked directly; descendants stay unflagged.
    pub revoked_at: Option<Timestamp>,
}

impl DelegationTree {
    pub fn node(&self, id: &TokenId) -> Option<&TreeNode> {
        self.nodes.iter().find(|n| n.token_id == *id)
    }
}

impl CanonicalEncode for TreeNode {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::TREE_NODE, |e| {
            e.value(&self.token_id);
            e.option(self.parent_token_id.as_ref());
            e.value(&self.holder_public_key);
            e.value(&self.scope);
            e.u64(self.issued_at);
            e.u64(self.depth);
            e.option(self.revoked_at.as_ref());
        });
    }
}

impl CanonicalDecode for TreeNode {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::TREE_NODE, |d| {
            Ok(Self {
                token_id: d.value()?,
                parent_token_id: d.option()?,
                holder_public_key: d.value()?,
                scope: d.value()?,
                issued_at: d.u64()?,
                depth: d.u64()?,
                revoked_at: d.option()?,
            })
        })
    }
}

impl CanonicalEncode for DelegationTree {
    fn encode_into(&self, enc: &mut Encoder) {
        enc.record(tag::DELEGATION_TREE, |e| {
            e.value(&self.acorp_id);
            e.list(self.nodes.iter());
        });
    }
}

impl CanonicalDecode for DelegationTree {
    fn decode_from(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        dec.record(tag::DELEGATION_TREE, |d| {
            Ok(Self {
                acorp_id: d.value()?,
                nodes: d.list()?,
            })
        })
    }
}
