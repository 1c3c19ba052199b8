mod common;

use acorp_core::capability::{verify_credential, FailureReason, RevocationList, Token};
use acorp_core::governance::{ActionClass, ActionRequest, Grant, Scope, SecretKey, WILDCARD_RESOURCE};
use acorp_core::registry::AcorpStatus;
use acorp_core::{Authority, Error};
use common::{authority, key, owner, scope};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn transact(amount: u64) -> ActionRequest {
    ActionRequest::new(ActionClass::Transact, "payments", amount)
}

struct Fixture {
    auth: Authority,
    master_key: SecretKey,
    master: Token,
    child: Token,
}

/// Master {ADMIN, *, 1_000_000}; child {TRANSACT + DELEGATE, payments, 10_000}.
fn capped_purchaser() -> Fixture {
    let mut auth = authority();
    let master_key = key(1);
    let (_, master) = auth
        .register_acorp(owner("O", 0), &master_key, 1_000_000, 1_000, 1)
        .unwrap();
    let child = auth
        .delegate(
            &master,
            &master_key,
            key(2).public_key(),
            scope(&["TRANSACT:payments:10000", "DELEGATE:payments:10000"], 10_000),
            2,
        )
        .unwrap();
    Fixture {
        auth,
        master_key,
        master,
        child,
    }
}

#[test]
fn cap_boundary() {
    let f = capped_purchaser();
    assert!(f.auth.verify(&f.child, Some(&transact(9_900)), 3).allowed);
    assert!(f.auth.verify(&f.child, Some(&transact(10_000)), 3).allowed);
    let over = f.auth.verify(&f.child, Some(&transact(10_001)), 3);
    assert_eq!(over.failure_reason, Some(FailureReason::ScopeMismatch));
    assert_eq!(over.chain_depth, 1);
}

#[test]
fn equal_scope_grandchild_is_allowed_larger_is_escalation() {
    let mut f = capped_purchaser();
    let grand = f
        .auth
        .delegate(&f.child, &key(2), key(3).public_key(), scope(&["TRANSACT:payments:10000"], 10_000), 3)
        .unwrap();
    assert!(f.auth.verify(&grand, Some(&transact(10_000)), 4).allowed);
    assert_eq!(
        f.auth
            .delegate(&f.child, &key(2), key(4).public_key(), scope(&["TRANSACT:payments:20000"], 10_000), 4)
            .unwrap_err(),
        Error::ScopeEscalation
    );
}

#[test]
fn read_only_token_cannot_delegate() {
    let mut f = capped_purchaser();
    let reader = f
        .auth
        .delegate(&f.master, &f.master_key, key(5).public_key(), scope(&["READ:network:0"], 100), 3)
        .unwrap();
    assert_eq!(
        f.auth
            .delegate(&reader, &key(5), key(6).public_key(), scope(&["READ:network:0"], 100), 4)
            .unwrap_err(),
        Error::NoDelegateRight
    );
    // Nor act.
    assert_eq!(
        f.auth.verify(&reader, Some(&transact(1)), 4).failure_reason,
        Some(FailureReason::ScopeMismatch)
    );
}

#[test]
fn wrong_issuer_key_is_rejected() {
    let mut f = capped_purchaser();
    assert_eq!(
        f.auth
            .delegate(&f.child, &key(99), key(3).public_key(), scope(&["TRANSACT:payments:1"], 10), 3)
            .unwrap_err(),
        Error::KeyMismatch
    );
}

#[test]
fn wildcard_below_master_is_rejected() {
    let mut f = capped_purchaser();
    let wildcard = Scope::new([Grant::new(ActionClass::Transact, WILDCARD_RESOURCE, 1).unwrap()], 10).unwrap();
    assert_eq!(
        f.auth
            .delegate(&f.master, &f.master_key, key(3).public_key(), wildcard, 3)
            .unwrap_err(),
        Error::ScopeEscalation
    );
}

#[test]
fn dissolution_stops_all_verification() {
    let mut f = capped_purchaser();
    let id = f.child.acorp_id.clone();
    f.auth.set_status(&id, AcorpStatus::Dissolved, "order-1", 5).unwrap();
    for token in [&f.master, &f.child] {
        assert_eq!(
            f.auth.verify(token, Some(&transact(1)), 5).failure_reason,
            Some(FailureReason::AcorpInactive)
        );
    }
}

/// master → a → b → c → d, plus sibling s of a.
#[test]
fn revocation_cascades_and_needs_an_ancestor() {
    let mut f = capped_purchaser();
    let deleg = |cap: u64| scope(&[&format!("TRANSACT:payments:{cap}"), &format!("DELEGATE:payments:{cap}")], 1_000);
    let a = f.auth.delegate(&f.master, &f.master_key, key(10).public_key(), deleg(5_000), 3).unwrap();
    let b = f.auth.delegate(&a, &key(10), key(11).public_key(), deleg(4_000), 4).unwrap();
    let c = f.auth.delegate(&b, &key(11), key(12).public_key(), deleg(3_000), 5).unwrap();
    let d = f.auth.delegate(&c, &key(12), key(13).public_key(), deleg(2_000), 6).unwrap();
    let s = f.auth.delegate(&f.master, &f.master_key, key(14).public_key(), deleg(5_000), 7).unwrap();

    assert_eq!(
        f.auth.revoke(&a.token_id, &s, &key(14), "sibling", 8).unwrap_err(),
        Error::NotAncestor
    );
    assert_eq!(
        f.auth.revoke(&b.token_id, &c, &key(12), "descendant", 8).unwrap_err(),
        Error::NotAncestor
    );

    let first = f.auth.revoke(&a.token_id, &f.master, &f.master_key, "mid-tree", 10).unwrap();
    assert_eq!(f.auth.verify(&d, Some(&transact(1)), 10).failure_reason, Some(FailureReason::AncestorRevoked));
    assert_eq!(f.auth.verify(&a, None, 10).failure_reason, Some(FailureReason::Revoked));
    assert!(f.auth.verify(&d, Some(&transact(1)), 9).allowed, "revocation is not retroactive");
    assert!(f.auth.verify(&s, Some(&transact(1)), 10).allowed);

    let again = f.auth.revoke(&a.token_id, &f.master, &f.master_key, "again", 11).unwrap();
    assert_eq!(first, again);
    assert_eq!(f.auth.revocation_list(None).len(), 1);

    let tree = f.auth.delegation_tree(&a.acorp_id).unwrap();
    assert_eq!(tree.node(&a.token_id).unwrap().revoked_at, Some(10));
    for t in [&b, &c, &d] {
        let node = tree.node(&t.token_id).unwrap();
        assert_eq!(node.revoked_at, None);
        assert!(!f.auth.verify(t, None, 12).allowed);
    }
    assert_eq!(tree.node(&d.token_id).unwrap().depth, 4);
}

#[test]
fn tree_shape_after_delegations() {
    let mut auth = authority();
    let mk = key(1);
    let (record, master) = auth.register_acorp(owner("O", 0), &mk, 100, 10, 1).unwrap();
    let tree = auth.delegation_tree(&record.id).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(tree.nodes[0].token_id, master.token_id);

    let s = scope(&["TRANSACT:payments:10", "DELEGATE:payments:10"], 50);
    let a = auth.delegate(&master, &mk, key(2).public_key(), s.clone(), 2).unwrap();
    let b = auth.delegate(&a, &key(2), key(3).public_key(), s.clone(), 3).unwrap();
    let c = auth.delegate(&master, &mk, key(4).public_key(), s, 4).unwrap();
    let tree = auth.delegation_tree(&record.id).unwrap();
    assert_eq!(tree.nodes.len(), 4);
    assert_eq!(tree.node(&a.token_id).unwrap().parent_token_id, Some(master.token_id));
    assert_eq!(tree.node(&b.token_id).unwrap().parent_token_id, Some(a.token_id));
    assert_eq!(tree.node(&c.token_id).unwrap().parent_token_id, Some(master.token_id));
    for node in &tree.nodes {
        if let Some(parent) = node.parent_token_id {
            let pos = |id| tree.nodes.iter().position(|n| n.token_id == id).unwrap();
            assert!(pos(parent) < pos(node.token_id), "pre-order");
        }
    }
}

#[test]
fn tampered_token_is_unknown() {
    let f = capped_purchaser();
    let mut forged = f.child.clone();
    forged.scope = scope(&["TRANSACT:payments:1000000"], 10_000);
    let verdict = f.auth.verify(&forged, Some(&transact(50_000)), 3);
    assert_eq!(verdict.failure_reason, Some(FailureReason::BadSignature));
}

// ---- brute-force oracle ---------------------------------------------------

const ACTIONS: [ActionClass; 4] = [ActionClass::Read, ActionClass::Transact, ActionClass::Contract, ActionClass::Delegate];
const RESOURCES: [&str; 2] = ["payments", "compute"];
const CAPS: [u64; 4] = [0, 100, 500, 1_000];
const EXPIRIES: [u64; 3] = [250, 350, 500];

/// A plain copy of a grant for the oracle.
#[derive(Debug, Clone)]
struct G {
    action: ActionClass,
    resource: String,
    cap: u64,
}

fn plain(s: &Scope) -> (Vec<G>, u64) {
    let grants = s
        .grants()
        .iter()
        .map(|g| G {
            action: g.action(),
            resource: g.resource_class().to_owned(),
            cap: g.monetary_cap(),
        })
        .collect();
    (grants, s.valid_until())
}

fn g_dominates(p: &G, c: &G) -> bool {
    (p.action == ActionClass::Admin || p.action == c.action) && (p.resource == "*" || p.resource == c.resource) && p.cap >= c.cap
}

fn oracle_dominates(parent: &Scope, child: &Scope) -> bool {
    let ((pg, pu), (cg, cu)) = (plain(parent), plain(child));
    cu <= pu && cg.iter().all(|c| pg.iter().any(|p| g_dominates(p, c)))
}

fn oracle_covers(s: &Scope, req: &ActionRequest) -> bool {
    plain(s).0.iter().any(|g| {
        (g.action == ActionClass::Admin || g.action == req.action)
            && (g.resource == "*" || g.resource == req.resource_class)
            && req.amount <= g.cap
    })
}

struct Node {
    token: Token,
    key: SecretKey,
    parent: Option<usize>,
    depth: usize,
    revoked_at: Option<u64>,
}

fn random_grant(rng: &mut ChaCha8Rng) -> Grant {
    let action = ACTIONS[rng.random_range(0..ACTIONS.len())];
    let resource = RESOURCES[rng.random_range(0..RESOURCES.len())];
    let cap = if action == ActionClass::Read { 0 } else { CAPS[rng.random_range(0..CAPS.len())] };
    Grant::new(action, resource, cap).unwrap()
}

/// Shrinks a parent grant: ADMIN becomes a concrete class (often DELEGATE),
/// the wildcard a concrete resource, the cap a grid value no larger.
fn derived_grant(rng: &mut ChaCha8Rng, parent: &Grant) -> Grant {
    let action = match parent.action() {
        ActionClass::Admin if rng.random_bool(0.4) => ActionClass::Delegate,
        ActionClass::Admin => ACTIONS[rng.random_range(0..ACTIONS.len())],
        other => other,
    };
    let resource = match parent.resource_class() {
        "*" => RESOURCES[rng.random_range(0..RESOURCES.len())],
        r => r,
    };
    let allowed: Vec<u64> = CAPS.iter().copied().filter(|c| *c <= parent.monetary_cap()).collect();
    let cap = if action == ActionClass::Read { 0 } else { allowed[rng.random_range(0..allowed.len())] };
    Grant::new(action, resource, cap).unwrap()
}

/// Either an attenuation of `parent` or an arbitrary, possibly escalating,
/// request.
fn random_child_scope(rng: &mut ChaCha8Rng, parent: &Scope) -> Scope {
    let n = rng.random_range(1..=3);
    let derive = rng.random_bool(0.6);
    let grants: Vec<Grant> = (0..n)
        .map(|_| {
            if derive {
                let p = &parent.grants()[rng.random_range(0..parent.grants().len())];
                derived_grant(rng, p)
            } else {
                random_grant(rng)
            }
        })
        .collect();
    let until = EXPIRIES[rng.random_range(0..EXPIRIES.len())].min(parent.valid_until());
    Scope::new(grants, until).unwrap()
}

/// Grows a 40-token tree of depth ≤ 4 by random delegation attempts. Every
/// attempt's outcome is predicted by the oracle before it is made.
fn grow_tree(seed: u64) -> (Authority, Vec<Node>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut auth = authority();
    let mk = key(1);
    let (_, master) = auth.register_acorp(owner("O", 0), &mk, 1_000, 100, 0).unwrap();
    let mut nodes = vec![Node {
        token: master,
        key: mk,
        parent: None,
        depth: 0,
        revoked_at: None,
    }];
    let mut t = 1;
    let mut escalations = 0;
    while nodes.len() < 40 {
        let delegating = |n: &Node| {
            n.depth < 4
                && plain(&n.token.scope)
                    .0
                    .iter()
                    .any(|g| matches!(g.action, ActionClass::Delegate | ActionClass::Admin))
        };
        // Mostly pick parents able to delegate; sometimes any shallow node.
        let want_delegating = rng.random_bool(0.85);
        let candidates: Vec<usize> = (0..nodes.len())
            .filter(|&i| nodes[i].depth < 4 && (!want_delegating || delegating(&nodes[i])))
            .collect();
        let p = candidates[rng.random_range(0..candidates.len())];
        t += 1;
        assert!(t < 250, "tree did not fill before the earliest expiry");
        let parent = &nodes[p];
        let requested = random_child_scope(&mut rng, &parent.token.scope);
        let can_delegate = delegating(parent);
        let holder = key(1_000 + t);
        let result = auth.delegate(&parent.token, &parent.key, holder.public_key(), requested.clone(), t);
        match (can_delegate, oracle_dominates(&parent.token.scope, &requested)) {
            (false, _) => assert_eq!(result.unwrap_err(), Error::NoDelegateRight),
            (true, false) => {
                assert_eq!(result.unwrap_err(), Error::ScopeEscalation);
                escalations += 1;
            }
            (true, true) => {
                let token = result.unwrap();
                let depth = parent.depth + 1;
                nodes.push(Node {
                    token,
                    key: holder,
                    parent: Some(p),
                    depth,
                    revoked_at: None,
                });
            }
        }
    }
    assert!(escalations > 0, "the fixture should exercise rejected escalations");

    // Revoke four non-master tokens, each on the master's authority.
    let master = nodes[0].token.clone();
    let master_key = nodes[0].key.clone();
    for (k, at) in [260u64, 280, 300, 320].into_iter().enumerate() {
        let target = 1 + (k * 9 + seed as usize) % (nodes.len() - 1);
        let record = auth
            .revoke(&nodes[target].token.token_id, &master, &master_key, "oracle", at)
            .unwrap();
        nodes[target].revoked_at.get_or_insert(record.revoked_at);
    }
    (auth, nodes)
}

fn oracle_verdict(nodes: &[Node], i: usize, req: &ActionRequest, as_of: u64) -> Option<FailureReason> {
    let mut chain = vec![i];
    while let Some(p) = nodes[*chain.last().unwrap()].parent {
        chain.push(p);
    }
    let revoked = |j: usize| nodes[j].revoked_at.is_some_and(|at| at <= as_of);
    if revoked(i) {
        return Some(FailureReason::Revoked);
    }
    if chain[1..].iter().any(|&j| revoked(j)) {
        return Some(FailureReason::AncestorRevoked);
    }
    if chain.iter().any(|&j| plain(&nodes[j].token.scope).1 < as_of) {
        return Some(FailureReason::Expired);
    }
    if !oracle_covers(&nodes[i].token.scope, req) {
        return Some(FailureReason::ScopeMismatch);
    }
    None
}

#[test]
fn depth_four_tree_matches_brute_force_oracle() {
    for seed in 0..3 {
        let (auth, nodes) = grow_tree(seed);
        assert_eq!(nodes.len(), 40);
        assert!(nodes.iter().all(|n| n.depth <= 4));
        assert!(nodes.iter().any(|n| n.depth >= 3));
        let acorp = nodes[0].token.acorp_id.clone();
        let master_record = auth.master_key_record(&acorp).unwrap();
        let list = RevocationList::new(&auth.revocation_list(Some(&acorp)));
        let mut compared = 0;
        for (i, node) in nodes.iter().enumerate() {
            let credential = auth.credential(&node.token.token_id).unwrap();
            for action in ACTIONS {
                for resource in RESOURCES.iter().chain(["network"].iter()) {
                    for amount in [0, 50, 100, 101, 500, 1_000, 1_001] {
                        let req = ActionRequest::new(action, *resource, amount);
                        for as_of in [100, 255, 265, 290, 310, 330, 350, 351, 500, 501] {
                            let expected = oracle_verdict(&nodes, i, &req, as_of);
                            let online = auth.verify(&node.token, Some(&req), as_of);
                            assert_eq!(online.failure_reason, expected, "token {i} {req:?} at {as_of}");
                            assert_eq!(online.allowed, expected.is_none());
                            assert_eq!(online.chain_depth as usize, node.depth);
                            // Offline checks every signature; sample it.
                            if amount == 100 {
                                let offline = verify_credential(&credential, &master_record, &list, Some(&req), as_of);
                                assert_eq!(offline, online);
                            }
                            compared += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(compared, 40 * 4 * 3 * 7 * 10);
    }
}

// ---- properties ---------------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// A leaf never covers a request the master scope does not, and every
    /// stored token's scope is dominated by its parent's.
    #[test]
    fn attenuation_is_safe(seed in any::<u64>()) {
        let (auth, nodes) = grow_tree(seed);
        for node in &nodes[1..] {
            let parent = &nodes[node.parent.unwrap()].token;
            prop_assert!(oracle_dominates(&parent.scope, &node.token.scope));
            for action in ACTIONS {
                for amount in [0, 1, 999, 1_000, 1_001] {
                    let req = ActionRequest::new(action, "payments", amount);
                    if auth.verify(&node.token, Some(&req), 1).allowed {
                        prop_assert!(oracle_covers(&nodes[0].token.scope, &req));
                    }
                }
            }
        }
    }

    /// Once a descendant fails for revocation it fails at every later time.
    #[test]
    fn revocation_is_monotone_in_time(seed in any::<u64>()) {
        let (auth, nodes) = grow_tree(seed);
        for node in &nodes {
            let mut failed = false;
            for as_of in (0..=520).step_by(5) {
                let v = auth.verify(&node.token, None, as_of);
                let revoked = matches!(v.failure_reason, Some(FailureReason::Revoked | FailureReason::AncestorRevoked));
                prop_assert!(!(failed && v.allowed), "verdict recovered after revocation at {as_of}");
                failed |= revoked;
            }
        }
    }
}
