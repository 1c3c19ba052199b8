"""Smoke test for the `acorp` extension module.

Build and run from the repository root:

    cargo build -p acorp-py --release --features extension-module
    cp target/release/libacorp.so python/acorp.so
    python3 python/smoke_test.py
"""

import json

import acorp


def key(n):
    return acorp.Key(n.to_bytes(8, "big") + bytes(23) + b"\x5c")


def main():
    auth = acorp.Authority(compute_price=3, repurchase_batch=20, id_seed=7)
    owner_key, holder, stranger = key(1), key(2), key(3)

    acorp_id, master = auth.register("Dana Park", "id-dana", 5_000, owner_key, 20_000, 500, 900)
    assert master.is_master and master.acorp_id == acorp_id
    assert auth.status(acorp_id) == "ACTIVE"

    token = auth.delegate(master, owner_key, holder, ["TRANSACT:payments:10000"], 2_000, 950)
    assert token.parent_token_id == master.token_id
    assert token.grants == ["TRANSACT:payments:10000"]
    assert acorp.Token.from_bytes(token.to_bytes()).token_id == token.token_id

    assert auth.verify(token, "TRANSACT:payments:9900", 1_000)
    over = auth.verify(token, "TRANSACT:payments:11000", 1_000)
    assert not over and over.reason == "ScopeMismatch", over

    try:
        auth.delegate(token, holder, stranger, ["TRANSACT:payments:1"], 2_000, 960)
        raise AssertionError("delegation without a DELEGATE grant succeeded")
    except acorp.AcorpError as e:
        assert str(e).startswith("NoDelegateRight"), e

    action = auth.execute("transfer", acorp_id, token, holder, "router-vendor", 60, 1_000)
    chain = auth.trace(action)
    assert chain["owner"]["owner_name"] == "Dana Park"
    assert len(chain["tokens"]) == 2
    assert auth.account(acorp_id) == (19_940, 500)

    credential = auth.credential(token.token_id)
    master_record = auth.master_key_record(acorp_id)
    assert acorp.verify_credential(credential, master_record, None, "TRANSACT:payments:10000", 1_000)

    auth.revoke(token.token_id, master, owner_key, "rotated", 1_100)
    revoked = acorp.verify_credential(
        credential, master_record, auth.revocations(acorp_id), "TRANSACT:payments:1", 1_200
    )
    assert revoked.reason == "Revoked", revoked

    assert auth.confiscate(acorp_id, 50_000, "order-1", 1_300) == (19_940, 30_060)
    assert auth.burn(acorp_id, 501, 1_400)
    assert auth.status(acorp_id) == "DEAD"
    held, injected = auth.conservation()
    assert held == injected
    intact, last_seq = auth.integrity()
    assert intact and last_seq > 0

    report = acorp.exfiltration(mandate=True)
    assert report["copy_actions"] == 0
    assert acorp.exfiltration(mandate=False)["copy_actions"] > 0
    metrics = acorp.run_experiment([0, 1], json.dumps({"population": 20, "generations": 5}))
    assert len(metrics["runs"]) == 2 and metrics["coherence_improved"] <= 2

    print("python smoke test passed")


if __name__ == "__main__":
    main()
