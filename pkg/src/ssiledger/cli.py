"""Command-line surface.

Subcommand groups: wallet and DID management, a file-backed ledger for
offline credential exchange, credential operations, consent records,
challenge-response authentication, the consensus simulator, and the scripted
scenario replays.

Exit codes: 0 ok, 1 usage or configuration error, 2 consensus safety
violation, 3 verification failure, 4 revoked credential, 5 authentication
failure, 6 scenario assertion failure.

The wallet unlock secret comes from the ``WALLET_SECRET`` environment
variable, or an interactive prompt when unset.
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click

from .auth import ChallengeVerifier, issue_challenge
from .canonical import canonical_json
from .credentials import (
    Presentation,
    VerifiableCredential,
    issue,
    present,
    record_consent,
    revoke,
    verify_credential,
    verify_presentation,
)
from .crypto import Digest
from .ledger import (
    Chain,
    LedgerTransaction,
    TxnType,
    build_block,
    read_chain,
    validate_chain,
    write_chain,
)
from .scenarios import SCENARIOS, run_scenario
from .simulation import parse_config, run_simulation, synthetic_did_workload, WorkloadItem
from .state import (
    AttrType,
    CredDefRecord,
    NodeState,
    SchemaRecord,
    apply as apply_txn,
    cred_def_payload,
    did_reg_payload,
    fold_chain,
    get_cred_def,
    get_schema,
    schema_payload,
    verify_txn_signature,
)
from .wallet import Wallet

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SAFETY = 2
EXIT_VERIFY = 3
EXIT_REVOKED = 4
EXIT_AUTH = 5
EXIT_SCENARIO = 6


def _fail(message: str, code: int = EXIT_USAGE) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _write(path: str | Path, value: dict) -> None:
    Path(path).write_text(canonical_json(value) + "\n", encoding="utf-8")


def _read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read {path}: {exc}")
        raise AssertionError  # unreachable


def _secret() -> bytes:
    secret = os.environ.get("WALLET_SECRET")
    if secret is None:
        secret = click.prompt("wallet secret", hide_input=True)
    return secret.encode()


def _open_wallet(path: str) -> Wallet:
    if not Path(path).exists():
        _fail(f"wallet file {path} does not exist")
    wallet = Wallet.load(path)
    try:
        wallet.unlock(_secret())
    except Exception as exc:
        _fail(f"cannot unlock wallet: {exc}", EXIT_AUTH)
    return wallet


def _ledger_state(path: str) -> tuple[Chain, NodeState]:
    try:
        chain = read_chain(path)
    except Exception as exc:
        _fail(f"cannot read ledger {path}: {exc}")
        raise AssertionError
    check = validate_chain(chain)
    if not check.ok:
        _fail(f"ledger {path} is invalid at height {check.height}: {check.reason.value}")
    return chain, fold_chain(chain)


def _now(override: int | None) -> int:
    return override if override is not None else int(time.time())


@click.group()
def main() -> None:
    """Self-sovereign identity over a simulated permissioned ledger."""


# --- wallet ------------------------------------------------------------------


@main.group()
def wallet() -> None:
    """Create, unlock-check, and inspect wallets."""


@wallet.command("create")
@click.option("--wallet", "wallet_path", required=True, type=click.Path())
@click.option("--owner", required=True, help="Owner label stored in the wallet.")
def wallet_create(wallet_path: str, owner: str) -> None:
    if Path(wallet_path).exists():
        _fail(f"{wallet_path} already exists")
    try:
        w = Wallet.create(owner, _secret())
    except Exception as exc:
        _fail(str(exc))
        return
    w.save(wallet_path)
    click.echo(f"created wallet for '{owner}' at {wallet_path}")


@wallet.command("unlock")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
def wallet_unlock(wallet_path: str) -> None:
    """Verify the unlock secret opens the wallet."""
    _open_wallet(wallet_path)
    click.echo("unlocked")


@wallet.command("list")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def wallet_list(wallet_path: str, as_json: bool) -> None:
    """List relations and held credentials (no secrets required)."""
    w = Wallet.load(wallet_path)
    data = w.to_dict()
    listing = {
        "owner": w.owner_label,
        "relations": {
            name: {"did": entry["did"], "peer_did": entry["peer_did"]}
            for name, entry in data["relations"].items()
        },
        "credentials": [
            {
                "cred_def_id": c["credential"]["cred_def_id"],
                "issuer_did": c["credential"]["issuer_did"],
                "subject_did": c["credential"]["subject_did"],
            }
            for c in data["credentials"]
        ],
    }
    if as_json:
        click.echo(canonical_json(listing))
    else:
        click.echo(f"owner: {listing['owner']}")
        for name, entry in listing["relations"].items():
            click.echo(f"  relation {name}: {entry['did']}")
        click.echo(f"  credentials held: {len(listing['credentials'])}")


# --- did ----------------------------------------------------------------------


@main.group()
def did() -> None:
    """Pairwise DID management."""


@did.command("new")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--relation", required=True)
@click.option("--endpoint", default=None)
@click.option("--seed", "seed_hex", default=None, help="Hex seed for reproducible keys.")
@click.option("--txn-out", type=click.Path(), default=None, help="Write a DID_REG transaction.")
@click.option("--now", "now_override", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
def did_new(
    wallet_path: str,
    relation: str,
    endpoint: str | None,
    seed_hex: str | None,
    txn_out: str | None,
    now_override: int | None,
    as_json: bool,
) -> None:
    w = _open_wallet(wallet_path)
    seed = bytes.fromhex(seed_hex) if seed_hex else None
    try:
        new_did, document = w.new_pairwise(relation, seed=seed, endpoint=endpoint)
    except Exception as exc:
        _fail(str(exc))
        return
    w.save(wallet_path)
    if txn_out:
        identity = w.identity(relation)
        txn = LedgerTransaction.create(
            TxnType.DID_REG,
            did_reg_payload(new_did, document),
            author_did=new_did,
            signing_private=identity.signing.private,
            timestamp=_now(now_override),
        )
        _write(txn_out, txn.to_dict())
    payload = {"did": new_did, "relation": relation, "document": document.to_dict()}
    click.echo(canonical_json(payload) if as_json else f"{relation}: {new_did}")


# --- ledger (file-backed, for offline credential exchange) --------------------


@main.group()
def ledger() -> None:
    """A local ledger file: one canonical-JSON block per line."""


@ledger.command("init")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--genesis-timestamp", type=int, default=0)
def ledger_init(out_path: str, genesis_timestamp: int) -> None:
    if Path(out_path).exists():
        _fail(f"{out_path} already exists")
    write_chain(Chain.new(genesis_timestamp), out_path)
    click.echo(f"initialized ledger at {out_path}")


@ledger.command("append")
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--now", "now_override", type=int, default=None)
@click.argument("txn_files", nargs=-1, required=True, type=click.Path(exists=True))
def ledger_append(ledger_path: str, now_override: int | None, txn_files: tuple[str, ...]) -> None:
    """Validate, apply, and commit transactions as one new block."""
    chain, state = _ledger_state(ledger_path)
    accepted = []
    for txn_file in txn_files:
        txn = LedgerTransaction.from_dict(_read_json(txn_file))
        if not txn.id_recomputes() or not verify_txn_signature(state, txn):
            _fail(f"{txn_file}: transaction signature does not verify", EXIT_VERIFY)
        state, rejection = apply_txn(state, txn)
        if rejection is not None:
            _fail(f"{txn_file}: rejected ({rejection.value})", EXIT_VERIFY)
        accepted.append(txn)
    block = build_block(chain.head, accepted, _now(now_override))
    write_chain(chain.append(block), ledger_path)
    click.echo(f"appended block {block.height} with {len(accepted)} txn(s)")


@ledger.command("state")
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
def ledger_state(ledger_path: str, out_path: str | None) -> None:
    _, state = _ledger_state(ledger_path)
    rendered = canonical_json(state.to_dict())
    if out_path:
        Path(out_path).write_text(rendered + "\n", encoding="utf-8")
        click.echo(f"wrote state to {out_path}")
    else:
        click.echo(rendered)


# --- schema / credential definitions ------------------------------------------


@main.group()
def schema() -> None:
    """Publish attribute schemas."""


@schema.command("publish")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--relation", required=True)
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--name", "schema_name", required=True)
@click.option("--version", default="1.0")
@click.option("--attr", "attrs", multiple=True, required=True, help="name:type, e.g. degree:string")
@click.option("--now", "now_override", type=int, default=None)
def schema_publish(
    wallet_path: str,
    relation: str,
    ledger_path: str,
    schema_name: str,
    version: str,
    attrs: tuple[str, ...],
    now_override: int | None,
) -> None:
    w = _open_wallet(wallet_path)
    identity = w.identity(relation)
    try:
        parsed = [(a.split(":", 1)[0], AttrType(a.split(":", 1)[1])) for a in attrs]
        record = SchemaRecord.create(schema_name, version, parsed)
    except (IndexError, ValueError) as exc:
        _fail(f"bad --attr: {exc}")
        return
    txn = LedgerTransaction.create(
        TxnType.SCHEMA,
        schema_payload(record),
        author_did=identity.did,
        signing_private=identity.signing.private,
        timestamp=_now(now_override),
    )
    _append_via_state(ledger_path, txn, now_override)
    click.echo(f"schema_id: {record.schema_id.hex}")


@main.group()
def creddef() -> None:
    """Publish credential definitions binding a schema to an issuer key."""


@creddef.command("publish")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--relation", required=True)
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--schema-id", "schema_id_hex", required=True)
@click.option("--now", "now_override", type=int, default=None)
def creddef_publish(
    wallet_path: str,
    relation: str,
    ledger_path: str,
    schema_id_hex: str,
    now_override: int | None,
) -> None:
    w = _open_wallet(wallet_path)
    identity = w.identity(relation)
    _, state = _ledger_state(ledger_path)
    schema_record = get_schema(state, Digest.from_hex(schema_id_hex))
    if schema_record is None:
        _fail(f"schema {schema_id_hex} not on ledger")
    record = CredDefRecord.create(
        schema_record.schema_id, identity.did, identity.signing.public
    )
    txn = LedgerTransaction.create(
        TxnType.CRED_DEF,
        cred_def_payload(record),
        author_did=identity.did,
        signing_private=identity.signing.private,
        timestamp=_now(now_override),
    )
    _append_via_state(ledger_path, txn, now_override)
    click.echo(f"cred_def_id: {record.cred_def_id.hex}")


def _append_via_state(ledger_path: str, txn: LedgerTransaction, now_override: int | None) -> None:
    chain, state = _ledger_state(ledger_path)
    if not verify_txn_signature(state, txn):
        _fail("transaction signature does not verify against the ledger", EXIT_VERIFY)
    state, rejection = apply_txn(state, txn)
    if rejection is not None:
        _fail(f"rejected ({rejection.value})", EXIT_VERIFY)
    block = build_block(chain.head, [txn], _now(now_override))
    write_chain(chain.append(block), ledger_path)


# --- credentials ----------------------------------------------------------------


@main.group()
def cred() -> None:
    """Issue, verify, revoke and present credentials."""


def _typed_value(raw: str, attr_type: AttrType):
    if attr_type == AttrType.INTEGER:
        return int(raw)
    if attr_type == AttrType.BOOLEAN:
        if raw.lower() not in ("true", "false"):
            raise ValueError(f"{raw!r} is not a boolean")
        return raw.lower() == "true"
    return raw


@cred.command("issue")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--relation", required=True)
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--cred-def", "cred_def_hex", required=True)
@click.option("--subject", "subject_did", required=True)
@click.option("--attr", "attrs", multiple=True, required=True, help="name=value")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--now", "now_override", type=int, default=None)
def cred_issue(
    wallet_path: str,
    relation: str,
    ledger_path: str,
    cred_def_hex: str,
    subject_did: str,
    attrs: tuple[str, ...],
    out_path: str,
    now_override: int | None,
) -> None:
    w = _open_wallet(wallet_path)
    identity = w.identity(relation)
    _, state = _ledger_state(ledger_path)
    cred_def = get_cred_def(state, Digest.from_hex(cred_def_hex))
    if cred_def is None:
        _fail(f"cred def {cred_def_hex} not on ledger")
    if cred_def.issuer_did != identity.did:
        _fail(f"wallet relation '{relation}' is not the issuer of this cred def")
    schema_record = get_schema(state, cred_def.schema_id)
    types = schema_record.attribute_types()
    attributes = {}
    try:
        for item in attrs:
            name, raw = item.split("=", 1)
            if name not in types:
                _fail(f"attribute {name!r} is not in schema '{schema_record.name}'")
            attributes[name] = _typed_value(raw, types[name])
    except ValueError as exc:
        _fail(f"bad --attr: {exc}")
    try:
        credential = issue(
            identity.signing.private,
            cred_def,
            schema_record,
            subject_did,
            attributes,
            _now(now_override),
        )
    except Exception as exc:
        _fail(str(exc), EXIT_VERIFY)
        return
    _write(out_path, credential.to_dict())
    click.echo(f"credential_hash: {credential.credential_hash.hex}")


@cred.command("verify")
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--audience", default=None, help="Expected audience DID (presentations).")
@click.option("--now", "now_override", type=int, default=None)
@click.option("--json", "as_json", is_flag=True)
@click.argument("record_file", type=click.Path(exists=True))
def cred_verify(
    ledger_path: str,
    audience: str | None,
    now_override: int | None,
    as_json: bool,
    record_file: str,
) -> None:
    """Verify a credential or presentation file against a ledger."""
    _, state = _ledger_state(ledger_path)
    data = _read_json(record_file)
    try:
        if "holder_signature" in data:
            result = verify_presentation(
                Presentation.from_dict(data), state, _now(now_override), expected_audience=audience
            )
        else:
            result = verify_credential(
                VerifiableCredential.from_dict(data), state, _now(now_override)
            )
    except (KeyError, ValueError, TypeError) as exc:
        result = None
        _fail(f"unreadable record: {exc}", EXIT_VERIFY)
    output = {"valid": result.valid, "reason": result.reason}
    click.echo(canonical_json(output) if as_json else ("valid" if result.valid else f"invalid: {result.reason}"))
    if result.valid:
        sys.exit(EXIT_OK)
    sys.exit(EXIT_REVOKED if result.reason == "Revoked" else EXIT_VERIFY)


@cred.command("revoke")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--relation", required=True)
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--now", "now_override", type=int, default=None)
@click.argument("cred_file", type=click.Path(exists=True))
def cred_revoke(
    wallet_path: str,
    relation: str,
    ledger_path: str,
    now_override: int | None,
    cred_file: str,
) -> None:
    """Publish a revocation entry for a credential you issued."""
    w = _open_wallet(wallet_path)
    identity = w.identity(relation)
    credential = VerifiableCredential.from_dict(_read_json(cred_file))
    _, state = _ledger_state(ledger_path)
    cred_def = get_cred_def(state, credential.cred_def_id)
    if cred_def is None:
        _fail("credential definition not on ledger", EXIT_VERIFY)
    try:
        txn = revoke(
            identity.did,
            identity.signing.private,
            cred_def,
            credential.credential_hash,
            _now(now_override),
        )
    except Exception as exc:
        _fail(str(exc), EXIT_VERIFY)
        return
    _append_via_state(ledger_path, txn, now_override)
    click.echo(f"revoked {credential.credential_hash.hex}")


@cred.command("present")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--relation", required=True)
@click.option("--audience", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--now", "now_override", type=int, default=None)
@click.argument("cred_files", nargs=-1, required=True, type=click.Path(exists=True))
def cred_present(
    wallet_path: str,
    relation: str,
    audience: str,
    out_path: str,
    now_override: int | None,
    cred_files: tuple[str, ...],
) -> None:
    w = _open_wallet(wallet_path)
    credentials = [VerifiableCredential.from_dict(_read_json(f)) for f in cred_files]
    try:
        presentation = present(w, relation, credentials, audience, _now(now_override))
    except Exception as exc:
        _fail(str(exc), EXIT_VERIFY)
        return
    _write(out_path, presentation.to_dict())
    click.echo(f"presentation of {len(credentials)} credential(s) written to {out_path}")


# --- consent --------------------------------------------------------------------


@main.group()
def consent() -> None:
    """Dual-signed consent receipts; only their hash goes on ledger."""


@consent.command("record")
@click.option("--owner-wallet", required=True, type=click.Path(exists=True))
@click.option("--owner-relation", required=True)
@click.option("--verifier-wallet", required=True, type=click.Path(exists=True))
@click.option("--verifier-relation", required=True)
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--shared", "shared_attrs", multiple=True, required=True, help="name:type")
@click.option("--purpose", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--now", "now_override", type=int, default=None)
def consent_record(
    owner_wallet: str,
    owner_relation: str,
    verifier_wallet: str,
    verifier_relation: str,
    ledger_path: str,
    shared_attrs: tuple[str, ...],
    purpose: str,
    out_path: str,
    now_override: int | None,
) -> None:
    owner = _open_wallet(owner_wallet)
    verifier = _open_wallet(verifier_wallet)
    verifier_identity = verifier.identity(verifier_relation)
    try:
        shared = [(a.split(":", 1)[0], AttrType(a.split(":", 1)[1])) for a in shared_attrs]
    except (IndexError, ValueError) as exc:
        _fail(f"bad --shared: {exc}")
        return
    receipt, txn = record_consent(
        owner,
        owner_relation,
        verifier_identity.did,
        verifier_identity.signing.private,
        shared,
        purpose,
        _now(now_override),
    )
    _append_via_state(ledger_path, txn, now_override)
    _write(out_path, receipt.to_dict())
    click.echo(f"receipt_hash: {receipt.receipt_hash().hex}")


# --- auth -----------------------------------------------------------------------


@main.group()
def auth() -> None:
    """Challenge-response authentication."""


@auth.command("challenge")
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True))
@click.option("--did", "subject_did", required=True)
@click.option("--ttl", type=int, default=120)
@click.option("--out", "out_path", required=True, type=click.Path(), help="Challenge to send.")
@click.option("--state", "state_path", required=True, type=click.Path(), help="Verifier-side state.")
@click.option("--now", "now_override", type=int, default=None)
def auth_challenge(
    ledger_path: str,
    subject_did: str,
    ttl: int,
    out_path: str,
    state_path: str,
    now_override: int | None,
) -> None:
    from .state import resolve_did

    _, state = _ledger_state(ledger_path)
    document = resolve_did(state, subject_did)
    if document is None:
        _fail(f"{subject_did} not on ledger")
    try:
        challenge = issue_challenge(
            document.agreement_key, ttl=ttl, now=_now(now_override), subject_did=subject_did
        )
    except ValueError as exc:
        _fail(str(exc))
        return
    _write(out_path, {"subject_did": subject_did, "ciphertext": challenge.ciphertext.hex()})
    _write(
        state_path,
        {
            "subject_did": subject_did,
            "nonce": challenge.nonce.hex(),
            "issued_at": challenge.issued_at,
            "ttl": challenge.ttl,
            "consumed": False,
        },
    )
    click.echo(f"challenge written to {out_path}")


@auth.command("respond")
@click.option("--wallet", "wallet_path", required=True, type=click.Path(exists=True))
@click.option("--relation", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.argument("challenge_file", type=click.Path(exists=True))
def auth_respond(wallet_path: str, relation: str, out_path: str, challenge_file: str) -> None:
    w = _open_wallet(wallet_path)
    data = _read_json(challenge_file)
    try:
        nonce = w.respond_challenge(relation, bytes.fromhex(data["ciphertext"]))
    except Exception as exc:
        _fail(str(exc), EXIT_AUTH)
        return
    _write(out_path, {"response": nonce.hex()})
    click.echo(f"response written to {out_path}")


@auth.command("check")
@click.option("--state", "state_path", required=True, type=click.Path(exists=True))
@click.option("--now", "now_override", type=int, default=None)
@click.argument("response_file", type=click.Path(exists=True))
def auth_check(state_path: str, now_override: int | None, response_file: str) -> None:
    state = _read_json(state_path)
    response = bytes.fromhex(_read_json(response_file)["response"])
    verifier = ChallengeVerifier()
    if state.get("consumed"):
        verifier.consumed.add(bytes.fromhex(state["nonce"]))
    else:
        from .auth import Challenge

        verifier.pending[bytes.fromhex(state["nonce"])] = Challenge(
            nonce=bytes.fromhex(state["nonce"]),
            issued_at=state["issued_at"],
            ttl=state["ttl"],
            ciphertext=b"",
            subject_did=state.get("subject_did", ""),
        )
    result = verifier.check(response, _now(now_override))
    state["consumed"] = True
    _write(state_path, state)
    if result.authenticated:
        click.echo("authenticated")
        sys.exit(EXIT_OK)
    click.echo(f"rejected: {result.reason}")
    sys.exit(EXIT_AUTH)


# --- sim ------------------------------------------------------------------------


@main.group()
def sim() -> None:
    """Deterministic consensus simulation."""


@sim.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--workload", "workload_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--events", "events_path", type=click.Path(), default=None)
@click.option("--horizon", type=int, default=10_000, help="Simulated ms before timers stop.")
def sim_run(
    config_path: str,
    seed: int,
    workload_path: str,
    out_path: str,
    events_path: str | None,
    horizon: int,
) -> None:
    try:
        config, net_config, faults = parse_config(_read_json(config_path))
    except ValueError as exc:
        _fail(str(exc))
        return
    workload_raw = _read_json(workload_path)
    if "synthetic_registrations" in workload_raw:
        params = workload_raw["synthetic_registrations"]
        workload = synthetic_did_workload(
            count=params.get("count", 50),
            seed=params.get("seed", seed),
            start=params.get("start_ms", 10),
            interval=params.get("interval_ms", 40),
            node=params.get("node", 0),
        )
    elif "txns" in workload_raw:
        workload = [
            WorkloadItem(
                time=item["time"],
                node=item.get("node", 0),
                txn=LedgerTransaction.from_dict(item["txn"]),
            )
            for item in workload_raw["txns"]
        ]
    else:
        _fail("workload file needs 'synthetic_registrations' or 'txns'")
        return
    report, simulation = run_simulation(config, net_config, faults, workload, horizon, seed)
    Path(out_path).write_text(report.to_json() + "\n", encoding="utf-8")
    if events_path:
        simulation.write_events(events_path)
    click.echo(
        f"committed {report.commit_count} batches; "
        f"honest chains agree: {report.honest_chains_agree}; "
        f"instance changes: {report.instance_change_count}"
    )
    if report.safety_violations > 0 or not report.honest_chains_agree:
        click.echo("CONSENSUS SAFETY VIOLATION DETECTED", err=True)
        sys.exit(EXIT_SAFETY)


# --- scenario ---------------------------------------------------------------------


@main.group()
def scenario() -> None:
    """Scripted end-to-end replays of the identity use cases."""


@scenario.command("run")
@click.argument("name", type=click.Choice(SCENARIOS))
@click.option("--seed", type=int, default=1)
@click.option("--json", "as_json", is_flag=True, help="Print the canonical transcript.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Artifact directory.")
@click.option("--skip-consent", is_flag=True, help="Test hook: owner declines consent.")
def scenario_run(name: str, seed: int, as_json: bool, out_dir: str | None, skip_consent: bool) -> None:
    result = run_scenario(name, seed=seed, consent=not skip_consent)
    transcript = result.transcript()
    if as_json:
        click.echo(canonical_json(transcript))
    else:
        for step in result.steps:
            mark = "ok " if step["outcome"] == "ok" else "FAIL"
            click.echo(f"[{step['n']:>2}] t={step['time']:>5}ms {mark} {step['actor']}: {step['action']}")
        summary = transcript["summary"]
        click.echo(
            f"scenario {name}: {'PASS' if result.ok else 'FAIL'} "
            f"(ledger txns {summary['ledger_txns']}, consent proofs {summary['consent_proofs']})"
        )
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "transcript.json").write_text(canonical_json(transcript) + "\n", encoding="utf-8")
        write_chain(result.sim.nodes[0].chain, out / "net.ledger.jsonl")
        result.sim.nodes[0].state.dump(out / "net.state.json")
        result.sim.write_events(out / "net.events.jsonl")
        for i, receipt in enumerate(result.receipts):
            _write(out / f"consent-{i}.receipt.json", receipt.to_dict())
    if not result.ok:
        sys.exit(EXIT_SCENARIO)


if __name__ == "__main__":
    main()
