"""Scenario files: validation, phase-ordered execution, canonical reports.

A scenario is a JSON document with a schema id and the fixed top-level keys
(paillier, topology, kdcs, users, records, attempts, revocations), all
optional. Execution runs aggregate -> authority setup -> key issuance ->
encrypt -> attempts -> revocations -> re-attempts and produces one report
dictionary whose canonical rendering is byte-stable for a fixed seed: sorted
keys, fixed separators, no wall-clock fields.

There is intentionally no scenario syntax for repository-side decryption;
the store only ever handles ciphertexts and row updates.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Any, Mapping

from .. import abe
from ..aggregation import (
    AggregationTopology,
    AttributeTag,
    TopologyNode,
    rtu_open,
    run_pipeline,
)
from ..lsss import compile_lsss, parse_policy, tree_attributes
from ..paillier import paillier_keygen
from ..pairing import PairingContext, ctx_new
from .registry import AttributeRegistry, Repository

SCHEMA_ID = "gridseal-scenario/1"
REPORT_SCHEMA_ID = "gridseal-report/1"

_TOP_KEYS = ("paillier", "topology", "kdcs", "users", "records", "attempts", "revocations")

# Warn once the largest possible per-tag sum is within ten bits of the modulus.
_HEADROOM_SHIFT = 10


class ScenarioError(ValueError):
    """Validation failure; `path` points at the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise ScenarioError(path, message)


def _check_keys(obj: Mapping[str, Any], allowed: tuple[str, ...], path: str) -> None:
    for key in obj:
        _require(key in allowed, f"{path}.{key}" if path else key, "unknown field")


def load_scenario(source: str | Path | Mapping[str, Any]) -> dict[str, Any]:
    """Read and validate a scenario from a path or an already-parsed mapping."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    else:
        document = dict(source)
    validate_scenario(document)
    return document


def validate_scenario(document: Mapping[str, Any]) -> None:
    _require(isinstance(document, Mapping), "", "scenario must be an object")
    _check_keys(document, ("schema",) + _TOP_KEYS, "")
    _require(document.get("schema") == SCHEMA_ID, "schema",
             f"expected {SCHEMA_ID!r}")

    paillier = document.get("paillier")
    if paillier is not None:
        _check_keys(paillier, ("bits", "q1", "q2"), "paillier")
        if "bits" in paillier:
            _require("q1" not in paillier and "q2" not in paillier,
                     "paillier", "give bits or injected primes, not both")
            _require(isinstance(paillier["bits"], int) and paillier["bits"] >= 16,
                     "paillier.bits", "need an integer of at least 16")
        else:
            _require("q1" in paillier and "q2" in paillier,
                     "paillier", "need bits or both q1 and q2")

    topology = document.get("topology")
    if topology is not None:
        _require(paillier is not None, "topology", "aggregation needs paillier parameters")
        _check_keys(topology, ("nodes", "readings"), "topology")
        nodes = topology.get("nodes", [])
        _require(isinstance(nodes, list) and nodes, "topology.nodes", "need a node list")
        for i, node in enumerate(nodes):
            _check_keys(node, ("id", "role", "parent"), f"topology.nodes[{i}]")
            _require(isinstance(node.get("id"), str), f"topology.nodes[{i}].id", "need a string id")
            _require(node.get("role") in ("HAN", "BAN", "NAN"),
                     f"topology.nodes[{i}].role", "role must be HAN, BAN or NAN")
        try:
            built = AggregationTopology([
                TopologyNode(n["id"], n["role"], n.get("parent")) for n in nodes])
        except ValueError as exc:
            raise ScenarioError("topology.nodes", str(exc)) from None
        readings = topology.get("readings", [])
        leaf_ids = set(built.leaves())
        seen_nodes = set()
        for i, reading in enumerate(readings):
            _check_keys(reading, ("node", "tag", "value"), f"topology.readings[{i}]")
            node_id = reading.get("node")
            _require(node_id in built.nodes, f"topology.readings[{i}].node",
                     f"unknown node {node_id!r}")
            _require(node_id in leaf_ids, f"topology.readings[{i}].node",
                     "readings attach to HAN leaves")
            _require(node_id not in seen_nodes, f"topology.readings[{i}].node",
                     "one reading per meter")
            seen_nodes.add(node_id)
            tag = reading.get("tag")
            _require(isinstance(tag, list) and tag and all(isinstance(t, str) for t in tag),
                     f"topology.readings[{i}].tag", "tag must be a non-empty string list")
            _require(isinstance(reading.get("value"), int) and reading["value"] >= 0,
                     f"topology.readings[{i}].value", "value must be a non-negative integer")

    registry = AttributeRegistry(universe=[])
    kdc_ids = set()
    for i, kdc in enumerate(document.get("kdcs", []) or []):
        _check_keys(kdc, ("id", "attributes"), f"kdcs[{i}]")
        kdc_id = kdc.get("id")
        _require(isinstance(kdc_id, str) and kdc_id, f"kdcs[{i}].id", "need a string id")
        _require(kdc_id not in kdc_ids, f"kdcs[{i}].id", "duplicate authority id")
        kdc_ids.add(kdc_id)
        attrs = kdc.get("attributes")
        _require(isinstance(attrs, list) and attrs, f"kdcs[{i}].attributes",
                 "need a non-empty attribute list")
        try:
            registry.add_attributes(attrs)
            registry.assign(kdc_id, attrs)
        except ValueError as exc:
            raise ScenarioError(f"kdcs[{i}].attributes", str(exc)) from None

    user_ids = set()
    for i, user in enumerate(document.get("users", []) or []):
        _check_keys(user, ("id", "attributes"), f"users[{i}]")
        user_id = user.get("id")
        _require(isinstance(user_id, str) and user_id, f"users[{i}].id", "need a string id")
        _require(user_id not in user_ids, f"users[{i}].id", "duplicate user id")
        user_ids.add(user_id)
        for j, attribute in enumerate(user.get("attributes", [])):
            _require(registry.owner(attribute) is not None,
                     f"users[{i}].attributes[{j}]",
                     f"attribute {attribute!r} is not owned by any authority")

    record_ids = set()
    for i, record in enumerate(document.get("records", []) or []):
        _check_keys(record, ("id", "policy", "payload"), f"records[{i}]")
        record_id = record.get("id")
        _require(isinstance(record_id, str) and record_id, f"records[{i}].id", "need a string id")
        _require(record_id not in record_ids, f"records[{i}].id", "duplicate record id")
        record_ids.add(record_id)
        policy = record.get("policy")
        _require(isinstance(policy, str), f"records[{i}].policy", "need a policy string")
        try:
            tree = parse_policy(policy)
        except ValueError as exc:
            raise ScenarioError(f"records[{i}].policy", str(exc)) from None
        for attribute in tree_attributes(tree):
            _require(registry.owner(attribute) is not None, f"records[{i}].policy",
                     f"attribute {attribute!r} is not owned by any authority")
        _require(isinstance(record.get("payload"), str), f"records[{i}].payload",
                 "need a string payload")

    for i, attempt in enumerate(document.get("attempts", []) or []):
        _check_keys(attempt, ("user", "record"), f"attempts[{i}]")
        _require(attempt.get("user") in user_ids, f"attempts[{i}].user",
                 f"unknown user {attempt.get('user')!r}")
        _require(attempt.get("record") in record_ids, f"attempts[{i}].record",
                 f"unknown record {attempt.get('record')!r}")

    for i, revocation in enumerate(document.get("revocations", []) or []):
        _check_keys(revocation, ("revoke",), f"revocations[{i}]")
        revoked = revocation.get("revoke")
        _require(isinstance(revoked, list) and revoked, f"revocations[{i}].revoke",
                 "need a non-empty user list")
        for j, user_id in enumerate(revoked):
            _require(user_id in user_ids, f"revocations[{i}].revoke[{j}]",
                     f"unknown user {user_id!r}")


def _aggregation_phase(document, rng) -> dict[str, Any]:
    config = document["paillier"]
    if "bits" in config:
        pk, sk = paillier_keygen(config["bits"], rng=rng)
    else:
        pk, sk = paillier_keygen(rng=rng, q1=config["q1"], q2=config["q2"])
    section: dict[str, Any] = {"modulus_bits": pk.bit_length, "tags": [], "meters": 0,
                               "warnings": []}
    topology_doc = document.get("topology")
    if topology_doc is None:
        return section
    topology = AggregationTopology([
        TopologyNode(n["id"], n["role"], n.get("parent"))
        for n in topology_doc["nodes"]])
    readings = {
        r["node"]: (AttributeTag(r["tag"]), r["value"])
        for r in topology_doc.get("readings", [])
    }
    section["meters"] = len(readings)
    if readings:
        worst = max(v for _, v in readings.values()) * len(readings)
        if worst.bit_length() >= max(pk.bit_length - _HEADROOM_SHIFT, 1):
            section["warnings"].append(
                "aggregate headroom: max reading times meter count approaches the modulus")
    packets = run_pipeline(topology, readings, pk, rng)
    for packet in packets:
        tag, total = rtu_open(sk, pk, packet)
        section["tags"].append({"tag": list(tag.attributes), "sum": total})
    return section


def run_scenario(
    document: Mapping[str, Any],
    seed: int | None = None,
    backend: str = "reference",
    q: int | None = None,
    q_bits: int | None = None,
    hash_name: str = "sha256",
) -> dict[str, Any]:
    """Execute a validated scenario and return the report dictionary."""
    validate_scenario(document)
    rng: random.Random = random.Random(seed) if seed is not None else random.SystemRandom()
    report: dict[str, Any] = {
        "schema": REPORT_SCHEMA_ID,
        "seed": seed,
        "aggregation": None,
        "kdcs": [],
        "users": [],
        "records": [],
        "attempts": [],
        "revocations": [],
        "reattempts": [],
        "totals": {"pairings": 0, "scalar_muls": 0},
        "error": None,
    }

    phase = "aggregate"
    try:
        if document.get("paillier") is not None:
            report["aggregation"] = _aggregation_phase(document, rng)

        needs_ctx = bool(document.get("kdcs") or document.get("records"))
        ctx: PairingContext | None = None
        if needs_ctx:
            ctx = ctx_new(backend=backend, q=q, q_bits=q_bits, rng=rng, hash_name=hash_name)

        phase = "kdc-setup"
        registry = AttributeRegistry(universe=[])
        authorities: dict[str, abe.KdcKeyring] = {}
        shares: dict[str, abe.PublicShare] = {}
        for entry in document.get("kdcs", []) or []:
            registry.add_attributes(entry["attributes"])
            registry.assign(entry["id"], entry["attributes"])
            keyring = abe.kdc_setup(ctx, entry["id"], entry["attributes"], rng)
            authorities[entry["id"]] = keyring
            shares.update(keyring.shares)
            report["kdcs"].append({"id": entry["id"],
                                   "attributes": list(entry["attributes"])})

        phase = "issue-keys"
        users: dict[str, abe.UserKeyring] = {}
        for entry in document.get("users", []) or []:
            keyring = abe.UserKeyring(entry["id"])
            for attribute in entry.get("attributes", []):
                authority = authorities[registry.owner(attribute)]
                element = abe.issue_key(authority, ctx, entry["id"], attribute)
                keyring.add(attribute, element, ctx, shares[attribute])
            users[entry["id"]] = keyring
            report["users"].append({"id": entry["id"],
                                    "attributes": sorted(keyring.attributes)})

        phase = "encrypt"
        repository = Repository()
        states: dict[str, abe.EncryptionState] = {}
        for entry in document.get("records", []) or []:
            program = compile_lsss(parse_policy(entry["policy"]))
            with ctx.measure() as window:
                ciphertext, state = abe.abe_encrypt(
                    ctx, shares, program, entry["payload"].encode("utf-8"), rng)
            repository.store(entry["id"], ciphertext)
            states[entry["id"]] = state
            report["records"].append({
                "id": entry["id"],
                "rows": program.n,
                "columns": program.h,
                "pairings": window.pairings,
                "scalar_muls": window.scalar_muls,
            })

        def evaluate_attempts(into: list) -> None:
            for entry in document.get("attempts", []) or []:
                user = users[entry["user"]]
                updates = repository.updates_for(entry["record"], entry["user"])
                outcome: dict[str, Any] = {"user": entry["user"], "record": entry["record"],
                                           "payload": None}
                with ctx.measure() as window:
                    try:
                        payload = abe.abe_decrypt(
                            ctx, user, repository.get(entry["record"]), updates)
                        outcome["outcome"] = "ok"
                        outcome["payload"] = payload.decode("utf-8")
                    except abe.AccessDenied:
                        outcome["outcome"] = "denied"
                    except Exception as exc:  # recorded, does not abort the phase
                        outcome["outcome"] = "error"
                        outcome["message"] = str(exc)
                outcome["pairings"] = window.pairings
                outcome["scalar_muls"] = window.scalar_muls
                into.append(outcome)

        phase = "attempts"
        evaluate_attempts(report["attempts"])

        phase = "revoke"
        revoked_so_far: set[str] = set()
        for entry in document.get("revocations", []) or []:
            revoked_keyrings = [users[u] for u in entry["revoke"]]
            revoked_so_far.update(entry["revoke"])
            recipients = [u for u in users if u not in revoked_so_far]
            revocation_report = {"revoked": list(entry["revoke"]), "records": []}
            for record_id in repository.record_ids():
                ciphertext = repository.get(record_id)
                new_ct, updates, new_state = abe.revoke(
                    ctx, shares, ciphertext, states[record_id], revoked_keyrings, rng)
                repository.apply_revocation(record_id, new_ct)
                states[record_id] = new_state
                for user_id in recipients:
                    repository.deliver_updates(record_id, user_id, updates)
                revocation_report["records"].append({
                    "id": record_id,
                    "updated_rows": sorted(updates),
                    "recipients": recipients if updates else [],
                })
            report["revocations"].append(revocation_report)

        if document.get("revocations"):
            phase = "reattempts"
            evaluate_attempts(report["reattempts"])

        if ctx is not None:
            totals = ctx.counters
            report["totals"] = {"pairings": totals.pairings,
                                "scalar_muls": totals.scalar_muls}
    except ScenarioError:
        raise
    except Exception as exc:  # phase failure: return the partial report
        report["error"] = {"phase": phase, "message": str(exc)}
    return report


def render_report(report: Mapping[str, Any]) -> str:
    """Canonical rendering: sorted keys, tight separators, trailing newline."""
    return json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"


def report_has_denial(report: Mapping[str, Any]) -> bool:
    outcomes = list(report.get("attempts", [])) + list(report.get("reattempts", []))
    return any(entry.get("outcome") == "denied" for entry in outcomes)


def summarize_report(report: Mapping[str, Any]) -> str:
    """Short human-readable digest printed next to the canonical document."""
    lines = []
    aggregation = report.get("aggregation")
    if aggregation:
        for entry in aggregation["tags"]:
            lines.append(f"aggregate {'+'.join(entry['tag'])}: {entry['sum']}")
        for warning in aggregation.get("warnings", []):
            lines.append(f"warning: {warning}")
    for record in report.get("records", []):
        lines.append(f"stored {record['id']}: {record['rows']} rows, "
                     f"{record['pairings']} pairings, {record['scalar_muls']} scalar muls")
    for label, key in (("attempt", "attempts"), ("reattempt", "reattempts")):
        for entry in report.get(key, []):
            lines.append(f"{label} {entry['user']} -> {entry['record']}: {entry['outcome']}")
    totals = report.get("totals", {})
    lines.append(f"totals: {totals.get('pairings', 0)} pairings, "
                 f"{totals.get('scalar_muls', 0)} scalar muls")
    error = report.get("error")
    if error:
        lines.append(f"error in {error['phase']}: {error['message']}")
    return "\n".join(lines) + "\n"
