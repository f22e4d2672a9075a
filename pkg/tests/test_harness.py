import inspect
import random

import pytest

from gridseal.abe import abe_decrypt, abe_encrypt, kdc_setup, issue_key, UserKeyring
from gridseal.harness import (
    AttributeRegistry,
    CostModel,
    DEFAULT_UNIVERSE,
    Repository,
    ScenarioError,
    counters_cost,
    estimate_comm_overhead,
    measure_counters,
    predict_cost,
    render_report,
    report_has_denial,
    run_scenario,
    validate_scenario,
)
from gridseal.lsss import compile_lsss, parse_policy
from gridseal.pairing import ctx_new

Q = 2**61 - 1
SCHEMA = "gridseal-scenario/1"


# --- registry -------------------------------------------------------------------

def test_default_universe_covers_six_categories():
    registry = AttributeRegistry()
    assert registry.w == sum(len(group) for group in DEFAULT_UNIVERSE.values())
    assert len(DEFAULT_UNIVERSE) == 6
    assert "source:fossil" in registry


def test_registry_enforces_disjoint_ownership():
    registry = AttributeRegistry(universe=[])
    registry.add_attributes(["a", "b", "c"])
    registry.assign("kdc1", ["a", "b"])
    registry.assign("kdc1", ["a"])  # re-claiming your own is fine
    with pytest.raises(ValueError):
        registry.assign("kdc2", ["b", "c"])
    assert registry.owner("c") is None  # failed claim must not partially apply
    assert registry.attributes_of("kdc1") == ["a", "b"]


# --- repository ------------------------------------------------------------------

def test_repository_is_append_only_and_keyless():
    repository = Repository()
    for name, method in inspect.getmembers(repository, inspect.ismethod):
        if name.startswith("_"):
            continue
        for parameter in inspect.signature(method).parameters:
            assert "secret" not in parameter and parameter != "sk"

    ctx = ctx_new(q=Q)
    rng = random.Random(1)
    authority = kdc_setup(ctx, "A", ["a"], rng)
    ciphertext, _ = abe_encrypt(ctx, authority.shares,
                                compile_lsss(parse_policy("a")), b"x", rng)
    repository.store("r1", ciphertext)
    with pytest.raises(ValueError):
        repository.store("r1", ciphertext)
    with pytest.raises(KeyError):
        repository.apply_revocation("ghost", ciphertext)
    assert repository.record_ids() == ["r1"]


def test_repository_delivery_map():
    repository = Repository()
    repository.deliver_updates("r1", "u1", {0: "sentinel"})
    repository.deliver_updates("r1", "u1", {2: "other"})
    assert repository.updates_for("r1", "u1") == {0: "sentinel", 2: "other"}
    assert repository.updates_for("r1", "u2") == {}


# --- cost model -------------------------------------------------------------------

def test_predict_cost_reproduces_default_figures():
    model = CostModel(4.5, 0.6)
    assert predict_cost(model, 10) == 124.5
    assert predict_cost(model, 1) == 16.5


def test_predict_cost_is_affine():
    model = CostModel(4.5, 0.6)
    slope = predict_cost(model, 2) - predict_cost(model, 1)
    for m in range(2, 20):
        assert predict_cost(model, m + 1) - predict_cost(model, m) == pytest.approx(slope)


def test_predict_cost_rejects_nonpositive():
    with pytest.raises(ValueError):
        predict_cost(CostModel(), 0)


# frozen from independent arithmetic: m^2 + m(gt + 2g) + gt + ceil(log2 w) + data
COMM_VECTORS = [
    ((6, 160, 160, 8, 1024), 4103),
    ((1, 160, 160, 2, 0), 642),
    ((10, 512, 1024, 64, 8192), 29802),
    ((0, 160, 160, 8, 1024), 1187),
    ((3, 256, 3072, 16, 100), 13937),
    ((20, 160, 160, 6, 65536), 75699),
    ((2, 224, 224, 4, 512), 2086),
    ((7, 384, 384, 128, 2048), 10552),
    ((12, 160, 320, 32, 0), 8149),
    ((5, 64, 64, 8, 40), 1092),
]


@pytest.mark.parametrize("args,expected", COMM_VECTORS)
def test_comm_overhead_pinned_vectors(args, expected):
    assert estimate_comm_overhead(*args) == expected


def test_comm_overhead_degenerate_and_shape():
    assert estimate_comm_overhead(0, 160, 160, 8, 1024) == 160 + 3 + 1024
    small = estimate_comm_overhead(10, 160, 160, 8, 0)
    double = estimate_comm_overhead(20, 160, 160, 8, 0)
    assert double - 2 * small > 0  # the quadratic term shows once m doubles
    with pytest.raises(ValueError):
        estimate_comm_overhead(3, 0, 160, 8, 0)
    with pytest.raises(ValueError):
        estimate_comm_overhead(-1, 160, 160, 8, 0)


def test_measure_counters_roundtrip():
    ctx = ctx_new(q=Q)
    rng = random.Random(2)
    attributes = [f"a{i}" for i in range(10)]
    authority = kdc_setup(ctx, "A", attributes, rng)
    program = compile_lsss(parse_policy(" & ".join(attributes)))
    counters, (ciphertext, _) = measure_counters(
        ctx, lambda: abe_encrypt(ctx, authority.shares, program, b"x", rng))
    assert counters == (1, 40)

    user = UserKeyring("u1")
    for attribute in attributes:
        user.add(attribute, issue_key(authority, ctx, "u1", attribute))
    counters, _ = measure_counters(ctx, lambda: abe_decrypt(ctx, user, ciphertext))
    assert counters.pairings == 20

    denied = UserKeyring("nobody")
    def attempt():
        try:
            abe_decrypt(ctx, denied, ciphertext)
        except Exception:
            return None
    counters, _ = measure_counters(ctx, attempt)
    assert counters.pairings == 0


def test_counters_cost_prices_measurements():
    model = CostModel(4.5, 0.6)
    from gridseal.pairing import CounterSnapshot
    assert counters_cost(model, CounterSnapshot(21, 50)) == 124.5


# --- scenario validation -------------------------------------------------------------

def test_unknown_top_level_key_rejected():
    with pytest.raises(ScenarioError) as excinfo:
        validate_scenario({"schema": SCHEMA, "repository_decrypt": []})
    assert "repository_decrypt" in str(excinfo.value)


def test_schema_id_required():
    with pytest.raises(ScenarioError):
        validate_scenario({})
    with pytest.raises(ScenarioError):
        validate_scenario({"schema": "something-else/9"})


def test_validation_paths_point_at_fields():
    document = {
        "schema": SCHEMA,
        "kdcs": [{"id": "A", "attributes": ["a"]}],
        "users": [{"id": "u", "attributes": ["mystery"]}],
    }
    with pytest.raises(ScenarioError) as excinfo:
        validate_scenario(document)
    assert excinfo.value.path == "users[0].attributes[0]"


def test_validation_rejects_duplicate_attribute_claims():
    document = {
        "schema": SCHEMA,
        "kdcs": [
            {"id": "A", "attributes": ["a"]},
            {"id": "B", "attributes": ["a"]},
        ],
    }
    with pytest.raises(ScenarioError) as excinfo:
        validate_scenario(document)
    assert excinfo.value.path == "kdcs[1].attributes"


def test_validation_rejects_unresolved_references():
    base = {
        "schema": SCHEMA,
        "kdcs": [{"id": "A", "attributes": ["a"]}],
        "users": [{"id": "u", "attributes": ["a"]}],
        "records": [{"id": "r", "policy": "a", "payload": "p"}],
    }
    bad_attempt = dict(base, attempts=[{"user": "ghost", "record": "r"}])
    with pytest.raises(ScenarioError):
        validate_scenario(bad_attempt)
    bad_policy = dict(base, records=[{"id": "r", "policy": "a & ghost", "payload": "p"}])
    with pytest.raises(ScenarioError):
        validate_scenario(bad_policy)
    bad_revoke = dict(base, revocations=[{"revoke": ["ghost"]}])
    with pytest.raises(ScenarioError):
        validate_scenario(bad_revoke)


def test_validation_rejects_topology_without_paillier():
    with pytest.raises(ScenarioError):
        validate_scenario({
            "schema": SCHEMA,
            "topology": {"nodes": [{"id": "nan", "role": "NAN"}]},
        })


def test_validation_rejects_reading_on_gateway():
    document = {
        "schema": SCHEMA,
        "paillier": {"bits": 64},
        "topology": {
            "nodes": [
                {"id": "nan", "role": "NAN"},
                {"id": "ban", "role": "BAN", "parent": "nan"},
                {"id": "h", "role": "HAN", "parent": "ban"},
            ],
            "readings": [{"node": "ban", "tag": ["x"], "value": 1}],
        },
    }
    with pytest.raises(ScenarioError) as excinfo:
        validate_scenario(document)
    assert "readings[0].node" in excinfo.value.path


# --- scenario execution -----------------------------------------------------------------

def test_empty_scenario_runs_clean():
    report = run_scenario({"schema": SCHEMA}, seed=1)
    assert report["error"] is None
    assert report["attempts"] == [] and report["aggregation"] is None
    assert not report_has_denial(report)


def test_aggregation_scenario_sums_per_tag():
    document = {
        "schema": SCHEMA,
        "paillier": {"bits": 128},
        "topology": {
            "nodes": [
                {"id": "nan", "role": "NAN"},
                {"id": "ban", "role": "BAN", "parent": "nan"},
                {"id": "h1", "role": "HAN", "parent": "ban"},
                {"id": "h2", "role": "HAN", "parent": "ban"},
                {"id": "h3", "role": "HAN", "parent": "ban"},
            ],
            "readings": [
                {"node": "h1", "tag": ["solar"], "value": 11},
                {"node": "h2", "tag": ["fossil"], "value": 70},
                {"node": "h3", "tag": ["solar"], "value": 31},
            ],
        },
    }
    report = run_scenario(document, seed=5)
    assert report["error"] is None
    assert report["aggregation"]["tags"] == [
        {"tag": ["fossil"], "sum": 70},
        {"tag": ["solar"], "sum": 42},
    ]


def test_headroom_warning_emitted():
    document = {
        "schema": SCHEMA,
        "paillier": {"bits": 24},
        "topology": {
            "nodes": [
                {"id": "nan", "role": "NAN"},
                {"id": "ban", "role": "BAN", "parent": "nan"},
                {"id": "h1", "role": "HAN", "parent": "ban"},
                {"id": "h2", "role": "HAN", "parent": "ban"},
            ],
            "readings": [
                {"node": "h1", "tag": ["x"], "value": 300000},
                {"node": "h2", "tag": ["x"], "value": 300000},
            ],
        },
    }
    report = run_scenario(document, seed=6)
    assert report["aggregation"]["warnings"]


def test_access_scenario_end_to_end():
    document = {
        "schema": SCHEMA,
        "kdcs": [{"id": "A", "attributes": ["a", "b"]}],
        "users": [
            {"id": "full", "attributes": ["a", "b"]},
            {"id": "partial", "attributes": ["a"]},
        ],
        "records": [{"id": "r", "policy": "a & b", "payload": "classified"}],
        "attempts": [
            {"user": "full", "record": "r"},
            {"user": "partial", "record": "r"},
        ],
    }
    report = run_scenario(document, seed=7)
    assert report["error"] is None
    outcomes = {(a["user"], a["outcome"]) for a in report["attempts"]}
    assert outcomes == {("full", "ok"), ("partial", "denied")}
    ok = next(a for a in report["attempts"] if a["outcome"] == "ok")
    assert ok["payload"] == "classified"
    assert ok["pairings"] == 2 * 2
    record = report["records"][0]
    assert (record["pairings"], record["scalar_muls"]) == (1, 4 * 2)
    assert report_has_denial(report)


def test_revocation_scenario_reattempts():
    document = {
        "schema": SCHEMA,
        "kdcs": [{"id": "A", "attributes": ["a"]}],
        "users": [
            {"id": "out", "attributes": ["a"]},
            {"id": "in", "attributes": ["a"]},
        ],
        "records": [{"id": "r", "policy": "a", "payload": "rotating"}],
        "attempts": [
            {"user": "out", "record": "r"},
            {"user": "in", "record": "r"},
        ],
        "revocations": [{"revoke": ["out"]}],
    }
    report = run_scenario(document, seed=8)
    assert report["error"] is None
    assert [a["outcome"] for a in report["attempts"]] == ["ok", "ok"]
    assert [a["outcome"] for a in report["reattempts"]] == ["denied", "ok"]
    revocation = report["revocations"][0]
    assert revocation["records"][0]["updated_rows"] == [0]
    assert revocation["records"][0]["recipients"] == ["in"]


def test_scenario_determinism_under_seed():
    document = {
        "schema": SCHEMA,
        "paillier": {"bits": 96},
        "topology": {
            "nodes": [
                {"id": "nan", "role": "NAN"},
                {"id": "ban", "role": "BAN", "parent": "nan"},
                {"id": "h1", "role": "HAN", "parent": "ban"},
            ],
            "readings": [{"node": "h1", "tag": ["t"], "value": 4}],
        },
        "kdcs": [{"id": "A", "attributes": ["a"]}],
        "users": [{"id": "u", "attributes": ["a"]}],
        "records": [{"id": "r", "policy": "a", "payload": "p"}],
        "attempts": [{"user": "u", "record": "r"}],
    }
    first = render_report(run_scenario(document, seed=99))
    second = render_report(run_scenario(document, seed=99))
    assert first == second
    third = render_report(run_scenario(document, seed=100))
    assert third != first


def test_attempt_level_failure_recorded_as_error(monkeypatch):
    import gridseal.harness.scenario as scenario_module

    def boom(*args, **kwargs):
        raise ValueError("backend blew a fuse")

    monkeypatch.setattr(scenario_module.abe, "abe_decrypt", boom)
    document = {
        "schema": SCHEMA,
        "kdcs": [{"id": "A", "attributes": ["a"]}],
        "users": [{"id": "u", "attributes": ["a"]}],
        "records": [{"id": "r", "policy": "a", "payload": "p"}],
        "attempts": [{"user": "u", "record": "r"}],
    }
    report = run_scenario(document, seed=3)
    assert report["error"] is None  # the phase survives
    assert report["attempts"][0]["outcome"] == "error"
    assert "fuse" in report["attempts"][0]["message"]


def test_phase_error_produces_partial_report():
    # paillier modulus far too small for the readings: decryption sums wrap,
    # but a hard failure needs an actual phase exception, so force one with an
    # injected-prime config whose mu does not exist
    document = {
        "schema": SCHEMA,
        "paillier": {"q1": 3, "q2": 7},
        "topology": {
            "nodes": [
                {"id": "nan", "role": "NAN"},
                {"id": "ban", "role": "BAN", "parent": "nan"},
                {"id": "h1", "role": "HAN", "parent": "ban"},
            ],
            "readings": [{"node": "h1", "tag": ["t"], "value": 1}],
        },
    }
    report = run_scenario(document, seed=1)
    assert report["error"]["phase"] == "aggregate"
