"""Smoke test for the compiled bindings; run with pytest or directly."""

import pot


def test_closed_forms():
    assert pot.pull_interval(-9, 60) == (30, 1)
    assert pot.pull_interval(0, 60) == (12, 1)
    assert pot.drains(2, 100) == list(range(20, 30))
    assert pot.mix64(1522) == 1271626993162961145
    assert pot.fraud_resilience(12) == (1, 1)
    assert pot.fraud_resilience(12, 2) == (1, 2)
    assert pot.fraud_resilience(12, 3) == (1, 3)
    assert pot.fraud_resilience(2) is None


def test_storage_curve():
    csv = pot.storage_csv(600_000, 100_000)
    assert csv.splitlines()[0] == "tx_count,mode,MB"
    assert "600000,none,600.000000" in csv


def test_simulation_is_deterministic():
    a = pot.simulate("nodes = 4\nrounds = 2\n", seed=7)
    b = pot.simulate("nodes = 4\nrounds = 2\n", seed=7)
    assert a["digest"] == b["digest"]
    assert a["handovers"] == 8
    assert a["forks"] == 0
    assert len(set(a["tips"])) == 1
    assert "seed" in pot.config_keys()


def test_bad_input_raises():
    for call in (
        lambda: pot.simulate("turn = 2\n"),
        lambda: pot.simulate(colour="blue"),
        lambda: pot.validate_snapshot(b"junk"),
    ):
        try:
            call()
        except ValueError:
            continue
        raise AssertionError("expected ValueError")


def test_game():
    g = pot.play_game(scripted=True, seed=1)
    assert g["conserved"]
    assert g["double_spend_invalidated"] >= 1
    plain = pot.play_game(3, 30, 1)
    assert plain["granted"] == [plain["victor"]]


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
    print("ok")
