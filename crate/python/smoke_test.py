"""Smoke test for the pylisee extension module.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`, or
`cargo build --release -p lisee-python` and put target/release on
PYTHONPATH as pylisee.so (see README).
"""

import math
import tempfile
from pathlib import Path

import pylisee

ROOT = Path(__file__).resolve().parent.parent


def main():
    assert abs(pylisee.dbm_to_watts(30.0) - 1.0) < 1e-12
    assert abs(pylisee.watts_to_dbm(0.001)) < 1e-9

    q = pylisee.quantize_phases([0.1, 2.0, 3.5, 6.2], "1")
    assert q == [0.0, math.pi, math.pi, 0.0], q

    cfg = pylisee.SystemConfig(2, 2, 4, resolution="1", p_budget_dbm=0.0, sigma2_dbm=-20.0, p_c_dbm=20.0)
    channels = pylisee.sample_channels(cfg, 7)
    assert channels.shape == (2, 2, 4)
    assert len(channels.h1) == 4 and len(channels.h1[0]) == 2

    report, why = pylisee.alternating(channels, cfg, 7)
    best = pylisee.exhaustive_search(channels, cfg)
    assert why in ("converged", "infeasible", "iteration-cap")
    assert report.ee <= best.ee + 1e-9, (report, best)
    if report.feasible:
        ee = pylisee.energy_efficiency(channels, report.theta, report.powers, cfg)
        assert abs(ee - report.ee) <= 1e-8 * report.ee

    relay = pylisee.relay_baseline(channels, cfg)
    assert relay.method == "relay"

    powers = pylisee.dinkelbach(channels, [0.0] * 4, cfg)
    assert len(powers) == 2 and min(powers) >= 0.0

    try:
        pylisee.SystemConfig(2, 3, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("M < K accepted")

    with tempfile.TemporaryDirectory() as out:
        rows = pylisee.run_scenario(str(ROOT / "scenarios" / "oracle_small.txt"), out, workers=1)
        assert {r["method"] for r in rows} == {"lis-1bit", "exhaustive"}
        assert (Path(out) / "raw.csv").read_text().startswith("method,sweep,trial,seed,ee,")

    print("alternating", report)
    print("exhaustive ", best)
    print("relay      ", relay)
    print("smoke test ok")


if __name__ == "__main__":
    main()
