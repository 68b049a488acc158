"""Quick end-to-end check of the Python bindings.

Build and install first:
    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/beamlearn-*.whl
"""

import json
import math

import beamlearn as bl


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    cb = bl.PhaseCodebook(3)
    assert len(cb) == 8 and cb.id == "uniform-3bit"
    assert close(cb.step, math.pi / 4)
    assert all(v in cb.values for v in cb.quantize([0.1, -3.0, 2.9]))

    ideal = bl.ArrayGeometry.ideal(16)
    impaired = bl.ArrayGeometry.impaired(16, 0.1, 0.32 * math.pi, seed=1)
    assert bl.ArrayGeometry.from_json(impaired.to_json()).positions == impaired.positions

    # The steering beam at broadside reaches gain M on a matching plane wave.
    beams = bl.steering_codebook(ideal, 16)
    h = ideal.response(math.pi / 2)
    assert close(bl.gain(beams[8], h), 16.0)

    channels = bl.ChannelSet.synthesize(ideal, seed=3)
    h = channels.channels()[0]
    phases, egc = bl.egc_beam(h)
    assert close(bl.egc_upper_bound(channels), egc)
    _, q = bl.quantized_egc_beam(h, cb)
    assert q <= egc + 1e-9

    small = bl.ChannelSet.synthesize(bl.ArrayGeometry.ideal(3), seed=2)
    best, optimum, evaluated = bl.exhaustive_search(small, bl.PhaseCodebook(2))
    assert evaluated == 64

    agent = bl.Agent(small, bits=2, total_steps=2000, seed=0, config=json.dumps({"batch_size": 16}))
    first = agent.step()
    assert set(first) >= {"t", "reward", "gain", "best_gain", "beta"}
    curve = agent.run(1999)
    assert all(b >= a for a, b in zip(curve, curve[1:]))
    print(f"agent: best {agent.best_gain:.4f} vs optimum {optimum:.4f}")
    assert agent.best_gain >= 0.99 * optimum

    pattern = bl.beam_pattern(agent.best_beam, bl.ArrayGeometry.ideal(3))
    assert len(pattern) == 179

    report = bl.evaluate_beam(agent.best_beam, small)
    assert report["report"]["average"] == agent.best_gain

    config = json.loads(bl.default_config())
    config["array"]["antennas"] = 4
    config["array"]["resolution_bits"] = 2
    config["iterations"] = 300
    result = bl.run_training(json.dumps(config), ["agent.batch_size=16"])
    assert len(result["curve"]) == 300
    assert result["baselines"]["exhaustive"]["ratio"] >= result["best_ratio"]
    table = bl.run_baselines(json.dumps(config))
    assert table["egc"]["ratio"] == 1.0

    try:
        bl.PhaseCodebook(0)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid resolution accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
