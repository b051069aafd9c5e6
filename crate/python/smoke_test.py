"""Smoke test for the stereo_eeg_py extension module.

Build and run:
    cargo build --release -p stereo-eeg-py --features extension-module
    cp target/release/libstereo_eeg_py.so python/stereo_eeg_py.so
    python3 python/smoke_test.py
"""

import json
import math
import sys
import tempfile

import stereo_eeg_py as se


def main():
    fs = 512.0
    tone = [math.sin(2 * math.pi * 10 * t / fs) for t in range(7168)]
    powers = se.band_powers(tone, fs, 512, 8)
    assert max(powers, key=powers.get) == "alpha", powers
    assert abs(sum(powers.values()) - 100.0) < 1e-6

    with tempfile.TemporaryDirectory() as out:
        (m2, m3), = se.synth(out, profile="paper", seed=7)
        diff, bands = se.band_select(m2, m3)
        assert bands == ["delta", "theta"], bands
        assert max(diff, key=lambda c: diff[c][0]) == "T6"
        assert diff["Oz"][1] < 0

        names, (x, y), (xt, yt) = se.features(m2, m3, "T6,Oz", bands, split_seed=7)
        assert names == ["T6_delta", "T6_theta", "Oz_delta", "Oz_theta"]
        assert (len(x), len(xt)) == (316, 314)

    for kind in ("plsr", "svm"):
        model = se.train(x, y, kind, feature_names=names)
        pred, scores = model.predict(xt)
        acc, sens, spec = se.metrics(pred, yt)
        print(f"{kind}: {model.hyper}, cv {model.cv_accuracy:.3f}, test {acc:.3f}, sens {sens:.3f}, spec {spec:.3f}")
        assert acc > 0.6
        again = se.Model.from_json(model.to_json())
        assert again.predict(xt) == (pred, scores)
        assert json.loads(model.to_json())["feature_names"] == names

    try:
        se.metrics([1.0], [1.0, -1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("length mismatch accepted")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
