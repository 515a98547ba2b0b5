#!/usr/bin/env python3
"""Smoke test for the mediation_kit_py extension module.

Builds nothing itself: run `cargo build -p mediation-kit-py` first, then
`python3 python/smoke_test.py`. The script copies the cdylib next to itself
under the importable name and exercises each binding once.
"""
import pathlib
import shutil
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_extension():
    for profile in ("release", "debug"):
        built = ROOT / "target" / profile / "libmediation_kit_py.so"
        if built.exists():
            dest = ROOT / "python" / "mediation_kit_py.so"
            if not dest.exists() or built.stat().st_mtime > dest.stat().st_mtime:
                shutil.copy2(built, dest)
            sys.path.insert(0, str(dest.parent))
            import mediation_kit_py
            return mediation_kit_py
    sys.exit("build the extension first: cargo build -p mediation-kit-py")


def main():
    mk = import_extension()
    fixtures = ROOT / "fixtures"

    d = mk.Distribution.from_csv((fixtures / "table2.csv").read_text())
    assert set(d.variables()) == {"X", "Y", "S", "Z"}
    assert abs(d.prob({"X": "x1"}) - 0.703) < 1e-3

    est = d.estimate("X", "Y", "x1", "x0", "y1", {"S"}, {"Z"})
    assert abs(est["nde"] + est["nie"] - est["te"]) < 1e-12

    verdict = d.weakly_equivalent("X", "Y", "x1", "x0", {"Z"}, {"S"})
    assert verdict["direct_equal"]
    assert not (verdict["theorem1"] or verdict["theorem2"] or verdict["theorem3"])
    assert verdict["max_discrepancy"] < 1e-3

    assert sorted(d.markov_boundary("Y", {"X", "S", "Z"}, 0.02)) == ["S", "Z"]

    reduced = d.propensity_reduce("X", {"S", "Z"})
    est_ps = reduced.estimate("X", "Y", "x1", "x0", "y1", {"PS"})
    assert abs(est_ps["nde"] - est["nde"]) < 1e-12
    assert abs(est_ps["nie"] - est["nie"]) < 1e-12

    g = mk.Graph.from_text((fixtures / "fig1.graph").read_text())
    assert not g.d_separated({"X"}, {"Y"}, {"S", "Z"})
    assert sorted(g.markov_boundary("Z")) == ["S", "X", "Y"]

    v = mk.variance_nde(d, "X", "x1", "x0", "Y", "y1", {"S", "Z"}, 703, 297)
    assert v > 0

    cells = mk.simulate("A1", "B2", n=1000, reps=500, seed=7)
    assert len(cells) == 6
    assert all(0.5 < c["ratio"] < 1.5 for c in cells)
    s_nde = next(c for c in cells if c["conditioning"] == "S" and c["effect"] == "Nde")
    assert abs(s_nde["sqrt_avar"] - 0.0288) < 5e-5

    coef, sd = mk.gaussian_regression(
        (fixtures / "table1.csv").read_text(), 29, "Y", "X", {"S1", "S2"}
    )
    assert abs(coef - (-0.063)) < 1e-3
    assert abs(sd - 0.1261) < 5e-4

    print("smoke test passed")


if __name__ == "__main__":
    main()
