"""Smoke test for the polarscale_py extension.

Imports an installed module if there is one (e.g. after `maturin develop` in
crates/polarscale-py); otherwise builds the cdylib with cargo and loads it from
the target directory.
"""

import importlib
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        return importlib.import_module("polarscale_py")
    except ImportError:
        pass
    subprocess.run(
        ["cargo", "build", "--release", "-p", "polarscale-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libpolarscale_py.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "polarscale_py.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("polarscale_py")


def close(x, y, tol):
    assert abs(x - y) <= tol, f"{x} vs {y} (tol {tol})"


def main():
    ps = load()

    w = ps.Channel("bec:0.5")
    p = w.params()
    close(p["capacity"], 0.5, 1e-15)
    bad, good = w.split()
    close(bad.params()["z"], 0.75, 1e-15)
    close(good.params()["z"], 0.25, 1e-15)
    close(ps.Channel.bsc(0.11).params()["h"], 0.5, 1e-3)

    lam = ps.subdominant_eigenvalues(1000, 3)
    close(lam[0], 0.8227, 1e-3)

    close(ps.prob_in_interval(0.5, 0.1, 0.9, 0), 1.0, 0.0)
    a0 = ps.infimum_ratio(0, 1e-6)
    assert a0["lo"] <= 0.75 <= a0["hi"]
    assert ps.certify_concavity(4)
    assert ps.fm_coefficients(0) == ["0", "1", "-1"]

    g = ps.TestFunction("pow:2/3")
    lo, hi = ps.sup_ratio_bec(g, 0, 1e-6)
    close(0.5 * (lo + hi), 0.8311, 2e-4)
    lo, hi = ps.compute_lg(ps.TestFunction("univ"))
    close(math.log2(hi), -0.202, 2e-3)

    q = ps.iterate_q(20_000, 1e-9)
    close(q["rate"], 0.2757, 2e-3)

    t = ps.threshold_sample(60, 2000, 1e-2, 3)
    assert t["ks"] < 0.05

    sel = ps.good_indices(w, 4, 0.5)
    assert len(sel["indices"]) == 8 and 15 in sel["indices"] and 0 not in sel["indices"]

    cert = ps.theorem4_blocklength(w, 0.4, 0.1)
    assert cert["log_n"] == cert["n0"] + cert["n1"]

    try:
        ps.Channel("bec:1.5")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid channel literal accepted")

    print("smoke test ok:", ps.__version__)


if __name__ == "__main__":
    main()
