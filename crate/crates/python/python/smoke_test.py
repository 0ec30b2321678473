"""Smoke test for the pytricomi extension.

Build with `maturin develop -m crates/python/Cargo.toml`, or copy
target/release/libpytricomi.so to pytricomi.so somewhere on PYTHONPATH.
"""

import math

import pytricomi as pt


def main():
    assert abs(pt.rho_strauss(3, 0.0) - (1 + math.sqrt(2))) < 1e-12
    assert abs(pt.f_ss(3, 0.0, 1 + math.sqrt(2), 1 + math.sqrt(2))) < 1e-12

    info = pt.classify(1, 1.0, 0.0, 2.0, 2.0)
    assert info["regime"] == "GlasseySubcritical", info
    assert abs(info["omega"] - 1.5) < 1e-12

    t = 0.7
    assert abs(pt.bessel_k(0.5, t) - math.sqrt(math.pi / (2 * t)) * math.exp(-t)) < 1e-12
    assert abs(pt.y_lambda(0.0, 2.0, 1.5) - math.exp(-3.0)) < 1e-10
    assert abs(pt.phi(3, 2.0) - math.sinh(2.0) / 2.0) < 1e-12
    assert abs(pt.w_single(3, 0.0, 1.0, 1.0, 2.0) - math.exp(-2.0) * math.sinh(1.0)) < 1e-12
    assert pt.w_integrated(3, 1.0, 1.0, 0.0, 1.0) > 0.0

    try:
        pt.rho_strauss(3, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative m accepted")

    run = pt.simulate(1, 1.0, 0.0, 2.0, 2.0, 0.8, dr=0.04, t_max=40.0)
    assert run["status"] == "blew_up", run
    assert 5.0 < run["t_est"] < 6.0, run

    sw = pt.sweep_and_fit(1, 1.0, 0.0, 2.0, 2.0, [0.8, 0.4, 0.2, 0.1], dr=0.04, t_max=40.0)
    assert sw["verdict"] == "Pass", sw
    print("ok: T =", [round(x, 3) for x in sw["t_measured"]], "slope", round(sw["slope"], 4))


if __name__ == "__main__":
    main()
