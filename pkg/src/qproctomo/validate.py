"""Self-contained invariant suite behind ``qproctomo validate``.

Each check prints one PASS/FAIL line; the return value counts failures.
These are quick spot checks of the core contracts (the full test suite
lives in the repository's tests/ directory).
"""

from __future__ import annotations

import numpy as np

from .channels import (
    apply_channel,
    builtin_channel,
    choi_from_kraus,
    imperfect_cnot,
    random_channel,
)
from .linalg import hermitianize, partial_trace, random_pure_state, trace_norm
from .metrics import trace_distance
from .mlme import MlmeConfig, information, mlme_solve, w_operator
from .seeding import rng_for
from .tomography import (
    probabilities,
    product_sic_pom,
    qubit_tetrahedron,
    sample_counts,
    sic_inputs,
    standard_product_inputs,
)


def _check(name: str, ok: bool, detail: str, emit) -> bool:
    emit(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return ok


def run_suite(seed: int = 0, emit=print) -> int:
    """Run all checks; returns the number of failures."""
    failures = 0
    rng = rng_for(seed, 0)

    # Kraus/Choi oracle equivalence on a random channel
    e = random_channel(2, 2, rank=3, seed=seed + 1)
    rho = random_pure_state(2, rng)
    out = apply_channel(e, rho)
    ok = abs(np.trace(out).real - 1) < 1e-10 and np.linalg.eigvalsh(out)[0] > -1e-10
    failures += not _check("channel application preserves states", ok,
                           f"trace {np.trace(out).real:.2e}", emit)

    # trace-preserving marginal
    marg = partial_trace(e.matrix, (2, 2), "K")
    dev = np.max(np.abs(marg - np.eye(2)))
    failures += not _check("random channel trace-preserving", dev < 1e-9, f"dev {dev:.2e}", emit)

    # SIC overlap relations
    for d in (2, 4):
        ens = sic_inputs(d)
        grams = [
            abs(np.trace(ens.states[j] @ ens.states[k]).real - 1.0 / (d + 1))
            for j in range(d * d) for k in range(j + 1, d * d)
        ]
        dev = max(grams)
        failures += not _check(f"SIC overlap relation d={d}", dev < 1e-8, f"dev {dev:.2e}", emit)

    # tetrahedron POM completeness
    _, pom1 = qubit_tetrahedron()
    dev = np.max(np.abs(sum(pom1.outcomes) - np.eye(2)))
    failures += not _check("tetrahedron POM completeness", dev < 1e-12, f"dev {dev:.2e}", emit)

    # probability normalization
    cnot = builtin_channel("cnot")
    ens = standard_product_inputs(2)
    pom = product_sic_pom(2)
    p = probabilities(cnot, ens, pom)
    dev = np.max(np.abs(p.sum(axis=1) - 1.0 / len(ens)))
    failures += not _check("per-input probability normalization", dev < 1e-10, f"dev {dev:.2e}", emit)

    # W is the gradient of the information functional
    e_im = choi_from_kraus(imperfect_cnot(0.2))
    data = sample_counts(probabilities(e_im, ens, pom), 2000, seed=seed + 2)
    e0 = random_channel(4, 4, rank=16, seed=seed + 3)
    w = w_operator(e0, data, ens, pom, lam=1e-3)
    h = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    h = hermitianize(h)
    h /= np.linalg.norm(h)
    t = 1e-6
    e_plus = type(e0)(matrix=e0.matrix + t * h, d_in=4, d_out=4, validate=False)
    e_minus = type(e0)(matrix=e0.matrix - t * h, d_in=4, d_out=4, validate=False)
    num = (information(e_plus, data, ens, pom, 1e-3) - information(e_minus, data, ens, pom, 1e-3)) / (2 * t)
    ana = float(np.trace(h @ w).real)
    rel = abs(num - ana) / max(abs(num), 1e-12)
    failures += not _check("W gradient vs finite differences", rel < 1e-4, f"rel {rel:.2e}", emit)

    # solver: trace preservation, positivity, convergence on tetrahedron problem
    ens1, pom1 = qubit_tetrahedron()
    ident = builtin_channel("identity", dim=2)
    data1 = sample_counts(probabilities(ident, ens1, pom1), None, seed=0)
    report = mlme_solve(data1, ens1, pom1, MlmeConfig(lam=0.0, step=1.0))
    est = report.estimator.matrix
    tp_dev = np.max(np.abs(partial_trace(est, (2, 2), "K") - np.eye(2)))
    min_eig = np.linalg.eigvalsh(est)[0]
    ok = report.converged and tp_dev < 1e-9 and min_eig > -1e-10
    failures += not _check("solver keeps the feasible set", ok,
                           f"tp {tp_dev:.1e}, min eig {min_eig:.1e}", emit)
    dtr = trace_distance(report.estimator, ident)
    failures += not _check("qubit identity ML reconstruction", dtr < 1e-3, f"D_tr {dtr:.2e}", emit)

    # trace distance between unitary channels (analytic value)
    d_ci = trace_distance(builtin_channel("cnot"), builtin_channel("identity", dim=4))
    failures += not _check("unitary-pair trace distance", abs(d_ci - np.sqrt(3) / 2) < 1e-10,
                           f"{d_ci:.6f} vs sqrt(3)/2", emit)

    # trace norm invariance under conjugation
    a = hermitianize(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    from .linalg import haar_unitary

    u = haar_unitary(6, rng)
    dev = abs(trace_norm(u @ a @ u.conj().T) - trace_norm(a))
    failures += not _check("trace norm unitary invariance", dev < 1e-9, f"dev {dev:.2e}", emit)

    emit(f"{'ALL CHECKS PASSED' if failures == 0 else f'{failures} CHECK(S) FAILED'}")
    return failures
