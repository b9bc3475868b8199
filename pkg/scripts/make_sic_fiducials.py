#!/usr/bin/env python3
"""Generate SIC fiducial vectors for d = 2, 4, 8 and write them to data files.

A fiducial |phi> generates d^2 pure states through the Weyl-Heisenberg orbit
X^j Z^k |phi>; a valid fiducial makes all pairwise overlaps |<psi_j|psi_k>|^2
equal to 1/(d+1).  We find fiducials by minimizing the squared deviation of
the displacement-operator overlaps from that target, with analytic gradients,
from random starts.  For d = 8 the cyclic-group orbit is searched the same
way; if it stalls, the three-qubit (tensor-product) orbit is tried instead.

Writes src/qproctomo/data/sic_d{d}.txt in the loader's format:
one header line with d, then d lines "re im".
"""

import sys
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

REPO = Path(__file__).resolve().parent.parent
OUT_DIR = REPO / "src" / "qproctomo" / "data"


def cyclic_displacements(d: int) -> np.ndarray:
    """All d^2 operators X^j Z^k for the cyclic group Z_d."""
    omega = np.exp(2j * np.pi / d)
    z = np.diag(omega ** np.arange(d))
    x = np.roll(np.eye(d), 1, axis=0)  # X|j> = |j+1 mod d>
    xs = [np.linalg.matrix_power(x, j) for j in range(d)]
    zs = [np.linalg.matrix_power(z, k) for k in range(d)]
    return np.array([xs[j] @ zs[k] for j in range(d) for k in range(d)])


def qubit_tensor_displacements(n_qubits: int) -> np.ndarray:
    """All 4^n tensor products of single-qubit X^a Z^b."""
    singles = cyclic_displacements(2)  # order: (a,b) = 00,01,10,11
    ds = singles
    for _ in range(n_qubits - 1):
        ds = np.array([np.kron(a, b) for a in ds for b in singles])
    return ds


def overlap_objective(displacements: np.ndarray, d: int):
    """Return (value, gradient) callable over x in R^{2d}; zero iff fiducial."""
    target = 1.0 / (d + 1)
    # displacements[0] is the identity; exclude it from the deviation sum
    D = displacements[1:]

    def fg(x: np.ndarray):
        u = x[:d] + 1j * x[d:]
        n = float(np.real(u.conj() @ u))
        Du = D @ u                      # (m, d)
        Ddu = np.conj(np.transpose(D, (0, 2, 1))) @ u
        c = Du @ u.conj()               # c_m = u† D_m u
        absc2 = np.abs(c) ** 2
        dev = absc2 / n**2 - target
        val = float(np.sum(dev**2))
        # Wirtinger derivative dg/du*
        coeff = 2.0 * dev
        grad_u = (
            (coeff * np.conj(c)) @ Du + (coeff * c) @ Ddu
        ) / n**2 - (2.0 * np.sum(coeff * absc2) / n**3) * u
        g = np.concatenate([2.0 * grad_u.real, 2.0 * grad_u.imag])
        return val, g

    return fg


def search(displacements: np.ndarray, d: int, seed: int, tries: int, tol: float = 1e-22):
    fg = overlap_objective(displacements, d)
    rng = np.random.default_rng(seed)
    best = None
    for t in range(tries):
        x0 = rng.standard_normal(2 * d)
        res = minimize(fg, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": 20000, "ftol": 1e-18, "gtol": 1e-14})
        if best is None or res.fun < best.fun:
            best = res
        if res.fun < tol:
            break
    u = best.x[:d] + 1j * best.x[d:]
    u /= np.linalg.norm(u)
    # fix the global phase: make the largest-magnitude entry real positive
    k = int(np.argmax(np.abs(u)))
    u *= np.exp(-1j * np.angle(u[k]))
    return u, best.fun, t + 1


def verify(fiducial: np.ndarray, displacements: np.ndarray, d: int) -> float:
    states = displacements @ fiducial
    gram = np.abs(states.conj() @ states.T) ** 2
    target = (d * np.eye(d * d) + 1.0) / (d + 1)
    return float(np.max(np.abs(gram - target)))


def write_fiducial(path: Path, fiducial: np.ndarray, d: int):
    lines = [str(d)] + [f"{z.real:.17e} {z.imag:.17e}" for z in fiducial]
    path.write_text("\n".join(lines) + "\n")


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for d, tries in [(2, 20), (4, 60), (8, 600)]:
        disp = cyclic_displacements(d)
        fid, fun, used = search(disp, d, seed=20240400 + d, tries=tries)
        dev = verify(fid, disp, d)
        print(f"d={d}: cyclic orbit, {used} starts, objective {fun:.3e}, max overlap dev {dev:.3e}")
        if dev > 1e-9 and d == 8:
            print("d=8: cyclic search stalled, trying the three-qubit orbit")
            disp = qubit_tensor_displacements(3)
            fid, fun, used = search(disp, d, seed=99, tries=200)
            dev = verify(fid, disp, d)
            print(f"d=8: tensor orbit, {used} starts, objective {fun:.3e}, max dev {dev:.3e}")
        if dev > 1e-9:
            print(f"d={d}: FAILED to reach tolerance", file=sys.stderr)
            return 1
        write_fiducial(OUT_DIR / f"sic_d{d}.txt", fid, d)
        print(f"d={d}: wrote {OUT_DIR / f'sic_d{d}.txt'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
