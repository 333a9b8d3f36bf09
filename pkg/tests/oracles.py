"""Independent reference computations used to pin expected test values.

Nothing here shares code paths with the package. The ground-state
propagator relaxes in a sine basis with Strang splitting (spectral
Laplacian, pointwise nonlinearity), and the dense Fock builder
assembles the full coupled matrix from Kronecker products with its own
basis enumeration. Both exist so package results can be checked against
a scheme with unrelated error terms.
"""

import itertools
import math

import numpy as np
from scipy.fft import dst, idst


def sine_ground(vx: np.ndarray, half_width: float, points: int,
                stages=((0.1, 4000), (0.02, 4000), (0.004, 4000))) -> tuple:
    """Ground state of -u'' - 2u^3 - V u under the unit-mass constraint.

    Normalized imaginary-time flow u_tau = u'' + (2u^2 + V)u on a
    Dirichlet box, linear part exact in the DST-I basis, nonlinear part
    pointwise, renormalized every step. Runs a ladder of shrinking time
    steps and Richardson-extrapolates the O(dt^2) splitting bias out of
    the last two stage energies.

    Returns (energy, u_full) with u_full on all `points` nodes.
    """
    n = int(points)
    h = 2.0 * half_width / (n - 1)
    x = np.linspace(-half_width, half_width, n)
    m = n - 2
    j = np.arange(1, m + 1)
    k2 = (j * np.pi / (2.0 * half_width)) ** 2
    v_in = np.asarray(vx, dtype=float)[1:-1]

    def normalize(w):
        return w / math.sqrt(h * float(np.dot(w, w)))

    def energy(w):
        c = dst(w, type=1, norm="ortho")
        lap = idst(c * k2, type=1, norm="ortho")
        kin = h * float(np.dot(w, lap))
        return kin - h * float(np.sum(w ** 4)) - h * float(np.dot(v_in, w * w))

    u = normalize(np.exp(-0.25 * x[1:-1] ** 2))
    stage_e = []
    for dt, sweeps in stages:
        decay = np.exp(-k2 * dt)
        for _ in range(int(sweeps)):
            u = u * np.exp(0.5 * dt * (2.0 * u * u + v_in))
            u = idst(dst(u, type=1, norm="ortho") * decay, type=1, norm="ortho")
            u = u * np.exp(0.5 * dt * (2.0 * u * u + v_in))
            u = normalize(np.abs(u))
        stage_e.append(energy(u))

    # dt^2 bias: e(dt) = e* + c dt^2, eliminate with the last two stages
    (dt1, _), (dt2, _) = stages[-2], stages[-1]
    r = (dt1 / dt2) ** 2
    e_star = (r * stage_e[-1] - stage_e[-2]) / (r - 1.0)
    full = np.zeros(n)
    full[1:-1] = u
    return e_star, full


def dense_fock_hamiltonian(alpha: float, v, L: float, modes: int, cap: int,
                           n_e: int, coupling: str = "normalized") -> np.ndarray:
    """Full matrix of the truncated coupled Hamiltonian, built by kron.

    Own basis order (itertools.product, lexicographic), own index maps.
    `v` is a callable electron potential or None for the free case.
    """
    occs = sorted(t for t in itertools.product(range(cap + 1), repeat=2 * modes)
                  if sum(t) <= cap)
    idx = {t: i for i, t in enumerate(occs)}
    D = len(occs)
    h = 2.0 * L / n_e
    x = -L + h * np.arange(n_e)

    Te = np.zeros((n_e, n_e))
    for i in range(n_e):
        Te[i, i] += 2.0 / h ** 2
        Te[i, (i + 1) % n_e] += -1.0 / h ** 2
        Te[i, (i - 1) % n_e] += -1.0 / h ** 2
    if v is not None:
        Te = Te + np.diag(-alpha ** 2 * v(alpha * x))

    Hph = np.zeros((D, D))
    for t, i in idx.items():
        Hph[i, i] = float(sum(t))

    H = np.kron(Te, np.eye(D)).astype(complex) + np.kron(np.eye(n_e), Hph)

    if coupling == "normalized":
        g = math.sqrt(alpha / (2.0 * L))
    else:
        g = math.sqrt(alpha / L)
    mode_js = [jj for jj in range(-modes, modes + 1) if jj != 0]
    for pos, jj in enumerate(mode_js):
        k = jj * np.pi / L
        phase = np.exp(1j * k * x)
        A = np.zeros((D, D))
        for t, i in idx.items():
            if t[pos] >= 1:
                low = list(t)
                low[pos] -= 1
                A[idx[tuple(low)], i] = math.sqrt(t[pos])
        H += -g * (np.kron(np.diag(phase), A) + np.kron(np.diag(np.conj(phase)), A.T))
    return H


def dense_ground_energy(alpha: float, v, L: float, modes: int, cap: int,
                        n_e: int, coupling: str = "normalized") -> float:
    H = dense_fock_hamiltonian(alpha, v, L, modes, cap, n_e, coupling)
    if H.shape[0] <= 600:
        return float(np.linalg.eigvalsh(H)[0])
    from scipy.sparse.linalg import eigsh

    vals = eigsh(H, k=1, which="SA", tol=1e-11, maxiter=5000,
                 return_eigenvectors=False)
    return float(vals[0])
