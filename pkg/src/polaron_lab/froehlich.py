"""Truncated one-dimensional electron-phonon Hamiltonian on a ring.

The crystal is the periodic interval [-L, L) with n_e electron nodes and
phonon modes k_j = j pi / L, j = -M..-1, 1..M (the zero mode is
excluded).  The Fock sector keeps occupations with total phonon number
at most N, so the Hilbert space is (electron nodes) x (occupations) with
dimension n_e * C(2M + N, N).  The Hamiltonian is

    H = -d^2/dx^2  +  sum_j a_j^dag a_j  -  alpha^2 V(alpha x)
        - g sum_j ( e^{i k_j x} a_j + e^{-i k_j x} a_j^dag )

with periodic second differences for the kinetic term.  The default
per-mode coupling g = sqrt(alpha dk / (2 pi)), dk = pi/L, is normalized
so that the coherent-state mode sum converges to the -alpha*integral(u^4)
quartic term as M grows; the switch coupling="literal" selects
g = sqrt(alpha / L) instead for side-by-side runs.

Matrix-vector application is assembled from per-mode transition lists
(each mode's lowering map on occupations is injective, so the scatter
updates never collide) and the ground state comes from Lanczos with full
reorthogonalization and an explicit a-posteriori residual check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import pekar, perturb
from .errors import ConvergenceError, PolaronLabError, RangeError, ValidationError
from .grid import Grid, GridFunction, default_grid

__all__ = [
    "FockConfig",
    "FroehlichOperator",
    "GroundState",
    "DensityProfile",
    "AnsatzResult",
    "ScanRow",
    "build_hamiltonian",
    "ground_state",
    "electron_density",
    "rescaled_density",
    "sample_orbital",
    "product_ansatz_energy",
    "hf_check",
    "convergence_scan",
]

COUPLING_CONVENTIONS = ("normalized", "literal")


@dataclass(frozen=True)
class FockConfig:
    """Truncation parameters: crystal half-length, modes, phonon cap, nodes."""

    L: float = 8.0
    modes: int = 3
    phonon_cap: int = 3
    electron_points: int = 33
    dim_cap: int = 500_000
    coupling: str = "normalized"

    def __post_init__(self):
        if not (self.L > 0 and np.isfinite(self.L)):
            raise ValidationError("froehlich", "L", "crystal half-length must be positive and finite")
        if not (isinstance(self.modes, int) and self.modes >= 0):
            raise ValidationError("froehlich", "modes", "mode count must be a nonnegative integer")
        if not (isinstance(self.phonon_cap, int) and self.phonon_cap >= 0):
            raise ValidationError("froehlich", "phonon_cap", "phonon cap must be a nonnegative integer")
        if not (isinstance(self.electron_points, int) and self.electron_points >= 3 and self.electron_points % 2 == 1):
            # odd point counts keep the trigonometric interpolation free of
            # an ambiguous Nyquist mode
            raise ValidationError("froehlich", "electron_points", "need an odd count >= 3")
        if self.coupling not in COUPLING_CONVENTIONS:
            raise ValidationError(
                "froehlich", "coupling", f"unknown convention {self.coupling!r}; expected one of {COUPLING_CONVENTIONS}"
            )
        if self.dim > self.dim_cap:
            raise ValidationError(
                "froehlich", "dim_cap", f"Hilbert dimension {self.dim} exceeds the cap {self.dim_cap}"
            )

    @property
    def occupation_count(self) -> int:
        return comb(2 * self.modes + self.phonon_cap, self.phonon_cap)

    @property
    def dim(self) -> int:
        return self.electron_points * self.occupation_count

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / self.electron_points

    @property
    def nodes(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(self.electron_points)

    @staticmethod
    def from_spec(spec: dict) -> "FockConfig":
        known = {"L", "modes", "phonon_cap", "electron_points", "dim_cap", "coupling"}
        extra = set(spec) - known
        if extra:
            raise ValidationError("froehlich", "config", f"unknown keys {sorted(extra)}")
        kw = {}
        for key in ("modes", "phonon_cap", "electron_points", "dim_cap"):
            if key in spec:
                kw[key] = int(spec[key])
        if "L" in spec:
            kw["L"] = float(spec["L"])
        if "coupling" in spec:
            kw["coupling"] = str(spec["coupling"])
        return FockConfig(**kw)


def _occupations(n_modes: int, cap: int):
    """All occupation tuples with sum <= cap, in lexicographic order."""
    out = []

    def rec(prefix, remaining, left):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for n in range(left + 1):
            prefix.append(n)
            rec(prefix, remaining - 1, left - n)
            prefix.pop()

    rec([], n_modes, cap)
    return out


class FroehlichOperator:
    """Hermitian operator handle; apply() is the matrix-vector product."""

    def __init__(self, alpha: float, V, cfg: FockConfig, extra_diag: Optional[np.ndarray] = None):
        if not (alpha > 0 and np.isfinite(alpha)):
            raise ValidationError("froehlich", "alpha", "coupling alpha must be positive and finite")
        self.alpha = float(alpha)
        self.V = V
        self.cfg = cfg
        n_e = cfg.electron_points
        x = cfg.nodes
        self.h_e = cfg.spacing

        # mode list j = -M..-1, 1..M and its reflection pairing
        js = list(range(-cfg.modes, 0)) + list(range(1, cfg.modes + 1))
        self.ks = np.array([j * math.pi / cfg.L for j in js])
        flip_pos = [js.index(-j) for j in js]

        occs = _occupations(2 * cfg.modes, cfg.phonon_cap)
        index = {occ: i for i, occ in enumerate(occs)}
        self.occs = occs
        self.nsum = np.array([sum(o) for o in occs], dtype=float)

        # per-mode lowering transitions: occ -> occ - e_m, amplitude sqrt(n_m)
        self._trans = []
        for m in range(2 * cfg.modes):
            src, dst, amp = [], [], []
            for o_idx, occ in enumerate(occs):
                if occ[m] >= 1:
                    lowered = occ[:m] + (occ[m] - 1,) + occ[m + 1:]
                    src.append(o_idx)
                    dst.append(index[lowered])
                    amp.append(math.sqrt(occ[m]))
            self._trans.append((np.array(src, dtype=int), np.array(dst, dtype=int), np.array(amp)))

        dk = math.pi / cfg.L
        if cfg.coupling == "normalized":
            self.g = math.sqrt(self.alpha * dk / (2.0 * math.pi))
        else:
            self.g = math.sqrt(self.alpha / cfg.L)
        self._phases = [np.exp(1j * k * x) for k in self.ks]

        diag = -self.alpha**2 * np.asarray(V(self.alpha * x), dtype=float)
        if extra_diag is not None:
            diag = diag + np.asarray(extra_diag, dtype=float)
        self._pot = diag

        # reflection x -> -x, k -> -k as an index permutation on the flat vector
        perm_e = (n_e - np.arange(n_e)) % n_e
        occ_flip = np.array(
            [index[tuple(occ[flip_pos[m]] for m in range(2 * cfg.modes))] for occ in occs], dtype=int
        )
        self.parity_indices = (perm_e[:, None] * len(occs) + occ_flip[None, :]).reshape(-1)

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def apply(self, psi: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        p = psi.reshape(cfg.electron_points, len(self.occs))
        out = (-np.roll(p, 1, axis=0) + 2.0 * p - np.roll(p, -1, axis=0)) / self.h_e**2
        out += p * self.nsum[None, :]
        out += p * self._pot[:, None]
        for (src, dst, amp), phase in zip(self._trans, self._phases):
            if src.size == 0:
                continue
            coef = -self.g * amp
            out[:, dst] += coef * (phase[:, None] * p[:, src])
            out[:, src] += coef * (np.conj(phase)[:, None] * p[:, dst])
        return out.reshape(-1)

    def rayleigh(self, psi: np.ndarray) -> float:
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        nrm = float(np.real(np.vdot(psi, psi)))
        if nrm == 0.0:
            raise ValidationError("froehlich", "psi", "zero vector has no Rayleigh quotient")
        return float(np.real(np.vdot(psi, self.apply(psi)))) / nrm

    def reflect(self, psi: np.ndarray) -> np.ndarray:
        return psi.reshape(-1)[self.parity_indices]


def build_hamiltonian(alpha: float, V, cfg: Optional[FockConfig] = None,
                      extra_diag: Optional[np.ndarray] = None) -> FroehlichOperator:
    """Assemble the truncated Hamiltonian for coupling alpha and potential V.

    extra_diag, when given, is added to the electron-diagonal part; it is
    the hook the Hellmann-Feynman check uses to shift the potential by a
    sampled measure density.
    """
    return FroehlichOperator(alpha, V, cfg or FockConfig(), extra_diag)


@dataclass(frozen=True)
class GroundState:
    alpha: float
    energy: float
    psi: np.ndarray
    residual: float
    ritz_gap: float
    iterations: int


def _start_vector(H: FroehlichOperator) -> np.ndarray:
    cfg = H.cfg
    x = cfg.nodes
    profile = np.exp(-((x / (0.4 * cfg.L)) ** 2))
    v = np.zeros((cfg.electron_points, len(H.occs)), dtype=complex)
    v[:, 0] = profile
    rng = np.random.default_rng(20240915)
    noise = rng.standard_normal(v.shape) + 1j * rng.standard_normal(v.shape)
    v += 1e-3 * noise * float(np.max(profile))
    flat = v.reshape(-1)
    flat = flat + flat[H.parity_indices]
    return flat / np.linalg.norm(flat)


def ground_state(H: FroehlichOperator, tol: float = 1e-8, max_iter: int = 600,
                 start: Optional[np.ndarray] = None) -> GroundState:
    """Lowest eigenpair by Lanczos with full reorthogonalization.

    Iterates until the Ritz residual bound clears the tolerance, then
    verifies the explicit residual ||H psi - E psi|| <= tol with a fresh
    matrix-vector product before returning.  The start vector is
    deterministic (seeded noise around an even vacuum profile), so runs
    are reproducible bit-for-bit.
    """
    dim = H.dim
    max_iter = min(max_iter, dim)
    if start is not None:
        v = np.asarray(start, dtype=complex).reshape(-1).copy()
        v /= np.linalg.norm(v)
    else:
        v = _start_vector(H)

    basis = np.empty((min(32, max_iter + 1), dim), dtype=complex)
    basis[0] = v
    alphas: list = []
    betas: list = []
    target = 0.5 * tol
    for it in range(1, max_iter + 1):
        if it >= basis.shape[0]:
            grown = np.empty((min(2 * basis.shape[0], max_iter + 1), dim), dtype=complex)
            grown[:it] = basis[:it]
            basis = grown
        w = H.apply(basis[it - 1])
        if betas:
            w -= betas[-1] * basis[it - 2]
        a = float(np.real(np.vdot(basis[it - 1], w)))
        alphas.append(a)
        w -= a * basis[it - 1]
        # full reorthogonalization, twice for good measure
        B = basis[:it]
        for _ in range(2):
            w -= B.T @ (np.conj(B) @ w)
        b = float(np.linalg.norm(w))

        theta, vecs = eigh_tridiagonal(np.array(alphas), np.array(betas))
        gap = float(theta[1] - theta[0]) if len(theta) > 1 else math.inf
        bound = b * abs(vecs[-1, 0])
        if bound <= target or b <= 1e-13 * max(1.0, abs(a)):
            y = B.T @ vecs[:, 0]
            y /= np.linalg.norm(y)
            resid = float(np.linalg.norm(H.apply(y) - theta[0] * y))
            if resid <= tol or b <= 1e-13 * max(1.0, abs(a)):
                # keep the even representative when the ground state is
                # parity-symmetric; leaves an odd state untouched
                s = y + y[H.parity_indices]
                ns = np.linalg.norm(s)
                if ns > 0.5:
                    y = s / ns
                    resid = float(np.linalg.norm(H.apply(y) - theta[0] * y))
                return GroundState(
                    alpha=H.alpha,
                    energy=float(theta[0]),
                    psi=y,
                    residual=resid,
                    ritz_gap=gap,
                    iterations=it,
                )
            target *= 0.1
        betas.append(b)
        basis[it] = w / b
    theta, _ = eigh_tridiagonal(np.array(alphas), np.array(betas[:-1]))
    raise ConvergenceError(
        f"Lanczos did not reach residual {tol} in {max_iter} iterations; best Ritz value {theta[0]!r}",
        best=float(theta[0]),
    )


@dataclass(frozen=True)
class DensityProfile:
    nodes: np.ndarray
    values: np.ndarray
    spacing: float

    def mass(self) -> float:
        return float(self.spacing * np.sum(self.values))


def electron_density(g: GroundState, cfg: FockConfig) -> DensityProfile:
    """Phonon-integrated electron density, rho_i = sum_n |psi(x_i, n)|^2 / h_e."""
    p = g.psi.reshape(cfg.electron_points, cfg.occupation_count)
    rho = np.sum(np.abs(p) ** 2, axis=1) / cfg.spacing
    return DensityProfile(nodes=cfg.nodes, values=rho, spacing=cfg.spacing)


def _trig_interp(rho: DensityProfile, pts: np.ndarray, L: float) -> np.ndarray:
    """Evaluate the trigonometric interpolant of periodic nodal data.

    Exact at the nodes and mass-exact through the constant Fourier mode;
    the node count is odd, so there is no ambiguous Nyquist term.
    """
    n = rho.values.size
    c = np.fft.fft(rho.values)
    m = np.rint(np.fft.fftfreq(n, 1.0 / n)).astype(int)
    ang = np.exp(1j * math.pi * np.outer(pts + L, m) / L)
    return np.real(ang @ c) / n


def rescaled_density(rho: DensityProfile, alpha: float, grid: Optional[Grid] = None) -> GridFunction:
    """The profile x -> (1/alpha) rho(x/alpha) sampled on the line grid.

    Mass is preserved up to interpolation error provided the density has
    decayed at the crystal edge; support must fit inside the grid.
    """
    if not (alpha > 0 and np.isfinite(alpha)):
        raise ValidationError("froehlich", "alpha", "alpha must be positive and finite")
    grid = grid or default_grid()
    n = rho.values.size
    L = rho.spacing * n / 2.0
    if alpha * L > grid.half_width:
        raise RangeError(
            "froehlich",
            "alpha",
            f"rescaled support half-width {alpha * L} exceeds the grid half-width {grid.half_width}",
        )
    x = grid.nodes
    inside = np.abs(x) <= alpha * L
    values = np.zeros(grid.points)
    values[inside] = _trig_interp(rho, x[inside] / alpha, L) / alpha
    return GridFunction(grid, values)


def sample_orbital(u: GridFunction, cfg: FockConfig) -> np.ndarray:
    """Sample a line profile at the electron nodes, normalized in l2."""
    if u.grid.half_width < cfg.L:
        raise RangeError(
            "froehlich", "u", f"profile grid half-width {u.grid.half_width} does not cover the crystal {cfg.L}"
        )
    psi = np.asarray(u(cfg.nodes), dtype=complex)
    nrm = np.linalg.norm(psi)
    if nrm == 0.0:
        raise ValidationError("froehlich", "u", "profile vanishes on the electron grid")
    return psi / nrm


@dataclass(frozen=True)
class AnsatzResult:
    energy: float
    weight_loss: float
    flagged: bool

    def __float__(self) -> float:
        return self.energy


def product_ansatz_energy(u: GridFunction, alpha: float, cfg: Optional[FockConfig] = None,
                          V=None) -> AnsatzResult:
    """Rayleigh quotient of (orbital) x (truncated coherent state).

    The coherent amplitudes z_j = g <u, e^{-i k_j x} u> are the
    minimizing choice at unit phonon frequency.  The state is truncated
    to the configured phonon cap and renormalized; if more than 10% of
    the coherent weight is lost to truncation the result is flagged.
    """
    cfg = cfg or FockConfig()
    if V is None:
        V = pekar.Potential("zero")
    H = build_hamiltonian(alpha, V, cfg)
    psi = sample_orbital(u, cfg)

    x = cfg.nodes
    dens = np.abs(psi) ** 2
    zs = np.array([H.g * np.sum(np.exp(-1j * k * x) * dens) for k in H.ks])

    c = np.empty(len(H.occs), dtype=complex)
    for i, occ in enumerate(H.occs):
        term = 1.0 + 0.0j
        for z, n in zip(zs, occ):
            if n:
                term *= z**n / math.sqrt(math.factorial(n))
        c[i] = term
    kept = float(np.sum(np.abs(c) ** 2))
    total = math.exp(float(np.sum(np.abs(zs) ** 2)))
    loss = 1.0 - kept / total
    c /= math.sqrt(kept)

    phi = (psi[:, None] * c[None, :]).reshape(-1)
    energy = H.rayleigh(phi)
    return AnsatzResult(energy=energy, weight_loss=loss, flagged=loss > 0.10)


def hf_check(alpha: float, V, W: perturb.TestMeasure, delta_fd: float = 1e-4,
             cfg: Optional[FockConfig] = None) -> tuple:
    """Finite-difference dE/d delta against the ground-state pairing.

    Shifting the potential by delta * W adds +alpha^2 delta W(alpha x) to
    the Hamiltonian diagonal, so the derivative of the ground energy at
    delta = 0 should equal alpha^2 <Psi, W(alpha x) Psi>.  Returns
    (finite difference, pairing).  Requires a nondegenerate ground state
    (Ritz gap above 1e-6) and a measure with a smooth density.
    """
    cfg = cfg or FockConfig()
    if not (delta_fd > 0 and np.isfinite(delta_fd)):
        raise ValidationError("froehlich", "delta_fd", "finite-difference step must be positive")
    if W.kind == "dirac":
        raise ValidationError(
            "froehlich", "W", "a point mass has no nodal density on the electron grid; use gaussian or indicator"
        )
    x = cfg.nodes
    ax = alpha * x
    if W.kind == "gaussian":
        w_nodes = np.exp(-(((ax - W.center) / W.width) ** 2)) / (W.width * math.sqrt(math.pi))
    else:
        w_nodes = (np.abs(ax - W.center) <= W.width) / (2.0 * W.width)

    H = build_hamiltonian(alpha, V, cfg)
    gs = ground_state(H)
    if not (gs.ritz_gap > 1e-6):
        raise ValidationError(
            "froehlich", "alpha", f"ground state is degenerate at this truncation (Ritz gap {gs.ritz_gap:.2e})"
        )
    p = gs.psi.reshape(cfg.electron_points, cfg.occupation_count)
    pairing = float(alpha**2 * np.sum(w_nodes * np.sum(np.abs(p) ** 2, axis=1)))

    shift = alpha**2 * delta_fd * w_nodes
    e_plus = ground_state(build_hamiltonian(alpha, V, cfg, extra_diag=shift), start=gs.psi).energy
    e_minus = ground_state(build_hamiltonian(alpha, V, cfg, extra_diag=-shift), start=gs.psi).energy
    fd = (e_plus - e_minus) / (2.0 * delta_fd)
    return fd, pairing


@dataclass(frozen=True)
class ScanRow:
    alpha: float
    E: Optional[float]
    E_over_alpha2: Optional[float]
    pairing: Optional[float]
    pekar_e: Optional[float]
    pekar_pairing: Optional[float]
    ansatz_energy: Optional[float]
    error: Optional[str] = None


def convergence_scan(alphas: Sequence[float], V, W: perturb.TestMeasure,
                     cfg: Optional[FockConfig] = None,
                     grid: Optional[Grid] = None) -> list:
    """Strong-coupling trend table: E_alpha/alpha^2 and density pairings.

    Each row reports the truncated ground energy, the pairing of W with
    the rescaled electron density, and the reference values e(V) and
    <W, u_V^2> from the line modules.  Rows fail independently: a row
    whose computation raises keeps its error message and the scan moves
    on.  No convergence rate is asserted; the table is the deliverable.
    """
    cfg = cfg or FockConfig()
    grid = grid or default_grid()
    base = pekar.minimize(V, grid)
    ref_pairing = perturb.pair(W, GridFunction(grid, base.u.values**2))
    u_v = base.u

    rows = []
    for a in alphas:
        a = float(a)
        try:
            H = build_hamiltonian(a, V, cfg)
            gs = ground_state(H)
            rho = electron_density(gs, cfg)
            rescaled = rescaled_density(rho, a, grid)
            pairing = perturb.pair(W, rescaled)
            scaled = pekar.scale(u_v, a)
            ansatz = product_ansatz_energy(scaled, a, cfg, V)
            rows.append(
                ScanRow(
                    alpha=a,
                    E=gs.energy,
                    E_over_alpha2=gs.energy / a**2,
                    pairing=pairing,
                    pekar_e=base.energy,
                    pekar_pairing=ref_pairing,
                    ansatz_energy=ansatz.energy,
                )
            )
        except (PolaronLabError, ConvergenceError) as exc:
            rows.append(
                ScanRow(
                    alpha=a, E=None, E_over_alpha2=None, pairing=None,
                    pekar_e=base.energy, pekar_pairing=ref_pairing,
                    ansatz_energy=None, error=str(exc),
                )
            )
    return rows
