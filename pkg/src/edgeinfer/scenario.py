"""Random problem instances: dataset placements, fading channels, edge geometry, IRS links.

Random numbers come from numpy's ``Generator`` with the PCG64 bit generator.
Every trial gets its own generator seeded by :func:`trial_seed`, which hashes
(master seed, experiment name, sweep index, trial index) through
``numpy.random.SeedSequence``; results therefore never depend on trial order
or worker count.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument

# -------------------------------------------------------------------- seeding


def trial_seed(master_seed, experiment, sweep_index, trial):
    """64-bit seed for one Monte Carlo trial (pure function of its arguments)."""
    tag = zlib.crc32(str(experiment).encode("utf-8"))
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), tag, int(sweep_index), int(trial)])
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def crandn(rng, shape, var=1.0):
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    z = rng.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return np.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


# ------------------------------------------------------------------ placement


@dataclass(frozen=True)
class Placement:
    """Which device stores which file.

    ``stores[k]`` is the ordered tuple of file indices held by device ``k``.
    """

    num_devices: int
    num_files: int
    files_per_device: int
    stores: tuple

    def __post_init__(self):
        K, N, F = self.num_devices, self.num_files, self.files_per_device
        if K < 1 or N < 1 or F < 1:
            raise InvalidArgument("device count, file count and files per device must be >= 1")
        if F > N:
            raise InvalidArgument(f"files per device ({F}) exceeds file count ({N})")
        stores = tuple(tuple(int(f) for f in s) for s in self.stores)
        if len(stores) != K:
            raise InvalidArgument(f"expected {K} storage sets, got {len(stores)}")
        for k, s in enumerate(stores):
            if len(s) != F or len(set(s)) != F:
                raise InvalidArgument(f"device {k} must store exactly {F} distinct files, got {s}")
            if any(f < 0 or f >= N for f in s):
                raise InvalidArgument(f"device {k} stores a file index outside [0, {N})")
        object.__setattr__(self, "stores", stores)

    def holders(self, n):
        """Devices storing file ``n``."""
        return tuple(k for k, s in enumerate(self.stores) if n in s)

    def replication(self):
        """Number of devices storing each file."""
        counts = np.zeros(self.num_files, int)
        for s in self.stores:
            counts[list(s)] += 1
        return counts


def gen_uniform_placement(K, N_f, F):
    """Cyclic placement: device ``i`` stores files ``(F*i + t) mod N_f`` for ``t < F``."""
    K, N_f, F = int(K), int(N_f), int(F)
    if K < 1 or N_f < 1 or F < 1:
        raise InvalidArgument("K, N_f and F must all be >= 1")
    if F > N_f:
        raise InvalidArgument(f"F={F} exceeds N_f={N_f}")
    stores = tuple(tuple((F * i + t) % N_f for t in range(F)) for i in range(K))
    return Placement(K, N_f, F, stores)


# ------------------------------------------------------ shuffling channels


@dataclass(frozen=True)
class InterferenceChannel:
    """Equivalent K-user interference channel; ``coeffs[k, j]`` is device j -> device k."""

    coeffs: np.ndarray
    provenance: str = "iid"

    def __post_init__(self):
        h = np.asarray(self.coeffs, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise InvalidArgument("channel must be a square matrix")
        if not np.all(np.isfinite(h)):
            raise InvalidArgument("channel contains non-finite entries")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "coeffs", h)

    @property
    def num_devices(self):
        return self.coeffs.shape[0]

    def scaled(self, c):
        return InterferenceChannel(c * self.coeffs, self.provenance)


def gen_iid_channel(K, rng):
    """K x K matrix of i.i.d. CN(0, 1) coefficients."""
    if K < 2:
        raise InvalidArgument("an interference channel needs K >= 2")
    return InterferenceChannel(crandn(rng, (K, K)), "iid")


def gen_shuffle_cascade(K, M, rng, beta=0.5):
    """Folded IRS cascade ``a[k, j, :]`` (K x K x M), i.i.d. CN(0, beta)."""
    if M < 0:
        raise InvalidArgument("element count must be nonnegative")
    return crandn(rng, (K, K, M), beta)


# ------------------------------------------------------------ IRS phases


@dataclass(frozen=True)
class PhaseVector:
    """Unit-modulus reflection coefficients ``v_m = exp(1j * theta_m)``."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=complex).ravel()
        if v.size and np.max(np.abs(np.abs(v) - 1.0)) > 1e-9:
            raise InvalidArgument("phase vector entries must have unit modulus")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_angles(cls, theta):
        return cls(np.exp(1j * np.asarray(theta, dtype=float)))

    @classmethod
    def random(cls, M, rng):
        return cls.from_angles(rng.uniform(0.0, 2 * np.pi, size=M))

    @classmethod
    def project(cls, z):
        """Entrywise projection of a complex vector onto the unit circle (0 -> 1)."""
        z = np.asarray(z, dtype=complex)
        a = np.abs(z)
        return cls(np.where(a > 0, z / np.where(a > 0, a, 1.0), 1.0))

    @property
    def angles(self):
        return np.mod(np.angle(self.v), 2 * np.pi)

    @property
    def size(self):
        return self.v.size


def compose_irs_channel(direct, cascade, v):
    """Effective channel ``direct + cascade @ conj(v)``.

    ``cascade`` carries the IRS elements on its last axis and otherwise
    matches ``direct``. For in-edge links build it with :func:`edge_cascade`
    (giving ``h + F^H diag(v)^H g``); for shuffling pass ``a[k, j, :]``
    directly (giving ``h[k, j] + v^H a[k, j]``).
    """
    direct = np.asarray(direct, dtype=complex)
    cascade = np.asarray(cascade, dtype=complex)
    if isinstance(v, PhaseVector):
        v = v.v
    else:
        v = PhaseVector(v).v
    if cascade.shape != direct.shape + (v.size,):
        raise InvalidArgument(
            f"cascade shape {cascade.shape} inconsistent with direct {direct.shape} and {v.size} elements"
        )
    if v.size == 0:
        return direct.copy()
    return direct + cascade @ v.conj()


def edge_cascade(ap_to_irs, irs_to_user):
    """Cascade tensor ``C[n, k, l, m] = conj(F_n[m, l]) * g_k[m]``.

    Parameters
    ----------
    ap_to_irs : (N, M, L) complex
    irs_to_user : (K, M) complex
    """
    F = np.asarray(ap_to_irs, dtype=complex)
    g = np.asarray(irs_to_user, dtype=complex)
    return np.einsum("nml,km->nklm", F.conj(), g)


# ------------------------------------------------------------ edge geometry

DEFAULT_AP_POSITIONS = np.array([[0.0, 0.0], [200.0, 0.0], [100.0, 200.0]])


def pathloss_direct_db(d):
    """AP-user pathloss in dB at distance ``d`` meters."""
    return 32.6 + 36.7 * np.log10(np.maximum(d, 1.0))


def pathloss_irs_db(d):
    """AP-IRS and IRS-user pathloss in dB (near line-of-sight exponent)."""
    return 30.0 + 22.0 * np.log10(np.maximum(d, 1.0))


def db_to_lin(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def dbm_to_watt(x_dbm):
    return 10.0 ** ((np.asarray(x_dbm, dtype=float) - 30.0) / 10.0)


def ap_positions(num_aps, side=200.0):
    """Fixed AP sites: the three documented ones for N=3, otherwise evenly on the inscribed circle."""
    if num_aps == 3:
        return DEFAULT_AP_POSITIONS * (side / 200.0)
    ang = 2 * np.pi * np.arange(num_aps) / max(num_aps, 1) - np.pi / 2
    return side / 2 + (side / 2) * np.stack([np.cos(ang), np.sin(ang)], axis=1)


@dataclass(frozen=True)
class IrsLinkSet:
    """IRS cascade gains of an edge scenario (``M = 0`` means no IRS)."""

    ap_to_irs: np.ndarray  # (N, M, L)
    irs_to_user: np.ndarray  # (K, M)

    @property
    def num_elements(self):
        return self.irs_to_user.shape[1]

    def cascade(self):
        return edge_cascade(self.ap_to_irs, self.irs_to_user)


@dataclass(frozen=True)
class EdgeConfig:
    """Parameters of a geometric in-edge inference scenario."""

    num_aps: int = 3
    antennas: int = 5
    num_users: int = 10
    num_elements: int = 25
    side: float = 200.0
    noise_dbm: float = -100.0
    p_max: float = 1.0
    p_c: float = 0.45
    eta: float = 1.0
    sinr_db: float = 0.0
    antenna_gain_db: float = 10.0
    irs_position: tuple = (100.0, 100.0)

    def __post_init__(self):
        for name in ("num_aps", "antennas", "num_users"):
            if int(getattr(self, name)) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if int(self.num_elements) < 0:
            raise InvalidArgument("num_elements must be >= 0")
        if not self.side > 0:
            raise InvalidArgument("side must be positive")
        if not self.p_max > 0:
            raise InvalidArgument("p_max must be positive")
        if not self.p_c >= 0:
            raise InvalidArgument("p_c must be nonnegative")
        if not self.eta > 0:
            raise InvalidArgument("eta must be positive")
        if not np.isfinite(self.noise_dbm):
            raise InvalidArgument("noise_dbm must be finite")


@dataclass(frozen=True)
class EdgeScenario:
    """AP/user/IRS layout with channels and power parameters.

    ``direct[n, k]`` is the L-vector channel from AP n to user k; user k
    receives ``sum_n direct[n, k]^H x_n``.
    """

    ap_pos: np.ndarray
    user_pos: np.ndarray
    irs_pos: np.ndarray
    direct: np.ndarray  # (N, K, L)
    irs: IrsLinkSet
    noise_power: float
    p_max: float
    p_c: float
    gamma: np.ndarray  # (K,)
    eta: float = 1.0
    side: float = 200.0

    def __post_init__(self):
        if not self.noise_power > 0:
            raise InvalidArgument("noise power must be positive")
        if not self.p_max > 0:
            raise InvalidArgument("per-AP power budget must be positive")
        if not self.p_c >= 0:
            raise InvalidArgument("computation power must be nonnegative")
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if g.size == 1 and self.num_users > 1:
            g = np.full(self.num_users, g[0])
        if g.size != self.num_users or np.any(g <= 0):
            raise InvalidArgument("SINR targets must be positive, one per user")
        object.__setattr__(self, "gamma", g)
        N, K, L = self.direct.shape
        if self.irs.ap_to_irs.shape[0] != N or self.irs.irs_to_user.shape[0] != K:
            raise InvalidArgument("IRS link dimensions inconsistent with the scenario")
        if self.irs.num_elements and self.irs.ap_to_irs.shape[2] != L:
            raise InvalidArgument("AP-IRS link antenna count mismatch")

    @property
    def num_aps(self):
        return self.direct.shape[0]

    @property
    def num_users(self):
        return self.direct.shape[1]

    @property
    def antennas(self):
        return self.direct.shape[2]

    @property
    def num_elements(self):
        return self.irs.num_elements

    def effective_channels(self, phases=None):
        """Composite channels (N, K, L) for a phase vector (direct links if None or M=0)."""
        if phases is None or self.num_elements == 0:
            return self.direct.copy()
        return compose_irs_channel(self.direct, self.irs.cascade(), phases)

    def with_gamma(self, gamma):
        return replace(self, gamma=np.asarray(gamma, dtype=float))

    def without_irs(self):
        N, K, L = self.direct.shape
        empty = IrsLinkSet(np.zeros((N, 0, L), complex), np.zeros((K, 0), complex))
        return replace(self, irs=empty)


def gen_geometric_scenario(cfg: EdgeConfig, rng):
    """Draw users uniformly in the square and Rayleigh channels with pathloss.

    Draw order is users, direct channels, AP-IRS links, IRS-user links, so the
    direct part of a scenario does not depend on the IRS size.
    """
    N, L, K, M = int(cfg.num_aps), int(cfg.antennas), int(cfg.num_users), int(cfg.num_elements)
    aps = ap_positions(N, cfg.side)
    users = rng.uniform(0.0, cfg.side, size=(K, 2))
    irs_pos = np.asarray(cfg.irs_position, dtype=float)

    d_au = np.linalg.norm(aps[:, None, :] - users[None, :, :], axis=-1)  # (N, K)
    beta_au = db_to_lin(cfg.antenna_gain_db - pathloss_direct_db(d_au))
    direct = np.sqrt(beta_au)[..., None] * crandn(rng, (N, K, L))

    d_ai = np.linalg.norm(aps - irs_pos, axis=-1)  # (N,)
    d_iu = np.linalg.norm(users - irs_pos, axis=-1)  # (K,)
    beta_ai = db_to_lin(cfg.antenna_gain_db - pathloss_irs_db(d_ai))
    beta_iu = db_to_lin(-pathloss_irs_db(d_iu))
    F = np.sqrt(beta_ai)[:, None, None] * crandn(rng, (N, M, L))
    g = np.sqrt(beta_iu)[:, None] * crandn(rng, (K, M))

    return EdgeScenario(
        ap_pos=aps,
        user_pos=users,
        irs_pos=irs_pos,
        direct=direct,
        irs=IrsLinkSet(F, g),
        noise_power=float(dbm_to_watt(cfg.noise_dbm)),
        p_max=float(cfg.p_max),
        p_c=float(cfg.p_c),
        gamma=np.full(K, float(db_to_lin(cfg.sinr_db))),
        eta=float(cfg.eta),
        side=float(cfg.side),
    )
