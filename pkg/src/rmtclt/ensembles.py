"""Random matrix generation: entry laws, population shapes, S, B, Delta, F, G.

Data matrices are ``p x n`` with one observation per column, following the
column-vector convention ``X = (X_1, ..., X_n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math
import struct

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotHermitian, SingularSy
from .stieltjes import SpectralWeights

ENTRY_KINDS = ("real-gaussian", "complex-gaussian", "real-threepoint", "custom-discrete")


@dataclass(frozen=True)
class EntryLaw:
    """Distribution of the i.i.d. entries ``X_jk``.

    ``kappa`` is 2 for real laws and 1 for complex ones; ``beta`` is the
    excess ``E|X|^4 - 1 - kappa`` (zero for all built-in laws).
    """

    kind: str = "real-gaussian"
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind not in ENTRY_KINDS:
            raise ValueError(f"unknown entry law {self.kind!r}; choose from {ENTRY_KINDS}")
        if self.kind == "custom-discrete":
            vals = tuple(complex(v) for v in self.values)
            probs = tuple(float(q) for q in self.probs)
            if not vals or len(vals) != len(probs):
                raise ValueError("custom-discrete law needs matching values and probs")
            if any(q < 0 for q in probs) or abs(math.fsum(probs) - 1) > 1e-12:
                raise ValueError("probs must be nonnegative and sum to 1")
            object.__setattr__(self, "values", vals)
            object.__setattr__(self, "probs", probs)
            mean = sum(q * v for q, v in zip(probs, vals))
            var = math.fsum(q * abs(v) ** 2 for q, v in zip(probs, vals))
            if abs(mean) > 1e-12 or abs(var - 1) > 1e-12:
                raise ValueError("custom-discrete law must have mean 0 and E|X|^2 = 1")

    @property
    def is_complex(self):
        if self.kind == "custom-discrete":
            return any(v.imag != 0 for v in self.values)
        return self.kind == "complex-gaussian"

    @property
    def kappa(self):
        return 1 if self.is_complex else 2

    @property
    def fourth_abs_moment(self):
        if self.kind == "custom-discrete":
            return math.fsum(q * abs(v) ** 4 for q, v in zip(self.probs, self.values))
        return 2.0 if self.kind == "complex-gaussian" else 3.0

    @property
    def second_raw_moment(self):
        if self.kind == "custom-discrete":
            return complex(sum(q * v * v for q, v in zip(self.probs, self.values)))
        return 0j if self.is_complex else 1 + 0j

    @property
    def beta(self):
        return self.fourth_abs_moment - 1 - self.kappa

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "custom-discrete":
            d["values"] = [[v.real, v.imag] for v in self.values]
            d["probs"] = list(self.probs)
        return d

    @classmethod
    def from_config(cls, cfg):
        if isinstance(cfg, str):
            return cls(cfg)
        cfg = dict(cfg)
        if "values" in cfg:
            cfg["values"] = tuple(complex(*v) if isinstance(v, (list, tuple)) else v for v in cfg["values"])
            cfg["probs"] = tuple(cfg["probs"])
        return cls(**cfg)


THREE_POINT = np.array([-math.sqrt(3.0), 0.0, math.sqrt(3.0)])
THREE_POINT_P = np.array([1 / 6, 2 / 3, 1 / 6])


def draw_entries(p, n, law=EntryLaw(), seed=0):
    """``p x n`` matrix of i.i.d. entries from ``law``; deterministic in ``seed``."""
    if p < 1 or n < 1:
        raise ValueError("p and n must be >= 1")
    rng = np.random.default_rng(seed)
    if law.kind == "real-gaussian":
        return rng.standard_normal((p, n))
    if law.kind == "complex-gaussian":
        return (rng.standard_normal((p, n)) + 1j * rng.standard_normal((p, n))) / math.sqrt(2.0)
    if law.kind == "real-threepoint":
        return rng.choice(THREE_POINT, size=(p, n), p=THREE_POINT_P)
    vals = np.array(law.values)
    out = rng.choice(vals, size=(p, n), p=np.array(law.probs))
    return out if law.is_complex else out.real


@dataclass(frozen=True)
class PopulationShape:
    """Diagonal population covariance ``T_p``."""

    kind: str = "identity"
    diag_values: tuple = ()
    p: int | None = None

    def __post_init__(self):
        if self.kind not in ("identity", "diagonal"):
            raise ValueError("PopulationShape kind must be 'identity' or 'diagonal'")
        if self.kind == "diagonal":
            d = tuple(float(v) for v in self.diag_values)
            if not d or any(v <= 0 for v in d):
                raise ValueError("diagonal values must be positive")
            object.__setattr__(self, "diag_values", d)
            object.__setattr__(self, "p", len(d))

    @classmethod
    def identity(cls, p=None):
        return cls("identity", (), p)

    @classmethod
    def two_level(cls, p, low=1.0, high=2.0):
        """``diag(low, ..., low, high, ..., high)`` with the split at ``p // 2``."""
        return cls("diagonal", (low,) * (p - p // 2) + (high,) * (p // 2))

    def diag(self, p):
        if self.kind == "identity":
            return np.ones(p)
        if p != self.p:
            raise DimensionMismatch(f"shape has dimension {self.p}, data has {p}")
        return np.asarray(self.diag_values)

    def sqrt_diag(self, p):
        return np.sqrt(self.diag(p))

    def spectral_weights(self, p=None):
        """ESD ``H_p`` of ``T_p`` as exact atoms."""
        if self.kind == "identity":
            return SpectralWeights.point_mass(1.0)
        return SpectralWeights.from_values(self.diag_values)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "diagonal":
            d["diag_values"] = list(self.diag_values)
        return d

    @classmethod
    def from_config(cls, cfg):
        if cfg is None:
            return cls.identity()
        if isinstance(cfg, str):
            return cls(cfg)
        cfg = dict(cfg)
        if cfg.get("kind") == "two-level":
            return cls.two_level(int(cfg["p"]), cfg.get("low", 1.0), cfg.get("high", 2.0))
        if "diag_values" in cfg:
            cfg["diag_values"] = tuple(cfg["diag_values"])
        return cls(**cfg)


def _gammas(entries, shape):
    entries = np.asarray(entries)
    if entries.ndim != 2:
        raise DimensionMismatch("entries must be a p x n matrix")
    p, n = entries.shape
    return shape.sqrt_diag(p)[:, None] * entries / math.sqrt(n)


def _hermitize(m):
    return 0.5 * (m + m.conj().T)


def simplified_cov(entries, shape=PopulationShape()):
    """``B = (1/n) sum_i T^{1/2} X_i X_i^* T^{1/2}`` and its eigenvalues (descending)."""
    g = _gammas(entries, shape)
    b = _hermitize(g @ g.conj().T)
    return b, hermitian_eigs(b)


def centralized_cov(entries, shape=PopulationShape()):
    """Mean-corrected covariance ``S`` with ``1/(n-1)`` normalization, eigenvalues descending."""
    entries = np.asarray(entries)
    if entries.ndim != 2:
        raise DimensionMismatch("entries must be a p x n matrix")
    p, n = entries.shape
    if n < 2:
        raise DimensionMismatch("centralized covariance needs n >= 2")
    c = entries - entries.mean(axis=1, keepdims=True)
    c = shape.sqrt_diag(p)[:, None] * c
    s = _hermitize(c @ c.conj().T) / (n - 1)
    return s, hermitian_eigs(s)


def delta_matrix(entries, shape=PopulationShape()):
    """``Delta = (1/(n-1)) sum_{j != k} gamma_j gamma_k^*`` so that ``S = B - Delta``."""
    g = _gammas(entries, shape)
    n = g.shape[1]
    if n < 2:
        raise DimensionMismatch("Delta needs n >= 2")
    gbar = g.mean(axis=1, keepdims=True)
    b = g @ g.conj().T
    return _hermitize((n * n / (n - 1)) * (gbar @ gbar.conj().T) - b / (n - 1))


def hermitian_eigs(m, check=True):
    """Full spectrum of a Hermitian matrix, sorted descending."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch("matrix must be square")
    if check:
        scale = max(np.linalg.norm(m), 1e-300)
        if np.linalg.norm(m - m.conj().T) > 1e-12 * scale:
            raise NotHermitian("matrix is not Hermitian within 1e-12 relative")
    return np.linalg.eigvalsh(m)[::-1]


@dataclass(frozen=True)
class MatrixSample:
    """One realized draw together with its derived matrices."""

    p: int
    n: int
    entries: np.ndarray = field(repr=False)
    shape: PopulationShape = field(default=PopulationShape(), repr=False)
    seed: int | None = None

    @cached_property
    def gammas(self):
        return _gammas(self.entries, self.shape)

    @cached_property
    def B(self):
        g = self.gammas
        return _hermitize(g @ g.conj().T)

    @cached_property
    def S(self):
        return centralized_cov(self.entries, self.shape)[0]

    @cached_property
    def Delta(self):
        return delta_matrix(self.entries, self.shape)

    @cached_property
    def eigs_S(self):
        return hermitian_eigs(self.S, check=False)

    @cached_property
    def eigs_B(self):
        return hermitian_eigs(self.B, check=False)

    @cached_property
    def downdated(self):
        """``B - n gbar gbar^*`` (equals ``(n-1)/n * S``)."""
        g = self.gammas
        gbar = g.mean(axis=1, keepdims=True)
        return _hermitize(self.B - self.n * (gbar @ gbar.conj().T))


def draw_sample(p, n, law=EntryLaw(), shape=PopulationShape(), seed=0):
    return MatrixSample(p, n, draw_entries(p, n, law, seed), shape, seed)


@dataclass(frozen=True)
class FPair:
    """Centralized ``F = S_x S_y^{-1}`` and simplified ``G = B_x B_y^{-1}`` spectra."""

    sample_x: MatrixSample
    sample_y: MatrixSample
    eigs_F: np.ndarray = field(repr=False)
    eigs_G: np.ndarray = field(repr=False)

    @property
    def p(self):
        return self.sample_x.p


def _generalized_eigs(a, b, what):
    scale = np.linalg.norm(b, 2)
    try:
        w = scipy.linalg.eigh(b, eigvals_only=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SingularSy(str(exc)) from exc
    if w.min() <= 1e-10 * scale:
        raise SingularSy(f"{what} is not positive definite (min eigenvalue {w.min():.3e})")
    return scipy.linalg.eigh(a, b, eigvals_only=True)[::-1]


def build_f_pair(entries_x, entries_y, shape=PopulationShape(), seeds=(None, None)):
    """Spectra of the centralized and simplified F-matrices.

    Eigenvalues come from the symmetric-definite pencil ``(S_x, S_y)``, i.e.
    the spectrum of ``S_y^{-1/2} S_x S_y^{-1/2}``.
    """
    entries_x, entries_y = np.asarray(entries_x), np.asarray(entries_y)
    if entries_x.shape[0] != entries_y.shape[0]:
        raise DimensionMismatch("X and Y must have the same dimension p")
    p, big_n = entries_y.shape
    if p > big_n - 1:
        raise DimensionMismatch(f"F-matrix needs p <= N - 1 (p={p}, N={big_n})")
    sx = MatrixSample(p, entries_x.shape[1], entries_x, shape, seeds[0])
    sy = MatrixSample(p, big_n, entries_y, shape, seeds[1])
    eigs_f = _generalized_eigs(sx.S, sy.S, "S_y")
    eigs_g = _generalized_eigs(sx.B, sy.B, "B_y")
    return FPair(sx, sy, eigs_f, eigs_g)


# ---------------------------------------------------------------------------
# debug dump: 16-byte header then little-endian float64, row-major
# ---------------------------------------------------------------------------

_MAGIC = b"RMTM"
_VERSION = 1
_HEADER = struct.Struct("<4sHHII")


def dump_matrix(matrix, path):
    """Write ``matrix`` as ``RMTM`` binary (complex entries interleaved re, im)."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DimensionMismatch("only 2-D matrices can be dumped")
    is_complex = np.iscomplexobj(matrix)
    p, n = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, int(is_complex), p, n))
        data = matrix.astype("<c16" if is_complex else "<f8", copy=False)
        fh.write(np.ascontiguousarray(data).tobytes(order="C"))


def load_matrix(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("file too short for RMTM header")
    magic, version, flags, p, n = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not an RMTM v1 file")
    dtype = "<c16" if flags & 1 else "<f8"
    body = np.frombuffer(raw, dtype=dtype, offset=_HEADER.size)
    if body.size != p * n:
        raise ValueError("RMTM payload size does not match header")
    return body.reshape(p, n).copy()
