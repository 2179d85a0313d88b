"""Shared domain types, configuration indexing and seeding.

RIS configurations are handled as ``uint8`` numpy arrays of shape ``(N,)`` (or
``(C, N)`` for batches) holding 0/1 entries. Bit ``j`` of a configuration is
bit ``j`` of its integer index, with bit 0 the least significant.

Random streams are numpy ``Generator`` objects backed by PCG64
(``numpy.random.default_rng``). Datasets are therefore reproducible for a
fixed numpy major version; ``RNG_ALGORITHM`` is written into every artifact
header so a changed stream is detectable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RNG_ALGORITHM = "numpy-PCG64-v1"


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ValidationError(ValueError):
    """An input file or structure violates its schema or invariants."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (singular matrix, divergence, non-finite)."""


def config_from_index(index: int, n: int) -> np.ndarray:
    """Return the N-bit configuration whose bit j is bit j of ``index``."""
    if n <= 0:
        raise DomainError(f"element count must be positive, got {n}")
    index = int(index)
    if index < 0 or index >= 1 << n:
        raise DomainError(f"index {index} out of range for N={n}")
    return ((index >> np.arange(n)) & 1).astype(np.uint8)


def configs_from_indices(indices, n: int) -> np.ndarray:
    """Vectorized :func:`config_from_index`; returns shape ``(len(indices), n)``."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= 1 << n):
        raise DomainError(f"index out of range for N={n}")
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def index_of(config) -> int:
    bits = validate_config(config)
    return int(np.dot(bits.astype(np.int64), 1 << np.arange(bits.size, dtype=np.int64)))


def indices_of(configs) -> np.ndarray:
    """Vectorized :func:`index_of` over the rows of a ``(C, N)`` array."""
    bits = np.asarray(configs, dtype=np.int64)
    return bits @ (1 << np.arange(bits.shape[-1], dtype=np.int64))


def validate_config(config, n: int | None = None) -> np.ndarray:
    bits = np.asarray(config)
    if bits.ndim != 1 or bits.size == 0:
        raise DomainError("configuration must be a non-empty 1-D bit vector")
    if n is not None and bits.size != n:
        raise DomainError(f"configuration has {bits.size} bits, expected {n}")
    if not np.all((bits == 0) | (bits == 1)):
        raise DomainError("configuration entries must be 0 or 1")
    return bits.astype(np.uint8)


def bits_to_str(config) -> str:
    return "".join("1" if b else "0" for b in np.asarray(config))


def str_to_bits(text: str) -> np.ndarray:
    if not text or any(ch not in "01" for ch in text):
        raise ValidationError(f"not a bit string: {text!r}")
    return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic PCG64 stream for ``seed`` (any non-negative 64-bit int)."""
    return np.random.default_rng(int(seed))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream derived from ``(seed, *key)``, e.g. a worker id."""
    return np.random.default_rng([int(seed), *map(int, key)])


@dataclass(frozen=True)
class FrequencyGrid:
    frequencies: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or f.size < 1:
            raise ValidationError("frequency grid needs at least one bin")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ValidationError("frequencies must be positive and finite")
        if np.any(np.diff(f) <= 0):
            raise ValidationError("frequencies must be strictly increasing")
        f.setflags(write=False)
        object.__setattr__(self, "frequencies", f)

    @classmethod
    def linspace(cls, f_min: float, f_max: float, bins: int) -> "FrequencyGrid":
        if bins < 1:
            raise ValidationError(f"bin count must be positive, got {bins}")
        if bins == 1:
            return cls(np.array([0.5 * (f_min + f_max)]))
        return cls(np.linspace(f_min, f_max, bins))

    @property
    def size(self) -> int:
        return self.frequencies.size


@dataclass(frozen=True)
class LinkBudget:
    noise_variance: float

    def __post_init__(self):
        if not (self.noise_variance > 0 and np.isfinite(self.noise_variance)):
            raise DomainError(f"noise variance must be positive, got {self.noise_variance}")

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "LinkBudget":
        """Unit transmit power per bin: sigma^2 = 10^(-snr/10)."""
        return cls(10.0 ** (-snr_db / 10.0))


def validate_moments(m, b: int | None = None) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if b is not None and m.shape[-1] != b:
        raise ValidationError(f"moment vector has {m.shape[-1]} bins, expected {b}")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise ValidationError("moments must be finite and non-negative")
    return m


def validate_power(rho, b: int | None = None) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 1 or (b is not None and rho.size != b):
        raise DomainError("power allocation length does not match the bin count")
    if not np.all(np.isfinite(rho)) or np.any(rho < 0):
        raise DomainError("power allocation entries must be non-negative")
    return rho
