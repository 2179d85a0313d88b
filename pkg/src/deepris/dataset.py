"""Supervised dataset of (configuration, per-bin mean |H|^2) pairs.

Records are generated already grouped by configuration: every sampled
configuration is simulated at ``n_angles`` random perturber angles and the
squared magnitudes are averaged per bin.

File format (text, one record per line)::

    # deepris-dataset schema=1 N=21 B=30 C=500 rng=numpy-PCG64-v1
    010011...<TAB>m_1 m_2 ... m_B

Floats are written with ``repr`` so a save/load round trip is exact.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (RNG_ALGORITHM, DomainError, ValidationError, bits_to_str, child_rng,
                   configs_from_indices, indices_of, seeded_rng, str_to_bits, validate_moments)
from .physics import Environment, StaticFactorization, draw_angles, moments_at_angles

SCHEMA_VERSION = 1


class DatasetFormatError(ValidationError):
    pass


@dataclass(frozen=True)
class DatasetRecord:
    config: np.ndarray
    target: np.ndarray


@dataclass(frozen=True)
class Dataset:
    """Column storage for records: ``configs`` is ``(C, N)`` uint8, ``targets`` ``(C, B)``."""

    configs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        configs = np.asarray(self.configs, dtype=np.uint8)
        targets = validate_moments(np.asarray(self.targets, dtype=float))
        if configs.ndim != 2 or targets.ndim != 2 or configs.shape[0] != targets.shape[0]:
            raise ValidationError("configs and targets must be aligned 2-D arrays")
        object.__setattr__(self, "configs", configs)
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return self.configs.shape[0]

    def __iter__(self):
        for c, t in zip(self.configs, self.targets):
            yield DatasetRecord(c, t)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.configs[idx], self.targets[idx])

    @property
    def n(self) -> int:
        return self.configs.shape[1]

    @property
    def b(self) -> int:
        return self.targets.shape[1]

    @classmethod
    def from_records(cls, records) -> "Dataset":
        records = list(records)
        return cls(np.array([r.config for r in records]), np.array([r.target for r in records]))


@dataclass(frozen=True)
class DatasetSplit:
    train: Dataset
    validation: Dataset
    test: Dataset
    indices: tuple[np.ndarray, np.ndarray, np.ndarray]


def generate_dataset(env: Environment, c: int, n_angles: int, seed: int, *,
                     threads: int = 1, base: StaticFactorization | None = None) -> Dataset:
    """Draw ``c`` distinct configurations and simulate their moment vectors.

    Configuration ``i`` uses its own angle stream ``child_rng(seed, i)``, so
    the output does not depend on ``threads``.
    """
    n = env.n
    if c < 1 or c > 2**n:
        raise DomainError(f"cannot draw {c} distinct configurations from 2^{n}")
    idx = seeded_rng(seed).choice(2**n, size=c, replace=False)
    configs = configs_from_indices(idx, n)
    base = base if base is not None else StaticFactorization(env)

    def one(i):
        angles = draw_angles(child_rng(seed, i), n_angles)
        return moments_at_angles(base, configs[i:i + 1], angles)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            targets = list(pool.map(one, range(c)))
    else:
        targets = [one(i) for i in range(c)]
    return Dataset(configs, np.array(targets))


def split_sizes(c: int, fractions=(0.8, 0.1, 0.1)) -> tuple[int, int, int]:
    f_train, f_val, f_test = fractions
    if min(fractions) < 0 or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise DomainError(f"split fractions must be non-negative and sum to 1: {fractions}")
    n_train = int(math.floor(f_train * c + 1e-9))
    rest = c - n_train
    # validation takes the extra record when the remainder is odd
    n_val = int(math.ceil(rest * f_val / (f_val + f_test) - 1e-9)) if f_val + f_test > 0 else 0
    sizes = (n_train, n_val, rest - n_val)
    if min(sizes) <= 0:
        raise DomainError(f"split of {c} records by {fractions} leaves an empty subset: {sizes}")
    return sizes


def split_dataset(ds: Dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> DatasetSplit:
    n_train, n_val, _ = split_sizes(len(ds), fractions)
    perm = seeded_rng(seed).permutation(len(ds))
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return DatasetSplit(*(ds.subset(p) for p in parts), indices=parts)


def save_dataset(ds: Dataset, path) -> None:
    lines = [f"# deepris-dataset schema={SCHEMA_VERSION} N={ds.n} B={ds.b} C={len(ds)} rng={RNG_ALGORITHM}"]
    for c, t in zip(ds.configs, ds.targets):
        lines.append(bits_to_str(c) + "\t" + " ".join(repr(float(v)) for v in t))
    Path(path).write_text("\n".join(lines) + "\n")


def _header(line: str, kind: str) -> dict[str, str]:
    parts = line.split()
    if len(parts) < 2 or parts[0] != "#" or parts[1] != kind:
        raise DatasetFormatError(f"line 1: not a {kind} header")
    try:
        return dict(p.split("=", 1) for p in parts[2:])
    except ValueError as exc:
        raise DatasetFormatError(f"line 1: malformed header field") from exc


def load_dataset(path, *, n: int | None = None, b: int | None = None) -> Dataset:
    """Parse a dataset file; ``n``/``b`` check it against a scenario."""
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DatasetFormatError("line 1: empty dataset file")
    head = _header(lines[0], "deepris-dataset")
    try:
        version, fn, fb, fc = (int(head[k]) for k in ("schema", "N", "B", "C"))
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError("line 1: header needs integer schema, N, B, C") from exc
    if version != SCHEMA_VERSION:
        raise DatasetFormatError(f"line 1: unsupported schema {version}")
    if n is not None and fn != n:
        raise ValidationError(f"dataset has N={fn}, scenario has N={n}")
    if b is not None and fb != b:
        raise ValidationError(f"dataset has B={fb}, scenario has B={b}")
    configs = np.empty((fc, fn), dtype=np.uint8)
    targets = np.empty((fc, fb))
    body = lines[1:]
    if len(body) != fc:
        raise DatasetFormatError(f"line {len(lines) + 1}: expected {fc} records, found {len(body)}")
    for i, line in enumerate(body):
        lineno = i + 2
        bits, sep, rest = line.partition("\t")
        vals = rest.split()
        if not sep or len(bits) != fn or len(vals) != fb:
            raise DatasetFormatError(f"line {lineno}: expected {fn} bits and {fb} values")
        try:
            configs[i] = str_to_bits(bits)
            targets[i] = [float(v) for v in vals]
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from exc
    try:
        return Dataset(configs, targets)
    except ValidationError as exc:
        raise DatasetFormatError(str(exc)) from exc


def save_split(split: DatasetSplit, path, *, seed: int, fractions) -> None:
    lines = [f"# deepris-split schema={SCHEMA_VERSION} seed={seed} fractions={','.join(map(repr, fractions))}"]
    for name, idx in zip(("train", "validation", "test"), split.indices):
        lines.append(name + "\t" + " ".join(str(int(i)) for i in idx))
    Path(path).write_text("\n".join(lines) + "\n")


def load_split(ds: Dataset, path) -> DatasetSplit:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise DatasetFormatError("line 1: empty split manifest")
    _header(lines[0], "deepris-split")
    parts = {}
    for lineno, line in enumerate(lines[1:], start=2):
        name, _, rest = line.partition("\t")
        try:
            parts[name] = np.array([int(v) for v in rest.split()], dtype=np.int64)
        except ValueError as exc:
            raise DatasetFormatError(f"line {lineno}: {exc}") from exc
    try:
        idx = tuple(parts[k] for k in ("train", "validation", "test"))
    except KeyError as exc:
        raise DatasetFormatError(f"split manifest lacks the {exc} subset") from exc
    allidx = np.concatenate(idx)
    if sorted(allidx.tolist()) != list(range(len(ds))):
        raise DatasetFormatError("split manifest is not a partition of the dataset")
    return DatasetSplit(*(ds.subset(i) for i in idx), indices=idx)


def config_indices(ds: Dataset) -> np.ndarray:
    return indices_of(ds.configs)
