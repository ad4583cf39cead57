"""Dataset ingestion, preprocessing, splitting, and synthetic generators.

Canonical dataset files are plain UTF-8 CSVs with '.' decimal points, an
optional header row, and one label column selected by index or name. The
twelve reference benchmark datasets are tracked in ``UCI_REGISTRY`` with
their expected sizes; ``scripts/fetch_uci.py`` documents how the canonical
copies are produced from the upstream distribution files.
"""
import csv
import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError, DatasetParseError
from .graph import FeatureMatrix

NORMALIZE_MODES = ("none", "zscore", "minmax")


@dataclass(frozen=True)
class DatasetSpec:
    """Where and how to read one dataset file."""

    name: str
    path: str
    label_column: object = -1
    delimiter: str = ","
    normalize: str = "none"
    expected_n: int = None
    expected_d: int = None
    expected_c: int = None

    def __post_init__(self):
        if self.normalize not in NORMALIZE_MODES:
            raise DataValidationError(
                f"normalize must be one of {NORMALIZE_MODES}, got {self.normalize!r}")


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of one synthetic dataset draw."""

    kind: str
    n: int = 200
    noise: float = 0.05
    separation: float = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("two_moon", "two_gaussian", "multi_cluster_36"):
            raise DataValidationError(f"unknown synthetic kind {self.kind!r}")
        if self.noise < 0:
            raise DataValidationError("noise must be nonnegative")
        clusters = 36 if self.kind == "multi_cluster_36" else 2
        if self.n < 2 * clusters:
            raise DataValidationError(
                f"{self.kind} needs n >= {2 * clusters}, got {self.n}")


def _parse_rows(path, delimiter):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            rows.append((lineno, [cell.strip() for cell in row]))
    if not rows:
        raise DatasetParseError("file contains no data rows")
    width = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != width:
            raise DatasetParseError(
                f"expected {width} fields, found {len(row)}", line=lineno)
    return rows, width


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def load_dataset(spec):
    """Read a CSV into a column-major feature matrix with encoded labels.

    A header row is detected when any feature cell of the first row fails
    to parse as a number. Label values are integer-encoded in sorted order.
    """
    rows, width = _parse_rows(spec.path, spec.delimiter)

    if isinstance(spec.label_column, str):
        first = rows[0][1]
        if spec.label_column not in first:
            raise DatasetParseError(
                f"label column {spec.label_column!r} not in header {first}",
                line=rows[0][0])
        label_idx = first.index(spec.label_column)
        rows = rows[1:]
        header = first
    else:
        label_idx = int(spec.label_column)
        if not -width <= label_idx < width:
            raise DatasetParseError(
                f"label column index {label_idx} out of range for width {width}")
        label_idx %= width
        header = None
        feature_cells = [c for i, c in enumerate(rows[0][1]) if i != label_idx]
        if any(not _is_float(c) for c in feature_cells):
            header = rows[0][1]
            rows = rows[1:]
    if not rows:
        raise DatasetParseError("no data rows after the header")

    features, raw_labels = [], []
    for lineno, row in rows:
        vals = []
        for i, cell in enumerate(row):
            if i == label_idx:
                continue
            if not _is_float(cell):
                raise DatasetParseError(
                    f"non-numeric feature value {cell!r}", line=lineno)
            vals.append(float(cell))
        features.append(vals)
        raw_labels.append(row[label_idx])

    X = np.asarray(features, dtype=float).T
    classes, labels = np.unique(raw_labels, return_inverse=True)
    names = None
    if header is not None:
        names = tuple(c for i, c in enumerate(header) if i != label_idx)
    fm = FeatureMatrix(data=X, feature_names=names, labels=labels)

    for attr, actual in (("expected_n", fm.n), ("expected_d", fm.d),
                         ("expected_c", len(classes))):
        expected = getattr(spec, attr)
        if expected is not None and expected != actual:
            raise DataValidationError(
                f"{spec.name}: {attr.removeprefix('expected_')} is {actual}, "
                f"expected {expected}")
    return fm


def save_dataset(fm, path, label_name="label"):
    """Canonical CSV writer: header row, shortest round-trip float repr,
    integer labels in the last column."""
    names = fm.feature_names or tuple(f"f{i}" for i in range(fm.d))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + [label_name])
        labels = fm.labels if fm.labels is not None else np.zeros(fm.n, dtype=int)
        for j in range(fm.n):
            writer.writerow([repr(float(v)) for v in fm.data[:, j]]
                            + [int(labels[j])])


@dataclass(frozen=True)
class Standardizer:
    """Per-feature affine transform fitted on training data."""

    mode: str
    shift: np.ndarray
    scale: np.ndarray

    def apply(self, fm):
        data = (fm.data - self.shift[:, None]) / self.scale[:, None]
        return FeatureMatrix(data=data, feature_names=fm.feature_names,
                             labels=fm.labels)


def fit_standardizer(fm, mode):
    if mode not in NORMALIZE_MODES:
        raise DataValidationError(f"unknown normalize mode {mode!r}")
    X = fm.data
    if mode == "none":
        return Standardizer(mode, np.zeros(fm.d), np.ones(fm.d))
    if mode == "zscore":
        std = X.std(axis=1)
        return Standardizer(mode, X.mean(axis=1), np.maximum(std, 1e-12))
    lo, hi = X.min(axis=1), X.max(axis=1)
    span = hi - lo
    if np.any(span == 0):
        warnings.warn("constant feature under minmax; mapping it to 0")
    return Standardizer(mode, lo, np.where(span == 0, 1.0, span))


def standardize(fm, mode):
    """Normalize features: 'zscore' to mean 0 / std 1, 'minmax' to [0, 1]."""
    return fit_standardizer(fm, mode).apply(fm)


@dataclass(frozen=True)
class SplitResult:
    train: FeatureMatrix
    test: FeatureMatrix
    train_indices: np.ndarray
    test_indices: np.ndarray


def train_test_split(fm, ratio, seed=0):
    """Deterministic stratified split into disjoint, exhaustive halves.

    Per class, round(ratio * count) samples go to train (always at least
    one; singleton classes go entirely to train with a warning).
    """
    if not 0 < ratio < 1:
        raise DataValidationError("split ratio must lie strictly in (0, 1)")
    rng = np.random.default_rng(seed)
    n = fm.n
    labels = fm.labels if fm.labels is not None else np.zeros(n, dtype=int)
    train_idx = []
    for cls in np.unique(labels):
        members = np.nonzero(labels == cls)[0]
        rng.shuffle(members)
        if members.size == 1:
            warnings.warn(f"class {cls} has a single sample; kept in train")
            take = 1
        else:
            take = int(np.clip(round(ratio * members.size), 1, members.size - 1))
        train_idx.extend(members[:take])
    train_idx = np.sort(np.asarray(train_idx, dtype=int))
    mask = np.zeros(n, dtype=bool)
    mask[train_idx] = True
    test_idx = np.nonzero(~mask)[0]

    def _take(idx):
        lbl = fm.labels[idx] if fm.labels is not None else None
        return FeatureMatrix(data=fm.data[:, idx],
                             feature_names=fm.feature_names, labels=lbl)

    return SplitResult(train=_take(train_idx), test=_take(test_idx),
                       train_indices=train_idx, test_indices=test_idx)


def _two_moon(cfg):
    n_out = cfg.n - cfg.n // 2
    n_in = cfg.n // 2
    t_out = np.linspace(0.0, np.pi, n_out)
    t_in = np.linspace(0.0, np.pi, n_in)
    pts = np.concatenate([
        np.stack([np.cos(t_out), np.sin(t_out)], axis=0),
        np.stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)], axis=0),
    ], axis=1)
    labels = np.concatenate([np.zeros(n_out, int), np.ones(n_in, int)])
    return pts, labels


def _two_gaussian(cfg):
    sep = 4.0 if cfg.separation is None else float(cfg.separation)
    n0 = cfg.n - cfg.n // 2
    centers = np.array([[-sep / 2.0, 0.0], [sep / 2.0, 0.0]])
    pts = np.concatenate([
        np.tile(centers[0], (n0, 1)), np.tile(centers[1], (cfg.n - n0, 1))
    ]).T
    labels = np.concatenate([np.zeros(n0, int), np.ones(cfg.n - n0, int)])
    return pts, labels


def _multi_cluster_36(cfg):
    gx, gy = np.meshgrid(np.arange(6.0), np.arange(6.0))
    centers = np.stack([gx.ravel(), gy.ravel()], axis=1)
    counts = np.full(36, cfg.n // 36)
    counts[: cfg.n % 36] += 1
    pts = np.repeat(centers, counts, axis=0).T
    labels = np.repeat(np.arange(36), counts)
    return pts, labels


_GENERATORS = {"two_moon": _two_moon, "two_gaussian": _two_gaussian,
               "multi_cluster_36": _multi_cluster_36}


def generate_synthetic(cfg):
    """Draw one synthetic dataset; a pure function of the config and seed."""
    rng = np.random.default_rng(cfg.seed)
    pts, labels = _GENERATORS[cfg.kind](cfg)
    if cfg.noise > 0:
        pts = pts + rng.normal(0.0, cfg.noise, size=pts.shape)
    return FeatureMatrix(data=pts, labels=labels)


# Reference benchmark datasets: name -> (samples, features, classes).
UCI_REGISTRY = {
    "solar": (322, 12, 6),
    "vehicle": (846, 18, 4),
    "vote": (434, 16, 2),
    "ecoli": (336, 7, 8),
    "wine": (178, 13, 3),
    "glass": (214, 9, 6),
    "lenses": (24, 4, 3),
    "heart": (270, 13, 2),
    "zoo": (101, 16, 7),
    "cars": (392, 8, 3),
    "auto": (205, 25, 6),
    "balance": (625, 4, 3),
}

DEFAULT_DATA_DIR = os.environ.get("DOGC_DATA_DIR", "data/uci")


def uci_dataset_spec(name, root=None, normalize="zscore"):
    """Spec for one canonical benchmark CSV, with expected sizes filled in."""
    key = name.lower()
    if key not in UCI_REGISTRY:
        raise DataValidationError(
            f"unknown dataset {name!r}; known: {sorted(UCI_REGISTRY)}")
    n, d, c = UCI_REGISTRY[key]
    root = root or DEFAULT_DATA_DIR
    return DatasetSpec(name=key, path=os.path.join(root, f"{key}.csv"),
                       label_column="label", normalize=normalize,
                       expected_n=n, expected_d=d, expected_c=c)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def verify_datasets(root=None):
    """Check canonical files against the checksum manifest and expected sizes.

    Returns a list of ``(name, status)`` with status one of ``ok``,
    ``missing``, ``checksum-mismatch``, ``size-mismatch`` or
    ``unverified`` (file present but no recorded checksum).
    """
    root = root or DEFAULT_DATA_DIR
    manifest = {}
    manifest_path = os.path.join(root, "checksums.json")
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    report = []
    for name in sorted(UCI_REGISTRY):
        spec = uci_dataset_spec(name, root)
        if not os.path.exists(spec.path):
            report.append((name, "missing"))
            continue
        recorded = manifest.get(f"{name}.csv")
        if recorded is not None and file_sha256(spec.path) != recorded:
            report.append((name, "checksum-mismatch"))
            continue
        try:
            load_dataset(spec)
        except (DataValidationError, DatasetParseError):
            report.append((name, "size-mismatch"))
            continue
        report.append((name, "ok" if recorded is not None else "unverified"))
    return report


def available_uci_datasets(root=None):
    """Names of registry datasets whose canonical files exist and load."""
    return [name for name, status in verify_datasets(root)
            if status in ("ok", "unverified")]
