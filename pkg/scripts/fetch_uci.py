"""Download and convert the benchmark datasets to canonical CSVs.

Run this on a machine with access to ``archive.ics.uci.edu``; the sandbox
this package is developed in has no outbound network, so only ``wine.csv``
(available offline via scikit-learn, see ``make_wine_csv.py``) ships with
the repository. After fetching, ``dogc datasets verify`` checks the files
against ``data/uci/checksums.json`` and the expected sample/feature/class
counts.

Conversion policy, applied uniformly:
  * rows with missing values ('?' or empty cells) are dropped;
  * categorical feature values are ordinal-encoded in sorted order;
  * the class column is moved to a final ``label`` column;
  * exact duplicate rows are kept (deduplication choices in the reference
    counts are undocumented; any residual count mismatch is reported by the
    loader's expected_n/d/c validation rather than silently accepted).
"""
import csv
import io
import json
import os
import sys
import urllib.request
import zipfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from dogc.data import UCI_REGISTRY, file_sha256

BASE = "https://archive.ics.uci.edu/ml/machine-learning-databases"

# name -> (url, label column index in the raw file, columns to drop)
SOURCES = {
    "solar": (f"{BASE}/solar-flare/flare.data2", 0, ()),
    "vehicle": (f"{BASE}/statlog/vehicle/", -1, ()),  # xa*.dat parts
    "vote": (f"{BASE}/voting-records/house-votes-84.data", 0, ()),
    "ecoli": (f"{BASE}/ecoli/ecoli.data", -1, (0,)),  # drop sequence name
    "glass": (f"{BASE}/glass/glass.data", -1, (0,)),  # drop id
    "lenses": (f"{BASE}/lenses/lenses.data", -1, (0,)),  # drop id
    "heart": (f"{BASE}/statlog/heart/heart.dat", -1, ()),
    "zoo": (f"{BASE}/zoo/zoo.data", -1, (0,)),  # drop animal name
    "cars": (f"{BASE}/auto-mpg/auto-mpg.data", 7, (8,)),  # origin as class
    "auto": (f"{BASE}/autos/imports-85.data", 0, ()),  # symboling as class
    "balance": (f"{BASE}/balance-scale/balance-scale.data", 0, ()),
}


def fetch(url):
    with urllib.request.urlopen(url) as resp:
        return resp.read().decode("utf-8", errors="replace")


def encode_column(values):
    try:
        return [float(v) for v in values]
    except ValueError:
        mapping = {v: i for i, v in enumerate(sorted(set(values)))}
        return [float(mapping[v]) for v in values]


def convert(name, text, label_idx, drop, delimiter=None):
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        cells = line.split(delimiter) if delimiter else line.replace(
            ",", " ").split()
        if "?" in cells or "" in cells:
            continue
        rows.append(cells)
    width = len(rows[0])
    label_idx %= width
    kept = [i for i in range(width) if i != label_idx and i not in
            {d % width for d in drop}]
    columns = [encode_column([r[i] for r in rows]) for i in kept]
    labels_raw = [r[label_idx] for r in rows]
    label_map = {v: i for i, v in enumerate(sorted(set(labels_raw)))}
    labels = [label_map[v] for v in labels_raw]
    return columns, labels


def write_csv(root, name, columns, labels):
    path = os.path.join(root, f"{name}.csv")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(len(columns))] + ["label"])
        for j in range(len(labels)):
            writer.writerow([repr(col[j]) for col in columns] + [labels[j]])
    return path


def main(root="data/uci"):
    os.makedirs(root, exist_ok=True)
    manifest_path = os.path.join(root, "checksums.json")
    manifest = {}
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    for name, (url, label_idx, drop) in SOURCES.items():
        expected = UCI_REGISTRY[name]
        try:
            if name == "vehicle":
                text = "\n".join(fetch(f"{url}xa{part}.dat")
                                 for part in "abcdefghi")
            else:
                text = fetch(url)
            columns, labels = convert(name, text, label_idx, drop)
            path = write_csv(root, name, columns, labels)
            manifest[f"{name}.csv"] = file_sha256(path)
            got = (len(labels), len(columns), len(set(labels)))
            flag = "" if got == expected else f"  ** expected {expected}"
            print(f"{name:10s} n={got[0]} d={got[1]} c={got[2]}{flag}")
        except Exception as exc:  # noqa: BLE001 - per-dataset report
            print(f"{name:10s} FAILED: {exc}")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    main(*sys.argv[1:])
