"""Write the canonical Wine benchmark CSV from scikit-learn's bundled copy.

scikit-learn ships the classic 178-sample, 13-feature wine recognition data
(the same values distributed in the UCI ``wine.data`` file), so this is the
one benchmark dataset that can be produced without network access. The
output goes through the canonical writer and its checksum is recorded in
``data/uci/checksums.json``.
"""
import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sklearn.datasets import load_wine

from dogc.data import file_sha256, save_dataset
from dogc.graph import FeatureMatrix


def main(root="data/uci"):
    os.makedirs(root, exist_ok=True)
    bundle = load_wine()
    fm = FeatureMatrix(data=bundle.data.T,
                       feature_names=[n.replace(" ", "_")
                                      for n in bundle.feature_names],
                       labels=bundle.target)
    path = os.path.join(root, "wine.csv")
    save_dataset(fm, path)
    manifest_path = os.path.join(root, "checksums.json")
    manifest = {}
    if os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    manifest["wine.csv"] = file_sha256(path)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {path} (sha256 {manifest['wine.csv'][:16]}...)")


if __name__ == "__main__":
    main(*sys.argv[1:])
