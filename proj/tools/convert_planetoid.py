#!/usr/bin/env python3
"""Convert published citation-network datasets to the toolkit's text format.

Two sources are supported:

  planetoid pickles (ind.<name>.x/.y/.tx/.ty/.allx/.ally/.graph/.test.index):
      python3 tools/convert_planetoid.py --planetoid /path/to/planetoid/data \
              --name cora --out data/cora

  npz with a CSR adjacency (adj_data/adj_indices/adj_indptr/adj_shape,
  attr_* or features, labels):
      python3 tools/convert_planetoid.py --npz cora.npz --out data/cora

The output directory receives edges.tsv, features.tsv, labels.tsv and
split.json. Features are row-normalized to unit l1 mass by default (--raw to
disable), which is the conventional preprocessing for bag-of-words citation
features. For npz sources without split arrays, a 140/500/1000-style split is
cut per class with a fixed seed.
"""

import argparse
import json
import os
import pickle
import sys

import numpy as np


def row_normalize(x):
    x = np.asarray(x, dtype=np.float64)
    s = x.sum(axis=1, keepdims=True)
    s[s == 0.0] = 1.0
    return x / s


def write_output(out_dir, edges, features, labels, split):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "edges.tsv"), "w") as f:
        for u, v in edges:
            f.write(f"{u}\t{v}\n")
    with open(os.path.join(out_dir, "features.tsv"), "w") as f:
        for row in features:
            f.write("\t".join(f"{v:.17g}" for v in row) + "\n")
    with open(os.path.join(out_dir, "labels.tsv"), "w") as f:
        for y in labels:
            f.write(f"{int(y)}\n")
    with open(os.path.join(out_dir, "split.json"), "w") as f:
        json.dump({k: [int(i) for i in v] for k, v in split.items()}, f)
        f.write("\n")
    n = len(labels)
    print(f"wrote {out_dir}: {n} nodes, {len(edges)} undirected edges, "
          f"{features.shape[1]} features, "
          f"train/val/test = {len(split['train'])}/{len(split['val'])}/{len(split['test'])}")


def load_planetoid(directory, name):
    def unpickle(suffix):
        path = os.path.join(directory, f"ind.{name}.{suffix}")
        with open(path, "rb") as f:
            return pickle.load(f, encoding="latin1")

    x, y, tx, ty, allx, ally, graph = (unpickle(s) for s in
                                       ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    test_idx = np.loadtxt(os.path.join(directory, f"ind.{name}.test.index"), dtype=np.int64)
    test_sorted = np.sort(test_idx)

    allx = np.asarray(allx.todense())
    tx = np.asarray(tx.todense())
    n = int(max(int(test_sorted[-1]) + 1, allx.shape[0] + tx.shape[0]))

    # test rows are shipped in a shuffled block; place them at their ids
    # (gaps, as in citeseer, stay zero rows)
    features = np.zeros((n, allx.shape[1]))
    features[: allx.shape[0]] = allx
    for k, idx in enumerate(test_idx):
        features[idx] = tx[k]

    onehot = np.zeros((n, ally.shape[1]))
    onehot[: ally.shape[0]] = ally
    for k, idx in enumerate(test_idx):
        onehot[idx] = ty[k]
    labels = onehot.argmax(axis=1)
    labels[onehot.sum(axis=1) == 0] = -1  # citeseer's orphan test ids

    edges = set()
    for u, nbrs in graph.items():
        for v in nbrs:
            if u == v:
                continue
            edges.add((min(int(u), int(v)), max(int(u), int(v))))

    # conventional split: the labeled block, the 500 ids after it, test.index
    split = {
        "train": list(range(y.shape[0])),
        "val": list(range(y.shape[0], min(y.shape[0] + 500, allx.shape[0]))),
        "test": [int(i) for i in test_sorted if labels[i] >= 0],
    }
    return sorted(edges), features, labels, split


def load_npz(path, seed=0):
    data = np.load(path, allow_pickle=True)
    keys = set(data.keys())

    def pick(*names):
        for name in names:
            if name in keys:
                return data[name]
        return None

    import scipy.sparse as sp

    adj = sp.csr_matrix((pick("adj_data"), pick("adj_indices"), pick("adj_indptr")),
                        shape=tuple(pick("adj_shape")))
    attr_data = pick("attr_data", "feature_data")
    if attr_data is not None:
        features = np.asarray(
            sp.csr_matrix((attr_data, pick("attr_indices", "feature_indices"),
                           pick("attr_indptr", "feature_indptr")),
                          shape=tuple(pick("attr_shape", "feature_shape"))).todense())
    else:
        features = np.asarray(pick("features", "attr_matrix"))
    labels = np.asarray(pick("labels"), dtype=np.int64)

    coo = sp.triu(adj, k=1).tocoo()
    edges = sorted({(int(u), int(v)) for u, v in zip(coo.row, coo.col)})

    if "idx_train" in keys:
        split = {"train": data["idx_train"].tolist(),
                 "val": data["idx_val"].tolist(),
                 "test": data["idx_test"].tolist()}
    else:
        rng = np.random.RandomState(seed)
        classes = labels.max() + 1
        train, val, rest = [], [], []
        for c in range(classes):
            ids = np.where(labels == c)[0]
            rng.shuffle(ids)
            train.extend(ids[:20])
            val.extend(ids[20:20 + max(1, 500 // classes)])
            rest.extend(ids[20 + max(1, 500 // classes):])
        rng.shuffle(rest)
        split = {"train": sorted(train), "val": sorted(val), "test": sorted(rest[:1000])}
    return edges, features, labels, split


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--planetoid", help="directory holding ind.<name>.* files")
    ap.add_argument("--name", default="cora", help="planetoid dataset name")
    ap.add_argument("--npz", help="npz file with a CSR adjacency")
    ap.add_argument("--out", required=True, help="output dataset directory")
    ap.add_argument("--raw", action="store_true", help="skip feature row normalization")
    args = ap.parse_args()

    if bool(args.planetoid) == bool(args.npz):
        ap.error("pass exactly one of --planetoid or --npz")

    if args.planetoid:
        edges, features, labels, split = load_planetoid(args.planetoid, args.name)
    else:
        edges, features, labels, split = load_npz(args.npz)

    if not args.raw:
        features = row_normalize(features)
    write_output(args.out, edges, features, labels, split)
    return 0


if __name__ == "__main__":
    sys.exit(main())
