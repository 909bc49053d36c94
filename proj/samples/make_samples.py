"""Regenerates the small sample dataset used in the README walkthrough."""
import csv
import numpy as np

rng = np.random.default_rng(7)
n, d = 240, 16
classes = ["cat", "dog", "car", "truck"]
centers = rng.normal(size=(len(classes), d)) * 4

rows, vecs = [], []
for i in range(n):
    c = i % len(classes)
    label = classes[c]
    pred = label if rng.random() < 0.8 else classes[rng.integers(len(classes))]
    split = "test" if rng.random() < 0.25 else "train"
    fmt = ["png", "jpg"][rng.integers(2)]
    vecs.append(centers[c] + rng.normal(size=d))
    rows.append([f"img{i:04d}", split, fmt, label, pred, f"{rng.random():.4f}", f"images/img{i:04d}.{fmt}"])

# A few train/test leaks: exact copies of earlier embeddings.
for src, dst in [(3, 201), (10, 150), (42, 199)]:
    vecs[dst] = vecs[src]
    rows[src][1], rows[dst][1] = "train", "test"

with open("table.csv", "w", newline="") as f:
    w = csv.writer(f, lineterminator="\n")
    w.writerow(["id", "split", "format", "label", "prediction", "confidence", "path"])
    w.writerows(rows)
np.asarray(vecs, dtype="<f4").tofile("embeddings.raw.f32")
