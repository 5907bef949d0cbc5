"""Regenerates crates/core/tests/data/cmp_single_iteration.json.

Step-by-step execution of one CMP iteration on a tiny two-way problem
(3 samples per class, 3x4 tensors, two kept components per mode), written
directly in numpy so that it shares no code with the Rust implementation.
"""
import json
import pathlib

import numpy as np


def sample(cls, m):
    i, j = np.meshgrid(np.arange(3), np.arange(4), indexing="ij")
    base = ((7 * m + 3 * i + 5 * j + 11 * cls + i * j * (m + 1)) % 13) / 13.0
    return base + 0.1 * (cls + 1) * np.sin(1.0 + m + 2 * i - j)


def fix_sign(v):
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0 else v


def eig_desc(m):
    vals, vecs = np.linalg.eigh((m + m.T) / 2)
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    vecs = np.stack([fix_sign(vecs[:, k]) for k in range(vecs.shape[1])], axis=1)
    return vals, vecs


def unfold(x, mode):
    # Two-way tensors: mode 1 is the matrix, mode 2 its transpose.
    return x if mode == 1 else x.T


def scatter(xs, mode):
    mean = sum(xs) / len(xs)
    return sum(unfold(x - mean, mode) @ unfold(x - mean, mode).T for x in xs) / len(xs)


classes = [[sample(c, m) for m in range(3)] for c in range(2)]
zs = []
for mode in (1, 2):
    vals, vecs = eig_desc(scatter(classes[0], mode) + scatter(classes[1], mode))
    zs.append(np.diag(vals ** -0.5) @ vecs.T)

first = [zs[0] @ x @ zs[1].T for x in classes[0]]
mean = sum(first) / len(first)
u = [np.eye(3), np.eye(4)]
phi_vals = []
# Mode 1: partner mode 2 uses U_2; mode 2 then uses the fresh U_1.
phi1 = sum((a - mean) @ u[1] @ u[1].T @ (a - mean).T for a in first) / 3
vals1, u[0] = eig_desc(phi1)
phi2 = sum((a - mean).T @ u[0] @ u[0].T @ (a - mean) for a in first) / 3
vals2, u[1] = eig_desc(phi2)
kept = [u[0][:, [0, 2]], u[1][:, [0, 3]]]
projection = kept[0].T @ zs[0] @ classes[0][0] @ zs[1].T @ kept[1]

out = {
    "dims": [3, 4],
    "samples": [[x.ravel().tolist() for x in cls] for cls in classes],
    "whitening": [z.ravel().tolist() for z in zs],
    "phi_eigenvalues": [vals1.tolist(), vals2.tolist()],
    "basis": [k.ravel().tolist() for k in kept],
    "projection_of_first_sample": projection.ravel().tolist(),
}
path = pathlib.Path(__file__).resolve().parent.parent / "crates/core/tests/data/cmp_single_iteration.json"
path.write_text(json.dumps(out, indent=1) + "\n")
print("wrote", path)
