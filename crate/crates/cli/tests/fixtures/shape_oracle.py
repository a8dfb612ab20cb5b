"""Independent numpy evaluation of the shaping chain for the golden fixture.

Usage: python3 shape_oracle.py {factor|literal} shape_groups.jsonl OUT.jsonl
Fixed flags: --lambda 0.5 --epsilon 1e-6 --t 30 --total-steps 100 --baseline 1
"""
import json, sys
import numpy as np

lam, eps, t, T, b, mode = 0.5, 1e-6, 30, 100, 1.0, sys.argv[1]
src, dst = sys.argv[2], sys.argv[3]
out = []
for line in open(src):
    g = json.loads(line)
    rs = g["rollouts"]
    fmt = np.array([r["format"] for r in rs])
    length = np.array([r["length"] for r in rs], dtype=np.float64)
    mal = fmt == "malformed"
    r = np.where(np.array([r["correct"] for r in rs]) & ~mal, 1.0, 0.0)
    G = len(rs)
    F = np.array([np.sum(fmt == f) for f in fmt], dtype=np.float64)
    alpha = np.where(mal, 1.0, G / F)
    beta = np.exp(-lam * (length - length.min()) / (length.max() - length.min() + eps))
    w = 0.5 * (1 + np.cos(np.pi * t / T))
    if mode == "factor":
        rt = (b + (alpha * beta - b) * w) * r
    else:
        rt = b + (alpha * beta * r - b) * w
    sd = rt.std()
    adv = np.zeros(G) if sd < 1e-12 else (rt - rt.mean()) / sd
    for i, ro in enumerate(rs):
        out.append(dict(question_id=g["question_id"], rollout_id=ro["id"], format=ro["format"], r=r[i],
                        alpha=alpha[i], beta=beta[i], r_prime=alpha[i] * r[i], r_double_prime=beta[i] * alpha[i] * r[i],
                        r_tilde=rt[i], advantage=adv[i]))
with open(dst, "w") as f:
    for o in out:
        f.write(json.dumps({k: (float(v) if isinstance(v, np.floating) else v) for k, v in o.items()}) + "\n")
