"""Timing of the compiled kernels against the numpy fallback."""

import timeit

import numpy as np

from .kernels import backends


def _workloads(seed=0, points=2000, size=200):
    rng = np.random.default_rng(seed)
    cloud = rng.standard_normal((points, 3))
    yy, xx = np.mgrid[:size, :size]
    # thick ring plus speckle: a mask that takes several thinning passes
    r = np.hypot(yy - size / 2, xx - size / 2)
    mask = ((r > size * 0.2) & (r < size * 0.35)) | (rng.random((size, size)) < 0.02)
    return {"farthest_pair": (cloud,), "zhang_suen": (mask,)}


def run(repeat=5, seed=0, points=2000, size=200):
    """Best-of-``repeat`` seconds per call for every kernel and backend.

    Also checks the backends agree on the workload, so a speedup is never
    reported for a kernel that returns something different.
    """
    work = _workloads(seed, points, size)
    mods = backends()
    rows = []
    for name, args in work.items():
        ref = None
        for backend, mod in mods.items():
            fn = getattr(mod, name)
            out = fn(*args)
            if ref is None:
                ref = out
            elif not np.array_equal(np.asarray(out), np.asarray(ref)):
                raise AssertionError(f"{name}: {backend} disagrees with python backend")
            t = min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))
            rows.append({"kernel": name, "backend": backend, "seconds": t})
    base = {r["kernel"]: r["seconds"] for r in rows if r["backend"] == "python"}
    for r in rows:
        r["speedup"] = base[r["kernel"]] / r["seconds"] if r["seconds"] > 0 else float("inf")
    return rows


def format_table(rows):
    lines = [f"{'kernel':<15}{'backend':<9}{'ms':>10}{'speedup':>9}"]
    for r in rows:
        lines.append(f"{r['kernel']:<15}{r['backend']:<9}{1e3 * r['seconds']:>10.2f}{r['speedup']:>8.1f}x")
    return "\n".join(lines)


if __name__ == "__main__":
    print(format_table(run()))
