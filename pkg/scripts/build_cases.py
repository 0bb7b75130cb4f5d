"""Generate the bundled case files (smib, case9, case39).

The 3-machine and 39-bus cases start from standard public branch/load data,
keep only series reactances (lossless network, no shunts, no tap ratios), put
each generator behind its transient reactance on an internal bus numbered
``100 + terminal``, and Kron-reduce to internal generator buses plus buses
carrying load.  Voltage magnitudes are set to 1 p.u.

Run from the repository root::

    python scripts/build_cases.py
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "sparsestab" / "data"
F_HZ = 60.0
W_S = 2 * math.pi * F_HZ


def kron_case(name, branches, gens, loads, reference, load_damping,
              controllable_share=0.5, base_mva=100.0):
    """Assemble a case dict.

    branches  list of (from, to, x)
    gens      list of (terminal bus, H [s, system base], x'_d, P_g [MW], D [p.u./(rad/s)])
    loads     dict bus -> P_d [MW]
    """
    buses = sorted({b for f, t, _ in branches for b in (f, t)})
    internal = [100 + g[0] for g in gens]
    allb = buses + internal
    pos = {b: k for k, b in enumerate(allb)}
    Bm = np.zeros((len(allb), len(allb)))

    def add(i, j, x):
        y = 1.0 / x
        Bm[pos[i], pos[i]] += y
        Bm[pos[j], pos[j]] += y
        Bm[pos[i], pos[j]] -= y
        Bm[pos[j], pos[i]] -= y

    for f, t, x in branches:
        add(f, t, x)
    for (term, _, xd, _, _), ib in zip(gens, internal):
        add(term, ib, xd)
    keep = internal + sorted(loads)
    elim = [b for b in allb if b not in keep]
    ki = [pos[b] for b in keep]
    ei = [pos[b] for b in elim]
    Br = Bm[np.ix_(ki, ki)] - Bm[np.ix_(ki, ei)] @ np.linalg.solve(Bm[np.ix_(ei, ei)],
                                                                   Bm[np.ix_(ei, ki)])
    Br = 0.5 * (Br + Br.T)
    lines = []
    for a, ba in enumerate(keep):
        for b, bb in enumerate(keep):
            if a != b and abs(Br[a, b]) > 1e-9:
                # transfer admittance -B_ab > 0 acting as j*|Y| -> theta = pi/2
                lines.append({"from": ba, "to": bb, "Y": float(-Br[a, b]),
                              "theta": math.pi / 2})
    total_load = sum(loads.values())
    total_gen = sum(g[3] for g in gens if g[3] is not None)
    generators = []
    for (term, H, xd, pg, D), ib in zip(gens, internal):
        if pg is None:   # slack machine balances the lossless network
            pg = total_load - total_gen
        M = 2.0 * H / W_S
        generators.append({"bus": ib, "M": M, "D": D, "P_g": pg / base_mva})
    load_recs = []
    for b in sorted(loads):
        pd = loads[b] / base_mva
        cd = controllable_share * pd
        load_recs.append({"bus": b, "D": load_damping, "P_d": pd, "P_cd0": cd,
                          "P_ncd0": pd - cd})
    return {
        "name": name,
        "base_mva": base_mva,
        "frequency_hz": F_HZ,
        "buses": ([{"id": b, "kind": "generator-internal", "E": 1.0} for b in internal]
                  + [{"id": b, "kind": "load", "E": 1.0} for b in sorted(loads)]),
        "lines": lines,
        "generators": generators,
        "loads": load_recs,
        "reference_bus": reference,
    }


def smib():
    return {
        "name": "smib",
        "base_mva": 100.0,
        "frequency_hz": F_HZ,
        "buses": [{"id": 1, "kind": "generator-internal", "E": 1.0},
                  {"id": 2, "kind": "load", "E": 1.0}],
        "lines": [{"from": 1, "to": 2, "Y": 1.0, "theta": math.pi / 2},
                  {"from": 2, "to": 1, "Y": 1.0, "theta": math.pi / 2}],
        "generators": [{"bus": 1, "M": 1.0, "D": 0.1, "P_g": 0.5}],
        # a very stiff load bus approximates the infinite bus
        "loads": [{"bus": 2, "D": 1.0e6, "P_d": 0.5, "P_cd0": 0.25, "P_ncd0": 0.25}],
        "reference_bus": 2,
        "injection_buses": [1],
    }


def case9():
    branches = [(1, 4, 0.0576), (4, 5, 0.085), (4, 6, 0.092), (5, 7, 0.161),
                (6, 9, 0.170), (7, 8, 0.072), (8, 9, 0.1008), (2, 7, 0.0625),
                (3, 9, 0.0586)]
    gens = [(1, 23.64, 0.0608, None, 0.5),
            (2, 6.40, 0.1198, 163.0, 0.2),
            (3, 3.01, 0.1813, 85.0, 0.1)]
    loads = {5: 125.0, 6: 90.0, 8: 100.0}
    return kron_case("case9", branches, gens, loads, reference=101, load_damping=5.0)


def case39():
    raw = [
        (1, 2, 0.0411), (1, 39, 0.025), (2, 3, 0.0151), (2, 25, 0.0086),
        (3, 4, 0.0213), (3, 18, 0.0133), (4, 5, 0.0128), (4, 14, 0.0129),
        (5, 6, 0.0026), (5, 8, 0.0112), (6, 7, 0.0092), (6, 11, 0.0082),
        (7, 8, 0.0046), (8, 9, 0.0363), (9, 39, 0.025), (10, 11, 0.0043),
        (10, 13, 0.0043), (13, 14, 0.0101), (14, 15, 0.0217), (15, 16, 0.0094),
        (16, 17, 0.0089), (16, 19, 0.0195), (16, 21, 0.0135), (16, 24, 0.0059),
        (17, 18, 0.0082), (17, 27, 0.0173), (21, 22, 0.014), (22, 23, 0.0096),
        (23, 24, 0.035), (25, 26, 0.0323), (26, 27, 0.0147), (26, 28, 0.0474),
        (26, 29, 0.0625), (28, 29, 0.0151), (12, 11, 0.0435), (12, 13, 0.0435),
        (6, 31, 0.025), (10, 32, 0.02), (19, 33, 0.0142), (20, 34, 0.018),
        (22, 35, 0.0143), (23, 36, 0.0272), (25, 37, 0.0232), (2, 30, 0.0181),
        (29, 38, 0.0156), (19, 20, 0.0138),
    ]
    order = [31, 30, 32, 33, 34, 35, 36, 37, 38, 39]
    H = [15.15, 21.0, 17.9, 14.3, 13.0, 17.4, 13.2, 12.15, 17.25, 250.0]
    xd = [0.0697, 0.0310, 0.0531, 0.0436, 0.1320, 0.0500, 0.0490, 0.0570, 0.0570, 0.0060]
    pg = {30: 250.0, 32: 650.0, 33: 632.0, 34: 508.0, 35: 650.0, 36: 560.0,
          37: 540.0, 38: 830.0, 39: 1000.0}
    gens = []
    for b, h, x in zip(order, H, xd):
        M = 2.0 * h / W_S
        gens.append((b, h, x, pg.get(b), 2.0 * M))
    loads = {3: 322.0, 4: 500.0, 7: 233.8, 8: 522.0, 12: 7.5, 15: 320.0, 16: 329.0,
             18: 158.0, 20: 628.0, 21: 274.0, 23: 247.5, 24: 308.6, 25: 224.0,
             26: 139.0, 27: 281.0, 28: 206.0, 29: 283.5, 31: 9.2, 39: 1104.0}
    return kron_case("case39", raw, gens, loads, reference=139, load_damping=5.0)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, d in (("smib", smib()), ("case9", case9()), ("case39", case39())):
        (OUT / f"{name}.json").write_text(json.dumps(d, indent=1) + "\n")
        print(f"wrote {name}.json")


if __name__ == "__main__":
    main()
