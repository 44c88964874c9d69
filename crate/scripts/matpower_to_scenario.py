#!/usr/bin/env python3
"""Build the desk scenario from MATPOWER case files.

IEEE 14-bus transmission with the 18-, 69- and 141-bus radial feeders
attached at three transmission buses. Loads and impedances come from the
case files; the script adds distributed generation, bid quantities, one
congested line per feeder, one congested transmission line and interface
limits. Bid prices are written as 0 and drawn afterwards with

    flexcoop generate --template <out.json> --seed <seed> --out <dir>

Usage: matpower_to_scenario.py <matpower data dir> <out.json>
"""

import json
import math
import re
import sys
from collections import deque
from pathlib import Path

import numpy as np

RNG_SEED = 14
BASE_MVA = 100.0
DEFICIT = 40.0
DG_SHARE = 1.4
ATTACH = {"dn018": "13", "dn069": "10", "dn141": "4"}


def matrix(text, name):
    m = re.search(r"mpc\." + name + r"\s*=\s*\[(.*?)\];", text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def scalar(text, name):
    return float(re.search(r"mpc\." + name + r"\s*=\s*([0-9.]+)", text).group(1))


def node(v):
    return str(int(v))


def r4(x):
    return round(float(x), 4)


def feeder(path, kind):
    """Lines (r, x in p.u. on BASE_MVA) and loads (MW, MVAr) of a radial case."""
    text = path.read_text()
    bus = matrix(text, "bus")
    branch = [b for b in matrix(text, "branch") if b[10] != 0]
    base_mva = scalar(text, "baseMVA")
    root = node(next(b[0] for b in bus if b[1] == 3))
    if kind == "pu":
        z_scale = BASE_MVA / base_mva
    else:
        vbase = bus[0][9] * 1e3
        z_scale = 1.0 / (vbase**2 / (BASE_MVA * 1e6))
    loads = {}
    for b in bus:
        pd, qd = b[2], b[3]
        if kind == "kw":
            pd, qd = pd / 1e3, qd / 1e3
        elif kind == "kva":
            s = pd / 1e3
            pd, qd = s * 0.85, s * math.sin(math.acos(0.85))
        loads[node(b[0])] = (pd, qd)
    lines = [(node(b[0]), node(b[1]), b[2] * z_scale, b[3] * z_scale) for b in branch]
    assert len(lines) == len(bus) - 1, f"{path} is not radial"
    return root, lines, loads


def orient(root, lines):
    adj = {}
    for k, (a, b, _, _) in enumerate(lines):
        adj.setdefault(a, []).append((b, k))
        adj.setdefault(b, []).append((a, k))
    order, parent, line_in = [root], {root: None}, {root: None}
    q = deque([root])
    while q:
        n = q.popleft()
        for m, k in adj[n]:
            if m not in parent:
                parent[m], line_in[m] = n, k
                order.append(m)
                q.append(m)
    return order, parent, line_in


def build_dso(dso_id, iface, root, lines, loads, rng):
    order, parent, line_in = orient(root, lines)
    load_nodes = [n for n in order if loads[n][0] > 0]
    total = sum(loads[n][0] for n in order)
    # distributed generation at a few load nodes
    k = max(2, len(load_nodes) // 7)
    dg_nodes = sorted(rng.choice(load_nodes, size=k, replace=False), key=order.index)
    w = rng.uniform(0.5, 1.5, size=k)
    dg = {n: DG_SHARE * total * wi / w.sum() for n, wi in zip(dg_nodes, w)}

    base, bids = {}, []
    for n in order:
        d, qd = loads[n]
        p = dg.get(n, 0.0)
        if d > 0 or p > 0:
            base[n] = {"p": r4(p), "d": r4(d), "qd": r4(qd)}
    up = {n: 0.0 for n in order}
    for n in dg_nodes:
        q = r4(dg[n] * rng.uniform(1.1, 1.5))
        up[n] += q
        bids.append({"node": n, "product": "gen_up", "price": 0, "quantity": q})
        bids.append({"node": n, "product": "gen_down", "price": 0, "quantity": r4(dg[n] * 0.5)})
    for n in load_nodes:
        d = loads[n][0]
        if rng.random() < 0.5:
            q = r4(d * rng.uniform(0.2, 0.4))
            up[n] += q
            bids.append({"node": n, "product": "dem_up", "price": 0, "quantity": q})
        if rng.random() < 0.3:
            bids.append({"node": n, "product": "dem_down", "price": 0, "quantity": r4(d * rng.uniform(0.1, 0.3))})
    total_up = sum(up.values())

    # base flows and downstream upward flexibility
    sub_p = {n: loads[n][0] - dg.get(n, 0.0) for n in order}
    sub_q = {n: loads[n][1] for n in order}
    sub_up = dict(up)
    for n in reversed(order[1:]):
        sub_p[parent[n]] += sub_p[n]
        sub_q[parent[n]] += sub_q[n]
        sub_up[parent[n]] += sub_up[n]
    cand = [n for n in order[1:] if sub_p[n] > 0.05 and sub_up[n] > 0.1]
    cong = cand[int(rng.integers(len(cand)))] if cand else None

    out_lines = []
    for n in order[1:]:
        a, b, r, x = lines[line_in[n]]
        s_base = math.hypot(sub_p[n], sub_q[n])
        s_rev = math.hypot(sub_p[n] - sub_up[n], sub_q[n])
        if n == cong:
            smax = s_base - 0.3 * min(sub_up[n], sub_p[n])
        else:
            smax = 1.3 * max(s_base, s_rev) + 0.2
        out_lines.append({"from": a, "to": b, "r": r4(r), "x": r4(x), "smax": r4(smax)})
    bids.append({"node": root, "product": "dem_down", "price": 0, "quantity": r4(total_up + 1.0)})

    qlim = {"default": 0.0}
    for n in dg_nodes:
        qlim[n] = r4(0.3 * dg[n])
    transfer = sum(loads[n][0] for n in order) - sum(dg.values())
    tp = r4(5.1 * abs(transfer))
    tq = r4(5 * sum(l[1] for l in loads.values()) + 1)
    net = {
        "id": dso_id,
        "interface_node": iface,
        "root": root,
        "lines": out_lines,
        "vmin": 0.81,
        "vmax": 1.21,
        "qmin": {k: -v for k, v in qlim.items()},
        "qmax": qlim,
        "tp_min": -tp,
        "tp_max": tp,
        "tq_min": -tq,
        "tq_max": tq,
    }
    return net, base, bids, transfer, total_up


def dc_flows(nodes, lines, inj, slack):
    idx = {n: i for i, n in enumerate(nodes)}
    b = np.zeros((len(nodes), len(nodes)))
    for a, c, x in lines:
        i, j = idx[a], idx[c]
        b[i, i] += 1 / x
        b[j, j] += 1 / x
        b[i, j] -= 1 / x
        b[j, i] -= 1 / x
    keep = [i for i in range(len(nodes)) if nodes[i] != slack]
    theta = np.zeros(len(nodes))
    p = np.array([inj.get(n, 0.0) for n in nodes])
    theta[keep] = np.linalg.solve(b[np.ix_(keep, keep)], p[keep])
    return [(theta[idx[a]] - theta[idx[c]]) / x for a, c, x in lines]


def main():
    data, out = Path(sys.argv[1]), Path(sys.argv[2])
    rng = np.random.default_rng(RNG_SEED)
    specs = [("dn018", "case18.m", "pu"), ("dn069", "case69.m", "kw"), ("dn141", "case141.m", "kva")]
    dsos, dbase, dbids, transfer, dso_up = [], {}, {}, {}, 0.0
    for dso_id, fname, kind in specs:
        root, lines, loads = feeder(data / fname, kind)
        net, base, bids, tr, up = build_dso(dso_id, ATTACH[dso_id], root, lines, loads, rng)
        dsos.append(net)
        dbase[dso_id], dbids[dso_id], transfer[ATTACH[dso_id]] = base, bids, tr
        dso_up += up

    text = (data / "case14.m").read_text()
    bus = matrix(text, "bus")
    nodes = [node(b[0]) for b in bus]
    tlines = [(node(b[0]), node(b[1]), b[3]) for b in matrix(text, "branch")]
    tbase = {n: {"p": 0.0, "d": b[2]} for n, b in zip(nodes, bus) if b[2] > 0}
    demand = sum(b[2] for b in bus) + sum(transfer.values())
    gen = {"1": 0.8, "2": 0.2}
    for n, share in gen.items():
        tbase.setdefault(n, {"p": 0.0, "d": 0.0})["p"] = share * (demand - DEFICIT)
    tbase = {n: {k: r4(v) for k, v in inj.items() if v} for n, inj in tbase.items()}

    tbids = []
    for n in ["2", "3", "6", "8"]:
        tbids.append({"node": n, "product": "gen_up", "price": 0, "quantity": r4(rng.uniform(8, 15))})
    tbids.append({"node": "1", "product": "gen_up", "price": 0, "quantity": r4(DEFICIT + dso_up + 60)})
    for n in ["1", "2"]:
        tbids.append({"node": n, "product": "gen_down", "price": 0, "quantity": 25})
    for b in bus:
        n = node(b[0])
        if b[2] > 5 and n not in gen:
            tbids.append({"node": n, "product": "dem_up", "price": 0, "quantity": r4(b[2] * rng.uniform(0.05, 0.15))})
            if rng.random() < 0.5:
                tbids.append({"node": n, "product": "dem_down", "price": 0, "quantity": r4(b[2] * 0.1)})

    inj = {n: tbase.get(n, {}).get("p", 0.0) - tbase.get(n, {}).get("d", 0.0) - transfer.get(n, 0.0) for n in nodes}
    flows = dc_flows(nodes, tlines, inj, "1")
    # one congested corridor: the most loaded line out of the slack loses 3 MW of headroom
    k_cong = max((k for k, (a, _, _) in enumerate(tlines) if a == "1"), key=lambda k: abs(flows[k]))
    out_tlines = []
    for k, (a, c, x) in enumerate(tlines):
        f = abs(flows[k])
        fmax = f - 3.0 if k == k_cong else max(1.5 * f, 30.0)
        out_tlines.append({"from": a, "to": c, "x": r4(x), "fmax": r4(fmax)})

    scenario = {
        "base_mva": BASE_MVA,
        "transmission": {
            "nodes": nodes,
            "lines": out_tlines,
            "interface_nodes": sorted(ATTACH.values(), key=int),
            "slack": "1",
        },
        "dsos": dsos,
        "base": {"transmission": tbase, "dsos": dbase},
        "bids": {"transmission": tbids, "dsos": dbids},
        "polygon_sides": 12,
    }
    out.write_text(json.dumps(scenario, indent=1) + "\n")


if __name__ == "__main__":
    main()
