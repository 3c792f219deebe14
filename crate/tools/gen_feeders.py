#!/usr/bin/env python3
"""Author the shipped feeder data files.

Builds the 34- and 69-bus radial feeders whose branch lists are compatible
with every reconfiguration case table, calibrates impedances/loads so the
no-ESS evening peak produces genuine voltage violations at far-end buses,
and emits the TOML data files.
"""

import math


def lcg(seed):
    state = seed
    while True:
        state = (state * 6364136223846793005 + 1442695040888963407) % (1 << 64)
        yield (state >> 33) / float(1 << 31)


def feeder34():
    # Main chain 1..30, lateral 31..34 hanging off bus 10.
    lines = []
    for k in range(1, 30):
        lines.append((k, k + 1))
    lines += [(10, 31), (31, 32), (32, 33), (33, 34)]
    rng = lcg(34)
    r = {}
    x = {}
    for i, (a, b) in enumerate(lines):
        if a <= 30 and b <= 30:  # main chain, conductor tapers with depth
            base = 0.00082 + 0.000034 * min(a, b)
        else:  # lateral, lighter conductor
            base = 0.0016 + 0.00022 * (b - 31 if b >= 31 else 0)
        jitter = 1.0 + 0.18 * (next(rng) - 0.5)
        r[(a, b)] = base * jitter
        x[(a, b)] = base * jitter * (0.85 + 0.2 * next(rng))
    loads = {}
    for bus in list(range(2, 31)) + list(range(31, 35)):
        u = next(rng)
        loads[bus] = round(0.72 * (38.0 + 62.0 * u), 1)
    # a few heavier commercial spots
    for bus, p in [(7, 85.0), (18, 91.0), (25, 80.0), (30, 69.0)]:
        loads[bus] = p
    r = {k: v * 0.92 for k, v in r.items()}
    x = {k: v * 0.92 for k, v in x.items()}
    ess = [(n, 500.0, 200.0) for n in (12, 16, 27, 30, 34)]
    return "feeder34", lines, r, x, loads, ess


def feeder69():
    # Main chain 1..53, lateral 54..65 off bus 10, lateral 66..68 off bus 13,
    # spur 69 off bus 13.
    lines = []
    for k in range(1, 53):
        lines.append((k, k + 1))
    lines.append((10, 54))
    for k in range(54, 65):
        lines.append((k, k + 1))
    lines += [(13, 66), (66, 67), (67, 68), (13, 69)]
    rng = lcg(69)
    r = {}
    x = {}
    for a, b in lines:
        if b <= 53:
            base = 0.00048 + 0.0000165 * min(a, b)
        elif 54 <= b <= 65:
            base = 0.0011 + 0.00008 * (b - 54)
        else:
            base = 0.0014 + 0.0002 * (b - 66 if b >= 66 else 0)
        jitter = 1.0 + 0.18 * (next(rng) - 0.5)
        r[(a, b)] = base * jitter
        x[(a, b)] = base * jitter * (0.85 + 0.2 * next(rng))
    loads = {}
    for bus in range(2, 70):
        u = next(rng)
        loads[bus] = round(0.62 * (26.0 + 44.0 * u), 1)
    for bus, p in [(11, 57.0), (27, 64.0), (40, 61.0), (49, 55.0), (61, 56.0), (65, 45.0)]:
        loads[bus] = p
    r = {k: v * 0.81 for k, v in r.items()}
    x = {k: v * 0.81 for k, v in x.items()}
    ess = [(n, 1000.0, 300.0) for n in (14, 16, 18, 20, 22, 24, 26, 27, 65)]
    return "feeder69", lines, r, x, loads, ess


def sweep(n, lines, r, x, p_kw, q_kvar, base_kw=1000.0, v0=1.0):
    """DistFlow backward/forward sweep, printed-equation form."""
    children = {i: [] for i in range(1, n + 1)}
    parent_line = {}
    adj = {i: [] for i in range(1, n + 1)}
    for (a, b) in lines:
        adj[a].append(b)
        adj[b].append(a)
    par = {1: None}
    order = [1]
    queue = [1]
    seen = {1}
    while queue:
        u = queue.pop(0)
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                par[v] = u
                key = (u, v) if (u, v) in r else (v, u)
                children[u].append((v, key))
                parent_line[v] = key
                order.append(v)
                queue.append(v)
    v2 = {i: v0 * v0 for i in range(1, n + 1)}
    ell = {key: 0.0 for key in r}
    for _ in range(60):
        p_flow = {}
        q_flow = {}
        for u in reversed(order):
            if u == 1:
                continue
            key = parent_line[u]
            p = p_kw.get(u, 0.0) / base_kw
            q = q_kvar.get(u, 0.0) / base_kw
            for (c, ck) in children[u]:
                p += p_flow[ck] + r[ck] * ell[ck]
                q += q_flow[ck] + x[ck] * ell[ck]
            p_flow[key] = p
            q_flow[key] = q
            ell[key] = (p * p + q * q) / v2[par[u]]
        new_v2 = {1: v0 * v0}
        delta = 0.0
        for u in order:
            if u == 1:
                continue
            key = parent_line[u]
            pv2 = new_v2[par[u]]
            rr, xx = r[key], x[key]
            val = pv2 - 2 * (rr * p_flow[key] + xx * q_flow[key]) - (rr * rr + xx * xx) * ell[key]
            new_v2[u] = val
            delta = max(delta, abs(math.sqrt(val) - math.sqrt(v2[u])))
        v2 = new_v2
        if delta < 1e-10:
            break
    return {i: math.sqrt(v2[i]) for i in v2}


def report(name, lines, r, x, loads, ess):
    n = max(max(a, b) for a, b in lines)
    tan_phi = math.sqrt(1 / 0.95**2 - 1)
    for label, mult, ess_kw in [
        ("overnight(0.55x)", 0.55, 0.0),
        ("overnight+charge", 0.55, None),
        ("peak(1.47x)", 1.47, 0.0),
        ("peak+discharge", 1.47, "dis"),
    ]:
        p = {b: v * mult for b, v in loads.items()}
        q = {b: v * tan_phi for b, v in p.items()}
        if ess_kw is None:  # all ESS charging at max
            for (node, _cap, pmax) in ess:
                p[node] = p.get(node, 0.0) + pmax
        elif ess_kw == "dis":
            for (node, _cap, pmax) in ess:
                p[node] = p.get(node, 0.0) - pmax
        v = sweep(n, lines, r, x, p, q)
        vmin = min(v.values())
        argmin = min(v, key=v.get)
        viol = sum(1 for val in v.values() if val < 0.95)
        print(f"{name} {label:18s} minV={vmin:.4f} @bus{argmin} buses<0.95: {viol}")
    total = sum(loads.values())
    print(f"{name} total nominal load = {total:.0f} kW over {len(loads)} buses")


def emit_toml(name, lines, r, x, loads, ess, path):
    out = []
    out.append(f"# {name}: radial test feeder data (per-unit on the header base)")
    out.append("")
    out.append("[header]")
    out.append(f'name = "{name}"')
    out.append("base_mva = 1.0")
    out.append("base_kv = 12.66")
    out.append("v_min = 0.95")
    out.append("v_max = 1.05")
    out.append("v_nominal = 1.0")
    out.append("substation = 1")
    for (a, b) in lines:
        out.append("")
        out.append("[[line]]")
        out.append(f"from = {a}")
        out.append(f"to = {b}")
        out.append(f"r_pu = {r[(a,b)]:.6f}")
        out.append(f"x_pu = {x[(a,b)]:.6f}")
    for bus in sorted(loads):
        out.append("")
        out.append("[[load]]")
        out.append(f"node = {bus}")
        out.append(f"p_kw = {loads[bus]}")
    for (node, cap, pmax) in ess:
        out.append("")
        out.append("[[ess]]")
        out.append(f"node = {node}")
        out.append(f"capacity_kwh = {cap}")
        out.append(f"p_max_kw = {pmax}")
        out.append(f"p_min_kw = -{pmax}")
        out.append("efficiency = 1.0")
        out.append("soc_min = 0.2")
        out.append("soc_max = 0.8")
        out.append("soc_init = 0.4")
    with open(path, "w") as f:
        f.write("\n".join(out) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    for builder, path in [(feeder34, "data/feeder34.toml"), (feeder69, "data/feeder69.toml")]:
        name, lines, r, x, loads, ess = builder()
        report(name, lines, r, x, loads, ess)
        emit_toml(name, lines, r, x, loads, ess, path)
