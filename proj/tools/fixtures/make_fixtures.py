#!/usr/bin/env python3
"""Regenerates fixtures/*.graphml.

Agis and Ernet are single-source measured subtrees of the Topology Zoo graphs
shipped in the `topohub` wheel (pass its path as argv[1]). Chinanet and Ganet
are synthetic trees calibrated to the same summary statistics, because the
Topology Zoo Chinanet graph (hop diameter 4) cannot host 17 paths averaging
3.9 hops over 21 links, and Ganet is not part of the dataset.

Every fixture is a tree whose non-monitor nodes have strictly higher degree
than any monitor, so lowest-degree-first monitor selection recovers the
monitor set exactly.
"""
import json
import random
import sys
import zipfile

import networkx as nx

# name -> (paths, links, accepted hop totals, accepted weight totals)
TARGETS = {
    "agis": (14, 18, (50, 51), (50, 51)),
    "ernet": (12, 13, (39,), (39,)),
    "chinanet": (17, 21, (66, 67), (90,)),
    "ganet": (15, 17, (54,), (53,)),
}


def tree_ok(tree, source, receivers):
    deg = dict(tree.degree())
    if deg[source] != 1:
        return False
    relays = [n for n in tree if n != source and n not in receivers]
    if relays and min(deg[n] for n in relays) <= max(deg[r] for r in receivers):
        return False
    return all(deg[n] >= 3 for n in relays)


def real_subtree(wheel, name, paths, links, hop_totals):
    z = zipfile.ZipFile(wheel)
    d = json.loads(z.read("topohub/data/topozoo/%s.json" % name.capitalize()))
    g = nx.Graph()
    for e in d["edges"]:
        g.add_edge(str(e["source"]), str(e["target"]), dist=e["dist"])
    nodes = sorted(g.nodes(), key=int)
    best = None
    for s in nodes:
        sp = nx.single_source_dijkstra_path(g, s, weight="dist")
        others = [n for n in nodes if n != s]
        for trial in range(20000):
            recv = random.Random(trial).sample(others, paths)
            used = set()
            hops = 0
            for r in recv:
                p = sp[r]
                hops += len(p) - 1
                used |= {tuple(sorted(e)) for e in zip(p, p[1:])}
            if len(used) != links or hops not in hop_totals:
                continue
            tree = nx.Graph(list(used))
            if not tree_ok(tree, s, recv):
                continue
            leaves = sum(1 for r in recv if tree.degree(r) == 1)
            key = (-leaves, s, sorted(recv, key=int))
            if best is None or key < best[0]:
                best = (key, tree, s, recv)
    _, tree, s, recv = best
    for u, v in tree.edges():
        tree[u][v]["dist"] = g[u][v]["dist"]
    return tree, s, recv


def synthetic_tree(name, paths, links, hop_totals, seed):
    rng = random.Random(seed)
    relays = links - paths
    while True:
        # Random recursive tree over source + receivers + relays.
        n = links + 1
        ids = ["%s%d" % (name[:2], i) for i in range(n)]
        tree = nx.Graph()
        tree.add_node(ids[0])
        for i in range(1, n):
            tree.add_edge(ids[i], ids[rng.randrange(i)])
        deg = dict(tree.degree())
        leaves = [v for v in ids if deg[v] == 1]
        if len(leaves) < 2:
            continue
        source = leaves[0]
        by_deg = sorted((v for v in ids if v != source), key=lambda v: -deg[v])
        relay_set = set(by_deg[:relays])
        recv = [v for v in ids if v != source and v not in relay_set]
        if not tree_ok(tree, source, recv):
            continue
        depth = nx.single_source_shortest_path_length(tree, source)
        if sum(depth[r] for r in recv) not in hop_totals:
            continue
        return tree, source, recv


def assign_weights(tree, weight_totals, seed):
    edges = sorted(tuple(sorted(e)) for e in tree.edges())
    if all("dist" in tree[u][v] for u, v in edges):
        dists = [tree[u][v]["dist"] for u, v in edges]
        lo, hi = 1.0, 5000.0
        for _ in range(200):
            scale = (lo + hi) / 2
            w = [max(1, round(x / scale)) for x in dists]
            if sum(w) in weight_totals:
                return dict(zip(edges, w))
            if sum(w) > max(weight_totals):
                lo = scale
            else:
                hi = scale
        raise RuntimeError("no quantisation hits the weight total")
    rng = random.Random(seed)
    target = weight_totals[0]
    w = [1] * len(edges)
    while sum(w) < target:
        i = rng.randrange(len(w))
        if w[i] < 9:
            w[i] += 1
    return dict(zip(edges, w))


def write(name, tree, source, recv, weights):
    nodes = sorted(tree.nodes())
    out = ['<?xml version="1.0" encoding="utf-8"?>',
           '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
           '  <key id="d0" for="edge" attr.name="weight" attr.type="double"/>',
           '  <graph id="%s" edgedefault="undirected">' % name]
    for v in nodes:
        out.append('    <node id="%s"/>' % v)
    for (u, v), w in sorted(weights.items()):
        out.append('    <edge source="%s" target="%s"><data key="d0">%d</data></edge>' % (u, v, w))
    out += ["  </graph>", "</graphml>", ""]
    with open("fixtures/%s.graphml" % name, "w") as f:
        f.write("\n".join(out))
    print(name, "source", source, "monitors", len(recv) + 1)


def main():
    wheel = sys.argv[1]
    for name, (paths, links, hops, weights) in TARGETS.items():
        if name in ("agis", "ernet"):
            tree, s, recv = real_subtree(wheel, name, paths, links, hops)
        else:
            tree, s, recv = synthetic_tree(name, paths, links, hops, seed=len(name))
        write(name, tree, s, recv, assign_weights(tree, weights, seed=len(name)))


if __name__ == "__main__":
    main()
