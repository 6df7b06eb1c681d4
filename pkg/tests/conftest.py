import random
from pathlib import Path

import pytest

from paf.formats import load_map
from paf.graph import Edge, Node, validate_map

WORKFLOWS = Path(__file__).resolve().parent.parent / "workflows"


@pytest.fixture(scope="session")
def healthcare_map():
    return load_map(WORKFLOWS / "healthcare_eligibility.json")


@pytest.fixture(scope="session")
def isp_map():
    return load_map(WORKFLOWS / "isp_troubleshooting.json")


@pytest.fixture
def chain_map():
    """start -> a -> finish"""
    return validate_map(
        "chain",
        [
            Node("start", "start", "say hello"),
            Node("a", "generic", "ask a question"),
            Node("finish", "end", "say goodbye"),
        ],
        [
            Edge("start", "a", "the user replied"),
            Edge("a", "finish", "the question was answered"),
        ],
    )


def random_valid_map(rng: random.Random, max_nodes: int = 12):
    """Generate a random valid map: random edges filtered to the reachable set.

    Independent of validate_map's own reachability logic: reachability here is
    computed by brute-force transitive closure.
    """
    n = rng.randint(1, max_nodes)
    ids = [f"n{i:02d}" for i in range(n)]
    rng.shuffle(ids)
    start = ids[0]
    kinds = {start: "start"}
    for node_id in ids[1:]:
        kinds[node_id] = rng.choice(["generic", "generic", "end", "transfer"])
    candidates = [
        (a, b)
        for a in ids
        for b in ids
        if kinds[a] != "end" and rng.random() < 0.35
    ]
    # Transitive-closure reachability (brute force).
    reach = {start}
    changed = True
    while changed:
        changed = False
        for a, b in candidates:
            if a in reach and b not in reach:
                reach.add(b)
                changed = True
    ids = [i for i in ids if i in reach]
    edges = [
        Edge(a, b, f"cond {a} to {b}")
        for a, b in sorted(set(candidates))
        if a in reach and b in reach
    ]
    nodes = [Node(i, kinds[i], f"instruction for {i}") for i in ids]
    return validate_map("random", nodes, edges)
