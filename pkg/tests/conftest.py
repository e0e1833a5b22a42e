import numpy as np
import pytest

from lagrange_swarm.dynamics import ConstantInertiaModel, TwoLinkArm, TwoLinkArmParams
from lagrange_swarm.graph import DirectedGraph, SwitchingSignal
from lagrange_swarm.scenario import default_scenario, parse_agent_table, bundled_path
from lagrange_swarm.simulation import run

TABLE_ROWS = parse_agent_table(bundled_path("agents.csv").read_text())


def table_params(i: int) -> TwoLinkArmParams:
    """Agent parameter set i (1-based) of the bundled table."""
    r = TABLE_ROWS[i - 1]
    return TwoLinkArmParams(**{f: r[f] for f in TwoLinkArmParams.FIELDS})


def random_tree_graph(rng, n_max: int, extra: bool = True, w=(0.5, 5.0)) -> DirectedGraph:
    """Random graph on n <= n_max followers containing a spanning tree rooted at node 0."""
    n = int(rng.integers(1, n_max + 1))
    placed, edges = [0], []
    for v in rng.permutation(np.arange(1, n + 1)):
        edges.append((int(rng.choice(placed)), int(v), float(rng.uniform(*w))))
        placed.append(int(v))
    if extra:
        for _ in range(int(rng.integers(0, 2 * n + 1))):
            s, d = int(rng.integers(0, n + 1)), int(rng.integers(1, n + 1))
            if s != d:
                edges.append((s, d, float(rng.uniform(*w))))
    return DirectedGraph.from_edges(n, edges)


def fixed_variant(sc, **kw):
    """Fixed-topology, no-blackout version of a scenario (first A and B graphs)."""
    return sc.with_(gA=SwitchingSignal.constant(sc.gA.topologies[0]),
                    gB=SwitchingSignal.constant(sc.gB.topologies[0]),
                    paired=False, blackout=None, **kw)


@pytest.fixture(scope="session")
def demo_sc():
    return default_scenario()


@pytest.fixture(scope="session")
def demo_trace(demo_sc):
    return run(demo_sc)


@pytest.fixture(scope="session")
def fixed_sc(demo_sc):
    # h = 1e-5: the signum law's sampled V chatters at O(h), see the decay check
    return fixed_variant(demo_sc, t_end=30.0, substeps=100)


@pytest.fixture(scope="session")
def fixed_trace(fixed_sc):
    return run(fixed_sc)


@pytest.fixture
def unit_model():
    return ConstantInertiaModel(np.eye(2))


@pytest.fixture
def arm1():
    return TwoLinkArm(table_params(1))


# -- acceptance summary ------------------------------------------------------------

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def verdict(request):
    """Record and print a one-line PASS/FAIL verdict for an acceptance criterion."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append((k, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


def random_bounds(rng):
    """Randomized but physically plausible bound-constant set."""
    from lagrange_swarm.dynamics import BoundConstants
    km = float(rng.uniform(0.01, 1.0))
    return BoundConstants(k_m_lower=km, k_M_upper=km * float(rng.uniform(1.0, 20.0)),
                          k_C=float(rng.uniform(0.0, 2.0)), k_g=float(rng.uniform(0.0, 30.0)),
                          k_zeta=float(rng.uniform(0.0, 5.0)), k_p=float(rng.uniform(0.1, 5.0)),
                          k_q=float(rng.uniform(0.1, 5.0)), k_a=float(rng.uniform(0.1, 10.0)),
                          k_b=float(rng.uniform(0.1, 10.0)))
