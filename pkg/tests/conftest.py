import numpy as np
import pytest

from slnet.network import build_grid, network_from_dict

ACCEPTANCE_LINES = []


def star_doc(costs=(0.5, 1.0, 2.0), A=-0.5, lengths=(1.0, 1.0, 1.0), bc="dirichlet", value=0.0):
    """Junction ``O`` with one arc per entry of ``costs`` ending at a boundary node."""
    nodes = [{"id": "O", "kind": "junction", "A": A, "position": [0.0, 0.0]}]
    arcs = []
    for i, (c, ell) in enumerate(zip(costs, lengths)):
        ang = 2 * np.pi * i / len(costs)
        nodes.append({"id": f"B{i}", "kind": "boundary", "bc": {"kind": bc, "value": value},
                      "position": [ell * np.cos(ang), ell * np.sin(ang)]})
        arcs.append({"id": f"J{i}", "from": "O", "to": f"B{i}", "length": ell,
                     "lagrangian": {"type": "quadratic", "c": c}})
    return {"nodes": nodes, "arcs": arcs}


def line_doc(length=4.0, c=0.0, bc="neumann", value=0.0):
    return {
        "nodes": [{"id": "L", "kind": "boundary", "bc": {"kind": bc, "value": value}, "position": [0.0, 0.0]},
                  {"id": "R", "kind": "boundary", "bc": {"kind": bc, "value": value}, "position": [length, 0.0]}],
        "arcs": [{"id": "E", "from": "L", "to": "R", "length": length,
                  "lagrangian": {"type": "quadratic", "c": c}}],
    }


@pytest.fixture
def star_grid():
    net = network_from_dict(star_doc())
    return build_grid(net, 0.1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
