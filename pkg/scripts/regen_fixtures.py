#!/usr/bin/env python3
"""Regenerate the demo graph and cost files in graphs/ from the template
builders. Run after changing anything in edgeflow.templates."""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from edgeflow.explore import serialize_cost_model
from edgeflow.graphfile import serialize_graph
from edgeflow.templates import (
    chain_graph,
    detection_chain_53,
    early_exit_chain,
    fig2_dpg,
    fig3_like_cost_model,
    five_actor_chain,
    five_actor_cost_model,
    ssd_like_53,
    vehicle_endpoint_template,
    vehicle_server_template,
)

OUT = pathlib.Path(__file__).resolve().parents[1] / "graphs"


def main() -> None:
    OUT.mkdir(exist_ok=True)
    files = {
        "dpg.yaml": serialize_graph(fig2_dpg()),
        "chain12.yaml": serialize_graph(chain_graph(12, name="chain12")),
        "detection_chain_53.yaml": serialize_graph(detection_chain_53()),
        "ssd_like_53.yaml": serialize_graph(ssd_like_53()),
        "early_exit.yaml": serialize_graph(early_exit_chain(3)),
        "vehicle_endpoint.yaml": serialize_graph(vehicle_endpoint_template()),
        "vehicle_server.yaml": serialize_graph(vehicle_server_template()),
        "chain5.yaml": serialize_graph(five_actor_chain()),
        "chain5_costs.yaml": serialize_cost_model(five_actor_cost_model()),
        "detection_chain_53_costs.yaml": serialize_cost_model(
            fig3_like_cost_model(detection_chain_53())
        ),
    }
    for name, text in files.items():
        (OUT / name).write_text(text, encoding="utf-8")
        print(f"wrote graphs/{name}")


if __name__ == "__main__":
    main()
