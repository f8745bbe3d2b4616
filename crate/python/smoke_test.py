"""Generate, run and query a small feed through the Python bindings."""

import json
import math
import sys
import tempfile
from pathlib import Path

import mobility


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        counts = mobility.generate(
            str(tmp / "gen"), routes=4, stations=30, hubs=1, hub_routes=2,
            duration=1200, drop=0.05, dup=0.05, corrupt=0.05, lateness=8.0,
        )
        assert counts["stations"] == 30, counts

        summary = mobility.run(
            str(tmp / "gen" / "feed.txt"), str(tmp / "gen" / "network.txt"), str(tmp / "out"),
            edge_nodes=2,
        )
        assert summary["balanced"] == 1, summary
        assert summary["in"] == counts["feed_lines"], (summary, counts)
        assert summary["snapshots"] == 1, summary

        snaps = str(tmp / "out" / "snapshots")
        scores = mobility.pagerank(snaps)
        assert len(scores) == 30
        assert math.isclose(sum(s for _, s in scores), 1.0, abs_tol=1e-9)

        nodes, cost = mobility.shortest_path(snaps, "s01", "s01")
        assert nodes == ["s01"] and cost == 0.0, (nodes, cost)

        busiest = max(scores, key=lambda p: p[1])[0]
        deg = mobility.degree(snaps, busiest)
        assert deg["total"] == deg["stop"] + deg["move"], deg

        doc = json.loads(mobility.query_json(snaps, "degree", station=busiest))
        assert doc["payload"]["total"] == deg["total"], doc

        n_nodes, n_edges = mobility.export(snaps, str(tmp / "export"))
        edges = (tmp / "export" / "edges.csv").read_text().splitlines()
        assert len(edges) == n_edges + 1

        try:
            mobility.degree(snaps, "nowhere")
        except ValueError:
            pass
        else:
            raise AssertionError("unknown station accepted")

    print(f"smoke ok: {summary}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
