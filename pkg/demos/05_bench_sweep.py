"""
Measuring extraction quality on synthetic streams
=================================================

The generator knows which response answers which comment, so precision
and recall can be computed exactly. The sweep below splits responses into
more and more ASR segments, breaking anywhere (even inside the echo).
"""

# %%
import json
from dataclasses import replace
from importlib import resources

from chatweave.synthbench import BenchRow, run_row, sweep_table

doc = json.loads(resources.files("chatweave").joinpath("data/bench_sweep.json").read_text(encoding="utf-8"))
rows = [BenchRow.from_dict(r) for r in doc["rows"]]

# %%
# fewer streams than the bundled spec to keep the demo quick
results = [run_row(replace(r, n_streams=10)) for r in rows]
for r in results:
    print(f"{r.row.name:16s} P={r.scores.precision:.3f} R={r.scores.recall:.3f}")

# %%
print(sweep_table(results))

# %%
# the same table, full size, from the command line:
#   chatweave bench --spec src/chatweave/data/bench_sweep.json --out sweep/
