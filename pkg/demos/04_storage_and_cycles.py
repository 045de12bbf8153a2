"""Storage footprint per tier and the pipelined-QR cycle model."""

from liograph.eliminate import PARALLEL, SERIAL, abar_trace
from liograph.factors import FULL
from liograph.perfmodel import PipelineConfig, elimination_cycles, sweep
from liograph.storage import REPORTED_RATIOS, StorageTier, decode, encode, footprint_table
from liograph.synth import generate

graph, truth = generate(30, FULL, seed=0)

print("tier     bytes    ratio  (reported)")
for label, nbytes, ratio in footprint_table(graph):
    print("%-6s %8d  %6.1fx  %s" % (label, nbytes, ratio, REPORTED_RATIOS.get(label, "")))

blob = encode(graph, truth, StorageTier.COMPRESSED)
_, n, rows = decode(blob)
print(f"\ncompressed stream: {len(blob)} bytes, {len(rows)} block rows for {n} keyframes")

# A-bar sizes: the two-ended sweep splits the tau growth over two lanes
for mode in (SERIAL, PARALLEL):
    steps = abar_trace(graph, mode)
    print(f"{mode:8s} max A-bar rows {max(s.rows for s in steps)}, steps {len(steps)}")

print("\nn_u   serial   parallel  speedup")
rows = sweep(graph, range(1, 9))
by = {(r["mode"], r["n_u"]): r["total_cycles"] for r in rows}
for k in range(1, 9):
    s, p = by[(SERIAL, k)], by[(PARALLEL, k)]
    print("%3d %8.0f %10.0f %8.2f" % (k, s, p, s / p))

rep = elimination_cycles(graph, PARALLEL, PipelineConfig(n_u=4))
print(f"\nparallel, n_u=4: qr {rep.qr_cycles:.0f} + back-substitution {rep.backsub_cycles:.0f} cycles, "
      f"utilization {rep.utilization:.2f}")
