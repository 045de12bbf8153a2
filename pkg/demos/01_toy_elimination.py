"""Serial versus two-ended elimination on the four-keyframe toy chain."""

import numpy as np

from liograph.blockla import normal_solve_oracle
from liograph.eliminate import back_substitute, eliminate_parallel, eliminate_serial, fill_in_count
from liograph.graph import assemble, toy_example, toy_truth

graph = toy_example()
print("keyframes:", graph.n, " factors:", [f"{f.type_name}{f.index}" for f in graph.factors()])

# linearize away from the truth so the step is not trivially zero
x0 = toy_truth() + np.array([[0.3, -0.2], [0.1, 0.4], [-0.5, 0.0], [0.2, 0.2]])

# Serial sweep: x1 -> x4, each A-bar grows by the tau carried from the left.
serial = eliminate_serial(graph, x0)
print("\nserial elimination (stage mode index rows x cols):")
for line in serial.trace():
    print("  ", line)

# Two-ended sweep: x1 and x4 go together, then x2, then x3 is the root.
parallel = eliminate_parallel(graph, x0)
print("\nparallel elimination:")
for line in parallel.trace():
    print("  ", line)
print("stages:", parallel.stages, " root: x%d" % parallel.root_index)

print("\nfill-in  serial:", fill_in_count(serial), " parallel:", fill_in_count(parallel))

# Both nets give the same Gauss-Newton step, and so does the normal-equation oracle.
d_s = back_substitute(serial)
d_p = back_substitute(parallel)
a, b = assemble(graph, x0)
d_o = normal_solve_oracle(a, b).reshape(d_s.shape)
print("\nstep (serial):\n", d_s)
print("max |serial - parallel| = %.2e" % np.abs(d_s - d_p).max())
print("max |serial - oracle|   = %.2e" % np.abs(d_s - d_o).max())
print("x0 + step == truth:", np.allclose(x0 + d_s, toy_truth()))

# The stacked conditionals form R with R^T R = A^T A.
r, _ = serial.stacked_r()
print("\nstacked R (serial), nonzero pattern:")
print((np.abs(r) > 1e-12).astype(int))
