"""Streaming keyframes through the chain Bayes tree."""

import numpy as np

from liograph import incremental
from liograph.factors import LINEAR
from liograph.solver import gauss_newton
from liograph.synth import dead_reckoning, first_guess, generate, propagate

graph, truth = generate(30, LINEAR, seed=3)
layout = graph.layout

tree = incremental.init(graph.truncated(1), first_guess(graph)[None, :])
print("step  keyframes  re-eliminated  untouched")
for j in range(1, graph.n):
    x = incremental.estimate(tree)
    guess = propagate(x[-1], graph.between.get(j), layout)
    new = incremental.update(tree, between=graph.between.get(j), gps=graph.gps.get(j + 1), x_init=guess)
    kept = sum(new.conditionals[i] is tree.conditionals.get(i) for i in new.conditionals)
    if j % 5 == 0 or j < 4:
        print("%4d  %9d  %13s  %9d" % (j, new.n, [s.index for s in new.last_steps], kept))
    tree = new

# On a linear chain the streamed answer equals the batch one.
x_stream = incremental.estimate(tree)
x_batch, _ = gauss_newton(graph, dead_reckoning(graph))
print("\nmax |stream - batch| = %.2e" % np.abs(x_stream - x_batch).max())
