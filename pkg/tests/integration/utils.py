"""Shared builders for the Monte-Carlo integration tests."""
import itertools

from seqrand import gibbs
from seqrand import losses
from seqrand import variance
from seqrand.aggregators import seqrand as seqrand_lib
from seqrand.minimax import hypercube


def estimator(name, loss, num_experts, lam, vf=None, output_mode="uniform_draw"):
    return seqrand_lib.EstimatorConfig(
        loss=loss,
        lam=lam,
        prior=gibbs.LogWeights.uniform(num_experts),
        variance_fn=vf or variance.zero("dirac_mixture"),
        output_mode=output_mode,
        estimator=name,
    )


def square_deterministic_cube(m, w, B=1.0):
    return hypercube.Hypercube(m=m, w=w, p_plus=1.0, p_minus=0.0, h1=-B, h2=B, loss=losses.square(B=B))


def binary_sequences(length):
    """All {-1, +1} sequences of the given length with their number of +1."""
    for code in range(2**length):
        ys = [1.0 if (code >> i) & 1 else -1.0 for i in range(length)]
        yield ys, sum(y > 0 for y in ys)


def sequence_probability(num_plus, length, p):
    return p**num_plus * (1.0 - p) ** (length - num_plus)


def index_sequences(num_experts, length):
    """Every sequence of expert indices of the given length, as lists."""
    return [list(draws) for draws in itertools.product(range(num_experts), repeat=length)]
