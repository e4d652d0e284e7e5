"""Hypercubes of distributions and generalized Assouad lower bounds."""
from seqrand.minimax.hypercube import Hypercube
from seqrand.minimax.hypercube import edge_discrepancy_I
from seqrand.minimax.hypercube import edge_discrepancy_I_quadrature
from seqrand.minimax.hypercube import edge_discrepancy_II
from seqrand.minimax.hypercube import hypercube_vertex_distribution
from seqrand.minimax.hypercube import no_consistency_bound
from seqrand.minimax.hypercube import pattern_expert_set
from seqrand.minimax.hypercube import psi_tilde
from seqrand.minimax.presets import Preset
from seqrand.minimax.presets import PresetConstraintError
from seqrand.minimax.presets import preset_hypercube
from seqrand.minimax.similarity import assouad_bound_closed
from seqrand.minimax.similarity import product_similarity
from seqrand.minimax.similarity import two_point_similarity
