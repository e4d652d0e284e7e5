"""Aggregation procedures over a finite expert table."""
from seqrand.aggregators.bounds import absolute_lambda
from seqrand.aggregators.bounds import bernstein_margin_lambda
from seqrand.aggregators.bounds import heavy_tail_lambda
from seqrand.aggregators.bounds import hoeffding_lambda
from seqrand.aggregators.bounds import upper_bound_value
from seqrand.aggregators.online import OnlineResult
from seqrand.aggregators.online import online_seqrand
from seqrand.aggregators.seqrand import EstimatorConfig
from seqrand.aggregators.seqrand import FittedAggregate
from seqrand.aggregators.seqrand import gibbs_erm
from seqrand.aggregators.seqrand import progressive_mixture
from seqrand.aggregators.seqrand import seqrand_fit
from seqrand.aggregators.seqrand import seqrand_predict
from seqrand.aggregators.seqrand import seqrand_replay
from seqrand.aggregators.seqrand import telescoping_gap
from seqrand.aggregators.substitution import SubstitutionError
from seqrand.aggregators.substitution import algorithm_b_substitution
