"""blindcs: blind compressed sensing with per-column random measurements.

Recover data ``Y = A X`` (unknown dictionary ``A``, k-sparse ``X``) from
``z_j = Phi_j y_j`` with a different Gaussian ``Phi_j`` for every column.

Modules
-------
model        synthetic dictionaries, sparse codes and instances
measurement  Gaussian and hybrid ``[F; V_j]`` ensembles, projections
bounds       exact sample-size and measurement bounds
grouping     support grouping by rank tests on the fixed sketch ``F Y``
lowrank      rank-k group recovery by alternating least squares
sparse       OMP coefficient recovery with an exhaustive fallback
dictlearn    spectral dictionary learning and refinement
evaluate     matching up to permutation and sign, success criteria
bcs          the end-to-end hybrid pipeline
experiments  seeded experiment harness (E1 to E7)
io           file formats
"""

from .bcs import BCSResult, hybrid_bcs
from .bounds import (BoundInputs, BoundReport, bounds_table, coherence_tail, ell_bound_gaussian,
                     ell_bound_hybrid, gamma_threshold, lowrank_measurement_bound, n_bound_gaussian,
                     n_bound_hybrid, subspace_error_bound)
from .dictlearn import (ClusterOptions, CompressiveData, RefineOptions, build_connection_graph,
                        build_connection_graph_compressive, estimate_dictionary, overlapping_cluster,
                        refine_dictionary)
from .errors import (BCSError, BudgetError, ConfigError, DegenerateError, DimensionError, DomainError,
                     PreconditionError, SingularityError)
from .evaluate import MatchReport, bcs_success, group_error, match_columns
from .experiments import ExperimentConfig, emit_bounds_table, load_config, run_experiment
from .grouping import SupportGrouping, enumerate_dependent_subsets, group_from_sketch, rank_test_fixed
from .lowrank import GroupRecoveryProblem, RecoveryOptions, recover_group, uniqueness_pairing_test
from .measurement import (GaussianEnsemble, HybridEnsemble, MeasurementRecord, apply, project_all,
                          sample_gaussian, sample_hybrid)
from .model import Dictionary, ProblemDims, coherence, generate_dictionary, spark_check, synthesize
from .rng import derive_seed, make_rng
from .sparse import omp, recover_all_coefficients

__version__ = "0.1.0"
