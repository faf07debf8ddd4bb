"""Non-backtracking spectra and extreme singular values of inhomogeneous rectangular random matrices."""

from .bounds import (BoundReport, Direction, bennett_h, bennett_tail, check_hypotheses,
                     dilation_norms, f_g, lemma_lower_bound, lemma_upper_bound, minimal_delta,
                     rescaled_upper_bound, theorem_lower_rhs, theorem_upper_rhs)
from .estimators import DilationTransformer, ExtremeSingularValues, NonBacktrackingRadius
from .harness import (ConfigError, Experiment, ExperimentConfig, TrialRecord, emit_report,
                      run_trials, split_seed)
from .iharabass import (SingularLambdaError, deform, ib_discriminant, imaginary_axis_scan,
                        verify_ib_on_spectrum)
from .model import (ModelKind, ProfileStats, SampledMatrix, VarianceProfile,
                    make_bipartite_profile, make_bounded_profile, profile_stats,
                    sample_bounded_model, sample_centered_adjacency)
from .nonbacktracking import (BudgetExceededError, NBOperator, apply_nb, build_edge_index,
                              build_nb_operator, nb_eigenvalues, spectral_radius, trace_power,
                              trace_powers)
from .spectra import SpectralSummary, dilation, dilation_eigenvalues, mp_edges, singular_values

__version__ = "0.1.0"
