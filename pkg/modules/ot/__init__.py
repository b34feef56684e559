from .LogAffinity import LogAffinity, build_log_affinity, positional_log_affinity, cosine_matrix
from .Sinkhorn import (normalize_confidence, sinkhorn, row_normalize, transport_plan, entropic_ot_objective,
                       marginal_residual, column_residual, target_mass, degenerate_points)
