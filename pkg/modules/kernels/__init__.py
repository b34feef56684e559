from .Kernels import phi_cycl, phi_pose, phi_sem, nearest_sq_distances
from .Losses import (ConsistencyReport, SideConsistency, LossBreakdown, loss_cycl, loss_pose, loss_sem, loss_conf,
                     binary_cross_entropy, pseudo_confidence, consistency_report, loss_breakdown)
