"""HyperParams module

Numerical hyper-parameters of the affinity kernel, the Sinkhorn solver, the consistency kernels and the confidence
loop. Defaults are the published settings (tau=0.01, lambda=3, alpha_f=4, alpha_g=60, two Sinkhorn iterations,
loss weights 0.5/1/1/10, one refinement).
"""

from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict


@dataclass(frozen=True)
class HyperParams:
    """
    Attributes:
        tau (float): Entropic temperature, > 0.
        lambda_ (float): Semantic prior weight, >= 0.
        alpha_g (float): Geometric RBF scale (inverse squared scene units), > 0.
        alpha_f (float): Semantic RBF scale, > 0.
        eps_sem (float): Stability constant inside the semantic logarithm, > 0.
        sinkhorn_iters (int): Sinkhorn iterations, >= 1.
        refine_iters (int): Outer refinement iterations, >= 0.
        conf_iters (int): Confidence fixed-point iterations per phase, >= 1.
        gamma_cycl, gamma_pose, gamma_sem, gamma_conf (float): Loss weights, >= 0.
        z_floor (float): Lower clamp of pseudo-confidence labels.
        conf_floor (float): Mean-confidence floor below which marginals fall back to uniform.
        bce_clamp (float): Clamp applied to both BCE arguments.
        position_weight (float): Weight of the positional prior, >= 0 (0 disables it).
    """
    tau: float = 0.01
    lambda_: float = 3.0
    alpha_g: float = 60.0
    alpha_f: float = 4.0
    eps_sem: float = 1e-6
    sinkhorn_iters: int = 2
    refine_iters: int = 1
    conf_iters: int = 3
    gamma_cycl: float = 0.5
    gamma_pose: float = 1.0
    gamma_sem: float = 1.0
    gamma_conf: float = 10.0
    z_floor: float = 1e-3
    conf_floor: float = 1e-6
    bce_clamp: float = 1e-7
    position_weight: float = 8.0

    def __post_init__(self):
        positive = ('tau', 'alpha_g', 'alpha_f', 'eps_sem', 'z_floor', 'conf_floor', 'bce_clamp')
        nonnegative = ('lambda_', 'gamma_cycl', 'gamma_pose', 'gamma_sem', 'gamma_conf', 'position_weight')
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in nonnegative:
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if int(self.sinkhorn_iters) < 1 or int(self.conf_iters) < 1 or int(self.refine_iters) < 0:
            raise ValueError("sinkhorn_iters and conf_iters must be >= 1, refine_iters >= 0")
        if self.z_floor >= 1.0:
            raise ValueError("z_floor must be < 1")

    def with_values(self, **values: Any) -> 'HyperParams':
        return replace(self, **values)

    @classmethod
    def field_names(cls):
        return [item.name for item in fields(cls)]

    def __json__(self) -> Dict[str, Any]:
        data = asdict(self)
        data['lambda'] = data.pop('lambda_')
        return data
