import pytest

from modules.core.HyperParams import HyperParams
from modules.pipeline.Correspondence import MODES
from modules.pipeline.Registration import RegistrationConfig
from modules.scenegen.Benchmark import benchmark
from modules.scenegen.SceneGenerator import SceneSpec

pytestmark = pytest.mark.slow

# median rotation errors closer than this count as a tie
TIE_DEGREES = 0.25


def _partial_scenes(count: int = 10):
    return [SceneSpec(n_points=1024, overlap_fraction=0.5, outlier_fraction=0.1, noise_sigma=0.005,
                      rotation_magnitude=60.0 * k / (count - 1), seed=k) for k in range(count)]


@pytest.fixture(scope='module')
def partial_cfg():
    return RegistrationConfig(hp=HyperParams(), n_fine=512, n_coarse=128)


@pytest.fixture(scope='module')
def ablation(partial_cfg):
    return benchmark(_partial_scenes(), partial_cfg, modes=MODES)


def test_partial_scenes_are_recalled(ablation):
    summary = ablation.summaries['confidence_ot']
    assert summary.n_failures == 0
    assert summary.recall >= 0.9


def test_confidences_find_the_overlap(ablation):
    summary = ablation.summaries['confidence_ot']
    assert summary.mean_confidence_auc >= 0.9
    assert summary.mean_overlap_iou >= 0.7


def test_confidence_transport_is_the_most_accurate_mode(ablation):
    medians = {mode: summary.median_rotation_error for mode, summary in ablation.summaries.items()}
    others = [error for mode, error in medians.items() if mode != 'confidence_ot' and error is not None]
    assert medians['confidence_ot'] <= min(others) + TIE_DEGREES


def test_semantic_prior_sharpens_the_plan(partial_cfg):
    specs = _partial_scenes(4)
    with_prior = benchmark(specs, partial_cfg)
    without_prior = benchmark(specs, partial_cfg.with_values(hp=partial_cfg.hp.with_values(lambda_=0.0)))
    assert with_prior.summaries['confidence_ot'].mean_ent < without_prior.summaries['confidence_ot'].mean_ent


def test_refinement_does_not_hurt(partial_cfg):
    specs = _partial_scenes(4)
    median = {}
    for rounds in (0, 1):
        cfg = partial_cfg.with_values(hp=partial_cfg.hp.with_values(refine_iters=rounds))
        median[rounds] = benchmark(specs, cfg).summaries['confidence_ot'].median_rotation_error
    assert median[1] <= median[0] + 1e-3
