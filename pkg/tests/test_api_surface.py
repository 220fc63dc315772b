import divens
from divens.attacks import ATTACKS
from divens.models import Ensemble
from divens.numgrad import Graph


def test_api_surface() -> None:
    assert hasattr(Ensemble, "predict")
    assert hasattr(Ensemble, "member_probs")
    assert hasattr(Graph, "backward")
    assert sorted(ATTACKS) == ["bim", "cw", "ead", "fgsm", "jsma", "mim", "pgd"]
    for name in divens.__all__:
        assert hasattr(divens, name), name
