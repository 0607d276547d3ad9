import numpy as np
import pytest

from deepsr.dataset import ToyCorpusSpec, generate_toy_corpus
from deepsr.dictlearn import DictLearnConfig
from deepsr.imaging import bicubic_resize, load_image, vectorize
from deepsr.sparse import LassoConfig
from deepsr.synthesis import SynthesisConfig, train

TOY_SPEC = ToyCorpusSpec(
    n_subjects=40,
    hr_size=24,
    lr_size=6,
    probes_per_subject=2,
    seed=0,
    perturbation=0.3,
)

FIXTURE_LASSO = LassoConfig(lam=0.05, max_iters=4000, tol=1e-13)


def fixture_config(levels: int = 2) -> SynthesisConfig:
    atoms = [60, 40, 30][:levels]
    per_level = tuple(
        DictLearnConfig(
            n_atoms=a,
            lam=0.05,
            epochs=15,
            lasso=FIXTURE_LASSO,
            seed=j,
        )
        for j, a in enumerate(atoms)
    )
    return SynthesisConfig(
        levels=levels,
        per_level=per_level,
        lr_shape=(TOY_SPEC.lr_size, TOY_SPEC.lr_size),
        hr_shape=(TOY_SPEC.hr_size, TOY_SPEC.hr_size),
        lambda_m=1e-6,
    )


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("toy_corpus")
    return generate_toy_corpus(TOY_SPEC, out)


@pytest.fixture(scope="session")
def training_matrices(toy_corpus):
    """Gallery pairs: HR column = gallery image, LR = downsampled gallery."""
    hr_cols, lr_cols = [], []
    for e in toy_corpus.gallery:
        img = load_image(e.path)
        hr_cols.append(vectorize(img))
        lr_cols.append(
            vectorize(bicubic_resize(img, TOY_SPEC.lr_size, TOY_SPEC.lr_size))
        )
    return np.stack(lr_cols, axis=1), np.stack(hr_cols, axis=1)


@pytest.fixture(scope="session")
def trained(training_matrices):
    xl, xh = training_matrices
    return train(xl, xh, fixture_config(2))
