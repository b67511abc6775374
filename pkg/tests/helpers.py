"""Random ensemble generators shared by the test modules."""

import warnings

import numpy as np

from dyntunnel.core import ModeEnsemble


def random_ensemble(rng, n_max=50, ratio=(50.0, 1e4), max_coupling=0.1, gamma_r=1.0, complex_pump=True):
    """gamma_n/gamma_r log-uniform in ``ratio``; |g_n|/gamma_n uniform up to ``max_coupling``."""
    n = int(rng.integers(1, n_max + 1))
    gam = gamma_r * 10 ** rng.uniform(np.log10(ratio[0]), np.log10(ratio[1]), n)
    g = gam * rng.uniform(-max_coupling, max_coupling, n)
    a = rng.normal(size=n) + (1j * rng.normal(size=n) if complex_pump else 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ModeEnsemble.from_arrays(gamma_r, gam, g, a)


def ensemble_with_G(rng, G, n_max=50, ratio=(50.0, 1e4), gamma_r=1.0):
    """Random ensemble rescaled so that sum g_n^2/(gamma_n gamma_r) equals G exactly (up to rounding)."""
    n = int(rng.integers(1, n_max + 1))
    gam = gamma_r * 10 ** rng.uniform(np.log10(ratio[0]), np.log10(ratio[1]), n)
    w = rng.dirichlet(np.ones(n))
    g = np.sqrt(w * G * gamma_r * gam) * rng.choice([-1.0, 1.0], n)
    a = rng.uniform(0.5, 1.5, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ModeEnsemble.from_arrays(gamma_r, gam, g, a)
