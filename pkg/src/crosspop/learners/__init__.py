"""Candidate prediction models and the stacking ensemble."""

from .families import BINOMIAL, GAUSSIAN, MULTINOMIAL, canonical_family
from .glm import GLMFit, fit_glm
from .lasso import LassoFit, fit_lasso
from .multinomial import MultinomialFit, fit_multinomial, fit_multinomial_cv
from .nnet import NNetFit, fit_nnet
from .stacking import (
    CONVEX_STACK,
    DISCRETE_SELECT,
    CandidateSpec,
    LearnerSpec,
    StackFit,
    fit_super_learner,
)

__all__ = [
    "BINOMIAL",
    "GAUSSIAN",
    "MULTINOMIAL",
    "canonical_family",
    "GLMFit",
    "fit_glm",
    "LassoFit",
    "fit_lasso",
    "MultinomialFit",
    "fit_multinomial",
    "fit_multinomial_cv",
    "NNetFit",
    "fit_nnet",
    "CONVEX_STACK",
    "DISCRETE_SELECT",
    "CandidateSpec",
    "LearnerSpec",
    "StackFit",
    "fit_super_learner",
]
